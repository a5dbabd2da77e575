#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pbnn {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PBNN_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

// tensor_nn
PBNN_DEFINE_ERROR(ShapeError);
PBNN_DEFINE_ERROR(LabelOutOfRange);
PBNN_DEFINE_ERROR(OddDepth);
PBNN_DEFINE_ERROR(BadArchitecture);
PBNN_DEFINE_ERROR(EmptyDataset);
PBNN_DEFINE_ERROR(CheckpointError);

// graphcut
PBNN_DEFINE_ERROR(NonMetricSmoothness);
PBNN_DEFINE_ERROR(SameLabels);
PBNN_DEFINE_ERROR(DimensionMismatch);
PBNN_DEFINE_ERROR(BadCrfParams);

// metrics
PBNN_DEFINE_ERROR(TooSmall);
PBNN_DEFINE_ERROR(EmptyInput);
PBNN_DEFINE_ERROR(CsvError);

// data
PBNN_DEFINE_ERROR(NegativeSigma);
PBNN_DEFINE_ERROR(PatchTooLarge);
PBNN_DEFINE_ERROR(BadParams);
PBNN_DEFINE_ERROR(MalformedHeader);
PBNN_DEFINE_ERROR(UnsupportedMaxval);
PBNN_DEFINE_ERROR(TruncatedFile);
PBNN_DEFINE_ERROR(IoError);

// bootstrap
PBNN_DEFINE_ERROR(InsufficientGroundTruth);
PBNN_DEFINE_ERROR(InsufficientImputed);

// cli
PBNN_DEFINE_ERROR(ConfigError);

#undef PBNN_DEFINE_ERROR

/// Raised when the black-box pipeline throws on one input of a batch.
class PipelineEvaluationFailure : public Error {
 public:
  PipelineEvaluationFailure(std::size_t index, const std::string& what)
      : Error("pipeline failed on example " + std::to_string(index) + ": " + what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace pbnn
