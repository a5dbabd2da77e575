#include "pbnn/checkpoint.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace pbnn {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }

  template <typename T>
  void le(T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  void f64(double d) { le(std::bit_cast<std::uint64_t>(d)); }

  void tensor(const Tensor& t) {
    le(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) le(static_cast<std::uint32_t>(d));
    for (double v : t.flat()) f64(v);
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}

  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw CheckpointError(fmt::format("checkpoint truncated at byte {}", pos_));
  }

  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(T);
    return v;
  }

  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }

  Tensor tensor() {
    const auto rank = le<std::uint32_t>();
    if (rank > 8) throw CheckpointError(fmt::format("implausible tensor rank {}", rank));
    Shape shape(rank);
    for (auto& d : shape) d = le<std::uint32_t>();
    const std::size_t n = shape_size(shape);
    need(n * 8);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = f64();
    try {
      return Tensor(std::move(shape), std::move(v));
    } catch (const ShapeError& e) {
      throw CheckpointError(e.what());
    }
  }

  std::string_view take(std::size_t n) {
    need(n);
    std::string_view v(s_.data() + pos_, n);
    pos_ += n;
    return v;
  }

  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Network& net) {
  validate(net);
  Writer w;
  w.bytes("PBNN", 4);
  w.le(checkpoint_version);
  w.le(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    w.le(static_cast<std::uint8_t>(l.kind));
    w.le(static_cast<std::uint32_t>(l.kernel));
    w.le(static_cast<std::uint32_t>(l.in_channels));
    w.le(static_cast<std::uint32_t>(l.out_channels));
    w.le(static_cast<std::uint32_t>(l.skip_slot));
    if (l.has_parameters()) {
      w.tensor(l.weights);
      w.tensor(l.bias);
    }
  }
  w.le(static_cast<std::uint32_t>(net.skips.size()));
  for (const auto& s : net.skips) {
    w.le(static_cast<std::uint32_t>(s.from));
    w.le(static_cast<std::uint32_t>(s.to));
  }
  return w.take();
}

Network decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(4) != "PBNN") throw CheckpointError("bad magic, not a PBNN checkpoint");
  const auto version = r.le<std::uint16_t>();
  if (version != checkpoint_version) throw CheckpointError(fmt::format("unsupported checkpoint version {}", version));
  Network net;
  const auto count = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto tag = r.le<std::uint8_t>();
    if (tag < 1 || tag > 5) throw CheckpointError(fmt::format("unknown layer kind tag {} at layer {}", tag, i));
    Layer l;
    l.kind = static_cast<LayerKind>(tag);
    l.kernel = r.le<std::uint32_t>();
    l.in_channels = r.le<std::uint32_t>();
    l.out_channels = r.le<std::uint32_t>();
    l.skip_slot = r.le<std::uint32_t>();
    if (l.has_parameters()) {
      l.weights = r.tensor();
      l.bias = r.tensor();
      const Shape expected_w = l.kind == LayerKind::conv2d
                                   ? Shape{l.out_channels, l.in_channels, l.kernel, l.kernel}
                                   : Shape{l.out_channels, l.in_channels};
      if (l.weights.shape() != expected_w || l.bias.shape() != Shape{l.out_channels}) {
        throw CheckpointError(fmt::format("layer {} parameter shapes disagree with its hyperparameters", i));
      }
    }
    net.layers.push_back(std::move(l));
  }
  const auto skips = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < skips; ++i) {
    SkipPair p;
    p.from = r.le<std::uint32_t>();
    p.to = r.le<std::uint32_t>();
    net.skips.push_back(p);
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
  try {
    validate(net);
  } catch (const BadArchitecture& e) {
    throw CheckpointError(e.what());
  }
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  const std::string bytes = encode_checkpoint(net);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(fmt::format("write failed: {}", path.string()));
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot open {}", path.string()));
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace pbnn
