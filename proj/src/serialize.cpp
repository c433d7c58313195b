#include "moyapred/serialize.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

namespace moyapred {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'Y', 'A', 'P', 'R', 'E', 'D'};

class Writer {
 public:
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out_.push_back(static_cast<char>(static_cast<std::uint8_t>(v >> (8 * i))));
    }
  }
  void u8(std::uint8_t v) { uint(v); }
  void u32(std::uint32_t v) { uint(v); }
  void u64(std::uint64_t v) { uint(v); }
  void i32(std::int32_t v) { uint(static_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { out_.append(s); }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(static_cast<std::uint8_t>(in_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }
  std::uint8_t u8() { return uint<std::uint8_t>(); }
  std::uint16_t u16() { return uint<std::uint16_t>(); }
  std::uint32_t u32() { return uint<std::uint32_t>(); }
  std::uint64_t u64() { return uint<std::uint64_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view raw(std::size_t n) {
    need(n);
    const auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  // Guards element counts against the bytes actually present.
  std::size_t count(std::uint64_t n, std::size_t bytes_each) {
    if (bytes_each > 0 && n > (in_.size() - pos_) / bytes_each) {
      throw FormatError("model file truncated");
    }
    return static_cast<std::size_t>(n);
  }

  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("model file truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_header(Writer& w, char record) {
  w.raw(std::string_view(kMagic, sizeof kMagic));
  w.uint<std::uint16_t>(kModelFormatVersion);
  w.u8(1);
  w.u8(8);
  w.u8(static_cast<std::uint8_t>(record));
}

char read_header(Reader& r) {
  if (r.raw(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    throw FormatError("not a moyapred model file");
  }
  if (const auto v = r.u16(); v != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(v));
  }
  if (r.u8() != 1) throw FormatError("unsupported byte order");
  if (r.u8() != 8) throw FormatError("unsupported real width");
  const auto record = static_cast<char>(r.u8());
  if (record != 'M' && record != 'F') throw FormatError("unknown record type");
  return record;
}

void write_model(Writer& w, const TrainedModel& model) {
  w.u8(static_cast<std::uint8_t>(kind_of(model)));
  if (const auto* a = std::get_if<ann::Model>(&model)) {
    w.u64(a->arch.input_width);
    w.u64(a->arch.hidden_layers.size());
    for (const auto h : a->arch.hidden_layers) w.u64(h);
    for (const auto& layer : a->layers) {
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.f64(layer.weights(r, c));
      }
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) w.f64(layer.bias(r));
    }
  } else if (const auto* s = std::get_if<svm::Model>(&model)) {
    w.u64(s->width);
    w.u64(s->support_count());
    w.f64(s->bias);
    w.f64(s->gamma);
    for (const double c : s->coefficients) w.f64(c);
    for (const double v : s->support_vectors) w.f64(v);
  } else if (const auto* f = std::get_if<forest::Model>(&model)) {
    w.u64(f->width);
    w.u64(f->trees.size());
    for (const auto& tree : f->trees) {
      w.u64(tree.nodes.size());
      for (const auto& node : tree.nodes) {
        w.i32(node.feature);
        w.f64(node.threshold);
        w.u32(node.left);
        w.u32(node.right);
        w.u32(node.counts[0]);
        w.u32(node.counts[1]);
      }
    }
  }
}

TrainedModel read_model(Reader& r) {
  const auto kind = r.u8();
  switch (kind) {
    case static_cast<std::uint8_t>(ModelKind::ann): {
      ann::Architecture arch;
      arch.input_width = r.u64();
      arch.hidden_layers.resize(r.count(r.u64(), 8));
      for (auto& h : arch.hidden_layers) h = r.u64();
      try {
        arch.validate();
      } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("invalid network architecture: ") + e.what());
      }
      ann::Model m;
      m.arch = arch;
      const auto widths = arch.widths();
      for (std::size_t k = 1; k < widths.size(); ++k) {
        const auto rows = static_cast<Eigen::Index>(widths[k]);
        const auto cols = static_cast<Eigen::Index>(widths[k - 1]);
        r.count(widths[k] * (widths[k - 1] + 1), 8);
        ann::Layer layer{ann::Matrix(rows, cols), ann::Vector(rows)};
        for (Eigen::Index i = 0; i < rows; ++i) {
          for (Eigen::Index j = 0; j < cols; ++j) layer.weights(i, j) = r.f64();
        }
        for (Eigen::Index i = 0; i < rows; ++i) layer.bias(i) = r.f64();
        m.layers.push_back(std::move(layer));
      }
      return m;
    }
    case static_cast<std::uint8_t>(ModelKind::svm): {
      svm::Model m;
      m.width = r.count(r.u64(), 0);
      const auto n = r.count(r.u64(), 8 * (m.width + 1));
      m.bias = r.f64();
      m.gamma = r.f64();
      m.coefficients.resize(n);
      for (auto& c : m.coefficients) c = r.f64();
      m.support_vectors.resize(n * m.width);
      for (auto& v : m.support_vectors) v = r.f64();
      return m;
    }
    case static_cast<std::uint8_t>(ModelKind::forest): {
      forest::Model m;
      m.width = r.count(r.u64(), 0);
      m.trees.resize(r.count(r.u64(), 8));
      for (auto& tree : m.trees) {
        tree.nodes.resize(r.count(r.u64(), 28));
        for (auto& node : tree.nodes) {
          node.feature = r.i32();
          node.threshold = r.f64();
          node.left = r.u32();
          node.right = r.u32();
          node.counts = {r.u32(), r.u32()};
        }
        if (tree.nodes.empty()) throw FormatError("empty tree");
        for (const auto& node : tree.nodes) {
          if (node.is_leaf()) continue;
          if (static_cast<std::size_t>(node.feature) >= m.width || node.left >= tree.nodes.size() ||
              node.right >= tree.nodes.size()) {
            throw FormatError("corrupt tree node");
          }
        }
      }
      return m;
    }
    default:
      throw FormatError("unknown model kind tag " + std::to_string(kind));
  }
}

}  // namespace

std::string serialize_model(const TrainedModel& model) {
  Writer w;
  write_header(w, 'M');
  write_model(w, model);
  return w.take();
}

TrainedModel deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  if (read_header(r) != 'M') throw FormatError("expected a bare model record");
  auto model = read_model(r);
  if (!r.done()) throw FormatError("trailing bytes after model");
  return model;
}

std::string serialize_fitted(const FittedModel& fitted) {
  Writer w;
  write_header(w, 'F');
  w.u32(static_cast<std::uint32_t>(fitted.scaler.columns.size()));
  for (const auto& c : fitted.scaler.columns) {
    w.u64(c.index);
    w.f64(c.mean);
    w.f64(c.sd);
    w.u8(c.passthrough ? 1 : 0);
  }
  write_model(w, fitted.model);
  return w.take();
}

FittedModel deserialize_fitted(std::string_view bytes) {
  Reader r(bytes);
  if (read_header(r) != 'F') throw FormatError("expected a fitted model record");
  FittedModel fitted;
  fitted.scaler.columns.resize(r.count(r.u32(), 25));
  for (auto& c : fitted.scaler.columns) {
    c.index = r.u64();
    c.mean = r.f64();
    c.sd = r.f64();
    c.passthrough = r.u8() != 0;
  }
  fitted.model = read_model(r);
  if (!r.done()) throw FormatError("trailing bytes after model");
  const std::size_t width = std::visit(
      [](const auto& m) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ann::Model>) {
          return m.arch.input_width;
        } else {
          return m.width;
        }
      },
      fitted.model);
  for (const auto& c : fitted.scaler.columns) {
    if (c.index >= width) throw FormatError("scaler column outside the model width");
  }
  return fitted;
}

void save_fitted(const std::string& path, const FittedModel& fitted) {
  write_text_file(path, serialize_fitted(fitted));
}

FittedModel load_fitted(const std::string& path) {
  return deserialize_fitted(read_text_file(path));
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace moyapred
