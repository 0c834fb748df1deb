#pragma once
// Two-scale fully convolutional cost network with hand-written reverse mode.
//
//   input (3 x H x W)
//     main:  conv5x5 3->8, sigmoid, conv3x3 8->8, sigmoid
//     scale: maxpool 2x2, conv5x5 3->8, sigmoid, nearest upsample x2
//   concat (16 ch) -> conv1x1 16->1 -> sigmoid -> cost in (0,1)
//
// All convolutions are same-padded with zeros.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "medirl/common.hpp"
#include "medirl/grid.hpp"

namespace medirl {

/// Channels: 0 mean point height (m), 1 height range (m), 2 normalized point count.
struct OccupancyGrid {
  static constexpr int kChannels = 3;
  static constexpr int kMeanHeight = 0;
  static constexpr int kHeightRange = 1;
  static constexpr int kPointCount = 2;

  Tensor3 data;

  OccupancyGrid() = default;
  OccupancyGrid(int height, int width) : data(kChannels, height, width, 0.0) {}
  explicit OccupancyGrid(Tensor3 t) : data(std::move(t)) {}

  [[nodiscard]] int height() const { return data.height; }
  [[nodiscard]] int width() const { return data.width; }
  double& mean_height(int y, int x) { return data(kMeanHeight, y, x); }
  double& height_range(int y, int x) { return data(kHeightRange, y, x); }
  double& point_count(int y, int x) { return data(kPointCount, y, x); }
  [[nodiscard]] double mean_height(int y, int x) const { return data(kMeanHeight, y, x); }
  [[nodiscard]] double height_range(int y, int x) const { return data(kHeightRange, y, x); }
  [[nodiscard]] double point_count(int y, int x) const { return data(kPointCount, y, x); }

  void validate() const {
    if (data.channels != kChannels) throw std::invalid_argument("OccupancyGrid: expected 3 channels");
    for (double v : data.data)
      if (!std::isfinite(v)) throw std::invalid_argument("OccupancyGrid: non-finite value");
    for (int y = 0; y < height(); ++y)
      for (int x = 0; x < width(); ++x) {
        if (height_range(y, x) < 0.0)
          throw std::invalid_argument("OccupancyGrid: negative height range");
        if (point_count(y, x) == 0.0 && (mean_height(y, x) != 0.0 || height_range(y, x) != 0.0))
          throw std::invalid_argument("OccupancyGrid: empty cell with nonzero channels");
      }
  }

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;
};

/// Per-cell cost in (0,1); 1 is untraversable.
using CostMap = Grid<double>;

struct ConvShape {
  int in = 0;
  int out = 0;
  int kernel = 1;

  [[nodiscard]] std::size_t weight_count() const {
    return static_cast<std::size_t>(out) * static_cast<std::size_t>(in) *
           static_cast<std::size_t>(kernel) * static_cast<std::size_t>(kernel);
  }
  friend bool operator==(const ConvShape&, const ConvShape&) = default;
};

struct NetConfig {
  ConvShape main1{3, 8, 5};
  ConvShape main2{8, 8, 3};
  ConvShape scale{3, 8, 5};
  ConvShape merge{16, 1, 1};

  [[nodiscard]] std::vector<ConvShape> layers() const { return {main1, main2, scale, merge}; }

  void validate() const {
    auto odd = [](const ConvShape& c) { return c.kernel >= 1 && c.kernel % 2 == 1; };
    if (!odd(main1) || !odd(main2) || !odd(scale) || !odd(merge))
      throw std::invalid_argument("NetConfig: kernels must be odd");
    if (main1.in != OccupancyGrid::kChannels || scale.in != OccupancyGrid::kChannels)
      throw std::invalid_argument("NetConfig: input layers must take 3 channels");
    if (main2.in != main1.out || merge.in != main2.out + scale.out || merge.out != 1)
      throw std::invalid_argument("NetConfig: inconsistent channel counts");
  }

  /// Stable textual description of the layer shapes.
  [[nodiscard]] std::string describe() const {
    std::string s;
    for (const auto& l : layers())
      s += std::to_string(l.in) + "x" + std::to_string(l.out) + "k" + std::to_string(l.kernel) + ";";
    return s;
  }
  [[nodiscard]] std::uint64_t fingerprint() const { return fnv1a(describe()); }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct ConvParams {
  ConvShape shape;
  std::vector<double> weight;  // out x in x k x k
  std::vector<double> bias;    // out

  explicit ConvParams(ConvShape s = {})
      : shape(s), weight(s.weight_count(), 0.0), bias(static_cast<std::size_t>(s.out), 0.0) {}

  [[nodiscard]] double w(int o, int i, int ky, int kx) const {
    const int k = shape.kernel;
    return weight[((static_cast<std::size_t>(o) * shape.in + i) * k + ky) * k + kx];
  }

  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

/// All weights and biases, layers ordered main1, main2, scale, merge.
struct NetworkParams {
  NetConfig config;
  std::vector<ConvParams> layers;

  NetworkParams() : NetworkParams(NetConfig{}) {}
  explicit NetworkParams(const NetConfig& cfg) : config(cfg) {
    config.validate();
    for (const auto& s : config.layers()) layers.emplace_back(s);
  }

  [[nodiscard]] std::size_t size() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  [[nodiscard]] std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for (const auto& l : layers) {
      out.insert(out.end(), l.weight.begin(), l.weight.end());
      out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    return out;
  }

  static NetworkParams unflatten(const NetConfig& cfg, std::span<const double> flat) {
    NetworkParams p(cfg);
    if (flat.size() != p.size()) throw std::invalid_argument("unflatten: wrong parameter count");
    std::size_t k = 0;
    for (auto& l : p.layers) {
      for (double& w : l.weight) w = flat[k++];
      for (double& b : l.bias) b = flat[k++];
    }
    return p;
  }

  [[nodiscard]] double squared_norm() const {
    double s = 0.0;
    for (const auto& l : layers) {
      for (double w : l.weight) s += w * w;
      for (double b : l.bias) s += b * b;
    }
    return s;
  }

  /// this += scale * other
  void axpy(double scale, const NetworkParams& other) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& a = layers[i];
      const auto& b = other.layers[i];
      for (std::size_t j = 0; j < a.weight.size(); ++j) a.weight[j] += scale * b.weight[j];
      for (std::size_t j = 0; j < a.bias.size(); ++j) a.bias[j] += scale * b.bias[j];
    }
  }

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

inline NetworkParams zeros_like(const NetworkParams& p) { return NetworkParams(p.config); }

// ---------------------------------------------------------------------------
// Layers

namespace layers {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Tensor3 conv2d(const Tensor3& in, const ConvParams& p) {
  const ConvShape& s = p.shape;
  if (in.channels != s.in) throw std::invalid_argument("conv2d: channel mismatch");
  const int h = in.height, w = in.width, k = s.kernel, pad = k / 2;
  Tensor3 out(s.out, h, w, 0.0);
  for (int o = 0; o < s.out; ++o) {
    double* dst = out.data.data() + static_cast<std::size_t>(o) * out.plane();
    std::fill(dst, dst + out.plane(), p.bias[static_cast<std::size_t>(o)]);
    for (int i = 0; i < s.in; ++i) {
      const double* src = in.data.data() + static_cast<std::size_t>(i) * in.plane();
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          const double wt = p.w(o, i, ky, kx);
          for (int y = y0; y < y1; ++y) {
            double* row = dst + static_cast<std::size_t>(y) * w;
            const double* srow = src + static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x0; x < x1; ++x) row[x] += wt * srow[x];
          }
        }
      }
    }
  }
  return out;
}

/// Accumulates parameter gradients into `grad`; returns the input gradient when requested.
inline Tensor3 conv2d_backward(const Tensor3& in, const ConvParams& p, const Tensor3& grad_out,
                               ConvParams& grad, bool want_input_grad = true) {
  const ConvShape& s = p.shape;
  if (grad_out.channels != s.out || grad_out.height != in.height || grad_out.width != in.width)
    throw std::invalid_argument("conv2d_backward: gradient shape mismatch");
  const int h = in.height, w = in.width, k = s.kernel, pad = k / 2;
  Tensor3 grad_in;
  if (want_input_grad) grad_in = Tensor3(in.channels, h, w, 0.0);
  for (int o = 0; o < s.out; ++o) {
    const double* g = grad_out.data.data() + static_cast<std::size_t>(o) * grad_out.plane();
    double bsum = 0.0;
    for (std::size_t j = 0; j < grad_out.plane(); ++j) bsum += g[j];
    grad.bias[static_cast<std::size_t>(o)] += bsum;
    for (int i = 0; i < s.in; ++i) {
      const double* src = in.data.data() + static_cast<std::size_t>(i) * in.plane();
      double* gsrc = want_input_grad ? grad_in.data.data() + static_cast<std::size_t>(i) * in.plane()
                                     : nullptr;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          const std::size_t widx = ((static_cast<std::size_t>(o) * s.in + i) * k + ky) * k + kx;
          const double wt = p.weight[widx];
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * w;
            const std::size_t soff = static_cast<std::size_t>(y + dy) * w + dx;
            const double* srow = src + soff;
            for (int x = x0; x < x1; ++x) acc += grow[x] * srow[x];
            if (gsrc) {
              double* gs = gsrc + soff;
              for (int x = x0; x < x1; ++x) gs[x] += wt * grow[x];
            }
          }
          grad.weight[widx] += acc;
        }
      }
    }
  }
  return grad_in;
}

inline void sigmoid_inplace(Tensor3& t) {
  for (double& v : t.data) v = sigmoid(v);
}

/// Gradient w.r.t. the pre-activation given the sigmoid output.
inline Tensor3 sigmoid_backward(const Tensor3& out, const Tensor3& grad_out) {
  Tensor3 g = grad_out;
  for (std::size_t j = 0; j < g.data.size(); ++j) g.data[j] *= out.data[j] * (1.0 - out.data[j]);
  return g;
}

struct PoolResult {
  Tensor3 out;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

/// 2x2 max pool, stride 2. Ties go to the first element in row-major order.
inline PoolResult maxpool2(const Tensor3& in) {
  if (in.height % 2 || in.width % 2) throw std::invalid_argument("maxpool2: odd dimensions");
  PoolResult r{Tensor3(in.channels, in.height / 2, in.width / 2), {}};
  r.argmax.resize(r.out.data.size());
  std::size_t j = 0;
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < r.out.height; ++y)
      for (int x = 0; x < r.out.width; ++x, ++j) {
        std::size_t best = static_cast<std::size_t>(c) * in.plane() +
                           static_cast<std::size_t>(2 * y) * in.width + 2 * x;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = static_cast<std::size_t>(c) * in.plane() +
                                    static_cast<std::size_t>(2 * y + dy) * in.width + 2 * x + dx;
            if (in.data[idx] > in.data[best]) best = idx;
          }
        r.out.data[j] = in.data[best];
        r.argmax[j] = static_cast<std::uint32_t>(best);
      }
  return r;
}

inline Tensor3 maxpool2_backward(const Tensor3& grad_out, std::span<const std::uint32_t> argmax,
                                 int channels, int height, int width) {
  Tensor3 g(channels, height, width, 0.0);
  for (std::size_t j = 0; j < grad_out.data.size(); ++j) g.data[argmax[j]] += grad_out.data[j];
  return g;
}

inline Tensor3 upsample2(const Tensor3& in) {
  Tensor3 out(in.channels, in.height * 2, in.width * 2);
  for (int c = 0; c < out.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out(c, y, x) = in(c, y / 2, x / 2);
  return out;
}

inline Tensor3 upsample2_backward(const Tensor3& grad_out) {
  Tensor3 g(grad_out.channels, grad_out.height / 2, grad_out.width / 2, 0.0);
  for (int c = 0; c < grad_out.channels; ++c)
    for (int y = 0; y < grad_out.height; ++y)
      for (int x = 0; x < grad_out.width; ++x) g(c, y / 2, x / 2) += grad_out(c, y, x);
  return g;
}

inline Tensor3 concat(const Tensor3& a, const Tensor3& b) {
  if (a.height != b.height || a.width != b.width) throw std::invalid_argument("concat: shape mismatch");
  Tensor3 out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

inline std::pair<Tensor3, Tensor3> split(const Tensor3& t, int first_channels) {
  Tensor3 a(first_channels, t.height, t.width), b(t.channels - first_channels, t.height, t.width);
  std::copy(t.data.begin(), t.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()), a.data.begin());
  std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()), t.data.end(), b.data.begin());
  return {std::move(a), std::move(b)};
}

}  // namespace layers

// ---------------------------------------------------------------------------
// Network

/// Output margin keeping the cost strictly inside (0,1) for saturated logits.
inline constexpr double kCostMargin = 1e-12;

struct Tape {
  NetworkParams params;
  Tensor3 input;
  Tensor3 main1;   // sigmoid activations
  Tensor3 main2;
  layers::PoolResult pooled;
  Tensor3 scale;   // sigmoid activations at half resolution
  Tensor3 merged;  // concat(main2, upsample(scale))
  Tensor3 output;  // 1 x H x W cost
};

struct ForwardResult {
  CostMap cost;
  Tape tape;
};

inline ForwardResult forward(const NetworkParams& params, const OccupancyGrid& input) {
  const Tensor3& x = input.data;
  if (x.channels != OccupancyGrid::kChannels) throw std::invalid_argument("forward: expected 3 channels");
  if (x.height % 2 || x.width % 2) throw std::invalid_argument("forward: grid dimensions must be even");
  if (x.height < 2 || x.width < 2) throw std::invalid_argument("forward: grid too small");

  ForwardResult r;
  Tape& tp = r.tape;
  tp.params = params;
  tp.input = x;
  tp.main1 = layers::conv2d(x, params.layers[0]);
  layers::sigmoid_inplace(tp.main1);
  tp.main2 = layers::conv2d(tp.main1, params.layers[1]);
  layers::sigmoid_inplace(tp.main2);
  tp.pooled = layers::maxpool2(x);
  tp.scale = layers::conv2d(tp.pooled.out, params.layers[2]);
  layers::sigmoid_inplace(tp.scale);
  tp.merged = layers::concat(tp.main2, layers::upsample2(tp.scale));
  tp.output = layers::conv2d(tp.merged, params.layers[3]);
  for (double& v : tp.output.data) v = std::clamp(layers::sigmoid(v), kCostMargin, 1.0 - kCostMargin);

  r.cost = CostMap(x.height, x.width);
  std::copy(tp.output.data.begin(), tp.output.data.end(), r.cost.begin());
  return r;
}

struct Gradients {
  NetworkParams params;
  Tensor3 input;
};

inline Gradients backward(const Tape& tape, const Grid<double>& grad_out) {
  if (grad_out.height() != tape.output.height || grad_out.width() != tape.output.width)
    throw std::invalid_argument("backward: gradient shape does not match tape");
  const NetworkParams& p = tape.params;
  Gradients g{zeros_like(p), {}};

  Tensor3 go(1, grad_out.height(), grad_out.width());
  std::copy(grad_out.begin(), grad_out.end(), go.data.begin());
  const Tensor3 dz = layers::sigmoid_backward(tape.output, go);
  const Tensor3 d_merged = layers::conv2d_backward(tape.merged, p.layers[3], dz, g.params.layers[3]);
  auto [d_main2, d_up] = layers::split(d_merged, p.config.main2.out);

  const Tensor3 d_scale = layers::sigmoid_backward(tape.scale, layers::upsample2_backward(d_up));
  const Tensor3 d_pooled =
      layers::conv2d_backward(tape.pooled.out, p.layers[2], d_scale, g.params.layers[2]);
  Tensor3 d_input = layers::maxpool2_backward(d_pooled, tape.pooled.argmax, tape.input.channels,
                                              tape.input.height, tape.input.width);

  const Tensor3 dz2 = layers::sigmoid_backward(tape.main2, d_main2);
  const Tensor3 d_main1 = layers::conv2d_backward(tape.main1, p.layers[1], dz2, g.params.layers[1]);
  const Tensor3 dz1 = layers::sigmoid_backward(tape.main1, d_main1);
  const Tensor3 d_in_main = layers::conv2d_backward(tape.input, p.layers[0], dz1, g.params.layers[0]);
  for (std::size_t j = 0; j < d_input.data.size(); ++j) d_input.data[j] += d_in_main.data[j];
  g.input = std::move(d_input);
  return g;
}

struct RegressionResult {
  double loss = 0.0;
  NetworkParams grad;
};

/// Mean squared error between the network output and `target`.
inline RegressionResult regression_loss_and_grad(const NetworkParams& params,
                                                 const OccupancyGrid& input,
                                                 const CostMap& target) {
  if (target.height() != input.height() || target.width() != input.width())
    throw std::invalid_argument("regression: target shape mismatch");
  for (double t : target)
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("regression: target outside [0,1]");

  auto fwd = forward(params, input);
  const double n = static_cast<double>(target.size());
  Grid<double> g(target.height(), target.width());
  double loss = 0.0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    const double d = fwd.cost[j] - target[j];
    loss += d * d;
    g[j] = 2.0 * d / n;
  }
  return {loss / n, backward(fwd.tape, g).params};
}

/// Glorot-uniform weights in (-a, a) with a = sqrt(6 / (fan_in + fan_out)); zero biases.
inline NetworkParams init_params(std::uint64_t seed, const NetConfig& config = {}) {
  NetworkParams p(config);
  Rng rng(seed);
  for (auto& l : p.layers) {
    const double kk = static_cast<double>(l.shape.kernel * l.shape.kernel);
    const double a = std::sqrt(6.0 / (kk * l.shape.in + kk * l.shape.out));
    for (double& w : l.weight) w = a * (2.0 * rng.uniform() - 1.0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoints: text header plus one hexadecimal float per line.

inline constexpr const char* kCheckpointMagic = "medirl-params";
inline constexpr int kCheckpointVersion = 1;

inline void save_params(std::ostream& os, const NetworkParams& p) {
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  os << "config " << hex64(p.config.fingerprint()) << '\n';
  os << "layers " << p.layers.size() << '\n';
  for (const auto& l : p.layers)
    os << "layer " << l.shape.in << ' ' << l.shape.out << ' ' << l.shape.kernel << '\n';
  os << "values " << p.size() << '\n';
  char buf[64];
  for (double v : p.flatten()) {
    std::snprintf(buf, sizeof buf, "%a\n", v);
    os << buf;
  }
}

inline NetworkParams load_params(std::istream& is) {
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != kCheckpointMagic)
    throw DataError("checkpoint: bad magic");
  if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version");
  std::string hash;
  if (!(is >> tag >> hash) || tag != "config") throw DataError("checkpoint: missing config hash");
  std::size_t nlayers = 0;
  if (!(is >> tag >> nlayers) || tag != "layers" || nlayers != 4)
    throw DataError("checkpoint: bad layer count");
  std::vector<ConvShape> shapes(nlayers);
  for (auto& s : shapes)
    if (!(is >> tag >> s.in >> s.out >> s.kernel) || tag != "layer")
      throw DataError("checkpoint: bad layer line");
  NetConfig cfg{shapes[0], shapes[1], shapes[2], shapes[3]};
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  if (hex64(cfg.fingerprint()) != hash) throw DataError("checkpoint: config hash mismatch");
  std::size_t count = 0;
  if (!(is >> tag >> count) || tag != "values") throw DataError("checkpoint: missing values");
  std::vector<double> flat(count);
  std::string tok;
  for (auto& v : flat) {
    if (!(is >> tok)) throw DataError("checkpoint: truncated payload");
    char* end = nullptr;
    v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw DataError("checkpoint: bad value '" + tok + "'");
  }
  try {
    return NetworkParams::unflatten(cfg, flat);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace medirl
