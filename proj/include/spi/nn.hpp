// Desk-scale neural training: logistic regression and a tiny tanh MLP with
// manual backpropagation, synthetic Gaussian datasets, and IDX-format
// ingestion.  Parameters are flattened into one ParamVector so every
// optimizer applies unchanged and per-dimension gating acts per scalar
// weight.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "spi/optimizers.hpp"
#include "spi/core.hpp"
#include "spi/types.hpp"

namespace spi {

// Deterministic, platform-independent generator.  The exact mappings matter
// for reproducibility, so they are fixed here and echoed into TrainReport
// metadata:
//   engine    mt19937_64 seeded directly with the 64-bit seed
//   uniform   (x >> 11) * 2^-53                  in [0, 1)
//   normal    Box-Muller: sqrt(-2 ln u1) * cos(2 pi u2), u1 = ((x>>11)+1)*2^-53
//   shuffle   Fisher-Yates drawing j = floor(uniform() * (i + 1))
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}

  static constexpr const char* kAlgorithm =
      "mt19937_64(seed); uniform=(x>>11)*2^-53; "
      "normal=Box-Muller[sqrt(-2 ln u1) cos(2 pi u2), u1=((x>>11)+1)*2^-53]; "
      "shuffle=Fisher-Yates[j=floor(uniform()*(i+1))]";

  double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    const double u1 = (static_cast<double>(gen() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i-- > 1;) {
      std::size_t j =
          static_cast<std::size_t>(uniform() * static_cast<double>(i + 1));
      if (j > i) j = i;  // guard against the half-open interval's edge
      std::swap(v[i], v[j]);
    }
  }
};

struct Dataset {
  std::vector<ParamVector> inputs;  // N rows of dimension D
  std::vector<int> labels;          // values in [0, num_classes)
  int num_classes = 2;
  std::string name;

  std::size_t size() const { return inputs.size(); }
  std::size_t dim() const { return inputs.empty() ? 0 : inputs[0].size(); }
};

// Two isotropic Gaussian blobs centered at +-(separation/2) e1, interleaved
// class 0 / class 1; byte-identical across calls for a fixed seed.
inline Dataset synth_gaussians(int n_per_class, int d, double separation,
                               std::uint64_t seed) {
  if (n_per_class < 1 || d < 1 || !(separation >= 0.0))
    throw ConfigError("synth_gaussians: need n_per_class >= 1, d >= 1, separation >= 0");
  Dataset ds;
  ds.num_classes = 2;
  ds.name = "gaussians";
  Rng rng(seed);
  for (int i = 0; i < n_per_class; ++i) {
    for (int cls = 0; cls < 2; ++cls) {
      ParamVector x(d);
      for (int j = 0; j < d; ++j) x[j] = rng.normal();
      x[0] += (cls == 0 ? -0.5 : 0.5) * separation;
      ds.inputs.push_back(std::move(x));
      ds.labels.push_back(cls);
    }
  }
  return ds;
}

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& file,
                               const char* field) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4)
    throw FormatError(file + ": truncated payload reading " + field);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace detail

// IDX ingestion (big-endian): images file = magic 0x00000803 then N, rows,
// cols then N*rows*cols unsigned bytes; labels file = magic 0x00000801 then
// N then N unsigned bytes.  Pixels are scaled to [0, 1]; labels must lie in
// [0, 10).  Anything else is rejected with an error naming the offending
// field.
inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path,
                        std::optional<long> limit = std::nullopt) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError(images_path + ": cannot open file");
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError(labels_path + ": cannot open file");

  const std::uint32_t img_magic = detail::read_be32(img, images_path, "magic");
  if (img_magic != 0x00000803u)
    throw FormatError(images_path + ": bad magic " + detail::hex32(img_magic) +
                      " (expected 0x00000803)");
  const std::uint32_t n_img = detail::read_be32(img, images_path, "count");
  const std::uint32_t rows = detail::read_be32(img, images_path, "rows");
  const std::uint32_t cols = detail::read_be32(img, images_path, "cols");

  const std::uint32_t lab_magic = detail::read_be32(lab, labels_path, "magic");
  if (lab_magic != 0x00000801u)
    throw FormatError(labels_path + ": bad magic " + detail::hex32(lab_magic) +
                      " (expected 0x00000801)");
  const std::uint32_t n_lab = detail::read_be32(lab, labels_path, "count");
  if (n_img != n_lab)
    throw FormatError("image/label count mismatch: " + images_path + " has " +
                      std::to_string(n_img) + ", " + labels_path + " has " +
                      std::to_string(n_lab));

  std::uint32_t n = n_img;
  if (limit && *limit >= 0 && static_cast<std::uint32_t>(*limit) < n)
    n = static_cast<std::uint32_t>(*limit);

  Dataset ds;
  ds.num_classes = 10;
  ds.name = "idx";
  const std::size_t npix = std::size_t(rows) * cols;
  std::vector<unsigned char> pix(npix);
  for (std::uint32_t i = 0; i < n; ++i) {
    img.read(reinterpret_cast<char*>(pix.data()),
             static_cast<std::streamsize>(npix));
    if (static_cast<std::size_t>(img.gcount()) != npix)
      throw FormatError(images_path + ": truncated payload reading pixels of image " +
                        std::to_string(i));
    ParamVector x(npix);
    for (std::size_t j = 0; j < npix; ++j) x[j] = pix[j] / 255.0;
    ds.inputs.push_back(std::move(x));
    char lbl = 0;
    lab.read(&lbl, 1);
    if (lab.gcount() != 1)
      throw FormatError(labels_path + ": truncated payload reading label " +
                        std::to_string(i));
    const int y = static_cast<unsigned char>(lbl);
    if (y >= 10)
      throw FormatError(labels_path + ": label value " + std::to_string(y) +
                        " out of range [0,10) at index " + std::to_string(i));
    ds.labels.push_back(y);
  }
  return ds;
}

// One-hidden-layer tanh MLP when H > 0, plain linear softmax (logistic
// regression) when H = 0.  Parameters live flattened in a fixed order:
//   H > 0:  W1 (H x D, row-major), b1, W2 (C x H, row-major), b2
//   H = 0:  W (C x D, row-major), b
struct MlpModel {
  int D = 0, H = 0, C = 0;
  ParamVector params;

  std::size_t param_count() const {
    return H > 0 ? std::size_t(H) * D + H + std::size_t(C) * H + C
                 : std::size_t(C) * D + C;
  }
};

// Weights uniform in +-1/sqrt(fan_in), biases zero.
inline MlpModel make_mlp(int d, int h, int c, std::uint64_t seed) {
  if (d < 1 || h < 0 || c < 2) throw ConfigError("make_mlp: need D >= 1, H >= 0, C >= 2");
  MlpModel m{d, h, c, {}};
  m.params.assign(m.param_count(), 0.0);
  Rng rng(seed);
  if (h > 0) {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < h * d; ++i) m.params[i] = rng.uniform(-s1, s1);
    const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
    const std::size_t o = std::size_t(h) * d + h;
    for (int i = 0; i < c * h; ++i) m.params[o + i] = rng.uniform(-s2, s2);
  } else {
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < c * d; ++i) m.params[i] = rng.uniform(-s, s);
  }
  return m;
}

inline MlpModel make_logistic(int d, int c, std::uint64_t seed) {
  return make_mlp(d, 0, c, seed);
}

struct ForwardBackward {
  double loss = 0.0;
  ParamVector grads;
};

namespace detail {

// Class scores for one input; scratch holds the hidden activations when the
// model has a hidden layer.
inline void logits(const MlpModel& m, const ParamVector& x, ParamVector& hidden,
                   ParamVector& out) {
  if (m.H > 0) {
    const double* W1 = m.params.data();
    const double* b1 = W1 + std::size_t(m.H) * m.D;
    const double* W2 = b1 + m.H;
    const double* b2 = W2 + std::size_t(m.C) * m.H;
    hidden.resize(m.H);
    for (int j = 0; j < m.H; ++j) {
      double z = b1[j];
      for (int k = 0; k < m.D; ++k) z += W1[std::size_t(j) * m.D + k] * x[k];
      hidden[j] = std::tanh(z);
    }
    out.resize(m.C);
    for (int c = 0; c < m.C; ++c) {
      double z = b2[c];
      for (int j = 0; j < m.H; ++j) z += W2[std::size_t(c) * m.H + j] * hidden[j];
      out[c] = z;
    }
  } else {
    const double* W = m.params.data();
    const double* b = W + std::size_t(m.C) * m.D;
    out.resize(m.C);
    for (int c = 0; c < m.C; ++c) {
      double z = b[c];
      for (int k = 0; k < m.D; ++k) z += W[std::size_t(c) * m.D + k] * x[k];
      out[c] = z;
    }
  }
}

// Max-subtracted softmax probabilities, numerically stable for large logits.
inline void softmax(const ParamVector& z, ParamVector& p) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  p.resize(z.size());
  for (std::size_t c = 0; c < z.size(); ++c) {
    p[c] = std::exp(z[c] - zmax);
    sum += p[c];
  }
  for (double& pc : p) pc /= sum;
}

}  // namespace detail

// Mean softmax cross-entropy over the batch and exact gradients of every
// parameter, flattened in the model's parameter order.
inline ForwardBackward forward_backward(const MlpModel& m, const Dataset& ds,
                                        const std::vector<int>& batch) {
  if (batch.empty()) throw ConfigError("forward_backward: empty batch");
  ForwardBackward fb;
  fb.grads.assign(m.params.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  ParamVector hidden, z, p;
  for (int idx : batch) {
    const ParamVector& x = ds.inputs[idx];
    const int y = ds.labels[idx];
    detail::logits(m, x, hidden, z);
    detail::softmax(z, p);
    fb.loss -= std::log(p[y]) * inv_b;
    if (m.H > 0) {
      double* gW1 = fb.grads.data();
      double* gb1 = gW1 + std::size_t(m.H) * m.D;
      double* gW2 = gb1 + m.H;
      double* gb2 = gW2 + std::size_t(m.C) * m.H;
      const double* W2 = m.params.data() + std::size_t(m.H) * m.D + m.H;
      for (int c = 0; c < m.C; ++c) {
        const double dz = (p[c] - (c == y ? 1.0 : 0.0)) * inv_b;
        gb2[c] += dz;
        for (int j = 0; j < m.H; ++j) gW2[std::size_t(c) * m.H + j] += dz * hidden[j];
      }
      for (int j = 0; j < m.H; ++j) {
        double da = 0.0;
        for (int c = 0; c < m.C; ++c)
          da += W2[std::size_t(c) * m.H + j] * (p[c] - (c == y ? 1.0 : 0.0)) * inv_b;
        const double dz1 = da * (1.0 - hidden[j] * hidden[j]);
        gb1[j] += dz1;
        for (int k = 0; k < m.D; ++k) gW1[std::size_t(j) * m.D + k] += dz1 * x[k];
      }
    } else {
      double* gW = fb.grads.data();
      double* gb = gW + std::size_t(m.C) * m.D;
      for (int c = 0; c < m.C; ++c) {
        const double dz = (p[c] - (c == y ? 1.0 : 0.0)) * inv_b;
        gb[c] += dz;
        for (int k = 0; k < m.D; ++k) gW[std::size_t(c) * m.D + k] += dz * x[k];
      }
    }
  }
  return fb;
}

inline ForwardBackward forward_backward(const MlpModel& m, const Dataset& ds) {
  std::vector<int> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return forward_backward(m, ds, all);
}

// Fraction of the dataset classified correctly (argmax logits; ties resolve
// to the lowest class index).
inline double accuracy(const MlpModel& m, const Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  ParamVector hidden, z;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    detail::logits(m, ds.inputs[i], hidden, z);
    int best = 0;
    for (int c = 1; c < m.C; ++c)
      if (z[c] > z[best]) best = c;
    if (best == ds.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

struct TrainReport {
  std::vector<double> loss_curve;      // per-epoch mean cross-entropy, full pass
  std::vector<double> accuracy_curve;  // per-epoch fraction correct
  bool diverged = false;
  std::optional<int> diverged_epoch;
  std::string rng_info;  // generator algorithm and seeding scheme
  MlpModel final_model;
};

// Minibatch training: one epoch is a full pass over a seed-deterministic
// shuffle; optimizer state persists across batches; gating optimizers act on
// the flattened parameter vector.  Stops early and flags diverged when a
// batch loss turns non-finite or any parameter leaves
// [-divergence_threshold, divergence_threshold] (the same rule the run loop
// applies to 2D trajectories).
inline TrainReport train(MlpModel model, const Dataset& ds,
                         const RunConfig& opt, int epochs, int batch_size,
                         std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (ds.size() == 0) throw ConfigError("train: empty dataset");
  if (ds.dim() != static_cast<std::size_t>(model.D))
    throw ConfigError("train: dataset dimension does not match model input dimension");

  OptimizerState state =
      make_state(opt.optimizer, model.param_count(), opt.hyperparams);
  TrainReport report;
  report.rng_info = std::string(Rng::kAlgorithm) + "; shuffle_seed=" +
                    std::to_string(seed);

  Rng rng(seed);
  std::vector<int> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::vector<int> batch;

  double last_loss = 0.0;
  const GradFn oracle = [&](const ParamVector& at) {
    MlpModel look = model;
    look.params = at;
    ForwardBackward fb = forward_backward(look, ds, batch);
    last_loss = fb.loss;
    return std::move(fb.grads);
  };

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < order.size(); b += batch_size) {
      batch.assign(order.begin() + b,
                   order.begin() + std::min(b + batch_size, order.size()));
      if (opt.optimizer == OptimizerKind::NAG) {
        nag_step(state, model.params, oracle);  // last_loss = lookahead loss
      } else {
        ForwardBackward fb = forward_backward(model, ds, batch);
        last_loss = fb.loss;
        step(state, model.params, fb.grads);
      }
      if (!std::isfinite(last_loss) ||
          detail::exceeds_threshold(model.params, opt.divergence_threshold)) {
        report.diverged = true;
        report.diverged_epoch = epoch;
        report.final_model = std::move(model);
        return report;
      }
    }
    report.loss_curve.push_back(forward_backward(model, ds).loss);
    report.accuracy_curve.push_back(accuracy(model, ds));
  }
  report.final_model = std::move(model);
  return report;
}

}  // namespace spi
