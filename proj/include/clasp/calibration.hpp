#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "clasp/error.hpp"
#include "clasp/geometry.hpp"
#include "clasp/log.hpp"

namespace clasp {

// ---------------------------------------------------------------------------
// Wrench axis ranges (Fx, Fy shear; Fz normal; Tx, Ty, Tz moment)
// ---------------------------------------------------------------------------

inline constexpr std::array<double, 6> kAxisMin = {-20.0, -20.0, 0.0,
                                                   -0.5, -0.5, -0.5};
inline constexpr std::array<double, 6> kAxisMax = {20.0, 20.0, 25.0,
                                                   0.5, 0.5, 0.5};

inline double axis_halfrange(int axis) {
  return (kAxisMax[axis] - kAxisMin[axis]) / 2.0;
}
inline double axis_center(int axis) {
  return (kAxisMax[axis] + kAxisMin[axis]) / 2.0;
}
inline double axis_range(int axis) { return kAxisMax[axis] - kAxisMin[axis]; }

/// Physical wrench -> per-axis normalized coordinates in [-1, 1].
inline Vec6 normalize_wrench(const Vec6& w) {
  Vec6 u;
  for (int i = 0; i < 6; ++i) u(i) = (w(i) - axis_center(i)) / axis_halfrange(i);
  return u;
}
inline Vec6 denormalize_wrench(const Vec6& u) {
  Vec6 w;
  for (int i = 0; i < 6; ++i) w(i) = u(i) * axis_halfrange(i) + axis_center(i);
  return w;
}

/// Per-axis physical noise sigma equivalent to `noise_sd` newtons on the
/// shear axes: uniform sigma in normalized space, scaled by each axis'
/// half-range. (Torque axes come out in N*m.)
inline std::array<double, 6> calibration_noise_sigma(double noise_sd) {
  std::array<double, 6> s;
  for (int i = 0; i < 6; ++i)
    s[i] = noise_sd * axis_halfrange(i) / axis_halfrange(0);
  return s;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct CapacitanceSample {
  Eigen::VectorXd channels;  // raw counts
  double timestamp = 0.0;    // s
};

enum class Split : int { train = 0, validation = 1, test = 2 };

struct CalibrationDataset {
  Eigen::MatrixXd capacitance;  // n x C
  Eigen::MatrixXd wrench;       // n x 6, physical units, ground truth
  std::vector<uint64_t> t_ns;
  std::vector<Split> split;

  int size() const { return static_cast<int>(capacitance.rows()); }
  int channels() const { return static_cast<int>(capacitance.cols()); }

  int count(Split s) const {
    return static_cast<int>(std::count(split.begin(), split.end(), s));
  }

  Eigen::MatrixXd inputs(Split s) const { return select(capacitance, s); }
  Eigen::MatrixXd labels(Split s) const { return select(wrench, s); }

 private:
  Eigen::MatrixXd select(const Eigen::MatrixXd& m, Split s) const {
    Eigen::MatrixXd out(count(s), m.cols());
    int r = 0;
    for (int i = 0; i < size(); ++i)
      if (split[i] == s) out.row(r++) = m.row(i);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Synthetic sensor oracle
//
// Fixed smooth nonlinear forward model standing in for the capacitive
// hardware: a well-conditioned linear mix of the normalized wrench, a
// per-channel tanh saturation, and a small quadratic cross-channel coupling:
//
//   z = A u,  y_i = tanh(beta_i z_i) / beta_i,
//   c = offset + gain * (y + eps * Q (y o y))
//
// Globally invertible over the sampling range, but clearly outside what a
// linear fit can model (see the calibration tests for the gap).
// ---------------------------------------------------------------------------

class SyntheticSensor {
 public:
  static SyntheticSensor standard(int channels = 8) {
    if (channels < 6)
      throw ConfigError("synthetic sensor needs at least 6 channels");
    SyntheticSensor s;
    std::mt19937_64 rng(0xC0F7ULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    s.a_.resize(channels, 6);
    for (int i = 0; i < channels; ++i)
      for (int j = 0; j < 6; ++j) s.a_(i, j) = 0.3 * u(rng);
    for (int j = 0; j < 6; ++j) s.a_(j, j) += 1.0;
    if (channels > 6) s.a_.row(6).array() += 0.35 / std::sqrt(6.0);
    if (channels > 7) s.a_.row(7).array() -= 0.25 / std::sqrt(6.0);
    s.beta_.resize(channels);
    for (int i = 0; i < channels; ++i) s.beta_(i) = 0.65 + 0.25 * u(rng);
    s.q_.resize(channels, channels);
    for (int i = 0; i < channels; ++i)
      for (int j = 0; j < channels; ++j) s.q_(i, j) = u(rng);
    return s;
  }

  int channels() const { return static_cast<int>(a_.rows()); }

  Eigen::VectorXd capacitance(const Vec6& normalized_wrench) const {
    const Eigen::VectorXd z = a_ * normalized_wrench;
    Eigen::VectorXd y(z.size());
    for (int i = 0; i < z.size(); ++i)
      y(i) = std::tanh(beta_(i) * z(i)) / beta_(i);
    const Eigen::VectorXd c = y + eps_ * (q_ * y.cwiseProduct(y));
    return Eigen::VectorXd::Constant(z.size(), offset_) + gain_ * c;
  }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd beta_;
  Eigen::MatrixXd q_;
  double eps_ = 0.04;
  double gain_ = 200.0;
  double offset_ = 512.0;
};

/// Samples wrenches uniformly inside the axis ranges (+-20 N shear, 0-25 N
/// normal, +-500 mN*m moment), pushes them through the synthetic sensor, and
/// tags contiguous train/validation/test splits. Noise is injected on the
/// normalized wrench before the forward model (labels stay clean), so the
/// best achievable per-axis MSE is calibration_noise_sigma(noise_sd)^2.
/// Deterministic per seed.
inline CalibrationDataset generate_synthetic_dataset(
    uint64_t seed, int n, double noise_sd, int channels = 8,
    double train_fraction = 0.7, double validation_fraction = 0.15) {
  if (n < 100) throw ConfigError("synthetic dataset needs n >= 100");
  if (noise_sd < 0.0) throw ConfigError("noise_sd must be >= 0");
  if (!(train_fraction > 0.0) || !(validation_fraction >= 0.0) ||
      train_fraction + validation_fraction >= 1.0)
    throw ConfigError("invalid split fractions");

  const SyntheticSensor sensor = SyntheticSensor::standard(channels);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma_n = noise_sd / axis_halfrange(0);

  CalibrationDataset ds;
  ds.capacitance.resize(n, channels);
  ds.wrench.resize(n, 6);
  ds.t_ns.resize(n);
  ds.split.resize(n);
  const int n_train = static_cast<int>(std::floor(train_fraction * n));
  const int n_val = static_cast<int>(std::floor(validation_fraction * n));

  for (int i = 0; i < n; ++i) {
    Vec6 u;
    for (int j = 0; j < 6; ++j) u(j) = uni(rng);
    ds.wrench.row(i) = denormalize_wrench(u).transpose();
    Vec6 u_sensed = u;
    if (noise_sd > 0.0)
      for (int j = 0; j < 6; ++j) u_sensed(j) += sigma_n * gauss(rng);
    ds.capacitance.row(i) = sensor.capacitance(u_sensed).transpose();
    ds.t_ns[i] = static_cast<uint64_t>(
        std::llround(static_cast<double>(i) * 1e9 / 360.0));
    ds.split[i] = i < n_train            ? Split::train
                  : i < n_train + n_val  ? Split::validation
                                         : Split::test;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

/// Fully connected network, rectified-linear hidden layers, linear output.
/// weights[l] has shape widths[l+1] x widths[l].
struct MlpModel {
  std::vector<int> widths;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }

  bool finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }

  /// Batch forward pass; rows are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    if (x.cols() != input_width())
      throw ConfigError("mlp forward: input width mismatch");
    Eigen::MatrixXd h = x;
    for (int l = 0; l < layer_count(); ++l) {
      h = (h * weights[l].transpose()).rowwise() + biases[l].transpose();
      if (l + 1 < layer_count()) h = h.cwiseMax(0.0);
    }
    return h;
  }
};

/// He-initialized network for the given widths; deterministic per seed.
inline MlpModel init_mlp(const std::vector<int>& widths, uint64_t seed) {
  if (widths.size() < 2) throw ConfigError("mlp needs at least 2 widths");
  for (int w : widths)
    if (w <= 0) throw ConfigError("mlp widths must be > 0");
  MlpModel m;
  m.widths = widths;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    const double sd = std::sqrt(2.0 / widths[l]);
    Eigen::MatrixXd w(widths[l + 1], widths[l]);
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = sd * gauss(rng);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(Eigen::VectorXd::Zero(widths[l + 1]));
  }
  return m;
}

/// Six-axis regression on one sample; physical units (exported models carry
/// input standardization and label denormalization inside their weights).
inline Wrench predict(const MlpModel& m, const CapacitanceSample& s,
                      const std::string& frame = "sensor") {
  if (s.channels.size() != m.input_width())
    throw ConfigError("predict: channel count does not match model input");
  if (m.output_width() != 6)
    throw ConfigError("predict: model output width must be 6");
  const Eigen::MatrixXd out = m.forward(s.channels.transpose());
  return Wrench::from_vector(out.row(0).transpose(), frame);
}

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// Mean squared error over all batch elements and output axes.
inline double mlp_loss(const MlpModel& m, const Eigen::MatrixXd& x,
                       const Eigen::MatrixXd& y) {
  return (m.forward(x) - y).squaredNorm() /
         static_cast<double>(x.rows() * y.cols());
}

/// Backpropagation; returns the loss and fills `grad` with dLoss/dW, dLoss/db.
inline double mlp_loss_and_gradient(const MlpModel& m, const Eigen::MatrixXd& x,
                                    const Eigen::MatrixXd& y,
                                    MlpGradients& grad) {
  const int layers = m.layer_count();
  std::vector<Eigen::MatrixXd> acts(layers + 1);
  acts[0] = x;
  for (int l = 0; l < layers; ++l) {
    acts[l + 1] =
        (acts[l] * m.weights[l].transpose()).rowwise() + m.biases[l].transpose();
    if (l + 1 < layers) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
  }
  const double denom = static_cast<double>(x.rows() * y.cols());
  const double loss = (acts[layers] - y).squaredNorm() / denom;

  grad.weights.resize(layers);
  grad.biases.resize(layers);
  Eigen::MatrixXd delta = 2.0 * (acts[layers] - y) / denom;
  for (int l = layers - 1; l >= 0; --l) {
    grad.weights[l] = delta.transpose() * acts[l];
    grad.biases[l] = delta.colwise().sum().transpose();
    if (l > 0)
      delta = (delta * m.weights[l])
                  .cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainingConfig {
  int epochs = 500;
  int batch_size = 256;
  double learning_rate = 3e-3;     // peak; linear warmup then cosine decay
  int warmup_epochs = 5;
  uint64_t seed = 42;
  std::vector<int> hidden = {128, 64, 36, 24, 12};

  void validate() const {
    if (epochs <= 0 || batch_size <= 0)
      throw ConfigError("training epochs/batch must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (warmup_epochs < 0) throw ConfigError("warmup epochs must be >= 0");
    if (hidden.empty()) throw ConfigError("training needs hidden layers");
  }
};

struct TrainResult {
  MlpModel model;                     // best-validation, export-ready
  double best_validation_loss = 0.0;  // normalized-label space
  double initial_train_loss = 0.0;    // untrained network, same space
  int best_epoch = -1;
  std::vector<double> train_loss;     // per epoch, normalized-label space
  std::vector<double> validation_loss;
};

namespace detail {

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  int64_t step = 0;

  explicit AdamState(const MlpModel& m) {
    for (const auto& w : m.weights) {
      mw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
      vw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
    for (const auto& b : m.biases) {
      mb.push_back(Eigen::VectorXd::Zero(b.size()));
      vb.push_back(Eigen::VectorXd::Zero(b.size()));
    }
  }

  void apply(MlpModel& m, const MlpGradients& g, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++step;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (size_t l = 0; l < m.weights.size(); ++l) {
      mw[l] = b1 * mw[l] + (1.0 - b1) * g.weights[l];
      vw[l] = b2 * vw[l] + (1.0 - b2) * g.weights[l].cwiseProduct(g.weights[l]);
      m.weights[l] -=
          lr * (mw[l] / c1).cwiseQuotient(((vw[l] / c2).cwiseSqrt().array() + eps)
                                              .matrix());
      mb[l] = b1 * mb[l] + (1.0 - b1) * g.biases[l];
      vb[l] = b2 * vb[l] + (1.0 - b2) * g.biases[l].cwiseProduct(g.biases[l]);
      m.biases[l] -=
          lr * (mb[l] / c1).cwiseQuotient(((vb[l] / c2).cwiseSqrt().array() + eps)
                                              .matrix());
    }
  }
};

}  // namespace detail

/// Trains the capacitance -> wrench regression. Inputs are standardized with
/// train-split statistics and labels normalized per axis (half-range), so all
/// six axes contribute comparably to the loss; both transforms are baked into
/// the first/last layer of the returned best-validation model, which then
/// maps raw counts to physical wrench units. Single-threaded and
/// deterministic per cfg.seed. Divergence raises TrainingFault with the epoch.
inline TrainResult train_calibration(const CalibrationDataset& ds,
                                     const TrainingConfig& cfg) {
  cfg.validate();
  if (ds.count(Split::train) == 0 || ds.count(Split::validation) == 0)
    throw ConfigError("training needs non-empty train and validation splits");

  const Eigen::MatrixXd x_train_raw = ds.inputs(Split::train);
  const Eigen::MatrixXd x_val_raw = ds.inputs(Split::validation);
  const int n_train = static_cast<int>(x_train_raw.rows());
  const int channels = static_cast<int>(x_train_raw.cols());

  // Input standardization from the train split.
  Eigen::VectorXd mu = x_train_raw.colwise().mean().transpose();
  Eigen::VectorXd sd(channels);
  for (int c = 0; c < channels; ++c) {
    const double var =
        (x_train_raw.col(c).array() - mu(c)).square().sum() / n_train;
    sd(c) = std::max(std::sqrt(var), 1e-12);
  }
  const auto standardize = [&](const Eigen::MatrixXd& x) {
    return ((x.rowwise() - mu.transpose()).array().rowwise() /
            sd.transpose().array())
        .matrix();
  };
  const Eigen::MatrixXd x_train = standardize(x_train_raw);
  const Eigen::MatrixXd x_val = standardize(x_val_raw);

  // Per-axis label normalization.
  const auto normalize_labels = [&](const Eigen::MatrixXd& w) {
    Eigen::MatrixXd y = w;
    for (int a = 0; a < 6; ++a)
      y.col(a) = (y.col(a).array() - axis_center(a)) / axis_halfrange(a);
    return y;
  };
  const Eigen::MatrixXd y_train = normalize_labels(ds.labels(Split::train));
  const Eigen::MatrixXd y_val = normalize_labels(ds.labels(Split::validation));

  std::vector<int> widths;
  widths.push_back(channels);
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(6);

  MlpModel model = init_mlp(widths, cfg.seed);
  MlpModel best = model;
  detail::AdamState adam(model);
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  TrainResult result;
  result.best_validation_loss = mlp_loss(model, x_val, y_val);
  result.initial_train_loss = mlp_loss(model, x_train, y_train);
  result.best_epoch = -1;

  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  MlpGradients grad;
  Eigen::MatrixXd xb, yb;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr =
        epoch < cfg.warmup_epochs
            ? cfg.learning_rate * (epoch + 1) / std::max(cfg.warmup_epochs, 1)
            : cfg.learning_rate * 0.5 *
                  (1.0 + std::cos(M_PI * (epoch - cfg.warmup_epochs) /
                                  std::max(cfg.epochs - cfg.warmup_epochs, 1)));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int s = 0; s < n_train; s += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, n_train - s);
      xb.resize(b, channels);
      yb.resize(b, 6);
      for (int i = 0; i < b; ++i) {
        xb.row(i) = x_train.row(order[s + i]);
        yb.row(i) = y_train.row(order[s + i]);
      }
      epoch_loss += mlp_loss_and_gradient(model, xb, yb, grad);
      ++batches;
      adam.apply(model, grad, lr);
    }
    epoch_loss /= std::max(batches, 1);
    if (!std::isfinite(epoch_loss))
      throw TrainingFault("training diverged (non-finite loss) at epoch " +
                              std::to_string(epoch),
                          epoch);
    const double val_loss = mlp_loss(model, x_val, y_val);
    result.train_loss.push_back(epoch_loss);
    result.validation_loss.push_back(val_loss);
    if (val_loss < result.best_validation_loss) {
      result.best_validation_loss = val_loss;
      result.best_epoch = epoch;
      best = model;
    }
  }

  // Bake input standardization into layer 0 and label denormalization into
  // the final layer, keeping the serialized format plain [widths, W, b].
  best.weights.front() =
      best.weights.front() * sd.cwiseInverse().asDiagonal();
  best.biases.front() -= best.weights.front() * mu;
  for (int a = 0; a < 6; ++a) {
    best.weights.back().row(a) *= axis_halfrange(a);
    best.biases.back()(a) =
        best.biases.back()(a) * axis_halfrange(a) + axis_center(a);
  }
  result.model = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Per-axis error report in physical units. Torque axes are also given in
/// mN*m for readability.
struct AxisErrorReport {
  std::array<double, 6> mse{};   // N^2 for forces, (N*m)^2 for torques
  std::array<double, 6> rmse{};  // N for forces, N*m for torques
  int samples = 0;

  std::string pretty() const {
    static constexpr const char* names[6] = {"Fx", "Fy", "Fz",
                                             "Tx", "Ty", "Tz"};
    std::ostringstream out;
    out << "axis      MSE            RMSE\n";
    for (int a = 0; a < 6; ++a) {
      char line[96];
      if (a < 3)
        std::snprintf(line, sizeof(line), "%-4s %12.6f N^2 %12.4f N\n",
                      names[a], mse[a], rmse[a]);
      else
        std::snprintf(line, sizeof(line),
                      "%-4s %12.3f mNm^2 %10.3f mNm\n", names[a],
                      mse[a] * 1e6, rmse[a] * 1e3);
      out << line;
    }
    return out.str();
  }
};

inline AxisErrorReport evaluate(const MlpModel& m, const CalibrationDataset& ds,
                                Split split = Split::test) {
  if (ds.count(split) == 0) throw ConfigError("evaluate: empty split");
  const Eigen::MatrixXd x = ds.inputs(split);
  const Eigen::MatrixXd y = ds.labels(split);
  const Eigen::MatrixXd pred = m.forward(x);
  AxisErrorReport report;
  report.samples = static_cast<int>(x.rows());
  for (int a = 0; a < 6; ++a) {
    report.mse[a] = (pred.col(a) - y.col(a)).squaredNorm() / x.rows();
    report.rmse[a] = std::sqrt(report.mse[a]);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Model file format
//
//   bytes 0..7   magic "CLASPMLP"
//   u32          version (1)
//   u32          width count W
//   u32 x W      widths
//   per layer l: f64 weights row-major (widths[l+1] x widths[l]),
//                f64 biases (widths[l+1])
//   all integers and doubles little-endian
// ---------------------------------------------------------------------------

inline constexpr const char* kModelMagic = "CLASPMLP";
inline constexpr uint32_t kModelVersion = 1;

inline void save_model(const MlpModel& m, const std::string& path) {
  if (!m.finite()) throw ConfigError("save_model: model has non-finite weights");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(kModelMagic, 8);
  unsigned char u32[4];
  detail::store_le<uint32_t>(u32, kModelVersion);
  out.write(reinterpret_cast<char*>(u32), 4);
  detail::store_le<uint32_t>(u32, static_cast<uint32_t>(m.widths.size()));
  out.write(reinterpret_cast<char*>(u32), 4);
  for (int w : m.widths) {
    detail::store_le<uint32_t>(u32, static_cast<uint32_t>(w));
    out.write(reinterpret_cast<char*>(u32), 4);
  }
  unsigned char f64[8];
  for (size_t l = 0; l < m.weights.size(); ++l) {
    for (int i = 0; i < m.weights[l].rows(); ++i)
      for (int j = 0; j < m.weights[l].cols(); ++j) {
        detail::store_f64(f64, m.weights[l](i, j));
        out.write(reinterpret_cast<char*>(f64), 8);
      }
    for (int i = 0; i < m.biases[l].size(); ++i) {
      detail::store_f64(f64, m.biases[l](i));
      out.write(reinterpret_cast<char*>(f64), 8);
    }
  }
  if (!out) throw IoError("write failed on '" + path + "'");
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  char magic[8];
  if (!in.read(magic, 8) || std::string(magic, 8) != kModelMagic)
    throw IoError("not a model file: bad magic");
  unsigned char u32[4];
  if (!in.read(reinterpret_cast<char*>(u32), 4))
    throw IoError("truncated model file");
  if (detail::load_le<uint32_t>(u32) != kModelVersion)
    throw IoError("unsupported model version");
  if (!in.read(reinterpret_cast<char*>(u32), 4))
    throw IoError("truncated model file");
  const uint32_t n_widths = detail::load_le<uint32_t>(u32);
  if (n_widths < 2 || n_widths > 64) throw IoError("implausible width count");
  MlpModel m;
  for (uint32_t i = 0; i < n_widths; ++i) {
    if (!in.read(reinterpret_cast<char*>(u32), 4))
      throw IoError("truncated model file");
    m.widths.push_back(static_cast<int>(detail::load_le<uint32_t>(u32)));
    if (m.widths.back() <= 0 || m.widths.back() > (1 << 20))
      throw IoError("implausible layer width");
  }
  unsigned char f64[8];
  for (size_t l = 0; l + 1 < m.widths.size(); ++l) {
    Eigen::MatrixXd w(m.widths[l + 1], m.widths[l]);
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) {
        if (!in.read(reinterpret_cast<char*>(f64), 8))
          throw IoError("truncated model file");
        w(i, j) = detail::load_f64(f64);
      }
    Eigen::VectorXd b(m.widths[l + 1]);
    for (int i = 0; i < b.size(); ++i) {
      if (!in.read(reinterpret_cast<char*>(f64), 8))
        throw IoError("truncated model file");
      b(i) = detail::load_f64(f64);
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  char extra;
  if (in.read(&extra, 1)) throw IoError("trailing bytes in model file");
  return m;
}

// ---------------------------------------------------------------------------
// Dataset <-> session log (streams: capacitance, wrench_gt, split)
// ---------------------------------------------------------------------------

inline SessionLog dataset_to_log(const CalibrationDataset& ds,
                                 const std::string& session_id) {
  SessionLog log(session_id, 0);
  log.add_stream(StreamSpec{"capacitance", 360.0, ds.channels(), 0});
  log.add_stream(StreamSpec{"wrench_gt", 360.0, 6, 0});
  log.add_stream(StreamSpec{"split", 360.0, 1, 0});
  for (int i = 0; i < ds.size(); ++i) {
    log.append(0, ds.t_ns[i], ds.capacitance.row(i).transpose());
    log.append(1, ds.t_ns[i], ds.wrench.row(i).transpose());
    log.append(2, ds.t_ns[i],
               Eigen::VectorXd::Constant(1, static_cast<double>(
                                                static_cast<int>(ds.split[i]))));
  }
  return log;
}

inline CalibrationDataset dataset_from_log(const SessionLog& log) {
  const auto& cap = log.samples("capacitance");
  const auto& wr = log.samples("wrench_gt");
  const auto& sp = log.samples("split");
  if (cap.size() != wr.size() || cap.size() != sp.size())
    throw IoError("dataset log streams have mismatched lengths");
  if (cap.empty()) throw IoError("dataset log is empty");
  CalibrationDataset ds;
  const int n = static_cast<int>(cap.size());
  const int channels = static_cast<int>(cap[0].payload.size());
  ds.capacitance.resize(n, channels);
  ds.wrench.resize(n, 6);
  ds.t_ns.resize(n);
  ds.split.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.capacitance.row(i) = cap[i].payload.transpose();
    ds.wrench.row(i) = wr[i].payload.transpose();
    ds.t_ns[i] = cap[i].t_ns;
    const int tag = static_cast<int>(sp[i].payload(0));
    if (tag < 0 || tag > 2) throw IoError("invalid split tag in dataset log");
    ds.split[i] = static_cast<Split>(tag);
  }
  return ds;
}

}  // namespace clasp
