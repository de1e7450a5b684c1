#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "clasp/calibration.hpp"

using namespace clasp;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("synthetic dataset: deterministic per seed", "[calibration]") {
  const CalibrationDataset a = generate_synthetic_dataset(7, 500, 0.1);
  const CalibrationDataset b = generate_synthetic_dataset(7, 500, 0.1);
  REQUIRE(a.capacitance == b.capacitance);  // bit-identical
  REQUIRE(a.wrench == b.wrench);
  REQUIRE(a.split == b.split);

  const CalibrationDataset c = generate_synthetic_dataset(8, 500, 0.1);
  REQUIRE(a.capacitance != c.capacitance);
}

TEST_CASE("synthetic dataset: wrench ranges within the target bounds",
          "[calibration]") {
  const CalibrationDataset ds = generate_synthetic_dataset(9, 2000, 0.0);
  for (int i = 0; i < ds.size(); ++i) {
    for (int a = 0; a < 6; ++a) {
      REQUIRE(ds.wrench(i, a) >= kAxisMin[a] - 1e-12);
      REQUIRE(ds.wrench(i, a) <= kAxisMax[a] + 1e-12);
    }
  }
  // Shear +-20 N, normal 0..25 N, moment +-0.5 N*m actually exercised.
  REQUIRE(ds.wrench.col(0).minCoeff() < -15.0);
  REQUIRE(ds.wrench.col(0).maxCoeff() > 15.0);
  REQUIRE(ds.wrench.col(2).minCoeff() >= 0.0);
  REQUIRE(ds.wrench.col(2).maxCoeff() > 20.0);
  REQUIRE(ds.wrench.col(5).maxCoeff() > 0.4);
}

TEST_CASE("synthetic dataset: splits disjoint and sized by fraction",
          "[calibration]") {
  const CalibrationDataset ds = generate_synthetic_dataset(10, 1000, 0.0);
  REQUIRE(ds.count(Split::train) == 700);
  REQUIRE(ds.count(Split::validation) == 150);
  REQUIRE(ds.count(Split::test) == 150);
  REQUIRE_THROWS_AS(generate_synthetic_dataset(1, 50, 0.0), ConfigError);
  REQUIRE_THROWS_AS(generate_synthetic_dataset(1, 500, -0.1), ConfigError);
}

TEST_CASE("mlp: analytic gradients match central finite differences",
          "[calibration]") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    MlpModel m = init_mlp({5, 9, 7, 4}, 100 + trial);
    Eigen::MatrixXd x(8, 5), y(8, 4);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    for (int i = 0; i < y.size(); ++i) y.data()[i] = u(rng);

    MlpGradients grad;
    mlp_loss_and_gradient(m, x, y, grad);

    const double eps = 1e-6;
    double worst = 0.0;
    for (size_t l = 0; l < m.weights.size(); ++l) {
      for (int i = 0; i < m.weights[l].rows(); ++i)
        for (int j = 0; j < m.weights[l].cols(); ++j) {
          const double saved = m.weights[l](i, j);
          m.weights[l](i, j) = saved + eps;
          const double up = mlp_loss(m, x, y);
          m.weights[l](i, j) = saved - eps;
          const double down = mlp_loss(m, x, y);
          m.weights[l](i, j) = saved;
          const double numeric = (up - down) / (2.0 * eps);
          const double analytic = grad.weights[l](i, j);
          const double rel = std::abs(numeric - analytic) /
                             std::max({std::abs(numeric), std::abs(analytic),
                                       1e-8});
          worst = std::max(worst, rel);
        }
      for (int i = 0; i < m.biases[l].size(); ++i) {
        const double saved = m.biases[l](i);
        m.biases[l](i) = saved + eps;
        const double up = mlp_loss(m, x, y);
        m.biases[l](i) = saved - eps;
        const double down = mlp_loss(m, x, y);
        m.biases[l](i) = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double rel = std::abs(numeric - grad.biases[l](i)) /
                           std::max({std::abs(numeric),
                                     std::abs(grad.biases[l](i)), 1e-8});
        worst = std::max(worst, rel);
      }
    }
    REQUIRE(worst < 1e-4);
  }
}

TEST_CASE("predict: zero weights give the output bias", "[calibration]") {
  MlpModel m = init_mlp({8, 4, 6}, 1);
  for (auto& w : m.weights) w.setZero();
  m.biases.back() << 1, 2, 3, 0.1, 0.2, 0.3;
  CapacitanceSample s;
  s.channels = Eigen::VectorXd::Constant(8, 512.0);
  const Wrench w = predict(m, s);
  REQUIRE((w.force - Vec3(1, 2, 3)).norm() == 0.0);
  REQUIRE((w.torque - Vec3(0.1, 0.2, 0.3)).norm() == 0.0);
  // Deterministic across repeated calls.
  const Wrench w2 = predict(m, s);
  REQUIRE(w.as_vector() == w2.as_vector());

  CapacitanceSample wrong;
  wrong.channels = Eigen::VectorXd::Zero(5);
  REQUIRE_THROWS_AS(predict(m, wrong), ConfigError);
}

TEST_CASE("training: one epoch reduces the training loss", "[calibration]") {
  const CalibrationDataset ds = generate_synthetic_dataset(11, 1200, 0.0);
  TrainingConfig cfg;
  cfg.epochs = 1;
  cfg.warmup_epochs = 0;
  cfg.seed = 3;
  const TrainResult result = train_calibration(ds, cfg);
  REQUIRE(result.train_loss.size() == 1);
  REQUIRE(result.initial_train_loss > 0.0);
  REQUIRE(result.train_loss[0] < result.initial_train_loss);
}

TEST_CASE("training: deterministic per seed and best checkpoints improve",
          "[calibration]") {
  const CalibrationDataset ds = generate_synthetic_dataset(12, 1500, 0.0);
  TrainingConfig cfg;
  cfg.epochs = 8;
  cfg.seed = 5;
  const TrainResult a = train_calibration(ds, cfg);
  const TrainResult b = train_calibration(ds, cfg);
  REQUIRE(a.best_validation_loss == b.best_validation_loss);
  for (size_t l = 0; l < a.model.weights.size(); ++l) {
    REQUIRE(a.model.weights[l] == b.model.weights[l]);
    REQUIRE(a.model.biases[l] == b.model.biases[l]);
  }

  // Validation loss at successive best checkpoints strictly improves, and
  // training loss tracks it downward across those checkpoints.
  double best_val = std::numeric_limits<double>::infinity();
  double last_best_train = std::numeric_limits<double>::infinity();
  for (size_t e = 0; e < a.validation_loss.size(); ++e) {
    if (a.validation_loss[e] < best_val) {
      best_val = a.validation_loss[e];
      REQUIRE(a.train_loss[e] <= last_best_train * 1.02);
      last_best_train = a.train_loss[e];
    }
  }
  REQUIRE(a.best_epoch >= 0);
}

TEST_CASE("training: divergence raises a fault with the epoch index",
          "[calibration]") {
  CalibrationDataset ds = generate_synthetic_dataset(13, 800, 0.0);
  ds.capacitance(3, 2) = std::nan("");  // poisons the loss at epoch 0
  TrainingConfig cfg;
  cfg.epochs = 5;
  try {
    train_calibration(ds, cfg);
    FAIL("expected TrainingFault");
  } catch (const TrainingFault& fault) {
    REQUIRE(fault.epoch == 0);
  }
}

TEST_CASE("evaluate: perfect and constant-zero predictors", "[calibration]") {
  // Constant-bias model on a dataset whose labels equal that bias: zero error.
  CalibrationDataset ds;
  const int n = 50;
  ds.capacitance = Eigen::MatrixXd::Random(n, 8);
  ds.wrench.resize(n, 6);
  Vec6 bias;
  bias << 1, -2, 3, 0.1, -0.2, 0.3;
  for (int i = 0; i < n; ++i) ds.wrench.row(i) = bias.transpose();
  ds.t_ns.assign(n, 0);
  ds.split.assign(n, Split::test);
  MlpModel m = init_mlp({8, 4, 6}, 1);
  for (auto& w : m.weights) w.setZero();
  m.biases.back() = bias;
  const AxisErrorReport perfect = evaluate(m, ds, Split::test);
  for (int a = 0; a < 6; ++a) REQUIRE(perfect.mse[a] == 0.0);

  // Constant-zero predictor on synthetic data: per-axis MSE equals the label
  // second moment. Uniform sampling gives the analytic values
  // E[w^2] = range^2/12 + center^2.
  const CalibrationDataset synth = generate_synthetic_dataset(14, 40000, 0.0);
  MlpModel zero = init_mlp({8, 4, 6}, 1);
  for (auto& w : zero.weights) w.setZero();
  const AxisErrorReport report = evaluate(zero, synth, Split::test);
  for (int a = 0; a < 6; ++a) {
    const double range = axis_range(a);
    const double analytic =
        range * range / 12.0 + axis_center(a) * axis_center(a);
    REQUIRE(report.mse[a] == Catch::Approx(analytic).epsilon(0.06));
  }
}

TEST_CASE("evaluate: empty split rejected", "[calibration]") {
  CalibrationDataset ds;
  ds.capacitance = Eigen::MatrixXd::Random(10, 8);
  ds.wrench = Eigen::MatrixXd::Random(10, 6);
  ds.t_ns.assign(10, 0);
  ds.split.assign(10, Split::train);
  MlpModel m = init_mlp({8, 4, 6}, 1);
  REQUIRE_THROWS_AS(evaluate(m, ds, Split::test), ConfigError);
}

TEST_CASE("model file: round trip and error paths", "[calibration]") {
  MlpModel m = init_mlp({8, 16, 12, 6}, 777);
  const std::string path = temp_path("clasp_model.bin");
  save_model(m, path);
  const MlpModel back = load_model(path);
  REQUIRE(back.widths == m.widths);
  for (size_t l = 0; l < m.weights.size(); ++l) {
    REQUIRE(back.weights[l] == m.weights[l]);  // bit-exact
    REQUIRE(back.biases[l] == m.biases[l]);
  }

  // Truncation detected.
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 9);
  REQUIRE_THROWS_AS(load_model(path), IoError);

  // Bad magic detected.
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOTAMODELFILE....";
  }
  REQUIRE_THROWS_AS(load_model(path), IoError);
  std::remove(path.c_str());
}

TEST_CASE("dataset log: round trip preserves pairs and splits", "[calibration]") {
  const CalibrationDataset ds = generate_synthetic_dataset(15, 600, 0.05);
  const SessionLog log = dataset_to_log(ds, "calib");
  REQUIRE(log.streams().size() == 3);
  const CalibrationDataset back = dataset_from_log(log);
  REQUIRE(back.capacitance == ds.capacitance);
  REQUIRE(back.wrench == ds.wrench);
  REQUIRE(back.split == ds.split);
  REQUIRE(back.t_ns == ds.t_ns);
}

TEST_CASE("training pipeline: quick fit beats the linear baseline",
          "[calibration]") {
  // Small run: enough to show the MLP actually learns the nonlinearity.
  const CalibrationDataset ds = generate_synthetic_dataset(16, 12000, 0.0);
  TrainingConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 128;
  cfg.seed = 9;
  const TrainResult result = train_calibration(ds, cfg);
  const AxisErrorReport report = evaluate(result.model, ds, Split::test);

  // Linear least-squares baseline on the same data.
  const Eigen::MatrixXd x = ds.inputs(Split::train);
  const Eigen::MatrixXd y = ds.labels(Split::train);
  Eigen::MatrixXd xb(x.rows(), x.cols() + 1);
  xb << x, Eigen::VectorXd::Ones(x.rows());
  const Eigen::MatrixXd coeffs =
      (xb.transpose() * xb).ldlt().solve(xb.transpose() * y);
  const Eigen::MatrixXd xt = ds.inputs(Split::test);
  Eigen::MatrixXd xtb(xt.rows(), xt.cols() + 1);
  xtb << xt, Eigen::VectorXd::Ones(xt.rows());
  const Eigen::MatrixXd residual = ds.labels(Split::test) - xtb * coeffs;

  for (int a = 0; a < 6; ++a) {
    const double linear_mse =
        residual.col(a).squaredNorm() / residual.rows();
    REQUIRE(report.mse[a] < 0.5 * linear_mse);  // clearly beyond linear
  }
  REQUIRE(report.pretty().find("Fz") != std::string::npos);
}
