// clasp command-line tool: calibration pipeline, session-log utilities, and
// the deterministic contact simulator.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clasp/clasp.hpp"

namespace {

using namespace clasp;

std::vector<std::string> split_csv(const std::string& joined) {
  std::vector<std::string> out;
  std::stringstream ss(joined);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

ResampleMethod parse_method(const std::string& name) {
  if (name == "zoh" || name == "zero-order-hold")
    return ResampleMethod::zero_order_hold;
  if (name == "linear") return ResampleMethod::linear;
  throw ConfigError("unknown resample method '" + name + "'");
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + name + "'");
}

AppConfig config_or_default(const std::string& path) {
  return path.empty() ? AppConfig{} : load_config(path);
}

int cmd_calibrate_synth(uint64_t seed, int samples, double noise, int channels,
                        const std::string& out) {
  const CalibrationDataset ds =
      generate_synthetic_dataset(seed, samples, noise, channels);
  write_log(dataset_to_log(ds, "synthetic seed=" + std::to_string(seed)), out);
  std::printf("wrote %d samples (%d train / %d validation / %d test) to %s\n",
              ds.size(), ds.count(Split::train), ds.count(Split::validation),
              ds.count(Split::test), out.c_str());
  return 0;
}

int cmd_calibrate_train(const std::string& data, const std::string& out,
                        const std::string& config_path, int epochs, int batch,
                        double lr, int64_t seed) {
  AppConfig cfg = config_or_default(config_path);
  if (epochs > 0) cfg.training.epochs = epochs;
  if (batch > 0) cfg.training.batch_size = batch;
  if (lr > 0) cfg.training.learning_rate = lr;
  if (seed >= 0) cfg.training.seed = static_cast<uint64_t>(seed);

  const CalibrationDataset ds = dataset_from_log(read_log(data));
  std::printf("training on %d samples (%d channels), %d epochs...\n",
              ds.count(Split::train), ds.channels(), cfg.training.epochs);
  const TrainResult result = train_calibration(ds, cfg.training);
  save_model(result.model, out);
  std::printf("best validation loss %.6e at epoch %d; model written to %s\n",
              result.best_validation_loss, result.best_epoch, out.c_str());
  const AxisErrorReport report = evaluate(result.model, ds, Split::test);
  std::printf("held-out test errors (%d samples):\n%s", report.samples,
              report.pretty().c_str());
  return 0;
}

int cmd_calibrate_eval(const std::string& model_path, const std::string& data,
                       const std::string& split) {
  const MlpModel model = load_model(model_path);
  const CalibrationDataset ds = dataset_from_log(read_log(data));
  const AxisErrorReport report = evaluate(model, ds, parse_split(split));
  std::printf("%s split, %d samples:\n%s", split.c_str(), report.samples,
              report.pretty().c_str());
  return 0;
}

int cmd_log_info(const std::string& path) {
  ReadStats stats;
  const SessionLog log = read_log(path, &stats);
  std::printf("session: %s\nepoch_ns: %llu\n", log.session_id().c_str(),
              static_cast<unsigned long long>(log.epoch_ns()));
  for (size_t i = 0; i < log.streams().size(); ++i) {
    const auto& s = log.streams()[i];
    const auto& samples = log.samples(static_cast<int>(i));
    double span = 0.0;
    if (samples.size() > 1)
      span = static_cast<double>(samples.back().t_ns - samples.front().t_ns) *
             1e-9;
    std::printf(
        "  stream %-12s arity %2d  nominal %7.1f Hz  offset %+8lld ns  "
        "%8zu samples  span %.3f s\n",
        s.name.c_str(), s.arity, s.nominal_rate,
        static_cast<long long>(s.clock_offset_ns), samples.size(), span);
  }
  if (stats.truncated)
    std::printf("warning: file truncated; recovered %zu records\n",
                stats.records_read);
  return 0;
}

int cmd_log_export(const std::string& path, const std::string& streams,
                   double rate, const std::string& method,
                   const std::string& out) {
  const SessionLog log = read_log(path);
  const AlignedTable table =
      align_resample(log, split_csv(streams), rate, parse_method(method));
  write_csv(table, out);
  std::printf("wrote %d rows x %ld columns to %s\n", table.rows(),
              static_cast<long>(table.values.cols()), out.c_str());
  return 0;
}

int cmd_log_resample(const std::string& path, const std::string& streams,
                     double rate, const std::string& method,
                     const std::string& out) {
  const SessionLog log = read_log(path);
  const SessionLog res =
      resample_to_log(log, split_csv(streams), rate, parse_method(method));
  write_log(res, out);
  std::printf("wrote resampled log (%zu samples) to %s\n", res.total_samples(),
              out.c_str());
  return 0;
}

int cmd_sim_run(const std::string& name, uint64_t seed, const std::string& out,
                const std::string& metrics_out,
                const std::string& config_path) {
  const AppConfig cfg = config_or_default(config_path);
  const Scenario scenario = scenario_from_config(cfg, name, seed);
  RunResult result = run_scenario(scenario);
  if (!out.empty()) {
    write_log(result.trace, out);
    result.metrics.trace_hash = file_hash(out);
    std::printf("trace written to %s (hash %016llx)\n", out.c_str(),
                static_cast<unsigned long long>(result.metrics.trace_hash));
  }
  std::printf("%s", result.metrics.pretty().c_str());
  if (!metrics_out.empty()) {
    std::ofstream mo(metrics_out, std::ios::trunc);
    mo << result.metrics.to_json();
    std::printf("metrics written to %s\n", metrics_out.c_str());
  }
  return result.metrics.all_pass() ? 0 : 1;
}

int cmd_sim_list() {
  for (const auto& name : builtin_scenarios()) {
    const Scenario s = scenario_by_name(name);
    std::printf("%-8s %-8s duration %5.1f s  safety (grasp %g N, other %g N)\n",
                name.c_str(), s.policy.c_str(), s.duration,
                s.limits.grasp_axis_limit, s.limits.other_axes_limit);
  }
  return 0;
}

int cmd_sim_report(const std::string& trace_path, std::string scenario_name,
                   uint64_t seed, const std::string& config_path) {
  const SessionLog trace = read_log(trace_path);
  if (scenario_name.empty()) {
    // Session ids are "<scenario> seed=<n>".
    const std::string& id = trace.session_id();
    scenario_name = id.substr(0, id.find(' '));
  }
  const AppConfig cfg = config_or_default(config_path);
  const Scenario scenario = scenario_from_config(cfg, scenario_name, seed);
  ScenarioMetrics metrics = metrics_report(trace, scenario);
  metrics.trace_hash = file_hash(trace_path);
  std::printf("%s", metrics.pretty().c_str());
  return metrics.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compliant-manipulation control library and contact simulator"};
  app.require_subcommand(1);

  // ---- calibrate ----
  auto* calibrate = app.add_subcommand("calibrate", "capacitance -> wrench pipeline");
  calibrate->require_subcommand(1);

  uint64_t synth_seed = 0;
  int synth_samples = 36000, synth_channels = 8;
  double synth_noise = 0.0;
  std::string synth_out = "dataset.log";
  auto* synth = calibrate->add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--seed", synth_seed, "rng seed");
  synth->add_option("--samples", synth_samples, "sample count (>= 100)");
  synth->add_option("--noise", synth_noise, "sensor noise sd, N-equivalent");
  synth->add_option("--channels", synth_channels, "capacitance channel count");
  synth->add_option("--out", synth_out, "output log path")->required();

  std::string train_data, train_out = "model.bin", train_config;
  int train_epochs = -1, train_batch = -1;
  double train_lr = -1.0;
  int64_t train_seed = -1;
  auto* train = calibrate->add_subcommand("train", "train the regression MLP");
  train->add_option("--data", train_data, "dataset log")->required();
  train->add_option("--out", train_out, "model output path");
  train->add_option("--config", train_config, "config file (json)");
  train->add_option("--epochs", train_epochs, "override epochs");
  train->add_option("--batch", train_batch, "override batch size");
  train->add_option("--lr", train_lr, "override peak learning rate");
  train->add_option("--seed", train_seed, "override training seed");

  std::string eval_model, eval_data, eval_split = "test";
  auto* eval = calibrate->add_subcommand("eval", "per-axis error report");
  eval->add_option("--model", eval_model, "model file")->required();
  eval->add_option("--data", eval_data, "dataset log")->required();
  eval->add_option("--split", eval_split, "train|validation|test");

  // ---- log ----
  auto* log_cmd = app.add_subcommand("log", "session-log utilities");
  log_cmd->require_subcommand(1);

  std::string info_path;
  auto* info = log_cmd->add_subcommand("info", "print header and stream stats");
  info->add_option("file", info_path, "log path")->required();

  std::string csv_path, csv_streams, csv_method = "linear", csv_out;
  double csv_rate = 60.0;
  auto* export_csv = log_cmd->add_subcommand("export-csv",
                                             "align, resample, write CSV");
  export_csv->add_option("file", csv_path, "log path")->required();
  export_csv->add_option("--streams", csv_streams, "comma-separated names")
      ->required();
  export_csv->add_option("--rate", csv_rate, "target rate, Hz");
  export_csv->add_option("--method", csv_method, "zoh|linear");
  export_csv->add_option("--out", csv_out, "CSV output path")->required();

  std::string rs_path, rs_streams, rs_method = "linear", rs_out;
  double rs_rate = 60.0;
  auto* resample = log_cmd->add_subcommand("resample",
                                           "write a resampled session log");
  resample->add_option("file", rs_path, "log path")->required();
  resample->add_option("--streams", rs_streams, "comma-separated names")
      ->required();
  resample->add_option("--rate", rs_rate, "target rate, Hz");
  resample->add_option("--method", rs_method, "zoh|linear");
  resample->add_option("--out", rs_out, "output log path")->required();

  // ---- sim ----
  auto* sim = app.add_subcommand("sim", "deterministic contact simulator");
  sim->require_subcommand(1);

  std::string run_scenario_name, run_out, run_metrics_out, run_config;
  uint64_t run_seed = 0;
  auto* run = sim->add_subcommand("run", "run a scenario");
  run->add_option("--scenario", run_scenario_name, "scenario name")->required();
  run->add_option("--seed", run_seed, "scenario seed");
  run->add_option("--out", run_out, "trace output path");
  run->add_option("--metrics-out", run_metrics_out, "metrics json path");
  run->add_option("--config", run_config, "config file (json)");

  auto* list = sim->add_subcommand("list", "list built-in scenarios");

  std::string report_trace, report_scenario, report_config;
  uint64_t report_seed = 0;
  auto* report = sim->add_subcommand("report", "recompute metrics from a trace");
  report->add_option("trace", report_trace, "trace log path")->required();
  report->add_option("--scenario", report_scenario,
                     "scenario name (default: from the session id)");
  report->add_option("--seed", report_seed, "seed used for the run");
  report->add_option("--config", report_config, "config file (json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth)
      return cmd_calibrate_synth(synth_seed, synth_samples, synth_noise,
                                 synth_channels, synth_out);
    if (*train)
      return cmd_calibrate_train(train_data, train_out, train_config,
                                 train_epochs, train_batch, train_lr,
                                 train_seed);
    if (*eval) return cmd_calibrate_eval(eval_model, eval_data, eval_split);
    if (*info) return cmd_log_info(info_path);
    if (*export_csv)
      return cmd_log_export(csv_path, csv_streams, csv_rate, csv_method,
                            csv_out);
    if (*resample)
      return cmd_log_resample(rs_path, rs_streams, rs_rate, rs_method, rs_out);
    if (*run)
      return cmd_sim_run(run_scenario_name, run_seed, run_out, run_metrics_out,
                         run_config);
    if (*list) return cmd_sim_list();
    if (*report)
      return cmd_sim_report(report_trace, report_scenario, report_seed,
                            report_config);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
