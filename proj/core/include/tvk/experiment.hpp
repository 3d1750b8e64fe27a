#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tvk/config.hpp"
#include "tvk/metrics.hpp"
#include "tvk/online.hpp"
#include "tvk/plants.hpp"
#include "tvk/training.hpp"

namespace tvk {

struct PlantConfig {
  std::string name = "duffing";  // ntvs | duffing | grn | ltv
  std::map<std::string, double> params;  // overrides of the plant's parameters
  double dt = 0.1;
  int substeps = 1;
  std::vector<double> x0;  // empty: the plant's nominal initial state
  bool random_x0 = false;  // uniform in [x0_lo, x0_hi] per seed
  double x0_lo = 0.0;
  double x0_hi = 5.0;
  double noise_std = 0.0;  // measurement noise seen by the learner
  Index steps = 300;       // simulated transitions (prediction runs)

  bool operator==(const PlantConfig&) const = default;
};

struct ControlSection {
  Index H = 16;
  std::vector<double> q_diag;  // lifted-state weights; shorter than r is zero padded
  std::vector<double> r_diag;
  std::vector<double> u_min;   // empty: plant bounds
  std::vector<double> u_max;
  int sdp_every = 1;
  int max_reuse = 50;
  Index steps = 600;
  Index ident_steps = 200;     // open-loop random-input steps before the loop starts
  std::string reference = "sine";  // sine | zero
  Index ref_output = 1;        // 1-based state index tracked by the sine reference
  double ref_offset = 0.0;
  double ref_amplitude = 1.0;
  double ref_period = 100.0;
  std::string ref_target = "trajectory";  // trajectory | steady (per-step steady states)
  double dither = 0.0;
  std::vector<double> u_nominal;  // steady-state input preference; empty: zero
  Index metric_skip = 0;       // closed-loop steps excluded from the tracking metric
  bool dump_certificates = false;

  bool operator==(const ControlSection&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string mode = "predict";  // predict | control
  std::vector<std::string> methods{"otvdkl"};
  int repeats = 1;
  std::uint64_t seed = 0;
  std::string out = "runs";

  PlantConfig plant;
  LiftingSpec lifting;
  TrainConfig training;

  Index w = 30;
  Index b = 10;
  double epsilon = 0.0;
  Index t_start = 30;  // first predicted transition index (prediction runs)
  double feasibility_tol = 1e-9;
  int stall_limit = 10;
  int refactor_every = 100;
  int theta_refresh_steps = 0;
  // accumulate-only starts from every transition before t_start instead of the last w.
  bool accumulate_full_history = true;

  ControlSection control;

  static ExperimentConfig from_document(const ConfigDocument& doc);
  static ExperimentConfig load(const std::string& path);
  ConfigDocument to_document() const;
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

PlantSpec make_plant(const PlantConfig& cfg, std::shared_ptr<GrnDiagnostics> diag = nullptr);

// Independent stream seeds derived from the run seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct RunMetrics {
  std::string method;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double mae = 0.0;
  double rmse = 0.0;
  std::vector<double> errors;
  int accepted = 0;
  int rejected = 0;
  int infeasible = 0;
  double learning_wall_s = 0.0;
  double online_wall_s = 0.0;
  std::size_t max_retained = 0;
  double final_train_loss = 0.0;
  // Control runs.
  double track_mae = 0.0;
  double track_rmse = 0.0;
  int cert_reused = 0;
  int sdp_failures = 0;
  double min_lmi_residual = 0.0;
  bool aborted = false;
};

// Trains the initial model on the first window of a prediction run and writes model.bin/theta.json.
TrainResult run_training(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& dir);

// One repeat; writes metrics.csv, updates.csv, trajectory.csv, model.bin (and theta.json) into dir when nonempty.
RunMetrics run_prediction(const ExperimentConfig& cfg, Method method, std::uint64_t seed, const std::string& dir);
RunMetrics run_control(const ExperimentConfig& cfg, Method method, std::uint64_t seed, const std::string& dir);

struct MethodSummary {
  std::string method;
  Aggregate mae, rmse, track_rmse, online_wall_s;
  int failures = 0;
};

struct ExperimentSummary {
  std::vector<RunMetrics> runs;
  std::vector<MethodSummary> methods;
};

// Every method x repeat (seed = cfg.seed + repeat) into <out>/<method>/<seed>/ plus <out>/summary.csv
// and <out>/timing.csv.
// Module errors are recorded per repeat and the remaining repeats still run.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

// metrics.csv and summary.csv hold only seed-determined values; wall times go to timing.csv.
void write_metrics_csv(const std::string& path, const RunMetrics& m);
void write_timing_csv(const std::string& path, const RunMetrics& m);
void write_summary_csv(const std::string& path, const ExperimentSummary& s);
void write_timing_summary_csv(const std::string& path, const ExperimentSummary& s);

}  // namespace tvk
