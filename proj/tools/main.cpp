#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tvk/errors.hpp"
#include "tvk/experiment.hpp"
#include "tvk/verify/criteria.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> method;
  std::optional<int> repeats;
};

void add_run_flags(CLI::App* sub, RunFlags& f) {
  sub->add_option("--config", f.config, "experiment config file")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "base seed (repeat i uses seed + i)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--method", f.method, "otvdkl | otvdkl-gated | fixed-dko | accumulate-only");
  sub->add_option("--repeats", f.repeats, "number of seeds")->check(CLI::PositiveNumber);
}

tvk::ExperimentConfig load(const RunFlags& f, const char* mode) {
  tvk::ExperimentConfig cfg = tvk::ExperimentConfig::load(f.config);
  if (mode) cfg.mode = mode;
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.method) cfg.methods = {*f.method};
  if (f.repeats) cfg.repeats = *f.repeats;
  cfg.validate();
  return cfg;
}

void print_summary(const tvk::ExperimentSummary& s, bool control) {
  std::printf("%-16s %6s %3s %12s %12s %9s %9s %10s\n", "method", "seed", "ok", control ? "track_mae" : "mae",
              control ? "track_rmse" : "rmse", "accepted", "rejected", "online_s");
  for (const auto& m : s.runs) {
    std::printf("%-16s %6llu %3d %12.6g %12.6g %9d %9d %10.4g\n", m.method.c_str(),
                static_cast<unsigned long long>(m.seed), m.ok ? 1 : 0, m.mae, m.rmse, m.accepted, m.rejected,
                m.online_wall_s);
    if (!m.ok) std::printf("  error: %s\n", m.error.c_str());
  }
  for (const auto& a : s.methods) {
    std::printf("%-16s mean %s %.6g +- %.6g (median %.6g, n=%zu%s, failures %d)\n", a.method.c_str(),
                control ? "track_rmse" : "mae", control ? a.track_rmse.mean : a.mae.mean,
                control ? a.track_rmse.std : a.mae.std, control ? a.track_rmse.median : a.mae.median, a.mae.count,
                a.mae.single ? ", std not estimable" : "", a.failures);
  }
}

int run_train(const RunFlags& f) {
  tvk::ExperimentConfig cfg = load(f, nullptr);
  for (int i = 0; i < cfg.repeats; ++i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    const std::string dir = (std::filesystem::path(cfg.out) / "train" / std::to_string(seed)).string();
    const tvk::TrainResult tr = tvk::run_training(cfg, seed, dir);
    std::printf("seed %llu: final loss %.6g, model written to %s\n", static_cast<unsigned long long>(seed),
                tr.loss_history.empty() ? 0.0 : tr.loss_history.back(), dir.c_str());
  }
  return kOk;
}

int run_experiment(const RunFlags& f, const char* mode) {
  const tvk::ExperimentConfig cfg = load(f, mode);
  const tvk::ExperimentSummary s = tvk::run_experiment(cfg);
  print_summary(s, cfg.mode == "control");
  std::printf("results in %s\n", cfg.out.c_str());
  for (const auto& m : s.runs)
    if (!m.ok) return kRuntime;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online time-varying Koopman learning and control"};
  app.require_subcommand(1);

  RunFlags train_f, predict_f, control_f;
  add_run_flags(app.add_subcommand("train", "train the initial lifted model"), train_f);
  add_run_flags(app.add_subcommand("predict", "online learning with one-step prediction"), predict_f);
  add_run_flags(app.add_subcommand("control", "closed-loop MPC with online learning"), control_f);

  auto* bench = app.add_subcommand("bench", "per-update time of the low-rank update against a full refit");
  tvk::Index bw = 200, br = 32, bb = 10;
  int bupdates = 100;
  std::uint64_t bseed = 1;
  bench->add_option("--w", bw, "window length")->check(CLI::PositiveNumber);
  bench->add_option("--r", br, "lifted dimension")->check(CLI::PositiveNumber);
  bench->add_option("--b", bb, "batch size")->check(CLI::PositiveNumber);
  bench->add_option("--updates", bupdates, "number of updates averaged")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bseed, "data seed");

  auto* verify = app.add_subcommand("verify", "run the oracle and acceptance suites");
  std::string config_dir = TVK_CONFIG_DIR;
  std::vector<int> only;
  verify->add_option("--configs", config_dir, "directory with the experiment configs")->check(CLI::ExistingDirectory);
  verify->add_option("--only", only, "criterion ids to run")->check(CLI::Range(1, 12));
  verify->add_option("--seed", bseed, "oracle seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (e.get_exit_code() != 0) std::cerr << app.help();
    return kUsage;
  }

  try {
    if (app.got_subcommand("train")) return run_train(train_f);
    if (app.got_subcommand("predict")) return run_experiment(predict_f, "predict");
    if (app.got_subcommand("control")) return run_experiment(control_f, "control");
    if (app.got_subcommand("bench")) {
      if (bb > bw) throw tvk::ConfigError("b must not exceed w");
      const auto t = tvk::verify::time_updates(bw, br, bb, bupdates, bseed);
      std::printf("w=%ld r=%ld b=%ld updates=%d\n", static_cast<long>(t.w), static_cast<long>(t.r),
                  static_cast<long>(t.b), t.updates);
      std::printf("iterative %.2f us/update\nbatch     %.2f us/update\nspeedup   %.2fx\nmax |dAB| %.3g\n",
                  t.iterative_us, t.batch_us, t.batch_us / t.iterative_us, t.max_deviation);
      return t.iterative_us < t.batch_us ? kOk : kRuntime;
    }
    if (app.got_subcommand("verify")) {
      tvk::verify::CriteriaOptions opt;
      opt.config_dir = config_dir;
      if (verify->count("--seed")) opt.seed = bseed;
      if (only.empty())
        for (int i = 1; i <= static_cast<int>(tvk::verify::all_criteria().size()); ++i) only.push_back(i);
      int failed = 0;
      for (int id : only) {
        const auto r = tvk::verify::run_criterion(id, opt);
        std::printf("criterion %2d %s  %s: %s [%.2f s]\n", r.id, r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str(), r.seconds);
        std::fflush(stdout);
        if (!r.pass) ++failed;
      }
      return failed ? kRuntime : kOk;
    }
  } catch (const tvk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
