#include "tvk/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "tvk/controller.hpp"
#include "tvk/errors.hpp"
#include "tvk/koopman.hpp"

namespace tvk {

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"name", "mode", "methods", "repeats", "seed", "out"}},
      {"plant", {"name", "dt", "substeps", "x0", "random_x0", "x0_lo", "x0_hi", "noise_std", "steps"}},
      {"plant_params", {}},
      {"lifting", {"layers", "concat_state", "fixed_decoder", "normalize_inputs"}},
      {"training",
       {"epochs", "steps_per_epoch", "learning_rate", "weight_decay", "beta1", "beta2", "eps", "lambda", "a_norm_cap"}},
      {"online",
       {"w", "b", "epsilon", "t_start", "feasibility_tol", "stall_limit", "refactor_every", "theta_refresh_steps",
        "accumulate_full_history"}},
      {"control",
       {"H", "q_diag", "r_diag", "u_min", "u_max", "sdp_every", "max_reuse", "steps", "ident_steps", "reference",
        "ref_output", "ref_offset", "ref_amplitude", "ref_period", "ref_target", "dither", "u_nominal", "metric_skip",
        "dump_certificates"}},
  };
  return keys;
}

std::vector<double> doubles_or(const ConfigDocument& d, const std::string& t, const std::string& k,
                               std::vector<double> fallback) {
  return d.has(t, k) ? d.get(t, k).as_doubles() : fallback;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size())); }

double param(const PlantConfig& c, const std::string& k, double fallback) {
  auto it = c.params.find(k);
  return it == c.params.end() ? fallback : it->second;
}

Vec initial_state(const ExperimentConfig& cfg, const PlantSpec& plant, std::uint64_t seed) {
  if (cfg.plant.random_x0) {
    std::mt19937_64 rng(derive_seed(seed, 3));
    std::uniform_real_distribution<double> u(cfg.plant.x0_lo, cfg.plant.x0_hi);
    Vec x(plant.n);
    for (Index i = 0; i < plant.n; ++i) x(i) = u(rng);
    return x;
  }
  if (!cfg.plant.x0.empty()) return to_vec(cfg.plant.x0);
  return plant.x0;
}

void save_model_dir(const std::string& dir, const LiftedModel& model) {
  std::string ref;
  if (model.obs && model.obs->has_network()) {
    save_checkpoint((std::filesystem::path(dir) / "theta.json").string(), *model.obs);
    ref = "theta.json";
  }
  save_model((std::filesystem::path(dir) / "model.bin").string(), model, ref);
}

void count_updates(const std::vector<UpdateRecord>& log, RunMetrics& m) {
  for (const auto& r : log) {
    if (r.accepted) ++m.accepted;
    else ++m.rejected;
    if (r.reason == Reason::Infeasible) ++m.infeasible;
  }
}

OnlineConfig online_config(const ExperimentConfig& cfg, Method method, Index w) {
  OnlineConfig oc = OnlineConfig::for_method(method, w, cfg.b, cfg.epsilon);
  oc.feasibility_tol = cfg.feasibility_tol;
  oc.stall_limit = cfg.stall_limit;
  oc.refactor_every = cfg.refactor_every;
  oc.theta_refresh_steps = cfg.theta_refresh_steps;
  return oc;
}

struct PredictionSetup {
  PlantSpec plant;
  Trajectory truth;
  Mat Xobs;
  Index w_init = 0;
  std::int64_t k0 = 0;
};

PredictionSetup prediction_setup(const ExperimentConfig& cfg, Method method, std::uint64_t seed) {
  PredictionSetup s;
  s.plant = make_plant(cfg.plant);
  const Vec x0 = initial_state(cfg, s.plant, seed);
  const Mat U = s.plant.m > 0 ? random_inputs(s.plant, cfg.plant.steps, derive_seed(seed, 1))
                              : Mat(0, cfg.plant.steps);
  s.truth = simulate(s.plant, x0, U);
  s.Xobs = cfg.plant.noise_std > 0.0 ? add_measurement_noise(s.truth.X, cfg.plant.noise_std, derive_seed(seed, 2))
                                     : s.truth.X;
  s.k0 = cfg.t_start;
  s.w_init = method == Method::AccumulateOnly && cfg.accumulate_full_history ? cfg.t_start : cfg.w;
  return s;
}

TrajectoryBuffer prediction_buffer(const PredictionSetup& s, Index b) {
  TrajectoryBuffer buf(s.plant.n, s.plant.m, s.w_init, b);
  const Index m = s.plant.m;
  for (std::int64_t k = s.k0 - s.w_init; k <= s.k0; ++k)
    buf.push(Snapshot{k, s.Xobs.col(k), m > 0 ? Vec(s.truth.U.col(k)) : Vec(0)});
  return buf;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ExperimentConfig ExperimentConfig::from_document(const ConfigDocument& d) {
  for (const auto& [table, keys] : d.tables()) {
    auto it = known_keys().find(table);
    if (it == known_keys().end()) throw ConfigError("unknown config table [" + table + "]");
    if (table == "plant_params") continue;
    for (const auto& [k, v] : keys)
      if (!it->second.count(k)) throw ConfigError("unknown config key " + table + "." + k);
  }
  ExperimentConfig c;
  c.name = d.get_or("experiment", "name", c.name);
  c.mode = d.get_or("experiment", "mode", c.mode);
  if (d.has("experiment", "methods")) c.methods = d.get("experiment", "methods").as_strings();
  c.repeats = d.get_or("experiment", "repeats", c.repeats);
  c.seed = static_cast<std::uint64_t>(d.get_or("experiment", "seed", static_cast<std::int64_t>(c.seed)));
  c.out = d.get_or("experiment", "out", c.out);

  PlantConfig& p = c.plant;
  p.name = d.get_or("plant", "name", p.name);
  p.dt = d.get_or("plant", "dt", p.dt);
  p.substeps = d.get_or("plant", "substeps", p.substeps);
  p.x0 = doubles_or(d, "plant", "x0", p.x0);
  p.random_x0 = d.get_or("plant", "random_x0", p.random_x0);
  p.x0_lo = d.get_or("plant", "x0_lo", p.x0_lo);
  p.x0_hi = d.get_or("plant", "x0_hi", p.x0_hi);
  p.noise_std = d.get_or("plant", "noise_std", p.noise_std);
  p.steps = d.get_or("plant", "steps", static_cast<std::int64_t>(p.steps));
  if (auto it = d.tables().find("plant_params"); it != d.tables().end())
    for (const auto& [k, v] : it->second) p.params[k] = v.as_double();

  if (d.has("lifting", "layers"))
    for (auto v : d.get("lifting", "layers").as_ints()) c.lifting.layers.push_back(v);
  c.lifting.concat_state = d.get_or("lifting", "concat_state", c.lifting.concat_state);
  c.lifting.fixed_decoder = d.get_or("lifting", "fixed_decoder", c.lifting.fixed_decoder);
  c.lifting.normalize_inputs = d.get_or("lifting", "normalize_inputs", c.lifting.normalize_inputs);

  TrainConfig& t = c.training;
  t.epochs = d.get_or("training", "epochs", t.epochs);
  t.steps_per_epoch = d.get_or("training", "steps_per_epoch", t.steps_per_epoch);
  t.adam.learning_rate = d.get_or("training", "learning_rate", t.adam.learning_rate);
  t.adam.weight_decay = d.get_or("training", "weight_decay", t.adam.weight_decay);
  t.adam.beta1 = d.get_or("training", "beta1", t.adam.beta1);
  t.adam.beta2 = d.get_or("training", "beta2", t.adam.beta2);
  t.adam.eps = d.get_or("training", "eps", t.adam.eps);
  t.lambda = d.get_or("training", "lambda", t.lambda);
  t.a_norm_cap = d.get_or("training", "a_norm_cap", t.a_norm_cap);

  c.w = d.get_or("online", "w", static_cast<std::int64_t>(c.w));
  c.b = d.get_or("online", "b", static_cast<std::int64_t>(c.b));
  c.epsilon = d.get_or("online", "epsilon", c.epsilon);
  c.t_start = d.get_or("online", "t_start", static_cast<std::int64_t>(c.t_start));
  c.feasibility_tol = d.get_or("online", "feasibility_tol", c.feasibility_tol);
  c.stall_limit = d.get_or("online", "stall_limit", c.stall_limit);
  c.refactor_every = d.get_or("online", "refactor_every", c.refactor_every);
  c.theta_refresh_steps = d.get_or("online", "theta_refresh_steps", c.theta_refresh_steps);
  c.accumulate_full_history = d.get_or("online", "accumulate_full_history", c.accumulate_full_history);

  ControlSection& k = c.control;
  k.H = d.get_or("control", "H", static_cast<std::int64_t>(k.H));
  k.q_diag = doubles_or(d, "control", "q_diag", k.q_diag);
  k.r_diag = doubles_or(d, "control", "r_diag", k.r_diag);
  k.u_min = doubles_or(d, "control", "u_min", k.u_min);
  k.u_max = doubles_or(d, "control", "u_max", k.u_max);
  k.sdp_every = d.get_or("control", "sdp_every", k.sdp_every);
  k.max_reuse = d.get_or("control", "max_reuse", k.max_reuse);
  k.steps = d.get_or("control", "steps", static_cast<std::int64_t>(k.steps));
  k.ident_steps = d.get_or("control", "ident_steps", static_cast<std::int64_t>(k.ident_steps));
  k.reference = d.get_or("control", "reference", k.reference);
  k.ref_output = d.get_or("control", "ref_output", static_cast<std::int64_t>(k.ref_output));
  k.ref_offset = d.get_or("control", "ref_offset", k.ref_offset);
  k.ref_amplitude = d.get_or("control", "ref_amplitude", k.ref_amplitude);
  k.ref_period = d.get_or("control", "ref_period", k.ref_period);
  k.ref_target = d.get_or("control", "ref_target", k.ref_target);
  k.dither = d.get_or("control", "dither", k.dither);
  k.u_nominal = doubles_or(d, "control", "u_nominal", k.u_nominal);
  k.metric_skip = d.get_or("control", "metric_skip", static_cast<std::int64_t>(k.metric_skip));
  k.dump_certificates = d.get_or("control", "dump_certificates", k.dump_certificates);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) { return from_document(ConfigDocument::load(path)); }

ConfigDocument ExperimentConfig::to_document() const {
  using V = ConfigValue;
  ConfigDocument d;
  d.set("experiment", "name", V::string(name));
  d.set("experiment", "mode", V::string(mode));
  d.set("experiment", "methods", V::strings(methods));
  d.set("experiment", "repeats", V::integer(repeats));
  d.set("experiment", "seed", V::integer(static_cast<std::int64_t>(seed)));
  d.set("experiment", "out", V::string(out));

  d.set("plant", "name", V::string(plant.name));
  d.set("plant", "dt", V::number(plant.dt));
  d.set("plant", "substeps", V::integer(plant.substeps));
  d.set("plant", "x0", V::numbers(plant.x0));
  d.set("plant", "random_x0", V::boolean(plant.random_x0));
  d.set("plant", "x0_lo", V::number(plant.x0_lo));
  d.set("plant", "x0_hi", V::number(plant.x0_hi));
  d.set("plant", "noise_std", V::number(plant.noise_std));
  d.set("plant", "steps", V::integer(plant.steps));
  for (const auto& [k, v] : plant.params) d.set("plant_params", k, V::number(v));

  std::vector<ConfigValue> layers;
  for (Index l : lifting.layers) layers.push_back(V::integer(l));
  d.set("lifting", "layers", V::array(layers));
  d.set("lifting", "concat_state", V::boolean(lifting.concat_state));
  d.set("lifting", "fixed_decoder", V::boolean(lifting.fixed_decoder));
  d.set("lifting", "normalize_inputs", V::boolean(lifting.normalize_inputs));

  d.set("training", "epochs", V::integer(training.epochs));
  d.set("training", "steps_per_epoch", V::integer(training.steps_per_epoch));
  d.set("training", "learning_rate", V::number(training.adam.learning_rate));
  d.set("training", "weight_decay", V::number(training.adam.weight_decay));
  d.set("training", "beta1", V::number(training.adam.beta1));
  d.set("training", "beta2", V::number(training.adam.beta2));
  d.set("training", "eps", V::number(training.adam.eps));
  d.set("training", "lambda", V::number(training.lambda));
  d.set("training", "a_norm_cap", V::number(training.a_norm_cap));

  d.set("online", "w", V::integer(w));
  d.set("online", "b", V::integer(b));
  d.set("online", "epsilon", V::number(epsilon));
  d.set("online", "t_start", V::integer(t_start));
  d.set("online", "feasibility_tol", V::number(feasibility_tol));
  d.set("online", "stall_limit", V::integer(stall_limit));
  d.set("online", "refactor_every", V::integer(refactor_every));
  d.set("online", "theta_refresh_steps", V::integer(theta_refresh_steps));
  d.set("online", "accumulate_full_history", V::boolean(accumulate_full_history));

  d.set("control", "H", V::integer(control.H));
  d.set("control", "q_diag", V::numbers(control.q_diag));
  d.set("control", "r_diag", V::numbers(control.r_diag));
  d.set("control", "u_min", V::numbers(control.u_min));
  d.set("control", "u_max", V::numbers(control.u_max));
  d.set("control", "sdp_every", V::integer(control.sdp_every));
  d.set("control", "max_reuse", V::integer(control.max_reuse));
  d.set("control", "steps", V::integer(control.steps));
  d.set("control", "ident_steps", V::integer(control.ident_steps));
  d.set("control", "reference", V::string(control.reference));
  d.set("control", "ref_output", V::integer(control.ref_output));
  d.set("control", "ref_offset", V::number(control.ref_offset));
  d.set("control", "ref_amplitude", V::number(control.ref_amplitude));
  d.set("control", "ref_period", V::number(control.ref_period));
  d.set("control", "ref_target", V::string(control.ref_target));
  d.set("control", "dither", V::number(control.dither));
  d.set("control", "u_nominal", V::numbers(control.u_nominal));
  d.set("control", "metric_skip", V::integer(control.metric_skip));
  d.set("control", "dump_certificates", V::boolean(control.dump_certificates));
  return d;
}

void ExperimentConfig::validate() const {
  if (mode != "predict" && mode != "control") throw ConfigError("mode must be predict or control");
  if (methods.empty()) throw ConfigError("no methods selected");
  for (const auto& m : methods) parse_method(m);
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (out.empty()) throw ConfigError("output directory must be set");
  const PlantSpec p = make_plant(plant);
  if (!plant.x0.empty() && static_cast<Index>(plant.x0.size()) != p.n) throw ConfigError("x0 has the wrong length");
  if (plant.random_x0 && !(plant.x0_lo < plant.x0_hi)) throw ConfigError("x0_lo must be below x0_hi");
  if (plant.noise_std < 0.0) throw ConfigError("noise_std must be nonnegative");
  if (!lifting.layers.empty() && lifting.layers.size() < 2) throw ConfigError("lifting needs at least two layers");
  if (!lifting.layers.empty() && lifting.layers.front() != p.n)
    throw ConfigError("first lifting layer must equal the plant state dimension");
  for (Index l : lifting.layers)
    if (l < 1) throw ConfigError("layer sizes must be positive");
  if (training.epochs < 0 || training.steps_per_epoch < 0) throw ConfigError("training lengths must be nonnegative");
  if (training.lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  if (w < 1 || b < 1) throw ConfigError("w and b must be >= 1");
  if (b > w) throw ConfigError("b must not exceed w");
  if (epsilon < 0.0) throw ConfigError("epsilon must be nonnegative");
  if (mode == "predict") {
    if (t_start < w) throw ConfigError("t_start must be >= w");
    if (plant.steps <= t_start) throw ConfigError("steps must exceed t_start");
  } else {
    const Index r = lifting.lifted_dim(p.n);
    if (p.m < 1) throw ConfigError("control needs a plant with inputs");
    if (control.H < 1) throw ConfigError("horizon must be >= 1");
    if (control.ident_steps < w + 1) throw ConfigError("ident_steps must be >= w + 1");
    if (static_cast<Index>(control.q_diag.size()) > r) throw ConfigError("q_diag longer than the lifted state");
    if (static_cast<Index>(control.r_diag.size()) != p.m) throw ConfigError("r_diag must have m entries");
    for (double q : control.q_diag)
      if (q < 0.0) throw ConfigError("q_diag must be nonnegative");
    for (double q : control.r_diag)
      if (q <= 0.0) throw ConfigError("r_diag must be positive");
    if (!control.u_min.empty() && static_cast<Index>(control.u_min.size()) != p.m) throw ConfigError("u_min size");
    if (!control.u_max.empty() && static_cast<Index>(control.u_max.size()) != p.m) throw ConfigError("u_max size");
    if (!control.u_nominal.empty() && static_cast<Index>(control.u_nominal.size()) != p.m)
      throw ConfigError("u_nominal size");
    if (control.sdp_every < 1 || control.max_reuse < 0) throw ConfigError("bad certificate schedule");
    if (control.reference != "sine" && control.reference != "zero") throw ConfigError("reference must be sine or zero");
    if (control.ref_output < 1 || control.ref_output > p.n) throw ConfigError("ref_output out of range");
    if (control.ref_target != "trajectory" && control.ref_target != "steady")
      throw ConfigError("ref_target must be trajectory or steady");
    if (control.ref_period <= 0.0) throw ConfigError("ref_period must be positive");
    if (control.steps <= control.metric_skip) throw ConfigError("metric_skip must be below steps");
  }
}

PlantSpec make_plant(const PlantConfig& c, std::shared_ptr<GrnDiagnostics> diag) {
  PlantSpec p;
  if (c.name == "ntvs") {
    p = ntvs_plant(param(c, "gamma", 6.0), c.dt, c.substeps);
  } else if (c.name == "duffing") {
    p = duffing_plant(param(c, "alpha", 1.0), param(c, "delta", 0.2), param(c, "beta", 0.5), param(c, "gamma", 0.3),
                      param(c, "omega", 1.3), c.dt, c.substeps);
  } else if (c.name == "grn") {
    GrnParams g;
    g.K = param(c, "K", g.K);
    g.a = param(c, "a", g.a);
    g.gamma = param(c, "gamma", g.gamma);
    g.beta = param(c, "beta", g.beta);
    g.c = param(c, "c", g.c);
    g.omega = param(c, "omega", g.omega);
    g.guard = param(c, "guard", g.guard);
    g.u_max = param(c, "u_max", g.u_max);
    g.dt = c.dt;
    p = grn_plant(g, std::move(diag));
  } else if (c.name == "ltv") {
    p = motivating_ltv_plant(c.dt);
    p.substeps = c.substeps;
  } else {
    throw ConfigError("unknown plant '" + c.name + "'");
  }
  p.validate();
  return p;
}

TrainResult run_training(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& dir) {
  const PredictionSetup s = prediction_setup(cfg, Method::Otvdkl, seed);
  const TrajectoryBuffer buf = prediction_buffer(s, cfg.b);
  TrainResult tr = train_initial(buf, cfg.lifting, cfg.training, derive_seed(seed, 0));
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    save_model_dir(dir, tr.model);
  }
  return tr;
}

RunMetrics run_prediction(const ExperimentConfig& cfg, Method method, std::uint64_t seed, const std::string& dir) {
  RunMetrics m;
  m.method = method_name(method);
  m.seed = seed;
  const PredictionSetup s = prediction_setup(cfg, method, seed);
  TrajectoryBuffer buf = prediction_buffer(s, cfg.b);
  TrainResult tr = train_initial(buf, cfg.lifting, cfg.training, derive_seed(seed, 0));
  m.final_train_loss = tr.loss_history.empty() ? 0.0 : tr.loss_history.back();
  OnlineLearner learner(std::move(tr.model), std::move(buf), online_config(cfg, method, s.w_init));
  const OnlineRun run = run_online_learning(learner, s.Xobs, s.truth.U, s.k0);

  Mat truth(s.plant.n, static_cast<Index>(run.predictions.size()));
  Mat pred(truth.rows(), truth.cols());
  for (Index j = 0; j < truth.cols(); ++j) {
    const auto& row = run.predictions[static_cast<std::size_t>(j)];
    truth.col(j) = s.truth.X.col(row.k);
    pred.col(j) = row.x_pred;
  }
  const Vec e = error_series(truth, pred);
  m.errors.assign(e.data(), e.data() + e.size());
  m.mae = metric_mae(truth, pred);
  m.rmse = metric_rmse(truth, pred);
  count_updates(run.updates, m);
  m.learning_wall_s = learner.learning_wall_us() * 1e-6;
  m.online_wall_s = run.online_wall_us * 1e-6;
  m.max_retained = run.max_retained;

  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    write_update_log_csv((d / "updates.csv").string(), run.updates);
    write_prediction_log_csv((d / "trajectory.csv").string(), run.predictions);
    save_model_dir(dir, *run.model);
    write_metrics_csv((d / "metrics.csv").string(), m);
    write_timing_csv((d / "timing.csv").string(), m);
  }
  return m;
}

RunMetrics run_control(const ExperimentConfig& cfg, Method method, std::uint64_t seed, const std::string& dir) {
  RunMetrics m;
  m.method = method_name(method);
  m.seed = seed;
  const ControlSection& cs = cfg.control;
  const PlantSpec plant = make_plant(cfg.plant);
  const Index n = plant.n, nu = plant.m;
  const Vec x0 = initial_state(cfg, plant, seed);

  // Open-loop identification phase.
  const Mat U_id = random_inputs(plant, cs.ident_steps, derive_seed(seed, 1));
  const Trajectory id = simulate(plant, x0, U_id);
  const Mat X_id = cfg.plant.noise_std > 0.0 ? add_measurement_noise(id.X, cfg.plant.noise_std, derive_seed(seed, 2))
                                             : id.X;
  const std::int64_t k0 = cs.ident_steps;
  TrajectoryBuffer buf(n, nu, cfg.w, cfg.b);
  for (std::int64_t k = k0 - cfg.w - 1; k < k0; ++k) buf.push(Snapshot{k, X_id.col(k), U_id.col(k)});
  TrainResult tr = train_initial(buf, cfg.lifting, cfg.training, derive_seed(seed, 0));
  m.final_train_loss = tr.loss_history.empty() ? 0.0 : tr.loss_history.back();
  const Index r = tr.model.r();
  OnlineLearner learner(std::move(tr.model), std::move(buf), online_config(cfg, method, cfg.w));

  ControlLoopConfig lc;
  lc.mpc.H = cs.H;
  lc.mpc.Q = Mat::Zero(r, r);
  for (std::size_t i = 0; i < cs.q_diag.size(); ++i) lc.mpc.Q(static_cast<Index>(i), static_cast<Index>(i)) = cs.q_diag[i];
  lc.mpc.R = to_vec(cs.r_diag).asDiagonal();
  lc.mpc.u_min = cs.u_min.empty() ? plant.u_lo : to_vec(cs.u_min);
  lc.mpc.u_max = cs.u_max.empty() ? plant.u_hi : to_vec(cs.u_max);
  lc.steps = cs.steps;
  lc.sdp_every = cs.sdp_every;
  lc.max_reuse = cs.max_reuse;
  lc.dither = cs.dither;
  lc.seed = derive_seed(seed, 4);
  lc.dump_certificates = cs.dump_certificates;

  const Index out = cs.ref_output - 1;
  auto y_ref = [cs, k0](std::int64_t k) {
    return cs.ref_offset + cs.ref_amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(k - k0) / cs.ref_period);
  };
  const Vec u_nom = to_vec(cs.u_nominal);
  ReferenceProvider ref = regulation_reference();
  if (cs.reference == "sine")
    ref = cs.ref_target == "steady" ? output_reference(y_ref, out, lc.mpc.lower(), lc.mpc.u_max, u_nom)
                                    : trajectory_reference(y_ref, out, lc.mpc.lower(), lc.mpc.u_max, u_nom);
  const auto t_loop = std::chrono::steady_clock::now();
  const ControlRun run = run_control_loop(plant, learner, id.X.col(k0), k0, lc, ref);
  m.online_wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_loop).count();

  std::vector<double> err;
  m.min_lmi_residual = std::numeric_limits<double>::infinity();
  for (const auto& row : run.rows) {
    m.min_lmi_residual = std::min(m.min_lmi_residual, row.lmi_residual);
    if (row.cert_reused) ++m.cert_reused;
    if (row.k < k0 + cs.metric_skip) continue;
    const double target = cs.reference == "sine" ? y_ref(row.k) : 0.0;
    err.push_back(row.x(out) - target);
  }
  if (!err.empty()) {
    const Vec e = to_vec(err);
    m.errors = err;
    m.track_mae = e.cwiseAbs().mean();
    m.track_rmse = std::sqrt(e.squaredNorm() / static_cast<double>(e.size()));
  }
  m.mae = m.track_mae;
  m.rmse = m.track_rmse;
  count_updates(run.updates, m);
  m.learning_wall_s = learner.learning_wall_us() * 1e-6;
  m.max_retained = run.max_retained;
  m.sdp_failures = run.sdp_failures;
  m.aborted = run.aborted;
  if (run.aborted) {
    m.ok = false;
    m.error = run.abort_reason;
  }

  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    write_update_log_csv((d / "updates.csv").string(), run.updates);
    write_control_log_csv((d / "trajectory.csv").string(), run.rows);
    if (cs.dump_certificates) write_certificates_json((d / "certificates.json").string(), run.certificates);
    save_model_dir(dir, *learner.model());
    write_metrics_csv((d / "metrics.csv").string(), m);
    write_timing_csv((d / "timing.csv").string(), m);
  }
  return m;
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentSummary s;
  for (const auto& name : cfg.methods) {
    const Method method = parse_method(name);
    MethodSummary ms;
    ms.method = method_name(method);
    std::vector<double> mae, rmse, track, wall;
    for (int rep = 0; rep < cfg.repeats; ++rep) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(rep);
      const std::string dir =
          (std::filesystem::path(cfg.out) / ms.method / std::to_string(seed)).string();
      RunMetrics m;
      try {
        m = cfg.mode == "control" ? run_control(cfg, method, seed, dir) : run_prediction(cfg, method, seed, dir);
      } catch (const std::exception& e) {
        m = RunMetrics{};
        m.method = ms.method;
        m.seed = seed;
        m.ok = false;
        m.error = e.what();
        std::filesystem::create_directories(dir);
        write_metrics_csv((std::filesystem::path(dir) / "metrics.csv").string(), m);
      }
      if (m.ok) {
        mae.push_back(m.mae);
        rmse.push_back(m.rmse);
        track.push_back(m.track_rmse);
        wall.push_back(m.online_wall_s);
      } else {
        ++ms.failures;
      }
      s.runs.push_back(std::move(m));
    }
    if (!mae.empty()) {
      ms.mae = aggregate(mae);
      ms.rmse = aggregate(rmse);
      ms.track_rmse = aggregate(track);
      ms.online_wall_s = aggregate(wall);
    }
    s.methods.push_back(ms);
  }
  std::filesystem::create_directories(cfg.out);
  write_summary_csv((std::filesystem::path(cfg.out) / "summary.csv").string(), s);
  write_timing_summary_csv((std::filesystem::path(cfg.out) / "timing.csv").string(), s);
  return s;
}

void write_metrics_csv(const std::string& path, const RunMetrics& m) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << "method,seed,ok,mae,rmse,accepted,rejected,infeasible,max_retained,final_train_loss,track_mae,track_rmse,"
       "cert_reused,sdp_failures,min_lmi_residual,error\n"
    << std::setprecision(std::numeric_limits<double>::max_digits10);
  f << m.method << ',' << m.seed << ',' << (m.ok ? 1 : 0) << ',' << m.mae << ',' << m.rmse << ',' << m.accepted << ','
    << m.rejected << ',' << m.infeasible << ',' << m.max_retained << ',' << m.final_train_loss << ',' << m.track_mae
    << ',' << m.track_rmse << ',' << m.cert_reused << ',' << m.sdp_failures << ',' << m.min_lmi_residual << ",\""
    << m.error << "\"\n";
}

void write_timing_csv(const std::string& path, const RunMetrics& m) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << "method,seed,learning_wall_s,online_wall_s\n" << std::setprecision(9);
  f << m.method << ',' << m.seed << ',' << m.learning_wall_s << ',' << m.online_wall_s << '\n';
}

void write_summary_csv(const std::string& path, const ExperimentSummary& s) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << "method,seed,ok,mae,rmse,track_rmse,accepted,rejected\n"
    << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& m : s.runs)
    f << m.method << ',' << m.seed << ',' << (m.ok ? 1 : 0) << ',' << m.mae << ',' << m.rmse << ',' << m.track_rmse
      << ',' << m.accepted << ',' << m.rejected << '\n';
  f << "\nmethod,statistic,mae,rmse,track_rmse,count,failures,single_run\n";
  for (const auto& ms : s.methods) {
    const auto row = [&](const char* stat, auto get) {
      f << ms.method << ',' << stat << ',' << get(ms.mae) << ',' << get(ms.rmse) << ',' << get(ms.track_rmse) << ','
        << ms.mae.count << ',' << ms.failures << ',' << (ms.mae.single ? 1 : 0) << '\n';
    };
    row("mean", [](const Aggregate& a) { return a.mean; });
    row("std", [](const Aggregate& a) { return a.std; });
    row("median", [](const Aggregate& a) { return a.median; });
  }
}

void write_timing_summary_csv(const std::string& path, const ExperimentSummary& s) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << "method,seed,learning_wall_s,online_wall_s\n" << std::setprecision(9);
  for (const auto& m : s.runs) f << m.method << ',' << m.seed << ',' << m.learning_wall_s << ',' << m.online_wall_s << '\n';
}

}  // namespace tvk
