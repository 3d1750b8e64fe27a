#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tvk/koopman.hpp"
#include "tvk/online.hpp"
#include "tvk/plants.hpp"
#include "tvk/sdp.hpp"
#include "tvk/types.hpp"

namespace tvk {

struct MpcConfig {
  Index H = 10;
  Mat Q;      // r x r PSD, acts on the lifted state
  Mat R;      // m x m PD
  Vec u_max;  // upper input bound
  Vec u_min;  // lower input bound; empty means -u_max

  Vec lower() const { return u_min.size() ? u_min : Vec(-u_max); }
  // Largest symmetric bound inside [u_min, u_max].
  Vec symmetric_bound() const { return u_max.cwiseMin(-lower()); }
  void validate(Index r, Index m) const;
};

struct TerminalCertificate {
  Mat P_c;  // r x r symmetric PD
  Mat K;    // m x r
  double gamma = 0.0;
};

struct SdpBuildOptions {
  // Solve for g / |g| with bounds rescaled by 1 / |g|^2; the certificate is invariant under this.
  bool normalize = true;
  // Upper clamp on the rescaled input bounds (tightens, never relaxes).
  double bound_cap = 1e6;
  // Every block is required to be >= margin * I.
  double margin = 0.0;
};

// Terminal-cost LMI problem in the variables (gamma, Pbar, Y):
//   [Pbar, (A Pbar + B Y)^T, Pbar Q^1/2, Y^T R^1/2; ..., Pbar, 0, 0; ..., gamma I, 0; ..., gamma I] >= 0
//   [1, g^T; g, Pbar] >= 0
//   [diag(u_bound^2), Y; Y^T, Pbar] >= 0
// minimize gamma. The certificate is P_c = gamma Pbar^-1, K = Y Pbar^-1.
struct SdpProblem {
  static constexpr const char* substitution = "P_c = gamma * inv(Pbar), K = Y * inv(Pbar)";

  LmiProblem lmi;
  Mat A, B;
  Vec g;        // certified lifted state (unscaled)
  Vec u_bound;  // symmetric input bound used in the third block
  Index r = 0, m = 0;
  double scale = 1.0;   // |g| when normalized, otherwise 1
  bool origin = false;  // g == 0: certified for a unit-norm stand-in direction
  int gamma_var = 0;
  Eigen::MatrixXi pbar_var;  // r x r, symmetric index map
  Eigen::MatrixXi y_var;     // m x r

  Vec pack(double gamma, const Mat& Pbar, const Mat& Y) const;
  // Value of LMI block b (0, 1, 2) in the solver's (possibly rescaled) coordinates.
  Mat block(int b, double gamma, const Mat& Pbar, const Mat& Y) const;
};

SdpProblem build_sdp(const Mat& A, const Mat& B, const MpcConfig& cfg, const Vec& g, const Vec& u_bound,
                     const SdpBuildOptions& opt = SdpBuildOptions{});
SdpProblem build_sdp(const LiftedModel& model, const MpcConfig& cfg, const Vec& g,
                     const SdpBuildOptions& opt = SdpBuildOptions{});

struct SdpResult {
  SdpStatus status = SdpStatus::NumericalFailure;
  TerminalCertificate cert;
  SdpSolution raw;
  bool ok() const { return status == SdpStatus::Optimal; }
};

SdpResult solve_sdp(const SdpProblem& p, const SdpOptions& opt = SdpOptions{});

struct CertificateCheck {
  bool ok = false;
  bool positive_definite = false;
  double lyapunov_residual = 0.0;  // min eig of P_c - (A+BK)^T P_c (A+BK) - Q - K^T R K
  double level_margin = 0.0;       // gamma (1 + tol) - g^T P_c g
  double input_margin = 0.0;       // min_j u_bound_j - max over the ellipsoid of |K_j g|
  double sampled_input_margin = 0.0;  // same, over sampled boundary points
};

CertificateCheck verify_certificate(const TerminalCertificate& cert, const Mat& A, const Mat& B, const MpcConfig& cfg,
                                    const Vec& g, const Vec& u_bound, double tol = 1e-6, int samples = 64);
CertificateCheck verify_certificate(const TerminalCertificate& cert, const LiftedModel& model, const MpcConfig& cfg,
                                    const Vec& g, double tol = 1e-6);

// Per-step targets over the horizon; empty matrices mean the origin.
struct MpcReference {
  Mat g_ref;  // r x (H+1)
  Mat u_ref;  // m x H
};

// 0.5 U^T Hs U + f^T U + c over the stacked inputs U = [u_0; ...; u_{H-1}].
struct CondensedQp {
  Mat Hs;
  Vec f;
  double c = 0.0;
};

CondensedQp condense_mpc(const Mat& A, const Mat& B, const Vec& g, const Mat& P_c, const MpcConfig& cfg,
                         const MpcReference* ref = nullptr);

struct MpcSolution {
  Vec u0;
  Mat U;  // m x H
  double V = 0.0;
  Vec multipliers;
  double pg_norm = 0.0;
  double pg_rel = 0.0;
  int iterations = 0;
  bool converged = false;
};

MpcSolution solve_mpc(const Mat& A, const Mat& B, const Vec& g, const TerminalCertificate& cert, const MpcConfig& cfg,
                      const MpcReference* ref = nullptr, const Mat* warm = nullptr);
MpcSolution solve_mpc(const LiftedModel& model, const Vec& g, const TerminalCertificate& cert, const MpcConfig& cfg,
                      const MpcReference* ref = nullptr, const Mat* warm = nullptr);

// Target sequence for the horizon starting at time k.
using ReferenceProvider = std::function<MpcReference(std::int64_t k, const LiftedModel& model, Index H)>;

ReferenceProvider regulation_reference();
// Lifted error state g(x) - g(x_ref_k) with zero input target.
ReferenceProvider state_reference(std::function<Vec(std::int64_t)> x_ref);
// Model-consistent steady state (g_s, u_s) whose decoded output `output` equals y_ref(k),
// with u_s inside [lo, hi] and closest to u_nom (zero when empty).
ReferenceProvider output_reference(std::function<double(std::int64_t)> y_ref, Index output, const Vec& lo,
                                   const Vec& hi, const Vec& u_nom = Vec());

// Model-consistent trajectory over the horizon: g_{j+1} = A g_j + B u_j with the decoded output
// following y_ref(k + j), inputs inside [lo, hi] and close to u_nom. Unlike the per-step steady
// states, upstream states lead the output as the dynamics require. The trajectory is anchored at
// the steady state `lookback` steps before k.
ReferenceProvider trajectory_reference(std::function<double(std::int64_t)> y_ref, Index output, const Vec& lo,
                                       const Vec& hi, const Vec& u_nom = Vec(), Index lookback = 48);

struct SteadyState {
  Vec g;
  Vec u;
  double residual = 0.0;  // |(I - A) g - B u| + |c g - y|
};
SteadyState steady_state_target(const LiftedModel& model, Index output, double y, const Vec& lo, const Vec& hi,
                                const Vec& u_nom = Vec());

struct ControlLoopConfig {
  MpcConfig mpc;
  std::int64_t steps = 100;
  int sdp_every = 1;
  int max_reuse = 50;          // consecutive failed SDP solves tolerated
  double bound_floor = 1e-3;   // lower clamp of the certificate input bound around u_ref
  double dither = 0.0;         // uniform exploration amplitude added to the applied input
  std::uint64_t seed = 0;
  bool dump_certificates = false;
  SdpOptions sdp;
  SdpBuildOptions sdp_build;
};

struct ControlRow {
  std::int64_t k = 0;
  Vec x;
  Vec u;
  double V = 0.0;
  double lmi_residual = 0.0;
  double level_margin = 0.0;
  bool cert_reused = false;
  bool cert_valid = false;
  std::string sdp;  // outcome of a solve this step: empty, a status name, or "unverified"
};

struct CertificateDump {
  std::int64_t k = 0;
  TerminalCertificate cert;
};

struct ControlRun {
  std::vector<ControlRow> rows;
  std::vector<UpdateRecord> updates;
  std::vector<CertificateDump> certificates;
  Vec x_final;
  int sdp_solves = 0;
  int sdp_failures = 0;
  int max_consecutive_reuse = 0;
  std::size_t max_retained = 0;
  bool aborted = false;
  std::string abort_reason;
};

// Closed loop: at each step the state is pushed to the learner (which runs the learning
// branch when a batch completes), the terminal certificate is refreshed, the MPC input is
// applied to the plant and the learner's snapshot is completed with it. The learner's
// buffer must end at k0 - 1 (or be empty when k0 == 0).
ControlRun run_control_loop(const PlantSpec& plant, OnlineLearner& learner, const Vec& x0, std::int64_t k0,
                            const ControlLoopConfig& cfg, const ReferenceProvider& reference);

void write_control_log_csv(const std::string& path, const std::vector<ControlRow>& rows);
void write_certificates_json(const std::string& path, const std::vector<CertificateDump>& certs);

}  // namespace tvk
