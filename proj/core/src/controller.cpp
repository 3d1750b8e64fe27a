#include "tvk/controller.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "tvk/errors.hpp"
#include "tvk/linalg.hpp"
#include "tvk/qp.hpp"

namespace tvk {

void MpcConfig::validate(Index r, Index m) const {
  if (H < 1) throw ConfigError("MPC horizon must be >= 1");
  if (Q.rows() != r || Q.cols() != r) throw DimensionError("Q must be r x r");
  if (R.rows() != m || R.cols() != m) throw DimensionError("R must be m x m");
  if (u_max.size() != m) throw DimensionError("u_max must have m entries");
  if (u_min.size() != 0 && u_min.size() != m) throw DimensionError("u_min must have m entries");
  if ((lower().array() >= u_max.array()).any()) throw ConfigError("input box is empty");
  if (!Q.isApprox(Q.transpose(), 1e-12) || min_eigenvalue(symmetrize(Q)) < -1e-12 * (1.0 + Q.norm()))
    throw ConfigError("Q must be symmetric positive semidefinite");
  if (!R.isApprox(R.transpose(), 1e-12) || min_eigenvalue(symmetrize(R)) <= 0.0)
    throw ConfigError("R must be symmetric positive definite");
}

Vec SdpProblem::pack(double gamma, const Mat& Pbar, const Mat& Y) const {
  Vec y = Vec::Zero(lmi.num_vars());
  y(gamma_var) = gamma;
  for (Index p = 0; p < r; ++p)
    for (Index q = p; q < r; ++q) y(pbar_var(p, q)) = 0.5 * (Pbar(p, q) + Pbar(q, p));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < r; ++j) y(y_var(i, j)) = Y(i, j);
  return y;
}

Mat SdpProblem::block(int b, double gamma, const Mat& Pbar, const Mat& Y) const {
  return lmi.evaluate(pack(gamma, Pbar, Y), b);
}

SdpProblem build_sdp(const Mat& A, const Mat& B, const MpcConfig& cfg, const Vec& g, const Vec& u_bound,
                     const SdpBuildOptions& opt) {
  const Index r = A.rows(), m = B.cols();
  if (A.cols() != r || B.rows() != r) throw DimensionError("A, B shape mismatch");
  if (g.size() != r) throw DimensionError("lifted state length mismatch");
  if (u_bound.size() != m || (u_bound.array() <= 0.0).any()) throw ConfigError("input bound must be positive");
  cfg.validate(r, m);
  const Mat Qh = psd_sqrt(symmetrize(cfg.Q));
  const Mat Rh = psd_sqrt(symmetrize(cfg.R));

  SdpProblem sp;
  sp.A = A;
  sp.B = B;
  sp.g = g;
  sp.u_bound = u_bound;
  sp.r = r;
  sp.m = m;

  const double gn = g.norm();
  Vec gs = g;
  Vec ubar = u_bound.array().square();
  if (opt.normalize) {
    if (gn == 0.0) {
      sp.origin = true;
      gs = Vec::Unit(r, 0);
    } else {
      sp.scale = gn;
      gs = g / gn;
      ubar = (ubar / (gn * gn)).cwiseMin(opt.bound_cap);
    }
  } else {
    sp.origin = gn == 0.0;
  }

  LmiProblem& L = sp.lmi;
  const Index n1 = 3 * r + m;
  const int b1 = L.add_block(-opt.margin * Mat::Identity(n1, n1));
  Mat F2 = Mat::Zero(r + 1, r + 1);
  F2(0, 0) = 1.0;
  F2.block(1, 0, r, 1) = gs;
  F2.block(0, 1, 1, r) = gs.transpose();
  const int b2 = L.add_block(F2 - opt.margin * Mat::Identity(r + 1, r + 1));
  Mat F3 = Mat::Zero(m + r, m + r);
  F3.topLeftCorner(m, m) = ubar.asDiagonal();
  const int b3 = L.add_block(F3 - opt.margin * Mat::Identity(m + r, m + r));

  std::vector<int> e1(r), e2(r), e3(r), e4(m), av(r), bv(m), f2(r), h3(m), k3(r);
  for (Index p = 0; p < r; ++p) {
    e1[p] = L.add_unit(b1, p);
    e2[p] = L.add_unit(b1, r + p);
    e3[p] = L.add_unit(b1, 2 * r + p);
    Vec a = Vec::Zero(n1);
    a.segment(r, r) = A.col(p);
    a.segment(2 * r, r) = Qh.col(p);
    av[p] = L.add_vector(b1, a);
    f2[p] = L.add_unit(b2, 1 + p);
    k3[p] = L.add_unit(b3, m + p);
  }
  for (Index i = 0; i < m; ++i) {
    e4[i] = L.add_unit(b1, 3 * r + i);
    Vec v = Vec::Zero(n1);
    v.segment(r, r) = B.col(i);
    v.segment(3 * r, m) = Rh.col(i);
    bv[i] = L.add_vector(b1, v);
    h3[i] = L.add_unit(b3, i);
  }

  sp.gamma_var = L.add_var(1.0);
  for (Index k = 0; k < r; ++k) L.add_term(sp.gamma_var, b1, e3[k], e3[k], 0.5);
  for (Index i = 0; i < m; ++i) L.add_term(sp.gamma_var, b1, e4[i], e4[i], 0.5);

  sp.pbar_var = Eigen::MatrixXi::Constant(r, r, -1);
  for (Index p = 0; p < r; ++p)
    for (Index q = p; q < r; ++q) {
      const int v = L.add_var(0.0);
      sp.pbar_var(p, q) = sp.pbar_var(q, p) = v;
      if (p == q) {
        L.add_term(v, b1, e1[p], e1[p], 0.5);
        L.add_term(v, b1, e2[p], e2[p], 0.5);
        L.add_term(v, b1, av[p], e1[p], 1.0);
        L.add_term(v, b2, f2[p], f2[p], 0.5);
        L.add_term(v, b3, k3[p], k3[p], 0.5);
      } else {
        L.add_term(v, b1, e1[p], e1[q], 1.0);
        L.add_term(v, b1, e2[p], e2[q], 1.0);
        L.add_term(v, b1, av[p], e1[q], 1.0);
        L.add_term(v, b1, av[q], e1[p], 1.0);
        L.add_term(v, b2, f2[p], f2[q], 1.0);
        L.add_term(v, b3, k3[p], k3[q], 1.0);
      }
    }

  sp.y_var = Eigen::MatrixXi::Constant(m, r, -1);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < r; ++j) {
      const int v = L.add_var(0.0);
      sp.y_var(i, j) = v;
      L.add_term(v, b1, bv[i], e1[j], 1.0);
      L.add_term(v, b3, h3[i], k3[j], 1.0);
    }
  L.validate();
  return sp;
}

SdpProblem build_sdp(const LiftedModel& model, const MpcConfig& cfg, const Vec& g, const SdpBuildOptions& opt) {
  return build_sdp(model.A, model.B, cfg, g, cfg.symmetric_bound(), opt);
}

SdpResult solve_sdp(const SdpProblem& p, const SdpOptions& opt) {
  SdpResult res;
  res.raw = solve_lmi(p.lmi, opt);
  res.status = res.raw.status;
  if (!res.ok()) return res;
  const Vec& y = res.raw.y;
  Mat Pbar(p.r, p.r), Y(p.m, p.r);
  for (Index a = 0; a < p.r; ++a)
    for (Index b = 0; b < p.r; ++b) Pbar(a, b) = y(p.pbar_var(a, b));
  for (Index i = 0; i < p.m; ++i)
    for (Index j = 0; j < p.r; ++j) Y(i, j) = y(p.y_var(i, j));
  Eigen::LLT<Mat> llt(Pbar);
  const double gamma_n = y(p.gamma_var);
  if (llt.info() != Eigen::Success || !(gamma_n > 0.0)) {
    res.status = SdpStatus::NumericalFailure;
    return res;
  }
  const Mat Pinv = llt.solve(Mat::Identity(p.r, p.r));
  res.cert.P_c = symmetrize(gamma_n * Pinv);
  res.cert.K = Y * Pinv;
  res.cert.gamma = p.scale * p.scale * gamma_n;
  return res;
}

CertificateCheck verify_certificate(const TerminalCertificate& cert, const Mat& A, const Mat& B, const MpcConfig& cfg,
                                    const Vec& g, const Vec& u_bound, double tol, int samples) {
  CertificateCheck c;
  const Index r = A.rows(), m = B.cols();
  if (cert.P_c.rows() != r || cert.P_c.cols() != r || cert.K.rows() != m || cert.K.cols() != r)
    throw DimensionError("certificate shape mismatch");
  const Mat P = symmetrize(cert.P_c);
  Eigen::LLT<Mat> llt(P);
  c.positive_definite = llt.info() == Eigen::Success && cert.gamma >= 0.0;
  const Mat Acl = A + B * cert.K;
  c.lyapunov_residual =
      min_eigenvalue(symmetrize(P - Acl.transpose() * P * Acl - cfg.Q - cert.K.transpose() * cfg.R * cert.K));
  c.level_margin = cert.gamma * (1.0 + tol) - g.dot(P * g);
  if (!c.positive_definite) {
    c.input_margin = c.sampled_input_margin = -std::numeric_limits<double>::infinity();
    return c;
  }

  // max over {z: z^T P z <= gamma} of |K_j z| is sqrt(gamma K_j P^-1 K_j^T).
  const Mat KPinv = llt.solve(cert.K.transpose());  // r x m
  c.input_margin = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < m; ++j) {
    const double peak = std::sqrt(std::max(cert.gamma * cert.K.row(j).dot(KPinv.col(j)), 0.0));
    c.input_margin = std::min(c.input_margin, u_bound(j) * (1.0 + tol) - peak);
  }

  // Boundary points z = sqrt(gamma) L^-T d with |d| = 1, P = L L^T.
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const auto Lt = llt.matrixU();
  c.sampled_input_margin = std::numeric_limits<double>::infinity();
  auto probe = [&](Vec d) {
    const double dn = d.norm();
    if (dn == 0.0) return;
    d /= dn;
    const Vec z = std::sqrt(cert.gamma) * Lt.solve(d);
    const Vec u = cert.K * z;
    for (Index j = 0; j < m; ++j)
      c.sampled_input_margin = std::min(c.sampled_input_margin, u_bound(j) * (1.0 + tol) - std::abs(u(j)));
  };
  for (Index j = 0; j < m; ++j) probe(llt.matrixL().solve(Vec(cert.K.row(j).transpose())));
  for (int s = 0; s < samples; ++s) {
    Vec d(r);
    for (Index i = 0; i < r; ++i) d(i) = nd(rng);
    probe(d);
  }
  c.ok = c.positive_definite && c.lyapunov_residual >= -tol && c.level_margin >= 0.0 && c.input_margin >= 0.0 &&
         c.sampled_input_margin >= 0.0;
  return c;
}

CertificateCheck verify_certificate(const TerminalCertificate& cert, const LiftedModel& model, const MpcConfig& cfg,
                                    const Vec& g, double tol) {
  return verify_certificate(cert, model.A, model.B, cfg, g, cfg.symmetric_bound(), tol);
}

CondensedQp condense_mpc(const Mat& A, const Mat& B, const Vec& g, const Mat& P_c, const MpcConfig& cfg,
                         const MpcReference* ref) {
  const Index r = A.rows(), m = B.cols(), H = cfg.H;
  cfg.validate(r, m);
  if (P_c.rows() != r || P_c.cols() != r) throw DimensionError("terminal weight shape mismatch");
  const bool has_g = ref && ref->g_ref.size() > 0;
  const bool has_u = ref && ref->u_ref.size() > 0;
  if (has_g && (ref->g_ref.rows() != r || ref->g_ref.cols() < H + 1)) throw DimensionError("g_ref must be r x (H+1)");
  if (has_u && (ref->u_ref.rows() != m || ref->u_ref.cols() < H)) throw DimensionError("u_ref must be m x H");

  CondensedQp qp;
  qp.Hs = Mat::Zero(m * H, m * H);
  qp.f = Vec::Zero(m * H);
  Vec s = g;
  Vec e = has_g ? Vec(s - ref->g_ref.col(0)) : s;
  qp.c = e.dot(cfg.Q * e);
  Mat Gam = Mat::Zero(r, m * H);
  for (Index j = 1; j <= H; ++j) {
    Gam = A * Gam;
    Gam.block(0, (j - 1) * m, r, m) += B;
    s = A * s;
    e = has_g ? Vec(s - ref->g_ref.col(j)) : s;
    const Mat& W = j < H ? cfg.Q : P_c;
    const Mat WG = W * Gam;
    qp.Hs.noalias() += 2.0 * Gam.transpose() * WG;
    qp.f.noalias() += 2.0 * WG.transpose() * e;
    qp.c += e.dot(W * e);
  }
  for (Index j = 0; j < H; ++j) {
    qp.Hs.block(j * m, j * m, m, m) += 2.0 * cfg.R;
    if (has_u) {
      const Vec v = ref->u_ref.col(j);
      qp.f.segment(j * m, m) -= 2.0 * cfg.R * v;
      qp.c += v.dot(cfg.R * v);
    }
  }
  qp.Hs = symmetrize(qp.Hs);
  return qp;
}

MpcSolution solve_mpc(const Mat& A, const Mat& B, const Vec& g, const TerminalCertificate& cert, const MpcConfig& cfg,
                      const MpcReference* ref, const Mat* warm) {
  const Index m = B.cols(), H = cfg.H;
  const CondensedQp qp = condense_mpc(A, B, g, cert.P_c, cfg, ref);
  const Vec lo1 = cfg.lower();
  Vec lo(m * H), hi(m * H);
  for (Index j = 0; j < H; ++j) {
    lo.segment(j * m, m) = lo1;
    hi.segment(j * m, m) = cfg.u_max;
  }
  Vec x0;
  const Vec* px0 = nullptr;
  if (warm && warm->rows() == m && warm->cols() == H) {
    x0 = warm->reshaped();
    px0 = &x0;
  }
  const BoxQpResult q = solve_box_qp(qp.Hs, qp.f, lo, hi, px0);
  MpcSolution sol;
  sol.U = q.x.reshaped(m, H);
  sol.u0 = sol.U.col(0);
  sol.V = std::max(q.objective + qp.c, 0.0);
  sol.multipliers = q.multipliers;
  sol.pg_norm = q.pg_norm;
  sol.pg_rel = q.pg_norm / (1.0 + qp.f.norm() + qp.Hs.norm() * q.x.norm());
  sol.iterations = q.iterations;
  sol.converged = q.converged;
  return sol;
}

MpcSolution solve_mpc(const LiftedModel& model, const Vec& g, const TerminalCertificate& cert, const MpcConfig& cfg,
                      const MpcReference* ref, const Mat* warm) {
  return solve_mpc(model.A, model.B, g, cert, cfg, ref, warm);
}

ReferenceProvider regulation_reference() {
  return [](std::int64_t, const LiftedModel&, Index) { return MpcReference{}; };
}

ReferenceProvider state_reference(std::function<Vec(std::int64_t)> x_ref) {
  return [x_ref = std::move(x_ref)](std::int64_t k, const LiftedModel& model, Index H) {
    MpcReference ref;
    ref.g_ref.resize(model.r(), H + 1);
    for (Index j = 0; j <= H; ++j) ref.g_ref.col(j) = model.obs->lift(x_ref(k + j));
    return ref;
  };
}

SteadyState steady_state_target(const LiftedModel& model, Index output, double y, const Vec& lo, const Vec& hi,
                                const Vec& u_nom) {
  const Index r = model.r(), m = model.m();
  if (output < 0 || output >= model.n()) throw DimensionError("output index out of range");
  if (lo.size() != m || hi.size() != m) throw DimensionError("input bounds must have m entries");
  if (u_nom.size() != 0 && u_nom.size() != m) throw DimensionError("nominal input must have m entries");
  // Penalized form of  min |u - u_nom|^2 + beta |g|^2  s.t.  (I - A) g = B u,  c g = y,  lo <= u <= hi.
  constexpr double rho = 1e6, alpha = 1.0, beta = 1e-4, free_box = 1e9;
  Mat M1(r, r + m);
  M1 << Mat::Identity(r, r) - model.A, -model.B;
  Vec M2 = Vec::Zero(r + m);
  M2.head(r) = model.C.row(output).transpose();
  Mat Hs = 2.0 * rho * (M1.transpose() * M1 + M2 * M2.transpose());
  Hs.diagonal().head(r).array() += 2.0 * beta;
  Hs.diagonal().tail(m).array() += 2.0 * alpha;
  Vec f = -2.0 * rho * y * M2;
  if (u_nom.size()) f.tail(m) -= 2.0 * alpha * u_nom;
  Vec zlo(r + m), zhi(r + m);
  zlo << Vec::Constant(r, -free_box), lo;
  zhi << Vec::Constant(r, free_box), hi;
  const BoxQpResult q = solve_box_qp(symmetrize(Hs), f, zlo, zhi);
  SteadyState ss;
  ss.g = q.x.head(r);
  ss.u = q.x.tail(m);
  ss.residual = (M1 * q.x).norm() + std::abs(M2.dot(q.x) - y);
  return ss;
}

ReferenceProvider output_reference(std::function<double(std::int64_t)> y_ref, Index output, const Vec& lo,
                                   const Vec& hi, const Vec& u_nom) {
  return [y_ref = std::move(y_ref), output, lo, hi, u_nom](std::int64_t k, const LiftedModel& model, Index H) {
    MpcReference ref;
    ref.g_ref.resize(model.r(), H + 1);
    ref.u_ref.resize(model.m(), H);
    for (Index j = 0; j <= H; ++j) {
      const SteadyState ss = steady_state_target(model, output, y_ref(k + j), lo, hi, u_nom);
      ref.g_ref.col(j) = ss.g;
      if (j < H) ref.u_ref.col(j) = ss.u;
    }
    return ref;
  };
}

ReferenceProvider trajectory_reference(std::function<double(std::int64_t)> y_ref, Index output, const Vec& lo,
                                       const Vec& hi, const Vec& u_nom, Index lookback) {
  if (lookback < 0) throw ConfigError("lookback must be nonnegative");
  return [y_ref = std::move(y_ref), output, lo, hi, u_nom, lookback](std::int64_t k, const LiftedModel& model, Index H) {
    const Index r = model.r(), m = model.m();
    if (u_nom.size() != 0 && u_nom.size() != m) throw DimensionError("nominal input must have m entries");
    // The trajectory starts `lookback` steps early at the steady state of that time so that the
    // part inside the horizon no longer depends on the anchor, and runs H steps past the horizon
    // so that its end does not either. Decision z = [g_{-L}; u_{-L}; ...; u_{2H-1}].
    const Index L = lookback, steps = L + 2 * H;
    const SteadyState anchor = steady_state_target(model, output, y_ref(k - L), lo, hi, u_nom);
    constexpr double rho = 1e6, alpha = 1.0, kappa = 1.0, free_box = 1e9;
    const Index nz = r + steps * m;
    const Vec c = model.C.row(output).transpose();
    Mat T = Mat::Zero(r, nz);
    T.leftCols(r).setIdentity();
    Mat Phi(steps + 1, nz);  // decoded output rows
    Vec yv(steps + 1);
    std::vector<Mat> Ts;
    for (Index j = 0; j <= steps; ++j) {
      Phi.row(j) = c.transpose() * T;
      yv(j) = y_ref(k - L + j);
      if (j >= L && j <= L + H) Ts.push_back(T);
      if (j < steps) {
        Mat Tn = model.A * T;
        Tn.middleCols(r + j * m, m) += model.B;
        T = std::move(Tn);
      }
    }
    Mat Hs = 2.0 * rho * Phi.transpose() * Phi;
    Vec f = -2.0 * rho * Phi.transpose() * yv;
    Hs.diagonal().head(r).array() += 2.0 * kappa;
    f.head(r) -= 2.0 * kappa * anchor.g;
    Hs.diagonal().tail(steps * m).array() += 2.0 * alpha;
    if (u_nom.size())
      for (Index j = 0; j < steps; ++j) f.segment(r + j * m, m) -= 2.0 * alpha * u_nom;
    Vec zlo(nz), zhi(nz);
    zlo.head(r).setConstant(-free_box);
    zhi.head(r).setConstant(free_box);
    for (Index j = 0; j < steps; ++j) {
      zlo.segment(r + j * m, m) = lo;
      zhi.segment(r + j * m, m) = hi;
    }
    // Start the active set from the clipped unconstrained minimizer.
    const Mat Hsym = symmetrize(Hs);
    const Vec z0 = Hsym.llt().solve(-f);
    const BoxQpResult q = solve_box_qp(Hsym, f, zlo, zhi, &z0);
    MpcReference ref;
    ref.g_ref.resize(r, H + 1);
    ref.u_ref.resize(m, H);
    for (Index j = 0; j <= H; ++j) ref.g_ref.col(j) = Ts[static_cast<std::size_t>(j)] * q.x;
    for (Index j = 0; j < H; ++j) ref.u_ref.col(j) = q.x.segment(r + (L + j) * m, m);
    return ref;
  };
}

ControlRun run_control_loop(const PlantSpec& plant, OnlineLearner& learner, const Vec& x0, std::int64_t k0,
                            const ControlLoopConfig& cfg, const ReferenceProvider& reference) {
  plant.validate();
  if (x0.size() != plant.n) throw DimensionError("initial state length mismatch");
  const auto last = learner.buffer().last_index();
  if (last ? *last != k0 - 1 : k0 != 0) throw SequencingError("learner buffer must end right before k0");
  if (cfg.sdp_every < 1) throw ConfigError("sdp_every must be >= 1");
  const Index m = plant.m;
  const Vec lo = cfg.mpc.lower();
  const Vec hi = cfg.mpc.u_max;
  if (lo.size() != m) throw DimensionError("input bounds must have m entries");

  ControlRun run;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  Vec x = x0;
  TerminalCertificate cert;
  bool have_cert = false;
  std::int64_t attempt_k = 0, attempt_tau = -1;  // last solve attempt, successful or not
  int consecutive_fail = 0;
  Mat warm;

  for (std::int64_t k = k0; k < k0 + cfg.steps; ++k) {
    learner.push(Snapshot{k, x, Vec::Zero(m)});
    const auto model = learner.model();
    const LiftedModel& M = *model;
    const Vec g = M.obs->lift(x);
    const MpcReference ref = reference(k, M, cfg.mpc.H);
    const Vec g_err = ref.g_ref.size() ? Vec(g - ref.g_ref.col(0)) : g;
    Vec u_center = ref.u_ref.size() ? Vec(ref.u_ref.col(0)) : Vec(Vec::Zero(m));
    u_center = u_center.cwiseMax(lo).cwiseMin(hi);
    // Larger one-sided room around u_ref; the QP enforces the actual box.
    const Vec bound = (u_center - lo).cwiseMax(hi - u_center).cwiseMax(cfg.bound_floor);

    ControlRow row;
    row.k = k;
    row.x = x;
    // Failed solves are retried on the same schedule as successful ones.
    const bool due = !have_cert || k - attempt_k >= cfg.sdp_every || M.tau != attempt_tau;
    bool fresh = false;
    if (due) {
      ++run.sdp_solves;
      attempt_k = k;
      attempt_tau = M.tau;
      SdpResult sr;
      try {
        sr = solve_sdp(build_sdp(M.A, M.B, cfg.mpc, g_err, bound, cfg.sdp_build), cfg.sdp);
      } catch (const Error&) {
        sr.status = SdpStatus::NumericalFailure;
      }
      const bool good = sr.ok() && verify_certificate(sr.cert, M.A, M.B, cfg.mpc, g_err, bound).ok;
      row.sdp = sr.ok() && !good ? "unverified" : sdp_status_name(sr.status);
      if (good) {
        cert = sr.cert;
        have_cert = true;
        fresh = true;
        consecutive_fail = 0;
      } else {
        ++run.sdp_failures;
        ++consecutive_fail;
        run.max_consecutive_reuse = std::max(run.max_consecutive_reuse, consecutive_fail);
        if (!have_cert || consecutive_fail > cfg.max_reuse) {
          run.aborted = true;
          run.abort_reason = have_cert ? "certificate reuse limit exceeded" : "no feasible terminal certificate";
          break;
        }
      }
    }
    row.cert_reused = !fresh;
    const CertificateCheck chk = verify_certificate(cert, M.A, M.B, cfg.mpc, g_err, bound);
    row.lmi_residual = chk.lyapunov_residual;
    row.level_margin = chk.level_margin;
    row.cert_valid = chk.ok;
    if (cfg.dump_certificates && fresh) run.certificates.push_back(CertificateDump{k, cert});

    Mat* pw = nullptr;
    if (warm.size()) {
      Mat shifted = warm;
      for (Index j = 0; j + 1 < warm.cols(); ++j) shifted.col(j) = warm.col(j + 1);
      warm = shifted;
      pw = &warm;
    }
    const MpcSolution sol = solve_mpc(M, g, cert, cfg.mpc, &ref, pw);
    warm = sol.U;
    Vec u = sol.u0;
    if (cfg.dither > 0.0)
      for (Index i = 0; i < m; ++i) u(i) += cfg.dither * unif(rng);
    u = u.cwiseMax(lo).cwiseMin(hi);
    row.u = u;
    row.V = sol.V;
    learner.amend_latest_input(u);
    run.rows.push_back(row);
    x = plant_step(plant, x, u, k);
  }
  run.x_final = x;
  run.updates = learner.log();
  run.max_retained = learner.max_retained();
  return run;
}

void write_control_log_csv(const std::string& path, const std::vector<ControlRow>& rows) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  const Index n = rows.empty() ? 0 : rows.front().x.size();
  const Index m = rows.empty() ? 0 : rows.front().u.size();
  f << 'k';
  for (Index i = 1; i <= n; ++i) f << ",x" << i;
  for (Index i = 1; i <= m; ++i) f << ",u" << i;
  f << ",Vstar,lmi_residual,cert_reused,level_margin,cert_valid,sdp\n"
    << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : rows) {
    f << r.k;
    for (Index i = 0; i < n; ++i) f << ',' << r.x(i);
    for (Index i = 0; i < m; ++i) f << ',' << r.u(i);
    f << ',' << r.V << ',' << r.lmi_residual << ',' << (r.cert_reused ? 1 : 0) << ',' << r.level_margin << ','
      << (r.cert_valid ? 1 : 0) << ',' << r.sdp << '\n';
  }
}

void write_certificates_json(const std::string& path, const std::vector<CertificateDump>& certs) {
  auto mat = [](const Mat& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < M.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(M.cols()));
      for (Index j = 0; j < M.cols(); ++j) row[static_cast<std::size_t>(j)] = M(i, j);
      rows.push_back(row);
    }
    return rows;
  };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : certs) out.push_back({{"k", c.k}, {"gamma", c.cert.gamma}, {"P_c", mat(c.cert.P_c)}, {"K", mat(c.cert.K)}});
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << out.dump(1) << '\n';
}

}  // namespace tvk
