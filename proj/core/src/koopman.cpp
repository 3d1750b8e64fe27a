#include "tvk/koopman.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "tvk/errors.hpp"
#include "tvk/linalg.hpp"

namespace tvk {

Mat LiftedModel::AB() const {
  Mat ab(A.rows(), A.cols() + B.cols());
  ab << A, B;
  return ab;
}

void LiftedModel::validate() const {
  const Index r = A.rows();
  if (A.cols() != r || B.rows() != r || C.cols() != r) throw DimensionError("model matrices inconsistent");
  if (P.rows() != r + B.cols() || P.cols() != P.rows()) throw DimensionError("P has wrong shape");
  if (Pbar.rows() != r || Pbar.cols() != r) throw DimensionError("Pbar has wrong shape");
  if (obs && obs->lifted_dim() != r) throw DimensionError("observable dimension does not match model");
}

Mat stack_regressors(const DataMatrices& D) {
  Mat Z(D.G.rows() + D.U.rows(), D.G.cols());
  Z.topRows(D.G.rows()) = D.G;
  Z.bottomRows(D.U.rows()) = D.U;
  return Z;
}

namespace {

// Least-squares T = argmin ||Target - T Reg||^2 + lambda ||T||^2.
Mat ridge_solve(const Mat& target, const Mat& reg, double lambda, const char* what) {
  if (lambda == 0.0) {
    const RankReport rep = check_full_row_rank(reg);
    if (!rep.full_row_rank) throw RankError(std::string(what) + " is rank deficient", rep.rank, rep.tol);
    return target * pinv_svd(reg);
  }
  if (lambda < 0.0) throw DimensionError("ridge parameter must be nonnegative");
  Mat gram = reg * reg.transpose();
  gram.diagonal().array() += lambda;
  Eigen::LLT<Mat> llt(gram);
  if (llt.info() != Eigen::Success) throw RankError(std::string(what) + " Gram is not positive definite", 0, lambda);
  return llt.solve(reg * target.transpose()).transpose();
}

Mat gram_inverse(const Mat& reg, double lambda, const char* what) {
  Mat gram = reg * reg.transpose();
  gram.diagonal().array() += lambda;
  if (lambda == 0.0) {
    const RankReport rep = check_full_row_rank(reg);
    if (!rep.full_row_rank) throw RankError(std::string(what) + " Gram is singular", rep.rank, rep.tol);
  }
  return spd_inverse(gram);
}

}  // namespace

std::pair<Mat, Mat> solve_batch(const DataMatrices& D, double lambda) {
  if (D.H.cols() != D.G.cols() || D.U.cols() != D.G.cols() || D.H.rows() != D.G.rows())
    throw DimensionError("data matrices inconsistent");
  const Mat AB = ridge_solve(D.H, stack_regressors(D), lambda, "[G;U]");
  const Index r = D.G.rows();
  return {AB.leftCols(r), AB.rightCols(D.U.rows())};
}

Mat solve_decoder(const DataMatrices& D, double lambda) {
  if (D.Y.cols() != D.H.cols()) throw DimensionError("data matrices inconsistent");
  return ridge_solve(D.Y, D.H, lambda, "H");
}

std::pair<Mat, Mat> init_grams(const DataMatrices& D, double lambda) {
  return {gram_inverse(stack_regressors(D), lambda, "[G;U]"), gram_inverse(D.H, lambda, "H")};
}

Mat concat_decoder(Index n, Index r) {
  Mat C = Mat::Zero(n, r);
  C.leftCols(n).setIdentity();
  return C;
}

LiftedModel fit_model(const DataMatrices& D, std::shared_ptr<const Observable> obs, double lambda,
                      bool fixed_decoder) {
  LiftedModel M;
  std::tie(M.A, M.B) = solve_batch(D, lambda);
  if (fixed_decoder) {
    if (!obs || !obs->concat_state()) throw DimensionError("fixed decoder requires a concatenated lifting");
    M.C = concat_decoder(D.X.rows(), D.G.rows());
  } else {
    M.C = solve_decoder(D, lambda);
  }
  std::tie(M.P, M.Pbar) = init_grams(D, lambda);
  M.obs = std::move(obs);
  M.lambda = lambda;
  M.fixed_decoder = fixed_decoder;
  M.validate();
  return M;
}

double edmd_loss(const Mat& A, const Mat& B, const Mat& C, const DataMatrices& D) {
  if (A.rows() != D.G.rows() || C.rows() != D.Y.rows() || B.cols() != D.U.rows())
    throw DimensionError("loss shapes mismatch");
  return (D.Y - C * D.H).squaredNorm() + (D.H - A * D.G - B * D.U).squaredNorm();
}

Vec predict_step(const LiftedModel& model, const Vec& x, const Vec& u) {
  if (u.size() != model.m()) throw DimensionError("input dimension mismatch");
  return model.C * (model.A * model.obs->lift(x) + model.B * u);
}

Mat predict_rollout(const LiftedModel& model, const Vec& x0, const Mat& U, Index steps, RolloutMode mode) {
  if (steps < 1) throw DimensionError("rollout needs at least one step");
  if (U.rows() != model.m() || U.cols() < steps) throw DimensionError("input sequence too short");
  Mat out(model.n(), steps + 1);
  out.col(0) = x0;
  Vec g = model.obs->lift(x0);
  for (Index k = 0; k < steps; ++k) {
    g = model.A * g + model.B * U.col(k);
    out.col(k + 1) = model.C * g;
    if (mode == RolloutMode::Relift) g = model.obs->lift(Vec(out.col(k + 1)));
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'T', 'V', 'K', 'M', 'O', 'D', 'L', '1'};

template <typename T>
void put(std::ostream& o, T v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& i) {
  T v{};
  i.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!i) throw Error("truncated model file");
  return v;
}

void put_mat(std::ostream& o, const Mat& M) {
  put<std::int64_t>(o, M.rows());
  put<std::int64_t>(o, M.cols());
  for (Index r = 0; r < M.rows(); ++r)
    for (Index c = 0; c < M.cols(); ++c) put<double>(o, M(r, c));
}

Mat get_mat(std::istream& i, Index rows, Index cols) {
  const auto r = get<std::int64_t>(i);
  const auto c = get<std::int64_t>(i);
  if (r != rows || c != cols) throw DimensionError("model file matrix shape mismatch");
  Mat M(rows, cols);
  for (Index a = 0; a < rows; ++a)
    for (Index b = 0; b < cols; ++b) M(a, b) = get<double>(i);
  return M;
}

}  // namespace

void save_model(const std::string& path, const LiftedModel& model, const std::string& theta_ref) {
  model.validate();
  std::ofstream o(path, std::ios::binary);
  if (!o) throw Error("cannot write model " + path);
  o.write(kMagic, sizeof kMagic);
  put<std::int64_t>(o, model.n());
  put<std::int64_t>(o, model.m());
  put<std::int64_t>(o, model.r());
  put<std::int64_t>(o, model.tau);
  put<double>(o, model.lambda);
  put<std::uint8_t>(o, model.fixed_decoder ? 1 : 0);
  put_mat(o, model.A);
  put_mat(o, model.B);
  put_mat(o, model.C);
  put_mat(o, model.P);
  put_mat(o, model.Pbar);
  put<std::int64_t>(o, static_cast<std::int64_t>(theta_ref.size()));
  o.write(theta_ref.data(), static_cast<std::streamsize>(theta_ref.size()));
}

LiftedModel load_model(const std::string& path, std::string* theta_ref) {
  std::ifstream i(path, std::ios::binary);
  if (!i) throw Error("cannot read model " + path);
  char magic[sizeof kMagic];
  i.read(magic, sizeof magic);
  if (!i || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw Error("not a model file: " + path);
  LiftedModel M;
  const auto n = get<std::int64_t>(i);
  const auto m = get<std::int64_t>(i);
  const auto r = get<std::int64_t>(i);
  M.tau = get<std::int64_t>(i);
  M.lambda = get<double>(i);
  M.fixed_decoder = get<std::uint8_t>(i) != 0;
  M.A = get_mat(i, r, r);
  M.B = get_mat(i, r, m);
  M.C = get_mat(i, n, r);
  M.P = get_mat(i, r + m, r + m);
  M.Pbar = get_mat(i, r, r);
  const auto len = get<std::int64_t>(i);
  if (len < 0 || len > 4096) throw Error("corrupt checkpoint reference in " + path);
  std::string ref(static_cast<std::size_t>(len), '\0');
  i.read(ref.data(), len);
  if (!i) throw Error("truncated model file");
  if (theta_ref) *theta_ref = ref;
  if (!ref.empty()) {
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    M.obs = std::make_shared<const Observable>(load_checkpoint((base / ref).string()));
  } else {
    M.obs = std::make_shared<const Observable>(Observable::identity(n));
  }
  M.validate();
  return M;
}

}  // namespace tvk
