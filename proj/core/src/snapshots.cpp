#include "tvk/snapshots.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "tvk/errors.hpp"

namespace tvk {

TrajectoryBuffer::TrajectoryBuffer(Index n, Index m, Index w, Index b) : n_(n), m_(m), w_(w), b_(b) {
  if (n < 1 || m < 0) throw DimensionError("invalid state/input dimensions");
  if (b < 1 || w < b) throw DimensionError("window sizes must satisfy w >= b >= 1");
}

void TrajectoryBuffer::check(const Snapshot& s) const {
  if (s.x.size() != n_ || s.u.size() != m_) throw DimensionError("snapshot dimension mismatch");
  if (!s.x.allFinite() || !s.u.allFinite()) throw DimensionError("snapshot contains non-finite values");
  if (s.k < 0) throw SequencingError("negative time index");
  auto last = last_index();
  if (last && s.k != *last + 1)
    throw SequencingError("snapshot index " + std::to_string(s.k) + " does not follow " + std::to_string(*last));
}

void TrajectoryBuffer::push(const Snapshot& s) {
  check(s);
  pending_.push_back(s);
  if (window_.empty() && static_cast<Index>(pending_.size()) == w_ + 1) form_window();
}

void TrajectoryBuffer::amend_latest_input(const Vec& u) {
  if (pending_.empty()) throw CapacityError("no snapshot to amend");
  if (u.size() != m_ || !u.allFinite()) throw DimensionError("input dimension mismatch");
  pending_.back().u = u;
}

void TrajectoryBuffer::form_window() {
  for (Index j = 0; j < w_; ++j) {
    const Snapshot& s = pending_.front();
    window_.push_back(Transition{s.k, s.x, s.u, pending_[1].x});
    pending_.pop_front();
  }
}

Index TrajectoryBuffer::new_count() const {
  const auto p = static_cast<Index>(pending_.size());
  return window_.empty() ? p : p - 1;
}

std::int64_t TrajectoryBuffer::window_start() const {
  if (window_.empty()) throw CapacityError("window not yet formed");
  return window_.front().k;
}

std::optional<std::int64_t> TrajectoryBuffer::last_index() const {
  if (!pending_.empty()) return pending_.back().k;
  if (!window_.empty()) return window_.back().k + 1;
  return std::nullopt;
}

bool TrajectoryBuffer::window_contiguous() const {
  for (std::size_t j = 1; j < window_.size(); ++j)
    if (window_[j].k != window_[j - 1].k + 1) return false;
  return true;
}

std::vector<Transition> TrajectoryBuffer::outgoing() const {
  if (static_cast<Index>(window_.size()) < b_) throw CapacityError("window shorter than batch");
  return std::vector<Transition>(window_.begin(), window_.begin() + b_);
}

std::vector<Transition> TrajectoryBuffer::incoming() const {
  if (!batch_ready()) throw CapacityError("fewer than b new snapshots with successors");
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(b_));
  for (Index j = 0; j < b_; ++j) {
    const Snapshot& s = pending_[static_cast<std::size_t>(j)];
    out.push_back(Transition{s.k, s.x, s.u, pending_[static_cast<std::size_t>(j + 1)].x});
  }
  return out;
}

std::vector<Transition> TrajectoryBuffer::take_new() {
  std::vector<Transition> in = incoming();
  for (Index j = 0; j < b_; ++j) pending_.pop_front();
  return in;
}

void TrajectoryBuffer::advance() {
  std::vector<Transition> in = take_new();
  for (Index j = 0; j < b_; ++j) window_.pop_front();
  for (auto& t : in) window_.push_back(std::move(t));
}

void TrajectoryBuffer::append() {
  std::vector<Transition> in = take_new();
  for (auto& t : in) window_.push_back(std::move(t));
}

void TrajectoryBuffer::discard_new() { take_new(); }

namespace {

template <typename Cols>
DataMatrices assemble(const Cols& cols, const Observable& g) {
  if (cols.empty()) throw CapacityError("no transitions to assemble");
  const Index n = cols.front().x.size();
  const Index m = cols.front().u.size();
  const auto w = static_cast<Index>(cols.size());
  DataMatrices D;
  D.X.resize(n, w);
  D.Y.resize(n, w);
  D.U.resize(m, w);
  Index j = 0;
  for (const auto& t : cols) {
    D.X.col(j) = t.x;
    D.Y.col(j) = t.x_next;
    D.U.col(j) = t.u;
    ++j;
  }
  D.G = g.lift(D.X);
  D.H = g.lift(D.Y);
  return D;
}

}  // namespace

DataMatrices assemble_data_matrices(const std::deque<Transition>& cols, const Observable& g) {
  return assemble(cols, g);
}

DataMatrices assemble_data_matrices(const std::vector<Transition>& cols, const Observable& g) {
  return assemble(cols, g);
}

DataMatrices assemble_data_matrices(const TrajectoryBuffer& buffer, const Observable& g) {
  if (!buffer.window_formed()) throw CapacityError("buffer holds fewer than w+1 snapshots");
  return assemble(buffer.window(), g);
}

DataMatrices data_from_trajectory(const Mat& Xs, const Mat& Us, Index start, Index w, const Observable& g) {
  if (start < 0 || w < 1 || start + w >= Xs.cols() || start + w > Us.cols())
    throw CapacityError("trajectory too short for requested window");
  DataMatrices D;
  D.X = Xs.middleCols(start, w);
  D.Y = Xs.middleCols(start + 1, w);
  D.U = Us.middleCols(start, w);
  D.G = g.lift(D.X);
  D.H = g.lift(D.Y);
  return D;
}

const Vec& LiftCache::get(std::int64_t k, const Vec& x) {
  auto it = map_.find(k);
  if (it != map_.end()) return it->second;
  if (!g_) throw Error("lift cache has no observable");
  return map_.emplace(k, g_->lift(x)).first->second;
}

void LiftCache::retain_live(const TrajectoryBuffer& buffer) {
  std::map<std::int64_t, Vec> keep;
  auto carry = [&](std::int64_t k) {
    auto it = map_.find(k);
    if (it != map_.end()) keep.emplace(k, std::move(it->second));
  };
  for (const auto& t : buffer.window()) {
    carry(t.k);
    carry(t.k + 1);
  }
  for (const auto& s : buffer.pending()) carry(s.k);
  map_.swap(keep);
}

namespace {

template <typename LiftFn>
UpdateBatch make_batch(const TrajectoryBuffer& buffer, BatchMode mode, LiftFn&& lift) {
  if (!buffer.batch_ready()) throw CapacityError("update batch not ready");
  const Index b = buffer.b();
  const Index m = buffer.m();
  std::vector<Transition> cols;
  if (mode == BatchMode::Sliding) cols = buffer.outgoing();
  for (auto& t : buffer.incoming()) cols.push_back(std::move(t));
  const auto c = static_cast<Index>(cols.size());
  UpdateBatch B;
  B.b = b;
  for (Index j = 0; j < c; ++j) {
    const Transition& t = cols[static_cast<std::size_t>(j)];
    const Vec g0 = lift(t.k, t.x);
    const Vec g1 = lift(t.k + 1, t.x_next);
    if (j == 0) {
      B.Z.resize(g0.size() + m, c);
      B.W.resize(g0.size(), c);
      B.V.resize(t.x.size(), c);
    }
    B.Z.col(j).head(g0.size()) = g0;
    B.Z.col(j).tail(m) = t.u;
    B.W.col(j) = g1;
    B.V.col(j) = t.x_next;
  }
  B.E = Vec::Ones(c);
  if (mode == BatchMode::Sliding) B.E.head(b).setConstant(-1.0);
  return B;
}

}  // namespace

UpdateBatch form_update_batch(const TrajectoryBuffer& buffer, const Observable& g, BatchMode mode) {
  Vec tmp;
  return make_batch(buffer, mode, [&](std::int64_t, const Vec& x) -> const Vec& {
    tmp = g.lift(x);
    return tmp;
  });
}

UpdateBatch form_update_batch(const TrajectoryBuffer& buffer, LiftCache& cache, BatchMode mode) {
  return make_batch(buffer, mode, [&](std::int64_t k, const Vec& x) -> const Vec& { return cache.get(k, x); });
}

NewData new_data(const TrajectoryBuffer& buffer) {
  const std::vector<Transition> in = buffer.incoming();
  const auto b = static_cast<Index>(in.size());
  NewData d{Mat(buffer.n(), b), Mat(buffer.m(), b), Mat(buffer.n(), b)};
  for (Index j = 0; j < b; ++j) {
    d.X.col(j) = in[static_cast<std::size_t>(j)].x;
    d.U.col(j) = in[static_cast<std::size_t>(j)].u;
    d.Y.col(j) = in[static_cast<std::size_t>(j)].x_next;
  }
  return d;
}

void write_trajectory_csv(const std::string& path, const std::vector<Snapshot>& snaps) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  const Index n = snaps.empty() ? 0 : snaps.front().x.size();
  const Index m = snaps.empty() ? 0 : snaps.front().u.size();
  f << 'k';
  for (Index i = 1; i <= n; ++i) f << ",x" << i;
  for (Index i = 1; i <= m; ++i) f << ",u" << i;
  f << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& s : snaps) {
    f << s.k;
    for (Index i = 0; i < n; ++i) f << ',' << s.x(i);
    for (Index i = 0; i < m; ++i) f << ',' << s.u(i);
    f << '\n';
  }
}

std::vector<Snapshot> read_trajectory_csv(const std::string& path, Index n, Index m) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw Error("empty trajectory file " + path);
  std::vector<Snapshot> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<Index>(vals.size()) != 1 + n + m) throw DimensionError("trajectory row has wrong column count");
    Snapshot s;
    s.k = static_cast<std::int64_t>(vals[0]);
    s.x = Eigen::Map<Vec>(vals.data() + 1, n);
    s.u = Eigen::Map<Vec>(vals.data() + 1 + n, m);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace tvk
