#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tvk/lifting.hpp"
#include "tvk/types.hpp"

namespace tvk {

struct Snapshot {
  std::int64_t k = 0;
  Vec x;
  Vec u;
};

// One sampled transition (x_k, u_k) -> x_{k+1}.
struct Transition {
  std::int64_t k = 0;
  Vec x;
  Vec u;
  Vec x_next;
};

// Holds the current window of w transitions and the stream of snapshots that
// arrived after it. The first pending snapshot is the window's last successor,
// so a full batch of b new transitions needs b + 1 pending snapshots and the
// buffer never retains more than w + b + 1 records.
//
// Skipped batches (gates or infeasibility) are dropped without moving the window,
// so after a skip the window is a concatenation of contiguous b-blocks.
class TrajectoryBuffer {
 public:
  TrajectoryBuffer(Index n, Index m, Index w, Index b);

  void push(const Snapshot& s);
  // Replace the input of the newest snapshot (closed loop: state known before input).
  void amend_latest_input(const Vec& u);

  Index n() const { return n_; }
  Index m() const { return m_; }
  Index w() const { return w_; }
  Index b() const { return b_; }

  bool window_formed() const { return !window_.empty(); }
  Index new_count() const;
  bool batch_ready() const { return window_formed() && new_count() >= b_; }
  std::int64_t window_start() const;
  std::optional<std::int64_t> last_index() const;
  std::size_t retained() const { return window_.size() + pending_.size(); }
  bool window_contiguous() const;

  const std::deque<Transition>& window() const { return window_; }
  const std::deque<Snapshot>& pending() const { return pending_; }
  std::vector<Transition> outgoing() const;
  std::vector<Transition> incoming() const;

  // Sliding update accepted: drop the b oldest window transitions, append the b new ones.
  void advance();
  // Accumulate-only update accepted: append the b new transitions without removal.
  void append();
  // Update skipped: drop the b new transitions, keep the latest snapshot as successor.
  void discard_new();

 private:
  void check(const Snapshot& s) const;
  void form_window();
  std::vector<Transition> take_new();

  Index n_, m_, w_, b_;
  std::deque<Transition> window_;
  std::deque<Snapshot> pending_;
};

struct DataMatrices {
  Mat X, Y, U, G, H;
  Index w() const { return X.cols(); }
};

DataMatrices assemble_data_matrices(const std::deque<Transition>& cols, const Observable& g);
DataMatrices assemble_data_matrices(const std::vector<Transition>& cols, const Observable& g);
DataMatrices assemble_data_matrices(const TrajectoryBuffer& buffer, const Observable& g);

// Columns start..start+w-1 of a sampled trajectory Xs (n x N+1), Us (m x N).
DataMatrices data_from_trajectory(const Mat& Xs, const Mat& Us, Index start, Index w, const Observable& g);

// Lifted values keyed by time index. Valid while θ is unchanged; the online
// loop calls clear() whenever θ is refreshed.
class LiftCache {
 public:
  explicit LiftCache(const Observable* g = nullptr) : g_(g) {}
  void bind(const Observable* g) {
    g_ = g;
    map_.clear();
  }
  const Vec& get(std::int64_t k, const Vec& x);
  void clear() { map_.clear(); }
  // Drop entries for states the buffer no longer retains.
  void retain_live(const TrajectoryBuffer& buffer);
  std::size_t size() const { return map_.size(); }

 private:
  const Observable* g_;
  std::map<std::int64_t, Vec> map_;
};

enum class BatchMode { Sliding, Accumulate };

struct UpdateBatch {
  Mat Z;  // (r+m) x 2b, or (r+m) x b when accumulating
  Mat W;  // lifted successors
  Mat V;  // raw successors
  Vec E;  // diagonal of the signature matrix
  Index b = 0;
};

// Throws CapacityError when fewer than b new transitions are available.
UpdateBatch form_update_batch(const TrajectoryBuffer& buffer, const Observable& g,
                              BatchMode mode = BatchMode::Sliding);
UpdateBatch form_update_batch(const TrajectoryBuffer& buffer, LiftCache& cache, BatchMode mode = BatchMode::Sliding);

// The new batch's raw data (X_new, U_new, Y_new).
struct NewData {
  Mat X, U, Y;
};
NewData new_data(const TrajectoryBuffer& buffer);

void write_trajectory_csv(const std::string& path, const std::vector<Snapshot>& snaps);
std::vector<Snapshot> read_trajectory_csv(const std::string& path, Index n, Index m);

}  // namespace tvk
