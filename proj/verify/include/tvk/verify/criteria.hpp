#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tvk/types.hpp"

namespace tvk::verify {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct CriteriaOptions {
  std::string config_dir;  // directory holding ntvs.toml, duffing.toml, grn_control.toml, grn_predict.toml
  std::uint64_t seed = 20240611;
};

CriterionResult woodbury_batch_equivalence(const CriteriaOptions& opt);  // 1
CriterionResult feasibility_equivalence(const CriteriaOptions& opt);     // 2
CriterionResult gradient_check(const CriteriaOptions& opt);              // 3
CriterionResult ntvs_prediction(const CriteriaOptions& opt);             // 4
CriterionResult duffing_gating(const CriteriaOptions& opt);              // 5
CriterionResult motivating_example(const CriteriaOptions& opt);          // 6
CriterionResult certificate_soundness(const CriteriaOptions& opt);       // 7
CriterionResult mpc_grid_optimality(const CriteriaOptions& opt);         // 8
CriterionResult iss_sanity(const CriteriaOptions& opt);                  // 9
CriterionResult grn_tracking(const CriteriaOptions& opt);                // 10
CriterionResult update_complexity(const CriteriaOptions& opt);           // 11
CriterionResult memory_bound(const CriteriaOptions& opt);                // 12

using Criterion = std::function<CriterionResult(const CriteriaOptions&)>;
const std::vector<Criterion>& all_criteria();

// Runs one criterion, filling in id and wall time and turning exceptions into failures.
CriterionResult run_criterion(int id, const CriteriaOptions& opt);

// Per-update cost of the low-rank update against refitting the advanced window.
struct UpdateTiming {
  Index w = 0, r = 0, b = 0;
  int updates = 0;
  double iterative_us = 0.0;  // mean per update
  double batch_us = 0.0;
  double max_deviation = 0.0;  // largest |[A B]| difference between the two paths
};
UpdateTiming time_updates(Index w, Index r, Index b, int updates, std::uint64_t seed);

}  // namespace tvk::verify
