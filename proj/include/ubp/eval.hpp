#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ubp/dataset.hpp"
#include "ubp/imputers.hpp"

namespace ubp {

// Per-pattern error is the sum over that row's scored cells: squared
// difference of normalized values for continuous attributes, Hamming (0/1)
// for nominal ones. average_error is the mean over all n rows.
struct ErrorReport {
  std::vector<double> per_pattern_error;
  double average_error = 0.0;
  std::vector<double> per_attribute_error;      // normalized units
  std::vector<double> per_attribute_raw_error;  // raw units, diagnostics
  std::size_t cells_scored = 0;

  nlohmann::json to_json() const;
};

// Scores the plan's removed cells of `imputed` against `original`,
// normalizing continuous values by the original's observed ranges.
ErrorReport score(const Dataset& original, const Dataset& imputed, const CorruptionPlan& plan);

// -------- paired comparison --------

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n_used = 0;  // pairs left after dropping zero differences
  double p_one_sided = 1.0;
  bool exact = false;  // exact enumeration (n_used <= 12) vs normal approximation
};

// One-sided signed-rank test on the given differences, alternative "the
// differences are negative". Zero differences are dropped; tied magnitudes
// take average ranks. Exact enumeration up to n = 12, then the normal
// approximation with tie correction and continuity correction.
WilcoxonResult wilcoxon_signed_rank(std::vector<double> diffs);

struct PairwiseResult {
  std::size_t wins = 0;  // count a < b
  std::size_t ties = 0;  // equality after rounding to 1e-9
  std::size_t losses = 0;
  double p_value = 1.0;  // alternative: a lower than b
};

PairwiseResult compare_pairwise(const std::vector<double>& a, const std::vector<double>& b);

// -------- grid sweep --------

struct SweepDataset {
  std::string name;
  Dataset data;
};

struct SweepRequest {
  std::vector<SweepDataset> datasets;
  std::vector<double> u_levels;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<ImputerSpec>> grids;  // one inner list per method
  TrainConfig trainer;
  int workers = 0;  // 0 = library default
};

struct SweepCellResult {
  std::size_t dataset_index = 0, u_index = 0, seed_index = 0, grid_index = 0, spec_index = 0;
  std::string spec;
  double avg_error = std::numeric_limits<double>::quiet_NaN();
  std::size_t cells_scored = 0;
  bool failed = false;
  std::string error;
};

struct BestOfGrid {
  bool valid = false;
  std::size_t spec_index = 0;
  std::string spec;
  double seed_avg_error = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
  std::vector<std::string> dataset_names;
  std::vector<double> u_levels;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> grid_methods;
  std::vector<SweepCellResult> cells;                   // deterministic order
  std::vector<std::vector<std::vector<BestOfGrid>>> best;  // [dataset][u][grid]

  std::string to_csv() const;
  std::string to_curves_tsv() const;  // gnuplot blocks, one per dataset
  nlohmann::json summary_json() const;
};

// Runs corrupt -> impute -> score for every (dataset, u, seed, spec) cell.
// Seeds are bound to cells, not threads, so results do not depend on the
// worker count. Failures are recorded per cell and the sweep continues.
SweepResult sweep(const SweepRequest& req);

// Reads the sweep experiment config (datasets, u_levels, seeds, grids,
// trainer overrides, output paths) from a JSON file.
struct SweepOutputs {
  std::string out_csv;
  std::string out_json;
  std::string out_curves;  // optional, empty = skip
};
SweepRequest load_sweep_config(const std::string& path, SweepOutputs& outputs);

}  // namespace ubp
