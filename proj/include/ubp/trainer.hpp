#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ubp/dataset.hpp"
#include "ubp/kernels.hpp"
#include "ubp/mlp.hpp"
#include "ubp/rng.hpp"

namespace ubp {

struct TrainConfig {
  double eta_start = 0.01;   // initial learning rate
  double eta_floor = 0.0001; // convergence: stop once eta falls to/below this
  double gamma = 0.00001;    // relative improvement expected per epoch
  double lambda = 0.0001;    // regularization, phases 1-2 only
  std::size_t latent_t = 2;
  std::vector<std::size_t> hidden;
  std::uint64_t seed = 0;
  std::size_t max_epochs_per_phase = 10000;
  double holdout_fraction = 0.0;  // 0 scores on all known cells; >0 scores on a held-out split
  bool h_before_w = false;        // compute h from pre-update weights instead
  bool phase1 = true;             // ablation switches; nlpca_train forces both off
  bool phase2 = true;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// The n x t intrinsic matrix V, one latent row per data row.
struct LatentMatrix {
  std::size_t rows = 0;
  std::size_t t = 0;
  std::vector<double> values;  // row-major

  LatentMatrix() = default;
  LatentMatrix(std::size_t n, std::size_t width) : rows(n), t(width), values(n * width, 0.0) {}
  static LatentMatrix random_init(std::size_t n, std::size_t width, Rng& rng);

  std::span<double> row(std::size_t r) { return {values.data() + r * t, t}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * t, t}; }
  std::vector<double> column_means() const;
  bool operator==(const LatentMatrix&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based within the phase
  double rmse = 0.0;
  double eta = 0.0;  // rate used for this epoch
};

struct TrainedModel {
  TrainConfig config;
  LatentMatrix V;
  MlpModel model;
  std::vector<std::vector<EpochRecord>> history;  // one list per phase

  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);
};

using ProgressFn = std::function<void(int phase, const EpochRecord&)>;

// Writes `phase=<p> epoch=<n> rmse=<float> eta=<float>` lines.
ProgressFn make_line_progress(std::ostream& out);

// -------- convergence schedule --------

struct DecaySchedule {
  double eta_start = 0.01;
  double eta_floor = 0.0001;
  double gamma = 0.00001;
  std::size_t max_epochs = 10000;
};

struct DecayStats {
  double final_score = std::numeric_limits<double>::quiet_NaN();
  std::size_t epochs = 0;
  std::size_t halvings = 0;
};

// Runs epochs until eta decays to the floor or the epoch cap is hit. The
// learning rate halves whenever the relative improvement 1 - s/s' falls
// short of gamma; s' starts at infinity so the first epoch never decays.
// Shared by every SGD method here so they converge by one criterion.
template <class EpochFn>
DecayStats run_decay_loop(const DecaySchedule& sched, EpochFn&& epoch,
                          const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  DecayStats stats;
  double eta = sched.eta_start;
  double prev = std::numeric_limits<double>::infinity();
  while (eta > sched.eta_floor && stats.epochs < sched.max_epochs) {
    const double eta_used = eta;
    const double s = epoch(eta_used, stats.epochs);
    ++stats.epochs;
    stats.final_score = s;
    if (1.0 - s / prev < sched.gamma) {
      eta /= 2.0;
      ++stats.halvings;
    }
    prev = s;
    if (on_epoch) on_epoch({stats.epochs, s, eta_used});
  }
  return stats;
}

// -------- training operations --------

// One epoch of per-element SGD: every known element exactly once in a fresh
// random permutation. Per presentation: partial forward into the element's
// output unit, backprop, W <- W - eta(g + lambda W); when update_inputs is
// set, h is computed afterwards from the just-updated weights and
// v_r <- v_r - eta(h + lambda v_r). Returns RMSE over all known cells.
double train_epoch(const EncodedMatrix& X, MlpModel& model, LatentMatrix& V, double eta,
                   double lambda, bool update_inputs, Rng& rng, bool h_before_w = false);

// Epoch loop under the decay schedule. `regularized` selects cfg.lambda or 0.
double run_phase(const EncodedMatrix& X, MlpModel& model, LatentMatrix& V, const TrainConfig& cfg,
                 bool update_inputs, bool regularized, Rng& perm_rng,
                 std::vector<EpochRecord>* history = nullptr, int phase_tag = 0,
                 const ProgressFn& progress = {});

// Three-phase training: (1) V and a temporary no-hidden-layer perceptron
// jointly, regularized; (2) a fresh MLP against frozen V, regularized;
// (3) both refined together without regularization.
TrainedModel ubp_train(const EncodedMatrix& X, const TrainConfig& cfg,
                       const ProgressFn& progress = {});

// Single-phase ablation: random V and W refined jointly (phase 3 only).
TrainedModel nlpca_train(const EncodedMatrix& X, const TrainConfig& cfg,
                         const ProgressFn& progress = {});

// Full forward of row r's latent vector.
std::vector<double> decode_row(const TrainedModel& tm, std::size_t r);

// -------- latent-grid sampling --------

struct LatentGrid {
  std::size_t steps = 0;
  std::pair<std::size_t, std::size_t> dims;
  std::vector<std::vector<double>> latents;  // steps*steps rows
  std::vector<std::vector<double>> outputs;  // encoded model outputs per point
};

// Decodes a uniform steps x steps grid over two latent dimensions, holding
// the other latent coordinates at their column means.
LatentGrid sample_latent_grid(const TrainedModel& tm, std::pair<std::size_t, std::size_t> dims,
                              std::size_t steps, std::pair<double, double> bounds_first,
                              std::pair<double, double> bounds_second);

// -------- model bundle (trained model + the encoding it was trained on) ----

struct ModelBundle {
  TrainedModel tm;
  std::vector<AttributeSpec> attrs;
  std::vector<ColumnRef> column_map;
  std::vector<NormParams> norm_params;

  nlohmann::json to_json() const;
  static ModelBundle from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ModelBundle load(const std::string& path);
};

}  // namespace ubp
