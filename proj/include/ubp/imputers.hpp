#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ubp/dataset.hpp"
#include "ubp/trainer.hpp"

namespace ubp {

// Method selector plus parameters, parseable from strings like
// `ubp:t=8,hidden=16`, `fkm:k=8,p=1,m=1.3`, `mf:t=8,lambda=0.01`,
// `ibi:k=5`, `baseline`. Values outside the usual grids are accepted.
struct ImputerSpec {
  enum class Method { Baseline, Fkm, Ibi, Mf, Nlpca, Ubp };

  Method method = Method::Baseline;
  std::uint64_t seed = 0;

  std::size_t k = 8;          // fkm: clusters; ibi: neighbors
  double p_norm = 2.0;        // fkm L_p norm
  double fuzzifier = 1.3;     // fkm m
  bool weighted = true;       // ibi: similarity-weighted votes (uniform when false)

  std::size_t t = 2;          // mf/nlpca/ubp latent width
  double lambda_mf = 0.01;    // mf regularization
  std::vector<std::size_t> hidden;  // nlpca/ubp hidden layer sizes

  static ImputerSpec parse(const std::string& text);
  std::string to_string() const;
  std::string method_name() const;
};

struct ImputationResult {
  Dataset completed;
  ImputerSpec spec;
  std::map<std::string, double> fit_diagnostics;
  std::optional<ModelBundle> bundle;  // ubp/nlpca only
};

// Dispatches to the method implementations below. Known cells always pass
// through unchanged and the result has no missing cells.
ImputationResult impute(const Dataset& ds, const ImputerSpec& spec,
                        const TrainConfig& trainer_defaults = {}, const ProgressFn& progress = {});

// Column mean for continuous attributes, modal category for nominal ones
// (ties to the lowest index). A fully-missing column takes the range
// midpoint / category 0.
Dataset impute_baseline(const Dataset& ds);

// k-nearest-neighbor imputation with cosine similarity over the columns
// known in both rows; per-cell baseline fallback when no neighbor has the
// attribute.
Dataset impute_ibi(const Dataset& ds, std::size_t k, bool weighted = true);

// Fuzzy k-means over the encoded rows with partial L_p distances. Missing
// cells take the membership-weighted mix of centroids.
Dataset impute_fkm(const Dataset& ds, std::size_t k, double p_norm, double fuzzifier,
                   std::uint64_t seed);

// Two-factor model x_hat = u_r . w_c trained by per-element SGD under the
// shared decay schedule; no biases, predictions clamped to [0,1].
Dataset impute_mf(const Dataset& ds, std::size_t t, double lambda_mf, std::uint64_t seed,
                  const DecaySchedule& sched = {});

Dataset impute_nlpca(const Dataset& ds, std::size_t t, const std::vector<std::size_t>& hidden,
                     std::uint64_t seed, const TrainConfig& defaults = {});
Dataset impute_ubp(const Dataset& ds, std::size_t t, const std::vector<std::size_t>& hidden,
                   std::uint64_t seed, const TrainConfig& defaults = {});

// Factorization state, exposed so reconstruction quality is testable on
// complete matrices as well.
struct MfModel {
  std::size_t rows = 0, cols = 0, t = 0;
  std::vector<double> row_factors;  // n x t
  std::vector<double> col_factors;  // d' x t
  double final_rmse = 0.0;
  std::size_t epochs = 0;

  double predict(std::size_t r, std::size_t c) const {
    double dot = 0.0;
    for (std::size_t f = 0; f < t; ++f) dot += row_factors[r * t + f] * col_factors[c * t + f];
    return dot;
  }
};

MfModel mf_fit(const EncodedMatrix& X, std::size_t t, double lambda_mf, std::uint64_t seed,
               const DecaySchedule& sched = {});

}  // namespace ubp
