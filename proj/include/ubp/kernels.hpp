#pragma once

#include <cstdint>
#include <vector>

#include "ubp/dataset.hpp"
#include "ubp/mlp.hpp"

// Data-parallel inner loops, each in an OpenMP flavor and a serial reference
// flavor. Both flavors share the same two-level reduction structure (per-row
// partials folded in row order), so results are bit-identical to each other
// and independent of the thread count. Training SGD itself is order-dependent
// and stays sequential; these kernels cover the evaluation-style passes.
namespace ubp::kernels {

// Known-cell index grouped by row.
struct KnownCells {
  explicit KnownCells(const EncodedMatrix& X);
  explicit KnownCells(std::size_t rows) : cols(rows) {}
  void add(std::size_t r, std::uint32_t c) {
    cols[r].push_back(c);
    ++total;
  }
  std::vector<std::vector<std::uint32_t>> cols;
  std::size_t total = 0;
};

// Root-mean-squared error of the model over the listed cells, with inputs
// taken from the row-major n x t latent block.
double rmse(const MlpModel& model, const std::vector<double>& latents, std::size_t t,
            const EncodedMatrix& X, const KnownCells& cells);
double rmse_serial(const MlpModel& model, const std::vector<double>& latents, std::size_t t,
                   const EncodedMatrix& X, const KnownCells& cells);

// Full forward of every latent row; out is row-major n x d'.
void predict_all(const MlpModel& model, const std::vector<double>& latents, std::size_t t,
                 std::size_t rows, std::vector<double>& out);
void predict_all_serial(const MlpModel& model, const std::vector<double>& latents, std::size_t t,
                        std::size_t rows, std::vector<double>& out);

// n x n cosine similarity over the columns known in both rows; 0 when the
// overlap is empty or either restricted vector has zero norm.
std::vector<double> cosine_similarities(const EncodedMatrix& X);
std::vector<double> cosine_similarities_serial(const EncodedMatrix& X);

// One fuzzy k-means half-step each: memberships from centroids (partial L_p
// distance over the known columns, scaled by d'/known) and membership^m
// weighted centroids from rows with the column known (0.5 when none has it).
void fkm_memberships(const EncodedMatrix& X, const std::vector<double>& centroids, std::size_t k,
                     double p_norm, double fuzzifier, std::vector<double>& memberships);
void fkm_memberships_serial(const EncodedMatrix& X, const std::vector<double>& centroids,
                            std::size_t k, double p_norm, double fuzzifier,
                            std::vector<double>& memberships);
void fkm_centroids(const EncodedMatrix& X, const std::vector<double>& memberships, std::size_t k,
                   double fuzzifier, std::vector<double>& centroids);
void fkm_centroids_serial(const EncodedMatrix& X, const std::vector<double>& memberships,
                          std::size_t k, double fuzzifier, std::vector<double>& centroids);

}  // namespace ubp::kernels
