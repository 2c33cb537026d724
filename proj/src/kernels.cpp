#include "ubp/kernels.hpp"

#include <cmath>
#include <cstring>
#include <span>

namespace ubp::kernels {

namespace {

std::span<const double> latent_row(const std::vector<double>& latents, std::size_t t, std::size_t r) {
  return {latents.data() + r * t, t};
}

double row_squared_error(const MlpModel& model, std::span<const double> v, const EncodedMatrix& X,
                         const std::vector<std::uint32_t>& cols, std::size_t r,
                         MlpModel::Workspace& ws, std::vector<double>& out) {
  model.predict(v, out, ws);
  double sum = 0.0;
  for (std::uint32_t c : cols) {
    const double e = X.value(r, c) - out[c];
    sum += e * e;
  }
  return sum;
}

}  // namespace

KnownCells::KnownCells(const EncodedMatrix& X) : cols(X.rows()) {
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t c = 0; c < X.cols(); ++c)
      if (X.known(r, c)) cols[r].push_back(static_cast<std::uint32_t>(c));
    total += cols[r].size();
  }
}

double rmse_serial(const MlpModel& model, const std::vector<double>& latents, std::size_t t,
                   const EncodedMatrix& X, const KnownCells& cells) {
  const std::size_t n = X.rows();
  std::vector<double> row_sums(n, 0.0);
  MlpModel::Workspace ws = model.make_workspace();
  std::vector<double> out(model.outputs());
  for (std::size_t r = 0; r < n; ++r) {
    if (cells.cols[r].empty()) continue;
    row_sums[r] = row_squared_error(model, latent_row(latents, t, r), X, cells.cols[r], r, ws, out);
  }
  double total = 0.0;
  for (double s : row_sums) total += s;
  return std::sqrt(total / static_cast<double>(cells.total));
}

double rmse(const MlpModel& model, const std::vector<double>& latents, std::size_t t,
            const EncodedMatrix& X, const KnownCells& cells) {
  const std::size_t n = X.rows();
  std::vector<double> row_sums(n, 0.0);
#pragma omp parallel
  {
    MlpModel::Workspace ws = model.make_workspace();
    std::vector<double> out(model.outputs());
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n); ++r) {
      if (cells.cols[r].empty()) continue;
      row_sums[r] = row_squared_error(model, latent_row(latents, t, static_cast<std::size_t>(r)), X,
                                      cells.cols[r], static_cast<std::size_t>(r), ws, out);
    }
  }
  double total = 0.0;
  for (double s : row_sums) total += s;
  return std::sqrt(total / static_cast<double>(cells.total));
}

void predict_all_serial(const MlpModel& model, const std::vector<double>& latents, std::size_t t,
                        std::size_t rows, std::vector<double>& out) {
  const std::size_t width = model.outputs();
  out.resize(rows * width);
  MlpModel::Workspace ws = model.make_workspace();
  for (std::size_t r = 0; r < rows; ++r)
    model.predict(latent_row(latents, t, r), {out.data() + r * width, width}, ws);
}

void predict_all(const MlpModel& model, const std::vector<double>& latents, std::size_t t,
                 std::size_t rows, std::vector<double>& out) {
  const std::size_t width = model.outputs();
  out.resize(rows * width);
#pragma omp parallel
  {
    MlpModel::Workspace ws = model.make_workspace();
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r)
      model.predict(latent_row(latents, t, static_cast<std::size_t>(r)),
                    {out.data() + static_cast<std::size_t>(r) * width, width}, ws);
  }
}

namespace {

double cosine_pair(const EncodedMatrix& X, std::size_t a, std::size_t b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  bool overlap = false;
  for (std::size_t c = 0; c < X.cols(); ++c) {
    if (!X.known(a, c) || !X.known(b, c)) continue;
    overlap = true;
    const double xa = X.value(a, c);
    const double xb = X.value(b, c);
    dot += xa * xb;
    na += xa * xa;
    nb += xb * xb;
  }
  if (!overlap || na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::vector<double> cosine_similarities_serial(const EncodedMatrix& X) {
  const std::size_t n = X.rows();
  std::vector<double> sim(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    sim[a * n + a] = 1.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const double s = cosine_pair(X, a, b);
      sim[a * n + b] = s;
      sim[b * n + a] = s;
    }
  }
  return sim;
}

std::vector<double> cosine_similarities(const EncodedMatrix& X) {
  const std::size_t n = X.rows();
  std::vector<double> sim(n * n, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(n); ++a) {
    sim[a * n + a] = 1.0;
    for (std::size_t b = static_cast<std::size_t>(a) + 1; b < n; ++b) {
      const double s = cosine_pair(X, static_cast<std::size_t>(a), b);
      sim[a * n + b] = s;
      sim[b * n + static_cast<std::size_t>(a)] = s;
    }
  }
  return sim;
}

namespace {

// Partial L_p distance from row r to centroid k, Dixon-scaled so rows with
// different missingness stay comparable.
double partial_distance(const EncodedMatrix& X, std::size_t r, const double* centroid,
                        double p_norm) {
  double sum = 0.0;
  std::size_t known = 0;
  for (std::size_t c = 0; c < X.cols(); ++c) {
    if (!X.known(r, c)) continue;
    ++known;
    sum += std::pow(std::abs(X.value(r, c) - centroid[c]), p_norm);
  }
  if (known == 0) return 0.0;
  const double scaled = sum * (static_cast<double>(X.cols()) / static_cast<double>(known));
  return std::pow(scaled, 1.0 / p_norm);
}

void memberships_for_row(const EncodedMatrix& X, const std::vector<double>& centroids,
                         std::size_t k, double p_norm, double fuzzifier, std::size_t r,
                         std::vector<double>& dist, double* u) {
  const std::size_t d = X.cols();
  std::size_t zero_count = 0;
  for (std::size_t q = 0; q < k; ++q) {
    dist[q] = partial_distance(X, r, centroids.data() + q * d, p_norm);
    if (dist[q] == 0.0) ++zero_count;
  }
  if (zero_count > 0) {
    // Sitting exactly on a centroid pins the membership there.
    const double share = 1.0 / static_cast<double>(zero_count);
    for (std::size_t q = 0; q < k; ++q) u[q] = dist[q] == 0.0 ? share : 0.0;
    return;
  }
  const double expo = 2.0 / (fuzzifier - 1.0);
  for (std::size_t q = 0; q < k; ++q) {
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::pow(dist[q] / dist[j], expo);
    u[q] = 1.0 / denom;
  }
}

}  // namespace

void fkm_memberships_serial(const EncodedMatrix& X, const std::vector<double>& centroids,
                            std::size_t k, double p_norm, double fuzzifier,
                            std::vector<double>& memberships) {
  const std::size_t n = X.rows();
  memberships.resize(n * k);
  std::vector<double> dist(k);
  for (std::size_t r = 0; r < n; ++r)
    memberships_for_row(X, centroids, k, p_norm, fuzzifier, r, dist, memberships.data() + r * k);
}

void fkm_memberships(const EncodedMatrix& X, const std::vector<double>& centroids, std::size_t k,
                     double p_norm, double fuzzifier, std::vector<double>& memberships) {
  const std::size_t n = X.rows();
  memberships.resize(n * k);
#pragma omp parallel
  {
    std::vector<double> dist(k);
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n); ++r)
      memberships_for_row(X, centroids, k, p_norm, fuzzifier, static_cast<std::size_t>(r), dist,
                          memberships.data() + static_cast<std::size_t>(r) * k);
  }
}

namespace {

void centroid_for_cluster(const EncodedMatrix& X, const std::vector<double>& memberships,
                          std::size_t k, double fuzzifier, std::size_t q, double* centroid) {
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  std::vector<double> num(d, 0.0), den(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double um = std::pow(memberships[r * k + q], fuzzifier);
    for (std::size_t c = 0; c < d; ++c) {
      if (!X.known(r, c)) continue;
      num[c] += um * X.value(r, c);
      den[c] += um;
    }
  }
  for (std::size_t c = 0; c < d; ++c) centroid[c] = den[c] > 0.0 ? num[c] / den[c] : 0.5;
}

}  // namespace

void fkm_centroids_serial(const EncodedMatrix& X, const std::vector<double>& memberships,
                          std::size_t k, double fuzzifier, std::vector<double>& centroids) {
  const std::size_t d = X.cols();
  centroids.resize(k * d);
  for (std::size_t q = 0; q < k; ++q)
    centroid_for_cluster(X, memberships, k, fuzzifier, q, centroids.data() + q * d);
}

void fkm_centroids(const EncodedMatrix& X, const std::vector<double>& memberships, std::size_t k,
                   double fuzzifier, std::vector<double>& centroids) {
  const std::size_t d = X.cols();
  centroids.resize(k * d);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(k); ++q)
    centroid_for_cluster(X, memberships, k, fuzzifier, static_cast<std::size_t>(q),
                         centroids.data() + static_cast<std::size_t>(q) * d);
}

}  // namespace ubp::kernels
