#include "ubp/imputers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "ubp/kernels.hpp"

namespace ubp {

// -------- spec parsing --------

namespace {

const char* kGrammarHint = "expected name(:key=value(,key=value)*)? e.g. ubp:t=8,hidden=16";

double parse_double_or_throw(const std::string& key, const std::string& value) {
  double out;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw std::invalid_argument("bad value for '" + key + "': " + kGrammarHint);
  return out;
}

std::size_t parse_size_or_throw(const std::string& key, const std::string& value) {
  const double v = parse_double_or_throw(key, value);
  if (v < 0 || v != std::floor(v))
    throw std::invalid_argument("'" + key + "' must be a nonnegative integer");
  return static_cast<std::size_t>(v);
}

// hidden=0 means no hidden layer; hidden=8x8 stacks two layers of 8.
std::vector<std::size_t> parse_hidden(const std::string& value) {
  std::vector<std::size_t> sizes;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t pos = value.find('x', start);
    const std::string part = value.substr(start, pos == std::string::npos ? pos : pos - start);
    sizes.push_back(parse_size_or_throw("hidden", part));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (sizes.size() == 1 && sizes[0] == 0) return {};
  for (auto s : sizes)
    if (s == 0) throw std::invalid_argument("hidden layer sizes must be positive");
  return sizes;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

ImputerSpec ImputerSpec::parse(const std::string& text) {
  ImputerSpec spec;
  const std::size_t colon = text.find(':');
  const std::string name = text.substr(0, colon);

  if (name == "baseline") {
    spec.method = Method::Baseline;
  } else if (name == "fkm") {
    spec.method = Method::Fkm;
    spec.k = 8;
  } else if (name == "ibi") {
    spec.method = Method::Ibi;
    spec.k = 5;
  } else if (name == "mf") {
    spec.method = Method::Mf;
    spec.t = 8;
  } else if (name == "nlpca") {
    spec.method = Method::Nlpca;
    spec.hidden = {8};
  } else if (name == "ubp") {
    spec.method = Method::Ubp;
    spec.hidden = {8};
  } else {
    throw std::invalid_argument("unknown method '" + name + "': " + kGrammarHint);
  }

  if (colon == std::string::npos) return spec;
  const std::string params = text.substr(colon + 1);
  if (params.empty()) throw std::invalid_argument(std::string("empty parameter list: ") + kGrammarHint);

  std::size_t start = 0;
  while (start <= params.size()) {
    std::size_t comma = params.find(',', start);
    const std::string pair =
        params.substr(start, comma == std::string::npos ? comma : comma - start);
    const std::size_t eq = pair.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= pair.size())
      throw std::invalid_argument("malformed parameter '" + pair + "': " + kGrammarHint);
    const std::string key = pair.substr(0, eq);
    const std::string value = pair.substr(eq + 1);

    const bool fkm = spec.method == Method::Fkm;
    const bool ibi = spec.method == Method::Ibi;
    const bool mf = spec.method == Method::Mf;
    const bool net = spec.method == Method::Nlpca || spec.method == Method::Ubp;

    if ((fkm || ibi) && key == "k") {
      spec.k = parse_size_or_throw(key, value);
    } else if (fkm && key == "p") {
      spec.p_norm = parse_double_or_throw(key, value);
    } else if (fkm && key == "m") {
      spec.fuzzifier = parse_double_or_throw(key, value);
    } else if (ibi && key == "weighted") {
      spec.weighted = parse_size_or_throw(key, value) != 0;
    } else if ((mf || net) && key == "t") {
      spec.t = parse_size_or_throw(key, value);
    } else if (mf && key == "lambda") {
      spec.lambda_mf = parse_double_or_throw(key, value);
    } else if (net && key == "hidden") {
      spec.hidden = parse_hidden(value);
    } else {
      throw std::invalid_argument("unknown key '" + key + "' for method '" + name +
                                  "': " + kGrammarHint);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return spec;
}

std::string ImputerSpec::method_name() const {
  switch (method) {
    case Method::Baseline: return "baseline";
    case Method::Fkm: return "fkm";
    case Method::Ibi: return "ibi";
    case Method::Mf: return "mf";
    case Method::Nlpca: return "nlpca";
    case Method::Ubp: return "ubp";
  }
  return "?";
}

std::string ImputerSpec::to_string() const {
  std::ostringstream out;
  out << method_name();
  switch (method) {
    case Method::Baseline: break;
    case Method::Fkm:
      out << ":k=" << k << ",p=" << format_double(p_norm) << ",m=" << format_double(fuzzifier);
      break;
    case Method::Ibi:
      out << ":k=" << k;
      if (!weighted) out << ",weighted=0";
      break;
    case Method::Mf:
      out << ":t=" << t << ",lambda=" << format_double(lambda_mf);
      break;
    case Method::Nlpca:
    case Method::Ubp: {
      out << ":t=" << t << ",hidden=";
      if (hidden.empty()) {
        out << 0;
      } else {
        for (std::size_t i = 0; i < hidden.size(); ++i) out << (i ? "x" : "") << hidden[i];
      }
      break;
    }
  }
  return out.str();
}

// -------- baseline --------

Dataset impute_baseline(const Dataset& ds) {
  Dataset out = ds;
  for (std::size_t j = 0; j < ds.cols(); ++j) {
    const AttributeSpec& a = ds.attr(j);
    Cell fill;
    if (a.is_continuous()) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t r = 0; r < ds.rows(); ++r) {
        const Cell& c = ds.cell(r, j);
        if (!c.known) continue;
        sum += c.value;
        ++count;
      }
      fill = count > 0 ? Cell::real(sum / static_cast<double>(count))
                       : Cell::real(0.5 * (a.observed_min + a.observed_max));
    } else {
      std::vector<std::size_t> votes(a.categories.size(), 0);
      for (std::size_t r = 0; r < ds.rows(); ++r) {
        const Cell& c = ds.cell(r, j);
        if (c.known) ++votes[c.category_index()];
      }
      std::size_t best = 0;
      for (std::size_t q = 1; q < votes.size(); ++q)
        if (votes[q] > votes[best]) best = q;  // ties keep the lowest index
      fill = Cell::category(best);
    }
    for (std::size_t r = 0; r < ds.rows(); ++r)
      if (!ds.cell(r, j).known) out.set_cell(r, j, fill);
  }
  return out;
}

// -------- instance-based --------

Dataset impute_ibi(const Dataset& ds, std::size_t k, bool weighted) {
  if (k < 1) throw std::invalid_argument("ibi needs k >= 1");
  const EncodedMatrix em = normalize_encode(ds);
  const std::vector<double> sim = kernels::cosine_similarities(em);
  const std::size_t n = ds.rows();

  std::vector<double> predictions(em.values());
  std::vector<std::pair<std::size_t, std::size_t>> fallback;

  std::vector<std::pair<double, std::size_t>> candidates;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < ds.cols(); ++j) {
      if (ds.cell(r, j).known) continue;
      candidates.clear();
      for (std::size_t other = 0; other < n; ++other) {
        if (other == r || !ds.cell(other, j).known) continue;
        const double s = sim[r * n + other];
        if (s > 0.0) candidates.emplace_back(s, other);
      }
      if (candidates.empty()) {
        fallback.emplace_back(r, j);
        continue;
      }
      const std::size_t take = std::min(k, candidates.size());
      std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                        candidates.end(), [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return a.second < b.second;
                        });
      const std::size_t base = em.attr_first_col(j);
      const std::size_t width = ds.attr(j).is_continuous() ? 1 : ds.attr(j).categories.size();
      for (std::size_t col = base; col < base + width; ++col) {
        double num = 0.0, den = 0.0;
        for (std::size_t q = 0; q < take; ++q) {
          const double wgt = weighted ? candidates[q].first : 1.0;
          num += wgt * em.value(candidates[q].second, col);
          den += wgt;
        }
        predictions[r * em.cols() + col] = num / den;
      }
    }
  }

  Dataset out = decode(predictions, em, ds);
  if (!fallback.empty()) {
    const Dataset base = impute_baseline(ds);
    for (const auto& [r, j] : fallback) out.set_cell(r, j, base.cell(r, j));
  }
  return out;
}

// -------- fuzzy k-means --------

Dataset impute_fkm(const Dataset& ds, std::size_t k, double p_norm, double fuzzifier,
                   std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("fkm needs k >= 1");
  if (k > ds.rows()) throw std::invalid_argument("fkm needs k <= n");
  if (p_norm < 1.0) throw std::invalid_argument("fkm needs p >= 1");
  if (fuzzifier <= 1.0) throw std::invalid_argument("fkm needs fuzzifier > 1");

  const EncodedMatrix em = normalize_encode(ds);
  const std::size_t n = ds.rows();

  Rng rng(seed);
  std::vector<double> memberships(n * k);
  for (std::size_t r = 0; r < n; ++r) {
    double total = 0.0;
    for (std::size_t q = 0; q < k; ++q) {
      memberships[r * k + q] = rng.uniform() + 1e-12;
      total += memberships[r * k + q];
    }
    for (std::size_t q = 0; q < k; ++q) memberships[r * k + q] /= total;
  }

  std::vector<double> centroids;
  std::vector<double> next(n * k);
  for (int iter = 0; iter < 300; ++iter) {
    kernels::fkm_centroids(em, memberships, k, fuzzifier, centroids);
    kernels::fkm_memberships(em, centroids, k, p_norm, fuzzifier, next);
    double max_change = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i)
      max_change = std::max(max_change, std::abs(next[i] - memberships[i]));
    memberships.swap(next);
    if (max_change < 1e-4) break;
  }
  kernels::fkm_centroids(em, memberships, k, fuzzifier, centroids);

  std::vector<double> predictions(em.values());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < em.cols(); ++c) {
      if (em.known(r, c)) continue;
      double mix = 0.0;
      for (std::size_t q = 0; q < k; ++q) mix += memberships[r * k + q] * centroids[q * em.cols() + c];
      predictions[r * em.cols() + c] = mix;
    }
  return decode(predictions, em, ds);
}

// -------- matrix factorization --------

MfModel mf_fit(const EncodedMatrix& X, std::size_t t, double lambda_mf, std::uint64_t seed,
               const DecaySchedule& sched) {
  if (t < 1 || t >= X.cols()) throw std::invalid_argument("mf needs 1 <= t < encoded width");
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();

  struct CellRef {
    std::uint32_t r, c;
  };
  std::vector<CellRef> cells;
  double value_sum = 0.0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c)
      if (X.known(r, c)) {
        cells.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)});
        value_sum += X.value(r, c);
      }
  if (cells.empty()) throw std::invalid_argument("matrix has no known elements");

  MfModel m;
  m.rows = n;
  m.cols = d;
  m.t = t;
  // Factors start near sqrt(mean/t) so initial predictions sit at the data
  // mean instead of the saddle at zero.
  const double mean = value_sum / static_cast<double>(cells.size());
  const double scale = std::sqrt(std::max(mean, 1e-6) / static_cast<double>(t));
  const Rng root(seed);
  Rng u_rng = root.stream(0);
  Rng w_rng = root.stream(1);
  Rng perm_rng = root.stream(2);
  m.row_factors.resize(n * t);
  m.col_factors.resize(d * t);
  for (auto& v : m.row_factors) v = u_rng.normal(scale, 0.01);
  for (auto& v : m.col_factors) v = w_rng.normal(scale, 0.01);

  std::vector<double> u_old(t);
  const auto epoch = [&](double eta, std::size_t) {
    perm_rng.shuffle(cells);
    for (const CellRef& cell : cells) {
      double* u = m.row_factors.data() + cell.r * t;
      double* w = m.col_factors.data() + cell.c * t;
      double dot = 0.0;
      for (std::size_t f = 0; f < t; ++f) dot += u[f] * w[f];
      const double e = X.value(cell.r, cell.c) - dot;
      std::copy(u, u + t, u_old.begin());
      for (std::size_t f = 0; f < t; ++f) u[f] += eta * (e * w[f] - lambda_mf * u[f]);
      for (std::size_t f = 0; f < t; ++f) w[f] += eta * (e * u_old[f] - lambda_mf * w[f]);
    }
    // RMSE via per-row partials folded in row order, as everywhere else.
    std::vector<double> row_sums(n, 0.0);
    for (const CellRef& cell : cells) {
      const double e = X.value(cell.r, cell.c) - m.predict(cell.r, cell.c);
      row_sums[cell.r] += e * e;
    }
    double total = 0.0;
    for (double s : row_sums) total += s;
    return std::sqrt(total / static_cast<double>(cells.size()));
  };

  const DecayStats stats = run_decay_loop(sched, epoch);
  m.final_rmse = stats.final_score;
  m.epochs = stats.epochs;
  return m;
}

Dataset impute_mf(const Dataset& ds, std::size_t t, double lambda_mf, std::uint64_t seed,
                  const DecaySchedule& sched) {
  const EncodedMatrix em = normalize_encode(ds);
  const MfModel m = mf_fit(em, t, lambda_mf, seed, sched);
  std::vector<double> predictions(em.values());
  for (std::size_t r = 0; r < em.rows(); ++r)
    for (std::size_t c = 0; c < em.cols(); ++c)
      if (!em.known(r, c)) predictions[r * em.cols() + c] = std::clamp(m.predict(r, c), 0.0, 1.0);
  return decode(predictions, em, ds);
}

// -------- networks --------

namespace {

TrainConfig net_config(const TrainConfig& defaults, std::size_t t,
                       const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  TrainConfig cfg = defaults;
  cfg.latent_t = t;
  cfg.hidden = hidden;
  cfg.seed = seed;
  return cfg;
}

Dataset decode_trained(const TrainedModel& tm, const EncodedMatrix& em, const Dataset& ds) {
  std::vector<double> predictions;
  kernels::predict_all(tm.model, tm.V.values, tm.V.t, tm.V.rows, predictions);
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (em.known_mask()[i]) predictions[i] = em.values()[i];
  return decode(predictions, em, ds);
}

}  // namespace

Dataset impute_nlpca(const Dataset& ds, std::size_t t, const std::vector<std::size_t>& hidden,
                     std::uint64_t seed, const TrainConfig& defaults) {
  const EncodedMatrix em = normalize_encode(ds);
  const TrainedModel tm = nlpca_train(em, net_config(defaults, t, hidden, seed));
  return decode_trained(tm, em, ds);
}

Dataset impute_ubp(const Dataset& ds, std::size_t t, const std::vector<std::size_t>& hidden,
                   std::uint64_t seed, const TrainConfig& defaults) {
  const EncodedMatrix em = normalize_encode(ds);
  const TrainedModel tm = ubp_train(em, net_config(defaults, t, hidden, seed));
  return decode_trained(tm, em, ds);
}

// -------- dispatch --------

ImputationResult impute(const Dataset& ds, const ImputerSpec& spec,
                        const TrainConfig& trainer_defaults, const ProgressFn& progress) {
  if (ds.known_count() == 0) throw std::invalid_argument("dataset has no known cells");

  ImputationResult result{ds, spec, {}, std::nullopt};
  if (ds.missing_count() == 0) return result;  // nothing to impute

  switch (spec.method) {
    case ImputerSpec::Method::Baseline:
      result.completed = impute_baseline(ds);
      break;
    case ImputerSpec::Method::Ibi:
      result.completed = impute_ibi(ds, spec.k, spec.weighted);
      break;
    case ImputerSpec::Method::Fkm:
      result.completed = impute_fkm(ds, spec.k, spec.p_norm, spec.fuzzifier, spec.seed);
      break;
    case ImputerSpec::Method::Mf: {
      const EncodedMatrix em = normalize_encode(ds);
      const DecaySchedule sched{trainer_defaults.eta_start, trainer_defaults.eta_floor,
                                trainer_defaults.gamma, trainer_defaults.max_epochs_per_phase};
      const MfModel m = mf_fit(em, spec.t, spec.lambda_mf, spec.seed, sched);
      std::vector<double> predictions(em.values());
      for (std::size_t r = 0; r < em.rows(); ++r)
        for (std::size_t c = 0; c < em.cols(); ++c)
          if (!em.known(r, c)) predictions[r * em.cols() + c] = std::clamp(m.predict(r, c), 0.0, 1.0);
      result.completed = decode(predictions, em, ds);
      result.fit_diagnostics["final_rmse"] = m.final_rmse;
      result.fit_diagnostics["epochs"] = static_cast<double>(m.epochs);
      break;
    }
    case ImputerSpec::Method::Nlpca:
    case ImputerSpec::Method::Ubp: {
      const EncodedMatrix em = normalize_encode(ds);
      const TrainConfig cfg = net_config(trainer_defaults, spec.t, spec.hidden, spec.seed);
      const TrainedModel tm = spec.method == ImputerSpec::Method::Ubp
                                  ? ubp_train(em, cfg, progress)
                                  : nlpca_train(em, cfg, progress);
      result.completed = decode_trained(tm, em, ds);
      double epochs = 0.0;
      for (const auto& phase : tm.history) epochs += static_cast<double>(phase.size());
      result.fit_diagnostics["final_rmse"] = tm.history.back().empty() ? 0.0 : tm.history.back().back().rmse;
      result.fit_diagnostics["epochs"] = epochs;
      result.bundle = ModelBundle{tm, ds.attrs(), em.column_map(), em.norm_params()};
      break;
    }
  }
  return result;
}

}  // namespace ubp
