#include "ubp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace ubp {

void TrainConfig::validate() const {
  if (!(eta_floor > 0.0 && eta_floor < eta_start))
    throw std::invalid_argument("require 0 < eta_floor < eta_start");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  if (latent_t < 1) throw std::invalid_argument("latent_t must be >= 1");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
    throw std::invalid_argument("holdout_fraction must lie in [0, 1)");
  for (auto h : hidden)
    if (h < 1) throw std::invalid_argument("hidden layer sizes must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"eta_start", eta_start},
          {"eta_floor", eta_floor},
          {"gamma", gamma},
          {"lambda", lambda},
          {"latent_t", latent_t},
          {"hidden", hidden},
          {"seed", seed},
          {"max_epochs_per_phase", max_epochs_per_phase},
          {"holdout_fraction", holdout_fraction},
          {"h_before_w", h_before_w},
          {"phase1", phase1},
          {"phase2", phase2}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.eta_start = j.value("eta_start", c.eta_start);
  c.eta_floor = j.value("eta_floor", c.eta_floor);
  c.gamma = j.value("gamma", c.gamma);
  c.lambda = j.value("lambda", c.lambda);
  c.latent_t = j.value("latent_t", c.latent_t);
  c.hidden = j.value("hidden", c.hidden);
  c.seed = j.value("seed", c.seed);
  c.max_epochs_per_phase = j.value("max_epochs_per_phase", c.max_epochs_per_phase);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.h_before_w = j.value("h_before_w", c.h_before_w);
  c.phase1 = j.value("phase1", c.phase1);
  c.phase2 = j.value("phase2", c.phase2);
  return c;
}

LatentMatrix LatentMatrix::random_init(std::size_t n, std::size_t width, Rng& rng) {
  LatentMatrix V(n, width);
  for (auto& v : V.values) v = rng.normal(0.0, 0.01);
  return V;
}

std::vector<double> LatentMatrix::column_means() const {
  std::vector<double> means(t, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < t; ++i) means[i] += values[r * t + i];
  for (auto& m : means) m /= static_cast<double>(rows);
  return means;
}

ProgressFn make_line_progress(std::ostream& out) {
  return [&out](int phase, const EpochRecord& rec) {
    out << "phase=" << phase << " epoch=" << rec.epoch << " rmse=" << rec.rmse
        << " eta=" << rec.eta << '\n';
  };
}

namespace {

struct CellRef {
  std::uint32_t r;
  std::uint32_t c;
};

std::vector<CellRef> known_cell_list(const EncodedMatrix& X) {
  std::vector<CellRef> cells;
  cells.reserve(X.known_count());
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < X.cols(); ++c)
      if (X.known(r, c)) cells.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)});
  return cells;
}

template <class T>
void shuffle_cells(std::vector<T>& xs, Rng& rng) {
  rng.shuffle(xs);
}

double epoch_pass(const EncodedMatrix& X, MlpModel& model, LatentMatrix& V, double eta,
                  double lambda, bool update_inputs, bool h_before_w, Rng& rng,
                  std::vector<CellRef>& present, const kernels::KnownCells& score) {
  if (present.empty()) throw std::invalid_argument("no known elements to train on");
  shuffle_cells(present, rng);
  std::vector<double> h(model.inputs());
  for (const CellRef& cell : present) {
    auto v = V.row(cell.r);
    model.forward_single_output(v, cell.c);
    model.backprop_deltas(cell.c, X.value(cell.r, cell.c));
    if (update_inputs && h_before_w) model.input_gradient_into(h);
    model.sgd_step(cell.c, eta, lambda);
    if (update_inputs) {
      if (!h_before_w) model.input_gradient_into(h);  // uses the updated weights
      for (std::size_t i = 0; i < h.size(); ++i) v[i] -= eta * (h[i] + lambda * v[i]);
    }
  }
  return kernels::rmse(model, V.values, V.t, X, score);
}

// Present/score split for the optional holdout mode. With fraction 0 both
// sides are the full known-cell set.
struct TrainingCells {
  std::vector<CellRef> present;
  kernels::KnownCells score{std::size_t{0}};
};

TrainingCells split_cells(const EncodedMatrix& X, double holdout_fraction, std::uint64_t seed) {
  TrainingCells tc;
  std::vector<CellRef> all = known_cell_list(X);
  if (holdout_fraction == 0.0) {
    tc.present = std::move(all);
    tc.score = kernels::KnownCells(X);
    return tc;
  }
  Rng rng = Rng(seed).stream(4);
  shuffle_cells(all, rng);
  const std::size_t held = static_cast<std::size_t>(
      std::llround(holdout_fraction * static_cast<double>(all.size())));
  if (held == 0 || held == all.size())
    throw std::invalid_argument("holdout_fraction leaves an empty split");
  tc.score = kernels::KnownCells(X.rows());
  std::vector<std::pair<std::uint32_t, std::uint32_t>> held_sorted;
  for (std::size_t i = 0; i < held; ++i) held_sorted.emplace_back(all[i].r, all[i].c);
  std::sort(held_sorted.begin(), held_sorted.end());
  for (const auto& [r, c] : held_sorted) tc.score.add(r, c);
  tc.present.assign(all.begin() + static_cast<std::ptrdiff_t>(held), all.end());
  return tc;
}

}  // namespace

double train_epoch(const EncodedMatrix& X, MlpModel& model, LatentMatrix& V, double eta,
                   double lambda, bool update_inputs, Rng& rng, bool h_before_w) {
  if (model.outputs() != X.cols()) throw std::invalid_argument("model output width != matrix width");
  if (V.t != model.inputs()) throw std::invalid_argument("latent width != model input width");
  if (V.rows != X.rows()) throw std::invalid_argument("latent rows != matrix rows");
  std::vector<CellRef> present = known_cell_list(X);
  kernels::KnownCells score(X);
  return epoch_pass(X, model, V, eta, lambda, update_inputs, h_before_w, rng, present, score);
}

double run_phase(const EncodedMatrix& X, MlpModel& model, LatentMatrix& V, const TrainConfig& cfg,
                 bool update_inputs, bool regularized, Rng& perm_rng,
                 std::vector<EpochRecord>* history, int phase_tag, const ProgressFn& progress) {
  cfg.validate();
  TrainingCells tc = split_cells(X, cfg.holdout_fraction, cfg.seed);
  const double lambda = regularized ? cfg.lambda : 0.0;
  DecaySchedule sched{cfg.eta_start, cfg.eta_floor, cfg.gamma, cfg.max_epochs_per_phase};
  DecayStats stats = run_decay_loop(
      sched,
      [&](double eta, std::size_t) {
        return epoch_pass(X, model, V, eta, lambda, update_inputs, cfg.h_before_w, perm_rng,
                          tc.present, tc.score);
      },
      [&](const EpochRecord& rec) {
        if (history) history->push_back(rec);
        if (progress) progress(phase_tag, rec);
      });
  return stats.final_score;
}

namespace {

TrainedModel train_impl(const EncodedMatrix& X, const TrainConfig& cfg, bool phase1, bool phase2,
                        const ProgressFn& progress) {
  cfg.validate();
  if (X.known_count() == 0) throw std::invalid_argument("matrix has no known elements");
  if (cfg.latent_t >= X.cols())
    throw std::invalid_argument("latent_t must be smaller than the encoded width");

  const Rng root(cfg.seed);
  Rng v_rng = root.stream(0);
  Rng t_rng = root.stream(1);
  Rng w_rng = root.stream(2);
  Rng perm_rng = root.stream(3);

  TrainedModel tm{cfg, LatentMatrix::random_init(X.rows(), cfg.latent_t, v_rng),
                  MlpModel(Topology{cfg.latent_t, cfg.hidden, X.cols()}),
                  std::vector<std::vector<EpochRecord>>(3)};

  if (phase1) {
    // Temporary no-hidden-layer perceptron; only V survives this phase.
    MlpModel temp = MlpModel::random_init(Topology{cfg.latent_t, {}, X.cols()}, t_rng);
    run_phase(X, temp, tm.V, cfg, true, true, perm_rng, &tm.history[0], 1, progress);
  }

  tm.model = MlpModel::random_init(Topology{cfg.latent_t, cfg.hidden, X.cols()}, w_rng);
  if (phase2) run_phase(X, tm.model, tm.V, cfg, false, true, perm_rng, &tm.history[1], 2, progress);

  run_phase(X, tm.model, tm.V, cfg, true, false, perm_rng, &tm.history[2], 3, progress);
  return tm;
}

}  // namespace

TrainedModel ubp_train(const EncodedMatrix& X, const TrainConfig& cfg, const ProgressFn& progress) {
  return train_impl(X, cfg, cfg.phase1, cfg.phase2, progress);
}

TrainedModel nlpca_train(const EncodedMatrix& X, const TrainConfig& cfg, const ProgressFn& progress) {
  return train_impl(X, cfg, false, false, progress);
}

std::vector<double> decode_row(const TrainedModel& tm, std::size_t r) {
  if (r >= tm.V.rows) throw std::invalid_argument("row index out of range");
  return tm.model.predict(tm.V.row(r));
}

LatentGrid sample_latent_grid(const TrainedModel& tm, std::pair<std::size_t, std::size_t> dims,
                              std::size_t steps, std::pair<double, double> bounds_first,
                              std::pair<double, double> bounds_second) {
  const std::size_t t = tm.V.t;
  if (t < 2) throw std::invalid_argument("latent grid needs t >= 2");
  if (dims.first == dims.second || dims.first >= t || dims.second >= t)
    throw std::invalid_argument("grid dims must be distinct latent indices");
  if (steps < 2) throw std::invalid_argument("steps must be >= 2");

  LatentGrid grid;
  grid.steps = steps;
  grid.dims = dims;
  const std::vector<double> means = tm.V.column_means();
  MlpModel::Workspace ws = tm.model.make_workspace();
  for (std::size_t a = 0; a < steps; ++a) {
    const double va = bounds_first.first +
                      (bounds_first.second - bounds_first.first) * static_cast<double>(a) /
                          static_cast<double>(steps - 1);
    for (std::size_t b = 0; b < steps; ++b) {
      const double vb = bounds_second.first +
                        (bounds_second.second - bounds_second.first) * static_cast<double>(b) /
                            static_cast<double>(steps - 1);
      std::vector<double> v = means;
      v[dims.first] = va;
      v[dims.second] = vb;
      std::vector<double> out(tm.model.outputs());
      tm.model.predict(v, out, ws);
      grid.latents.push_back(std::move(v));
      grid.outputs.push_back(std::move(out));
    }
  }
  return grid;
}

// -------- serialization --------

namespace {

nlohmann::json history_to_json(const std::vector<std::vector<EpochRecord>>& history) {
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& phase : history) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : phase)
      records.push_back({{"epoch", rec.epoch}, {"rmse", rec.rmse}, {"eta", rec.eta}});
    phases.push_back(std::move(records));
  }
  return phases;
}

std::vector<std::vector<EpochRecord>> history_from_json(const nlohmann::json& j) {
  std::vector<std::vector<EpochRecord>> history;
  for (const auto& phase : j) {
    std::vector<EpochRecord> records;
    for (const auto& rec : phase)
      records.push_back({rec.at("epoch").get<std::size_t>(), rec.at("rmse").get<double>(),
                         rec.at("eta").get<double>()});
    history.push_back(std::move(records));
  }
  return history;
}

}  // namespace

nlohmann::json TrainedModel::to_json() const {
  nlohmann::json j;
  j["config"] = config.to_json();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < V.rows; ++r) {
    auto row = V.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["V"] = std::move(rows);
  j["model"] = model.to_json();
  j["history"] = history_to_json(history);
  return j;
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  TrainConfig cfg = TrainConfig::from_json(j.at("config"));
  const auto rows = j.at("V").get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw std::invalid_argument("serialized V is empty");
  LatentMatrix V(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != V.t) throw std::invalid_argument("ragged serialized V");
    std::copy(rows[r].begin(), rows[r].end(), V.row(r).begin());
  }
  TrainedModel tm{cfg, std::move(V), MlpModel::from_json(j.at("model")),
                  history_from_json(j.at("history"))};
  return tm;
}

nlohmann::json ModelBundle::to_json() const {
  nlohmann::json j = tm.to_json();
  nlohmann::json enc;
  enc["attrs"] = schema_to_json(attrs);
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& ref : column_map) cols.push_back({{"attr", ref.attr}, {"category", ref.category}});
  enc["column_map"] = std::move(cols);
  nlohmann::json norms = nlohmann::json::array();
  for (const auto& np : norm_params) norms.push_back({{"min", np.min}, {"max", np.max}});
  enc["norm_params"] = std::move(norms);
  j["encoding"] = std::move(enc);
  return j;
}

ModelBundle ModelBundle::from_json(const nlohmann::json& j) {
  ModelBundle b{TrainedModel::from_json(j), {}, {}, {}};
  const auto& enc = j.at("encoding");
  for (const auto& item : enc.at("attrs")) {
    AttributeSpec a;
    a.name = item.value("name", "");
    const std::string kind = item.at("kind").get<std::string>();
    if (kind == "continuous") {
      a.kind = AttributeSpec::Kind::Continuous;
    } else {
      a.kind = AttributeSpec::Kind::Nominal;
      a.categories = item.at("categories").get<std::vector<std::string>>();
    }
    b.attrs.push_back(std::move(a));
  }
  for (const auto& item : enc.at("column_map"))
    b.column_map.push_back({item.at("attr").get<std::size_t>(), item.at("category").get<int>()});
  for (const auto& item : enc.at("norm_params"))
    b.norm_params.push_back({item.at("min").get<double>(), item.at("max").get<double>()});
  return b;
}

void ModelBundle::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << to_json().dump() << '\n';
}

ModelBundle ModelBundle::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file " + path + ": " + e.what());
  }
  return ModelBundle::from_json(j);
}

}  // namespace ubp
