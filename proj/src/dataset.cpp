#include "ubp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ubp/rng.hpp"

namespace ubp {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool parse_number(const std::string& token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && std::isfinite(out);
}

std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset::Dataset(std::vector<AttributeSpec> attrs, std::size_t rows)
    : attrs_(std::move(attrs)), cells_(rows * attrs_.size()), rows_(rows) {
  if (rows_ < 1 || attrs_.empty()) throw std::invalid_argument("dataset needs n >= 1 and d >= 1");
  for (const auto& a : attrs_) {
    if (a.is_nominal() && a.categories.empty())
      throw std::invalid_argument("nominal attribute '" + a.name + "' has no categories");
  }
}

std::size_t Dataset::known_count() const {
  std::size_t k = 0;
  for (const auto& c : cells_)
    if (c.known) ++k;
  return k;
}

void Dataset::refresh_observed_ranges() {
  for (std::size_t j = 0; j < cols(); ++j) {
    if (!attrs_[j].is_continuous()) continue;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows(); ++r) {
      const Cell& c = cell(r, j);
      if (!c.known) continue;
      lo = std::min(lo, c.value);
      hi = std::max(hi, c.value);
    }
    if (lo > hi) {  // no known cell in this column
      lo = 0.0;
      hi = 1.0;
    }
    attrs_[j].observed_min = lo;
    attrs_[j].observed_max = hi;
  }
}

// -------- schema --------

Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open schema file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("schema file " + path + ": " + e.what());
  }
  if (!j.is_array()) throw SchemaError("schema must be a JSON array of attributes");
  Schema schema;
  for (const auto& item : j) {
    AttributeSpec a;
    a.name = item.value("name", "c" + std::to_string(schema.size()));
    const std::string kind = item.at("kind").get<std::string>();
    if (kind == "continuous") {
      a.kind = AttributeSpec::Kind::Continuous;
    } else if (kind == "nominal") {
      a.kind = AttributeSpec::Kind::Nominal;
      a.categories = item.at("categories").get<std::vector<std::string>>();
      if (a.categories.empty()) throw SchemaError("nominal attribute '" + a.name + "' has no categories");
      std::vector<std::string> sorted = a.categories;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw SchemaError("nominal attribute '" + a.name + "' has duplicate categories");
    } else {
      throw SchemaError("unknown attribute kind '" + kind + "'");
    }
    schema.push_back(std::move(a));
  }
  if (schema.empty()) throw SchemaError("schema declares no attributes");
  return schema;
}

nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& a : schema) {
    nlohmann::json item;
    item["name"] = a.name;
    if (a.is_continuous()) {
      item["kind"] = "continuous";
    } else {
      item["kind"] = "nominal";
      item["categories"] = a.categories;
    }
    out.push_back(std::move(item));
  }
  return out;
}

// -------- CSV --------

namespace {

struct RawTable {
  std::vector<std::vector<std::string>> rows;  // includes a possible header row
  std::size_t width = 0;
};

RawTable read_rows(const std::string& text) {
  RawTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto tokens = split_line(line);
    if (t.rows.empty()) {
      t.width = tokens.size();
    } else if (tokens.size() != t.width) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.width) +
                       " fields, got " + std::to_string(tokens.size()));
    }
    t.rows.push_back(std::move(tokens));
  }
  if (t.rows.empty()) throw ParseError("empty file");
  return t;
}

bool numeric_or_missing(const std::string& tok, const std::string& missing_token) {
  if (tok == missing_token) return true;
  double v;
  return parse_number(tok, v);
}

// A first row counts as a header when some field in it is non-numeric while
// every later value in that column is numeric or missing, or when it matches
// the declared schema names exactly.
bool detect_header(const RawTable& t, const std::optional<Schema>& schema,
                   const std::string& missing_token) {
  if (t.rows.size() < 2) return false;
  if (schema && schema->size() == t.width) {
    bool all_match = true;
    for (std::size_t j = 0; j < t.width; ++j)
      if (t.rows[0][j] != (*schema)[j].name) all_match = false;
    if (all_match) return true;
  }
  for (std::size_t j = 0; j < t.width; ++j) {
    if (numeric_or_missing(t.rows[0][j], missing_token)) continue;
    bool rest_numeric = true;
    for (std::size_t r = 1; r < t.rows.size() && rest_numeric; ++r)
      rest_numeric = numeric_or_missing(t.rows[r][j], missing_token);
    if (rest_numeric) return true;
  }
  return false;
}

Schema infer_schema(const RawTable& t, std::size_t first_data_row, const std::string& missing_token,
                    const std::vector<std::string>& names) {
  Schema schema(t.width);
  for (std::size_t j = 0; j < t.width; ++j) {
    AttributeSpec& a = schema[j];
    a.name = names[j];
    a.kind = AttributeSpec::Kind::Continuous;
    for (std::size_t r = first_data_row; r < t.rows.size(); ++r) {
      const std::string& tok = t.rows[r][j];
      if (tok == missing_token) continue;
      double v;
      if (!parse_number(tok, v)) {
        a.kind = AttributeSpec::Kind::Nominal;
        break;
      }
    }
    if (a.is_nominal()) {
      for (std::size_t r = first_data_row; r < t.rows.size(); ++r) {
        const std::string& tok = t.rows[r][j];
        if (tok == missing_token) continue;
        if (std::find(a.categories.begin(), a.categories.end(), tok) == a.categories.end())
          a.categories.push_back(tok);
      }
      if (a.categories.empty()) a.kind = AttributeSpec::Kind::Continuous;  // all-missing column
    }
  }
  return schema;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::optional<Schema>& schema, const LoadOptions& opts) {
  RawTable t = read_rows(text);
  if (schema && schema->size() != t.width)
    throw SchemaError("schema declares " + std::to_string(schema->size()) + " attributes, file has " +
                      std::to_string(t.width) + " columns");

  bool header;
  switch (opts.header) {
    case LoadOptions::Header::Yes: header = true; break;
    case LoadOptions::Header::No: header = false; break;
    default: header = detect_header(t, schema, opts.missing_token); break;
  }
  const std::size_t first_data_row = header ? 1 : 0;
  if (t.rows.size() <= first_data_row) throw ParseError("no data rows");

  std::vector<std::string> names(t.width);
  for (std::size_t j = 0; j < t.width; ++j)
    names[j] = header ? t.rows[0][j] : "c" + std::to_string(j);

  Schema attrs;
  if (schema) {
    attrs = *schema;
    for (std::size_t j = 0; j < t.width; ++j)
      if (attrs[j].name.empty()) attrs[j].name = names[j];
  } else {
    attrs = infer_schema(t, first_data_row, opts.missing_token, names);
  }

  Dataset ds(attrs, t.rows.size() - first_data_row);
  ds.header_on_save = header;
  for (std::size_t r = first_data_row; r < t.rows.size(); ++r) {
    const std::size_t row = r - first_data_row;
    for (std::size_t j = 0; j < t.width; ++j) {
      const std::string& tok = t.rows[r][j];
      if (tok == opts.missing_token) {
        ds.set_cell(row, j, Cell::missing());
        continue;
      }
      const AttributeSpec& a = ds.attr(j);
      if (a.is_continuous()) {
        double v;
        if (!parse_number(tok, v))
          throw ParseError("line " + std::to_string(r + 1) + ": '" + tok +
                           "' is not numeric for continuous attribute '" + a.name + "'");
        ds.set_cell(row, j, Cell::real(v));
      } else {
        auto it = std::find(a.categories.begin(), a.categories.end(), tok);
        if (it == a.categories.end())
          throw SchemaError("line " + std::to_string(r + 1) + ": label '" + tok +
                            "' not in declared categories of attribute '" + a.name + "'");
        ds.set_cell(row, j, Cell::category(static_cast<std::size_t>(it - a.categories.begin())));
      }
    }
  }
  ds.refresh_observed_ranges();
  return ds;
}

Dataset load_csv(const std::string& path, const std::optional<Schema>& schema, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema, opts);
}

std::string to_csv(const Dataset& ds, const std::string& missing_token) {
  std::ostringstream out;
  if (ds.header_on_save) {
    for (std::size_t j = 0; j < ds.cols(); ++j) {
      if (j) out << ',';
      out << ds.attr(j).name;
    }
    out << '\n';
  }
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t j = 0; j < ds.cols(); ++j) {
      if (j) out << ',';
      const Cell& c = ds.cell(r, j);
      if (!c.known) {
        out << missing_token;
      } else if (ds.attr(j).is_continuous()) {
        out << format_number(c.value);
      } else {
        out << ds.attr(j).categories[c.category_index()];
      }
    }
    out << '\n';
  }
  return out.str();
}

void save_csv(const Dataset& ds, const std::string& path, const std::string& missing_token) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << to_csv(ds, missing_token);
}

// -------- encoding --------

EncodedMatrix::EncodedMatrix(std::size_t rows, std::vector<ColumnRef> column_map,
                             std::vector<NormParams> norm_params,
                             std::vector<std::size_t> attr_first_col)
    : rows_(rows),
      values_(rows * column_map.size(), std::numeric_limits<double>::quiet_NaN()),
      known_(rows * column_map.size(), 0),
      column_map_(std::move(column_map)),
      norm_params_(std::move(norm_params)),
      attr_first_col_(std::move(attr_first_col)) {}

void EncodedMatrix::set(std::size_t r, std::size_t c, double v, bool is_known) {
  values_[r * cols() + c] = is_known ? v : std::numeric_limits<double>::quiet_NaN();
  known_[r * cols() + c] = is_known ? 1 : 0;
}

std::size_t EncodedMatrix::known_count() const {
  std::size_t k = 0;
  for (auto b : known_)
    if (b) ++k;
  return k;
}

EncodedMatrix normalize_encode(const Dataset& ds) {
  std::vector<ColumnRef> column_map;
  std::vector<NormParams> norm_params(ds.cols());
  std::vector<std::size_t> first_col(ds.cols());
  for (std::size_t j = 0; j < ds.cols(); ++j) {
    first_col[j] = column_map.size();
    const AttributeSpec& a = ds.attr(j);
    if (a.is_continuous()) {
      norm_params[j] = {a.observed_min, a.observed_max};
      column_map.push_back({j, -1});
    } else {
      norm_params[j] = {0.0, 1.0};
      for (int m = 0; m < static_cast<int>(a.categories.size()); ++m)
        column_map.push_back({j, m});
    }
  }

  EncodedMatrix em(ds.rows(), std::move(column_map), std::move(norm_params), std::move(first_col));
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t j = 0; j < ds.cols(); ++j) {
      const Cell& c = ds.cell(r, j);
      const AttributeSpec& a = ds.attr(j);
      const std::size_t base = em.attr_first_col(j);
      if (a.is_continuous()) {
        if (!c.known) {
          em.set(r, base, 0.0, false);
        } else {
          const auto& np = em.norm_params()[j];
          const double range = np.max - np.min;
          // Constant columns map to 0.5, the least informative unit point.
          const double scaled = range > 0.0 ? (c.value - np.min) / range : 0.5;
          em.set(r, base, scaled, true);
        }
      } else {
        const std::size_t m = a.categories.size();
        for (std::size_t q = 0; q < m; ++q) {
          if (!c.known)
            em.set(r, base + q, 0.0, false);
          else
            em.set(r, base + q, q == c.category_index() ? 1.0 : 0.0, true);
        }
      }
    }
  }
  return em;
}

std::vector<Cell> decode_encoded_row(const std::vector<double>& encoded_row,
                                     const std::vector<ColumnRef>& column_map,
                                     const std::vector<NormParams>& norm_params,
                                     const std::vector<AttributeSpec>& attrs) {
  std::vector<Cell> out(attrs.size());
  std::size_t c = 0;
  while (c < column_map.size()) {
    const std::size_t j = column_map[c].attr;
    const AttributeSpec& a = attrs[j];
    if (a.is_continuous()) {
      const double clamped = std::clamp(encoded_row[c], 0.0, 1.0);
      const auto& np = norm_params[j];
      out[j] = Cell::real(np.min + clamped * (np.max - np.min));
      ++c;
    } else {
      const std::size_t m = a.categories.size();
      std::size_t best = 0;
      for (std::size_t q = 1; q < m; ++q)
        if (encoded_row[c + q] > encoded_row[c + best]) best = q;
      out[j] = Cell::category(best);
      c += m;
    }
  }
  return out;
}

Dataset decode(const std::vector<double>& predictions, const EncodedMatrix& em, const Dataset& ds) {
  if (predictions.size() != em.rows() * em.cols())
    throw std::invalid_argument("prediction grid does not match encoded shape");
  if (em.rows() != ds.rows())
    throw std::invalid_argument("encoded matrix and dataset row counts differ");

  Dataset out = ds;
  std::vector<double> row(em.cols());
  for (std::size_t r = 0; r < em.rows(); ++r) {
    std::copy(predictions.begin() + static_cast<std::ptrdiff_t>(r * em.cols()),
              predictions.begin() + static_cast<std::ptrdiff_t>((r + 1) * em.cols()), row.begin());
    std::vector<Cell> cells = decode_encoded_row(row, em.column_map(), em.norm_params(), ds.attrs());
    for (std::size_t j = 0; j < ds.cols(); ++j) {
      if (!ds.cell(r, j).known) out.set_cell(r, j, cells[j]);
    }
  }
  return out;
}

// -------- corruption --------

nlohmann::json CorruptionPlan::to_json() const {
  nlohmann::json j;
  j["u"] = u;
  j["seed"] = seed;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [r, c] : removed) cells.push_back({r, c});
  j["removed"] = std::move(cells);
  return j;
}

CorruptionPlan CorruptionPlan::from_json(const nlohmann::json& j) {
  CorruptionPlan p;
  p.u = j.at("u").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& cell : j.at("removed"))
    p.removed.emplace_back(cell.at(0).get<std::size_t>(), cell.at(1).get<std::size_t>());
  return p;
}

CorruptionPlan CorruptionPlan::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open plan file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("plan file " + path + ": " + e.what());
  }
  return from_json(j);
}

void CorruptionPlan::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << to_json().dump(2) << '\n';
}

std::pair<Dataset, CorruptionPlan> corrupt_mcar(const Dataset& ds, double u, std::uint64_t seed) {
  if (!(u > 0.0 && u < 100.0)) throw std::invalid_argument("u must lie in (0, 100)");
  const std::size_t target =
      static_cast<std::size_t>(std::llround(u / 100.0 * static_cast<double>(ds.rows() * ds.cols())));

  std::vector<std::pair<std::size_t, std::size_t>> known;
  known.reserve(ds.rows() * ds.cols());
  for (std::size_t r = 0; r < ds.rows(); ++r)
    for (std::size_t j = 0; j < ds.cols(); ++j)
      if (ds.cell(r, j).known) known.emplace_back(r, j);
  if (known.size() < target)
    throw std::invalid_argument("dataset has only " + std::to_string(known.size()) +
                                " known cells, cannot remove " + std::to_string(target));

  Rng rng(seed);
  // Partial Fisher-Yates: after i swaps the first i entries are a uniform
  // sample without replacement.
  for (std::size_t i = 0; i < target; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(known.size() - i));
    std::swap(known[i], known[j]);
  }
  known.resize(target);
  std::sort(known.begin(), known.end());

  Dataset corrupted = ds;
  for (const auto& [r, c] : known) corrupted.set_cell(r, c, Cell::missing());

  CorruptionPlan plan;
  plan.u = u;
  plan.seed = seed;
  plan.removed = std::move(known);
  return {std::move(corrupted), std::move(plan)};
}

}  // namespace ubp
