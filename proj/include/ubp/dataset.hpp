#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ubp {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One column's type: a continuous range observed over the known cells, or a
// nominal category list whose order is fixed at load time.
struct AttributeSpec {
  enum class Kind { Continuous, Nominal };

  std::string name;
  Kind kind = Kind::Continuous;
  double observed_min = 0.0;  // continuous only; (0,1) convention when no cell is known
  double observed_max = 1.0;
  std::vector<std::string> categories;  // nominal only, non-empty, distinct

  bool is_continuous() const { return kind == Kind::Continuous; }
  bool is_nominal() const { return kind == Kind::Nominal; }
};

// A single table cell. For nominal attributes `value` holds the category
// index; `known == false` means the cell is missing and `value` is garbage.
struct Cell {
  bool known = false;
  double value = 0.0;

  static Cell missing() { return {}; }
  static Cell real(double v) { return {true, v}; }
  static Cell category(std::size_t idx) { return {true, static_cast<double>(idx)}; }
  std::size_t category_index() const { return static_cast<std::size_t>(value); }
};

// n x d table of optionally-missing cells plus the per-attribute schema.
// Immutable in normal use once built; construction is single-threaded.
class Dataset {
 public:
  Dataset(std::vector<AttributeSpec> attrs, std::size_t rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return attrs_.size(); }
  const std::vector<AttributeSpec>& attrs() const { return attrs_; }
  const AttributeSpec& attr(std::size_t j) const { return attrs_[j]; }

  const Cell& cell(std::size_t r, std::size_t j) const { return cells_[r * cols() + j]; }
  void set_cell(std::size_t r, std::size_t j, Cell c) { cells_[r * cols() + j] = c; }

  std::size_t known_count() const;
  std::size_t missing_count() const { return rows() * cols() - known_count(); }

  // Recomputes continuous observed_min/max over the known cells. Columns with
  // no known cell get the (0,1) convention.
  void refresh_observed_ranges();

  bool header_on_save = true;

 private:
  std::vector<AttributeSpec> attrs_;
  std::vector<Cell> cells_;
  std::size_t rows_;
};

struct LoadOptions {
  enum class Header { Auto, Yes, No };
  Header header = Header::Auto;
  std::string missing_token = "?";
};

// Schema descriptor as read from a JSON file: attribute names/kinds without
// observed ranges (those are computed from the data).
using Schema = std::vector<AttributeSpec>;

Schema load_schema(const std::string& path);
nlohmann::json schema_to_json(const Schema& schema);

Dataset load_csv(const std::string& path, const std::optional<Schema>& schema = std::nullopt,
                 const LoadOptions& opts = {});
Dataset parse_csv(const std::string& text, const std::optional<Schema>& schema = std::nullopt,
                  const LoadOptions& opts = {});
void save_csv(const Dataset& ds, const std::string& path, const std::string& missing_token = "?");
std::string to_csv(const Dataset& ds, const std::string& missing_token = "?");

// -------- encoding --------

struct ColumnRef {
  std::size_t attr = 0;
  int category = -1;  // -1 for continuous columns
};

struct NormParams {
  double min = 0.0;
  double max = 1.0;
};

// Fully continuous n x d' view of a Dataset: continuous attributes min-max
// scaled into [0,1], nominal attributes expanded one-hot. Cells derived from
// a missing source cell are unknown and their stored value is NaN, so any
// accidental read of a missing cell poisons the result visibly.
class EncodedMatrix {
 public:
  EncodedMatrix(std::size_t rows, std::vector<ColumnRef> column_map,
                std::vector<NormParams> norm_params, std::vector<std::size_t> attr_first_col);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return column_map_.size(); }

  double value(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  bool known(std::size_t r, std::size_t c) const { return known_[r * cols() + c] != 0; }
  void set(std::size_t r, std::size_t c, double v, bool known);

  const std::vector<double>& values() const { return values_; }
  const std::vector<std::uint8_t>& known_mask() const { return known_; }
  const std::vector<ColumnRef>& column_map() const { return column_map_; }
  const std::vector<NormParams>& norm_params() const { return norm_params_; }
  std::size_t attr_first_col(std::size_t attr) const { return attr_first_col_[attr]; }

  std::size_t known_count() const;

 private:
  std::size_t rows_;
  std::vector<double> values_;
  std::vector<std::uint8_t> known_;
  std::vector<ColumnRef> column_map_;
  std::vector<NormParams> norm_params_;     // per source attribute
  std::vector<std::size_t> attr_first_col_; // source attribute -> first encoded column
};

EncodedMatrix normalize_encode(const Dataset& ds);

// Decodes a prediction grid shaped like `em` back to the source schema:
// continuous columns are clamped to [0,1] and inverse-scaled, each nominal
// attribute takes the category with the maximal predicted value (first wins
// on ties), and originally-known cells are restored verbatim from `ds`.
Dataset decode(const std::vector<double>& predictions, const EncodedMatrix& em, const Dataset& ds);

// Shared by decode() and the latent-grid generator: one encoded row -> cells.
std::vector<Cell> decode_encoded_row(const std::vector<double>& encoded_row,
                                     const std::vector<ColumnRef>& column_map,
                                     const std::vector<NormParams>& norm_params,
                                     const std::vector<AttributeSpec>& attrs);

// -------- corruption --------

struct CorruptionPlan {
  double u = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::size_t, std::size_t>> removed;  // (row, attribute)

  nlohmann::json to_json() const;
  static CorruptionPlan from_json(const nlohmann::json& j);
  static CorruptionPlan load(const std::string& path);
  void save(const std::string& path) const;
};

// Removes round(u/100 * n * d) distinct originally-known cells uniformly at
// random. Identical (ds, u, seed) gives an identical plan.
std::pair<Dataset, CorruptionPlan> corrupt_mcar(const Dataset& ds, double u, std::uint64_t seed);

}  // namespace ubp
