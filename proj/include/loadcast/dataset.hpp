#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace loadcast::dataset {

enum class ColumnKind { continuous, ordinal };

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// A panel of m time steps (rows) by q variables (columns) with a per-cell
/// observation mask. Cell values are meaningful only where mask(i, j) is true.
struct ObservationMatrix {
  Eigen::MatrixXd values;
  BoolMatrix mask;  // true = observed
  std::vector<ColumnKind> column_kinds;
  std::vector<std::string> column_names;
  std::vector<std::string> time_index;  // ISO-8601, strictly increasing
  // Declared level set per ordinal column (empty for continuous columns).
  std::vector<std::vector<double>> ordinal_levels;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  Eigen::Index observed_count() const { return mask.count(); }
  Eigen::Index column_index(const std::string& name) const;

  /// Throws Error(data) when shapes or invariants do not hold.
  void validate() const;

  /// Builds a fully observed all-continuous matrix with monthly timestamps.
  static ObservationMatrix from_values(Eigen::MatrixXd values,
                                       std::vector<std::string> names = {},
                                       std::string first_month = "2013-01-01");
};

bool operator==(const ObservationMatrix& a, const ObservationMatrix& b);

struct MaskRecord {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> erased_cells;  // row-major sorted
  std::uint64_t seed = 0;
  double fraction = 0.0;
  // Values the erased cells held before masking, aligned with erased_cells.
  std::vector<double> original_values;
};

nlohmann::json to_json(const MaskRecord& record);
MaskRecord mask_record_from_json(const nlohmann::json& j);

/// Column declaration for CSV ingestion. Columns not listed in `ordinal` are
/// continuous. When `columns` is non-empty the header must match it exactly.
struct Schema {
  std::vector<std::string> columns;
  std::map<std::string, std::vector<double>> ordinal;
  std::vector<std::string> missing_tokens{"", "NA"};
};

ObservationMatrix load_csv(const std::filesystem::path& path, const Schema& schema = {});
void save_csv(const ObservationMatrix& matrix, const std::filesystem::path& path);
std::string to_csv(const ObservationMatrix& matrix);
ObservationMatrix parse_csv(const std::string& text, const Schema& schema = {},
                            const std::string& source_name = "<memory>");

/// Erases round(fraction * observed) observed cells chosen uniformly without
/// replacement. Deterministic in (matrix, fraction, seed).
std::pair<ObservationMatrix, MaskRecord> apply_mask(const ObservationMatrix& matrix,
                                                    double fraction, std::uint64_t seed);

// Marginal families for the copula sampler.
struct NormalMarginal {
  double mean = 0.0;
  double sd = 1.0;
};
struct UniformMarginal {
  double low = 0.0;
  double high = 1.0;
};
struct ExponentialMarginal {
  double rate = 1.0;
};
struct LogNormalMarginal {
  double log_mean = 0.0;
  double log_sd = 1.0;
};
/// Levels 1..k with the given probabilities (must sum to 1).
struct OrdinalMarginal {
  std::vector<double> probabilities;
};
using MarginalSpec = std::variant<NormalMarginal, UniformMarginal, ExponentialMarginal,
                                  LogNormalMarginal, OrdinalMarginal>;

/// Draws n rows z ~ N(0, sigma) and pushes each coordinate through its
/// marginal's quantile function.
ObservationMatrix gen_copula_sample(const Eigen::MatrixXd& sigma,
                                    const std::vector<MarginalSpec>& marginals, Eigen::Index n,
                                    std::uint64_t seed);

struct SeasonalLoadParams {
  int n_periods = 108;
  double base = 100.0;
  double trend = 0.5;
  double seasonal_amp = 20.0;
  double noise_sd = 2.0;
  int n_features = 12;
  std::uint64_t seed = 0;
  std::string first_month = "2013-01-01";
};

/// Noise-free target signal at (possibly negative) period t.
double seasonal_signal(const SeasonalLoadParams& params, double t);

/// Target column "load" plus n_features correlated feature columns.
ObservationMatrix gen_seasonal_load(const SeasonalLoadParams& params);

/// Monthly ISO dates starting at `first` (YYYY-MM-DD).
std::vector<std::string> monthly_index(const std::string& first, Eigen::Index n);

}  // namespace loadcast::dataset
