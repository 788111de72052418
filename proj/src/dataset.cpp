#include "loadcast/dataset.hpp"

#include "loadcast/error.hpp"
#include "loadcast/format.hpp"
#include "loadcast/normal.hpp"
#include "loadcast/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace loadcast::dataset {

namespace {

[[noreturn]] void data_error(const std::string& message) {
  throw Error(ErrorCategory::data, message);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

bool parse_double(const std::string& token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

Eigen::Index ObservationMatrix::column_index(const std::string& name) const {
  const auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) data_error("unknown column '" + name + "'");
  return static_cast<Eigen::Index>(it - column_names.begin());
}

void ObservationMatrix::validate() const {
  const auto m = rows();
  const auto q = cols();
  if (m < 1 || q < 1) data_error("matrix must have at least one row and one column");
  if (mask.rows() != m || mask.cols() != q) data_error("mask shape does not match values");
  const auto uq = static_cast<std::size_t>(q);
  if (column_kinds.size() != uq || column_names.size() != uq || ordinal_levels.size() != uq) {
    data_error("column metadata does not match column count");
  }
  if (time_index.size() != static_cast<std::size_t>(m)) {
    data_error("time index length does not match row count");
  }
  for (std::size_t i = 1; i < time_index.size(); ++i) {
    if (!(time_index[i - 1] < time_index[i])) {
      data_error("time index not strictly increasing at row " + std::to_string(i));
    }
  }
  for (Eigen::Index j = 0; j < q; ++j) {
    if (column_kinds[j] != ColumnKind::ordinal) continue;
    const auto& levels = ordinal_levels[j];
    if (levels.empty()) data_error("ordinal column '" + column_names[j] + "' has no levels");
    for (Eigen::Index i = 0; i < m; ++i) {
      if (mask(i, j) && std::find(levels.begin(), levels.end(), values(i, j)) == levels.end()) {
        data_error("ordinal column '" + column_names[j] + "' holds undeclared level at row " +
                   std::to_string(i));
      }
    }
  }
}

ObservationMatrix ObservationMatrix::from_values(Eigen::MatrixXd values,
                                                 std::vector<std::string> names,
                                                 std::string first_month) {
  ObservationMatrix out;
  const auto q = values.cols();
  if (names.empty()) {
    for (Eigen::Index j = 0; j < q; ++j) names.push_back("x" + std::to_string(j + 1));
  }
  out.time_index = monthly_index(first_month, values.rows());
  out.mask = BoolMatrix::Constant(values.rows(), q, true);
  out.values = std::move(values);
  out.column_names = std::move(names);
  out.column_kinds.assign(q, ColumnKind::continuous);
  out.ordinal_levels.assign(q, {});
  return out;
}

bool operator==(const ObservationMatrix& a, const ObservationMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if ((a.mask != b.mask).any()) return false;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a.mask(i, j) && a.values(i, j) != b.values(i, j)) return false;
    }
  }
  return a.column_kinds == b.column_kinds && a.column_names == b.column_names &&
         a.time_index == b.time_index && a.ordinal_levels == b.ordinal_levels;
}

nlohmann::json to_json(const MaskRecord& record) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [r, c] : record.erased_cells) cells.push_back({r, c});
  return {{"seed", record.seed}, {"fraction", record.fraction}, {"cells", cells}};
}

MaskRecord mask_record_from_json(const nlohmann::json& j) {
  MaskRecord record;
  record.seed = j.at("seed").get<std::uint64_t>();
  record.fraction = j.at("fraction").get<double>();
  for (const auto& cell : j.at("cells")) {
    record.erased_cells.emplace_back(cell.at(0).get<Eigen::Index>(), cell.at(1).get<Eigen::Index>());
  }
  return record;
}

ObservationMatrix parse_csv(const std::string& text, const Schema& schema,
                            const std::string& source_name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_line(line);
      break;
    }
  }
  if (header.empty()) data_error(source_name + ": empty file");
  if (header.size() < 2) data_error(source_name + ": need a timestamp column and at least one value column");
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  std::vector<std::string> names(header.begin() + 1, header.end());
  if (!schema.columns.empty() && schema.columns != names) {
    data_error(source_name + ": header does not match declared schema columns");
  }
  for (const auto& [name, levels] : schema.ordinal) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      data_error(source_name + ": ordinal column '" + name + "' not in header");
    }
    if (levels.empty()) data_error(source_name + ": ordinal column '" + name + "' declares no levels");
  }

  const std::size_t q = names.size();
  std::vector<ColumnKind> kinds(q, ColumnKind::continuous);
  std::vector<std::vector<double>> levels(q);
  for (std::size_t j = 0; j < q; ++j) {
    if (auto it = schema.ordinal.find(names[j]); it != schema.ordinal.end()) {
      kinds[j] = ColumnKind::ordinal;
      levels[j] = it->second;
    }
  }

  std::vector<std::string> stamps;
  std::vector<double> flat;
  std::vector<bool> observed;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != q + 1) {
      data_error(source_name + ":" + std::to_string(line_no) + ": expected " +
                 std::to_string(q + 1) + " fields, found " + std::to_string(fields.size()));
    }
    stamps.push_back(fields[0]);
    for (std::size_t j = 0; j < q; ++j) {
      const std::string& token = fields[j + 1];
      const bool missing = std::find(schema.missing_tokens.begin(), schema.missing_tokens.end(),
                                     token) != schema.missing_tokens.end();
      if (missing) {
        flat.push_back(0.0);
        observed.push_back(false);
        continue;
      }
      double v = 0.0;
      if (!parse_double(token, v)) {
        data_error(source_name + ":" + std::to_string(line_no) + ": non-numeric token '" + token +
                   "' in column '" + names[j] + "'");
      }
      if (kinds[j] == ColumnKind::ordinal &&
          std::find(levels[j].begin(), levels[j].end(), v) == levels[j].end()) {
        data_error(source_name + ":" + std::to_string(line_no) + ": value '" + token +
                   "' outside the level set of ordinal column '" + names[j] + "'");
      }
      flat.push_back(v);
      observed.push_back(true);
    }
  }
  if (stamps.empty()) data_error(source_name + ": no data rows");

  ObservationMatrix out;
  const auto m = static_cast<Eigen::Index>(stamps.size());
  out.values.resize(m, static_cast<Eigen::Index>(q));
  out.mask.resize(m, static_cast<Eigen::Index>(q));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(q); ++j) {
      const auto k = static_cast<std::size_t>(i) * q + static_cast<std::size_t>(j);
      out.values(i, j) = flat[k];
      out.mask(i, j) = observed[k];
    }
  }
  out.column_kinds = std::move(kinds);
  out.column_names = std::move(names);
  out.ordinal_levels = std::move(levels);
  out.time_index = std::move(stamps);
  out.validate();
  return out;
}

ObservationMatrix load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), schema, path.string());
}

std::string to_csv(const ObservationMatrix& matrix) {
  std::string out = "date";
  for (const auto& name : matrix.column_names) out += "," + name;
  out += "\n";
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    out += matrix.time_index[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      out += ",";
      if (matrix.mask(i, j)) out += format_number(matrix.values(i, j));
    }
    out += "\n";
  }
  return out;
}

void save_csv(const ObservationMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << to_csv(matrix);
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

std::pair<ObservationMatrix, MaskRecord> apply_mask(const ObservationMatrix& matrix,
                                                    double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    data_error("mask fraction must lie in [0, 1]");
  }
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (matrix.mask(i, j)) cells.emplace_back(i, j);
    }
  }
  if (cells.empty()) data_error("cannot mask a matrix without observed cells");

  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(cells.size())));
  // Partial Fisher-Yates: the first `count` slots become a uniform sample.
  Rng rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, cells.size() - 1);
    std::swap(cells[k], cells[pick(rng)]);
  }
  cells.resize(count);
  std::sort(cells.begin(), cells.end());

  MaskRecord record;
  record.seed = seed;
  record.fraction = fraction;
  ObservationMatrix out = matrix;
  for (const auto& [r, c] : cells) {
    record.original_values.push_back(matrix.values(r, c));
    out.mask(r, c) = false;
    out.values(r, c) = 0.0;
  }
  record.erased_cells = std::move(cells);
  return {std::move(out), std::move(record)};
}

std::vector<std::string> monthly_index(const std::string& first, Eigen::Index n) {
  int year = 0, month = 0, day = 0;
  if (std::sscanf(first.c_str(), "%d-%d-%d", &year, &month, &day) != 3 || month < 1 ||
      month > 12 || day < 1 || day > 28) {
    data_error("bad monthly start date '" + first + "' (expected YYYY-MM-DD, day <= 28)");
  }
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) {
    const int months = (month - 1) + static_cast<int>(t);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year + months / 12, months % 12 + 1, day);
    out.emplace_back(buf);
  }
  return out;
}

namespace {

double marginal_quantile(const MarginalSpec& spec, double z) {
  return std::visit(
      [z](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NormalMarginal>) {
          return m.mean + m.sd * z;
        } else if constexpr (std::is_same_v<T, UniformMarginal>) {
          return m.low + (m.high - m.low) * normal::cdf(z);
        } else if constexpr (std::is_same_v<T, ExponentialMarginal>) {
          // -log(1 - u) with 1 - u = sf(z) keeps the upper tail accurate
          return -std::log(normal::sf(z)) / m.rate;
        } else if constexpr (std::is_same_v<T, LogNormalMarginal>) {
          return std::exp(m.log_mean + m.log_sd * z);
        } else {
          const double u = normal::cdf(z);
          double cumulative = 0.0;
          for (std::size_t k = 0; k < m.probabilities.size(); ++k) {
            cumulative += m.probabilities[k];
            if (u <= cumulative) return static_cast<double>(k + 1);
          }
          return static_cast<double>(m.probabilities.size());
        }
      },
      spec);
}

}  // namespace

ObservationMatrix gen_copula_sample(const Eigen::MatrixXd& sigma,
                                    const std::vector<MarginalSpec>& marginals, Eigen::Index n,
                                    std::uint64_t seed) {
  const auto q = sigma.rows();
  if (q < 1 || sigma.cols() != q) data_error("sigma must be a non-empty square matrix");
  if (static_cast<Eigen::Index>(marginals.size()) != q) data_error("need one marginal per column");
  if (n < 1) data_error("sample size must be at least 1");
  if (!sigma.isApprox(sigma.transpose(), 1e-12)) data_error("sigma is not symmetric");
  for (Eigen::Index j = 0; j < q; ++j) {
    if (std::abs(sigma(j, j) - 1.0) > 1e-12) data_error("sigma diagonal must be all 1");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) data_error("sigma is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();

  for (const auto& spec : marginals) {
    if (const auto* ord = std::get_if<OrdinalMarginal>(&spec)) {
      const double total = std::accumulate(ord->probabilities.begin(), ord->probabilities.end(), 0.0);
      if (ord->probabilities.size() < 2 || std::abs(total - 1.0) > 1e-9) {
        data_error("ordinal marginal needs >= 2 levels with probabilities summing to 1");
      }
    }
  }

  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd values(n, q);
  Eigen::VectorXd e(q);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) e(j) = gauss(rng);
    const Eigen::VectorXd z = chol * e;
    for (Eigen::Index j = 0; j < q; ++j) values(i, j) = marginal_quantile(marginals[j], z(j));
  }

  ObservationMatrix out = ObservationMatrix::from_values(std::move(values), {}, "2000-01-01");
  for (Eigen::Index j = 0; j < q; ++j) {
    if (const auto* ord = std::get_if<OrdinalMarginal>(&marginals[j])) {
      out.column_kinds[j] = ColumnKind::ordinal;
      for (std::size_t k = 1; k <= ord->probabilities.size(); ++k) {
        out.ordinal_levels[j].push_back(static_cast<double>(k));
      }
    }
  }
  return out;
}

double seasonal_signal(const SeasonalLoadParams& p, double t) {
  return p.base + p.trend * t + p.seasonal_amp * std::sin(2.0 * std::numbers::pi * t / 12.0);
}

ObservationMatrix gen_seasonal_load(const SeasonalLoadParams& p) {
  if (p.n_periods < 24) data_error("n_periods must be at least 24");
  if (p.n_features < 1) data_error("n_features must be at least 1");
  if (!(p.noise_sd >= 0.0)) data_error("noise_sd must be non-negative");

  const Eigen::Index m = p.n_periods;
  const Eigen::Index q = 1 + p.n_features;
  Rng rng(p.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd values(m, q);
  for (Eigen::Index t = 0; t < m; ++t) {
    values(t, 0) = seasonal_signal(p, static_cast<double>(t)) + p.noise_sd * gauss(rng);
  }

  std::vector<std::string> names{"load"};
  for (int f = 0; f < p.n_features; ++f) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "feature_%02d", f + 1);
    names.emplace_back(buf);
    const int group = f / 4;
    const double feature_sd = p.noise_sd * (0.5 + 0.25 * (f % 3));
    for (Eigen::Index t = 0; t < m; ++t) {
      const double td = static_cast<double>(t);
      double v = 0.0;
      switch (f % 4) {
        case 0:  // short-lag scaled copy of the load signal
          v = (0.5 + 0.1 * group) * seasonal_signal(p, td - (1 + group));
          break;
        case 1:  // temperature-like seasonal driver, phase-shifted
          v = 15.0 + 10.0 * std::cos(2.0 * std::numbers::pi * (td - group) / 12.0);
          break;
        case 2:  // slow economic index following the trend
          v = 50.0 + 2.0 * p.trend * td + 0.5 * group * std::sqrt(td + 1.0);
          break;
        default:  // same month of the previous year
          v = 0.8 * seasonal_signal(p, td - 12.0) + 5.0 * group;
          break;
      }
      values(t, f + 1) = v + feature_sd * gauss(rng);
    }
  }
  return ObservationMatrix::from_values(std::move(values), std::move(names), p.first_month);
}

}  // namespace loadcast::dataset
