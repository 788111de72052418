#include "loadcast/gbt.hpp"

#include "loadcast/error.hpp"

#include <algorithm>
#include <numeric>

namespace loadcast::forecasters {

namespace {

struct Split {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& grad, const GbtHyper& hyper)
      : x_(x), grad_(grad), hyper_(hyper) {}

  RegressionTree build(std::vector<Eigen::Index> rows) {
    RegressionTree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  // Squared loss: hessian is 1 per row, so H is the row count.
  double score(double g, double h) const { return g * g / (h + hyper_.reg_alpha); }

  Split best_split(const std::vector<Eigen::Index>& rows, double g_total) const {
    Split best;
    const auto n = rows.size();
    const double h_total = static_cast<double>(n);
    const auto min_leaf = static_cast<std::size_t>(hyper_.min_leaf);
    std::vector<Eigen::Index> order(rows);
    for (Eigen::Index f = 0; f < x_.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return x_(a, f) < x_(b, f); });
      double g_left = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        g_left += grad_(order[k]);
        const double v = x_(order[k], f);
        const double next = x_(order[k + 1], f);
        if (v == next) continue;
        const std::size_t n_left = k + 1;
        if (n_left < min_leaf || n - n_left < min_leaf) continue;
        const double h_left = static_cast<double>(n_left);
        const double gain = 0.5 * (score(g_left, h_left) + score(g_total - g_left, h_total - h_left) -
                                   score(g_total, h_total)) -
                            hyper_.reg_gamma;
        if (gain > best.gain) best = {gain, static_cast<int>(f), 0.5 * (v + next)};
      }
    }
    return best;
  }

  int grow(RegressionTree& tree, std::vector<Eigen::Index> rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double g = 0.0;
    for (Eigen::Index r : rows) g += grad_(r);
    const double h = static_cast<double>(rows.size());
    tree.nodes[id].weight = -g / (h + hyper_.reg_alpha);
    if (depth >= hyper_.max_depth) return id;

    const Split split = best_split(rows, g);
    if (split.feature < 0) return id;
    std::vector<Eigen::Index> left;
    std::vector<Eigen::Index> right;
    for (Eigen::Index r : rows) (x_(r, split.feature) < split.threshold ? left : right).push_back(r);
    tree.nodes[id].feature = split.feature;
    tree.nodes[id].threshold = split.threshold;
    const int l = grow(tree, std::move(left), depth + 1);
    tree.nodes[id].left = l;
    const int r = grow(tree, std::move(right), depth + 1);
    tree.nodes[id].right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& grad_;
  const GbtHyper& hyper_;
};

}  // namespace

double RegressionTree::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  int id = 0;
  while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(id)];
    id = x(node.feature) < node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(id)].weight;
}

int RegressionTree::leaf_count() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
}

double GbtModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.predict(x);
  return base_score + learning_rate * sum;
}

GbtModel fit_boosting(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbtHyper& hyper,
                      const std::function<void(const GbtModel&)>& after_round) {
  if (hyper.n_rounds < 1 || hyper.max_depth < 1 || hyper.min_leaf < 1) {
    throw Error(ErrorCategory::forecaster, "gbt: n_rounds, max_depth and min_leaf must be positive");
  }
  if (!(hyper.learning_rate > 0.0 && hyper.learning_rate <= 1.0) || hyper.reg_alpha < 0.0 ||
      hyper.reg_gamma < 0.0) {
    throw Error(ErrorCategory::forecaster, "gbt: need 0 < learning_rate <= 1 and non-negative penalties");
  }
  const Eigen::Index n = y.size();
  if (n < 2 * hyper.min_leaf) throw Error(ErrorCategory::forecaster, "gbt: fewer than 2 * min_leaf training rows");

  GbtModel model;
  model.learning_rate = hyper.learning_rate;
  model.base_score = y.mean();
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(n, model.base_score);
  const auto loss = [&] { return (pred - y).squaredNorm() / static_cast<double>(n); };
  model.train_loss.push_back(loss());

  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  for (int round = 1; round <= hyper.n_rounds; ++round) {
    const double before = model.train_loss.back();
    if (before == 0.0) break;
    const Eigen::VectorXd grad = pred - y;
    RegressionTree tree = TreeBuilder(x, grad, hyper).build(all);
    if (tree.is_single_leaf()) {
      if (round == 1) {
        throw Error(ErrorCategory::forecaster, "gbt: no admissible split in round 1 (degenerate features)");
      }
      break;
    }
    for (Eigen::Index i = 0; i < n; ++i) pred(i) += hyper.learning_rate * tree.predict(x.row(i).transpose());
    model.trees.push_back(std::move(tree));
    model.train_loss.push_back(loss());
    if (after_round) after_round(model);
    if (before - model.train_loss.back() < hyper.tol * before) break;
  }
  return model;
}

GbtForecaster::GbtForecaster(std::string name, LagDesign design, GbtHyper hyper, GbtModel model,
                             std::vector<double> round_errors)
    : TrainedForecaster(std::move(name), "gbt", std::move(round_errors)),
      design_(std::move(design)),
      hyper_(std::move(hyper)),
      model_(std::move(model)) {}

double GbtForecaster::predict(const Eigen::MatrixXd& data, Eigen::Index t) const {
  if (t < design_.first_row()) throw Error(ErrorCategory::forecaster, name() + ": not enough history");
  return design_.to_level(data, t, model_.predict(design_.regressors(data, t)));
}

nlohmann::json GbtForecaster::hyper_json() const {
  return {{"n_rounds", hyper_.n_rounds},       {"max_depth", hyper_.max_depth},
          {"min_leaf", hyper_.min_leaf},       {"reg_alpha", hyper_.reg_alpha},
          {"reg_gamma", hyper_.reg_gamma},     {"learning_rate", hyper_.learning_rate},
          {"tol", hyper_.tol},                 {"lags", hyper_.lags},
          {"difference_lag", hyper_.difference_lag}};
}

nlohmann::json GbtForecaster::parameters_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model_.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
                       {"right", n.right}, {"weight", n.weight}});
    }
    trees.push_back(std::move(nodes));
  }
  return {{"base_score", model_.base_score},
          {"learning_rate", model_.learning_rate},
          {"features", design_.features},
          {"train_loss", model_.train_loss},
          {"trees", std::move(trees)}};
}

ForecasterPtr fit_gbt(const ForecastTask& task, const Eigen::MatrixXd& data, const GbtHyper& hyper,
                      std::string name) {
  task.validate(data.rows(), data.cols());
  if (hyper.lags.empty() || *std::min_element(hyper.lags.begin(), hyper.lags.end()) < 1 ||
      hyper.difference_lag < 0) {
    throw Error(ErrorCategory::forecaster, name + ": lags must be positive");
  }
  LagDesign design{task.target, hyper.lags, hyper.difference_lag, task.features};
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  design.build(data, task.train, x, y);
  if (task.validation.begin < design.first_row()) {
    throw Error(ErrorCategory::forecaster, name + ": validation starts before the lag window is filled");
  }

  Eigen::MatrixXd x_val;
  Eigen::VectorXd y_val;
  design.build(data, task.validation, x_val, y_val);
  std::vector<double> actual(static_cast<std::size_t>(x_val.rows()));
  for (Eigen::Index r = 0; r < x_val.rows(); ++r) actual[static_cast<std::size_t>(r)] = data(task.validation.begin + r, task.target);

  const auto validation_mape = [&](const GbtModel& model) {
    std::vector<double> predicted(actual.size());
    for (Eigen::Index r = 0; r < x_val.rows(); ++r) {
      predicted[static_cast<std::size_t>(r)] =
          design.to_level(data, task.validation.begin + r, model.predict(x_val.row(r).transpose()));
    }
    return evaluation::mape(actual, predicted);
  };

  std::vector<double> errors;
  GbtModel model = fit_boosting(x, y, hyper, [&](const GbtModel& m) { errors.push_back(validation_mape(m)); });
  if (errors.empty()) errors.push_back(validation_mape(model));
  return std::make_shared<GbtForecaster>(std::move(name), std::move(design), hyper, std::move(model),
                                         pad_round_errors(std::move(errors)));
}

}  // namespace loadcast::forecasters
