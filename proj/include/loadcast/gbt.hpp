#pragma once

#include "loadcast/forecaster.hpp"

#include <functional>

namespace loadcast::forecasters {

struct GbtHyper {
  int n_rounds = 100;
  int max_depth = 3;
  int min_leaf = 3;
  double reg_alpha = 1.0;  // L2 penalty on leaf weights
  double reg_gamma = 0.0;  // penalty per leaf
  double learning_rate = 0.1;
  // Stop once a round improves the training loss by less than this fraction.
  double tol = 1e-6;
  std::vector<int> lags{1, 2, 3, 12};
  int difference_lag = 12;
};

/// Axis-aligned binary regression tree; leaves carry weights.
struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double weight = 0.0;
  };
  std::vector<Node> nodes;

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int leaf_count() const;
  bool is_single_leaf() const { return nodes.size() == 1; }
};

struct GbtModel {
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;
  double base_score = 0.0;
  // Mean squared training error before any tree, then after each round.
  std::vector<double> train_loss;

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Second-order boosting on squared loss with an exact greedy split search.
/// `after_round` runs after each accepted tree.
GbtModel fit_boosting(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbtHyper& hyper,
                      const std::function<void(const GbtModel&)>& after_round = {});

class GbtForecaster final : public TrainedForecaster {
 public:
  GbtForecaster(std::string name, LagDesign design, GbtHyper hyper, GbtModel model,
                std::vector<double> round_errors);

  double predict(const Eigen::MatrixXd& data, Eigen::Index t) const override;
  const GbtModel& model() const { return model_; }

 private:
  nlohmann::json hyper_json() const override;
  nlohmann::json parameters_json() const override;

  LagDesign design_;
  GbtHyper hyper_;
  GbtModel model_;
};

ForecasterPtr fit_gbt(const ForecastTask& task, const Eigen::MatrixXd& data, const GbtHyper& hyper = {},
                      std::string name = "gbt");

}  // namespace loadcast::forecasters
