#pragma once

#include "loadcast/forecaster.hpp"

#include <cstdint>

namespace loadcast::forecasters {

/// F(s) = sum_i f(i) x(s - dilation * i), zero for indices before the start.
std::vector<double> dilated_causal_conv(const std::vector<double>& x, const std::vector<double>& f,
                                        int dilation);

struct TcnHyper {
  int epochs = 300;
  double learn_rate = 0.01;
  int channels = 8;
  int kernel = 3;
  std::vector<int> dilations{1, 2};
  int difference_lag = 12;
  std::uint64_t seed = 0;
};

/// Stack of dilated causal convolutions with tanh activations and a linear
/// readout. Output at position s is the prediction for position s + 1.
class TcnNetwork {
 public:
  TcnNetwork(int channels, int kernel, std::vector<int> dilations);

  int receptive_field() const;
  Eigen::Index parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);
  void initialize(std::uint64_t seed);

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  /// Mean squared one-step error over positions rf-1 .. n-2.
  double loss(const Eigen::VectorXd& x) const;
  double loss_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

  nlohmann::json to_json() const;

 private:
  struct Layer {
    int in = 1;
    int dilation = 1;
    // weights[i] is channels x in, applied to input at s - dilation * i
    std::vector<Eigen::MatrixXd> weights;
    Eigen::VectorXd bias;
  };

  // activations[l] is channels x n, activations[0] the input row
  std::vector<Eigen::MatrixXd> activations(const Eigen::VectorXd& x) const;

  int channels_;
  int kernel_;
  std::vector<Layer> layers_;
  Eigen::VectorXd head_;
  double head_bias_ = 0.0;
};

class TcnForecaster final : public TrainedForecaster {
 public:
  TcnForecaster(std::string name, Eigen::Index target, TcnHyper hyper, TcnNetwork net, double mean,
                double scale, std::vector<double> round_errors);

  double predict(const Eigen::MatrixXd& data, Eigen::Index t) const override;

 private:
  nlohmann::json hyper_json() const override;
  nlohmann::json parameters_json() const override;

  Eigen::Index target_;
  TcnHyper hyper_;
  TcnNetwork net_;
  double mean_;
  double scale_;
};

ForecasterPtr fit_tcn(const ForecastTask& task, const Eigen::MatrixXd& data, const TcnHyper& hyper = {},
                      std::string name = "tcn");

}  // namespace loadcast::forecasters
