#include "loadcast/tcn.hpp"

#include "loadcast/error.hpp"
#include "loadcast/rng.hpp"

#include <algorithm>
#include <cmath>

namespace loadcast::forecasters {

std::vector<double> dilated_causal_conv(const std::vector<double>& x, const std::vector<double>& f,
                                        int dilation) {
  if (x.empty() || f.empty()) throw Error(ErrorCategory::forecaster, "dilated_causal_conv: empty kernel or series");
  if (dilation < 1) throw Error(ErrorCategory::forecaster, "dilated_causal_conv: dilation must be at least 1");
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> out(x.size(), 0.0);
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const std::ptrdiff_t k = s - dilation * static_cast<std::ptrdiff_t>(i);
      if (k < 0) break;
      acc += f[i] * x[static_cast<std::size_t>(k)];
    }
    out[static_cast<std::size_t>(s)] = acc;
  }
  return out;
}

TcnNetwork::TcnNetwork(int channels, int kernel, std::vector<int> dilations)
    : channels_(channels), kernel_(kernel) {
  if (channels < 1 || kernel < 1 || dilations.empty()) {
    throw Error(ErrorCategory::forecaster, "tcn: channels, kernel and layer count must be positive");
  }
  int in = 1;
  for (int d : dilations) {
    if (d < 1) throw Error(ErrorCategory::forecaster, "tcn: dilation must be at least 1");
    Layer layer;
    layer.in = in;
    layer.dilation = d;
    layer.weights.assign(static_cast<std::size_t>(kernel), Eigen::MatrixXd::Zero(channels, in));
    layer.bias = Eigen::VectorXd::Zero(channels);
    layers_.push_back(std::move(layer));
    in = channels;
  }
  head_ = Eigen::VectorXd::Zero(channels);
}

int TcnNetwork::receptive_field() const {
  int rf = 1;
  for (const auto& layer : layers_) rf += (kernel_ - 1) * layer.dilation;
  return rf;
}

Eigen::Index TcnNetwork::parameter_count() const {
  Eigen::Index count = 0;
  for (const auto& layer : layers_) count += kernel_ * channels_ * layer.in + channels_;
  return count + channels_ + 1;
}

Eigen::VectorXd TcnNetwork::parameters() const {
  Eigen::VectorXd theta(parameter_count());
  Eigen::Index k = 0;
  const auto put = [&](const auto& m) {
    theta.segment(k, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    k += m.size();
  };
  for (const auto& layer : layers_) {
    for (const auto& w : layer.weights) put(w);
    put(layer.bias);
  }
  put(head_);
  theta(k) = head_bias_;
  return theta;
}

void TcnNetwork::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != parameter_count()) throw Error(ErrorCategory::forecaster, "tcn: parameter vector size mismatch");
  Eigen::Index k = 0;
  const auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = theta.segment(k, m.size());
    k += m.size();
  };
  for (auto& layer : layers_) {
    for (auto& w : layer.weights) take(w);
    take(layer.bias);
  }
  take(head_);
  head_bias_ = theta(k);
}

void TcnNetwork::initialize(std::uint64_t seed) {
  Rng rng = make_rng(seed, "tcn/init");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& layer : layers_) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(kernel_ * layer.in));
    for (auto& w : layer.weights) w = w.unaryExpr([&](double) { return sd * normal(rng); });
    layer.bias.setZero();
  }
  const double sd = 1.0 / std::sqrt(static_cast<double>(channels_));
  head_ = head_.unaryExpr([&](double) { return sd * normal(rng); });
  head_bias_ = 0.0;
}

std::vector<Eigen::MatrixXd> TcnNetwork::activations(const Eigen::VectorXd& x) const {
  const Eigen::Index n = x.size();
  std::vector<Eigen::MatrixXd> h;
  h.reserve(layers_.size() + 1);
  h.push_back(x.transpose());
  for (const auto& layer : layers_) {
    const Eigen::MatrixXd& prev = h.back();
    Eigen::MatrixXd a = layer.bias.replicate(1, n);
    for (int i = 0; i < kernel_; ++i) {
      const Eigen::Index shift = static_cast<Eigen::Index>(layer.dilation) * i;
      if (shift >= n) break;
      a.rightCols(n - shift).noalias() += layer.weights[static_cast<std::size_t>(i)] * prev.leftCols(n - shift);
    }
    h.push_back(a.array().tanh().matrix());
  }
  return h;
}

Eigen::VectorXd TcnNetwork::forward(const Eigen::VectorXd& x) const {
  const auto h = activations(x);
  return (head_.transpose() * h.back()).transpose().array() + head_bias_;
}

double TcnNetwork::loss(const Eigen::VectorXd& x) const {
  const Eigen::Index first = receptive_field() - 1;
  const Eigen::Index count = x.size() - 1 - first;
  if (count < 1) throw Error(ErrorCategory::forecaster, "tcn: series not longer than the receptive field");
  const Eigen::VectorXd out = forward(x);
  return (out.segment(first, count) - x.segment(first + 1, count)).squaredNorm() / static_cast<double>(count);
}

double TcnNetwork::loss_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  const Eigen::Index n = x.size();
  const Eigen::Index first = receptive_field() - 1;
  const Eigen::Index count = n - 1 - first;
  if (count < 1) throw Error(ErrorCategory::forecaster, "tcn: series not longer than the receptive field");
  const auto h = activations(x);
  const Eigen::VectorXd out = (head_.transpose() * h.back()).transpose().array() + head_bias_;

  Eigen::RowVectorXd dout = Eigen::RowVectorXd::Zero(n);
  const Eigen::VectorXd resid = out.segment(first, count) - x.segment(first + 1, count);
  const double loss = resid.squaredNorm() / static_cast<double>(count);
  dout.segment(first, count) = (2.0 / static_cast<double>(count)) * resid.transpose();

  grad.resize(parameter_count());
  Eigen::Index tail = grad.size();
  grad(--tail) = dout.sum();
  tail -= channels_;
  grad.segment(tail, channels_) = h.back() * dout.transpose();

  Eigen::MatrixXd dh = head_ * dout;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const Eigen::MatrixXd& prev = h[l];
    const Eigen::MatrixXd da = dh.array() * (1.0 - h[l + 1].array().square());
    tail -= channels_;
    grad.segment(tail, channels_) = da.rowwise().sum();
    Eigen::MatrixXd dprev = Eigen::MatrixXd::Zero(prev.rows(), n);
    const Eigen::Index block = channels_ * layer.in;
    tail -= block * kernel_;
    for (int i = 0; i < kernel_; ++i) {
      const Eigen::Index shift = static_cast<Eigen::Index>(layer.dilation) * i;
      Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(channels_, layer.in);
      if (shift < n) {
        dw.noalias() = da.rightCols(n - shift) * prev.leftCols(n - shift).transpose();
        dprev.leftCols(n - shift).noalias() +=
            layer.weights[static_cast<std::size_t>(i)].transpose() * da.rightCols(n - shift);
      }
      grad.segment(tail + block * i, block) = Eigen::Map<const Eigen::VectorXd>(dw.data(), block);
    }
    dh = std::move(dprev);
  }
  return loss;
}

nlohmann::json TcnNetwork::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : layers_) {
    nlohmann::json kernel = nlohmann::json::array();
    for (const auto& w : layer.weights) kernel.push_back(std::vector<double>(w.data(), w.data() + w.size()));
    layers.push_back({{"dilation", layer.dilation},
                      {"in", layer.in},
                      {"kernel", std::move(kernel)},
                      {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
  }
  return {{"activation", "tanh"},
          {"receptive_field", receptive_field()},
          {"layers", std::move(layers)},
          {"head", std::vector<double>(head_.data(), head_.data() + head_.size())},
          {"head_bias", head_bias_}};
}

namespace {

// Standardized (and optionally differenced) target history over rows [begin, end).
Eigen::VectorXd scaled_history(const Eigen::MatrixXd& data, Eigen::Index target, int d, Eigen::Index begin,
                               Eigen::Index end, double mean, double scale) {
  Eigen::VectorXd z(end - begin);
  for (Eigen::Index t = begin; t < end; ++t) {
    const double u = d > 0 ? data(t, target) - data(t - d, target) : data(t, target);
    z(t - begin) = (u - mean) / scale;
  }
  return z;
}

double predict_next(const TcnNetwork& net, const Eigen::MatrixXd& data, Eigen::Index target, int d,
                    Eigen::Index t, double mean, double scale) {
  const Eigen::Index begin = std::max<Eigen::Index>(d, t - net.receptive_field());
  if (t <= begin) throw Error(ErrorCategory::forecaster, "tcn: not enough history");
  const Eigen::VectorXd z = scaled_history(data, target, d, begin, t, mean, scale);
  const double u = net.forward(z)(z.size() - 1) * scale + mean;
  return d > 0 ? data(t - d, target) + u : u;
}

}  // namespace

TcnForecaster::TcnForecaster(std::string name, Eigen::Index target, TcnHyper hyper, TcnNetwork net,
                             double mean, double scale, std::vector<double> round_errors)
    : TrainedForecaster(std::move(name), "tcn", std::move(round_errors)),
      target_(target),
      hyper_(std::move(hyper)),
      net_(std::move(net)),
      mean_(mean),
      scale_(scale) {}

double TcnForecaster::predict(const Eigen::MatrixXd& data, Eigen::Index t) const {
  return predict_next(net_, data, target_, hyper_.difference_lag, t, mean_, scale_);
}

nlohmann::json TcnForecaster::hyper_json() const {
  return {{"epochs", hyper_.epochs},       {"learn_rate", hyper_.learn_rate},
          {"channels", hyper_.channels},   {"kernel", hyper_.kernel},
          {"dilations", hyper_.dilations}, {"difference_lag", hyper_.difference_lag},
          {"seed", hyper_.seed}};
}

nlohmann::json TcnForecaster::parameters_json() const {
  nlohmann::json out = net_.to_json();
  out["mean"] = mean_;
  out["scale"] = scale_;
  return out;
}

ForecasterPtr fit_tcn(const ForecastTask& task, const Eigen::MatrixXd& data, const TcnHyper& hyper,
                      std::string name) {
  task.validate(data.rows(), data.cols());
  if (hyper.epochs < 1 || !(hyper.learn_rate > 0.0) || hyper.difference_lag < 0) {
    throw Error(ErrorCategory::forecaster, name + ": need epochs >= 1, learn_rate > 0, difference_lag >= 0");
  }
  TcnNetwork net(hyper.channels, hyper.kernel, hyper.dilations);
  const Eigen::Index d = hyper.difference_lag;
  const Eigen::Index n = task.train.end - std::max(task.train.begin, d);
  if (net.receptive_field() >= n) {
    throw Error(ErrorCategory::forecaster, name + ": receptive field " + std::to_string(net.receptive_field()) +
                                               " not shorter than the training series (" + std::to_string(n) +
                                               " points)");
  }
  const Eigen::VectorXd raw = scaled_history(data, task.target, hyper.difference_lag,
                                             task.train.end - n, task.train.end, 0.0, 1.0);
  const double mean = raw.mean();
  const double sd = std::sqrt((raw.array() - mean).square().sum() / static_cast<double>(n));
  const double scale = sd > 1e-12 ? sd : 1.0;
  const Eigen::VectorXd z = (raw.array() - mean) / scale;

  net.initialize(hyper.seed);
  Eigen::VectorXd theta = net.parameters();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  Eigen::VectorXd grad;
  std::vector<double> errors;
  errors.reserve(static_cast<std::size_t>(hyper.epochs));
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const double loss = net.loss_and_gradient(z, grad);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      throw Error(ErrorCategory::forecaster,
                  name + ": training diverged (non-finite loss) at epoch " + std::to_string(epoch) +
                      "; lower learn_rate");
    }
    m1 = beta1 * m1 + (1.0 - beta1) * grad;
    m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, epoch);
    const double c2 = 1.0 - std::pow(beta2, epoch);
    theta.array() -= hyper.learn_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
    net.set_parameters(theta);
    errors.push_back(span_mape(data, task.target, task.validation, [&](Eigen::Index t) {
      return predict_next(net, data, task.target, hyper.difference_lag, t, mean, scale);
    }));
  }
  return std::make_shared<TcnForecaster>(std::move(name), task.target, hyper, std::move(net), mean, scale,
                                         pad_round_errors(std::move(errors)));
}

}  // namespace loadcast::forecasters
