#pragma once

// Gaussian-process regression with a zero prior mean and a squared-exponential
// kernel. Observations are added one at a time; the Cholesky factor of
// K + noise * I is grown by bordering, so each update costs O(n^2).

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "adtest/errors.hpp"
#include "json.hpp"

namespace adtest {

struct SquaredExponential {
  double signal_variance = 1.0;
  Eigen::VectorXd lengthscales;  // one per input dimension

  void validate() const {
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
      throw std::invalid_argument("kernel signal variance must be positive");
    if (lengthscales.size() == 0) throw std::invalid_argument("kernel needs at least one lengthscale");
    for (double l : lengthscales)
      if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("kernel lengthscales must be positive");
  }

  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return signal_variance * std::exp(-0.5 * (a - b).cwiseQuotient(lengthscales).squaredNorm());
  }
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;

  double stddev() const { return std::sqrt(variance); }
};

class GpModel {
 public:
  // Added to a Cholesky pivot (scaled by the signal variance) only when the
  // pivot would otherwise be non-positive.
  static constexpr double kJitter = 1e-9;

  GpModel(SquaredExponential kernel, double noise_variance)
      : kernel_(std::move(kernel)), noise_variance_(noise_variance) {
    kernel_.validate();
    if (!(noise_variance_ > 0.0) || !std::isfinite(noise_variance_))
      throw std::invalid_argument("noise variance must be positive");
    inv_lengthscales_ = kernel_.lengthscales.cwiseInverse();
  }

  const SquaredExponential& kernel() const noexcept { return kernel_; }
  double noise_variance() const noexcept { return noise_variance_; }
  std::size_t size() const noexcept { return outputs_.size(); }
  Eigen::Index dim() const noexcept { return kernel_.lengthscales.size(); }
  const std::vector<Eigen::VectorXd>& inputs() const noexcept { return inputs_; }
  const std::vector<double>& outputs() const noexcept { return outputs_; }

  /// Lower Cholesky factor of K_n + noise * I.
  Eigen::MatrixXd cholesky() const { return chol_.topLeftCorner(n(), n()).triangularView<Eigen::Lower>(); }

  /// Sum over insertions of log(1 + prior variance / noise); no 1/2 factor.
  double mutual_information() const noexcept { return information_; }

  Posterior posterior(const Eigen::VectorXd& w) const {
    check_point(w);
    if (size() == 0) return {0.0, kernel_.signal_variance};
    const Eigen::VectorXd k = cross_covariance(w);
    const Eigen::VectorXd v = chol_.topLeftCorner(n(), n()).triangularView<Eigen::Lower>().solve(k);
    const double mean = k.dot(alpha_);
    const double variance = std::max(0.0, kernel_.signal_variance - v.squaredNorm());
    return {mean, variance};
  }

  /// Conditions on one more measurement in place.
  void observe(const Eigen::VectorXd& w, double y) {
    check_point(w);
    if (!std::isfinite(y)) throw std::invalid_argument("observation must be finite");

    const Eigen::Index m = n();
    Eigen::VectorXd v(m);
    if (m > 0) v = chol_.topLeftCorner(m, m).triangularView<Eigen::Lower>().solve(cross_covariance(w));
    const double vv = v.squaredNorm();
    double pivot = kernel_.signal_variance + noise_variance_ - vv;
    if (!(pivot > 0.0)) pivot += kJitter * kernel_.signal_variance;
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      std::ostringstream msg;
      msg << "Cholesky update broke down at point [" << w.transpose() << "]";
      throw GpError(msg.str());
    }
    const double diag = std::sqrt(pivot);
    const double prior_variance = std::max(0.0, kernel_.signal_variance - vv);

    reserve(m + 1);
    scaled_.col(m) = w.cwiseProduct(inv_lengthscales_);
    chol_.row(m).head(m) = v.transpose();
    chol_(m, m) = diag;
    whitened_.conservativeResize(m + 1);
    whitened_(m) = (y - (m > 0 ? v.dot(whitened_.head(m)) : 0.0)) / diag;
    alpha_ = chol_.topLeftCorner(m + 1, m + 1).triangularView<Eigen::Lower>().transpose().solve(whitened_);

    inputs_.push_back(w);
    outputs_.push_back(y);
    information_ += std::log1p(prior_variance / noise_variance_);
  }

 private:
  Eigen::Index n() const noexcept { return static_cast<Eigen::Index>(outputs_.size()); }

  void check_point(const Eigen::VectorXd& w) const {
    if (w.size() != dim())
      throw std::invalid_argument("point has dimension " + std::to_string(w.size()) + ", model expects " +
                                  std::to_string(dim()));
    if (!w.allFinite()) throw std::invalid_argument("point must be finite");
  }

  Eigen::VectorXd cross_covariance(const Eigen::VectorXd& w) const {
    const Eigen::VectorXd s = w.cwiseProduct(inv_lengthscales_);
    Eigen::VectorXd d2 = (scaled_.leftCols(n()).colwise() - s).colwise().squaredNorm().transpose();
    return kernel_.signal_variance * (-0.5 * d2.array()).exp().matrix();
  }

  void reserve(Eigen::Index count) {
    const Eigen::Index cap = chol_.rows();
    if (count <= cap) return;
    const Eigen::Index next = std::max<Eigen::Index>(count, std::max<Eigen::Index>(8, 2 * cap));
    chol_.conservativeResize(next, next);
    scaled_.conservativeResize(dim(), next);
  }

  SquaredExponential kernel_;
  double noise_variance_;
  Eigen::VectorXd inv_lengthscales_;

  std::vector<Eigen::VectorXd> inputs_;
  std::vector<double> outputs_;
  Eigen::MatrixXd scaled_;   // inputs divided by lengthscales, one column each
  Eigen::MatrixXd chol_;     // only the leading n x n lower triangle is meaningful
  Eigen::VectorXd whitened_; // L^{-1} y
  Eigen::VectorXd alpha_;    // (K + noise I)^{-1} y
  double information_ = 0.0;
};

/// Value-style update: returns the model conditioned on (w, y).
inline GpModel add_observation(GpModel model, const Eigen::VectorXd& w, double y) {
  model.observe(w, y);
  return model;
}

inline Posterior posterior(const GpModel& model, const Eigen::VectorXd& w) { return model.posterior(w); }

inline double mutual_information(const GpModel& model) { return model.mutual_information(); }

// Serialized state: hyperparameters plus data. Loading replays the data so
// the factor and the information accumulator are rebuilt exactly.
inline void to_json(nlohmann::json& j, const GpModel& model) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& w : model.inputs()) inputs.push_back(std::vector<double>(w.data(), w.data() + w.size()));
  const auto& ls = model.kernel().lengthscales;
  j = nlohmann::json{
      {"kernel",
       {{"kind", "squared-exponential"},
        {"signal_variance", model.kernel().signal_variance},
        {"lengthscales", std::vector<double>(ls.data(), ls.data() + ls.size())}}},
      {"noise_variance", model.noise_variance()},
      {"inputs", std::move(inputs)},
      {"outputs", model.outputs()},
  };
}

inline GpModel gp_model_from_json(const nlohmann::json& j) {
  const auto& k = j.at("kernel");
  if (k.at("kind").get<std::string>() != "squared-exponential")
    throw std::invalid_argument("unsupported kernel kind");
  const auto ls = k.at("lengthscales").get<std::vector<double>>();
  SquaredExponential kernel{k.at("signal_variance").get<double>(),
                            Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()))};
  GpModel model(std::move(kernel), j.at("noise_variance").get<double>());
  const auto& inputs = j.at("inputs");
  const auto outputs = j.at("outputs").get<std::vector<double>>();
  if (inputs.size() != outputs.size()) throw std::invalid_argument("inputs and outputs differ in length");
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto w = inputs[i].get<std::vector<double>>();
    model.observe(Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())), outputs[i]);
  }
  return model;
}

}  // namespace adtest
