// Central finite-difference gradient checking used by the unit and
// acceptance suites. Lives in test code only; it is the independent oracle
// for everything autodiff computes.
#ifndef DOCIE_TESTS_GRADCHECK_HPP_
#define DOCIE_TESTS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "docie/rng.hpp"
#include "docie/tensor.hpp"

namespace gradcheck {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline docie::Tensor random_param(int rows, int cols, docie::Rng& rng,
                                  double scale = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(rows) * cols);
  for (auto& x : v) x = rng.normal() * scale;
  return docie::Tensor::param(rows, cols, std::move(v));
}

inline docie::Tensor random_tensor(int rows, int cols, docie::Rng& rng,
                                   double scale = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(rows) * cols);
  for (auto& x : v) x = rng.normal() * scale;
  return docie::Tensor::from_values(rows, cols, std::move(v));
}

// Reduces an arbitrary graph output to a scalar through fixed random
// coefficients, so every output element influences the loss.
inline docie::Tensor to_scalar(const docie::Tensor& t, docie::Rng& rng) {
  std::vector<double> coeff(t.size());
  for (auto& c : coeff) c = rng.normal();
  return docie::sum_all(
      docie::mul(t, docie::Tensor::from_values(t.rows(), t.cols(), coeff)));
}

// Worst relative error between analytic gradients of `param` and central
// finite differences of `loss_fn`, which must rebuild the graph on each call
// from the current parameter values.
inline double max_rel_err(docie::Tensor param,
                          const std::function<docie::Tensor()>& loss_fn,
                          double h = 1e-5) {
  param.zero_grad();
  docie::backward(loss_fn());
  const std::vector<double> analytic = param.grad();
  double worst = 0.0;
  auto& values = param.values_mut();
  for (int i = 0; i < param.size(); ++i) {
    const double orig = values[i];
    double up, down;
    {
      docie::NoGradGuard no_grad;
      values[i] = orig + h;
      up = loss_fn().item();
      values[i] = orig - h;
      down = loss_fn().item();
      values[i] = orig;
    }
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, rel_err(analytic[i], numeric));
  }
  return worst;
}

}  // namespace gradcheck

#endif  // DOCIE_TESTS_GRADCHECK_HPP_
