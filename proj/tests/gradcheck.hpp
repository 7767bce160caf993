#ifndef FORMCAST_TESTS_GRADCHECK_HPP
#define FORMCAST_TESTS_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "formcast/autodiff.hpp"
#include "formcast/ops.hpp"

namespace formcast::testing {

using VarD = nn::Var<double>;
using TensorD = nn::Tensor<double>;

inline TensorD random_tensor(const nn::Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  TensorD t(shape);
  for (nn::Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

/// Central-difference check of d loss / d input for every input, where loss is
/// the mean squared distance of f(inputs) to a fixed random target. At most
/// `max_coords` coordinates per input are probed. Returns the worst
/// norm-relative error over inputs.
inline double gradcheck(const std::function<VarD(const std::vector<VarD>&)>& f, const std::vector<TensorD>& inputs,
                        std::uint64_t seed, double h = 1e-3, int max_coords = 48) {
  std::mt19937_64 rng(seed);
  std::vector<VarD> params;
  for (const auto& t : inputs) params.push_back(VarD::parameter(t));
  const VarD out = f(params);
  const VarD target = VarD::constant(random_tensor(out.shape(), rng));
  const VarD loss = nn::mse_loss(out, target);
  nn::backward(loss);

  const auto eval = [&](const std::vector<TensorD>& values) {
    nn::NoGradGuard guard;
    std::vector<VarD> vs;
    for (const auto& t : values) vs.push_back(VarD::constant(t));
    return nn::mse_loss(f(vs), target).value()[0];
  };

  double worst = 0.0;
  std::vector<TensorD> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<nn::Index> coords(static_cast<std::size_t>(inputs[k].size()));
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = static_cast<nn::Index>(i);
    std::shuffle(coords.begin(), coords.end(), rng);
    if (coords.size() > static_cast<std::size_t>(max_coords)) coords.resize(static_cast<std::size_t>(max_coords));
    double diff = 0.0, norm_a = 0.0, norm_fd = 0.0;
    for (const nn::Index i : coords) {
      const double x0 = probe[k][i];
      probe[k][i] = x0 + h;
      const double lp = eval(probe);
      probe[k][i] = x0 - h;
      const double lm = eval(probe);
      probe[k][i] = x0;
      const double fd = (lp - lm) / (2 * h);
      const double a = params[k].grad().empty() ? 0.0 : params[k].grad()[i];
      diff += (a - fd) * (a - fd);
      norm_a += a * a;
      norm_fd += fd * fd;
    }
    const double scale = std::max({std::sqrt(norm_a), std::sqrt(norm_fd), 1e-12});
    worst = std::max(worst, std::sqrt(diff) / scale);
  }
  return worst;
}

/// Moves entries within `margin` of zero away from it, so piecewise-linear
/// kinks stay outside the finite-difference stencil.
inline TensorD away_from_zero(TensorD t, double margin = 0.05) {
  for (nn::Index i = 0; i < t.size(); ++i) {
    if (std::abs(t[i]) < margin) t[i] = t[i] < 0 ? t[i] - margin : t[i] + margin;
  }
  return t;
}

}  // namespace formcast::testing

#endif  // FORMCAST_TESTS_GRADCHECK_HPP
