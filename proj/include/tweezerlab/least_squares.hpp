#pragma once

// Levenberg-Marquardt driver over Eigen's MINPACK port with an iteration cap.

#include <functional>

#include <unsupported/Eigen/LevenbergMarquardt>

#include "core.hpp"

namespace tweezerlab {

struct LeastSquaresOptions {
  int max_iterations = 200;
  double ftol = 1e-10;
  double xtol = 1e-12;
};

struct LeastSquaresResult {
  RVector x;
  RVector residuals;
  RMatrix jacobian;
  RMatrix covariance;  // s^2 (J^T J)^+ with s^2 = SSR / (m - n)
  double cost = 0.0;   // sum of squared residuals
  int iterations = 0;
};

using ResidualFn = std::function<void(const RVector&, RVector&)>;
using JacobianFn = std::function<void(const RVector&, RMatrix&)>;

/// Central-difference Jacobian with steps scaled to the parameter magnitude.
inline void numeric_jacobian(const ResidualFn& f, const RVector& x, Eigen::Index m, RMatrix& jac) {
  jac.resize(m, x.size());
  RVector xp = x, fp(m), fm(m);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(std::abs(x(k)), 1e-2);
    xp(k) = x(k) + h;
    f(xp, fp);
    xp(k) = x(k) - h;
    f(xp, fm);
    xp(k) = x(k);
    jac.col(k) = (fp - fm) / (2.0 * h);
  }
}

namespace detail {
struct LmFunctor : Eigen::DenseFunctor<double> {
  LmFunctor(int n, int m, ResidualFn f, JacobianFn j)
      : Eigen::DenseFunctor<double>(n, m), f_(std::move(f)), j_(std::move(j)) {}
  int operator()(const InputType& x, ValueType& fvec) const {
    RVector r(values());
    f_(x, r);
    fvec = r;
    return 0;
  }
  int df(const InputType& x, JacobianType& fjac) const {
    RMatrix jac;
    if (j_) {
      jac.resize(values(), inputs());
      j_(x, jac);
    } else {
      numeric_jacobian(f_, x, values(), jac);
    }
    fjac = jac;
    return 0;
  }
  ResidualFn f_;
  JacobianFn j_;
};
}  // namespace detail

/// Minimises |f(x)|^2 starting from x0. Throws NoConvergence when the
/// iteration cap is reached or the solver reports improper input.
inline LeastSquaresResult levenberg_marquardt(const ResidualFn& f, const RVector& x0, Eigen::Index n_residuals,
                                              const JacobianFn& jac = nullptr,
                                              const LeastSquaresOptions& opt = {}) {
  if (n_residuals < x0.size()) throw NoConvergence("fewer residuals than parameters");
  detail::LmFunctor functor(static_cast<int>(x0.size()), static_cast<int>(n_residuals), f, jac);
  Eigen::LevenbergMarquardt<detail::LmFunctor> lm(functor);
  lm.setFtol(opt.ftol);
  lm.setXtol(opt.xtol);
  lm.setMaxfev(100000);
  RVector x = x0;
  auto status = lm.minimizeInit(x);
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters)
    throw NoConvergence("improper input to the least-squares solver");
  int it = 0;
  do {
    status = lm.minimizeOneStep(x);
    ++it;
  } while (status == Eigen::LevenbergMarquardtSpace::Running && it < opt.max_iterations);
  if (status == Eigen::LevenbergMarquardtSpace::Running)
    throw NoConvergence("least-squares fit did not converge within " + std::to_string(opt.max_iterations) + " iterations");
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters)
    throw NoConvergence("least-squares solver rejected the problem");
  if (!x.allFinite()) throw NoConvergence("least-squares fit diverged");

  LeastSquaresResult res;
  res.x = x;
  res.iterations = it;
  res.residuals.resize(n_residuals);
  f(x, res.residuals);
  res.cost = res.residuals.squaredNorm();
  if (jac) {
    res.jacobian.resize(n_residuals, x.size());
    jac(x, res.jacobian);
  } else {
    numeric_jacobian(f, x, n_residuals, res.jacobian);
  }
  const auto dof = std::max<Eigen::Index>(1, n_residuals - x.size());
  const double s2 = res.cost / static_cast<double>(dof);
  const RMatrix jtj = res.jacobian.transpose() * res.jacobian;
  res.covariance = s2 * jtj.completeOrthogonalDecomposition().pseudoInverse();
  return res;
}

}  // namespace tweezerlab
