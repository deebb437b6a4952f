#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include <Eigen/Core>

namespace helimin {

struct KrylovResult {
  std::size_t iterations = 0;
  double residual_estimate = 0.0;  // preconditioned residual norm at exit
  bool converged = false;
};

/// Preconditioned MINRES (Paige-Saunders) for a symmetric, possibly indefinite or singular but
/// consistent, system A x = b. `apply(v)` returns A v; `precondition(r)` returns M^{-1} r for a
/// symmetric positive definite M. `x` holds the initial guess on entry. Stops once the
/// preconditioned residual drops below rtol * max(||b||_{M^-1}, ||b - A x0||_{M^-1}).
template <class Apply, class Precondition>
KrylovResult minres(Apply&& apply, Precondition&& precondition, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                    double rtol, std::size_t max_iters) {
  using Vec = Eigen::VectorXd;
  KrylovResult result;
  const Eigen::Index n = b.size();

  const Vec pb = precondition(b);
  const double bnorm = std::sqrt(std::max(0.0, b.dot(pb)));

  Vec r1 = b - apply(x);
  Vec y = precondition(r1);
  const double beta1 = std::sqrt(std::max(0.0, r1.dot(y)));
  const double target = rtol * std::max(bnorm, beta1);
  result.residual_estimate = beta1;
  if (beta1 == 0.0 || beta1 <= target) {
    result.converged = true;
    return result;
  }

  double beta = beta1, oldb = 0.0, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  Vec r2 = r1;
  Vec w = Vec::Zero(n), w1(n), w2 = Vec::Zero(n);
  Vec v(n);

  for (std::size_t itn = 1; itn <= max_iters; ++itn) {
    v = y / beta;
    y = apply(v);
    if (itn >= 2) y -= (beta / oldb) * r1;
    const double alfa = v.dot(y);
    y -= (alfa / beta) * r2;
    r1.swap(r2);
    r2 = y;
    y = precondition(r2);
    oldb = beta;
    beta = std::sqrt(std::max(0.0, r2.dot(y)));

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    const double gamma = std::max(std::hypot(gbar, beta), std::numeric_limits<double>::min());
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    w1.swap(w2);
    w2.swap(w);
    w = (v - oldeps * w1 - delta * w2) / gamma;
    x += phi * w;

    result.iterations = itn;
    result.residual_estimate = phibar;
    if (phibar <= target) {
      result.converged = true;
      return result;
    }
    if (beta == 0.0) {
      // Krylov space exhausted: x solves the system in the preconditioned least-squares sense.
      result.converged = true;
      return result;
    }
  }
  return result;
}

}  // namespace helimin
