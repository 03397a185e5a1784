#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "csrecon/error.hpp"
#include "csrecon/operators.hpp"
#include "csrecon/transforms.hpp"

namespace csrecon {

using Image2d = RowMatrix<double>;

/// Forward differences of a block. dx(i, j) = x(i+1, j) - x(i, j) and
/// dy(i, j) = x(i, j+1) - x(i, j); the last row of dx and the last column of
/// dy are zero.
struct GradientField {
  Image2d dx;
  Image2d dy;
};

inline GradientField discrete_gradient(const Image2d& block) {
  const Index h = block.rows(), w = block.cols();
  GradientField g{Image2d::Zero(h, w), Image2d::Zero(h, w)};
  if (h > 1) g.dx.topRows(h - 1) = block.bottomRows(h - 1) - block.topRows(h - 1);
  if (w > 1) g.dy.leftCols(w - 1) = block.rightCols(w - 1) - block.leftCols(w - 1);
  return g;
}

/// Isotropic total variation: sum of sqrt(dx^2 + dy^2) over all pixels.
inline double tv_norm(const Image2d& block) {
  const GradientField g = discrete_gradient(block);
  return (g.dx.array().square() + g.dy.array().square()).sqrt().sum();
}

struct TvSettings {
  /// Radius of the data constraint ||A x - y||_2 <= epsilon. Zero requests
  /// the equality-constrained problem A x = y.
  double epsilon = 0.0;
  /// Barrier stages.
  int max_outer_iterations = 10;
  int max_newton_iterations = 50;
  /// Stop once the barrier gap #constraints / tau <= tolerance * (1 + TV).
  double tolerance = 1e-4;
  double barrier_growth = 10.0;
  double newton_tol = 1e-6;
  double cg_tol = 1e-8;
  int cg_max_iterations = 200;
};

struct TvResult {
  Image2d block;
  bool converged = false;
  double tv = 0.0;
  double residual_norm = 0.0;
  double barrier_gap = 0.0;
  int outer_iterations = 0;
  int newton_iterations = 0;
  int cg_iterations = 0;
  /// TV of the iterate at the end of each barrier stage.
  std::vector<double> objective_trace;
};

namespace detail {

struct FlatGrid {
  Index h, w;

  // Forward differences of a flattened (row-major) block.
  void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& gx, Eigen::VectorXd& gy) const {
    gx.setZero(h * w);
    gy.setZero(h * w);
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) {
        const Index p = i * w + j;
        if (i + 1 < h) gx(p) = x(p + w) - x(p);
        if (j + 1 < w) gy(p) = x(p + 1) - x(p);
      }
    }
  }

  // D^T (u, v) for fields that vanish on the last row / column respectively.
  Eigen::VectorXd divergence_adjoint(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(h * w);
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) {
        const Index p = i * w + j;
        double acc = -u(p) - v(p);
        if (i > 0) acc += u(p - w);
        if (j > 0) acc += v(p - 1);
        out(p) = acc;
      }
    }
    return out;
  }
};

/// Smallest positive root of a s^2 + b s + c with c < 0, or +inf.
inline double first_positive_root(double a, double b, double c) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (std::abs(a) <= 1e-300) return b > 0.0 ? -c / b : kInf;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  double best = kInf;
  if (q != 0.0) {
    const double r1 = q / a;
    const double r2 = c / q;
    if (r1 > 0.0) best = std::min(best, r1);
    if (r2 > 0.0) best = std::min(best, r2);
  }
  return best;
}

}  // namespace detail

/// Total-variation reconstruction of an H x W block from y = A x:
///   min TV(x)  s.t.  ||A x - y||_2 <= epsilon   (A x = y when epsilon = 0).
///
/// Log-barrier method on the second-order-cone program
///   min sum(t)  s.t.  ||D_p x|| <= t_p for every pixel p,  data constraint,
/// with the t variables eliminated from each Newton system, which is then
/// solved by Jacobi-preconditioned CG. Equality constraints are handled by
/// moving only inside null(A).
template <LinearMap Op>
TvResult tv_reconstruct(const Op& a, const Eigen::VectorXd& y, Index height, Index width,
                        const TvSettings& settings = {}) {
  if (height < 1 || width < 1) throw InvalidArgument("tv_reconstruct: block dimensions must be positive");
  if (a.cols() != height * width) throw DimensionError("tv_reconstruct: operator does not act on an H x W block");
  require_length(y, a.rows(), "tv_reconstruct");
  if (a.rows() < 1) throw InvalidArgument("tv_reconstruct: at least one measurement is required");
  if (!(settings.epsilon >= 0.0)) throw InvalidArgument("tv_reconstruct: epsilon must be non-negative");
  if (settings.max_outer_iterations < 1 || settings.max_newton_iterations < 1) {
    throw InvalidArgument("tv_reconstruct: iteration limits must be positive");
  }

  const Index n = height * width;
  const bool equality = settings.epsilon == 0.0;
  const double eps = settings.epsilon;
  const double y_norm = y.norm();
  const detail::FlatGrid grid{height, width};

  const auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    if constexpr (HasNullProjector<Op>) {
      return a.project_null(v);
    } else {
      const auto normal = [&](const Eigen::VectorXd& z) { return Eigen::VectorXd(a.apply(a.adjoint(z))); };
      const auto identity = [](const Eigen::VectorXd& z) { return z; };
      const CgResult cg = conjugate_gradient(normal, Eigen::VectorXd(a.apply(v)), identity, 1e-12, 1000);
      return v - a.adjoint(cg.x);
    }
  };

  TvResult result;
  const auto finish = [&](const Eigen::VectorXd& x) {
    result.block = unflatten<double>(x, height, width);
    result.tv = tv_norm(result.block);
    result.residual_norm = (a.apply(x) - y).norm();
    return result;
  };

  // Best constant fit: if it is feasible it has TV 0 and is optimal.
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd a_ones = a.apply(ones);
  // When constants lie in null(A) the level is free and any value is optimal.
  const bool level_observed = a_ones.squaredNorm() > 1e-20 * static_cast<double>(n);
  const double level = level_observed ? a_ones.dot(y) / a_ones.squaredNorm() : 0.0;
  const double constant_misfit = (level * a_ones - y).norm();
  if (level_observed && constant_misfit <= (equality ? 1e-10 * (1.0 + y_norm) : eps)) {
    result.converged = true;
    result.objective_trace.push_back(0.0);
    return finish(level * ones);
  }

  Eigen::VectorXd x;
  if constexpr (SelectionLike<Op>) {
    x = a.adjoint(y);
  } else {
    x = minimum_norm_solution(a, y);
  }
  x += project(level * ones);
  if (!equality && (a.apply(x) - y).norm() >= eps) {
    throw InfeasibleError("tv_reconstruct: no strictly feasible start for the given epsilon");
  }

  Eigen::VectorXd gx, gy;
  grid.gradient(x, gx, gy);
  Eigen::VectorXd mag = (gx.array().square() + gy.array().square()).sqrt().matrix();
  const double max_mag = mag.maxCoeff();
  const double pad = max_mag > 0.0 ? 0.01 * max_mag : 1e-3 * (1.0 + x.cwiseAbs().maxCoeff());
  Eigen::VectorXd t = 1.05 * mag + Eigen::VectorXd::Constant(n, pad);

  const double constraints = static_cast<double>(n) + (equality ? 0.0 : 1.0);
  double tau = constraints / std::max(mag.sum(), 1e-12 * (1.0 + y_norm));
  constexpr double kAlpha = 0.01;
  constexpr double kBeta = 0.5;

  const auto barrier = [&](const Eigen::VectorXd& gxv, const Eigen::VectorXd& gyv, const Eigen::VectorXd& tv,
                           const Eigen::VectorXd& r) {
    const Eigen::ArrayXd f = 0.5 * (gxv.array().square() + gyv.array().square() - tv.array().square());
    if ((f >= 0.0).any()) return std::numeric_limits<double>::infinity();
    double value = tau * tv.sum() - (-f).log().sum();
    if (!equality) {
      const double fe = 0.5 * (r.squaredNorm() - eps * eps);
      if (fe >= 0.0) return std::numeric_limits<double>::infinity();
      value -= std::log(-fe);
    }
    return value;
  };

  for (int stage = 0; stage < settings.max_outer_iterations; ++stage) {
    ++result.outer_iterations;
    for (int newton = 0; newton < settings.max_newton_iterations; ++newton) {
      ++result.newton_iterations;
      grid.gradient(x, gx, gy);
      const Eigen::VectorXd r = equality ? Eigen::VectorXd() : Eigen::VectorXd(a.apply(x) - y);
      const Eigen::ArrayXd f = 0.5 * (gx.array().square() + gy.array().square() - t.array().square());
      const Eigen::ArrayXd tt = t.array();
      const Eigen::ArrayXd sum_tf = tt.square() + f;  // > 0
      const double fe = equality ? -1.0 : 0.5 * (r.squaredNorm() - eps * eps);
      const Eigen::VectorXd atr = equality ? Eigen::VectorXd() : Eigen::VectorXd(a.adjoint(r));

      const Eigen::ArrayXd grad_t = tau + tt / f;
      Eigen::VectorXd grad_x =
          grid.divergence_adjoint((-gx.array() / f).matrix(), (-gy.array() / f).matrix());
      if (!equality) grad_x -= atr / fe;

      const Eigen::ArrayXd weight = tt * grad_t / sum_tf;
      Eigen::VectorXd rhs = -grad_x - grid.divergence_adjoint((gx.array() * weight).matrix(),
                                                               (gy.array() * weight).matrix());
      const Eigen::ArrayXd c = -f.inverse();
      const Eigen::ArrayXd q = (f * sum_tf).inverse();

      const auto hessian = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd vx, vy;
        grid.gradient(v, vx, vy);
        const Eigen::ArrayXd gdot = gx.array() * vx.array() + gy.array() * vy.array();
        Eigen::VectorXd out = grid.divergence_adjoint((c * vx.array() + q * gx.array() * gdot).matrix(),
                                                      (c * vy.array() + q * gy.array() * gdot).matrix());
        if (!equality) out += -(1.0 / fe) * a.adjoint(a.apply(v)) + (atr.dot(v) / (fe * fe)) * atr;
        return out;
      };

      Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
      for (Index i = 0; i < height; ++i) {
        for (Index j = 0; j < width; ++j) {
          const Index p = i * width + j;
          const bool ex = i + 1 < height;
          const bool ey = j + 1 < width;
          const double b00 = c(p) + q(p) * gx(p) * gx(p);
          const double b11 = c(p) + q(p) * gy(p) * gy(p);
          const double b01 = q(p) * gx(p) * gy(p);
          if (ex) {
            diag(p) += b00;
            diag(p + width) += b00;
          }
          if (ey) {
            diag(p) += b11;
            diag(p + 1) += b11;
          }
          if (ex && ey) diag(p) += 2.0 * b01;
        }
      }
      if (!equality) {
        if constexpr (HasGramDiagonal<Op>) diag -= (1.0 / fe) * a.gram_diagonal();
        diag += atr.cwiseAbs2() / (fe * fe);
      }
      for (Index p = 0; p < n; ++p) diag(p) = diag(p) > 0.0 ? 1.0 / diag(p) : 1.0;

      if (equality) rhs = project(rhs);
      const auto system = [&](const Eigen::VectorXd& v) {
        return equality ? Eigen::VectorXd(project(hessian(project(v)))) : hessian(v);
      };
      const auto precondition = [&](const Eigen::VectorXd& v) {
        return equality ? Eigen::VectorXd(project(diag.cwiseProduct(project(v)))) : Eigen::VectorXd(diag.cwiseProduct(v));
      };
      const CgResult cg = conjugate_gradient(system, rhs, precondition, settings.cg_tol, settings.cg_max_iterations);
      result.cg_iterations += cg.iterations;
      const Eigen::VectorXd dx = equality ? project(cg.x) : cg.x;

      Eigen::VectorXd dgx, dgy;
      grid.gradient(dx, dgx, dgy);
      const Eigen::ArrayXd gd = gx.array() * dgx.array() + gy.array() * dgy.array();
      const Eigen::ArrayXd f_sq = f.square();
      const Eigen::VectorXd dt = ((-grad_t * f_sq + tt * gd) / sum_tf).matrix();

      // Largest step keeping every cone (and the data constraint) strict.
      double smax = 1.0;
      for (Index p = 0; p < n; ++p) {
        const double qa = dgx(p) * dgx(p) + dgy(p) * dgy(p) - dt(p) * dt(p);
        const double qb = 2.0 * (gx(p) * dgx(p) + gy(p) * dgy(p) - t(p) * dt(p));
        const double qc = gx(p) * gx(p) + gy(p) * gy(p) - t(p) * t(p);
        smax = std::min(smax, detail::first_positive_root(qa, qb, qc));
      }
      Eigen::VectorXd adx;
      if (!equality) {
        adx = a.apply(dx);
        smax = std::min(smax, detail::first_positive_root(adx.squaredNorm(), 2.0 * r.dot(adx),
                                                          r.squaredNorm() - eps * eps));
      }
      double s = 0.99 * smax;

      const double phi = barrier(gx, gy, t, r);
      const double slope = grad_x.dot(dx) + grad_t.matrix().dot(dt);
      bool accepted = false;
      Eigen::VectorXd xp, tp;
      for (int backtrack = 0; backtrack < 40; ++backtrack) {
        xp = x + s * dx;
        tp = t + s * dt;
        const Eigen::VectorXd rp = equality ? r : Eigen::VectorXd(r + s * adx);
        const Eigen::VectorXd gxp = gx + s * dgx;
        const Eigen::VectorXd gyp = gy + s * dgy;
        if (barrier(gxp, gyp, tp, rp) <= phi + kAlpha * s * slope) {
          accepted = true;
          break;
        }
        s *= kBeta;
      }
      if (!accepted) break;
      x = std::move(xp);
      t = std::move(tp);
      if (-slope / 2.0 < settings.newton_tol) break;
    }
    // Stage objective is the TV of x itself, not sum(t).
    grid.gradient(x, gx, gy);
    result.objective_trace.push_back((gx.array().square() + gy.array().square()).sqrt().sum());
    result.barrier_gap = constraints / tau;
    if (result.barrier_gap <= settings.tolerance * (1.0 + result.objective_trace.back())) {
      result.converged = true;
      break;
    }
    tau *= settings.barrier_growth;
  }
  return finish(x);
}

/// TV denoising: min TV(x) s.t. ||noisy - x||_2 <= epsilon.
inline TvResult tv_denoise(const Image2d& noisy, double epsilon, TvSettings settings = {}) {
  settings.epsilon = epsilon;
  const Eigen::VectorXd y = flatten<double>(noisy);
  return tv_reconstruct(SelectionMap::identity(noisy.size()), y, noisy.rows(), noisy.cols(), settings);
}

}  // namespace csrecon
