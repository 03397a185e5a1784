#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "csrecon/error.hpp"
#include "csrecon/operators.hpp"

namespace csrecon {

struct BpSettings {
  int max_iterations = 100;
  /// Absolute primal-dual gap at which the solve stops; 0 selects
  /// 1e-6 * max(1, ||y||_2).
  double duality_gap_tol = 0.0;
  /// Relative feasibility: ||A x - y|| <= constraint_tol * (1 + ||y||).
  double constraint_tol = 1e-8;
  /// BPDN noise radius sigma (ignored by basis_pursuit).
  double noise_level = 0.0;
  /// BPDN log-barrier parameters.
  double barrier_growth = 10.0;
  int newton_max_iterations = 50;
  double cg_tol = 1e-8;
  int cg_max_iterations = 200;
  /// BP stops early (not converged) once this many iterations pass without
  /// improving the best feasible objective; 0 disables the check.
  int stall_iterations = 10;
};

struct BpResult {
  Eigen::VectorXd x;
  bool converged = false;
  /// BPDN only: sigma >= ||y|| made x = 0 optimal without iterating.
  bool degenerate = false;
  /// Gap at termination. BP: max of the complementarity p^T s_p + q^T s_q and
  /// ||x||_1 - y^T lambda for a dual-feasible lambda. BPDN: barrier gap
  /// (#constraints / tau).
  double duality_gap = 0.0;
  double duality_gap_tol = 0.0;
  double l1_norm = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  /// Inner solves that fell back from factorization to conjugate gradients,
  /// or CG solves that hit their iteration cap.
  int inner_fallbacks = 0;
};

namespace detail {

inline void validate(const BpSettings& s) {
  if (s.max_iterations < 1) throw InvalidArgument("BpSettings: max_iterations must be >= 1");
  if (s.duality_gap_tol < 0.0) throw InvalidArgument("BpSettings: duality_gap_tol must be positive (or 0 for default)");
  if (!(s.constraint_tol > 0.0)) throw InvalidArgument("BpSettings: constraint_tol must be positive");
  if (s.noise_level < 0.0) throw InvalidArgument("BpSettings: noise level must be non-negative");
  if (!(s.barrier_growth > 1.0)) throw InvalidArgument("BpSettings: barrier_growth must exceed 1");
}

inline double gap_tolerance(const BpSettings& s, const Eigen::VectorXd& y) {
  return s.duality_gap_tol > 0.0 ? s.duality_gap_tol : 1e-6 * std::max(1.0, y.norm());
}

template <class Op>
constexpr bool is_dense_v = std::is_same_v<std::remove_cvref_t<Op>, MatrixMap>;

/// Minimum-norm solution of A x = y (exact factorization for dense input).
template <LinearMap Op>
Eigen::VectorXd feasible_start(const Op& a, const Eigen::VectorXd& y) {
  if constexpr (is_dense_v<Op>) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a.matrix());
    return cod.solve(y);
  } else {
    return minimum_norm_solution(a, y);
  }
}

/// Solves (A diag(w) A^T) z = b for several right-hand sides with the same
/// weights: one Cholesky factorization for dense A (Jacobi-preconditioned CG
/// if it fails or is inaccurate), Jacobi-preconditioned CG for operators.
template <LinearMap Op>
class WeightedNormalSolver {
 public:
  WeightedNormalSolver(const Op& a, const Eigen::VectorXd& w, const BpSettings& settings)
      : a_(a), w_(w), settings_(settings) {
    if constexpr (is_dense_v<Op>) {
      const Eigen::MatrixXd& m = a.matrix();
      h_ = (m * w.asDiagonal()) * m.transpose();
      llt_.compute(h_);
      factored_ = llt_.info() == Eigen::Success;
      inv_diag_ = h_.diagonal();
    } else if constexpr (HasWeightedGramDiagonal<Op>) {
      inv_diag_ = a.weighted_gram_diagonal(w);
    } else {
      inv_diag_ = Eigen::VectorXd::Ones(a.rows());
    }
    for (Index i = 0; i < inv_diag_.size(); ++i) inv_diag_(i) = inv_diag_(i) > 0.0 ? 1.0 / inv_diag_(i) : 1.0;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) {
    if constexpr (is_dense_v<Op>) {
      if (factored_) {
        Eigen::VectorXd z = llt_.solve(b);
        const double rel = (h_ * z - b).norm() / std::max(b.norm(), std::numeric_limits<double>::min());
        if (std::isfinite(rel) && rel <= 1e-6) return z;
      }
    }
    const auto apply = [&](const Eigen::VectorXd& v) {
      if constexpr (is_dense_v<Op>) {
        return Eigen::VectorXd(h_ * v);
      } else {
        return Eigen::VectorXd(a_.apply(Eigen::VectorXd(w_.cwiseProduct(a_.adjoint(v)))));
      }
    };
    const auto precondition = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(inv_diag_.cwiseProduct(v)); };
    const CgResult cg = conjugate_gradient(apply, b, precondition, settings_.cg_tol, settings_.cg_max_iterations);
    if (is_dense_v<Op> || !cg.converged) ++fallbacks;
    return cg.x;
  }

  int fallbacks = 0;

 private:
  const Op& a_;
  const Eigen::VectorXd& w_;
  const BpSettings& settings_;
  Eigen::MatrixXd h_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool factored_ = false;
  Eigen::VectorXd inv_diag_;
};

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double s = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) s = std::min(s, -v(i) / dv(i));
  }
  return s;
}

inline double l1(const Eigen::VectorXd& x) { return x.cwiseAbs().sum(); }

}  // namespace detail

/// Basis Pursuit: min ||x||_1 subject to A x = y.
///
/// Primal-dual interior point (Mehrotra predictor-corrector) on the linear
/// program in standard form
///   min 1^T (p + q)  s.t.  A (p - q) = y,  p, q >= 0,
/// with x = p - q. Both Newton systems of an iteration reduce to
/// (A diag(p/s_p + q/s_q) A^T) dlambda = rhs.
template <LinearMap Op>
BpResult basis_pursuit(const Op& a, const Eigen::VectorXd& y, const BpSettings& settings = {}) {
  detail::validate(settings);
  require_length(y, a.rows(), "basis_pursuit");
  const Index n = a.cols();
  BpResult result;
  result.duality_gap_tol = detail::gap_tolerance(settings, y);
  const double y_norm = y.norm();
  const double feas_tol = settings.constraint_tol * (1.0 + y_norm);

  const Eigen::VectorXd x_mn = detail::feasible_start(a, y);
  const double start_residual = (a.apply(x_mn) - y).norm();
  if (start_residual > std::max(1e-6 * (1.0 + y_norm), feas_tol)) {
    throw InfeasibleError("basis_pursuit: y is outside the range of A (least-squares residual " +
                          std::to_string(start_residual) + ")");
  }
  if (y_norm == 0.0 || x_mn.cwiseAbs().maxCoeff() == 0.0) {
    result.x = Eigen::VectorXd::Zero(n);
    result.converged = true;
    return result;
  }

  // Starting point: split the minimum-norm solution, then shift into the
  // interior (the usual Mehrotra heuristic; the dual start is lambda = 0).
  Eigen::VectorXd p = 0.5 * x_mn;
  Eigen::VectorXd q = -0.5 * x_mn;
  const double shift = std::max(0.0, -1.5 * std::min(p.minCoeff(), q.minCoeff()));
  p.array() += shift;
  q.array() += shift;
  const double centre = 0.5 * (p.sum() + q.sum()) / (2.0 * static_cast<double>(n));
  p.array() += centre;
  q.array() += centre;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(a.rows());
  Eigen::VectorXd atl = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sp = Eigen::VectorXd::Constant(n, 1.5);
  Eigen::VectorXd sq = Eigen::VectorXd::Constant(n, 1.5);

  constexpr double kStepScale = 0.99;
  const double count = 2.0 * static_cast<double>(n);
  double gap = p.dot(sp) + q.dot(sq);
  Eigen::VectorXd rb = a.apply(Eigen::VectorXd(p - q)) - y;

  // Every iterate yields a feasible point (x = p - q moved onto {A x = y} by
  // a minimum-norm correction, needed because inner solves may be inexact)
  // and a lower bound y^T lambda / max(1, ||A^T lambda||_inf) from the dual.
  // The best of each gives the certified gap.
  Eigen::VectorXd best_x;
  double best_l1 = std::numeric_limits<double>::infinity();
  double best_bound = -std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  const auto certify = [&] {
    Eigen::VectorXd x = p - q;
    if (rb.norm() > 0.1 * feas_tol) x -= detail::feasible_start(a, rb);
    const double l1 = detail::l1(x);
    ++since_improvement;
    if (l1 < best_l1) {
      if (l1 < best_l1 - 1e-3 * result.duality_gap_tol) since_improvement = 0;
      best_l1 = l1;
      best_x = std::move(x);
    }
    best_bound = std::max(best_bound, y.dot(lambda) / std::max(1.0, atl.cwiseAbs().maxCoeff()));
    return best_l1 - best_bound;
  };

  while (true) {
    const Eigen::VectorXd rcp = (atl + sp).array() - 1.0;
    const Eigen::VectorXd rcq = (-atl + sq).array() - 1.0;
    gap = p.dot(sp) + q.dot(sq);
    if (certify() <= result.duality_gap_tol || result.iterations >= settings.max_iterations ||
        (settings.stall_iterations > 0 && since_improvement >= settings.stall_iterations)) {
      break;
    }
    ++result.iterations;
    const double mu = gap / count;
    const Eigen::VectorXd dp_w = p.cwiseQuotient(sp);
    const Eigen::VectorXd dq_w = q.cwiseQuotient(sq);
    const Eigen::VectorXd w = dp_w + dq_w;
    detail::WeightedNormalSolver<Op> normal(a, w, settings);

    struct Direction {
      Eigen::VectorXd p, q, lambda, atl, sp, sq;
    };
    const auto direction = [&](const Eigen::VectorXd& rxs_p, const Eigen::VectorXd& rxs_q) {
      Direction d;
      const Eigen::VectorXd tp = rxs_p.cwiseQuotient(sp) + dp_w.cwiseProduct(rcp);
      const Eigen::VectorXd tq = rxs_q.cwiseQuotient(sq) + dq_w.cwiseProduct(rcq);
      const Eigen::VectorXd rhs = -rb - a.apply(Eigen::VectorXd(tp - tq));
      d.lambda = normal.solve(rhs);
      d.atl = a.adjoint(d.lambda);
      d.sp = -rcp - d.atl;
      d.sq = -rcq + d.atl;
      d.p = tp + dp_w.cwiseProduct(d.atl);
      d.q = tq - dq_w.cwiseProduct(d.atl);
      return d;
    };

    // Predictor (affine scaling) step.
    const Direction aff = direction(-p.cwiseProduct(sp), -q.cwiseProduct(sq));
    const double ap_aff = std::min({1.0, detail::max_step(p, aff.p), detail::max_step(q, aff.q)});
    const double ad_aff = std::min({1.0, detail::max_step(sp, aff.sp), detail::max_step(sq, aff.sq)});
    const double mu_aff = ((p + ap_aff * aff.p).dot(sp + ad_aff * aff.sp) +
                           (q + ap_aff * aff.q).dot(sq + ad_aff * aff.sq)) /
                          count;
    const double sigma = std::pow(mu_aff / mu, 3.0);

    // Corrector with centring.
    const Eigen::VectorXd rxs_p = (-p.cwiseProduct(sp) - aff.p.cwiseProduct(aff.sp)).array() + sigma * mu;
    const Eigen::VectorXd rxs_q = (-q.cwiseProduct(sq) - aff.q.cwiseProduct(aff.sq)).array() + sigma * mu;
    const Direction d = direction(rxs_p, rxs_q);
    const double ap = std::min(1.0, kStepScale * std::min(detail::max_step(p, d.p), detail::max_step(q, d.q)));
    const double ad = std::min(1.0, kStepScale * std::min(detail::max_step(sp, d.sp), detail::max_step(sq, d.sq)));

    p += ap * d.p;
    q += ap * d.q;
    lambda += ad * d.lambda;
    atl += ad * d.atl;
    sp += ad * d.sp;
    sq += ad * d.sq;
    rb = a.apply(Eigen::VectorXd(p - q)) - y;
    result.inner_fallbacks += normal.fallbacks;
  }

  result.x = std::move(best_x);
  result.duality_gap = best_l1 - best_bound;
  result.residual_norm = (a.apply(result.x) - y).norm();
  result.l1_norm = detail::l1(result.x);
  result.converged = result.duality_gap <= result.duality_gap_tol && result.residual_norm <= feas_tol;
  return result;
}

inline BpResult basis_pursuit(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const BpSettings& settings = {}) {
  return basis_pursuit(MatrixMap(a), y, settings);
}

/// Basis Pursuit De-Noising: min ||x||_1 subject to ||A x - y||_2 <= sigma.
///
/// Log-barrier method on the second-order-cone form, Newton steps on
///   sum(u) - (1/tau) [sum log(u - x) + sum log(u + x) + log(sigma^2 - ||Ax - y||^2) / ...]
/// with tau growing by barrier_growth until (2N + 1) / tau <= gap tolerance.
template <LinearMap Op>
BpResult bpdn(const Op& a, const Eigen::VectorXd& y, double sigma, const BpSettings& settings = {}) {
  detail::validate(settings);
  require_length(y, a.rows(), "bpdn");
  if (!(sigma >= 0.0)) throw InvalidArgument("bpdn: sigma must be non-negative");
  if (sigma == 0.0) return basis_pursuit(a, y, settings);
  const Index n = a.cols();
  BpResult result;
  result.duality_gap_tol = detail::gap_tolerance(settings, y);
  if (sigma >= y.norm()) {
    result.x = Eigen::VectorXd::Zero(n);
    result.degenerate = true;
    result.converged = true;
    result.residual_norm = y.norm();
    return result;
  }

  Eigen::VectorXd x = detail::feasible_start(a, y);
  if ((a.apply(x) - y).norm() >= sigma) {
    throw InfeasibleError("bpdn: no strictly feasible starting point for the given sigma");
  }
  Eigen::VectorXd u = 0.95 * x.cwiseAbs() + Eigen::VectorXd::Constant(n, 0.10 * x.cwiseAbs().maxCoeff());

  constexpr double kAlpha = 0.01;
  constexpr double kBeta = 0.5;
  const double mu = settings.barrier_growth;
  const double constraints = 2.0 * static_cast<double>(n) + 1.0;
  double tau = std::max(constraints / detail::l1(x), 1.0);
  const int stages = std::max(
      0, static_cast<int>(std::ceil((std::log(constraints) - std::log(result.duality_gap_tol) - std::log(tau)) /
                                    std::log(mu))));
  const double newton_tol = 0.1 * result.duality_gap_tol;

  const auto barrier = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& uu, const Eigen::VectorXd& r,
                           double t) {
    const Eigen::ArrayXd f1 = (xx - uu).array();
    const Eigen::ArrayXd f2 = (-xx - uu).array();
    const double fe = 0.5 * (r.squaredNorm() - sigma * sigma);
    if ((f1 >= 0.0).any() || (f2 >= 0.0).any() || fe >= 0.0) return std::numeric_limits<double>::infinity();
    return uu.sum() - (1.0 / t) * ((-f1).log().sum() + (-f2).log().sum() + std::log(-fe));
  };

  for (int stage = 0; stage <= stages; ++stage) {
    for (int newton = 0; newton < settings.newton_max_iterations; ++newton) {
      ++result.iterations;
      const Eigen::VectorXd r = a.apply(x) - y;
      const Eigen::ArrayXd fu1 = (x - u).array();
      const Eigen::ArrayXd fu2 = (-x - u).array();
      const double fe = 0.5 * (r.squaredNorm() - sigma * sigma);
      const double f = barrier(x, u, r, tau);
      const Eigen::VectorXd atr = a.adjoint(r);

      const Eigen::ArrayXd ntgz = fu1.inverse() - fu2.inverse() + atr.array() / fe;
      const Eigen::ArrayXd ntgu = -tau - fu1.inverse() - fu2.inverse();
      const Eigen::ArrayXd sig11 = fu1.square().inverse() + fu2.square().inverse();
      const Eigen::ArrayXd sig12 = -fu1.square().inverse() + fu2.square().inverse();
      const Eigen::ArrayXd sigx = sig11 - sig12.square() / sig11;
      const Eigen::VectorXd w1p = (ntgz - sig12 / sig11 * ntgu).matrix();

      Eigen::VectorXd dx;
      bool solved = false;
      if constexpr (detail::is_dense_v<Op>) {
        const Eigen::MatrixXd& m = a.matrix();
        Eigen::MatrixXd h = -(1.0 / fe) * (m.transpose() * m) + (1.0 / (fe * fe)) * atr * atr.transpose();
        h.diagonal() += sigx.matrix();
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        if (llt.info() == Eigen::Success) {
          dx = llt.solve(w1p);
          solved = ((h * dx - w1p).norm() <= 1e-6 * w1p.norm());
        }
        if (!solved) ++result.inner_fallbacks;
      }
      if (!solved) {
        Eigen::VectorXd diag = sigx.matrix() + (1.0 / (fe * fe)) * atr.cwiseAbs2();
        if constexpr (HasGramDiagonal<Op>) diag -= (1.0 / fe) * a.gram_diagonal();
        const Eigen::VectorXd inv_diag = diag.cwiseInverse();
        const auto apply = [&](const Eigen::VectorXd& p) {
          return Eigen::VectorXd(sigx.matrix().cwiseProduct(p) - (1.0 / fe) * a.adjoint(a.apply(p)) +
                                 (atr.dot(p) / (fe * fe)) * atr);
        };
        const auto precondition = [&](const Eigen::VectorXd& p) { return Eigen::VectorXd(inv_diag.cwiseProduct(p)); };
        const CgResult cg = conjugate_gradient(apply, w1p, precondition, settings.cg_tol, settings.cg_max_iterations);
        if (!cg.converged) ++result.inner_fallbacks;
        dx = cg.x;
      }
      const Eigen::VectorXd adx = a.apply(dx);
      const Eigen::ArrayXd du = ntgu / sig11 - (sig12 / sig11) * dx.array();

      // Largest step that keeps every constraint strictly satisfied.
      double smax = 1.0;
      for (Index i = 0; i < n; ++i) {
        const double d1 = dx(i) - du(i);
        const double d2 = -dx(i) - du(i);
        if (d1 > 0.0) smax = std::min(smax, -fu1(i) / d1);
        if (d2 > 0.0) smax = std::min(smax, -fu2(i) / d2);
      }
      const double aqe = adx.squaredNorm();
      const double bqe = 2.0 * r.dot(adx);
      const double cqe = r.squaredNorm() - sigma * sigma;
      if (aqe > 0.0) smax = std::min(smax, (-bqe + std::sqrt(bqe * bqe - 4.0 * aqe * cqe)) / (2.0 * aqe));
      double s = 0.99 * smax;

      // gradf = -(1/tau) [ntgz; ntgu]
      const double slope = -(1.0 / tau) * (ntgz.matrix().dot(dx) + ntgu.matrix().dot(du.matrix()));
      Eigen::VectorXd xp, up;
      bool accepted = false;
      for (int backtrack = 0; backtrack < 32; ++backtrack) {
        xp = x + s * dx;
        up = u + s * du.matrix();
        const Eigen::VectorXd rp = r + s * adx;
        if (barrier(xp, up, rp, tau) <= f + kAlpha * s * slope) {
          accepted = true;
          break;
        }
        s *= kBeta;
      }
      if (!accepted) break;
      x = std::move(xp);
      u = std::move(up);
      const double lambda2 = -slope;
      if (lambda2 / 2.0 < newton_tol) break;
    }
    result.duality_gap = constraints / tau;
    if (result.duality_gap <= result.duality_gap_tol) break;
    tau *= mu;
  }

  result.x = x;
  result.residual_norm = (a.apply(x) - y).norm();
  result.l1_norm = detail::l1(x);
  result.converged = result.duality_gap <= result.duality_gap_tol &&
                     result.residual_norm <= sigma * (1.0 + settings.constraint_tol);
  return result;
}

inline BpResult bpdn(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double sigma,
                     const BpSettings& settings = {}) {
  return bpdn(MatrixMap(a), y, sigma, settings);
}

}  // namespace csrecon
