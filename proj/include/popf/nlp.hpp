#pragma once

// Primal-dual interior-point solver for sparse NLPs of the form
//
//   min f(z)   s.t.  c_E(z) = 0,  c_I(z) >= 0.
//
// Inequalities carry slacks (c_I(z) = s, s > 0) handled through a
// logarithmic barrier; each iteration solves the condensed symmetric
// KKT system by sparse LU, with a fraction-to-boundary step rule and a
// residual-norm line search. The barrier parameter follows a monotone
// reduction schedule down to its floor.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include <Eigen/SparseLU>

#include "popf/core.hpp"

namespace popf {

/// Problem interface. The Hessian convention is
///   H = sigma * grad^2 f - sum_r y_eq[r] grad^2 cE_r - sum_r y_in[r] grad^2 cI_r,
/// i.e. multipliers enter with a minus sign (Lagrangian L = f - y'cE - w'cI).
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;
  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;
  virtual int num_ineq() const = 0;
  virtual double objective(const Vector& z) const = 0;
  virtual Vector objective_gradient(const Vector& z) const = 0;
  virtual Vector eq_residual(const Vector& z) const = 0;
  virtual Vector ineq_residual(const Vector& z) const = 0;
  virtual SparseMatrix eq_jacobian(const Vector& z) const = 0;
  virtual SparseMatrix ineq_jacobian(const Vector& z) const = 0;
  virtual SparseMatrix lagrangian_hessian(const Vector& z, double sigma, const Vector& y_eq,
                                          const Vector& y_in) const = 0;
};

struct IpmOptions {
  double tolerance = 1e-6;   // scaled KKT error at mu -> 0
  double mu_init = 0.1;
  double mu_min = 1e-8;
  int max_iterations = 200;
  double tau_min = 0.99;     // fraction-to-boundary floor
  bool verbose = false;
};

enum class IpmStatus { kConverged, kIterationLimit, kStalled };

struct IpmResult {
  Vector z;
  Vector slacks;
  Vector y_eq;
  Vector y_in;
  int iterations = 0;
  IpmStatus status = IpmStatus::kIterationLimit;
  double kkt_error = std::numeric_limits<double>::infinity();
  double mu = 0.0;
  double objective = 0.0;
};

class InteriorPointSolver {
 public:
  explicit InteriorPointSolver(const IpmOptions& options = {}) : opt_(options) {}

  IpmResult solve(const NlpProblem& prob, const Vector& z0) const {
    const int nz = prob.num_vars();
    const int ne = prob.num_eq();
    const int ni = prob.num_ineq();

    Vector z = z0;
    Vector ci = prob.ineq_residual(z);
    Vector s(ni);
    for (int i = 0; i < ni; ++i) s[i] = std::max(ci[i], 1e-3);
    double mu = opt_.mu_init;
    Vector w(ni);
    for (int i = 0; i < ni; ++i) w[i] = std::min(std::max(mu / s[i], 1e-8), 1e8);
    Vector y = Vector::Zero(ne);

    Eigen::SparseLU<SparseMatrix> lu;
    double delta = 0.0;  // primal regularization carried across iterations

    IpmResult res;
    res.iterations = 0;
    for (int iter = 0; iter < opt_.max_iterations; ++iter) {
      Vector grad = prob.objective_gradient(z);
      Vector ce = prob.eq_residual(z);
      ci = prob.ineq_residual(z);
      SparseMatrix ae = prob.eq_jacobian(z);
      SparseMatrix ai = prob.ineq_jacobian(z);

      Vector r_dual = grad - ae.transpose() * y - ai.transpose() * w;
      Vector r_ineq = ci - s;
      Vector comp = s.cwiseProduct(w);

      double err0 = scaled_error(r_dual, ce, r_ineq, comp, y, w, 0.0);
      if (opt_.verbose)
        std::fprintf(stderr, "ipm iter %3d  mu=%.2e  E0=%.3e  f=%.6e  delta=%.1e\n", iter, mu,
                     err0, prob.objective(z), delta);
      if (err0 <= opt_.tolerance && mu <= opt_.mu_min * 1.0000001) {
        res.status = IpmStatus::kConverged;
        res.kkt_error = err0;
        finalize(res, prob, z, s, y, w, mu, iter);
        return res;
      }

      // barrier reduction once the current sub-problem is solved well enough
      double err_mu = scaled_error(r_dual, ce, r_ineq, comp, y, w, mu);
      if (err_mu <= 10.0 * mu && mu > opt_.mu_min) {
        mu = std::max(opt_.mu_min, std::min(0.2 * mu, std::pow(mu, 1.5)));
        continue;  // re-test with the new barrier before stepping
      }

      SparseMatrix hess = prob.lagrangian_hessian(z, 1.0, y, w);
      Vector sigma = w.cwiseQuotient(s);

      // condensed KKT solve, retrying with more regularization on failure
      Vector dz, dy;
      bool solved = false;
      for (int attempt = 0; attempt < 12 && !solved; ++attempt) {
        SparseMatrix kkt = assemble_kkt(hess, ae, ai, sigma, nz, ne, delta);
        Vector rhs(nz + ne);
        Vector mus = mu * s.cwiseInverse();
        rhs.head(nz) = -r_dual + ai.transpose() * (mus - w - sigma.cwiseProduct(r_ineq));
        rhs.tail(ne) = -ce;
        lu.compute(kkt);
        if (lu.info() == Eigen::Success) {
          Vector sol = lu.solve(rhs);
          if (sol.allFinite()) {
            dz = sol.head(nz);
            dy = -sol.tail(ne);
            solved = true;
            break;
          }
        }
        delta = (delta == 0.0) ? 1e-8 : delta * 100.0;
        if (delta > 1e12) break;
      }
      if (!solved) {
        res.status = IpmStatus::kStalled;
        res.kkt_error = err0;
        finalize(res, prob, z, s, y, w, mu, iter);
        return res;
      }

      Vector ds = ai * dz + r_ineq;
      Vector dw = mu * s.cwiseInverse() - w - sigma.cwiseProduct(ds);

      const double tau = std::max(opt_.tau_min, 1.0 - mu);
      double alpha_p = max_step(s, ds, tau);
      double alpha_d = max_step(w, dw, tau);

      // backtracking on the euclidean norm of the perturbed KKT residual
      double phi0 = merit(prob, z, s, y, w, mu);
      double beta = 1.0;
      bool accepted = false;
      Vector z_new, s_new, y_new, w_new;
      for (int bt = 0; bt < 12; ++bt) {
        z_new = z + beta * alpha_p * dz;
        s_new = s + beta * alpha_p * ds;
        y_new = y + beta * alpha_d * dy;
        w_new = w + beta * alpha_d * dw;
        double phi = merit(prob, z_new, s_new, y_new, w_new, mu);
        if (std::isfinite(phi) && phi <= phi0 * (1.0 - 1e-4 * beta) + 1e-14) {
          accepted = true;
          break;
        }
        beta *= 0.5;
      }
      if (!accepted) {
        // take the smallest step anyway, but ask for more regularization next time
        delta = (delta == 0.0) ? 1e-8 : std::min(delta * 10.0, 1e12);
      } else if (beta == 1.0 && delta > 0.0) {
        delta = (delta <= 1e-8) ? 0.0 : delta / 10.0;
      }
      z = z_new;
      s = s_new;
      y = y_new;
      w = w_new;
      res.iterations = iter + 1;
    }

    Vector grad = prob.objective_gradient(z);
    Vector ce = prob.eq_residual(z);
    ci = prob.ineq_residual(z);
    Vector r_dual = grad - prob.eq_jacobian(z).transpose() * y - prob.ineq_jacobian(z).transpose() * w;
    res.status = IpmStatus::kIterationLimit;
    res.kkt_error = scaled_error(r_dual, ce, ci - s, s.cwiseProduct(w), y, w, 0.0);
    finalize(res, prob, z, s, y, w, mu, opt_.max_iterations);
    return res;
  }

 private:
  IpmOptions opt_;

  static void finalize(IpmResult& res, const NlpProblem& prob, const Vector& z, const Vector& s,
                       const Vector& y, const Vector& w, double mu, int iters) {
    res.z = z;
    res.slacks = s;
    res.y_eq = y;
    res.y_in = w;
    res.mu = mu;
    res.iterations = iters;
    res.objective = prob.objective(z);
  }

  /// Ipopt-style scaled optimality error.
  static double scaled_error(const Vector& r_dual, const Vector& ce, const Vector& r_ineq,
                             const Vector& comp, const Vector& y, const Vector& w, double mu) {
    const double s_max = 100.0;
    const int m = static_cast<int>(y.size() + w.size());
    double mult_sum = y.lpNorm<1>() + w.lpNorm<1>();
    double sd = std::max(s_max, m > 0 ? mult_sum / m : 0.0) / s_max;
    double sc = std::max(s_max, w.size() > 0 ? w.lpNorm<1>() / w.size() : 0.0) / s_max;
    double e = r_dual.size() ? r_dual.lpNorm<Eigen::Infinity>() / sd : 0.0;
    if (ce.size()) e = std::max(e, ce.lpNorm<Eigen::Infinity>());
    if (r_ineq.size()) e = std::max(e, r_ineq.lpNorm<Eigen::Infinity>());
    if (comp.size())
      e = std::max(e, (comp.array() - mu).matrix().lpNorm<Eigen::Infinity>() / sc);
    return e;
  }

  static double max_step(const Vector& v, const Vector& dv, double tau) {
    double alpha = 1.0;
    for (int i = 0; i < v.size(); ++i)
      if (dv[i] < 0.0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
    return alpha;
  }

  static double merit(const NlpProblem& prob, const Vector& z, const Vector& s, const Vector& y,
                      const Vector& w, double mu) {
    if (!z.allFinite() || !s.allFinite()) return std::numeric_limits<double>::infinity();
    for (int i = 0; i < s.size(); ++i)
      if (s[i] <= 0.0) return std::numeric_limits<double>::infinity();
    Vector grad = prob.objective_gradient(z);
    Vector ce = prob.eq_residual(z);
    Vector ci = prob.ineq_residual(z);
    Vector r_dual = grad - prob.eq_jacobian(z).transpose() * y - prob.ineq_jacobian(z).transpose() * w;
    Vector comp = s.cwiseProduct(w).array() - mu;
    double sq = r_dual.squaredNorm() + ce.squaredNorm() + (ci - s).squaredNorm() + comp.squaredNorm();
    return std::sqrt(sq);
  }

  static SparseMatrix assemble_kkt(const SparseMatrix& hess, const SparseMatrix& ae,
                                   const SparseMatrix& ai, const Vector& sigma, int nz, int ne,
                                   double delta) {
    std::vector<Triplet> trip;
    trip.reserve(hess.nonZeros() + 2 * ae.nonZeros() + ai.nonZeros() * 4 + nz + ne);
    for (int c = 0; c < hess.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(hess, c); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    SparseMatrix wbar = ai.transpose() * sigma.asDiagonal() * ai;
    for (int c = 0; c < wbar.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(wbar, c); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < nz; ++i) trip.emplace_back(i, i, delta);
    for (int c = 0; c < ae.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(ae, c); it; ++it) {
        trip.emplace_back(nz + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        trip.emplace_back(static_cast<int>(it.col()), nz + static_cast<int>(it.row()), it.value());
      }
    // small dual regularization keeps the factorization nonsingular when the
    // primal block had to be shifted
    double dc = delta > 0.0 ? 1e-11 : 0.0;
    for (int i = 0; i < ne; ++i) trip.emplace_back(nz + i, nz + i, -dc);
    SparseMatrix kkt(nz + ne, nz + ne);
    kkt.setFromTriplets(trip.begin(), trip.end());
    kkt.makeCompressed();
    return kkt;
  }
};

}  // namespace popf
