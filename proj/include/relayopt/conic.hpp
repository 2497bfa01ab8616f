#pragma once

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "relayopt/errors.hpp"
#include "relayopt/numerics.hpp"

namespace relayopt::conic {

enum class ConeKind
{
  NonNegative,
  SecondOrder
};

/// One block of the slack vector. A second-order block (t, u) requires ||u|| <= t.
struct Cone
{
  ConeKind kind;
  int      dim;
};

inline Cone nonneg(int dim)
{
  return {ConeKind::NonNegative, dim};
}

inline Cone soc(int dim)
{
  return {ConeKind::SecondOrder, dim};
}

/**
 * minimize c^T x  subject to  A x = b,  h - G x in K,
 * where K is the product of `cones` taken in order over the rows of G.
 */
struct ConicProblem
{
  RVector           c;
  RMatrix           A;
  RVector           b;
  RMatrix           G;
  RVector           h;
  std::vector<Cone> cones;

  Eigen::Index num_vars() const
  {
    return c.size();
  }

  /// Throws DimensionError when the pieces do not fit together.
  void validate() const
  {
    auto const n = c.size();
    if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n))
    {
      throw DimensionError("ConicProblem: A / b / c shapes disagree");
    }
    if (G.rows() != h.size() || (G.rows() > 0 && G.cols() != n))
    {
      throw DimensionError("ConicProblem: G / h / c shapes disagree");
    }
    Eigen::Index total = 0;
    for (auto const &k : cones)
    {
      if (k.dim < 1)
      {
        throw DimensionError("ConicProblem: cone of non-positive dimension");
      }
      total += k.dim;
    }
    if (total != G.rows())
    {
      throw DimensionError("ConicProblem: cone dimensions do not sum to rows of G");
    }
    if (!all_finite(c) || !all_finite(A) || !all_finite(b) || !all_finite(G) || !all_finite(h))
    {
      throw DimensionError("ConicProblem: non-finite data");
    }
  }
};

enum class Status
{
  Optimal,
  PrimalInfeasible,
  DualInfeasible,
  MaxIterations
};

inline const char *to_string(Status s)
{
  switch (s)
  {
  case Status::Optimal:
    return "optimal";
  case Status::PrimalInfeasible:
    return "primal-infeasible";
  case Status::DualInfeasible:
    return "dual-infeasible";
  case Status::MaxIterations:
    return "max-iterations";
  }
  return "unknown";
}

struct ConicSolution
{
  Status  status = Status::MaxIterations;
  RVector x;  ///< primal point (or certificate ray for DualInfeasible)
  RVector y;  ///< equality multipliers
  RVector z;  ///< cone multipliers (or certificate for PrimalInfeasible)
  RVector s;  ///< slack h - G x
  double  obj             = 0.0;
  double  primal_residual = 0.0;
  double  dual_residual   = 0.0;
  double  gap             = 0.0;  ///< s^T z / max(1, |obj|)
  int     iterations      = 0;
  /// Complementarity measure (s^T z + tau kappa) / (degree + 1) after each iteration.
  std::vector<double> gap_trace;
};

inline constexpr double kDefaultTolerance = 1e-8;
inline constexpr int    kDefaultMaxIter   = 100;

namespace detail {

/// Nesterov-Todd scaling of one cone block.
struct BlockScaling
{
  ConeKind     kind;
  Eigen::Index offset;
  Eigen::Index dim;
  RVector      d;  ///< orthant: sqrt(s / z)
  double       eta = 1.0;
  RVector      w;  ///< second-order: normalized scaling point, w0^2 - ||w1||^2 = 1
};

inline double soc_residual(const Eigen::Ref<const RVector> &v)
{
  return v(0) * v(0) - v.tail(v.size() - 1).squaredNorm();
}

class Scaling
{
public:
  Scaling(const std::vector<Cone> &cones, const RVector &s, const RVector &z)
  {
    Eigen::Index off = 0;
    for (auto const &k : cones)
    {
      BlockScaling b{k.kind, off, k.dim, {}, 1.0, {}};
      auto const   sb = s.segment(off, k.dim);
      auto const   zb = z.segment(off, k.dim);
      if (k.kind == ConeKind::NonNegative)
      {
        b.d = (sb.array() / zb.array()).sqrt();
      }
      else
      {
        double const  sr = std::sqrt(std::max(soc_residual(sb), std::numeric_limits<double>::min()));
        double const  zr = std::sqrt(std::max(soc_residual(zb), std::numeric_limits<double>::min()));
        RVector const sn = sb / sr;
        RVector const zn = zb / zr;
        double const  gamma = std::sqrt(std::max(0.5 * (1.0 + sn.dot(zn)), std::numeric_limits<double>::min()));
        b.w.resize(k.dim);
        b.w(0)                 = (sn(0) + zn(0)) / (2.0 * gamma);
        b.w.tail(k.dim - 1)    = (sn.tail(k.dim - 1) - zn.tail(k.dim - 1)) / (2.0 * gamma);
        b.eta                  = std::sqrt(sr / zr);
      }
      blocks_.push_back(std::move(b));
      off += k.dim;
    }
  }

  /// W v
  RVector apply(const RVector &v) const
  {
    return transform(v, false);
  }

  /// W^{-1} v
  RVector apply_inverse(const RVector &v) const
  {
    return transform(v, true);
  }

  /// W^{-1} M, column by column.
  RMatrix apply_inverse(const RMatrix &m) const
  {
    RMatrix out(m.rows(), m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j)
    {
      out.col(j) = transform(m.col(j), true);
    }
    return out;
  }

private:
  RVector transform(const RVector &v, bool inverse) const
  {
    RVector out(v.size());
    for (auto const &b : blocks_)
    {
      auto const vb = v.segment(b.offset, b.dim);
      if (b.kind == ConeKind::NonNegative)
      {
        if (inverse)
        {
          out.segment(b.offset, b.dim) = vb.cwiseQuotient(b.d);
        }
        else
        {
          out.segment(b.offset, b.dim) = vb.cwiseProduct(b.d);
        }
        continue;
      }
      double const sign  = inverse ? -1.0 : 1.0;
      double const scale = inverse ? 1.0 / b.eta : b.eta;
      double const w0    = b.w(0);
      auto const   w1    = b.w.tail(b.dim - 1);
      auto const   v1    = vb.tail(b.dim - 1);
      double const wv    = w1.dot(v1);
      out(b.offset)      = scale * (w0 * vb(0) + sign * wv);
      out.segment(b.offset + 1, b.dim - 1) = scale * (v1 + (wv / (1.0 + w0) + sign * vb(0)) * w1);
    }
    return out;
  }

  std::vector<BlockScaling> blocks_;
};

/// Jordan product u o v over the cone product.
inline RVector jordan_product(const std::vector<Cone> &cones, const RVector &u, const RVector &v)
{
  RVector      out(u.size());
  Eigen::Index off = 0;
  for (auto const &k : cones)
  {
    if (k.kind == ConeKind::NonNegative)
    {
      out.segment(off, k.dim) = u.segment(off, k.dim).cwiseProduct(v.segment(off, k.dim));
    }
    else
    {
      out(off)                             = u.segment(off, k.dim).dot(v.segment(off, k.dim));
      out.segment(off + 1, k.dim - 1)      = u(off) * v.segment(off + 1, k.dim - 1) + v(off) * u.segment(off + 1, k.dim - 1);
    }
    off += k.dim;
  }
  return out;
}

/// Solves lambda o v = r for v.
inline RVector jordan_divide(const std::vector<Cone> &cones, const RVector &lambda, const RVector &r)
{
  RVector      out(r.size());
  Eigen::Index off = 0;
  for (auto const &k : cones)
  {
    if (k.kind == ConeKind::NonNegative)
    {
      out.segment(off, k.dim) = r.segment(off, k.dim).cwiseQuotient(lambda.segment(off, k.dim));
    }
    else
    {
      double const l0  = lambda(off);
      auto const   l1  = lambda.segment(off + 1, k.dim - 1);
      double const r0  = r(off);
      auto const   r1  = r.segment(off + 1, k.dim - 1);
      double const det = l0 * l0 - l1.squaredNorm();
      double const v0  = (l0 * r0 - l1.dot(r1)) / det;
      out(off)                        = v0;
      out.segment(off + 1, k.dim - 1) = (r1 - v0 * l1) / l0;
    }
    off += k.dim;
  }
  return out;
}

/// Identity element of the cone product.
inline RVector unit(const std::vector<Cone> &cones, Eigen::Index p)
{
  RVector      e = RVector::Zero(p);
  Eigen::Index off = 0;
  for (auto const &k : cones)
  {
    if (k.kind == ConeKind::NonNegative)
    {
      e.segment(off, k.dim).setOnes();
    }
    else
    {
      e(off) = 1.0;
    }
    off += k.dim;
  }
  return e;
}

inline int degree(const std::vector<Cone> &cones)
{
  int d = 0;
  for (auto const &k : cones)
  {
    d += k.kind == ConeKind::NonNegative ? k.dim : 1;
  }
  return d;
}

/// Largest t with v + t e in the cone's boundary sense: max over blocks of the violation.
inline double max_violation(const std::vector<Cone> &cones, const RVector &v)
{
  double       worst = -std::numeric_limits<double>::infinity();
  Eigen::Index off   = 0;
  for (auto const &k : cones)
  {
    if (k.kind == ConeKind::NonNegative)
    {
      worst = std::max(worst, -v.segment(off, k.dim).minCoeff());
    }
    else
    {
      worst = std::max(worst, v.segment(off + 1, k.dim - 1).norm() - v(off));
    }
    off += k.dim;
  }
  return worst;
}

/// Largest alpha >= 0 keeping x + alpha d inside the cone (x interior). Infinity when unbounded.
inline double max_step(const std::vector<Cone> &cones, const RVector &x, const RVector &d)
{
  double       alpha = std::numeric_limits<double>::infinity();
  Eigen::Index off   = 0;
  for (auto const &k : cones)
  {
    if (k.kind == ConeKind::NonNegative)
    {
      for (Eigen::Index i = off; i < off + k.dim; ++i)
      {
        if (d(i) < 0.0)
        {
          alpha = std::min(alpha, -x(i) / d(i));
        }
      }
    }
    else
    {
      auto const   xb = x.segment(off, k.dim);
      auto const   db = d.segment(off, k.dim);
      double const a  = soc_residual(db);
      double const b  = xb(0) * db(0) - xb.tail(k.dim - 1).dot(db.tail(k.dim - 1));
      double const c  = std::max(soc_residual(xb), 0.0);
      // smallest positive root of a t^2 + 2 b t + c
      double root = std::numeric_limits<double>::infinity();
      if (std::abs(a) < 1e-300)
      {
        if (b < 0.0)
        {
          root = -c / (2.0 * b);
        }
      }
      else
      {
        double const disc = b * b - a * c;
        if (disc >= 0.0)
        {
          double const sq = std::sqrt(disc);
          double const q  = -(b + std::copysign(sq, b));
          for (double r : {q / a, q != 0.0 ? c / q : std::numeric_limits<double>::infinity()})
          {
            if (r > 0.0)
            {
              root = std::min(root, r);
            }
          }
        }
      }
      if (db(0) < 0.0)
      {
        root = std::min(root, -xb(0) / db(0));
      }
      alpha = std::min(alpha, root);
    }
    off += k.dim;
  }
  return alpha;
}

/**
 * Dense solver for the scaled KKT system
 *   [ 0   A^T  G^T  ] [dx]   [r1]
 *   [ A   0    0    ] [dy] = [r2]
 *   [ G   0   -W^2  ] [dz]   [r3]
 * through the reduced matrix [G^T W^-2 G, A^T; A, 0].
 */
class KktSolver
{
public:
  KktSolver(const ConicProblem &p, const Scaling &w)
    : p_(p)
    , w_(w)
    , n_(p.num_vars())
    , m_(p.A.rows())
  {
    gs_ = w.apply_inverse(p.G);
    RMatrix k(n_ + m_, n_ + m_);
    k.setZero();
    k.topLeftCorner(n_, n_) = gs_.transpose() * gs_;
    if (m_ > 0)
    {
      k.topRightCorner(n_, m_)   = p.A.transpose();
      k.bottomLeftCorner(m_, n_) = p.A;
    }
    reduced_ = k;
    double const reg = 1e-13 * std::max(1.0, k.cwiseAbs().maxCoeff());
    k.topLeftCorner(n_, n_).diagonal().array() += reg;
    if (m_ > 0)
    {
      k.bottomRightCorner(m_, m_).diagonal().array() -= reg;
    }
    lu_.compute(k);
  }

  void solve(const RVector &r1, const RVector &r2, const RVector &r3, RVector &dx, RVector &dy, RVector &dz) const
  {
    reduced_solve(r1, r2, r3, dx, dy, dz);
    // Refine against the unreduced system; the reduction squares the conditioning of W.
    double const scale = 1.0 + std::max({r1.lpNorm<Eigen::Infinity>(), m_ > 0 ? r2.lpNorm<Eigen::Infinity>() : 0.0,
                                         r3.lpNorm<Eigen::Infinity>()});
    for (int it = 0; it < 4; ++it)
    {
      RVector e1 = r1 - p_.G.transpose() * dz;
      if (m_ > 0)
      {
        e1 -= p_.A.transpose() * dy;
      }
      RVector const e2 = m_ > 0 ? RVector(r2 - p_.A * dx) : RVector();
      RVector const e3 = r3 - p_.G * dx + w_.apply(w_.apply(dz));
      double const  err = std::max({e1.lpNorm<Eigen::Infinity>(), m_ > 0 ? e2.lpNorm<Eigen::Infinity>() : 0.0,
                                    e3.lpNorm<Eigen::Infinity>()});
      if (!(err > 1e-14 * scale))
      {
        break;
      }
      RVector cx, cy, cz;
      reduced_solve(e1, e2, e3, cx, cy, cz);
      dx += cx;
      if (m_ > 0)
      {
        dy += cy;
      }
      dz += cz;
    }
  }

private:
  void reduced_solve(const RVector &r1, const RVector &r2, const RVector &r3, RVector &dx, RVector &dy, RVector &dz) const
  {
    RVector const r3s = w_.apply_inverse(r3);
    RVector       rhs(n_ + m_);
    rhs.head(n_) = r1 + gs_.transpose() * r3s;
    if (m_ > 0)
    {
      rhs.tail(m_) = r2;
    }
    RVector sol = lu_.solve(rhs);
    for (int it = 0; it < 3; ++it)
    {
      RVector const res = rhs - reduced_ * sol;
      if (res.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
      {
        break;
      }
      sol += lu_.solve(res);
    }
    dx = sol.head(n_);
    dy = m_ > 0 ? RVector(sol.tail(m_)) : RVector();
    dz = w_.apply_inverse(RVector(gs_ * dx - r3s));
  }

  const ConicProblem          &p_;
  const Scaling               &w_;
  Eigen::Index                 n_;
  Eigen::Index                 m_;
  RMatrix                      gs_;
  RMatrix                      reduced_;
  Eigen::PartialPivLU<RMatrix> lu_;
};

}  // namespace detail

/**
 * Primal-dual path-following method on the homogeneous self-dual embedding
 * with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
 */
inline ConicSolution solve(const ConicProblem &p, double tol = kDefaultTolerance, int max_iter = kDefaultMaxIter)
{
  if (!(tol > 0.0))
  {
    throw ParameterError("conic::solve: tolerance must be positive");
  }
  p.validate();

  using namespace detail;
  auto const   n     = p.num_vars();
  auto const   m     = p.A.rows();
  auto const   np    = p.G.rows();
  auto const  &cones = p.cones;
  int const    deg   = degree(cones);
  RVector const e    = unit(cones, np);
  RVector const A_b  = m > 0 ? p.b : RVector();
  double const nb = 1.0 + p.b.norm();
  double const nh = 1.0 + p.h.norm();
  double const nc = 1.0 + p.c.norm();

  auto mat_A  = [&](const RVector &v) -> RVector { return m > 0 ? RVector(p.A * v) : RVector(); };
  auto mat_At = [&](const RVector &v) -> RVector { return m > 0 ? RVector(p.A.transpose() * v) : RVector::Zero(n); };

  ConicSolution out;

  // Initial point from two least-squares solves with W = I.
  RVector x, y, z, s;
  {
    RVector ones_s = e, ones_z = e;
    Scaling identity(cones, ones_s, ones_z);
    KktSolver kkt(p, identity);
    RVector dx, dy, dz;
    kkt.solve(RVector::Zero(n), A_b, p.h, dx, dy, dz);
    x = dx;
    s = -dz;
    kkt.solve(-p.c, RVector::Zero(m), RVector::Zero(np), dx, dy, dz);
    y = dy;
    z = dz;
    if (double const a = max_violation(cones, s); a >= -1e-8)
    {
      s += (1.0 + a) * e;
    }
    if (double const a = max_violation(cones, z); a >= -1e-8)
    {
      z += (1.0 + a) * e;
    }
  }
  double tau   = 1.0;
  double kappa = 1.0;

  auto mu_of = [&](const RVector &sv, const RVector &zv, double t, double k) {
    return (sv.dot(zv) + t * k) / (deg + 1);
  };

  struct Snapshot
  {
    RVector x, y, z, s;
    double  tau = 1.0, kappa = 1.0, score = std::numeric_limits<double>::infinity();
  } best;

  for (int iter = 0; iter <= max_iter; ++iter)
  {
    // Residuals of the embedding.
    RVector const rx = mat_At(y) + p.G.transpose() * z + p.c * tau;
    RVector const ry = m > 0 ? RVector(-mat_A(x) + p.b * tau) : RVector();
    RVector const rz = -p.G * x + p.h * tau - s;
    double const  cx = p.c.dot(x);
    double const  by = m > 0 ? p.b.dot(y) : 0.0;
    double const  hz = p.h.dot(z);
    double const  rt = -cx - by - hz - kappa;
    double const  mu = mu_of(s, z, tau, kappa);

    // Termination tests on the de-homogenized point.
    double const pres = std::max(m > 0 ? ry.norm() / tau / nb : 0.0, rz.norm() / tau / nh);
    double const dres = rx.norm() / tau / nc;
    double const pcost = cx / tau;
    double const gap_abs = s.dot(z) / (tau * tau);
    double const gap_rel = std::max(0.0, gap_abs) / std::max(1.0, std::abs(pcost));

    out.iterations = iter;
    if (double const score = std::max({pres, dres, gap_rel}); score < best.score)
    {
      best = {x, y, z, s, tau, kappa, score};
    }
#ifdef RELAYOPT_CONIC_DEBUG
    std::fprintf(stderr, "it %d pres %.3e dres %.3e gap %.3e tau %.3e kappa %.3e mu %.3e\n", iter, pres, dres, gap_rel, tau, kappa, mu);
#endif
    if (pres <= tol && dres <= tol && gap_rel <= tol)
    {
      out.status          = Status::Optimal;
      out.x               = x / tau;
      out.y               = y / tau;
      out.z               = z / tau;
      out.s               = s / tau;
      out.obj             = pcost;
      out.primal_residual = pres;
      out.dual_residual   = dres;
      out.gap             = gap_rel;
      return out;
    }
    if (by + hz < 0.0)
    {
      double const scale = -(by + hz);
      double const res   = (mat_At(y) + p.G.transpose() * z).norm() / scale;
      if (res <= tol)
      {
        out.status          = Status::PrimalInfeasible;
        out.y               = y / scale;
        out.z               = z / scale;
        out.x               = RVector::Zero(n);
        out.s               = RVector::Zero(np);
        out.obj             = std::numeric_limits<double>::infinity();
        out.primal_residual = pres;
        out.dual_residual   = res;
        return out;
      }
    }
    if (cx < 0.0)
    {
      double const scale = -cx;
      double const res   = std::max(mat_A(x).norm(), (p.G * x + s).norm()) / scale;
      if (res <= tol)
      {
        out.status          = Status::DualInfeasible;
        out.x               = x / scale;
        out.s               = s / scale;
        out.y               = RVector::Zero(m);
        out.z               = RVector::Zero(np);
        out.obj             = -std::numeric_limits<double>::infinity();
        out.primal_residual = res;
        out.dual_residual   = dres;
        return out;
      }
    }
    if (iter == max_iter)
    {
      break;
    }

    Scaling const   w(cones, s, z);
    RVector const   lambda = w.apply(z);
    KktSolver const kkt(p, w);

    // Direction for the tau column, shared by predictor and corrector.
    RVector v1x, v1y, v1z;
    kkt.solve(-p.c, A_b, p.h, v1x, v1y, v1z);
    double const qv1 = p.c.dot(v1x) + (m > 0 ? p.b.dot(v1y) : 0.0) + p.h.dot(v1z);

    struct Direction
    {
      RVector dx, dy, dz, ds;
      double  dtau = 0.0, dkappa = 0.0;
    };

    auto direction = [&](double target, const RVector &rs, double rk) {
      RVector const t1 = -target * rx;
      RVector const t2 = m > 0 ? RVector(-target * ry) : RVector();
      RVector const t3 = -target * rz;
      double const  t4 = -target * rt;
      RVector const lrs = jordan_divide(cones, lambda, rs);
      RVector const wlrs = w.apply(lrs);
      RVector       v0x, v0y, v0z;
      kkt.solve(t1, m > 0 ? RVector(-t2) : RVector(), RVector(-t3 - wlrs), v0x, v0y, v0z);
      double const qv0 = p.c.dot(v0x) + (m > 0 ? p.b.dot(v0y) : 0.0) + p.h.dot(v0z);
      Direction    d;
      d.dtau   = (t4 + qv0 + rk / tau) / (kappa / tau - qv1);
      d.dx     = v0x + d.dtau * v1x;
      d.dy     = m > 0 ? RVector(v0y + d.dtau * v1y) : RVector();
      d.dz     = v0z + d.dtau * v1z;
      d.ds     = w.apply(RVector(lrs - w.apply(d.dz)));
      d.dkappa = (rk - kappa * d.dtau) / tau;
      return d;
    };

    auto step_bound = [&](const Direction &d) {
      double a = std::min(max_step(cones, s, d.ds), max_step(cones, z, d.dz));
      if (d.dtau < 0.0)
      {
        a = std::min(a, -tau / d.dtau);
      }
      if (d.dkappa < 0.0)
      {
        a = std::min(a, -kappa / d.dkappa);
      }
      return a;
    };

    // Predictor.
    RVector const   ll  = jordan_product(cones, lambda, lambda);
    Direction const aff = direction(1.0, -ll, -tau * kappa);
    double const    alpha_aff = std::min(1.0, step_bound(aff));
    double const    sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

    // Corrector.
    RVector const ds_scaled = w.apply_inverse(aff.ds);
    RVector const dz_scaled = w.apply(aff.dz);
    RVector const rs = -ll - jordan_product(cones, ds_scaled, dz_scaled) + sigma * mu * e;
    double const  rk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
    Direction const d = direction(1.0 - sigma, rs, rk);

    double alpha = std::min(1.0, 0.99 * step_bound(d));
    if (!(alpha > 1e-14))
    {
      break;
    }
    // Never let the complementarity measure grow.
    for (int shrink = 0; shrink < 30; ++shrink)
    {
      double const mu_new = mu_of(s + alpha * d.ds, z + alpha * d.dz, tau + alpha * d.dtau, kappa + alpha * d.dkappa);
      if (mu_new <= mu)
      {
        break;
      }
      alpha *= 0.5;
    }

    if (!all_finite(d.dx) || !all_finite(d.dz) || !all_finite(d.ds) || !std::isfinite(d.dtau) ||
        !std::isfinite(d.dkappa) || (m > 0 && !all_finite(d.dy)))
    {
      break;
    }
    x += alpha * d.dx;
    if (m > 0)
    {
      y += alpha * d.dy;
    }
    z += alpha * d.dz;
    s += alpha * d.ds;
    tau += alpha * d.dtau;
    kappa += alpha * d.dkappa;
    out.gap_trace.push_back(mu_of(s, z, tau, kappa));
  }

  // Out of iterations or numerically stuck: report the best point seen.
  if (best.score < std::numeric_limits<double>::infinity())
  {
    x     = best.x;
    y     = best.y;
    z     = best.z;
    s     = best.s;
    tau   = best.tau;
    kappa = best.kappa;
  }
  out.status          = Status::MaxIterations;
  out.x               = x / tau;
  out.y               = y / tau;
  out.z               = z / tau;
  out.s               = s / tau;
  out.obj             = p.c.dot(out.x);
  out.primal_residual = std::max(m > 0 ? (p.A * out.x - p.b).norm() / nb : 0.0, (p.G * out.x + out.s - p.h).norm() / nh);
  out.dual_residual   = (mat_At(out.y) + p.G.transpose() * out.z + p.c).norm() / nc;
  out.gap             = std::max(0.0, out.s.dot(out.z)) / std::max(1.0, std::abs(out.obj));
  return out;
}

/// How far h - G x sits outside the cone product (0 when inside).
inline double cone_violation(const ConicProblem &p, const RVector &x)
{
  RVector const s = p.h - p.G * x;
  return std::max(0.0, detail::max_violation(p.cones, s));
}

/// Equality residual ||A x - b|| / (1 + ||b||).
inline double equality_residual(const ConicProblem &p, const RVector &x)
{
  if (p.A.rows() == 0)
  {
    return 0.0;
  }
  return (p.A * x - p.b).norm() / (1.0 + p.b.norm());
}

struct FeasibilityResult
{
  bool    feasible = false;
  RVector x;
  Status  status = Status::MaxIterations;
};

/**
 * Decides whether { x : A x = b, h - G x in K } is nonempty. The objective of
 * `p` is ignored. A point is reported only after it has been replayed against
 * the constraints to within `tol`; anything else counts as infeasible.
 */
inline FeasibilityResult feasibility(const ConicProblem &p, double tol = kDefaultTolerance,
                                     int max_iter = kDefaultMaxIter)
{
  ConicProblem q = p;
  q.c            = RVector::Zero(p.num_vars());
  auto const sol = solve(q, tol, max_iter);

  FeasibilityResult r;
  r.status = sol.status;
  if (sol.status == Status::Optimal || sol.status == Status::MaxIterations)
  {
    double const viol = cone_violation(q, sol.x) / (1.0 + q.h.norm());
    if (viol <= tol && equality_residual(q, sol.x) <= tol)
    {
      r.feasible = true;
      r.x        = sol.x;
    }
  }
  return r;
}

/// minimize c^T x subject to G x <= h, A x = b.
inline ConicSolution solve_lp(const RVector &c, const RMatrix &g, const RVector &h, const RMatrix &a, const RVector &b,
                              double tol = kDefaultTolerance, int max_iter = kDefaultMaxIter)
{
  ConicProblem p;
  p.c = c;
  p.G = g;
  p.h = h;
  p.A = a.size() == 0 ? RMatrix(0, c.size()) : a;
  p.b = b;
  if (g.rows() > 0)
  {
    p.cones.push_back(nonneg(static_cast<int>(g.rows())));
  }
  return solve(p, tol, max_iter);
}

/**
 * Plain-text dump:
 *
 *   conic <n> <m> <p>
 *   cones <kind><dim> ...       kind is 'l' (orthant) or 'q' (second-order)
 *   c <n numbers>
 *   A <m*n numbers, row-major>
 *   b <m numbers>
 *   G <p*n numbers, row-major>
 *   h <p numbers>
 */
inline void dump(std::ostream &os, const ConicProblem &p)
{
  os << std::setprecision(17);
  auto const n = p.num_vars();
  os << "conic " << n << ' ' << p.A.rows() << ' ' << p.G.rows() << '\n';
  os << "cones";
  for (auto const &k : p.cones)
  {
    os << ' ' << (k.kind == ConeKind::NonNegative ? 'l' : 'q') << k.dim;
  }
  os << '\n';
  auto row = [&](const char *tag, auto const &v) {
    os << tag;
    for (Eigen::Index i = 0; i < v.rows(); ++i)
    {
      for (Eigen::Index j = 0; j < v.cols(); ++j)
      {
        os << ' ' << v(i, j);
      }
    }
    os << '\n';
  };
  row("c", p.c);
  row("A", p.A);
  row("b", p.b);
  row("G", p.G);
  row("h", p.h);
}

inline ConicProblem load(std::istream &is)
{
  auto expect = [&](const std::string &tag) {
    std::string t;
    if (!(is >> t) || t != tag)
    {
      throw DimensionError("conic::load: expected '" + tag + "'");
    }
  };
  auto read = [&](Eigen::Index count) {
    RVector v(count);
    for (Eigen::Index i = 0; i < count; ++i)
    {
      if (!(is >> v(i)))
      {
        throw DimensionError("conic::load: truncated numeric block");
      }
    }
    return v;
  };

  Eigen::Index n = 0, m = 0, np = 0;
  expect("conic");
  if (!(is >> n >> m >> np) || n < 0 || m < 0 || np < 0)
  {
    throw DimensionError("conic::load: bad header");
  }
  expect("cones");
  ConicProblem p;
  std::string  line;
  std::getline(is, line);
  std::istringstream cs(line);
  std::string        tok;
  while (cs >> tok)
  {
    if (tok.size() < 2 || (tok[0] != 'l' && tok[0] != 'q'))
    {
      throw DimensionError("conic::load: bad cone token '" + tok + "'");
    }
    p.cones.push_back({tok[0] == 'l' ? ConeKind::NonNegative : ConeKind::SecondOrder, std::stoi(tok.substr(1))});
  }
  expect("c");
  p.c = read(n);
  expect("A");
  RVector const a = read(m * n);
  p.A             = RMatrix(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
  {
    p.A.row(i) = a.segment(i * n, n).transpose();
  }
  expect("b");
  p.b = read(m);
  expect("G");
  RVector const g = read(np * n);
  p.G             = RMatrix(np, n);
  for (Eigen::Index i = 0; i < np; ++i)
  {
    p.G.row(i) = g.segment(i * n, n).transpose();
  }
  expect("h");
  p.h = read(np);
  p.validate();
  return p;
}

}  // namespace relayopt::conic
