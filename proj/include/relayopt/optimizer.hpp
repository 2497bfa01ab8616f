#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "relayopt/conic.hpp"
#include "relayopt/errors.hpp"
#include "relayopt/mechanism.hpp"
#include "relayopt/model.hpp"
#include "relayopt/numerics.hpp"

namespace relayopt {

enum class StopReason
{
  Tolerance,      ///< |delta objective| fell below tol_outer
  NoImprovement,  ///< a full cycle would have lowered the objective; previous iterate kept
  MaxIterations
};

inline const char *to_string(StopReason r)
{
  switch (r)
  {
  case StopReason::Tolerance:
    return "tolerance";
  case StopReason::NoImprovement:
    return "no-improvement";
  case StopReason::MaxIterations:
    return "max-iterations";
  }
  return "unknown";
}

struct JointSolution
{
  CVector             f;  ///< relay weights in selection order
  double              p1 = 0.0;
  double              p2 = 0.0;
  double              nu = 0.0;  ///< worst-relay stored power (W)
  double              r0 = 0.0;
  double              beta = 0.0;
  double              secrecy_rate = 0.0;
  std::vector<double> trace;  ///< secrecy sum rate after initialization and after each accepted cycle
  int                 iterations = 0;
  StopReason          stop = StopReason::MaxIterations;

  bool converged() const
  {
    return stop != StopReason::MaxIterations;
  }
};

struct BeamformingResult
{
  CVector f;
  double  nu   = 0.0;
  double  r0   = 0.0;
  double  beta = 0.0;
};

struct HarvestRequirements
{
  std::vector<int>    relays;   ///< global indices of the winners
  std::vector<double> u;        ///< required stored power per winner (W)
  std::vector<bool>   floored;  ///< true where a negative utility was raised to 0
};

/// Upper bound on any achievable sum-rate target, from the two one-way links without the +1 noise term.
inline double rate_upper_bound(const EffectiveChannels &eff, const SystemParams &params, double p1, double p2)
{
  double q1 = 0.0;  // h21^H Cn1^+ h21
  double q2 = 0.0;  // h12^H Cn2^+ h12
  for (int k = 0; k < eff.size(); ++k)
  {
    if (eff.cn1(k) > 0.0)
    {
      q1 += std::norm(eff.h21(k)) / eff.cn1(k);
    }
    if (eff.cn2(k) > 0.0)
    {
      q2 += std::norm(eff.h12(k)) / eff.cn2(k);
    }
  }
  double const r1 = capacity(p2 * q1 / params.sigma2);
  double const r2 = capacity(p1 * q2 / params.sigma2);
  return 2.0 * std::max(r1, r2);
}

/// Null-space basis with columns rotated so that B^H h21 is real and non-negative.
struct AlignedBasis
{
  CMatrix B;
  RVector g;  ///< B^H h21 (= B^H h12)
};

inline AlignedBasis phase_align(const EffectiveChannels &eff, const CMatrix &basis)
{
  if (basis.rows() != eff.size())
  {
    throw DimensionError("phase_align: basis rows differ from K");
  }
  AlignedBasis out;
  out.B                = basis;
  CVector const g      = basis.adjoint() * eff.h21;
  out.g.resize(g.size());
  for (Eigen::Index k = 0; k < g.size(); ++k)
  {
    double const mag = std::abs(g(k));
    if (mag > 0.0)
    {
      out.B.col(k) *= g(k) / mag;
    }
    out.g(k) = mag;
  }
  return out;
}

inline AlignedBasis aligned_null_space(const EffectiveChannels &eff)
{
  if (eff.size() < 3)
  {
    throw ParameterError("null-space beamforming needs at least three selected relays");
  }
  return phase_align(eff, null_space_basis(eff.hbar_e));
}

enum class SocpMode
{
  FeasibilityOnly,  ///< rate and per-relay power constraints only
  MaximizeStorage   ///< adds the storage slack nu and maximizes it
};

namespace detail {

/// Rows of the real map x -> [Re(M fbar); Im(M fbar)] for x = [Re fbar; Im fbar].
inline RMatrix real_block(const CMatrix &m)
{
  auto const r = m.rows();
  auto const c = m.cols();
  RMatrix    out(2 * r, 2 * c);
  out.topLeftCorner(r, c)     = m.real();
  out.topRightCorner(r, c)    = -m.imag();
  out.bottomLeftCorner(r, c)  = m.imag();
  out.bottomRightCorner(r, c) = m.real();
  return out;
}

/// sigma^2 (2^{2 r} - 1) / p, or nullopt when the target is unreachable with p = 0.
inline double rate_eta(double rate, double p, double sigma2)
{
  double const need = sigma2 * std::expm1(2.0 * rate * std::log(2.0));
  if (need <= 0.0)
  {
    return 0.0;
  }
  if (!(p > 0.0))
  {
    throw InfeasibleTarget("positive rate target with zero source power");
  }
  return need / p;
}

struct SocpBuilder
{
  Eigen::Index         nvars;
  std::vector<RVector> grows;
  std::vector<double>  h;
  std::vector<conic::Cone> cones;

  /// Appends a cone block whose slack is s = h - G x.
  void add(conic::ConeKind kind, const RMatrix &g, const RVector &hv)
  {
    for (Eigen::Index i = 0; i < g.rows(); ++i)
    {
      grows.emplace_back(g.row(i).transpose());
      h.push_back(hv(i));
    }
    cones.push_back({kind, static_cast<int>(g.rows())});
  }

  conic::ConicProblem finish(const RVector &c) const
  {
    conic::ConicProblem p;
    p.c = c;
    p.A = RMatrix(0, nvars);
    p.b = RVector(0);
    p.G.resize(static_cast<Eigen::Index>(grows.size()), nvars);
    p.h.resize(static_cast<Eigen::Index>(h.size()));
    for (std::size_t i = 0; i < grows.size(); ++i)
    {
      p.G.row(static_cast<Eigen::Index>(i)) = grows[i].transpose();
      p.h(static_cast<Eigen::Index>(i))     = h[i];
    }
    p.cones = cones;
    return p;
  }
};

}  // namespace detail

/**
 * Second-order cone program over f = B fbar for a rate split beta and target r0.
 * Variables x = [Re fbar; Im fbar] (and nu last in MaximizeStorage mode);
 * the objective minimizes -nu.
 */
inline conic::ConicProblem build_relay_socp(double beta, double r0, const EffectiveChannels &eff,
                                            const AlignedBasis &basis, const SystemParams &params, double p1,
                                            double p2, SocpMode mode = SocpMode::MaximizeStorage)
{
  if (!(beta >= 0.0 && beta <= 1.0))
  {
    throw ParameterError("build_relay_socp: beta outside [0, 1]");
  }
  if (!(r0 >= 0.0))
  {
    throw ParameterError("build_relay_socp: negative rate target");
  }
  auto const d      = basis.B.cols();
  auto const k      = basis.B.rows();
  bool const with_nu = mode == SocpMode::MaximizeStorage;
  auto const nf     = 2 * d;
  auto const n      = nf + (with_nu ? 1 : 0);

  detail::SocpBuilder sb{n, {}, {}, {}};

  double const eta1 = detail::rate_eta(beta * r0, p2, params.sigma2);
  double const eta2 = detail::rate_eta((1.0 - beta) * r0, p1, params.sigma2);

  // Signal amplitude g^T Re(fbar) must dominate the scaled noise norm.
  RMatrix g_sig = RMatrix::Zero(1, n);
  g_sig.block(0, 0, 1, d) = -basis.g.transpose();
  for (auto const &[eta, cn] : {std::pair{eta1, &eff.cn1}, std::pair{eta2, &eff.cn2}})
  {
    if (eta == 0.0)
    {
      sb.add(conic::ConeKind::NonNegative, g_sig, RVector::Zero(1));
      continue;
    }
    double const  se   = std::sqrt(eta);
    CMatrix const m    = cn->cwiseSqrt().cast<cplx>().asDiagonal() * basis.B;
    RMatrix       g    = RMatrix::Zero(2 * k + 2, n);
    RVector       hv   = RVector::Zero(2 * k + 2);
    g.row(0)           = g_sig.row(0);
    g.block(1, 0, 2 * k, nf) = -se * detail::real_block(m);
    hv(2 * k + 1)      = se;
    sb.add(conic::ConeKind::SecondOrder, g, hv);
  }

  for (Eigen::Index i = 0; i < k; ++i)
  {
    RMatrix const bi = detail::real_block(basis.B.row(i));

    // |B_i fbar| <= sqrt(p_r / Rs_ii)
    RMatrix g  = RMatrix::Zero(3, n);
    RVector hv = RVector::Zero(3);
    hv(0)      = std::sqrt(params.p_r / eff.rs(i));
    g.block(1, 0, 2, nf) = -bi;
    sb.add(conic::ConeKind::SecondOrder, g, hv);

    if (with_nu)
    {
      // |B_i fbar|^2 <= t with t = xi (1 - rho) - nu / Rs_ii, as ||(2 u, t - 1)|| <= t + 1
      double const frac = params.harvest_fraction(eff.selected[static_cast<std::size_t>(i)]);
      RMatrix      gs   = RMatrix::Zero(4, n);
      RVector      hs   = RVector::Zero(4);
      hs(0)             = frac + 1.0;
      gs(0, nf)         = 1.0 / eff.rs(i);
      gs.block(1, 0, 2, nf) = -2.0 * bi;
      hs(3)             = frac - 1.0;
      gs(3, nf)         = 1.0 / eff.rs(i);
      sb.add(conic::ConeKind::SecondOrder, gs, hs);
    }
  }

  RVector c = RVector::Zero(n);
  if (with_nu)
  {
    c(nf) = -1.0;
  }
  return sb.finish(c);
}

inline CVector weights_from_solution(const AlignedBasis &basis, const RVector &x)
{
  auto const d = basis.B.cols();
  CVector    fbar(d);
  for (Eigen::Index j = 0; j < d; ++j)
  {
    fbar(j) = cplx(x(j), x(d + j));
  }
  return basis.B * fbar;
}

/// Throws FeasibilityError for the first selected relay whose harvest cannot cover u.
inline void check_harvest(const EffectiveChannels &eff, const SystemParams &params, const std::vector<double> &u)
{
  if (u.size() != static_cast<std::size_t>(eff.size()))
  {
    throw DimensionError("harvest requirement vector length differs from K");
  }
  for (int i = 0; i < eff.size(); ++i)
  {
    int const    relay = eff.selected[static_cast<std::size_t>(i)];
    double const ph    = params.harvest_fraction(relay) * eff.rs(i);
    if (ph < u[static_cast<std::size_t>(i)])
    {
      throw FeasibilityError(relay, "relay " + std::to_string(relay) + " cannot harvest its required " +
                                        std::to_string(u[static_cast<std::size_t>(i)]) + " W");
    }
  }
}

namespace detail {

inline bool rate_feasible(double beta, double r0, const EffectiveChannels &eff, const AlignedBasis &basis,
                          const SystemParams &params, double p1, double p2)
{
  try
  {
    auto const prob = build_relay_socp(beta, r0, eff, basis, params, p1, p2, SocpMode::FeasibilityOnly);
    return conic::feasibility(prob).feasible;
  }
  catch (const InfeasibleTarget &)
  {
    return false;
  }
}

}  // namespace detail

/// Largest feasible r0 for one split, by bisection on [0, r_max].
inline double max_rate_target(double beta, const EffectiveChannels &eff, const AlignedBasis &basis,
                              const SystemParams &params, double p1, double p2, double r_max)
{
  if (detail::rate_feasible(beta, r_max, eff, basis, params, p1, p2))
  {
    return r_max;
  }
  double lo = 0.0;
  double hi = r_max;
  while (hi - lo > params.r0_tol)
  {
    double const mid = 0.5 * (lo + hi);
    (detail::rate_feasible(beta, mid, eff, basis, params, p1, p2) ? lo : hi) = mid;
  }
  return lo;
}

/**
 * Rate-split grid plus r0 bisection, then storage maximization at the best
 * target. Returns the split maximizing r0 + nu.
 */
inline BeamformingResult solve_beamforming(const EffectiveChannels &eff, const SystemParams &params, double p1,
                                           double p2, const std::vector<double> &u)
{
  check_harvest(eff, params, u);
  auto const   basis = aligned_null_space(eff);
  double const r_max = rate_upper_bound(eff, params, p1, p2);

  std::optional<BeamformingResult> best;
  for (int j = 0; j < params.beta_grid; ++j)
  {
    double const beta = params.beta_grid == 1 ? 0.5 : static_cast<double>(j) / (params.beta_grid - 1);
    double       r0   = max_rate_target(beta, eff, basis, params, p1, p2, r_max);

    std::optional<conic::ConicSolution> sol;
    for (int backoff = 0; backoff < 3 && !sol; ++backoff)
    {
      auto s = conic::solve(build_relay_socp(beta, r0, eff, basis, params, p1, p2));
      if (s.status == conic::Status::Optimal)
      {
        sol = std::move(s);
      }
      else if (r0 == 0.0)
      {
        break;
      }
      else
      {
        r0 = std::max(0.0, r0 - params.r0_tol);
      }
    }
    if (!sol)
    {
      continue;
    }
    BeamformingResult cand;
    cand.beta = beta;
    cand.r0   = r0;
    cand.nu   = sol->x(sol->x.size() - 1);
    cand.f    = weights_from_solution(basis, sol->x);

    if (!best)
    {
      best = cand;
      continue;
    }
    double const score      = cand.r0 + cand.nu;
    double const best_score = best->r0 + best->nu;
    if (score > best_score || (score == best_score && cand.r0 > best->r0))
    {
      best = cand;
    }
  }
  if (!best)
  {
    throw FeasibilityError(-1, "beamforming: no split admits a feasible storage-maximizing solution");
  }
  return *best;
}

/// mu1 = gamma2 / p1 and mu2 = gamma1 / p2 at weights f.
inline std::pair<double, double> snr_coefficients(const CVector &f, const EffectiveChannels &eff, double sigma2)
{
  double const mu1 = std::norm(f.dot(eff.h12)) / (sigma2 * (1.0 + f.cwiseAbs2().dot(eff.cn2)));
  double const mu2 = std::norm(f.dot(eff.h21)) / (sigma2 * (1.0 + f.cwiseAbs2().dot(eff.cn1)));
  return {mu1, mu2};
}

/**
 * Source-power LP over x = (p1, p2, nu): maximize mu1 p1 + mu2 p2 + nu under
 * leakage, harvesting, per-relay power, storage and box constraints.
 */
inline conic::ConicProblem build_power_lp(const CVector &f, const ChannelRealization &ch,
                                          const std::vector<int> &selected, const SystemParams &params,
                                          const std::vector<double> &u)
{
  check_selection(selected, ch.size());
  if (f.size() != static_cast<Eigen::Index>(selected.size()) || u.size() != selected.size())
  {
    throw DimensionError("build_power_lp: f, u and selection lengths differ");
  }
  auto const eff       = effective_channels(ch, selected, 0.0, 0.0, params.sigma2);
  auto const [mu1, mu2] = snr_coefficients(f, eff, params.sigma2);
  double const s2       = params.sigma2;
  auto const   k        = static_cast<Eigen::Index>(selected.size());

  Eigen::Index const rows = 1 + 3 * k + 4;
  RMatrix            g    = RMatrix::Zero(rows, 3);
  RVector            h    = RVector::Zero(rows);
  Eigen::Index       r    = 0;

  g(r, 0) = std::norm(ch.h1e);
  g(r, 1) = std::norm(ch.h2e);
  h(r++)  = s2 * std::expm1(2.0 * params.r_e * std::log(2.0));

  for (Eigen::Index i = 0; i < k; ++i)
  {
    auto const   rel  = ch.relay(selected[static_cast<std::size_t>(i)]);
    double const a1   = std::norm(rel.h1);
    double const a2   = std::norm(rel.h2);
    double const frac = params.harvest_fraction(selected[static_cast<std::size_t>(i)]);
    double const fi   = std::norm(f(i));

    g(r, 0) = -frac * a1;
    g(r, 1) = -frac * a2;
    h(r++)  = frac * s2 - u[static_cast<std::size_t>(i)];

    g(r, 0) = fi * a1;
    g(r, 1) = fi * a2;
    h(r++)  = params.p_r - fi * s2;

    g(r, 0) = -(frac - fi) * a1;
    g(r, 1) = -(frac - fi) * a2;
    g(r, 2) = 1.0;
    h(r++)  = (frac - fi) * s2;
  }
  for (int j = 0; j < 2; ++j)
  {
    g(r, j)  = -1.0;
    h(r++)   = 0.0;
    g(r, j)  = 1.0;
    h(r++)   = params.P_max;
  }

  conic::ConicProblem p;
  p.c = RVector(3);
  p.c << -mu1, -mu2, -1.0;
  p.A     = RMatrix(0, 3);
  p.b     = RVector(0);
  p.G     = g;
  p.h     = h;
  p.cones = {conic::nonneg(static_cast<int>(rows))};
  return p;
}

/// Leakage, harvesting and box constraints on (p1, p2) alone.
inline bool powers_admissible(double p1, double p2, const ChannelRealization &ch, const std::vector<int> &selected,
                              const SystemParams &params, const std::vector<double> &u, double slack = 1e-9)
{
  if (p1 < -slack || p2 < -slack || p1 > params.P_max + slack || p2 > params.P_max + slack)
  {
    return false;
  }
  double const leak = p1 * std::norm(ch.h1e) + p2 * std::norm(ch.h2e);
  if (leak > params.sigma2 * std::expm1(2.0 * params.r_e * std::log(2.0)) + slack)
  {
    return false;
  }
  for (std::size_t i = 0; i < selected.size(); ++i)
  {
    int const rel = selected[i];
    if (params.harvest_fraction(rel) * received_power(ch.relay(rel), p1, p2, params.sigma2) < u[i] - slack)
    {
      return false;
    }
  }
  return true;
}

struct AlternatingOptions
{
  std::optional<double> init_p1;  ///< defaults to P_max / (K + 2)
  std::optional<double> init_p2;
  int                   max_iter = 50;
};

/**
 * Alternates the beamforming SOCP at fixed powers with the power LP at fixed
 * weights. The tracked objective is the achieved secrecy sum rate; a cycle is
 * accepted only when it does not lower it.
 */
inline JointSolution alternating_optimize(const ChannelRealization &ch, const std::vector<int> &selected,
                                          const SystemParams &params, const std::vector<double> &u,
                                          const AlternatingOptions &opt = {})
{
  params.validate();
  check_selection(selected, ch.size());
  if (selected.size() < 3)
  {
    throw ParameterError("alternating_optimize: K < 3 leaves no zero-forcing direction");
  }
  double const p_init = params.P_max / (static_cast<double>(selected.size()) + 2.0);
  double       p1     = opt.init_p1.value_or(p_init);
  double       p2     = opt.init_p2.value_or(p_init);

  auto evaluate = [&](const CVector &f, double a, double b) { return secrecy_sum_rate(f, ch, selected, a, b, params.sigma2); };

  // Starting points that satisfy leakage, harvesting and box constraints.
  std::vector<std::pair<double, double>> starts;
  if (powers_admissible(p1, p2, ch, selected, params, u))
  {
    starts.emplace_back(p1, p2);
  }
  else
  {
    // largest common scaling of the requested powers that meets the leakage cap
    double const leak = p1 * std::norm(ch.h1e) + p2 * std::norm(ch.h2e);
    double const cap  = params.sigma2 * std::expm1(2.0 * params.r_e * std::log(2.0));
    double const t    = leak > 0.0 ? std::min(1.0, cap / leak) : 1.0;
    double const q1   = std::min(t * p1, params.P_max);
    double const q2   = std::min(t * p2, params.P_max);
    if (powers_admissible(q1, q2, ch, selected, params, u))
    {
      starts.emplace_back(q1, q2);
    }
    CVector const zero = CVector::Zero(static_cast<Eigen::Index>(selected.size()));
    auto const    lp   = conic::solve(build_power_lp(zero, ch, selected, params, u));
    if (lp.status == conic::Status::Optimal)
    {
      starts.emplace_back(std::clamp(lp.x(0), 0.0, params.P_max), std::clamp(lp.x(1), 0.0, params.P_max));
    }
    if (starts.empty())
    {
      check_harvest(effective_channels(ch, selected, params.P_max, params.P_max, params.sigma2), params, u);
      throw FeasibilityError(-1, "no source powers satisfy the leakage and harvesting constraints");
    }
  }

  std::optional<BeamformingResult> bf;
  double                           best_value = -1.0;
  for (auto const &[a, b] : starts)
  {
    auto cand = solve_beamforming(effective_channels(ch, selected, a, b, params.sigma2), params, a, b, u);
    double const value = evaluate(cand.f, a, b);
    if (!bf || value > best_value)
    {
      bf         = cand;
      best_value = value;
      p1         = a;
      p2         = b;
    }
  }

  JointSolution sol;
  sol.f            = bf->f;
  sol.p1           = p1;
  sol.p2           = p2;
  sol.nu           = bf->nu;
  sol.r0           = bf->r0;
  sol.beta         = bf->beta;
  sol.secrecy_rate = best_value;
  sol.trace.push_back(sol.secrecy_rate);

  sol.stop = StopReason::MaxIterations;
  for (int it = 1; it <= opt.max_iter; ++it)
  {
    sol.iterations = it;
    auto const lp  = conic::solve(build_power_lp(sol.f, ch, selected, params, u));
    if (lp.status != conic::Status::Optimal)
    {
      sol.stop = StopReason::NoImprovement;
      break;
    }
    double const np1 = std::clamp(lp.x(0), 0.0, params.P_max);
    double const np2 = std::clamp(lp.x(1), 0.0, params.P_max);

    BeamformingResult nbf;
    try
    {
      nbf = solve_beamforming(effective_channels(ch, selected, np1, np2, params.sigma2), params, np1, np2, u);
    }
    catch (const FeasibilityError &)
    {
      sol.stop = StopReason::NoImprovement;
      break;
    }
    double const value = evaluate(nbf.f, np1, np2);
    double const delta = value - sol.secrecy_rate;
    if (delta < 0.0)
    {
      sol.stop = StopReason::NoImprovement;
      break;
    }
    sol.f            = nbf.f;
    sol.p1           = np1;
    sol.p2           = np2;
    sol.nu           = nbf.nu;
    sol.r0           = nbf.r0;
    sol.beta         = nbf.beta;
    sol.secrecy_rate = value;
    sol.trace.push_back(value);
    if (delta < params.tol_outer)
    {
      sol.stop = StopReason::Tolerance;
      break;
    }
  }
  return sol;
}

/// Beamforming alone at the fixed initial powers P_max / (K + 2), without harvest requirements.
inline JointSolution relay_only(const ChannelRealization &ch, const std::vector<int> &selected,
                                const SystemParams &params)
{
  params.validate();
  double const p = params.P_max / (static_cast<double>(selected.size()) + 2.0);
  std::vector<double> const zeros(selected.size(), 0.0);
  auto const bf = solve_beamforming(effective_channels(ch, selected, p, p, params.sigma2), params, p, p, zeros);
  JointSolution sol;
  sol.f            = bf.f;
  sol.p1           = p;
  sol.p2           = p;
  sol.nu           = bf.nu;
  sol.r0           = bf.r0;
  sol.beta         = bf.beta;
  sol.secrecy_rate = secrecy_sum_rate(bf.f, ch, selected, p, p, params.sigma2);
  sol.trace        = {sol.secrecy_rate};
  sol.stop         = StopReason::Tolerance;
  return sol;
}

/// u_i = pi_i * max(0, VCG utility of winner i), in winner order.
inline HarvestRequirements harvest_requirements(const AuctionOutcome &outcome, const SystemParams &params)
{
  HarvestRequirements req;
  for (int w : outcome.winners)
  {
    double const util = outcome.utilities.at(static_cast<std::size_t>(w));
    req.relays.push_back(w);
    req.u.push_back(params.pi.at(static_cast<std::size_t>(w)) * std::max(0.0, util));
    req.floored.push_back(util < 0.0);
  }
  return req;
}

}  // namespace relayopt
