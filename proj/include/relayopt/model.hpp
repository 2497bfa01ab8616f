#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "relayopt/errors.hpp"
#include "relayopt/numerics.hpp"

namespace relayopt {

/// Physical and algorithmic parameters of one network.
struct SystemParams
{
  int                 N       = 5;
  int                 K       = 3;
  double              P_max   = 10.0;  ///< source power budget (W)
  double              p_r     = 2.0;   ///< per-relay power budget (W)
  double              sigma2  = 1.0;   ///< noise variance (W)
  std::vector<double> rho;             ///< per-relay forwarding fraction, size N
  std::vector<double> xi;              ///< per-relay conversion efficiency, size N
  std::vector<double> pi;              ///< per-relay price, W per bps/Hz, size N
  double              r_e       = 1.0;   ///< eavesdropper leakage cap (bps/Hz)
  double              tol_outer = 1e-3;  ///< alternating-loop tolerance
  int                 beta_grid = 21;    ///< number of rate-split samples on [0, 1]
  double              r0_tol    = 1e-3;  ///< bisection tolerance on the sum-rate target

  /// Defaults used throughout the simulations: rho = 0.5, xi = 1, pi = 1, sigma^2 = 1.
  static SystemParams make(int n, int k, double p_max, double p_r)
  {
    SystemParams p;
    p.N     = n;
    p.K     = k;
    p.P_max = p_max;
    p.p_r   = p_r;
    p.rho.assign(static_cast<std::size_t>(n), 0.5);
    p.xi.assign(static_cast<std::size_t>(n), 1.0);
    p.pi.assign(static_cast<std::size_t>(n), 1.0);
    return p;
  }

  /// Checks the invariants that hold for every use (K may be below 3 for mechanism-only runs).
  void validate() const
  {
    if (N < 1 || K < 1 || K > N)
    {
      throw ParameterError("SystemParams: require 1 <= K <= N");
    }
    if (!(P_max > 0.0) || !(p_r > 0.0) || !(sigma2 > 0.0))
    {
      throw ParameterError("SystemParams: powers and noise variance must be positive");
    }
    auto const n = static_cast<std::size_t>(N);
    if (rho.size() != n || xi.size() != n || pi.size() != n)
    {
      throw ParameterError("SystemParams: rho, xi, pi must have N entries");
    }
    for (std::size_t i = 0; i < n; ++i)
    {
      if (!(rho[i] >= 0.0 && rho[i] <= 1.0))
      {
        throw ParameterError("SystemParams: rho outside [0, 1]");
      }
      if (!(xi[i] > 0.0 && xi[i] <= 1.0))
      {
        throw ParameterError("SystemParams: xi outside (0, 1]");
      }
      if (!(pi[i] >= 0.0))
      {
        throw ParameterError("SystemParams: negative price");
      }
    }
    if (!(r_e >= 0.0) || !(tol_outer > 0.0) || beta_grid < 1 || !(r0_tol > 0.0))
    {
      throw ParameterError("SystemParams: invalid tolerance or grid setting");
    }
  }

  /// Stored-energy fraction xi_i (1 - rho_i) of relay i.
  double harvest_fraction(int i) const
  {
    auto const k = static_cast<std::size_t>(i);
    return xi.at(k) * (1.0 - rho.at(k));
  }
};

/// One relay's private channel triple: source 1, source 2, eavesdropper.
struct RelayChannel
{
  cplx h1;
  cplx h2;
  cplx he;
};

/// Every complex gain of one network draw.
struct ChannelRealization
{
  CVector h1r;  ///< S1 -> relays
  CVector h2r;  ///< S2 -> relays
  CVector hre;  ///< relays -> E
  cplx    h1e;  ///< S1 -> E
  cplx    h2e;  ///< S2 -> E

  int size() const
  {
    return static_cast<int>(h1r.size());
  }

  RelayChannel relay(int i) const
  {
    return {h1r(i), h2r(i), hre(i)};
  }

  std::vector<RelayChannel> relays() const
  {
    std::vector<RelayChannel> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (int i = 0; i < size(); ++i)
    {
      out.push_back(relay(i));
    }
    return out;
  }
};

/// Draws i.i.d. CN(0, 1) gains: real and imaginary parts each N(0, 1/2).
inline ChannelRealization sample_channels(std::uint64_t seed, int n)
{
  if (n < 1)
  {
    throw ParameterError("sample_channels: need at least one relay");
  }
  std::mt19937_64                  rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  auto                             draw = [&] {
    double const re = gauss(rng);
    double const im = gauss(rng);
    return cplx(re, im);
  };

  ChannelRealization ch;
  ch.h1r.resize(n);
  ch.h2r.resize(n);
  ch.hre.resize(n);
  for (int i = 0; i < n; ++i)
  {
    ch.h1r(i) = draw();
  }
  for (int i = 0; i < n; ++i)
  {
    ch.h2r(i) = draw();
  }
  for (int i = 0; i < n; ++i)
  {
    ch.hre(i) = draw();
  }
  ch.h1e = draw();
  ch.h2e = draw();
  return ch;
}

/// Received power p1|h1i|^2 + p2|h2i|^2 + sigma^2 at one relay.
inline double received_power(const RelayChannel &g, double p1, double p2, double sigma2)
{
  return p1 * std::norm(g.h1) + p2 * std::norm(g.h2) + sigma2;
}

/// Power harvested by relay i in the first slot.
inline double harvested_power(int i, double p1, double p2, const ChannelRealization &ch,
                              double rho_i, double xi_i, double sigma2)
{
  if (i < 0 || i >= ch.size())
  {
    throw DimensionError("harvested_power: relay index out of range");
  }
  if (p1 < 0.0 || p2 < 0.0)
  {
    throw ParameterError("harvested_power: negative source power");
  }
  return xi_i * (1.0 - rho_i) * received_power(ch.relay(i), p1, p2, sigma2);
}

/// Effective two-way quantities restricted to the selected relays.
struct EffectiveChannels
{
  std::vector<int> selected;
  CVector          h21;     ///< H_{1,r} h_{2,r}: S2 -> S1 through the relays
  CVector          h12;     ///< H_{2,r} h_{1,r}: S1 -> S2 (numerically equal to h21)
  RVector          cn1;     ///< diagonal of C_{n,1} = |h1|^2
  RVector          cn2;     ///< diagonal of C_{n,2} = |h2|^2
  CMatrix          hbar_e;  ///< K x 2: [hre .* h1, hre .* h2]
  RVector          rs;      ///< diagonal of R_s at the powers used to build this

  int size() const
  {
    return static_cast<int>(selected.size());
  }

  CMatrix Cn1() const
  {
    return cn1.cast<cplx>().asDiagonal();
  }

  CMatrix Cn2() const
  {
    return cn2.cast<cplx>().asDiagonal();
  }
};

inline void check_selection(const std::vector<int> &selected, int n)
{
  std::vector<int> sorted = selected;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
  {
    throw DimensionError("selected relay set contains duplicates");
  }
  for (int i : sorted)
  {
    if (i < 0 || i >= n)
    {
      throw DimensionError("selected relay index out of range");
    }
  }
}

inline EffectiveChannels effective_channels(const ChannelRealization &ch, const std::vector<int> &selected,
                                            double p1, double p2, double sigma2)
{
  check_selection(selected, ch.size());
  auto const        k = static_cast<Eigen::Index>(selected.size());
  EffectiveChannels eff;
  eff.selected = selected;
  eff.h21.resize(k);
  eff.h12.resize(k);
  eff.cn1.resize(k);
  eff.cn2.resize(k);
  eff.hbar_e.resize(k, 2);
  eff.rs.resize(k);
  for (Eigen::Index j = 0; j < k; ++j)
  {
    auto const g     = ch.relay(selected[static_cast<std::size_t>(j)]);
    eff.h21(j)       = g.h1 * g.h2;
    eff.h12(j)       = g.h2 * g.h1;
    eff.cn1(j)       = std::norm(g.h1);
    eff.cn2(j)       = std::norm(g.h2);
    eff.hbar_e(j, 0) = g.he * g.h1;
    eff.hbar_e(j, 1) = g.he * g.h2;
    eff.rs(j)        = received_power(g, p1, p2, sigma2);
  }
  return eff;
}

/// SNRs (gamma_1: S2 -> S1, gamma_2: S1 -> S2) for relay weights f.
inline std::pair<double, double> link_snrs(const CVector &f, const EffectiveChannels &eff, double p1, double p2,
                                           double sigma2)
{
  if (f.size() != eff.size())
  {
    throw DimensionError("link_snrs: weight vector length differs from K");
  }
  double const s1 = std::norm(f.dot(eff.h21));
  double const s2 = std::norm(f.dot(eff.h12));
  double const n1 = f.cwiseAbs2().dot(eff.cn1);
  double const n2 = f.cwiseAbs2().dot(eff.cn2);
  return {p2 * s1 / (sigma2 * (n1 + 1.0)), p1 * s2 / (sigma2 * (n2 + 1.0))};
}

inline double capacity(double snr)
{
  return 0.5 * std::log2(1.0 + snr);
}

/**
 * Eavesdropper rate over both slots.
 *
 * The second-slot noise covariance entry is sigma^2 (1 + sum_k |f_k|^2 |hre_k|^2),
 * i.e. the relay-forwarded noise power, which keeps C_{n,e} positive definite.
 */
inline double eavesdropper_capacity_full(const CVector &f, const ChannelRealization &ch,
                                         const std::vector<int> &selected, double p1, double p2,
                                         double sigma2)
{
  check_selection(selected, ch.size());
  if (f.size() != static_cast<Eigen::Index>(selected.size()))
  {
    throw DimensionError("eavesdropper_capacity_full: weight vector length differs from K");
  }
  cplx   leak1 = 0.0;
  cplx   leak2 = 0.0;
  double relay_noise = 0.0;
  for (std::size_t j = 0; j < selected.size(); ++j)
  {
    auto const g  = ch.relay(selected[j]);
    auto const fj = f(static_cast<Eigen::Index>(j));
    leak1 += std::conj(fj) * g.he * g.h1;
    leak2 += std::conj(fj) * g.he * g.h2;
    relay_noise += std::norm(fj) * std::norm(g.he);
  }
  double const sq1 = std::sqrt(p1);
  double const sq2 = std::sqrt(p2);
  CMatrix      he(2, 2);
  he << sq1 * ch.h1e, sq2 * ch.h2e, sq1 * leak1, sq2 * leak2;
  CMatrix cne = CMatrix::Zero(2, 2);
  cne(0, 0)   = sigma2;
  cne(1, 1)   = sigma2 * (1.0 + relay_noise);
  double const d = det_2x2_hermitian_form(he, cne);
  return std::max(0.0, 0.5 * std::log2(d));
}

/// Eavesdropper rate once the second-slot leakage is nulled.
inline double eavesdropper_capacity_nullspace(double p1, double p2, cplx h1e, cplx h2e, double sigma2)
{
  if (p1 < 0.0 || p2 < 0.0)
  {
    throw ParameterError("eavesdropper_capacity_nullspace: negative source power");
  }
  return 0.5 * std::log2(1.0 + (p1 * std::norm(h1e) + p2 * std::norm(h2e)) / sigma2);
}

/// [C1 + C2 - Ce]^+ with the full two-slot eavesdropper rate.
inline double secrecy_sum_rate(const CVector &f, const ChannelRealization &ch, const std::vector<int> &selected,
                               double p1, double p2, double sigma2)
{
  auto const eff      = effective_channels(ch, selected, p1, p2, sigma2);
  auto const [g1, g2] = link_snrs(f, eff, p1, p2, sigma2);
  double const ce     = eavesdropper_capacity_full(f, ch, selected, p1, p2, sigma2);
  return std::max(0.0, capacity(g1) + capacity(g2) - ce);
}

/// Net power stored by relay i: harvested minus forwarded. Negative when the relay spends its own.
inline double battery_power(int i, cplx f_i, const ChannelRealization &ch, double p1, double p2,
                            const SystemParams &params)
{
  auto const   k    = static_cast<std::size_t>(i);
  double const ph   = harvested_power(i, p1, p2, ch, params.rho.at(k), params.xi.at(k), params.sigma2);
  double const rs_i = received_power(ch.relay(i), p1, p2, params.sigma2);
  return ph - std::norm(f_i) * rs_i;
}

/**
 * Secrecy rate a single amplify-and-forward relay can provide on its own, using
 * the amplification factor alpha^2 = 1 / (p1|h1|^2 + p2|h2|^2 + sigma^2).
 * First-slot leakage is not part of this valuation.
 */
inline double siso_secrecy_valuation(const RelayChannel &g, double p1, double p2, double p_r, double sigma2)
{
  double const a1 = std::norm(g.h1);
  double const a2 = std::norm(g.h2);
  double const alpha2 = 1.0 / (p1 * a1 + p2 * a2 + sigma2);
  double const gain = alpha2 * p_r;
  double const snr1 = gain * p2 * a1 * a2 / (sigma2 * (gain * a1 + 1.0));  // S2 -> S1
  double const snr2 = gain * p1 * a2 * a1 / (sigma2 * (gain * a2 + 1.0));  // S1 -> S2
  return 0.5 * (std::log2(1.0 + snr1) + std::log2(1.0 + snr2));
}

}  // namespace relayopt
