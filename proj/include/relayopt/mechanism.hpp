#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "relayopt/errors.hpp"
#include "relayopt/model.hpp"

namespace relayopt {

/// Result of one sealed-bid K-winner VCG round.
struct AuctionOutcome
{
  std::vector<int>    winners;    ///< sorted by reported value, descending
  std::vector<double> transfers;  ///< -clearing_price for winners, 0 otherwise
  std::vector<double> utilities;  ///< true value + transfer for winners, 0 otherwise
  double              clearing_price = 0.0;
};

namespace detail {

inline void check_profile(std::span<const double> values, int k)
{
  if (k < 1 || static_cast<std::size_t>(k) >= values.size())
  {
    throw ParameterError("VCG: require 1 <= K < N");
  }
  for (double v : values)
  {
    if (!std::isfinite(v) || v < 0.0)
    {
      throw ParameterError("VCG: valuations must be finite and non-negative");
    }
  }
}

/// Indices ordered by value descending, ties by lower index.
inline std::vector<int> ranking(std::span<const double> values)
{
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)]; });
  return order;
}

}  // namespace detail

/// The K highest reports win; ties go to the lower index.
inline std::vector<int> vcg_select(std::span<const double> values, int k)
{
  detail::check_profile(values, k);
  auto order = detail::ranking(values);
  order.resize(static_cast<std::size_t>(k));
  return order;
}

/// The (K+1)-st highest report: what each winner pays.
inline double clearing_price(std::span<const double> values, int k)
{
  detail::check_profile(values, k);
  auto const order = detail::ranking(values);
  return values[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
}

/// Uniform-price closed form: winners pay the highest losing report.
inline std::vector<double> vcg_transfers(std::span<const double> values, int k)
{
  auto const          winners = vcg_select(values, k);
  double const        price   = clearing_price(values, k);
  std::vector<double> t(values.size(), 0.0);
  for (int w : winners)
  {
    t[static_cast<std::size_t>(w)] = -price;
  }
  return t;
}

/**
 * Clarke pivot form: welfare of the others with i present minus the best
 * K-winner welfare of the society without i. Agrees with vcg_transfers.
 */
inline std::vector<double> clarke_pivot_transfers(std::span<const double> values, int k)
{
  detail::check_profile(values, k);
  auto const          winners = vcg_select(values, k);
  std::vector<double> t(values.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i)
  {
    double with_i = 0.0;
    for (int w : winners)
    {
      if (static_cast<std::size_t>(w) != i)
      {
        with_i += values[static_cast<std::size_t>(w)];
      }
    }
    std::vector<double> rest;
    rest.reserve(values.size() - 1);
    for (std::size_t j = 0; j < values.size(); ++j)
    {
      if (j != i)
      {
        rest.push_back(values[j]);
      }
    }
    std::sort(rest.begin(), rest.end(), std::greater<>());
    double const without_i = std::accumulate(rest.begin(), rest.begin() + k, 0.0);
    t[i]                   = with_i - without_i;
  }
  return t;
}

/// Selection and payment from the reports; the credit comes from the true values.
inline AuctionOutcome run_auction(std::span<const double> reported, std::span<const double> truth, int k)
{
  if (reported.size() != truth.size())
  {
    throw DimensionError("run_auction: reported and true profiles differ in length");
  }
  AuctionOutcome out;
  out.winners        = vcg_select(reported, k);
  out.clearing_price = clearing_price(reported, k);
  out.transfers      = vcg_transfers(reported, k);
  out.utilities.assign(reported.size(), 0.0);
  for (int w : out.winners)
  {
    auto const i     = static_cast<std::size_t>(w);
    out.utilities[i] = truth[i] + out.transfers[i];
  }
  return out;
}

inline std::vector<double> vcg_utilities(std::span<const double> reported, std::span<const double> truth, int k)
{
  return run_auction(reported, truth, k).utilities;
}

/// Valuations of every relay from its reported channels, at full source and relay power.
inline std::vector<double> relay_valuations(std::span<const RelayChannel> reports, const SystemParams &params)
{
  std::vector<double> v;
  v.reserve(reports.size());
  for (auto const &g : reports)
  {
    v.push_back(siso_secrecy_valuation(g, params.P_max, params.P_max, params.p_r, params.sigma2));
  }
  return v;
}

/**
 * Probability that a relay reporting x is selected when the N-1 rival reports
 * are i.i.d. Exp(1): fewer than K rivals exceed x.
 */
inline double selection_probability(double x, int n, int k)
{
  if (!(x >= 0.0))
  {
    throw ParameterError("selection_probability: x must be non-negative");
  }
  if (k < 1 || k >= n)
  {
    throw ParameterError("selection_probability: require 1 <= K < N");
  }
  int const    rivals = n - 1;
  double const q      = std::exp(-x);      // a rival exceeds x
  double const p      = -std::expm1(-x);   // a rival stays below x
  double       total  = 0.0;
  double       binom  = 1.0;
  for (int j = 0; j < k; ++j)
  {
    if (j > 0)
    {
      binom = binom * (rivals - j + 1) / j;
    }
    total += binom * std::pow(q, j) * std::pow(p, rivals - j);
  }
  return std::clamp(total, 0.0, 1.0);
}

struct PayoffEstimate
{
  double mean   = 0.0;
  double std_error = 0.0;
};

namespace detail {

/// K-th largest rival report per sample; the relay wins iff its report reaches it.
inline std::vector<double> rival_thresholds(int n, int k, std::size_t samples, std::uint64_t seed)
{
  std::mt19937_64                       rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double>                   rivals(static_cast<std::size_t>(n - 1));
  std::vector<double>                   out(samples);
  for (std::size_t s = 0; s < samples; ++s)
  {
    for (auto &r : rivals)
    {
      r = expo(rng);
    }
    std::nth_element(rivals.begin(), rivals.begin() + (k - 1), rivals.end(), std::greater<>());
    out[s] = rivals[static_cast<std::size_t>(k - 1)];
  }
  return out;
}

inline PayoffEstimate payoff_from_thresholds(std::span<const double> thresholds, double x_reported, double x_true,
                                             double price_per_rate)
{
  double sum = 0.0;
  double sq  = 0.0;
  for (double t : thresholds)
  {
    // The relay sits at index 0, so it wins ties against every rival.
    double const u = x_reported >= t ? price_per_rate * (x_true - t) : 0.0;
    sum += u;
    sq += u * u;
  }
  auto const   s    = static_cast<double>(thresholds.size());
  double const mean = sum / s;
  double const var  = s > 1 ? std::max(0.0, (sq - s * mean * mean) / (s - 1.0)) : 0.0;
  return {mean, std::sqrt(var / s)};
}

}  // namespace detail

/**
 * Monte Carlo expected payoff of a relay reporting x_reported whose true value
 * is x_true, against N-1 rivals reporting i.i.d. Exp(1) values. The relay is
 * placed at index 0 of each drawn profile and credited through run_auction's rule.
 */
inline PayoffEstimate expected_payoff(double x_reported, double x_true, double price_per_rate, int n, int k,
                                      std::size_t samples, std::uint64_t seed)
{
  if (samples < 1)
  {
    throw ParameterError("expected_payoff: need at least one sample");
  }
  if (k < 1 || k >= n)
  {
    throw ParameterError("expected_payoff: require 1 <= K < N");
  }
  auto const thresholds = detail::rival_thresholds(n, k, samples, seed);
  return detail::payoff_from_thresholds(thresholds, x_reported, x_true, price_per_rate);
}

/// expected_payoff over a grid of reports with common random numbers (same seed at every point).
inline std::vector<PayoffEstimate> expected_payoff_curve(std::span<const double> reports, double x_true,
                                                         double price_per_rate, int n, int k, std::size_t samples,
                                                         std::uint64_t seed)
{
  if (samples < 1)
  {
    throw ParameterError("expected_payoff: need at least one sample");
  }
  if (k < 1 || k >= n)
  {
    throw ParameterError("expected_payoff: require 1 <= K < N");
  }
  auto const                  thresholds = detail::rival_thresholds(n, k, samples, seed);
  std::vector<PayoffEstimate> out;
  out.reserve(reports.size());
  for (double r : reports)
  {
    out.push_back(detail::payoff_from_thresholds(thresholds, r, x_true, price_per_rate));
  }
  return out;
}

/// Utilities of all relays when relay i reports `report` and everyone else is truthful.
inline std::vector<double> payoff_profile(std::span<const double> truth, int i, double report, int k)
{
  if (i < 0 || static_cast<std::size_t>(i) >= truth.size())
  {
    throw DimensionError("payoff_profile: relay index out of range");
  }
  std::vector<double> reported(truth.begin(), truth.end());
  reported[static_cast<std::size_t>(i)] = report;
  return vcg_utilities(reported, truth, k);
}

/// (report, payoff of relay i) along a grid of reports for relay i.
inline std::vector<std::pair<double, double>> payoff_curve(std::span<const double> truth, int i,
                                                           std::span<const double> grid, int k)
{
  if (grid.empty())
  {
    throw ParameterError("payoff_curve: empty report grid");
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (double r : grid)
  {
    out.emplace_back(r, payoff_profile(truth, i, r, k)[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace relayopt
