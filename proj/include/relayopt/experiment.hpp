#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "relayopt/mechanism.hpp"
#include "relayopt/optimizer.hpp"

namespace relayopt::experiment {

enum class Kind
{
  VcgDemo,
  PayoffCurve,
  Exaggeration,
  ExpectedPayoff,
  PowerSweep,
  Convergence,
  Baselines
};

inline constexpr std::array<std::pair<Kind, std::string_view>, 7> kKindNames = {{
    {Kind::VcgDemo, "vcg-demo"},
    {Kind::PayoffCurve, "payoff-curve"},
    {Kind::Exaggeration, "exaggeration"},
    {Kind::ExpectedPayoff, "expected-payoff"},
    {Kind::PowerSweep, "power-sweep"},
    {Kind::Convergence, "convergence"},
    {Kind::Baselines, "baselines"},
}};

inline std::string_view to_string(Kind k)
{
  for (auto const &[kind, name] : kKindNames)
  {
    if (kind == k)
    {
      return name;
    }
  }
  return "unknown";
}

inline std::optional<Kind> parse_kind(std::string_view s)
{
  for (auto const &[kind, name] : kKindNames)
  {
    if (name == s)
    {
      return kind;
    }
  }
  return std::nullopt;
}

inline bool is_mechanism(Kind k)
{
  return k == Kind::VcgDemo || k == Kind::PayoffCurve || k == Kind::Exaggeration || k == Kind::ExpectedPayoff;
}

/// Starting source powers of the alternating loop.
enum class InitPower
{
  Table,  ///< P_max / (K + 2)
  Max     ///< P_max
};

/// Valuations used by the auction figures.
inline std::vector<double> const kFigureValues = {1.1101, 1.4321, 0.4567, 0.3690, 0.8421};
inline std::vector<double> const kExampleValues = {22, 18, 15, 12, 8};

/**
 * One experiment run. Relay indices are 1-based here and in every CSV
 * (relay=3 is R3); the library itself is 0-based.
 */
struct ExperimentConfig
{
  Kind                       experiment = Kind::VcgDemo;
  int                        N          = 5;
  int                        K          = 3;
  std::vector<double>        P_max_dB   = {10.0};
  std::vector<std::uint64_t> seeds      = {1};
  std::size_t                samples    = 100000;
  std::string                output_path = ".";
  std::vector<double>        values;   ///< true valuations (mechanism experiments)
  std::vector<double>        reports;  ///< vcg-demo reports; empty means truthful
  int                        relay       = 0;  ///< 0 means every relay
  int                        grid_points = 100;
  double                     grid_max    = 3.0;
  int                        max_iter    = 50;
  InitPower                  init        = InitPower::Table;
  std::optional<double>      p_r;  ///< relay budget (W); P_max / (K + 2) when unset
  double                     sigma2    = 1.0;
  double                     rho       = 0.5;
  double                     xi        = 1.0;
  double                     pi        = 1.0;
  double                     r_e       = 1.0;
  double                     tol_outer = 1e-3;
  int                        beta_grid = 21;
  double                     r0_tol    = 1e-3;

  bool operator==(const ExperimentConfig &) const = default;
};

namespace detail {

inline std::string fmt(double v)
{
  if (v == 0.0)
  {
    v = 0.0;  // drop the sign of -0
  }
  std::array<char, 64> buf{};
  auto const           r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), r.ptr};
}

inline std::string fmt(std::uint64_t v)
{
  return std::to_string(v);
}

inline std::string fmt(int v)
{
  return std::to_string(v);
}

template <class T>
std::string join(const std::vector<T> &xs)
{
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    if (i)
    {
      out += ',';
    }
    out += fmt(xs[i]);
  }
  return out;
}

inline std::string_view trim(std::string_view s)
{
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
  {
    return {};
  }
  auto const e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view s, int line, std::string_view key)
{
  s = trim(s);
  T          v{};
  auto const r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size())
  {
    throw ConfigError(line, "key '" + std::string(key) + "': cannot parse '" + std::string(s) + "'");
  }
  if constexpr (std::is_floating_point_v<T>)
  {
    if (!std::isfinite(v))
    {
      throw ConfigError(line, "key '" + std::string(key) + "': value must be finite");
    }
  }
  return v;
}

/// Comma list; integer lists also accept inclusive ranges a:b.
template <class T>
std::vector<T> parse_list(std::string_view s, int line, std::string_view key)
{
  std::vector<T> out;
  while (true)
  {
    auto const       comma = s.find(',');
    std::string_view item  = trim(s.substr(0, comma));
    auto const       colon = item.find(':');
    if constexpr (std::is_integral_v<T>)
    {
      if (colon != std::string_view::npos)
      {
        T const a = parse_number<T>(item.substr(0, colon), line, key);
        T const b = parse_number<T>(item.substr(colon + 1), line, key);
        if (b < a || b - a > 1000000)
        {
          throw ConfigError(line, "key '" + std::string(key) + "': bad range '" + std::string(item) + "'");
        }
        for (T v = a; v <= b; ++v)
        {
          out.push_back(v);
        }
      }
      else
      {
        out.push_back(parse_number<T>(item, line, key));
      }
    }
    else
    {
      out.push_back(parse_number<T>(item, line, key));
    }
    if (comma == std::string_view::npos)
    {
      break;
    }
    s = s.substr(comma + 1);
  }
  return out;
}

}  // namespace detail

/// Keys in serialization order.
inline constexpr std::array<std::string_view, 23> kKeys = {
    "experiment", "N",   "K",  "P_max_dB", "seeds",  "samples",  "output_path", "values",
    "reports",    "relay", "grid_points", "grid_max", "max_iter", "init", "p_r", "sigma2",
    "rho",        "xi",  "pi", "r_e",      "tol_outer", "beta_grid", "r0_tol",
};

namespace detail {

inline void apply_defaults(ExperimentConfig &c, const std::set<std::string> &given)
{
  auto absent = [&](const char *k) { return !given.count(k); };
  switch (c.experiment)
  {
  case Kind::VcgDemo:
    if (absent("values"))
      c.values = kExampleValues;
    break;
  case Kind::ExpectedPayoff:
    if (absent("values"))
      c.values = kFigureValues;
    break;
  case Kind::PayoffCurve:
  case Kind::Exaggeration:
    if (absent("values"))
      c.values = kFigureValues;
    if (absent("grid_points"))
      c.grid_points = 301;  // step 0.01 on [0, 3]
    if (c.experiment == Kind::Exaggeration && absent("relay"))
      c.relay = 3;
    break;
  case Kind::PowerSweep:
  case Kind::Baselines:
    if (absent("N"))
      c.N = 8;
    if (absent("P_max_dB"))
      c.P_max_dB = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    if (absent("seeds"))
    {
      c.seeds.clear();
      for (std::uint64_t s = 1; s <= 20; ++s)
        c.seeds.push_back(s);
    }
    break;
  case Kind::Convergence:
    if (absent("init"))
      c.init = InitPower::Max;
    if (absent("seeds"))
      c.seeds = {1, 2, 3, 4};
    break;
  }
  if (is_mechanism(c.experiment) && absent("N"))
  {
    c.N = static_cast<int>(c.values.size());
  }
}

}  // namespace detail

/// Consistency checks shared by parsing and direct construction.
inline void validate(const ExperimentConfig &c)
{
  auto fail = [](const std::string &m) { throw ConfigError(0, m); };
  if (c.N < 1 || c.K < 1 || c.K >= c.N)
    fail("require 1 <= K < N");
  if (c.seeds.empty())
    fail("seeds must be nonempty");
  if (c.samples < 1)
    fail("samples must be at least 1");
  if (c.grid_points < 2 || !(c.grid_max > 0.0))
    fail("grid needs at least two points and grid_max > 0");
  if (c.max_iter < 1)
    fail("max_iter must be at least 1");
  if (c.relay < 0 || c.relay > c.N)
    fail("relay must lie in 0..N");
  if (is_mechanism(c.experiment))
  {
    if (c.values.size() != static_cast<std::size_t>(c.N))
      fail("values must have N entries");
    if (std::any_of(c.values.begin(), c.values.end(), [](double v) { return v < 0.0; }))
      fail("values must be nonnegative");
    if (!c.reports.empty() && c.reports.size() != c.values.size())
      fail("reports must have N entries");
    if (c.experiment == Kind::Exaggeration && c.relay == 0)
      fail("exaggeration needs a relay");
  }
  else
  {
    if (c.K < 3)
      fail("null-space beamforming needs K >= 3");
    if (c.P_max_dB.empty())
      fail("P_max_dB must be nonempty");
    if (c.p_r && !(*c.p_r > 0.0))
      fail("p_r must be positive");
    if (!(c.sigma2 > 0.0) || !(c.rho >= 0.0 && c.rho <= 1.0) || !(c.xi > 0.0 && c.xi <= 1.0) || c.pi < 0.0 ||
        c.r_e < 0.0 || !(c.tol_outer > 0.0) || c.beta_grid < 1 || !(c.r0_tol > 0.0))
      fail("physical parameters out of range");
  }
}

/**
 * Line-oriented key = value text; '#' starts a comment. Unknown or repeated
 * keys are errors. When `expected` is given the experiment key may be omitted.
 */
inline ExperimentConfig parse_config(std::istream &in, std::optional<Kind> expected = std::nullopt)
{
  ExperimentConfig      c;
  std::set<std::string> given;
  std::string           raw;
  int                   line = 0;
  while (std::getline(in, raw))
  {
    ++line;
    std::string_view s = raw;
    if (auto const hash = s.find('#'); hash != std::string_view::npos)
    {
      s = s.substr(0, hash);
    }
    s = detail::trim(s);
    if (s.empty())
    {
      continue;
    }
    auto const eq = s.find('=');
    if (eq == std::string_view::npos)
    {
      throw ConfigError(line, "expected key = value");
    }
    std::string const      key(detail::trim(s.substr(0, eq)));
    std::string_view const val = detail::trim(s.substr(eq + 1));
    if (key.empty() || std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
    {
      throw ConfigError(line, "unknown key '" + key + "'");
    }
    if (!given.insert(key).second)
    {
      throw ConfigError(line, "duplicate key '" + key + "'");
    }

    if (key == "experiment")
    {
      auto const k = parse_kind(val);
      if (!k)
        throw ConfigError(line, "unknown experiment '" + std::string(val) + "'");
      c.experiment = *k;
    }
    else if (key == "N")
      c.N = detail::parse_number<int>(val, line, key);
    else if (key == "K")
      c.K = detail::parse_number<int>(val, line, key);
    else if (key == "P_max_dB")
      c.P_max_dB = detail::parse_list<double>(val, line, key);
    else if (key == "seeds")
      c.seeds = detail::parse_list<std::uint64_t>(val, line, key);
    else if (key == "samples")
      c.samples = detail::parse_number<std::size_t>(val, line, key);
    else if (key == "output_path")
    {
      if (val.empty())
        throw ConfigError(line, "output_path is empty");
      c.output_path = std::string(val);
    }
    else if (key == "values")
      c.values = detail::parse_list<double>(val, line, key);
    else if (key == "reports")
      c.reports = detail::parse_list<double>(val, line, key);
    else if (key == "relay")
      c.relay = detail::parse_number<int>(val, line, key);
    else if (key == "grid_points")
      c.grid_points = detail::parse_number<int>(val, line, key);
    else if (key == "grid_max")
      c.grid_max = detail::parse_number<double>(val, line, key);
    else if (key == "max_iter")
      c.max_iter = detail::parse_number<int>(val, line, key);
    else if (key == "init")
    {
      if (val == "table")
        c.init = InitPower::Table;
      else if (val == "max")
        c.init = InitPower::Max;
      else
        throw ConfigError(line, "init must be 'table' or 'max'");
    }
    else if (key == "p_r")
      c.p_r = detail::parse_number<double>(val, line, key);
    else if (key == "sigma2")
      c.sigma2 = detail::parse_number<double>(val, line, key);
    else if (key == "rho")
      c.rho = detail::parse_number<double>(val, line, key);
    else if (key == "xi")
      c.xi = detail::parse_number<double>(val, line, key);
    else if (key == "pi")
      c.pi = detail::parse_number<double>(val, line, key);
    else if (key == "r_e")
      c.r_e = detail::parse_number<double>(val, line, key);
    else if (key == "tol_outer")
      c.tol_outer = detail::parse_number<double>(val, line, key);
    else if (key == "beta_grid")
      c.beta_grid = detail::parse_number<int>(val, line, key);
    else if (key == "r0_tol")
      c.r0_tol = detail::parse_number<double>(val, line, key);
  }

  if (!given.count("experiment"))
  {
    if (!expected)
      throw ConfigError(0, "missing key 'experiment'");
    c.experiment = *expected;
  }
  else if (expected && *expected != c.experiment)
  {
    throw ConfigError(0, "config is for '" + std::string(to_string(c.experiment)) + "', not '" +
                             std::string(to_string(*expected)) + "'");
  }
  detail::apply_defaults(c, given);
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string &text, std::optional<Kind> expected = std::nullopt)
{
  std::istringstream in(text);
  return parse_config(in, expected);
}

inline ExperimentConfig parse_config_file(const std::filesystem::path &path, std::optional<Kind> expected = std::nullopt)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError(0, "cannot open " + path.string());
  }
  return parse_config(in, expected);
}

/// Every key with its resolved value, in canonical order.
inline std::string serialize(const ExperimentConfig &c)
{
  std::ostringstream o;
  o << "experiment = " << to_string(c.experiment) << '\n';
  o << "N = " << c.N << '\n';
  o << "K = " << c.K << '\n';
  o << "P_max_dB = " << detail::join(c.P_max_dB) << '\n';
  o << "seeds = " << detail::join(c.seeds) << '\n';
  o << "samples = " << c.samples << '\n';
  o << "output_path = " << c.output_path << '\n';
  if (!c.values.empty())
    o << "values = " << detail::join(c.values) << '\n';
  if (!c.reports.empty())
    o << "reports = " << detail::join(c.reports) << '\n';
  o << "relay = " << c.relay << '\n';
  o << "grid_points = " << c.grid_points << '\n';
  o << "grid_max = " << detail::fmt(c.grid_max) << '\n';
  o << "max_iter = " << c.max_iter << '\n';
  o << "init = " << (c.init == InitPower::Max ? "max" : "table") << '\n';
  if (c.p_r)
    o << "p_r = " << detail::fmt(*c.p_r) << '\n';
  o << "sigma2 = " << detail::fmt(c.sigma2) << '\n';
  o << "rho = " << detail::fmt(c.rho) << '\n';
  o << "xi = " << detail::fmt(c.xi) << '\n';
  o << "pi = " << detail::fmt(c.pi) << '\n';
  o << "r_e = " << detail::fmt(c.r_e) << '\n';
  o << "tol_outer = " << detail::fmt(c.tol_outer) << '\n';
  o << "beta_grid = " << c.beta_grid << '\n';
  o << "r0_tol = " << detail::fmt(c.r0_tol) << '\n';
  return o.str();
}

inline double db_to_watts(double db)
{
  return std::pow(10.0, db / 10.0);
}

inline SystemParams physical_params(const ExperimentConfig &c, double p_max)
{
  auto p = SystemParams::make(c.N, c.K, p_max, c.p_r.value_or(p_max / (c.K + 2.0)));
  auto const n = static_cast<std::size_t>(c.N);
  p.sigma2    = c.sigma2;
  p.rho.assign(n, c.rho);
  p.xi.assign(n, c.xi);
  p.pi.assign(n, c.pi);
  p.r_e       = c.r_e;
  p.tol_outer = c.tol_outer;
  p.beta_grid = c.beta_grid;
  p.r0_tol    = c.r0_tol;
  p.validate();
  return p;
}

/// Worker count: RELAYOPT_THREADS when set, otherwise the hardware concurrency.
inline int thread_count()
{
  if (char const *env = std::getenv("RELAYOPT_THREADS"))
  {
    int v = 0;
    auto const r = std::from_chars(env, env + std::char_traits<char>::length(env), v);
    if (r.ec == std::errc{} && v >= 1)
    {
      return v;
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, n) on up to `threads` workers; results must be stored by index.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &fn)
{
  auto const workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1)
  {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr       error;
  std::mutex               error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
  {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++)
      {
        try
        {
          fn(i);
        }
        catch (...)
        {
          std::lock_guard lock(error_mu);
          if (!error)
            error = std::current_exception();
        }
      }
    });
  }
  for (auto &t : pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

struct Table
{
  std::vector<std::string>              header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const
  {
    std::string out;
    auto line = [&](const std::vector<std::string> &cells) {
      for (std::size_t i = 0; i < cells.size(); ++i)
      {
        if (i)
          out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header);
    for (auto const &r : rows)
      line(r);
    return out;
  }
};

// ---------------------------------------------------------------------------
// network experiments

/// One (seed, P_max) network draw: auction on P_max valuations, then both schemes.
struct NetworkRun
{
  std::uint64_t                seed = 0;
  double                       db   = 0.0;
  std::vector<int>             selected;
  std::vector<double>          u;
  std::optional<JointSolution> joint;
  std::optional<JointSolution> relay_only;
  std::string                  failure;  ///< why the draw was skipped
};

inline NetworkRun run_network(const ExperimentConfig &c, std::uint64_t seed, double db, bool with_baseline)
{
  NetworkRun run;
  run.seed = seed;
  run.db   = db;
  auto const params  = physical_params(c, db_to_watts(db));
  auto const ch      = sample_channels(seed, c.N);
  auto const values  = relay_valuations(ch.relays(), params);
  auto const outcome = run_auction(values, values, c.K);
  auto const req     = harvest_requirements(outcome, params);
  run.selected       = req.relays;
  run.u              = req.u;

  AlternatingOptions opt;
  opt.max_iter = c.max_iter;
  if (c.init == InitPower::Max)
  {
    opt.init_p1 = params.P_max;
    opt.init_p2 = params.P_max;
  }
  try
  {
    run.joint = alternating_optimize(ch, run.selected, params, run.u, opt);
    if (with_baseline)
      run.relay_only = relayopt::relay_only(ch, run.selected, params);
  }
  catch (const FeasibilityError &e)
  {
    run.joint.reset();
    run.relay_only.reset();
    run.failure = e.what();
  }
  return run;
}

namespace detail {

/// Violated invariant of a returned solution, or empty. Relay-only runs ignore leakage and harvesting.
inline std::string solution_violation(const JointSolution &sol, const ChannelRealization &ch,
                                      const std::vector<int> &selected, const SystemParams &params,
                                      const std::vector<double> &u, bool joint)
{
  auto const eff = effective_channels(ch, selected, sol.p1, sol.p2, params.sigma2);
  for (int j = 0; j < 2; ++j)
  {
    if (std::abs(sol.f.dot(eff.hbar_e.col(j))) > 1e-8)
      return "zero-forcing residual above 1e-8";
  }
  for (std::size_t k = 0; k < selected.size(); ++k)
  {
    auto const e = static_cast<Eigen::Index>(k);
    if (std::norm(sol.f(e)) * eff.rs(e) > params.p_r + 1e-6)
      return "relay power above budget";
    if (joint && params.harvest_fraction(selected[k]) * eff.rs(e) < u[k] - 1e-6)
      return "harvest below requirement";
  }
  if (sol.p1 < 0.0 || sol.p2 < 0.0 || sol.p1 > params.P_max || sol.p2 > params.P_max)
    return "source power outside [0, P_max]";
  if (joint)
  {
    double const leak = sol.p1 * std::norm(ch.h1e) + sol.p2 * std::norm(ch.h2e);
    if (leak > params.sigma2 * std::expm1(2.0 * params.r_e * std::log(2.0)) + 1e-6)
      return "leakage above cap";
  }
  for (std::size_t t = 1; t < sol.trace.size(); ++t)
  {
    if (sol.trace[t] < sol.trace[t - 1] - 1e-9)
      return "objective trace decreases";
  }
  return {};
}

inline std::vector<double> report_grid(const ExperimentConfig &c, bool include_values)
{
  std::vector<double> g;
  for (int j = 0; j < c.grid_points; ++j)
    g.push_back(c.grid_max * j / (c.grid_points - 1));
  if (include_values)
  {
    g.insert(g.end(), c.values.begin(), c.values.end());
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
  }
  return g;
}

inline std::vector<int> relays_of(const ExperimentConfig &c)
{
  std::vector<int> r;
  for (int i = 0; i < c.N; ++i)
  {
    if (c.relay == 0 || c.relay == i + 1)
      r.push_back(i);
  }
  return r;
}

inline std::vector<std::string> vcg_row(const ExperimentConfig &c, const AuctionOutcome &o, int i)
{
  auto const &rep = c.reports.empty() ? c.values : c.reports;
  auto const  k   = static_cast<std::size_t>(i);
  bool const  sel = std::find(o.winners.begin(), o.winners.end(), i) != o.winners.end();
  return {fmt(i + 1), fmt(rep[k]), fmt(c.values[k]), sel ? "1" : "0", fmt(o.transfers[k]), fmt(o.utilities[k])};
}

inline AuctionOutcome vcg_outcome(const ExperimentConfig &c)
{
  return run_auction(c.reports.empty() ? c.values : c.reports, c.values, c.K);
}

inline std::vector<std::string> exaggeration_row(const ExperimentConfig &c, double report)
{
  auto const               u = payoff_profile(c.values, c.relay - 1, report, c.K);
  std::vector<std::string> row{fmt(report)};
  double                   total = 0.0;
  for (double x : u)
  {
    row.push_back(fmt(x));
    total += x;
  }
  row.push_back(fmt(total));
  return row;
}

inline std::vector<std::string> network_row(const NetworkRun &r, const JointSolution &s, const char *scheme)
{
  return {fmt(r.db),    fmt(r.seed),   scheme,       fmt(s.secrecy_rate), fmt(s.p1),
          fmt(s.p2),    fmt(s.nu),     fmt(s.r0),    fmt(s.beta),         fmt(s.iterations),
          std::string(to_string(s.stop))};
}

struct Built
{
  Table                   table;
  std::vector<NetworkRun> runs;
  std::size_t             skipped = 0;
};

inline Built build(const ExperimentConfig &c, int threads)
{
  Built b;
  auto &t = b.table;
  switch (c.experiment)
  {
  case Kind::VcgDemo:
  {
    t.header         = {"relay", "reported", "true_value", "selected", "transfer", "utility"};
    auto const out   = vcg_outcome(c);
    for (int i = 0; i < c.N; ++i)
      t.rows.push_back(vcg_row(c, out, i));
    break;
  }
  case Kind::PayoffCurve:
  {
    t.header = {"relay", "reported", "payoff"};
    for (int i : relays_of(c))
    {
      for (double r : report_grid(c, true))
        t.rows.push_back({fmt(i + 1), fmt(r), fmt(payoff_profile(c.values, i, r, c.K)[static_cast<std::size_t>(i)])});
    }
    break;
  }
  case Kind::Exaggeration:
  {
    t.header = {"reported"};
    for (int i = 0; i < c.N; ++i)
      t.header.push_back("payoff_R" + std::to_string(i + 1));
    t.header.push_back("total");
    for (double r : report_grid(c, true))
      t.rows.push_back(exaggeration_row(c, r));
    break;
  }
  case Kind::ExpectedPayoff:
  {
    t.header          = {"relay", "reported", "mean_payoff", "stderr"};
    auto const relays = relays_of(c);
    auto const grid   = report_grid(c, false);
    std::vector<std::vector<PayoffEstimate>> curves(relays.size());
    parallel_for(relays.size(), threads, [&](std::size_t j) {
      curves[j] = expected_payoff_curve(grid, c.values[static_cast<std::size_t>(relays[j])], c.pi, c.N, c.K,
                                        c.samples, c.seeds.front());
    });
    for (std::size_t j = 0; j < relays.size(); ++j)
    {
      for (std::size_t g = 0; g < grid.size(); ++g)
        t.rows.push_back({fmt(relays[j] + 1), fmt(grid[g]), fmt(curves[j][g].mean), fmt(curves[j][g].std_error)});
    }
    break;
  }
  case Kind::PowerSweep:
  case Kind::Baselines:
  case Kind::Convergence:
  {
    bool const conv  = c.experiment == Kind::Convergence;
    auto       seeds = c.seeds;
    std::sort(seeds.begin(), seeds.end());
    std::vector<double> dbs = conv ? std::vector<double>{c.P_max_dB.front()} : c.P_max_dB;
    b.runs.resize(dbs.size() * seeds.size());
    parallel_for(b.runs.size(), threads, [&](std::size_t j) {
      b.runs[j] = run_network(c, seeds[j % seeds.size()], dbs[j / seeds.size()], !conv);
    });
    b.skipped = static_cast<std::size_t>(
        std::count_if(b.runs.begin(), b.runs.end(), [](const NetworkRun &r) { return !r.joint; }));

    if (conv)
    {
      t.header = {"seed", "iteration", "objective"};
      for (auto const &r : b.runs)
      {
        if (!r.joint)
          continue;
        for (std::size_t it = 0; it < r.joint->trace.size(); ++it)
          t.rows.push_back({fmt(r.seed), fmt(static_cast<int>(it)), fmt(r.joint->trace[it])});
      }
    }
    else if (c.experiment == Kind::Baselines)
    {
      t.header = {"P_max_dB", "seed", "scheme", "secrecy_rate", "p1", "p2", "nu", "r0", "beta", "iterations", "stop"};
      for (auto const &r : b.runs)
      {
        if (!r.joint)
          continue;
        t.rows.push_back(network_row(r, *r.joint, "joint"));
        t.rows.push_back(network_row(r, *r.relay_only, "relay-only"));
      }
    }
    else
    {
      t.header = {"P_max_dB", "scheme", "secrecy_rate"};
      for (std::size_t d = 0; d < dbs.size(); ++d)
      {
        double      sj = 0.0, sr = 0.0;
        std::size_t n  = 0;
        for (std::size_t j = d * seeds.size(); j < (d + 1) * seeds.size(); ++j)
        {
          if (!b.runs[j].joint)
            continue;
          sj += b.runs[j].joint->secrecy_rate;
          sr += b.runs[j].relay_only->secrecy_rate;
          ++n;
        }
        if (n == 0)
          continue;
        t.rows.push_back({fmt(dbs[d]), "joint", fmt(sj / n)});
        t.rows.push_back({fmt(dbs[d]), "relay-only", fmt(sr / n)});
      }
    }
    break;
  }
  }
  return b;
}

inline double cell_number(const std::string &s)
{
  return parse_number<double>(s, 0, "csv");
}

/// Recomputes one emitted row from scratch; returns a failure message or empty.
inline std::string verify_row(const ExperimentConfig &c, const Table &t, std::size_t idx)
{
  auto const &row = t.rows[idx];
  switch (c.experiment)
  {
  case Kind::VcgDemo:
  {
    int const  i   = std::stoi(row[0]) - 1;
    auto const out = vcg_outcome(c);
    if (vcg_row(c, out, i) != row)
      return "recomputed row differs";
    double const expect = row[3] == "1" ? c.values[static_cast<std::size_t>(i)] - out.clearing_price : 0.0;
    if (out.utilities[static_cast<std::size_t>(i)] != expect)
      return "utility is not value minus clearing price";
    return {};
  }
  case Kind::PayoffCurve:
  {
    int const    i   = std::stoi(row[0]) - 1;
    double const r   = cell_number(row[1]);
    auto const   u   = payoff_profile(c.values, i, r, c.K);
    auto         rep = c.values;
    rep[static_cast<std::size_t>(i)] = r;
    auto const w     = vcg_select(rep, c.K);
    if (fmt(u[static_cast<std::size_t>(i)]) != row[2])
      return "recomputed payoff differs";
    if (std::find(w.begin(), w.end(), i) == w.end() && u[static_cast<std::size_t>(i)] != 0.0)
      return "unselected relay with nonzero payoff";
    return {};
  }
  case Kind::Exaggeration:
    return exaggeration_row(c, cell_number(row[0])) == row ? std::string{} : "recomputed row differs";
  case Kind::ExpectedPayoff:
  {
    auto const i = static_cast<std::size_t>(std::stoi(row[0]) - 1);
    auto const e = expected_payoff(cell_number(row[1]), c.values[i], c.pi, c.N, c.K, c.samples, c.seeds.front());
    if (fmt(e.mean) != row[2] || fmt(e.std_error) != row[3])
      return "recomputed estimate differs";
    return {};
  }
  case Kind::Baselines:
  case Kind::Convergence:
  {
    bool const          conv = c.experiment == Kind::Convergence;
    std::uint64_t const seed = std::stoull(conv ? row[0] : row[1]);
    double const        db   = conv ? c.P_max_dB.front() : cell_number(row[0]);
    auto const          r    = run_network(c, seed, db, !conv);
    if (!r.joint)
      return "draw no longer feasible";
    auto const params = physical_params(c, db_to_watts(db));
    auto const ch     = sample_channels(seed, c.N);
    if (auto v = solution_violation(*r.joint, ch, r.selected, params, r.u, true); !v.empty())
      return "joint: " + v;
    if (conv)
    {
      auto const it = static_cast<std::size_t>(std::stoi(row[1]));
      if (it >= r.joint->trace.size() || fmt(r.joint->trace[it]) != row[2])
        return "recomputed trace differs";
      return {};
    }
    if (auto v = solution_violation(*r.relay_only, ch, r.selected, params, r.u, false); !v.empty())
      return "relay-only: " + v;
    bool const joint = row[2] == "joint";
    if (network_row(r, joint ? *r.joint : *r.relay_only, joint ? "joint" : "relay-only") != row)
      return "recomputed row differs";
    return {};
  }
  case Kind::PowerSweep:
  {
    auto sub     = c;
    sub.P_max_dB = {cell_number(row[0])};
    auto const b = build(sub, 1);
    for (auto const &r : b.runs)
    {
      if (!r.joint)
        continue;
      auto const params = physical_params(c, db_to_watts(r.db));
      auto const ch     = sample_channels(r.seed, c.N);
      if (auto v = solution_violation(*r.joint, ch, r.selected, params, r.u, true); !v.empty())
        return "seed " + std::to_string(r.seed) + " joint: " + v;
    }
    for (auto const &other : b.table.rows)
    {
      if (other == row)
        return {};
    }
    return "recomputed mean differs";
  }
  }
  return "unknown experiment";
}

}  // namespace detail

struct RunOptions
{
  std::filesystem::path out_dir;
  bool                  verify  = false;
  int                   threads = 0;  ///< 0 reads RELAYOPT_THREADS
  std::ostream         *out     = &std::cout;
  std::ostream         *log     = &std::cerr;
};

struct RunReport
{
  std::filesystem::path    csv;
  std::size_t              rows     = 0;
  std::size_t              skipped  = 0;
  std::size_t              verified = 0;
  std::vector<std::string> verify_failures;
};

inline std::string csv_name(Kind k)
{
  std::string s(to_string(k));
  std::replace(s.begin(), s.end(), '-', '_');
  return s + ".csv";
}

/// Rows picked for verification: every hundredth, starting with the first.
inline std::vector<std::size_t> verification_rows(std::size_t n)
{
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; i += 100)
    out.push_back(i);
  return out;
}

inline RunReport run(const ExperimentConfig &c, const RunOptions &opt = {})
{
  validate(c);
  int const  threads = opt.threads > 0 ? opt.threads : thread_count();
  auto const built   = detail::build(c, threads);

  auto const dir = opt.out_dir.empty() ? std::filesystem::path(c.output_path) : opt.out_dir;
  std::filesystem::create_directories(dir);
  RunReport rep;
  rep.csv     = dir / csv_name(c.experiment);
  rep.rows    = built.table.rows.size();
  rep.skipped = built.skipped;
  {
    std::ofstream f(rep.csv, std::ios::binary);
    if (!f)
      throw Error("cannot write " + rep.csv.string());
    f << built.table.csv();
  }

  for (auto const &r : built.runs)
  {
    if (!r.joint)
      *opt.log << "skipped seed " << r.seed << " at " << detail::fmt(r.db) << " dB: " << r.failure << '\n';
  }

  if (c.experiment == Kind::VcgDemo)
  {
    auto &o = *opt.out;
    o << std::left << std::setw(7) << "relay" << std::setw(11) << "reported" << std::setw(11) << "true"
      << std::setw(10) << "selected" << std::setw(11) << "transfer" << "utility\n";
    double welfare = 0.0;
    for (auto const &row : built.table.rows)
    {
      o << std::setw(7) << row[0] << std::setw(11) << row[1] << std::setw(11) << row[2] << std::setw(10)
        << (row[3] == "1" ? "yes" : "no") << std::setw(11) << row[4] << row[5] << '\n';
      welfare += detail::cell_number(row[5]);
    }
    o << "total welfare " << detail::fmt(welfare) << '\n';
  }
  if (c.experiment == Kind::Convergence)
  {
    std::size_t within = 0, feasible = 0;
    for (auto const &r : built.runs)
    {
      if (!r.joint)
        continue;
      ++feasible;
      within += r.joint->converged() && r.joint->iterations <= 20;
      *opt.out << "seed " << r.seed << ": " << r.joint->iterations << " iterations, " << to_string(r.joint->stop)
               << ", secrecy rate " << detail::fmt(r.joint->secrecy_rate) << '\n';
    }
    *opt.out << within << " of " << feasible << " runs converged within 20 iterations\n";
  }
  *opt.out << "wrote " << rep.rows << " rows to " << rep.csv.string();
  if (rep.skipped)
    *opt.out << " (" << rep.skipped << " infeasible draws skipped)";
  *opt.out << '\n';

  if (opt.verify)
  {
    for (std::size_t i : verification_rows(built.table.rows.size()))
    {
      ++rep.verified;
      if (auto const msg = detail::verify_row(c, built.table, i); !msg.empty())
        rep.verify_failures.push_back("row " + std::to_string(i + 1) + ": " + msg);
    }
    *opt.out << "verified " << rep.verified << " rows, " << rep.verify_failures.size() << " failures\n";
    for (auto const &m : rep.verify_failures)
      *opt.log << "verify: " << m << '\n';
  }
  return rep;
}

}  // namespace relayopt::experiment
