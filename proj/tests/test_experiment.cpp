#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "relayopt/experiment.hpp"

using namespace relayopt;
using namespace relayopt::experiment;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string &name)
{
  auto const d = fs::temp_directory_path() / ("relayopt_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path &p)
{
  std::ifstream      in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunReport quiet_run(const ExperimentConfig &c, const fs::path &dir, int threads = 1, bool verify = false)
{
  std::ostringstream sink;
  RunOptions         opt;
  opt.out_dir = dir;
  opt.threads = threads;
  opt.verify  = verify;
  opt.out     = &sink;
  opt.log     = &sink;
  return run(c, opt);
}

std::vector<std::vector<std::string>> read_csv(const fs::path &p)
{
  std::ifstream                          in(p);
  std::string                            line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
  {
    std::vector<std::string> cells;
    std::stringstream        ss(line);
    std::string              cell;
    while (std::getline(ss, cell, ','))
      cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

int error_line(const std::string &text)
{
  try
  {
    parse_config_text(text);
  }
  catch (const ConfigError &e)
  {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST(ParseConfig, MinimalFileFillsDefaults)
{
  auto const c = parse_config_text("experiment = vcg-demo\n");
  EXPECT_EQ(c.experiment, Kind::VcgDemo);
  EXPECT_EQ(c.values, kExampleValues);
  EXPECT_EQ(c.N, 5);
  EXPECT_EQ(c.K, 3);
  EXPECT_EQ(c.sigma2, 1.0);
  EXPECT_EQ(c.rho, 0.5);
  EXPECT_EQ(c.pi, 1.0);
  EXPECT_EQ(c.r_e, 1.0);
  EXPECT_EQ(c.tol_outer, 1e-3);

  auto const sweep = parse_config_text("experiment = power-sweep\n");
  EXPECT_EQ(sweep.N, 8);
  EXPECT_EQ(sweep.P_max_dB.size(), 11u);
  EXPECT_EQ(sweep.P_max_dB.back(), 10.0);
  EXPECT_EQ(parse_config_text("experiment = convergence").init, InitPower::Max);
  EXPECT_EQ(parse_config_text("", Kind::Exaggeration).relay, 3);
}

TEST(ParseConfig, ErrorsCarryLineNumbers)
{
  EXPECT_EQ(error_line("experiment = vcg-demo\n\nfoo = 1\n"), 3);
  EXPECT_EQ(error_line("experiment = vcg-demo\nK = 2\n# note\nK = 3\n"), 4);
  EXPECT_EQ(error_line("experiment = vcg-demo\nsamples = many\n"), 2);
  EXPECT_EQ(error_line("experiment = vcg-demo\njust text\n"), 2);
  EXPECT_EQ(error_line("experiment = sdr\n"), 1);
  try
  {
    parse_config_text("experiment = vcg-demo\nK = 2\nK = 3\n");
    FAIL();
  }
  catch (const ConfigError &e)
  {
    EXPECT_NE(std::string(e.what()).find("'K'"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(ParseConfig, SemanticChecks)
{
  EXPECT_THROW(parse_config_text("experiment = vcg-demo\nK = 5\n"), ConfigError);
  EXPECT_THROW(parse_config_text("experiment = power-sweep\nK = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("experiment = payoff-curve\nvalues = 1,2,3\nN = 5\n"), ConfigError);
  EXPECT_THROW(parse_config_text("experiment = convergence\nseeds = 4:2\n"), ConfigError);
  EXPECT_THROW(parse_config_text(""), ConfigError);
  EXPECT_THROW(parse_config_text("experiment = vcg-demo\n", Kind::Baselines), ConfigError);
  EXPECT_THROW(parse_config_text("experiment = baselines\nrho = 1.5\n"), ConfigError);
  EXPECT_EQ(parse_config_text("experiment = baselines\nseeds = 3:5, 9\n").seeds,
            (std::vector<std::uint64_t>{3, 4, 5, 9}));
}

TEST(ParseConfig, SerializeRoundTrip)
{
  std::vector<std::string> const texts = {
      "experiment = vcg-demo\n",
      "  # messy spacing and comments\nexperiment=payoff-curve   \n relay = 2 # R2 only\n",
      "experiment = baselines\nseeds = 1:4\nP_max_dB = 0, 2.5, 10\np_r = 0.75\nK = 4\n",
      "experiment = expected-payoff\nsamples = 2000\nvalues = 0.1,0.2,0.3,0.4,0.5,0.6\nK = 2\n",
      "experiment = convergence\ninit = table\ntol_outer = 0.0001\nbeta_grid = 11\n",
  };
  for (auto const &t : texts)
  {
    auto const        c    = parse_config_text(t);
    std::string const norm = serialize(c);
    EXPECT_EQ(parse_config_text(norm), c) << t;
    EXPECT_EQ(serialize(parse_config_text(norm)), norm) << t;
  }
  auto const n = serialize(parse_config_text(texts[1]));
  EXPECT_NE(n.find("experiment = payoff-curve\n"), std::string::npos);
  EXPECT_NE(n.find("relay = 2\n"), std::string::npos);
  EXPECT_EQ(n.find('#'), std::string::npos);
}

TEST(Run, VcgDemoTable)
{
  auto const dir = scratch_dir("vcg");
  auto       c   = parse_config_text("experiment = vcg-demo\n");
  auto const rep = quiet_run(c, dir, 1, true);
  EXPECT_EQ(slurp(rep.csv), "relay,reported,true_value,selected,transfer,utility\n"
                            "1,22,22,1,-12,10\n2,18,18,1,-12,6\n3,15,15,1,-12,3\n4,12,12,0,0,0\n5,8,8,0,0,0\n");
  EXPECT_TRUE(rep.verify_failures.empty());

  c.reports = {22, 18, 15, 22, 8};
  auto const lie = read_csv(quiet_run(c, dir).csv);
  EXPECT_EQ(lie[4], (std::vector<std::string>{"4", "22", "12", "1", "-15", "-3"}));
  EXPECT_EQ(lie[3][5], "0");
}

TEST(Run, PayoffCurveThresholds)
{
  auto const dir  = scratch_dir("payoff");
  auto const c    = parse_config_text("experiment = payoff-curve\n");
  auto const rows = read_csv(quiet_run(c, dir).csv);
  ASSERT_EQ(rows[0], (std::vector<std::string>{"relay", "reported", "payoff"}));
  for (std::size_t r = 1; r < rows.size(); ++r)
  {
    int const    relay  = std::stoi(rows[r][0]);
    double const rep    = std::stod(rows[r][1]);
    double const payoff = std::stod(rows[r][2]);
    if (relay == 1 || relay == 2 || relay == 5)
    {
      // truthful winners: positive only above the best loser's report
      if (rep < 0.4567)
        EXPECT_EQ(payoff, 0.0);
      if (rep > 0.4567)
        EXPECT_GT(payoff, 0.0);
    }
    else
    {
      // R3, R4 enter only above R5's report, and then lose money
      if (rep < 0.8421)
        EXPECT_EQ(payoff, 0.0);
      if (rep > 0.8421)
        EXPECT_LT(payoff, 0.0);
    }
  }
}

TEST(Run, ExaggerationTotals)
{
  auto const dir  = scratch_dir("exag");
  auto const rows = read_csv(quiet_run(parse_config_text("experiment = exaggeration\n"), dir).csv);
  ASSERT_EQ(rows[0].back(), "total");
  for (std::size_t r = 1; r < rows.size(); ++r)
  {
    double sum = 0.0;
    for (std::size_t j = 1; j + 1 < rows[r].size(); ++j)
      sum += std::stod(rows[r][j]);
    EXPECT_NEAR(sum, std::stod(rows[r].back()), 1e-12);
    double const rep = std::stod(rows[r][0]);
    EXPECT_EQ(rows[r][3] == "0", rep < 0.8421) << rep;  // R3 wins the tie with R5 by index
  }
}

TEST(Run, NetworkOutputIsDeterministicAcrossThreadCounts)
{
  auto const c = parse_config_text("experiment = baselines\nN = 5\nseeds = 1:3\nP_max_dB = 5, 10\n");
  auto const a = quiet_run(c, scratch_dir("det1"), 1, true);
  auto const b = quiet_run(c, scratch_dir("det4"), 4);
  EXPECT_EQ(slurp(a.csv), slurp(b.csv));
  EXPECT_TRUE(a.verify_failures.empty());
  auto const rows = read_csv(a.csv);
  EXPECT_EQ(rows[0][0], "P_max_dB");
  EXPECT_EQ(rows.size(), 1 + 2 * (6 - a.skipped));
}

TEST(Run, ConvergenceAndSweepSchemas)
{
  auto const conv = quiet_run(parse_config_text("experiment = convergence\nseeds = 1:2\n"), scratch_dir("conv"), 2, true);
  auto const rows = read_csv(conv.csv);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"seed", "iteration", "objective"}));
  EXPECT_EQ(rows[1][1], "0");
  EXPECT_TRUE(conv.verify_failures.empty());

  auto const sweep = quiet_run(parse_config_text("experiment = power-sweep\nN = 5\nseeds = 1:2\nP_max_dB = 0,10\n"),
                               scratch_dir("sweep"), 2, true);
  auto const s     = read_csv(sweep.csv);
  EXPECT_EQ(s[0], (std::vector<std::string>{"P_max_dB", "scheme", "secrecy_rate"}));
  EXPECT_TRUE(sweep.verify_failures.empty());
}

TEST(Run, ExpectedPayoffRowsAndVerify)
{
  auto const c   = parse_config_text("experiment = expected-payoff\nsamples = 2000\ngrid_points = 11\nrelay = 2\n");
  auto const rep = quiet_run(c, scratch_dir("exp"), 1, true);
  auto const rows = read_csv(rep.csv);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"relay", "reported", "mean_payoff", "stderr"}));
  EXPECT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[1][2], "0");  // reporting zero never wins
  EXPECT_TRUE(rep.verify_failures.empty());
}
