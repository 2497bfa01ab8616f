#include <gtest/gtest.h>

#include <random>

#include "relayopt/model.hpp"

using namespace relayopt;

namespace {

ChannelRealization unit_channels(int n)
{
  ChannelRealization ch;
  ch.h1r = CVector::Ones(n);
  ch.h2r = CVector::Ones(n);
  ch.hre = CVector::Ones(n);
  ch.h1e = 1.0;
  ch.h2e = 1.0;
  return ch;
}

CVector random_vector(std::mt19937_64 &rng, int n)
{
  std::normal_distribution<double> g;
  CVector                          v(n);
  for (int i = 0; i < n; ++i)
    v(i) = cplx(g(rng), g(rng));
  return v;
}

}  // namespace

TEST(SampleChannels, DeterministicPerSeed)
{
  auto const a = sample_channels(42, 5);
  auto const b = sample_channels(42, 5);
  EXPECT_EQ(a.h1r, b.h1r);
  EXPECT_EQ(a.h2r, b.h2r);
  EXPECT_EQ(a.hre, b.hre);
  EXPECT_EQ(a.h1e, b.h1e);
  EXPECT_EQ(a.h2e, b.h2e);
  EXPECT_NE(sample_channels(43, 5).h1r, a.h1r);
  EXPECT_THROW(sample_channels(1, 0), ParameterError);
}

TEST(SampleChannels, UnitVariance)
{
  auto const ch = sample_channels(3, 10000);
  for (auto const *v : {&ch.h1r, &ch.h2r, &ch.hre})
  {
    double const mean_power = v->cwiseAbs2().mean();
    EXPECT_GE(mean_power, 0.95);
    EXPECT_LE(mean_power, 1.05);
    EXPECT_NEAR(v->real().cwiseAbs2().mean(), 0.5, 0.03);
  }
}

TEST(HarvestedPower, Examples)
{
  auto const ch = unit_channels(3);
  EXPECT_DOUBLE_EQ(harvested_power(0, 1.0, 1.0, ch, 0.5, 1.0, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(harvested_power(1, 7.0, 3.0, ch, 1.0, 1.0, 1.0), 0.0);
  EXPECT_THROW(harvested_power(3, 1.0, 1.0, ch, 0.5, 1.0, 1.0), DimensionError);
  EXPECT_THROW(harvested_power(0, -1.0, 1.0, ch, 0.5, 1.0, 1.0), ParameterError);
}

TEST(HarvestedPower, DirectFormulaAndMonotone)
{
  auto const ch = sample_channels(5, 6);
  std::mt19937_64                        rng(5);
  std::uniform_real_distribution<double> u(0.0, 5.0), r(0.0, 1.0), x(0.1, 1.0);
  for (int t = 0; t < 50; ++t)
  {
    int const    i  = t % 6;
    double const p1 = u(rng), p2 = u(rng), rho = r(rng), xi = x(rng), s2 = x(rng);
    double const expect =
        xi * (1.0 - rho) * (p1 * std::norm(ch.h1r(i)) + p2 * std::norm(ch.h2r(i)) + s2);
    double const got = harvested_power(i, p1, p2, ch, rho, xi, s2);
    EXPECT_NEAR(got, expect, 1e-12 * (1.0 + expect));
    EXPECT_GE(got, xi * (1.0 - rho) * s2 - 1e-15);
    EXPECT_GE(harvested_power(i, p1 + 1.0, p2, ch, rho, xi, s2), got);
    EXPECT_GE(harvested_power(i, p1, p2 + 1.0, ch, rho, xi, s2), got);
  }
}

TEST(EffectiveChannels, UnitCase)
{
  auto const eff = effective_channels(unit_channels(4), {0, 1, 2}, 1.0, 1.0, 1.0);
  EXPECT_EQ(eff.h21, CVector::Ones(3));
  EXPECT_EQ(eff.Cn1(), CMatrix::Identity(3, 3));
  EXPECT_EQ(eff.rs, RVector::Constant(3, 3.0));
  EXPECT_THROW(effective_channels(unit_channels(4), {0, 0, 1}, 1.0, 1.0, 1.0), DimensionError);
  EXPECT_THROW(effective_channels(unit_channels(4), {0, 4, 1}, 1.0, 1.0, 1.0), DimensionError);
}

TEST(EffectiveChannels, RandomIdentities)
{
  auto const             ch     = sample_channels(17, 8);
  std::vector<int> const sel    = {6, 1, 3, 4};
  auto const             params = SystemParams::make(8, 4, 3.0, 1.0);
  auto const             eff    = effective_channels(ch, sel, 2.0, 0.5, params.sigma2);
  for (int k = 0; k < 4; ++k)
  {
    int const i = sel[static_cast<std::size_t>(k)];
    EXPECT_LT(std::abs(eff.h21(k) - eff.h12(k)), 1e-12);
    EXPECT_EQ(eff.h21(k), ch.h1r(i) * ch.h2r(i));
    EXPECT_DOUBLE_EQ(eff.cn2(k), std::norm(ch.h2r(i)));
    EXPECT_EQ(eff.hbar_e(k, 0), ch.hre(i) * ch.h1r(i));
    double const ph = harvested_power(i, 2.0, 0.5, ch, params.rho[i], params.xi[i], params.sigma2);
    EXPECT_NEAR(eff.rs(k), ph / params.harvest_fraction(i), 1e-12);
  }
}

TEST(LinkSnrs, Examples)
{
  auto const eff = effective_channels(unit_channels(3), {0}, 1.0, 1.0, 1.0);
  auto const [g1, g2] = link_snrs(CVector::Ones(1), eff, 1.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(g1, 0.5);
  EXPECT_DOUBLE_EQ(g2, 0.5);
  auto const [z1, z2] = link_snrs(CVector::Zero(1), eff, 1.0, 1.0, 1.0);
  EXPECT_EQ(z1, 0.0);
  EXPECT_EQ(z2, 0.0);
  EXPECT_THROW(link_snrs(CVector::Zero(2), eff, 1.0, 1.0, 1.0), DimensionError);
}

TEST(LinkSnrs, RayleighQuotientOracle)
{
  std::mt19937_64        rng(19);
  auto const             ch  = sample_channels(19, 6);
  std::vector<int> const sel = {0, 2, 5};
  auto const             eff = effective_channels(ch, sel, 1.3, 0.7, 0.9);
  for (int t = 0; t < 20; ++t)
  {
    CVector const f = random_vector(rng, 3);
    // quadratic forms written out with the full matrices
    CMatrix const s1 = eff.h21 * eff.h21.adjoint();
    CMatrix const s2 = eff.h12 * eff.h12.adjoint();
    double const  e1 = 0.7 * (f.adjoint() * s1 * f)(0).real() / (0.9 * ((f.adjoint() * eff.Cn1() * f)(0).real() + 1));
    double const  e2 = 1.3 * (f.adjoint() * s2 * f)(0).real() / (0.9 * ((f.adjoint() * eff.Cn2() * f)(0).real() + 1));
    auto const [g1, g2] = link_snrs(f, eff, 1.3, 0.7, 0.9);
    EXPECT_NEAR(g1, e1, 1e-12 * (1 + e1));
    EXPECT_NEAR(g2, e2, 1e-12 * (1 + e2));
  }
  // saturation: growing the weights raises the SNR towards a finite limit
  CVector const f  = random_vector(rng, 3);
  double        prev = 0.0;
  for (double c : {0.1, 1.0, 10.0, 100.0, 1000.0})
  {
    double const g = link_snrs(CVector(c * f), eff, 1.3, 0.7, 0.9).first;
    EXPECT_GT(g, prev);
    prev = g;
  }
  double const limit = 0.7 * std::norm(f.dot(eff.h21)) / (0.9 * f.cwiseAbs2().dot(eff.cn1));
  EXPECT_LT(prev, limit);
  EXPECT_NEAR(prev, limit, 1e-3 * limit);
}

TEST(EavesdropperCapacity, Examples)
{
  auto const ch = unit_channels(3);
  EXPECT_DOUBLE_EQ(eavesdropper_capacity_full(CVector::Zero(3), ch, {0, 1, 2}, 0.0, 0.0, 1.0), 0.0);
  EXPECT_NEAR(eavesdropper_capacity_full(CVector::Zero(3), ch, {0, 1, 2}, 1.0, 1.0, 1.0), 0.5 * std::log2(3.0),
              1e-12);
  EXPECT_DOUBLE_EQ(eavesdropper_capacity_nullspace(0.0, 0.0, 1.0, 1.0, 1.0), 0.0);
  EXPECT_NEAR(eavesdropper_capacity_nullspace(1.0, 0.0, std::sqrt(3.0), 0.3, 1.0), 1.0, 1e-12);
  EXPECT_THROW(eavesdropper_capacity_nullspace(-1.0, 0.0, 1.0, 1.0, 1.0), ParameterError);
}

TEST(EavesdropperCapacity, ZeroForcingMatchesReducedForm)
{
  std::mt19937_64 rng(23);
  for (int seed = 0; seed < 20; ++seed)
  {
    auto const             ch  = sample_channels(static_cast<std::uint64_t>(seed), 6);
    std::vector<int> const sel = {0, 1, 3, 5};
    auto const             eff = effective_channels(ch, sel, 1.0, 1.0, 1.0);
    CMatrix const          b   = null_space_basis(eff.hbar_e);
    CVector const          f   = b * random_vector(rng, static_cast<int>(b.cols()));
    EXPECT_LT(std::abs(f.dot(eff.hbar_e.col(0))), 1e-8);
    EXPECT_LT(std::abs(f.dot(eff.hbar_e.col(1))), 1e-8);
    double const full    = eavesdropper_capacity_full(f, ch, sel, 2.0, 0.5, 1.0);
    double const reduced = eavesdropper_capacity_nullspace(2.0, 0.5, ch.h1e, ch.h2e, 1.0);
    EXPECT_NEAR(full, reduced, 1e-9);

    // monotone in the source powers
    EXPECT_GE(eavesdropper_capacity_nullspace(2.5, 0.5, ch.h1e, ch.h2e, 1.0), reduced);
    EXPECT_GE(eavesdropper_capacity_nullspace(2.0, 0.6, ch.h1e, ch.h2e, 1.0), reduced);
  }
}

TEST(EavesdropperCapacity, LeakageRaisesRate)
{
  std::mt19937_64        rng(29);
  auto const             ch  = sample_channels(29, 5);
  std::vector<int> const sel = {0, 1, 2};
  double const           base = eavesdropper_capacity_nullspace(1.0, 1.0, ch.h1e, ch.h2e, 1.0);
  for (int t = 0; t < 20; ++t)
  {
    CVector const f = random_vector(rng, 3);
    EXPECT_GE(eavesdropper_capacity_full(f, ch, sel, 1.0, 1.0, 1.0), base - 1e-12);
  }
}

TEST(SecrecySumRate, Examples)
{
  auto const ch = sample_channels(31, 5);
  EXPECT_EQ(secrecy_sum_rate(CVector::Zero(3), ch, {0, 1, 2}, 1.0, 1.0, 1.0), 0.0);

  // strong eavesdropper, weak legitimate links: clamp branch
  auto strong = unit_channels(3);
  strong.h1e  = 100.0;
  strong.h2e  = 100.0;
  strong.h1r *= 0.01;
  EXPECT_EQ(secrecy_sum_rate(CVector::Ones(3), strong, {0, 1, 2}, 1.0, 1.0, 1.0), 0.0);
}

TEST(SecrecySumRate, ComponentwiseOracle)
{
  std::mt19937_64 rng(37);
  int             positive = 0;
  for (int seed = 0; seed < 40; ++seed)
  {
    auto ch = sample_channels(static_cast<std::uint64_t>(seed), 5);
    ch.h1e *= 0.2;
    ch.h2e *= 0.2;
    std::vector<int> const sel = {0, 2, 4};
    CVector const          f   = random_vector(rng, 3);
    auto const             eff = effective_channels(ch, sel, 3.0, 2.0, 1.0);
    auto const [g1, g2]        = link_snrs(f, eff, 3.0, 2.0, 1.0);
    double const raw = 0.5 * std::log2(1 + g1) + 0.5 * std::log2(1 + g2) -
                       eavesdropper_capacity_full(f, ch, sel, 3.0, 2.0, 1.0);
    double const cs = secrecy_sum_rate(f, ch, sel, 3.0, 2.0, 1.0);
    EXPECT_NEAR(cs, std::max(0.0, raw), 1e-12);
    positive += raw > 0.0;
  }
  EXPECT_GT(positive, 0);
}

TEST(BatteryPower, Examples)
{
  auto const   ch     = sample_channels(41, 5);
  auto const   params = SystemParams::make(5, 3, 2.0, 1.0);
  double const ph     = harvested_power(2, 1.5, 0.5, ch, 0.5, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(battery_power(2, 0.0, ch, 1.5, 0.5, params), ph);
  EXPECT_NEAR(battery_power(2, std::sqrt(0.5), ch, 1.5, 0.5, params), 0.0, 1e-12);

  std::mt19937_64 rng(41);
  for (int t = 0; t < 20; ++t)
  {
    cplx const   fi = random_vector(rng, 1)(0);
    double const pb = battery_power(t % 5, fi, ch, 1.5, 0.5, params);
    double const p  = harvested_power(t % 5, 1.5, 0.5, ch, 0.5, 1.0, 1.0);
    double const rs = received_power(ch.relay(t % 5), 1.5, 0.5, 1.0);
    EXPECT_NEAR(p - pb, std::norm(fi) * rs, 1e-12 * (1 + p));
  }
}

TEST(SisoValuation, Examples)
{
  RelayChannel const unit{1.0, 1.0, 1.0};
  EXPECT_NEAR(siso_secrecy_valuation(unit, 1.0, 1.0, 1.0, 1.0), std::log2(1.25), 1e-12);
  EXPECT_NEAR(siso_secrecy_valuation(unit, 1.0, 1.0, 1.0, 1.0), 0.3219, 1e-4);
  EXPECT_EQ(siso_secrecy_valuation({0.0, 0.0, 1.0}, 1.0, 1.0, 1.0, 1.0), 0.0);
}

TEST(SisoValuation, MonotoneInRelayBudgetAndCommonSourcePower)
{
  std::mt19937_64                        rng(43);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  auto const                             ch = sample_channels(43, 30);
  for (int i = 0; i < 30; ++i)
  {
    auto const   g  = ch.relay(i);
    double const p  = u(rng), pr = u(rng);
    double const v  = siso_secrecy_valuation(g, p, p, pr, 1.0);
    EXPECT_GE(v, 0.0);
    EXPECT_GT(siso_secrecy_valuation(g, p, p, 2.0 * pr, 1.0), v);
    EXPECT_GT(siso_secrecy_valuation(g, 1.5 * p, 1.5 * p, pr, 1.0), v);
  }
}

TEST(SisoValuation, NotMonotoneInASingleSourcePower)
{
  // Raising p1 alone also shrinks the amplification factor seen by the S1 -> S2 term.
  RelayChannel const g{cplx(2.0, 0.0), cplx(0.3, 0.0), 0.0};
  double const       base = siso_secrecy_valuation(g, 1.0, 1.0, 1.0, 1.0);
  EXPECT_LT(siso_secrecy_valuation(g, 4.0, 1.0, 1.0, 1.0), base);
}

TEST(SystemParams, Validation)
{
  auto p = SystemParams::make(5, 3, 10.0, 2.0);
  EXPECT_NO_THROW(p.validate());
  p.rho[1] = 1.5;
  EXPECT_THROW(p.validate(), ParameterError);
  p        = SystemParams::make(5, 3, 10.0, 2.0);
  p.xi[0]  = 0.0;
  EXPECT_THROW(p.validate(), ParameterError);
  p = SystemParams::make(5, 6, 10.0, 2.0);
  EXPECT_THROW(p.validate(), ParameterError);
  p = SystemParams::make(5, 3, -1.0, 2.0);
  EXPECT_THROW(p.validate(), ParameterError);
}
