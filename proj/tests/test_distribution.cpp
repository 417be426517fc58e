#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lassodist/distribution.hpp"
#include "lassodist/quadrature.hpp"
#include "oracles.hpp"

using namespace lassodist;
using oracle::phi_cdf;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

// Parameters of the density figure: X'X = [[1, .5], [.5, 1]].
struct Fig {
  DesignProblem problem = design_from_gram((MatrixXd(2, 2) << 1, 0.5, 0.5, 1).finished());
  TuningVector tuning = TuningVector::uniform(2, 0.75);
  GaussianModel model = make_model(problem, vec({0, -0.25}), 1.0);
};

DesignProblem one_by_two() {
  MatrixXd x(1, 2);
  x << 1, 2;
  return build_problem(x);
}

DistributionOptions sampled(std::int64_t n = 100000, std::uint64_t seed = 9) {
  DistributionOptions o;
  o.method = Method::MonteCarlo;
  o.samples = n;
  o.seed = seed;
  return o;
}

void expect_agree(const RegionProbability& q, const RegionProbability& m) {
  EXPECT_LE(std::abs(q.estimate - m.estimate), 3 * m.std_error + q.quad_tol + 1e-3)
      << q.estimate << " vs " << m.estimate << " (se " << m.std_error << ")";
}

}  // namespace

TEST(ProbAllZero, OneDimensional) {
  const DesignProblem pr = build_problem(MatrixXd::Identity(1, 1));
  const auto r = prob_all_zero(pr, make_model(pr, vec({0}), 1.0), TuningVector::uniform(1, 1.0));
  EXPECT_NEAR(r.estimate, phi_cdf(1) - phi_cdf(-1), 1e-6);
  EXPECT_EQ(r.method, Method::Quadrature);
}

TEST(ProbAllZero, ReducedRankFormula) {
  const DesignProblem pr = one_by_two();
  for (double mu : {-1.0, 0.0, 1.0, 2.5}) {
    for (double lam : {0.5, 2.0}) {
      const auto m = make_model(pr, vec({mu, 0}), 1.3);
      const double want = phi_cdf((lam / 2 - mu) / 1.3) - phi_cdf((-lam / 2 - mu) / 1.3);
      EXPECT_NEAR(prob_all_zero(pr, m, TuningVector::uniform(2, lam)).estimate, want, 1e-12);
    }
  }
  const auto m = make_model(pr, vec({1, 0}), 1.0);
  EXPECT_NEAR(prob_all_zero(pr, m, TuningVector::uniform(2, 2.0)).estimate, phi_cdf(0) - phi_cdf(-2), 1e-12);
}

TEST(ProbAllZero, ZeroTuningHasNoAtom) {
  Fig f;
  EXPECT_NEAR(prob_all_zero(f.problem, f.model, TuningVector::uniform(2, 0.0)).estimate, 0.0, 1e-12);
}

TEST(ProbAllZero, AgreesWithSimulation) {
  Fig f;
  expect_agree(prob_all_zero(f.problem, f.model, f.tuning), prob_all_zero(f.problem, f.model, f.tuning, sampled()));
}

TEST(OrthantEvent, AllZeroReduction) {
  Fig f;
  const auto ev = OrthantEvent::error(-f.model.beta, f.model.beta);
  EXPECT_EQ(ev.d.l1(), 0);
  EXPECT_NEAR(prob_orthant_event(f.problem, f.model, f.tuning, ev).estimate,
              prob_all_zero(f.problem, f.model, f.tuning).estimate, 1e-5);
}

TEST(OrthantEvent, PartitionSumsToOne) {
  Fig f;
  double total = 0.0;
  for (const SignVector& d : SignVector::enumerate(2)) {
    total += prob_sign_pattern(f.problem, f.model, f.tuning, d).estimate;
  }
  EXPECT_NEAR(total, 1.0, 5e-3);
  EXPECT_NEAR(total, 1.0, 1e-5);
}

TEST(OrthantEvent, AgreesWithSimulationOnGrid) {
  Fig f;
  for (const VectorXd& z : {vec({0.5, -0.3}), vec({-0.2, 0.4}), vec({0, 0.6}), vec({1.0, 0}), vec({-0.5, -1.0})}) {
    const auto ev = OrthantEvent::estimator(z);
    expect_agree(prob_orthant_event(f.problem, f.model, f.tuning, ev),
                 prob_orthant_event(f.problem, f.model, f.tuning, ev, sampled(40000)));
  }
  // error events
  const auto ev = OrthantEvent::error(vec({0.2, 0.5}), f.model.beta);
  expect_agree(prob_orthant_event(f.problem, f.model, f.tuning, ev),
               prob_orthant_event(f.problem, f.model, f.tuning, ev, sampled(40000)));
}

TEST(OrthantEvent, SoftThresholdClosedForm) {
  // p = 1: b = soft(y, lambda) with y ~ N(beta, 1); P(b >= z) = 1 - Phi(z + lambda - beta) for z > 0
  const DesignProblem pr = build_problem(MatrixXd::Identity(1, 1));
  const auto m = make_model(pr, vec({0.3}), 1.0);
  const TuningVector t = TuningVector::uniform(1, 0.5);
  for (double z : {0.1, 0.7, 2.0}) {
    EXPECT_NEAR(prob_orthant_event(pr, m, t, OrthantEvent::estimator(vec({z}))).estimate, 1 - phi_cdf(z + 0.5 - 0.3), 1e-7);
    EXPECT_NEAR(prob_orthant_event(pr, m, t, OrthantEvent::estimator(vec({-z}))).estimate, phi_cdf(-z - 0.5 - 0.3), 1e-7);
  }
}

TEST(OrthantEvent, NonUnitGramNeedsJacobian) {
  // p = 1 with X'X = 4: b = soft(X'y / 4, lambda / 4), X'y ~ N(4 beta, 4)
  const DesignProblem pr = build_problem(MatrixXd::Constant(1, 1, 2.0));
  const auto m = make_model(pr, vec({0}), 1.0);
  const TuningVector t = TuningVector::uniform(1, 1.0);
  // P(b >= z) = P(X'y >= 4 z + 1) = 1 - Phi((4 z + 1) / 2)
  EXPECT_NEAR(prob_orthant_event(pr, m, t, OrthantEvent::estimator(vec({0.25}))).estimate, 1 - phi_cdf(1.0), 1e-7);
}

TEST(OrthantEvent, RejectsMismatchedSigns) {
  Fig f;
  OrthantEvent ev = OrthantEvent::estimator(vec({0.5, -0.3}));
  ev.d = SignVector({1, 1});
  EXPECT_THROW(prob_orthant_event(f.problem, f.model, f.tuning, ev), InputError);
  OrthantEvent er = OrthantEvent::error(vec({0.5, 0.1}), f.model.beta);
  er.d = SignVector({1, 0});
  EXPECT_THROW(prob_orthant_event(f.problem, f.model, f.tuning, er), InputError);
}

TEST(OrthantEvent, QuadratureNeedsFullRank) {
  const DesignProblem pr = one_by_two();
  EXPECT_THROW(prob_orthant_event(pr, make_model(pr, vec({0, 0}), 1.0), TuningVector::uniform(2, 1.0),
                                  OrthantEvent::estimator(vec({0, 1}))),
               PreconditionError);
}

TEST(OrthantEvent, DimensionLimit) {
  const DesignProblem pr = build_problem(MatrixXd::Identity(7, 7));
  EXPECT_THROW(prob_orthant_event(pr, make_model(pr, VectorXd::Zero(7), 1.0), TuningVector::uniform(7, 1.0),
                                  OrthantEvent::estimator(VectorXd::Constant(7, 0.5))),
               LimitError);
}

TEST(OrthantEvent, ProductDesignFactorizes) {
  // orthogonal design: coordinates are independent soft-thresholded normals
  const DesignProblem pr = build_problem(MatrixXd::Identity(3, 3));
  const auto m = make_model(pr, vec({0.2, -0.4, 0}), 1.0);
  const TuningVector t(vec({0.5, 1.0, 0.3}));
  const VectorXd z = vec({0.3, 0, -0.2});
  const double p1 = 1 - phi_cdf(0.3 + 0.5 - 0.2);
  const double p2 = phi_cdf(1.0 + 0.4) - phi_cdf(-1.0 + 0.4);
  const double p3 = phi_cdf(-0.2 - 0.3 - 0.0);
  EXPECT_NEAR(prob_orthant_event(pr, m, t, OrthantEvent::estimator(z)).estimate, p1 * p2 * p3, 1e-6);
}

TEST(ConditionalDensity, SoftThresholdExample) {
  const DesignProblem pr = build_problem(MatrixXd::Identity(1, 1));
  const auto m = make_model(pr, vec({0}), 1.0);
  const TuningVector t = TuningVector::uniform(1, 0.5);
  const SignVector d({1});
  const double norm = 1 - phi_cdf(0.5);
  for (double z : {0.1, 0.8, 2.0}) {
    const double want = std::exp(-0.5 * (z + 0.5) * (z + 0.5)) / std::sqrt(2 * M_PI) / norm;
    EXPECT_NEAR(conditional_density(pr, m, t, d, vec({z})), want, 1e-9);
  }
  EXPECT_EQ(conditional_density(pr, m, t, d, vec({-0.1})), 0.0);
}

TEST(ConditionalDensity, IntegratesToOne) {
  Fig f;
  for (const SignVector& d : {SignVector({0, 1}), SignVector({0, -1}), SignVector({1, -1}), SignVector({-1, 0})}) {
    const ConditionalDensity cd(f.problem, f.model, f.tuning, d);
    std::vector<quad::Axis> axes;
    for (int j : d.active()) {
      const double edge = -f.model.beta(j);
      axes.push_back(d[j] > 0 ? quad::Axis{edge, quad::kInf, 2.0} : quad::Axis{-quad::kInf, edge, 2.0});
    }
    quad::Options o;
    o.tol = 1e-6;
    const double total = quad::integrate(
        [&](std::span<const double> m) {
          VectorXd v(static_cast<Eigen::Index>(m.size()));
          for (std::size_t i = 0; i < m.size(); ++i) v(static_cast<Eigen::Index>(i)) = m[i];
          return cd(v);
        },
        axes, o);
    EXPECT_NEAR(total, 1.0, 1e-2);
  }
}

TEST(ConditionalDensity, NullConditioning) {
  // beta far away: P(b = 0) is astronomically small
  const DesignProblem pr = build_problem(MatrixXd::Identity(1, 1));
  const auto m = make_model(pr, vec({50}), 1.0);
  EXPECT_THROW(ConditionalDensity(pr, m, TuningVector::uniform(1, 0.5), SignVector({0})), NumericalError);
}

TEST(ConditionalDensity, MatchesHistogram) {
  Fig f;
  const SignVector d({0, 1});
  const ConditionalDensity cd(f.problem, f.model, f.tuning, d);
  // P(b1 = 0, u2 in [a, a + h]) against simulation
  DistributionOptions o = sampled(100000, 4);
  for (double a : {0.3, 0.6, 1.0}) {
    const double h = 0.1;
    const auto sim = prob_region_high(f.problem, f.model, f.tuning, [&](const VectorXd& b) {
      const double u2 = b(1) - f.model.beta(1);
      return std::abs(b(0)) <= 1e-9 && b(1) > 0 && u2 >= a && u2 <= a + h;
    }, o);
    double integral = 0;
    for (int k = 0; k < 20; ++k) integral += cd(vec({a + (k + 0.5) * h / 20})) * h / 20;
    integral *= cd.normalizer();
    EXPECT_LE(std::abs(integral - sim.estimate), 3 * sim.std_error + 1e-4);
  }
}

TEST(Cdf, LimitsAndMonotonicity) {
  Fig f;
  EXPECT_NEAR(cdf(f.problem, f.model, f.tuning, vec({50, 50})).estimate, 1.0, 1e-4);
  EXPECT_NEAR(cdf(f.problem, f.model, f.tuning, vec({-50, 0})).estimate, 0.0, 1e-6);
  const auto inf = std::numeric_limits<double>::infinity();
  EXPECT_NEAR(cdf(f.problem, f.model, f.tuning, vec({inf, inf})).estimate, 1.0, 1e-4);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ud(-2, 2);
  for (int k = 0; k < 8; ++k) {
    const VectorXd z = vec({ud(gen), ud(gen)});
    const VectorXd z2 = z + vec({std::abs(ud(gen)), std::abs(ud(gen))});
    EXPECT_LE(cdf(f.problem, f.model, f.tuning, z).estimate, cdf(f.problem, f.model, f.tuning, z2).estimate + 1e-6);
  }
}

TEST(Cdf, IncludesZeroAtomOnlyBelowThreshold) {
  // p = 1, beta = 0.4: u = -0.4 carries the atom P(b = 0)
  const DesignProblem pr = build_problem(MatrixXd::Identity(1, 1));
  const auto m = make_model(pr, vec({0.4}), 1.0);
  const TuningVector t = TuningVector::uniform(1, 0.5);
  const double atom = phi_cdf(0.5 - 0.4) - phi_cdf(-0.5 - 0.4);
  const double below = cdf(pr, m, t, vec({-0.41})).estimate;
  const double above = cdf(pr, m, t, vec({-0.39})).estimate;
  EXPECT_NEAR(above - below, atom, 1e-2);
  // exact: F(z) for z < -beta is P(y + lambda <= z + beta) = Phi(z - lambda)
  EXPECT_NEAR(below, phi_cdf(-0.41 - 0.5), 1e-7);
}

TEST(Cdf, AgreesWithSimulation) {
  Fig f;
  for (const VectorXd& z : {vec({0.3, -0.2}), vec({-0.5, 0.5}), vec({1, 1}), vec({0, 0.25}), vec({-1, -1})}) {
    expect_agree(cdf(f.problem, f.model, f.tuning, z), cdf(f.problem, f.model, f.tuning, z, sampled(40000)));
  }
}

TEST(Cdf, DimensionLimit) {
  const DesignProblem pr = build_problem(MatrixXd::Identity(5, 5));
  EXPECT_THROW(cdf(pr, make_model(pr, VectorXd::Zero(5), 1.0), TuningVector::uniform(5, 1.0), VectorXd::Zero(5)),
               LimitError);
}

TEST(AtomPlusContinuousParts, SumToOne) {
  Fig f;
  double total = prob_all_zero(f.problem, f.model, f.tuning).estimate;
  for (const SignVector& d : SignVector::enumerate(2)) {
    if (d.l1() == 0) continue;
    total += prob_sign_pattern(f.problem, f.model, f.tuning, d).estimate;
  }
  EXPECT_NEAR(total, 1.0, 5e-3);
}

TEST(RegionHigh, StructuralZero) {
  const DesignProblem pr = one_by_two();
  const auto m = make_model(pr, vec({1, 0}), 1.0);
  const TuningVector t = TuningVector::uniform(2, 1.0);
  auto b1_nonzero = [](const VectorXd& b) { return std::abs(b(0)) > 1e-9; };
  EXPECT_EQ(prob_region_high(pr, m, t, b1_nonzero).estimate, 0.0);
  EXPECT_EQ(prob_region_high(pr, m, t, b1_nonzero, sampled(20000)).estimate, 0.0);
  EXPECT_EQ(prob_region_high(pr, m, t, [](const VectorXd&) { return true; }).estimate, 1.0);
}

TEST(RegionHigh, MarginalOfSecondCoordinate) {
  const DesignProblem pr = one_by_two();
  const auto m = make_model(pr, vec({0, 0}), 1.0);
  for (double lam : {1.0, 2.0}) {
    for (double z : {-0.5, -1.2}) {
      const auto r = prob_region_high(pr, m, TuningVector::uniform(2, lam), [&](const VectorXd& b) { return b(1) <= z; });
      EXPECT_NEAR(r.estimate, phi_cdf(2 * z - lam / 2), 1e-9);
    }
  }
  EXPECT_NEAR(prob_region_high(pr, m, TuningVector::uniform(2, 1.0), [](const VectorXd& b) { return b(1) <= -0.5; })
                  .estimate,
              0.066807201268858, 1e-9);
}

TEST(RegionHigh, FiberInvariance) {
  const DesignProblem pr = one_by_two();
  const auto m1 = make_model(pr, vec({1, 0}), 1.0);
  const auto m2 = make_model(pr, vec({0, 0.5}), 1.0);
  ASSERT_TRUE(fiber_equivalent(m1, m2, pr));
  const TuningVector t = TuningVector::uniform(2, 1.5);
  auto region = [](const VectorXd& b) { return b(1) > 0.2; };
  EXPECT_EQ(prob_region_high(pr, m1, t, region, sampled(5000)).estimate, prob_region_high(pr, m2, t, region, sampled(5000)).estimate);
  EXPECT_EQ(prob_region_high(pr, m1, t, region).estimate, prob_region_high(pr, m2, t, region).estimate);
}

TEST(RegionHigh, RankTwoQuadratureMatchesSimulation) {
  MatrixXd x(2, 3);
  x << 1, 1, 0, 0, 1, 1;
  const DesignProblem pr = build_problem(x);
  const auto m = make_model(pr, vec({0.5, 0, -0.5}), 1.0);
  const TuningVector t = TuningVector::uniform(3, 0.8);
  auto region = [](const VectorXd& b) { return std::abs(b(1)) > 1e-9; };
  DistributionOptions q;
  q.quad_tol = 1e-4;
  const auto a = prob_region_high(pr, m, t, region, q);
  EXPECT_EQ(a.method, Method::Quadrature);
  expect_agree(a, prob_region_high(pr, m, t, region, sampled(40000)));
}

TEST(RegionHigh, HighRankFallsBackToSampling) {
  const DesignProblem pr = build_problem(MatrixXd::Identity(3, 3));
  const auto m = make_model(pr, VectorXd::Zero(3), 1.0);
  DistributionOptions o;
  o.samples = 2000;
  const auto r = prob_region_high(pr, m, TuningVector::uniform(3, 1.0), [](const VectorXd& b) { return b(0) > 0; }, o);
  EXPECT_EQ(r.method, Method::MonteCarlo);
  EXPECT_EQ(r.n_samples, 2000);
}

TEST(MonteCarlo, DeterministicAcrossWorkers) {
  Fig f;
  DistributionOptions a = sampled(3000, 77), b = sampled(3000, 77);
  a.workers = 1;
  b.workers = 4;
  const auto ra = prob_all_zero(f.problem, f.model, f.tuning, a);
  const auto rb = prob_all_zero(f.problem, f.model, f.tuning, b);
  EXPECT_EQ(ra.estimate, rb.estimate);
  EXPECT_NEAR(ra.std_error, std::sqrt(ra.estimate * (1 - ra.estimate) / 3000), 1e-15);
}
