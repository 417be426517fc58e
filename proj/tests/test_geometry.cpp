#include <gtest/gtest.h>

#include <random>

#include "lassodist/geometry.hpp"
#include "lassodist/monte_carlo.hpp"
#include "oracles.hpp"

using namespace lassodist;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

DesignProblem one_by_two() {
  MatrixXd x(1, 2);
  x << 1, 2;
  return build_problem(x);
}

DesignProblem two_by_three() {
  MatrixXd x(2, 3);
  x << 1, 1, 0, 0, 1, 1;
  return build_problem(x);
}

DesignProblem two_by_four() {
  MatrixXd x(2, 4);
  x << 1, 1, 2, 0, 0, 0, 1, 3;
  return build_problem(x);
}

MatrixXd gaussian(int n, int p, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = nd(gen);
  return x;
}

}  // namespace

TEST(FaceIntersection, Examples) {
  const DesignProblem pr = one_by_two();
  const TuningVector t = TuningVector::uniform(2, 1.0);
  EXPECT_FALSE(face_intersects_row_space(pr, FaceBox(t, {0}, {1})).has_value());
  const auto w = face_intersects_row_space(pr, FaceBox(t, {1}, {1}));
  ASSERT_TRUE(w.has_value());
  EXPECT_NEAR(w->z(0), 0.5, 1e-12);
  EXPECT_NEAR(w->v(0), 0.5, 1e-12);
  EXPECT_NEAR(w->v(1), 1.0, 1e-12);
}

TEST(FaceIntersection, FullRankMeetsEveryFace) {
  std::mt19937_64 gen(4);
  const DesignProblem pr = build_problem(gaussian(5, 3, gen));
  const TuningVector t(vec({0.5, 1, 2}));
  for (const SignVector& d : SignVector::enumerate(3)) {
    std::vector<int> s;
    for (int j : d.active()) s.push_back(d[j]);
    const auto w = face_intersects_row_space(pr, FaceBox(t, d.active(), s));
    ASSERT_TRUE(w.has_value());
    EXPECT_TRUE(FaceBox(t, d.active(), s).contains(w->v, 1e-8));
  }
}

TEST(FaceBox, NestingOnProbes) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> ud(-1.5, 1.5);
  const TuningVector t(vec({1, 0.5, 1, 0}));
  for (int k = 0; k < 2000; ++k) {
    VectorXd v(4);
    for (int j = 0; j < 4; ++j) v(j) = ud(gen);
    // snap some coordinates onto the box boundary so larger faces are hit
    for (int j = 0; j < 4; ++j) {
      if (gen() % 2) v(j) = (v(j) > 0 ? 1 : -1) * t[j];
    }
    for (const IndexSet& small : {IndexSet{}, IndexSet{0}, IndexSet{1, 3}}) {
      for (const IndexSet& large : {IndexSet{0, 1}, IndexSet{0, 1, 3}, IndexSet{0, 1, 2, 3}}) {
        if (!std::includes(large.begin(), large.end(), small.begin(), small.end())) continue;
        if (ModelFace(t, large).contains(v)) EXPECT_TRUE(ModelFace(t, small).contains(v));
      }
    }
  }
}

TEST(Selectable, Examples) {
  const DesignProblem pr = one_by_two();
  const TuningVector t = TuningVector::uniform(2, 1.0);
  EXPECT_FALSE(selectable(pr, t, {0}));
  EXPECT_TRUE(selectable(pr, t, {1}));
  EXPECT_TRUE(selectable(pr, t, {}));
  EXPECT_TRUE(selectable(two_by_three(), TuningVector::uniform(3, 1.0), {}));
}

TEST(Selectable, LimitAndValidation) {
  std::mt19937_64 gen(1);
  const DesignProblem pr = build_problem(gaussian(2, 32, gen));
  IndexSet all(31);
  for (int j = 0; j < 31; ++j) all[static_cast<std::size_t>(j)] = j;
  EXPECT_THROW(selectable(pr, TuningVector::uniform(32, 1.0), all), LimitError);
  EXPECT_THROW(selectable(one_by_two(), TuningVector::uniform(2, 1.0), {2}), InputError);
}

TEST(StructuralSet, Examples) {
  EXPECT_EQ(structural_set(two_by_three(), TuningVector::uniform(3, 1.0)), (IndexSet{0, 1, 2}));
  for (double lam : {0.3, 1.0, 5.0}) {
    EXPECT_EQ(structural_set(one_by_two(), TuningVector::uniform(2, lam)), (IndexSet{1}));
  }
  std::mt19937_64 gen(2);
  EXPECT_EQ(structural_set(build_problem(gaussian(4, 3, gen)), TuningVector(vec({0.2, 1, 3}))), (IndexSet{0, 1, 2}));
}

TEST(StructuralSet, ScaleInvariance) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> ud(0.2, 2.0);
  for (int k = 0; k < 25; ++k) {
    const int n = 1 + static_cast<int>(gen() % 3);
    const int p = 2 + static_cast<int>(gen() % 4);
    MatrixXd x = gaussian(n, p, gen);
    if (k % 2) x.col(0) = 3.0 * x.col(1);
    const DesignProblem pr = build_problem(x);
    VectorXd w(p);
    for (int j = 0; j < p; ++j) w(j) = ud(gen);
    const TuningVector base(w);
    const IndexSet s = structural_set(pr, base);
    const bool u = check_uniqueness(pr, base).unique;
    for (double f : {0.5, 2.0, 10.0}) {
      EXPECT_EQ(structural_set(pr, base.scaled(f)), s);
      EXPECT_EQ(check_uniqueness(pr, base.scaled(f)).unique, u);
    }
  }
}

// Coordinates outside the structural set stay at zero for random responses.
TEST(StructuralSet, SoundnessUnderSimulation) {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 4; ++k) {
    MatrixXd x = gaussian(2, 4, gen);
    x.col(3) = 0.3 * x.col(0) + 0.3 * x.col(1);  // a short column inside the hull
    const DesignProblem pr = build_problem(x);
    const TuningVector t = TuningVector::uniform(4, 1.0);
    const IndexSet s = structural_set(pr, t);
    std::vector<int> outside;
    for (int j = 0; j < 4; ++j) {
      if (!std::binary_search(s.begin(), s.end(), j)) outside.push_back(j);
    }
    for (int r = 0; r < 2500; ++r) {
      VectorXd y(2);
      y << 5 * nd(gen), 5 * nd(gen);
      const auto sol = solve(pr, y, t);
      for (int j : outside) EXPECT_LE(std::abs(sol.b(j)), 1e-9);
    }
  }
}

TEST(CheckUniqueness, Examples) {
  EXPECT_TRUE(check_uniqueness(one_by_two(), TuningVector::uniform(2, 1.0)).unique);
  EXPECT_TRUE(check_uniqueness(two_by_four(), TuningVector::uniform(4, 1.0)).unique);
  EXPECT_FALSE(general_position(two_by_four()));
  const auto v = check_uniqueness(one_by_two(), TuningVector(vec({1, 2})));
  ASSERT_FALSE(v.unique);
  ASSERT_TRUE(v.witness && v.violating_face);
  const auto& w = *v.witness;
  const TuningVector t(vec({1, 2}));
  EXPECT_TRUE(is_solution(one_by_two(), w.y, t, w.b, 1e-10).ok);
  EXPECT_TRUE(is_solution(one_by_two(), w.y, t, w.b_tilde, 1e-10).ok);
  EXPECT_GT((w.b - w.b_tilde).norm(), 1e-6);
  EXPECT_TRUE(std::abs(w.y(0)) > 1.0);
}

TEST(CheckUniqueness, LimitError) {
  std::mt19937_64 gen(3);
  EXPECT_THROW(check_uniqueness(build_problem(gaussian(2, 15, gen)), TuningVector::uniform(15, 1.0)), LimitError);
}

TEST(CheckUniqueness, ConsistentWithUniquenessAtY) {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> nd;
  int unique_cases = 0;
  for (int k = 0; k < 12; ++k) {
    const int n = 1 + static_cast<int>(gen() % 3);
    const int p = n + 1 + static_cast<int>(gen() % 2);
    const DesignProblem pr = build_problem(gaussian(n, p, gen));
    const TuningVector t = TuningVector::uniform(p, 1.0);
    const auto v = check_uniqueness(pr, t);
    if (!v.unique) continue;
    ++unique_cases;
    for (int r = 0; r < 1000; ++r) {
      VectorXd y(n);
      for (int i = 0; i < n; ++i) y(i) = 3 * nd(gen);
      EXPECT_TRUE(describe_solution_set(pr, y, t).is_unique_at_y);
    }
  }
  EXPECT_GT(unique_cases, 0);
}

TEST(Witness, OneByTwoExample) {
  const auto w = construct_nonuniqueness_witness(one_by_two(), TuningVector(vec({1, 2})), {0, 1}, vec({1, 2}), vec({1}));
  EXPECT_NEAR(w.y(0), 4.0, 1e-12);
  EXPECT_TRUE(is_solution(one_by_two(), w.y, TuningVector(vec({1, 2})), w.b, 1e-10).ok);
  EXPECT_TRUE(is_solution(one_by_two(), w.y, TuningVector(vec({1, 2})), w.b_tilde, 1e-10).ok);
  EXPECT_GT((w.b - w.b_tilde).norm(), 1e-6);
}

TEST(Witness, UnpenalizedZeroColumn) {
  MatrixXd x(2, 3);
  x << 1, 0, 2, 3, 0, 1;
  const DesignProblem pr = build_problem(x);
  const TuningVector t(vec({1, 0, 1}));
  const auto v = check_uniqueness(pr, t);
  ASSERT_FALSE(v.unique);
  const auto& w = *v.witness;
  EXPECT_TRUE(is_solution(pr, w.y, t, w.b, 1e-10).ok);
  EXPECT_TRUE(is_solution(pr, w.y, t, w.b_tilde, 1e-10).ok);
  EXPECT_GT((w.b - w.b_tilde).norm(), 1e-6);
}

TEST(Witness, RejectsSmallModel) {
  EXPECT_THROW(construct_nonuniqueness_witness(one_by_two(), TuningVector(vec({1, 2})), {1}, vec({0.5, 1}), vec({0.5})),
               InputError);
}

TEST(GeneralPosition, Examples) {
  EXPECT_FALSE(general_position(two_by_four()));
  EXPECT_TRUE(general_position(build_problem(MatrixXd::Identity(2, 2))));
  std::mt19937_64 gen(2024);
  const MatrixXd x = gaussian(3, 5, gen);
  EXPECT_TRUE(oracle::general_position(x));
  EXPECT_TRUE(general_position(build_problem(x)));
}

TEST(GeneralPosition, AgreesWithBruteForceAndImpliesUniqueness) {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> small(-2, 2);
  int gp_true = 0, gp_false = 0;
  for (int k = 0; k < 60; ++k) {
    const int n = 1 + static_cast<int>(gen() % 3);
    const int p = 2 + static_cast<int>(gen() % 4);
    MatrixXd x(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) x(i, j) = small(gen);
    const DesignProblem pr = build_problem(x);
    const bool gp = general_position(pr);
    EXPECT_EQ(gp, oracle::general_position(x)) << x;
    (gp ? gp_true : gp_false)++;
    if (gp) EXPECT_TRUE(check_uniqueness(pr, TuningVector::uniform(p, 1.0)).unique) << x;
  }
  EXPECT_GT(gp_true, 0);
  EXPECT_GT(gp_false, 0);
}

TEST(Shrinkage, HighExamples) {
  const DesignProblem pr = one_by_two();
  const auto s = shrinkage_set_high(pr, TuningVector::uniform(2, 1.0), vec({0, 0}));
  for (double y : {-0.6, -0.5, 0.0, 0.3, 0.5, 0.51}) {
    EXPECT_EQ(s.contains(pr.x().transpose() * vec({y})), std::abs(y) <= 0.5) << y;
  }
  const auto s2 = shrinkage_set_high(pr, TuningVector(vec({1, 2})), vec({-1, 0}));
  EXPECT_TRUE(s2.contains(pr.x().transpose() * vec({-2})));
}

TEST(Shrinkage, ParallelogramAtZero) {
  const DesignProblem pr = design_from_gram((MatrixXd(2, 2) << 1, 0.5, 0.5, 1).finished());
  const TuningVector t = TuningVector::uniform(2, 0.75);
  const auto s = shrinkage_set_low(pr, t, vec({0, 0}));
  EXPECT_TRUE(s.contains_ls(vec({0, 0})));
  EXPECT_TRUE(s.contains_ls(vec({1, -1})));     // G z = (0.5, -0.5)
  EXPECT_FALSE(s.contains_ls(vec({1, 1})));     // G z = (1.5, 1.5)
  EXPECT_TRUE(s.contains_ls(vec({0.5, 0.5})));  // corner direction, (0.75, 0.75)
  EXPECT_THROW(shrinkage_set_low(one_by_two(), t, vec({0, 0})), PreconditionError);
}

TEST(Shrinkage, SingletonSign) {
  const DesignProblem pr = design_from_gram((MatrixXd(2, 2) << 1, 0.5, 0.5, 1).finished());
  const TuningVector t = TuningVector::uniform(2, 0.75);
  const VectorXd b = vec({1, -2});
  const VectorXd z = singleton_ls_point(pr, t, b);
  // z is mapped back onto b, and b = z + G^{-1} lambda~ with lambda~ = -sgn(b) lambda
  EXPECT_LE((map_ls_to_lasso(pr, t, z).b - b).cwiseAbs().maxCoeff(), 1e-9);
  const VectorXd lt = vec({-0.75, 0.75});
  EXPECT_LE((b - (z + pr.gram().ldlt().solve(lt))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MapLsToLasso, Examples) {
  const DesignProblem pr = design_from_gram((MatrixXd(2, 2) << 1, 0.5, 0.5, 1).finished());
  const TuningVector t = TuningVector::uniform(2, 0.75);
  EXPECT_EQ(map_ls_to_lasso(pr, t, vec({0, 0})).b, vec({0, 0}));
  EXPECT_LE(map_ls_to_lasso(pr, t, vec({0.1, -0.1})).b.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(map_ls_to_lasso(one_by_two(), t, vec({0, 0})), PreconditionError);
}

TEST(Shrinkage, LowDimensionalDisjointness) {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 200; ++k) {
    const int p = 2 + static_cast<int>(gen() % 2);
    const DesignProblem pr = build_problem(gaussian(p + 2, p, gen));
    const TuningVector t = TuningVector::uniform(p, 0.5 + std::abs(nd(gen)));
    VectorXd z(p);
    for (int j = 0; j < p; ++j) z(j) = 2 * nd(gen);
    const VectorXd b = map_ls_to_lasso(pr, t, z).b;
    // any other b' generated by perturbing b misses z
    VectorXd b2 = b;
    b2(static_cast<Eigen::Index>(gen() % static_cast<unsigned>(p))) += 0.1 + std::abs(nd(gen));
    EXPECT_TRUE(shrinkage_set_low(pr, t, b).contains_ls(z, 1e-8));
    EXPECT_FALSE(shrinkage_set_low(pr, t, b2).contains_ls(z, 1e-8));
  }
}
