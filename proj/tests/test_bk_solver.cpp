#include <gtest/gtest.h>

#include <random>

#include "desk1_fixture.hpp"
#include "relq/analysis.hpp"
#include "relq/bk_solver.hpp"
#include "test_support.hpp"

using relq::Matrix;
using relq::PolicyRule;
using relq::RowVector;
using relq::Vector;

namespace {

relq::ModelSpec diag_model(double a, double b) {
    Matrix A = Matrix::Zero(2, 2);
    A(0, 0) = a;
    A(1, 1) = b;
    return testsupport::make_model(1, 1, 1.0, 1.0, A, Matrix::Zero(2, 1), Matrix::Identity(2, 2));
}

PolicyRule rule2(double fn, double fm) {
    RowVector F(2);
    F << fn, fm;
    return PolicyRule::from_full(F, 1);
}

// X = M^{-1} diag(lam) M, so the rows of M are left eigenvectors.
Matrix from_left_eigenvectors(const Matrix& M, const Vector& lam) { return M.inverse() * lam.asDiagonal() * M; }

}  // namespace

TEST(Classify, CasesByStableCount) {
    EXPECT_EQ(relq::classify_bk(diag_model(0.5, 2.0), PolicyRule::zero(1, 1)).label, relq::BKCase::unique);
    EXPECT_EQ(relq::classify_bk(diag_model(1.5, 2.0), PolicyRule::zero(1, 1)).label, relq::BKCase::no_equilibrium);
    const auto over = relq::enumerate_equilibria(diag_model(0.3, 0.6), PolicyRule::zero(1, 1));
    EXPECT_EQ(over.case_label, relq::BKCase::multiple);
    EXPECT_EQ(over.count_formula, 2);
    EXPECT_EQ(over.upper_bound, 2);
}

TEST(Classify, Binomial) {
    EXPECT_EQ(relq::binomial(4, 2), 6);
    EXPECT_EQ(relq::binomial(5, 0), 1);
    EXPECT_EQ(relq::binomial(2, 3), 0);
    EXPECT_EQ(relq::binomial(10, 3), 120);
}

TEST(BuildN, BlockDiagonalGivesZero) {
    const auto m = diag_model(0.5, 2.0);
    const auto split = relq::spectral_split(m.A, m.beta);
    const auto sol = relq::build_N(split, {0}, 1);
    EXPECT_EQ(sol.N(0, 0), 0.0);
}

TEST(BuildN, Desk1OpenLoopStaysOnManifold) {
    const auto m = desk1::model();
    const auto set = relq::enumerate_equilibria(m, PolicyRule::zero(1, 1));
    ASSERT_EQ(set.case_label, relq::BKCase::unique);
    ASSERT_EQ(set.solutions.size(), 1u);
    const Matrix N = set.solutions[0].N;
    EXPECT_NEAR(N(0, 0), desk1::kNOpenLoop, 1e-12);

    // every step of the saddle-path simulation must satisfy both model rows
    const auto tr = relq::simulate(m, relq::bk_law(m, PolicyRule::zero(1, 1), N), Vector::Ones(1), 100);
    EXPECT_LT(tr.law_residual, 1e-8);
    EXPECT_LT((tr.q + tr.k * N.transpose()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BuildN, ThreeStateHandEigenvectors) {
    // left eigenvectors [1,0,0], [0.2,1,0], [0.3,0.5,1]; keep the first root.
    Matrix M(3, 3);
    M << 1, 0, 0, 0.2, 1, 0, 0.3, 0.5, 1;
    Vector lam(3);
    lam << 0.5, 1.5, 2.0;
    const Matrix X = from_left_eigenvectors(M, lam);
    const auto split = relq::spectral_split(X, 1.0);
    const auto sol = relq::build_N(split, {0}, 1);
    // N = M_mm^{-1} M_mn = [0.2, 0.3 - 0.5 * 0.2]
    EXPECT_NEAR(sol.N(0, 0), 0.2, 1e-12);
    EXPECT_NEAR(sol.N(1, 0), 0.2, 1e-12);
    EXPECT_LT(sol.manifold_residual, 1e-12);
}

TEST(BuildN, ConjugatePairSplitRejected) {
    // eigenvalues 0.2 +- 0.3i and 0.8, all stable, n = 1
    Matrix X(3, 3);
    X << 0.2, -0.3, 0.1, 0.3, 0.2, 0.4, 0, 0, 0.8;
    const auto m = testsupport::make_model(1, 2, 1.0, 1.0, X, Matrix::Zero(3, 1), Matrix::Identity(3, 3));
    const auto set = relq::enumerate_equilibria(m, PolicyRule::zero(1, 2));
    EXPECT_EQ(set.count_formula, 3);
    EXPECT_EQ(set.upper_bound, 3);
    EXPECT_EQ(set.solutions.size() + set.rejected.size(), 3u);
    ASSERT_EQ(set.solutions.size(), 1u);
    EXPECT_EQ(set.solutions[0].chosen_subset, std::vector<int>{2});
    for (const auto& r : set.rejected) EXPECT_NE(r.reason.find("conjugate"), std::string::npos) << r.reason;
    EXPECT_THROW(relq::build_N(set.split, {0}, 1), relq::SubsetRejected);
}

TEST(Enumerate, UniqueCaseHasOneSubset) {
    const auto set = relq::enumerate_equilibria(diag_model(0.5, 2.0), PolicyRule::zero(1, 1));
    EXPECT_EQ(set.count_formula, 1);
    EXPECT_EQ(set.solutions.size(), 1u);
}

TEST(Enumerate, HandBuiltSlopes) {
    Matrix M(2, 2);
    M << 1, 0.4, 0.7, 1;
    Vector lam(2);
    lam << 0.2, 0.5;
    const Matrix X = from_left_eigenvectors(M, lam);
    const auto m = testsupport::make_model(1, 1, 1.0, 1.0, X, Matrix::Zero(2, 1), Matrix::Identity(2, 2));
    const auto set = relq::enumerate_equilibria(m, PolicyRule::zero(1, 1));
    ASSERT_EQ(set.solutions.size(), 2u);
    // keep 0.2: N from the row of 0.5; keep 0.5: N from the row of 0.2
    EXPECT_NEAR(set.solutions[0].N(0, 0), 0.7, 1e-8);
    EXPECT_NEAR(set.solutions[1].N(0, 0), 2.5, 1e-8);
    EXPECT_TRUE(set.distinct_solutions);
}

TEST(Enumerate, Desk1OverStableRule) {
    const auto set = relq::enumerate_equilibria(desk1::model(), rule2(3.0, 0.0));
    EXPECT_EQ(set.case_label, relq::BKCase::multiple);
    ASSERT_EQ(set.solutions.size(), 2u);
    EXPECT_NEAR(std::abs(set.split.eigenvalues(0)), 0.6, 1e-12);
    EXPECT_NEAR(set.solutions[0].N(0, 0), desk1::kNKeep06, 1e-8);
    EXPECT_NEAR(set.solutions[1].N(0, 0), desk1::kNKeep08, 1e-8);
}

TEST(Enumerate, RequiresRestrictedRule) {
    EXPECT_THROW(relq::enumerate_equilibria(desk1::model(), rule2(0.0, 1.0)), relq::UsageError);
}

TEST(Enumerate, Desk1UnderAugmentedRule) {
    const auto cls = relq::classify_bk(desk1::model(), rule2(0.0, 1.0));
    EXPECT_EQ(cls.label, relq::BKCase::unique);
    EXPECT_NEAR(cls.split.eigenvalues(0).real(), desk1::kRule01Eigs[0], 1e-12);
    EXPECT_NEAR(cls.split.eigenvalues(1).real(), desk1::kRule01Eigs[1], 1e-12);
    const auto set = relq::enumerate_split(desk1::model(), cls.split);
    ASSERT_EQ(set.solutions.size(), 1u);
    EXPECT_NEAR(set.solutions[0].N(0, 0), desk1::kNRule01, 1e-12);
}

TEST(QuasiOptimal, Desk1MatchesOracle) {
    const auto qo = relq::solve_quasi_optimal(desk1::model(), Matrix::Constant(1, 1, desk1::kNOpenLoop));
    EXPECT_NEAR(qo.A_reduced(0, 0), desk1::kAReduced, 1e-12);
    EXPECT_NEAR(qo.Q_reduced(0, 0), desk1::kQReduced, 1e-12);
    EXPECT_NEAR(qo.reduced.P(0, 0), desk1::kPReduced, 1e-9);
    EXPECT_NEAR(qo.reduced.F(0, 0), desk1::kFReduced, 1e-9);
    EXPECT_EQ(qo.rule.F_m(0), 0.0);
    EXPECT_EQ(qo.rule.kind, relq::RuleKind::quasi_optimal);
    // no multipliers for q: the reduced problem lives on k alone
    EXPECT_EQ(qo.reduced.P.rows(), 1);
}

TEST(QuasiOptimal, ZeroNWithoutCouplingIsStandaloneLqr) {
    std::mt19937_64 rng(3);
    const Matrix Ann = testsupport::uniform(rng, 2, 2, -1, 1);
    Matrix A = Matrix::Zero(3, 3);
    A.topLeftCorner(2, 2) = Ann;
    A(2, 2) = 1.7;
    A(2, 0) = 0.3;
    Matrix B(3, 1);
    B << 1.0, 0.5, 0.2;
    const Matrix Q = testsupport::random_spd(rng, 3);
    const auto m = testsupport::make_model(2, 1, 0.95, 1.3, A, B, Q);
    const auto qo = relq::solve_quasi_optimal(m, Matrix::Zero(1, 2));
    const Matrix P = testsupport::value_iteration(Ann, B.topRows(2), Q.topLeftCorner(2, 2), 1.3, 0.95);
    EXPECT_LT((qo.reduced.P - P).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(QuasiOptimal, ZeroWeightsGiveZeroRule) {
    auto m = desk1::model();
    m.Q.setZero();
    const auto qo = relq::solve_quasi_optimal(m, Matrix::Constant(1, 1, desk1::kNOpenLoop));
    EXPECT_NEAR(qo.reduced.F(0, 0), 0.0, 1e-12);
    EXPECT_NEAR(qo.reduced.closed_loop_eigenvalues(0).real(), desk1::kAReduced, 1e-12);
}

TEST(Equivalence, Arithmetic) {
    const Matrix N = Matrix::Constant(1, 1, 0.3);
    EXPECT_NEAR(relq::observational_equivalence(rule2(0.5, 0.2), N).F_n(0), 0.44, 1e-15);
    const auto same = relq::observational_equivalence(rule2(0.7, 0.0), N);
    EXPECT_EQ(same.F_n(0), 0.7);
    EXPECT_EQ(same.F_m(0), 0.0);
    const auto r = relq::observational_equivalence(rule2(0.0, 1.0), N);
    EXPECT_NEAR(r.F_n(0), -0.3, 1e-15);
    EXPECT_EQ(r.F_m(0), 0.0);
}

TEST(Equivalence, Desk1PathsCoincide) {
    const auto m = desk1::model();
    const auto rule = rule2(0.0, 1.0);
    const Matrix N = Matrix::Constant(1, 1, desk1::kNRule01);
    const auto a = relq::simulate(m, relq::bk_law(m, rule, N), Vector::Ones(1), 200);
    const auto b = relq::simulate(m, relq::bk_law(m, relq::observational_equivalence(rule, N), N), Vector::Ones(1), 200);
    EXPECT_LT((a.r - b.r).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(a.law_residual, 1e-10);
}

class BkProperty : public ::testing::TestWithParam<int> {};

TEST_P(BkProperty, ManifoldReducedSystemAndMoments) {
    std::mt19937_64 rng(500 + GetParam());
    const int n = 1 + GetParam() % 3, m = 1 + (GetParam() / 3) % 2;
    const auto model = testsupport::random_saddle_model(rng, n, m);
    const auto set = relq::enumerate_equilibria(model, PolicyRule::zero(n, m));
    ASSERT_EQ(set.case_label, relq::BKCase::unique);
    ASSERT_EQ(set.solutions.size(), 1u);
    const auto& sol = set.solutions[0];
    EXPECT_LT(sol.manifold_residual, 1e-8);

    const auto qo = relq::solve_quasi_optimal(model, sol.N);
    EXPECT_LT((qo.Q_reduced - qo.Q_reduced.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(qo.Q_reduced);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
    EXPECT_EQ(qo.reduced.P.rows(), n);

    // reduced recursion lifted by q = -N k equals the saddle-path simulation
    const Vector k0 = Vector::Ones(n);
    const auto tr = relq::simulate(model, relq::bk_law(model, qo.rule, sol.N), k0, 60);
    Vector k = k0;
    const Matrix Ared = qo.A_reduced - model.B_n() * qo.reduced.F;
    for (int t = 0; t < tr.horizon; ++t) {
        EXPECT_LT((tr.k.row(t).transpose() - k).cwiseAbs().maxCoeff(), 1e-8 * (1 + k.norm()));
        EXPECT_LT((tr.q.row(t).transpose() + sol.N * k).cwiseAbs().maxCoeff(), 1e-8 * (1 + k.norm()));
        k = (Ared * k).eval();
    }

    // q = -N k exactly, so the cross moment is -S N'
    const auto zero_rule = relq::simulate(model, relq::bk_law(model, PolicyRule::zero(n, m), sol.N), k0, 200);
    const Matrix S = zero_rule.k.transpose() * zero_rule.k / 200.0;
    EXPECT_LT((relq::cross_moment(zero_rule) + S * sol.N.transpose()).cwiseAbs().maxCoeff(), 1e-10);

    // non-identification on the manifold
    Matrix X(zero_rule.horizon, n + m);
    X << zero_rule.k, zero_rule.q;
    EXPECT_EQ(relq::numerical_rank(X, relq::Tolerances{}), n);
}

INSTANTIATE_TEST_SUITE_P(Random, BkProperty, ::testing::Range(0, 12));
