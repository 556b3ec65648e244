#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "desk1_fixture.hpp"
#include "relq/riccati.hpp"
#include "test_support.hpp"

using relq::Matrix;
using relq::Vector;

namespace {

Matrix scalar(double x) { return Matrix::Constant(1, 1, x); }

}  // namespace

TEST(Dare, ZeroDynamicsScalar) {
    const auto sol = relq::solve_dare(scalar(0.0), scalar(1.0), scalar(2.5), 1.0, 0.9);
    EXPECT_NEAR(sol.P(0, 0), 2.5, 1e-12);
    EXPECT_NEAR(sol.F(0, 0), 0.0, 1e-12);
}

TEST(Dare, ZeroDynamicsUncontrollableForLargerStates) {
    // A = 0 with d >= 2 leaves [B, AB, ...] with rank 1.
    EXPECT_THROW(relq::solve_dare(Matrix::Zero(2, 2), Matrix::Ones(2, 1), Matrix::Identity(2, 2), 1.0, 0.9),
                 relq::ControllabilityError);
}

TEST(Dare, MinimalVolatilityScalarClosedForm) {
    // nonzero root of P = a^2 P - a^2 P^2 / (1 + P): P = a^2 - 1
    const auto sol = relq::solve_dare(scalar(2.0), scalar(1.0), scalar(0.0), 1.0, 1.0);
    EXPECT_NEAR(sol.P(0, 0), 3.0, 1e-10);
    EXPECT_NEAR(sol.F(0, 0), 1.5, 1e-10);
    EXPECT_NEAR(sol.closed_loop_eigenvalues(0).real(), 0.5, 1e-10);
}

TEST(Dare, ScalarQuadraticFormula) {
    // a = 0.9, b = q = rho = beta = 1: P^2 - (a^2 + q - 1) P - q = 0 -> P^2 - 0.81 P - 1 = 0
    const double a = 0.9;
    const double P = 0.5 * ((a * a) + std::sqrt(a * a * a * a + 4.0));
    const auto sol = relq::solve_dare(scalar(a), scalar(1.0), scalar(1.0), 1.0, 1.0);
    EXPECT_NEAR(sol.P(0, 0), P, 1e-10);
    EXPECT_NEAR(sol.F(0, 0), P * a / (1.0 + P), 1e-10);
    const Matrix vi = testsupport::value_iteration(scalar(a), scalar(1.0), scalar(1.0), 1.0, 1.0);
    EXPECT_NEAR(vi(0, 0), P, 1e-10);
}

TEST(Dare, Desk1MatchesFrozenOracle) {
    const auto m = desk1::model();
    const auto sol = relq::solve_dare(m.A, m.B, m.Q, m.rho, m.beta);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(sol.P(i, j), desk1::kP[i][j], 1e-9);
        EXPECT_NEAR(sol.F(0, i), desk1::kF[i], 1e-9);
        EXPECT_NEAR(std::abs(sol.closed_loop_eigenvalues(i)), desk1::kClosedModuli[i], 1e-9);
    }
}

TEST(Dare, Uncontrollable) {
    Matrix A(2, 2), B(2, 1);
    A << 0.5, 0, 0, 1.5;
    B << 1, 0;
    EXPECT_THROW(relq::solve_dare(A, B, Matrix::Identity(2, 2), 1.0, 0.99), relq::ControllabilityError);
}

TEST(Dare, IterationCapRaisesDivergence) {
    relq::Tolerances tol;
    tol.riccati_max_iter = 2;
    const auto m = desk1::model();
    EXPECT_THROW(relq::solve_dare(m.A, m.B, m.Q, m.rho, m.beta, tol), relq::DivergenceError);
}

TEST(Loss, QuadraticForm) {
    relq::RiccatiSolution sol;
    sol.P = Matrix::Identity(2, 2);
    EXPECT_EQ(relq::loss_of_state(sol, Vector::Zero(2)), 0.0);
    Vector y(2);
    y << 3, 4;
    EXPECT_EQ(relq::loss_of_state(sol, y), 25.0);
}

TEST(Loss, MatchesTruncatedSimulation) {
    const auto m = desk1::model();
    const auto sol = relq::solve_dare(m.A, m.B, m.Q, m.rho, m.beta);
    Vector y(2);
    y << 1.0, desk1::kQ0Map;
    const Matrix Acl = m.A - m.B * sol.F;
    double loss = 0.0, disc = 1.0;
    Vector x = y;
    for (int t = 0; t < 2000; ++t) {
        const double r = -(sol.F * x)(0);
        loss += disc * (x.dot(m.Q * x) + m.rho * r * r);
        disc *= m.beta;
        x = Acl * x;
    }
    EXPECT_NEAR(relq::loss_of_state(sol, y), loss, 1e-6);
}

class DareProperty : public ::testing::TestWithParam<int> {};

TEST_P(DareProperty, FixedPointGainMonotonicityScaling) {
    std::mt19937_64 rng(1000 + GetParam());
    const double betas[] = {0.9, 0.99, 1.0};
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 1 + (trial + GetParam()) % 5;
        const double beta = betas[trial % 3];
        Matrix A, B;
        testsupport::random_controllable(rng, d, A, B, 1.2);
        const Matrix Q = trial % 4 == 0 ? Matrix::Zero(d, d) : testsupport::random_spd(rng, d);
        const double rho = 0.5 + trial * 0.1;
        const auto sol = relq::solve_dare(A, B, Q, rho, beta);
        const double scale = 1.0 + sol.P.cwiseAbs().maxCoeff();

        EXPECT_LT(relq::riccati_residual(sol.P, A, B, Q, rho, beta), 1e-9 * scale);
        EXPECT_LT((sol.P - sol.P.transpose()).cwiseAbs().maxCoeff(), 1e-10);
        Eigen::SelfAdjointEigenSolver<Matrix> es(sol.P);
        EXPECT_GT(es.eigenvalues().minCoeff(), -1e-8);
        for (Eigen::Index i = 0; i < d; ++i) {
            EXPECT_LT(std::abs(sol.closed_loop_eigenvalues(i)), 1.0 / std::sqrt(beta) - 1e-10);
        }
        EXPECT_LT((sol.F - testsupport::oracle_gain(sol.P, A, B, rho, beta)).cwiseAbs().maxCoeff(), 1e-10);

        // sqrt(beta) scaling
        const double sb = std::sqrt(beta);
        const auto undiscounted = relq::solve_dare(sb * A, sb * B, Q, rho, 1.0);
        EXPECT_LT((undiscounted.P - sol.P).cwiseAbs().maxCoeff(), 1e-9 * scale);

        // larger Q never lowers P
        const auto bigger = relq::solve_dare(A, B, Q + 1e-3 * Matrix::Identity(d, d), rho, beta);
        Eigen::SelfAdjointEigenSolver<Matrix> diff(bigger.P - sol.P);
        EXPECT_GT(diff.eigenvalues().minCoeff(), -1e-9 * scale);
    }
}

INSTANTIATE_TEST_SUITE_P(Random, DareProperty, ::testing::Range(0, 5));
