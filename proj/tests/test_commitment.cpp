#include <gtest/gtest.h>

#include <random>

#include "desk1_fixture.hpp"
#include "relq/analysis.hpp"
#include "relq/commitment.hpp"
#include "test_support.hpp"

using relq::CVector;
using relq::Matrix;
using relq::RowVector;
using relq::Vector;

namespace {

const relq::CommitmentSolution& desk1_solution() {
    static const relq::CommitmentSolution sol = relq::solve_commitment(desk1::model());
    return sol;
}

// max_t |r_t - (psi_r r_t-1 + psi_k0 k_t + psi_k1 k_t-1)| along x_t+1 = T x_t
double replay_residual(const relq::CommitmentSolution& sol, const relq::HistoryRule& h, const Vector& x0, int T) {
    Vector x = x0;
    double r_prev = sol.Phi.dot(x);
    Vector k_prev = x.head(sol.n);
    double worst = 0.0;
    for (int t = 1; t < T; ++t) {
        x = (sol.T_closed * x).eval();
        const double r = sol.Phi.dot(x);
        const Vector k = x.head(sol.n);
        const double pred = h.psi_r * r_prev + h.psi_k0.dot(k) + h.psi_k1.dot(k_prev);
        worst = std::max(worst, std::abs(r - pred));
        r_prev = r;
        k_prev = k;
    }
    return worst;
}

}  // namespace

TEST(Commitment, DecoupledModelRefused) {
    const auto m = relq::load_model(desk1::kFixtureDir + "/decoupled.json");
    EXPECT_THROW(relq::solve_commitment(m), relq::ControllabilityError);
}

TEST(Commitment, Desk1MatchesFrozenOracle) {
    const auto& sol = desk1_solution();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            EXPECT_NEAR(sol.P(i, j), desk1::kP[i][j], 1e-9);
            EXPECT_NEAR(sol.T_closed(i, j), desk1::kTClosed[i][j], 1e-9);
        }
        EXPECT_NEAR(sol.F(i), desk1::kF[i], 1e-9);
        EXPECT_NEAR(sol.Phi(i), desk1::kPhi[i], 1e-9);
    }
    EXPECT_NEAR(sol.q0_map(0, 0), desk1::kQ0Map, 1e-10);
    const Vector x0 = sol.initial_state(Vector::Constant(1, 2.0));
    EXPECT_EQ(x0(1), 0.0);
    EXPECT_NEAR(sol.q_of(x0)(0), 2.0 * desk1::kQ0Map, 1e-10);
    EXPECT_EQ(sol.as_if_rule().kind, relq::RuleKind::commitment_as_if);
}

TEST(Commitment, FocAndMultipliersAlongPath) {
    const auto m = desk1::model();
    const auto& sol = desk1_solution();
    const auto foc = relq::foc_residuals(sol, m, sol.initial_state(Vector::Constant(1, -3.0)), 500);
    EXPECT_LT(foc.rate, 1e-8);
    EXPECT_LT(foc.costate, 1e-8);
    EXPECT_LT(sol.foc_rate_residual, 1e-8);
    EXPECT_LT(sol.foc_costate_residual, 1e-8);
}

TEST(Commitment, SpectrumOfTransformedLoop) {
    const auto& sol = desk1_solution();
    const auto a = testsupport::moduli(sol.T_closed);
    EXPECT_NEAR(a[0], desk1::kClosedModuli[0], 1e-8);
    EXPECT_NEAR(a[1], desk1::kClosedModuli[1], 1e-8);
    EXPECT_LT(a[1], 1.0 / std::sqrt(0.99));
    EXPECT_LT(sol.similarity_residual, 1e-8);
}

TEST(Commitment, InitialConditionIsLinearInK0) {
    std::mt19937_64 rng(77);
    const auto m = testsupport::random_saddle_model(rng, 2, 1);
    const auto sol = relq::solve_commitment(m);
    for (int i = 0; i < 100; ++i) {
        const Vector a = testsupport::uniform(rng, 2, 1, -2, 2), b = testsupport::uniform(rng, 2, 1, -2, 2);
        const Vector qa = sol.q_of(sol.initial_state(a)), qb = sol.q_of(sol.initial_state(b));
        const Vector qab = sol.q_of(sol.initial_state(1.5 * a - b));
        EXPECT_LT((qab - (1.5 * qa - qb)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_EQ(qa, sol.q_of(sol.initial_state(a)));
    }
}

TEST(History, Desk1Coefficients) {
    const auto& sol = desk1_solution();
    const auto h = relq::build_history_rule(sol);
    EXPECT_NEAR(h.psi_r, desk1::kPsiR, 1e-9);
    EXPECT_NEAR(h.psi_k0(0), desk1::kPsiK0, 1e-9);
    EXPECT_NEAR(h.psi_k1(0), desk1::kPsiK1, 1e-9);
    EXPECT_EQ(h.parameter_count, 3);
    EXPECT_EQ(h.state_count, 2);
    EXPECT_FALSE(h.identified);
    EXPECT_LT(replay_residual(sol, h, sol.initial_state(Vector::Ones(1)), 500), 1e-10);
}

TEST(History, DegenerateZeroFeedback) {
    relq::CommitmentSolution sol;
    sol.n = 1;
    sol.m = 1;
    sol.Phi.resize(2);
    sol.Phi << 0.0, -0.4;
    sol.T_closed.resize(2, 2);
    sol.T_closed << 0.6, 0.1, 0.3, 0.0;
    const auto h = relq::build_history_rule(sol);
    EXPECT_EQ(h.psi_r, 0.0);
    Vector x0(2);
    x0 << 1.0, 0.5;
    EXPECT_LT(replay_residual(sol, h, x0, 200), 1e-14);
}

TEST(History, RefusedForSeveralMultipliers) {
    std::mt19937_64 rng(4);
    const auto sol = relq::solve_commitment(testsupport::random_saddle_model(rng, 1, 2));
    EXPECT_THROW(relq::build_history_rule(sol), relq::RefusalError);
}

TEST(Placement, IdentityAndScalar) {
    const auto m = desk1::model();
    const auto F0 = relq::identify_rule_from_spectrum(m.A, m.B, relq::sorted_eigenvalues(m.A));
    EXPECT_LT(F0.cwiseAbs().maxCoeff(), 1e-10);
    CVector target(1);
    target << 0.5;
    const auto F = relq::identify_rule_from_spectrum(Matrix::Constant(1, 1, 2.0), Matrix::Ones(1, 1), target);
    EXPECT_NEAR(F(0), 1.5, 1e-14);
}

TEST(Placement, Desk1RoundTrip) {
    const auto m = desk1::model();
    const auto& sol = desk1_solution();
    const auto F = relq::identify_rule_from_spectrum(m.A, m.B, sol.closed_loop_eigenvalues);
    EXPECT_LT((F - sol.F).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Placement, RefusesUncontrollableAndRepeatedTargets) {
    const auto m = relq::load_model(desk1::kFixtureDir + "/decoupled.json");
    CVector t(2);
    t << 0.1, 0.2;
    EXPECT_THROW(relq::identify_rule_from_spectrum(m.A, m.B, t), relq::ControllabilityError);
    t << 0.3, 0.3;
    EXPECT_THROW(relq::identify_rule_from_spectrum(desk1::model().A, desk1::model().B, t), relq::RefusalError);
}

TEST(PlacementProperty, AgreesWithAckermannAndIsInjective) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    for (int trial = 0; trial < 40; ++trial) {
        const int d = 1 + trial % 4;
        Matrix A, B;
        testsupport::random_controllable(rng, d, A, B);
        CVector t(d), s(d);
        for (int i = 0; i < d; ++i) t(i) = 0.9 * (i + 1) / (d + 1) * (trial % 2 ? 1.0 : -1.0);
        const bool pair = d >= 2 && trial % 3 == 0;
        if (pair) t(0) = {0.3, 0.4}, t(1) = {0.3, -0.4};
        s = t;
        if (pair) {
            s(0) += 1e-3;
            s(1) += 1e-3;
        } else {
            s(d - 1) += 1e-3;
        }
        const auto F = relq::identify_rule_from_spectrum(A, B, t);
        const auto G = relq::identify_rule_from_spectrum(A, B, s);
        const RowVector ack = testsupport::ackermann(A, B, t);
        EXPECT_LT((F - ack).cwiseAbs().maxCoeff(), 1e-6 * (1 + ack.cwiseAbs().maxCoeff())) << "trial " << trial;
        EXPECT_GT((F - G).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Probe, ResetAtStartIsNoOp) {
    const auto& sol = desk1_solution();
    const auto p = relq::time_inconsistency_probe(sol, desk1::model(), 0, Vector::Ones(1));
    EXPECT_EQ(p.q_jump(0), 0.0);
    EXPECT_EQ(p.continuation_loss, p.reset_loss);
    EXPECT_TRUE(p.committed_bounded);
}

TEST(Probe, Desk1ResetAtFive) {
    const auto& sol = desk1_solution();
    const auto p = relq::time_inconsistency_probe(sol, desk1::model(), 5, Vector::Ones(1));
    EXPECT_GT(std::abs(p.q_jump(0)), 1e-6);
    EXPECT_NE(p.mu_q_at_reset(0), 0.0);
    EXPECT_TRUE(p.committed_bounded);
    EXPECT_TRUE(p.reset_bounded);
    EXPECT_TRUE(p.repeated_reset_bounded);
    // re-optimizing q lowers the loss from the reset date on
    EXPECT_LT(p.reset_loss, p.continuation_loss);
}

TEST(Bellman, LossAdditivityAndValue) {
    const auto m = desk1::model();
    const auto& sol = desk1_solution();
    const Vector x0 = sol.initial_state(Vector::Ones(1));
    const double v0 = relq::loss_of_state(sol.riccati, sol.to_y(x0));
    for (int T : {1, 10, 50, 200}) {
        const auto tr = relq::simulate(m, relq::commitment_law(m, sol), x0, T);
        const double tail = std::pow(m.beta, T) * relq::loss_of_state(sol.riccati, tr.terminal_state);
        EXPECT_NEAR(tr.discounted_loss + tail, v0, 1e-8) << "T = " << T;
    }
    const auto tr = relq::simulate(m, relq::commitment_law(m, sol), x0, 2000);
    EXPECT_NEAR(tr.discounted_loss, v0, 1e-6);
}

class CommitmentProperty : public ::testing::TestWithParam<int> {};

TEST_P(CommitmentProperty, FocSpectrumAndReplay) {
    std::mt19937_64 rng(900 + GetParam());
    const int n = 1 + GetParam() % 3, m = 1 + (GetParam() / 3) % 2;
    const auto model = testsupport::random_saddle_model(rng, n, m, GetParam() % 2 ? 0.99 : 1.0);
    const auto sol = relq::solve_commitment(model);
    const Matrix P = testsupport::value_iteration(model.A, model.B, model.Q, model.rho, model.beta);
    EXPECT_LT((sol.P - P).cwiseAbs().maxCoeff(), 1e-8 * (1 + P.cwiseAbs().maxCoeff()));
    const auto foc = relq::foc_residuals(sol, model, sol.initial_state(Vector::Ones(n)), 300);
    EXPECT_LT(foc.rate, 1e-8);
    EXPECT_LT(foc.costate, 1e-8);
    for (double v : testsupport::moduli(sol.T_closed)) EXPECT_LT(v, 1.0 / std::sqrt(model.beta));
    if (m == 1) {
        const auto h = relq::build_history_rule(sol);
        EXPECT_LT(replay_residual(sol, h, sol.initial_state(Vector::Ones(n)), 300), 1e-8);
    }
}

INSTANTIATE_TEST_SUITE_P(Random, CommitmentProperty, ::testing::Range(0, 12));
