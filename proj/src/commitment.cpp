#include "relq/commitment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relq/analysis.hpp"
#include "relq/json_format.hpp"

namespace relq {
namespace {

// Greedy nearest pairing; returns the largest distance.
double spectrum_gap(const CVector& a, const CVector& b) {
    std::vector<bool> used(static_cast<std::size_t>(b.size()), false);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        Eigen::Index best = -1;
        double dist = 0.0;
        for (Eigen::Index j = 0; j < b.size(); ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const double d = std::abs(a(i) - b(j));
            if (best < 0 || d < dist) {
                best = j;
                dist = d;
            }
        }
        if (best < 0) return std::numeric_limits<double>::infinity();
        used[static_cast<std::size_t>(best)] = true;
        worst = std::max(worst, dist);
    }
    return worst;
}

// Coefficients c_0..c_d (c_d = 1) of prod (s - root).
std::vector<Complex> poly_from_roots(const CVector& roots) {
    std::vector<Complex> c{1.0};
    for (Eigen::Index i = 0; i < roots.size(); ++i) {
        std::vector<Complex> next(c.size() + 1, 0.0);
        for (std::size_t k = 0; k < c.size(); ++k) {
            next[k + 1] += c[k];
            next[k] -= roots(i) * c[k];
        }
        c = std::move(next);
    }
    return c;
}

}  // namespace

Vector CommitmentSolution::initial_state(const Vector& k0) const {
    if (k0.size() != n) throw UsageError("commitment", "initial_state: k0 must have n entries");
    Vector x = Vector::Zero(n + m);
    x.head(n) = k0;
    return x;
}

PolicyRule CommitmentSolution::as_if_rule() const { return PolicyRule::from_full(F, n, RuleKind::commitment_as_if); }

FocResiduals foc_residuals(const CommitmentSolution& sol, const ModelSpec& model, const Vector& x0, int steps) {
    FocResiduals out;
    Vector x = x0;
    for (int t = 0; t < steps; ++t) {
        const Vector y = sol.S * x;
        const Vector mu = sol.P * y;
        const Vector x_next = sol.T_closed * x;
        const Vector y_next = sol.S * x_next;
        const Vector mu_next = sol.P * y_next;
        const double r = sol.Phi.dot(x);
        const double scale = 1.0 + max_abs(mu);
        const double rate = std::abs(model.rho * r + model.beta * model.B.col(0).dot(mu_next)) / scale;
        const Vector costate = mu - model.Q * y - model.beta * model.A.transpose() * mu_next;
        // mu_q carried in x must agree with the multiplier implied by y
        const double carried = max_abs(Vector(x.tail(sol.m) - mu.tail(sol.m)));
        out.rate = std::max(out.rate, rate);
        out.costate = std::max({out.costate, max_abs(costate) / scale, carried / scale});
        x = x_next;
    }
    return out;
}

CommitmentSolution solve_commitment(const ModelSpec& model, const Tolerances& tol) {
    auto ctrl = controllability(model.A, model.B, tol);
    if (!ctrl.full) {
        throw ControllabilityError("commitment",
                                   "commitment refused: (A, B) is not controllable over the full n+m state (rank " +
                                       std::to_string(ctrl.rank) + " of " + std::to_string(ctrl.states) +
                                       "); optimal policy under commitment requires full controllability",
                                   std::move(ctrl));
    }
    const int n = model.n, m = model.m, d = model.dim();

    CommitmentSolution sol;
    sol.n = n;
    sol.m = m;
    sol.riccati = solve_dare(model.A, model.B, model.Q, model.rho, model.beta, tol);
    sol.P = sol.riccati.P;
    sol.F = sol.riccati.F.row(0);
    sol.closed_loop_eigenvalues = sol.riccati.closed_loop_eigenvalues;

    const Matrix P_mn = sol.P.bottomLeftCorner(m, n);
    const Matrix P_mm = sol.P.bottomRightCorner(m, m);
    Eigen::JacobiSVD<Matrix> svd(P_mm);
    const auto& s = svd.singularValues();
    sol.P_mm_condition = s(m - 1) > 0.0 ? s(0) / s(m - 1) : std::numeric_limits<double>::infinity();
    if (!(sol.P_mm_condition <= tol.conditioning)) {
        throw RefusalError("commitment", "Φ representation unavailable: P_mm is numerically singular (condition number " +
                                             format_double(sol.P_mm_condition) + ")");
    }
    const auto lu = P_mm.fullPivLu();
    const Matrix P_mm_inv = lu.inverse();
    sol.q0_map = -lu.solve(P_mn);

    sol.S = Matrix::Identity(d, d);
    sol.S.bottomLeftCorner(m, n) = sol.q0_map;
    sol.S.bottomRightCorner(m, m) = P_mm_inv;
    sol.S_inv = Matrix::Identity(d, d);
    sol.S_inv.bottomLeftCorner(m, n) = P_mn;
    sol.S_inv.bottomRightCorner(m, m) = P_mm;

    const Matrix closed = model.A - model.B * sol.F;
    sol.Phi = -sol.F * sol.S;
    sol.T_closed = sol.S_inv * closed * sol.S;

    const CVector t_eigs = sorted_eigenvalues(sol.T_closed);
    sol.similarity_residual = spectrum_gap(t_eigs, sol.closed_loop_eigenvalues);
    const double spec_scale = 1.0 + sol.closed_loop_eigenvalues.cwiseAbs().maxCoeff();
    if (sol.similarity_residual > 1e-8 * spec_scale) {
        throw NumericalError("commitment", "T_closed is not similar to A - B F (spectrum gap " +
                                               format_double(sol.similarity_residual) + ")");
    }
    if (t_eigs.cwiseAbs().maxCoeff() >= 1.0 / std::sqrt(model.beta)) {
        throw NumericalError("commitment", "commitment closed loop is not stable");
    }

    const auto foc = foc_residuals(sol, model, sol.initial_state(Vector::Ones(n)), 500);
    sol.foc_rate_residual = foc.rate;
    sol.foc_costate_residual = foc.costate;
    if (foc.rate > tol.foc || foc.costate > tol.foc) {
        throw NumericalError("commitment", "first-order conditions violated along the optimal path (rate " +
                                               format_double(foc.rate) + ", costate " + format_double(foc.costate) + ")");
    }
    return sol;
}

HistoryRule build_history_rule(const CommitmentSolution& sol, const Tolerances& tol) {
    (void)tol;
    if (sol.m != 1) {
        throw RefusalError("commitment", "history-dependent rule is only constructed for a single jump variable (m = 1), got m = " +
                                             std::to_string(sol.m));
    }
    const int n = sol.n;
    const RowVector phi_k = sol.Phi.head(n);
    const double phi_mu = sol.Phi(n);
    if (std::abs(phi_mu) <= 1e-10) {
        throw RefusalError("commitment", "cannot eliminate mu_q: its rule coefficient is zero");
    }
    // mu_t = T_mk k_t-1 + T_mm mu_t-1 and mu_t-1 = (r_t-1 - phi_k k_t-1) / phi_mu
    const RowVector T_mk = sol.T_closed.row(n).head(n);
    const double T_mm = sol.T_closed(n, n);

    HistoryRule h;
    h.psi_r = T_mm;
    h.psi_k0 = phi_k;
    h.psi_k1 = phi_mu * T_mk - T_mm * phi_k;
    h.parameter_count = 2 * n + 1;
    h.state_count = n + sol.m;
    h.identified = h.parameter_count == h.state_count;
    return h;
}

RowVector identify_rule_from_spectrum(const Matrix& A, const Matrix& B, const CVector& targets, const Tolerances& tol) {
    const Eigen::Index d = A.rows();
    if (A.cols() != d || B.rows() != d || B.cols() != 1) {
        throw UsageError("commitment", "pole placement needs square A and a single-column B of matching size");
    }
    if (targets.size() != d) throw UsageError("commitment", "pole placement needs one target per state");
    auto ctrl = controllability(A, B, tol);
    if (!ctrl.full) {
        throw ControllabilityError("commitment", "pole placement refused: (A, B) is not controllable", std::move(ctrl));
    }
    const double scale = targets.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            if (std::abs(targets(i) - targets(j)) <= tol.distinctness * scale) {
                throw RefusalError("commitment", "target eigenvalues must be distinct for a one-to-one rule");
            }
        }
    }
    const auto target_poly = poly_from_roots(targets);
    for (const auto& c : target_poly) {
        if (std::abs(c.imag()) > tol.imag_residual * (1.0 + std::abs(c.real()))) {
            throw UsageError("commitment", "target eigenvalues must be closed under complex conjugation");
        }
    }
    const auto open_poly = poly_from_roots(sorted_eigenvalues(A));

    // T maps controllable canonical coordinates to the original ones.
    Matrix C(d, d);
    Vector col = B.col(0);
    for (Eigen::Index i = 0; i < d; ++i) {
        C.col(i) = col;
        col = A * col;
    }
    Matrix W = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; i + j < d; ++j) {
            const auto k = static_cast<std::size_t>(i + j + 1);
            W(i, j) = k == static_cast<std::size_t>(d) ? 1.0 : open_poly[k].real();
        }
    }
    const Matrix T = C * W;
    RowVector F_canonical(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        F_canonical(i) = target_poly[static_cast<std::size_t>(i)].real() - open_poly[static_cast<std::size_t>(i)].real();
    }
    const RowVector F = T.transpose().fullPivLu().solve(F_canonical.transpose()).transpose();

    const double gap = spectrum_gap(sorted_eigenvalues(A - B * F), targets);
    if (!(gap <= tol.placement)) {
        throw NumericalError("commitment", "pole placement missed its targets by " + format_double(gap));
    }
    return F;
}

ProbeReport time_inconsistency_probe(const CommitmentSolution& sol, const ModelSpec& model, int reset_time,
                                     const Vector& k0, int horizon, const Tolerances& tol) {
    if (reset_time < 0) throw UsageError("commitment", "time_inconsistency_probe: reset_time must be >= 0");
    if (horizon < 50) throw UsageError("commitment", "time_inconsistency_probe: horizon must be >= 50");
    const int n = sol.n, m = sol.m;

    Vector x = sol.initial_state(k0);
    for (int t = 0; t < reset_time; ++t) x = sol.T_closed * x;
    Vector x_reset = x;
    x_reset.tail(m).setZero();

    ProbeReport rep;
    rep.reset_time = reset_time;
    rep.mu_q_at_reset = x.tail(m);
    rep.q_jump = sol.q_of(x) - sol.q_of(x_reset);
    const Vector y = sol.to_y(x), y_reset = sol.to_y(x_reset);
    rep.continuation_loss = y.dot(sol.P * y);
    rep.reset_loss = y_reset.dot(sol.P * y_reset);

    const ClosedLoopLaw law = commitment_law(model, sol);
    const auto committed = simulate(model, law, x, horizon, tol);
    const auto reset = simulate(model, law, x_reset, horizon, tol);

    ClosedLoopLaw repeated;
    repeated.name = "commitment_repeated_reset";
    repeated.transition = sol.T_closed.topLeftCorner(n, n);
    repeated.to_state = sol.S.leftCols(n);
    repeated.rule = sol.Phi.head(n);
    const auto again = simulate(model, repeated, x.head(n), horizon, tol);

    const auto b1 = check_boundedness(committed, model.beta, tol);
    const auto b2 = check_boundedness(reset, model.beta, tol);
    const auto b3 = check_boundedness(again, model.beta, tol);
    rep.committed_growth = b1.growth_exponent;
    rep.reset_growth = b2.growth_exponent;
    rep.repeated_reset_growth = b3.growth_exponent;
    rep.committed_bounded = b1.bound_satisfied;
    rep.reset_bounded = b2.bound_satisfied;
    rep.repeated_reset_bounded = b3.bound_satisfied;
    return rep;
}

}  // namespace relq
