#pragma once

#include <optional>

#include "relq/config.hpp"
#include "relq/model.hpp"
#include "relq/riccati.hpp"
#include "relq/spectral.hpp"

namespace relq {

/// Optimal policy under commitment, written on the predetermined pair
/// x = (k, mu_q) where mu_q are the multipliers of the jump variables.
///
///   q_t   = -P_mm^{-1} P_mn k_t + P_mm^{-1} mu_q,t
///   r_t   = Phi x_t,               Phi = -F S
///   x_t+1 = T_closed x_t,          T_closed = S^{-1} (A - B F) S
///
/// with S = [[I, 0], [-P_mm^{-1} P_mn, P_mm^{-1}]] and mu_q,0 = 0.
struct CommitmentSolution {
    int n = 0;
    int m = 0;
    RiccatiSolution riccati;  // "as if" q were predetermined
    Matrix P;
    RowVector F;
    RowVector Phi;
    Matrix S;          // x -> y
    Matrix S_inv;      // y -> x
    Matrix T_closed;
    Matrix q0_map;     // m x n
    double P_mm_condition = 0.0;
    CVector closed_loop_eigenvalues;  // of A - B F
    double foc_rate_residual = 0.0;   // rho r_t + beta B' mu_t+1
    double foc_costate_residual = 0.0;  // mu_t - Q y_t - beta A' mu_t+1
    double similarity_residual = 0.0;   // eig(T_closed) vs eig(A - B F)

    Vector initial_state(const Vector& k0) const;  // (k0, 0)
    Vector to_y(const Vector& x) const { return S * x; }
    Vector q_of(const Vector& x) const { return (S * x).tail(m); }
    PolicyRule as_if_rule() const;
};

/// Solves the Stackelberg problem and verifies its first-order conditions
/// along a simulated path.
///
/// Refuses (ControllabilityError) when (A, B) is not controllable and
/// (RefusalError) when P_mm is numerically singular. A failed FOC or
/// similarity check raises NumericalError.
CommitmentSolution solve_commitment(const ModelSpec& model, const Tolerances& tol = {});

/// Maximum residuals of both first-order conditions over `steps` periods
/// from x0, with mu_t = P y_t.
struct FocResiduals {
    double rate = 0.0;
    double costate = 0.0;
};
FocResiduals foc_residuals(const CommitmentSolution& sol, const ModelSpec& model, const Vector& x0, int steps);

/// Instrument rule on (r_t-1, k_t, k_t-1) after eliminating mu_q (m = 1):
///   r_t = psi_r r_t-1 + psi_k0 k_t + psi_k1 k_t-1.
struct HistoryRule {
    double psi_r = 0.0;
    RowVector psi_k0;
    RowVector psi_k1;
    int parameter_count = 0;  // 2n + 1
    int state_count = 0;      // n + m
    bool identified = false;  // parameter_count == state_count
};

HistoryRule build_history_rule(const CommitmentSolution& sol, const Tolerances& tol = {});

/// Single-input pole placement: the unique F with eig(A - B F) = targets.
RowVector identify_rule_from_spectrum(const Matrix& A, const Matrix& B, const CVector& targets,
                                      const Tolerances& tol = {});

struct ProbeReport {
    int reset_time = 0;
    Vector mu_q_at_reset;
    Vector q_jump;  // committed q minus reset q at the reset date
    double continuation_loss = 0.0;  // y' P y on the committed path at the reset date
    double reset_loss = 0.0;         // same after re-optimizing q
    double committed_growth = 0.0;
    double reset_growth = 0.0;
    double repeated_reset_growth = 0.0;  // mu_q set to zero every period from the reset on
    bool committed_bounded = false;
    bool reset_bounded = false;
    bool repeated_reset_bounded = false;
};

/// Re-optimization at `reset_time`: mu_q is reset to zero and the path is
/// continued for `horizon` periods under the committed law (and, for the
/// repeated variant, with mu_q forced to zero every period).
ProbeReport time_inconsistency_probe(const CommitmentSolution& sol, const ModelSpec& model, int reset_time,
                                     const Vector& k0, int horizon = 500, const Tolerances& tol = {});

}  // namespace relq
