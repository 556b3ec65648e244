#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "relq/bk_solver.hpp"
#include "relq/commitment.hpp"
#include "relq/config.hpp"
#include "relq/model.hpp"

namespace relq {

/// Linear closed loop in some coordinates x:
///   x_t+1 = transition x_t + shock_map z_t,  y_t = to_state x_t,  r_t - r* = rule x_t.
/// `full_rule` is the gain F with r_t - r* = -F y_t, used to check each step
/// against y_t+1 = A y_t + B (r_t - r*) + gamma z_t.
struct ClosedLoopLaw {
    std::string name;
    Matrix transition;
    Matrix to_state;
    RowVector rule;
    Matrix shock_map;    // empty when the model has no exogenous path
    int mu_offset = -1;  // first row of x holding mu_q, or -1
};

/// y_t+1 = (A - B F) y_t under a full-state rule; x = y.
ClosedLoopLaw rule_law(const ModelSpec& model, const PolicyRule& rule);

/// Saddle path under `rule`: x = k, k_t+1 = (C_nn - C_nm N) k_t, q_t = -N k_t.
ClosedLoopLaw bk_law(const ModelSpec& model, const PolicyRule& rule, const Matrix& N);

/// Commitment law on x = (k, mu_q).
ClosedLoopLaw commitment_law(const ModelSpec& model, const CommitmentSolution& sol);

struct Trajectory {
    int horizon = 0;  // periods recorded, t = 0 .. horizon-1
    Matrix k;         // horizon x n
    Matrix q;         // horizon x m
    Vector r;         // instrument deviation r_t - r*
    std::optional<Matrix> mu_q;
    Vector terminal_state;  // y at t = horizon
    double discounted_loss = 0.0;  // sum beta^t (y'Qy + rho r^2)
    double growth_exponent = 0.0;  // slope of log |y_t| over the second half
    double law_residual = 0.0;     // max one-step violation of the model law, relative to 1 + |y_t|
    bool divergent = false;

    Vector y(int t) const;
};

/// Exact linear iteration for T periods. Stops early and flags the
/// trajectory divergent once |y| exceeds tol.divergence_norm.
Trajectory simulate(const ModelSpec& model, const ClosedLoopLaw& law, const Vector& x0, int T,
                    const Tolerances& tol = {});

/// Least-squares slope of log(norms[t]) against t over the second half.
double growth_exponent(const std::vector<double>& norms);

struct BoundednessReport {
    double growth_exponent = 0.0;
    double threshold_exponent = 0.0;  // log(1/sqrt(beta))
    bool bound_satisfied = false;
};

/// Requires at least 50 periods.
BoundednessReport check_boundedness(const Trajectory& traj, double beta, const Tolerances& tol = {});

/// Numerical rank of a tall matrix: singular values above
/// sigma_max * max(rows, cols) * tol.rank_relative.
int numerical_rank(const Matrix& x, const Tolerances& tol, std::vector<double>* singular_values = nullptr);

struct BKIdentificationReport {
    PolicyRule augmented;
    PolicyRule restricted;
    double max_instrument_gap = 0.0;
    bool paths_identical = false;
    int regressor_rank = 0;
    int expected_rank = 0;  // n
    int rank_deficiency = 0;
    std::vector<double> singular_values;
};

/// Simulates `rule` and its observationally equivalent restriction on the
/// same saddle manifold and compares the data they generate.
BKIdentificationReport identification_experiment_bk(const ModelSpec& model, const PolicyRule& rule, const Matrix& N,
                                                    const Vector& k0, int T = 500, const Tolerances& tol = {});

struct CommitmentIdentificationReport {
    bool refused = false;
    std::string reason;
    int attempts = 0;
    Vector k0_used;
    int regressor_rank = 0;
    bool full_rank = false;
    RowVector recovered_phi;
    double max_phi_gap = 0.0;
    bool recovered = false;
};

/// Regresses r_t on (k_t, mu_q,t) along the commitment path. Rank-deficient
/// regressors trigger up to three retries from a perturbed k0 drawn with `seed`.
CommitmentIdentificationReport identification_experiment_commitment(const ModelSpec& model,
                                                                    const CommitmentSolution& sol, const Vector& k0,
                                                                    int T = 500, std::uint64_t seed = 0,
                                                                    const Tolerances& tol = {});

/// Equal-weight cross moment (1/T) sum k_t q_t' of a trajectory.
Matrix cross_moment(const Trajectory& traj);
/// Least-squares map G with q_t ~ G k_t.
Matrix regression_map(const Trajectory& traj);

struct CovarianceReport {
    double perturbation = 0.0;
    Matrix N_baseline, N_perturbed;
    double bk_map_gap = 0.0;
    bool bk_map_fixed = false;
    Matrix bk_data_map_baseline, bk_data_map_perturbed;  // regression of q on k, equals -N
    Matrix bk_moment_baseline, bk_moment_perturbed;
    Matrix commitment_moment_baseline, commitment_moment_perturbed;
    double commitment_moment_gap = 0.0;
    Matrix commitment_map_baseline, commitment_map_perturbed;
    bool commitment_moves = false;
};

/// Adds `perturbation` to every entry of Q_nm and Q_mn; throws
/// ValidationError when the result is no longer PSD.
ModelSpec perturb_cross_weights(const ModelSpec& model, double perturbation, const Tolerances& tol = {});

/// Quasi-optimal (saddle-path) and commitment k-q relations under baseline
/// and perturbed cross weights. The saddle manifold comes from the first
/// admissible equilibrium under `base_rule` (zero rule when absent).
CovarianceReport covariance_comparison(const ModelSpec& model, int T = 500, double perturbation = 0.1,
                                       const std::optional<PolicyRule>& base_rule = std::nullopt,
                                       const std::optional<Vector>& k0 = std::nullopt, const Tolerances& tol = {});

/// Header `t,<k names>,<q names>[,mu_<q names>],r`, one row per period,
/// 17 significant digits.
void write_trajectory_csv(std::ostream& out, const ModelSpec& model, const Trajectory& traj);

}  // namespace relq
