#pragma once

#include <span>
#include <string>
#include <vector>

#include "relq/config.hpp"
#include "relq/errors.hpp"
#include "relq/spectral.hpp"
#include "relq/types.hpp"

namespace relq {

/// Stabilizing solution of the discounted DARE
///   P = Q + beta A'PA - beta A'PB (rho + beta B'PB)^{-1} beta B'PA
/// with gain F = beta (rho + beta B'PB)^{-1} B'PA.
struct RiccatiSolution {
    Matrix P;
    Matrix F;  // instruments x d; one row in the single-instrument case
    double residual = 0.0;
    CVector closed_loop_eigenvalues;  // sorted by modulus
    int iterations = 0;
};

/// Iteration stopped without meeting the step test.
class DivergenceError : public NumericalError {
public:
    DivergenceError(int iterations, double last_step, double last_residual);
    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

/// One application of the Riccati map.
Matrix riccati_map(const Matrix& P, const Matrix& A, const Matrix& B, const Matrix& Q, double rho, double beta);

/// beta (rho + beta B'PB)^{-1} B'PA
Matrix riccati_gain(const Matrix& P, const Matrix& A, const Matrix& B, double rho, double beta);

/// max |riccati_map(P) - P|
double riccati_residual(const Matrix& P, const Matrix& A, const Matrix& B, const Matrix& Q, double rho, double beta);

/// Fixed-point iteration of the Riccati map from P0 = I.
///
/// Refuses uncontrollable pairs (ControllabilityError) and rejects a limit
/// that is not stabilizing (NumericalError) or misses the residual test.
RiccatiSolution solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, double rho, double beta,
                           const Tolerances& tol = {});

/// y0' P y0: the discounted loss of the optimal closed loop started at y0.
double loss_of_state(const RiccatiSolution& sol, const Vector& y0);

struct DareProblem {
    Matrix A, B, Q;
    double rho = 1.0;
    double beta = 1.0;
};

/// Per-problem result of a batch solve; `error` is empty on success.
struct DareOutcome {
    RiccatiSolution solution;
    std::string error;
    bool ok() const { return error.empty(); }
};

/// Solves independent problems in parallel (OpenMP). Output order matches input.
std::vector<DareOutcome> solve_dare_batch(std::span<const DareProblem> problems, const Tolerances& tol = {});

namespace reference {
/// Serial loop with the same contract as relq::solve_dare_batch.
std::vector<DareOutcome> solve_dare_batch(std::span<const DareProblem> problems, const Tolerances& tol = {});
}  // namespace reference

}  // namespace relq
