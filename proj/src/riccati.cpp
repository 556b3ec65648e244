#include "relq/riccati.hpp"

#include <cmath>

#include "relq/json_format.hpp"

namespace relq {
namespace {

void check_dims(const Matrix& A, const Matrix& B, const Matrix& Q, double rho, double beta) {
    const Eigen::Index d = A.rows();
    if (A.cols() != d || B.rows() != d || B.cols() < 1 || Q.rows() != d || Q.cols() != d) {
        throw UsageError("riccati", "solve_dare: dimension mismatch (A " + std::to_string(A.rows()) + "x" +
                                        std::to_string(A.cols()) + ", B " + std::to_string(B.rows()) + "x" +
                                        std::to_string(B.cols()) + ", Q " + std::to_string(Q.rows()) + "x" +
                                        std::to_string(Q.cols()) + ")");
    }
    if (!(rho > 0.0)) throw UsageError("riccati", "solve_dare: rho must be positive");
    if (!(beta > 0.0 && beta <= 1.0)) throw UsageError("riccati", "solve_dare: beta must lie in (0, 1]");
}

Matrix symmetrize(const Matrix& x) { return 0.5 * (x + x.transpose()); }

}  // namespace

DivergenceError::DivergenceError(int iterations, double last_step, double last_residual)
    : NumericalError("riccati", "Riccati iteration did not converge in " + std::to_string(iterations) +
                                    " iterations (last step " + format_double(last_step) + ", last residual " +
                                    format_double(last_residual) + ")"),
      last_residual_(last_residual) {}

Matrix riccati_gain(const Matrix& P, const Matrix& A, const Matrix& B, double rho, double beta) {
    const Eigen::Index k = B.cols();
    Matrix S = rho * Matrix::Identity(k, k) + beta * B.transpose() * P * B;
    return beta * S.ldlt().solve(B.transpose() * P * A);
}

Matrix riccati_map(const Matrix& P, const Matrix& A, const Matrix& B, const Matrix& Q, double rho, double beta) {
    const Eigen::Index k = B.cols();
    const Matrix PA = P * A;
    const Matrix BtPA = B.transpose() * PA;
    Matrix S = rho * Matrix::Identity(k, k) + beta * B.transpose() * P * B;
    Matrix next = Q + beta * A.transpose() * PA - beta * beta * BtPA.transpose() * S.ldlt().solve(BtPA);
    return symmetrize(next);
}

double riccati_residual(const Matrix& P, const Matrix& A, const Matrix& B, const Matrix& Q, double rho, double beta) {
    return max_abs(Matrix(riccati_map(P, A, B, Q, rho, beta) - P));
}

RiccatiSolution solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, double rho, double beta,
                           const Tolerances& tol) {
    check_dims(A, B, Q, rho, beta);
    const Eigen::Index d = A.rows();
    const double root = std::sqrt(beta);
    auto ctrl = controllability(root * A, root * B, tol);
    if (!ctrl.full) {
        throw ControllabilityError("riccati", "solve_dare: (sqrt(beta) A, sqrt(beta) B) is not controllable (rank " +
                                                  std::to_string(ctrl.rank) + " of " + std::to_string(ctrl.states) + ")",
                                   std::move(ctrl));
    }

    Matrix P = Matrix::Identity(d, d);
    double step = 0.0;
    int iter = 0;
    bool converged = false;
    while (iter < tol.riccati_max_iter) {
        Matrix next = riccati_map(P, A, B, Q, rho, beta);
        ++iter;
        if (!next.allFinite()) break;
        step = max_abs(Matrix(next - P));
        const bool small = step < tol.riccati_step * (1.0 + max_abs(P));
        P = std::move(next);
        if (small) {
            converged = true;
            break;
        }
    }
    const double residual = riccati_residual(P, A, B, Q, rho, beta);
    if (!converged) throw DivergenceError(iter, step, residual);

    RiccatiSolution sol;
    sol.P = P;
    sol.F = riccati_gain(P, A, B, rho, beta);
    sol.residual = residual;
    sol.iterations = iter;
    sol.closed_loop_eigenvalues = sorted_eigenvalues(A - B * sol.F);

    if (residual >= tol.riccati_residual * (1.0 + max_abs(P))) {
        throw NumericalError("riccati", "solve_dare: residual " + format_double(residual) + " exceeds tolerance");
    }
    const double limit = 1.0 / root - 1e-10;
    const double spectral_radius = sol.closed_loop_eigenvalues.cwiseAbs().maxCoeff();
    if (spectral_radius >= limit) {
        throw NumericalError("riccati", "solve_dare: limit is not stabilizing (closed-loop spectral radius " +
                                            format_double(spectral_radius) + " >= 1/sqrt(beta))");
    }
    return sol;
}

double loss_of_state(const RiccatiSolution& sol, const Vector& y0) {
    if (y0.size() != sol.P.rows()) throw UsageError("riccati", "loss_of_state: state dimension mismatch");
    return y0.dot(sol.P * y0);
}

std::vector<DareOutcome> solve_dare_batch(std::span<const DareProblem> problems, const Tolerances& tol) {
    std::vector<DareOutcome> out(problems.size());
    const auto count = static_cast<long>(problems.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < count; ++i) {
        const auto& p = problems[static_cast<std::size_t>(i)];
        auto& slot = out[static_cast<std::size_t>(i)];
        try {
            slot.solution = solve_dare(p.A, p.B, p.Q, p.rho, p.beta, tol);
        } catch (const std::exception& e) {
            slot.error = e.what();
        }
    }
    return out;
}

namespace reference {

std::vector<DareOutcome> solve_dare_batch(std::span<const DareProblem> problems, const Tolerances& tol) {
    std::vector<DareOutcome> out;
    out.reserve(problems.size());
    for (const auto& p : problems) {
        DareOutcome slot;
        try {
            slot.solution = solve_dare(p.A, p.B, p.Q, p.rho, p.beta, tol);
        } catch (const std::exception& e) {
            slot.error = e.what();
        }
        out.push_back(std::move(slot));
    }
    return out;
}

}  // namespace reference
}  // namespace relq
