#pragma once

#include <vector>

#include "relq/config.hpp"
#include "relq/errors.hpp"
#include "relq/types.hpp"

namespace relq {

struct ControllabilityReport {
    int rank = 0;
    int states = 0;
    bool full = false;
    std::vector<double> singular_values;  // descending
};

class ControllabilityError : public RefusalError {
public:
    ControllabilityError(const std::string& module, const std::string& what, ControllabilityReport report)
        : RefusalError(module, what), report_(std::move(report)) {}
    const ControllabilityReport& report() const noexcept { return report_; }

private:
    ControllabilityReport report_;
};

/// Kalman test on [B, AB, ..., A^{d-1}B]. Rank counts singular values above
/// sigma_max * d * tol.rank_relative.
ControllabilityReport controllability(const Matrix& A, const Matrix& B, const Tolerances& tol = {});

/// Thrown when a repeated eigenvalue lacks a full set of eigenvectors.
class DefectiveMatrixError : public RefusalError {
public:
    DefectiveMatrixError(Complex eigenvalue, int algebraic, int geometric);
    Complex eigenvalue() const noexcept { return eigenvalue_; }

private:
    Complex eigenvalue_;
};

/// Eigenstructure of a real square matrix with a stable/unstable split
/// against 1/sqrt(beta).
///
/// Eigenvalues are sorted by modulus (ties: real part, then imaginary part),
/// so the stable block always comes first. Row i of `M` is the left
/// eigenvector for eigenvalues(i): M * matrix == diag(eigenvalues) * M.
struct SpectralSplit {
    Matrix matrix;
    CVector eigenvalues;
    CMatrix M;
    double threshold = 1.0;  // 1/sqrt(beta)
    int n_stable = 0;        // |lambda| < threshold - margin
    int n_unit_stable = 0;   // |lambda| < 1 - margin, reported when it differs
    std::vector<int> borderline;  // within margin of threshold, classified unstable
    bool distinct = false;
    bool diagonalizable = true;

    int size() const { return static_cast<int>(eigenvalues.size()); }
    int n_unstable() const { return size() - n_stable; }
    double beta() const { return 1.0 / (threshold * threshold); }
    bool is_stable(int i) const { return i < n_stable; }
    CVector stable_eigenvalues() const { return eigenvalues.head(n_stable); }
    CVector unstable_eigenvalues() const { return eigenvalues.tail(n_unstable()); }
    CMatrix Lambda_stable() const { return stable_eigenvalues().asDiagonal(); }
    CMatrix Lambda_unstable() const { return unstable_eigenvalues().asDiagonal(); }
};

SpectralSplit spectral_split(const Matrix& closed_loop, double beta, const Tolerances& tol = {});

/// Sorted by modulus, then real part, then imaginary part.
CVector sorted_eigenvalues(const Matrix& x);

struct MirrorPair {
    int open_index = 0;
    int closed_index = 0;
    bool mirrored = false;  // open eigenvalue was unstable
    double residual = 0.0;
};

struct MirrorReport {
    std::vector<MirrorPair> pairs;
    double max_residual = 0.0;
    bool pass = false;
};

/// Minimal-volatility eigenvalue relation between an open-loop and a
/// closed-loop spectrum (same beta). Stable open-loop roots must reappear
/// unchanged; unstable ones must reappear with modulus 1/(beta |lambda|),
/// which is 1/|lambda| in the undiscounted case.
MirrorReport eigenvalue_mirror_check(const SpectralSplit& open_loop, const SpectralSplit& closed_loop,
                                     const Tolerances& tol = {});

}  // namespace relq
