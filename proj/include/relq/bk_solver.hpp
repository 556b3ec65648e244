#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relq/config.hpp"
#include "relq/model.hpp"
#include "relq/riccati.hpp"
#include "relq/spectral.hpp"

namespace relq {

enum class BKCase { no_equilibrium, unique, multiple };

const char* to_string(BKCase c);

/// Case 1 when n_S < n, case 2 when n_S == n, case 3 otherwise.
BKCase bk_case(int n_stable, int n);

/// n! / (k! (n-k)!), exact for the sizes used here; 0 when k > n.
long long binomial(int n, int k);

struct BKClassification {
    BKCase label = BKCase::no_equilibrium;
    SpectralSplit split;
};

/// Closed loop A - B F under `rule`, classified against the number of
/// predetermined variables.
BKClassification classify_bk(const ModelSpec& model, const PolicyRule& rule, const Tolerances& tol = {});

/// One saddle-path equilibrium: jump variables on q = -N k.
struct BKSolution {
    BKCase case_label = BKCase::unique;
    std::vector<int> chosen_subset;  // eigenvalue indices kept in the stable block
    Matrix N;                        // m x n
    Matrix A_reduced;                // n x n, empty until a model is attached
    Matrix Q_reduced;                // n x n
    double conditioning = 0.0;       // cond(M_mm)
    double manifold_residual = 0.0;  // max |C_mn - C_mm N + N C_nn - N C_nm N|
};

/// Subset could not produce a real, well-conditioned N.
class SubsetRejected : public RefusalError {
public:
    SubsetRejected(std::vector<int> subset, const std::string& reason);
    const std::vector<int>& subset() const noexcept { return subset_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::vector<int> subset_;
    std::string reason_;
};

/// N = M_mm^{-1} M_mn from the left eigenvectors not in `subset`.
///
/// Throws SubsetRejected when the subset splits a conjugate pair, M_mm is
/// singular (condition above tol.conditioning), N is not real, or the
/// manifold q = -N k is not invariant under the split's matrix.
BKSolution build_N(const SpectralSplit& split, const std::vector<int>& subset, int n, const Tolerances& tol = {});

/// A' = A_nn - A_nm N and the loss weight of k on the manifold q = -N k,
/// Q' = Q_nn - Q_nm N - N' Q_mn + N' Q_mm N.
Matrix reduced_transition(const ModelSpec& model, const Matrix& N);
Matrix reduced_loss_weight(const ModelSpec& model, const Matrix& N);

struct RejectedSubset {
    std::vector<int> subset;
    std::string reason;
};

struct EquilibriumSet {
    BKCase case_label = BKCase::no_equilibrium;
    SpectralSplit split;
    long long count_formula = 0;  // binomial(n_S, n)
    long long upper_bound = 0;    // binomial(n + m, n)
    std::vector<BKSolution> solutions;
    std::vector<RejectedSubset> rejected;
    bool distinct_solutions = true;  // admissible N pairwise differ by > tol.distinct_n
};

/// All n-subsets of the stable eigenvalues of `split`, lexicographic.
std::vector<std::vector<int>> stable_subsets(int n_stable, int n);

/// Every admissible equilibrium of the closed loop described by `split`.
/// Subsets are evaluated in parallel (OpenMP); results keep lexicographic order.
EquilibriumSet enumerate_split(const ModelSpec& model, const SpectralSplit& split, const Tolerances& tol = {});

/// Requires a rule restricted to predetermined variables (F_m == 0).
EquilibriumSet enumerate_equilibria(const ModelSpec& model, const PolicyRule& rule, const Tolerances& tol = {});

namespace reference {
/// Serial loop with the same contract as relq::enumerate_split.
EquilibriumSet enumerate_split(const ModelSpec& model, const SpectralSplit& split, const Tolerances& tol = {});
EquilibriumSet enumerate_equilibria(const ModelSpec& model, const PolicyRule& rule, const Tolerances& tol = {});
}  // namespace reference

/// Optimal rule restricted to predetermined variables for a given N.
struct QuasiOptimalSolution {
    Matrix N;
    Matrix A_reduced;
    Matrix Q_reduced;
    ControllabilityReport reduced_controllability;
    RiccatiSolution reduced;  // P', F'
    PolicyRule rule;          // (F'_n, 0)
};

QuasiOptimalSolution solve_quasi_optimal(const ModelSpec& model, const Matrix& N, const Tolerances& tol = {});

/// (F_n - F_m N, 0): the restricted rule generating the same instrument
/// path on the manifold q = -N k.
PolicyRule observational_equivalence(const PolicyRule& rule, const Matrix& N);

}  // namespace relq
