#include "relq/bk_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "relq/json_format.hpp"

namespace relq {
namespace {

std::string subset_text(const std::vector<int>& subset) {
    std::ostringstream os;
    os << "{";
    for (std::size_t i = 0; i < subset.size(); ++i) os << (i ? ", " : "") << subset[i];
    os << "}";
    return os.str();
}

struct SubsetOutcome {
    std::optional<BKSolution> solution;
    RejectedSubset rejection;
};

SubsetOutcome evaluate_subset(const ModelSpec& model, const SpectralSplit& split, const std::vector<int>& subset,
                              const Tolerances& tol) {
    SubsetOutcome out;
    try {
        BKSolution sol = build_N(split, subset, model.n, tol);
        sol.A_reduced = reduced_transition(model, sol.N);
        sol.Q_reduced = reduced_loss_weight(model, sol.N);
        out.solution = std::move(sol);
    } catch (const SubsetRejected& e) {
        out.rejection = {subset, e.reason()};
    }
    return out;
}

EquilibriumSet prepare(const ModelSpec& model, const SpectralSplit& split) {
    if (split.size() != model.dim()) throw UsageError("bk_solver", "enumerate: split dimension differs from model");
    EquilibriumSet set;
    set.split = split;
    set.case_label = bk_case(split.n_stable, model.n);
    set.count_formula = binomial(split.n_stable, model.n);
    set.upper_bound = binomial(model.dim(), model.n);
    return set;
}

void merge(EquilibriumSet& set, std::vector<SubsetOutcome>& outcomes, const Tolerances& tol) {
    for (auto& o : outcomes) {
        if (o.solution) {
            set.solutions.push_back(std::move(*o.solution));
        } else {
            set.rejected.push_back(std::move(o.rejection));
        }
    }
    for (std::size_t i = 0; i < set.solutions.size(); ++i) {
        for (std::size_t j = i + 1; j < set.solutions.size(); ++j) {
            if (max_abs(Matrix(set.solutions[i].N - set.solutions[j].N)) <= tol.distinct_n) {
                set.distinct_solutions = false;
            }
        }
    }
}

void require_restricted(const PolicyRule& rule) {
    if (!rule.restricted()) {
        throw UsageError("bk_solver", "enumerate_equilibria: rule must not respond to non-predetermined variables (F_m = 0)");
    }
}

}  // namespace

const char* to_string(BKCase c) {
    switch (c) {
        case BKCase::no_equilibrium: return "no_equilibrium";
        case BKCase::unique: return "unique";
        case BKCase::multiple: return "multiple";
    }
    return "no_equilibrium";
}

BKCase bk_case(int n_stable, int n) {
    if (n_stable < n) return BKCase::no_equilibrium;
    if (n_stable == n) return BKCase::unique;
    return BKCase::multiple;
}

long long binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) return 0;
    k = std::min(k, n - k);
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

BKClassification classify_bk(const ModelSpec& model, const PolicyRule& rule, const Tolerances& tol) {
    if (rule.F_n.size() != model.n || rule.F_m.size() != model.m) {
        throw UsageError("bk_solver", "classify_bk: rule has " + std::to_string(rule.F_n.size()) + "+" +
                                          std::to_string(rule.F_m.size()) + " coefficients, model has n=" +
                                          std::to_string(model.n) + ", m=" + std::to_string(model.m));
    }
    BKClassification out;
    out.split = spectral_split(model.A - model.B * rule.full(), model.beta, tol);
    out.label = bk_case(out.split.n_stable, model.n);
    return out;
}

SubsetRejected::SubsetRejected(std::vector<int> subset, const std::string& reason)
    : RefusalError("bk_solver", "subset " + subset_text(subset) + " rejected: " + reason),
      subset_(std::move(subset)),
      reason_(reason) {}

BKSolution build_N(const SpectralSplit& split, const std::vector<int>& subset, int n, const Tolerances& tol) {
    const int d = split.size();
    const int m = d - n;
    if (n < 1 || m < 1) throw UsageError("bk_solver", "build_N: need 1 <= n < dimension");
    if (static_cast<int>(subset.size()) != n) {
        throw UsageError("bk_solver", "build_N: subset must hold exactly n = " + std::to_string(n) + " indices");
    }
    std::vector<bool> chosen(static_cast<std::size_t>(d), false);
    for (int i : subset) {
        if (i < 0 || i >= split.n_stable) {
            throw UsageError("bk_solver", "build_N: index " + std::to_string(i) + " is not a stable eigenvalue");
        }
        if (chosen[static_cast<std::size_t>(i)]) throw UsageError("bk_solver", "build_N: repeated index in subset");
        chosen[static_cast<std::size_t>(i)] = true;
    }

    // Only conjugate-closed subsets give a real N.
    const auto& ev = split.eigenvalues;
    for (int i : subset) {
        const Complex lam = ev(i);
        if (std::abs(lam.imag()) <= tol.imag_residual * std::max(1.0, std::abs(lam))) continue;
        int partner = -1;
        double best = 0.0;
        for (int j = 0; j < d; ++j) {
            if (j == i) continue;
            const double dist = std::abs(ev(j) - std::conj(lam));
            if (partner < 0 || dist < best) {
                partner = j;
                best = dist;
            }
        }
        if (partner < 0 || !chosen[static_cast<std::size_t>(partner)]) {
            throw SubsetRejected(subset, "complex solution: conjugate pair split across stable set");
        }
    }

    std::vector<int> complement;
    for (int i = 0; i < d; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) complement.push_back(i);
    }
    CMatrix rows(m, d);
    for (int r = 0; r < m; ++r) rows.row(r) = split.M.row(complement[static_cast<std::size_t>(r)]);
    const CMatrix M_mn = rows.leftCols(n);
    const CMatrix M_mm = rows.rightCols(m);

    Eigen::JacobiSVD<CMatrix> svd(M_mm);
    const auto& s = svd.singularValues();
    const double cond = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
    if (!(cond <= tol.conditioning)) {
        throw SubsetRejected(subset, "singular M_mm (condition number " + format_double(cond) + ")");
    }
    const CMatrix Nc = M_mm.fullPivLu().solve(M_mn);
    const Matrix N = Nc.real();
    const double imag = max_abs(Matrix(Nc.imag()));
    if (imag > tol.imag_residual * (1.0 + max_abs(N))) {
        throw SubsetRejected(subset, "complex solution: conjugate pair split across stable set (imaginary residual " +
                                         format_double(imag) + ")");
    }

    const Matrix& C = split.matrix;
    const Matrix C_nn = C.topLeftCorner(n, n), C_nm = C.topRightCorner(n, m);
    const Matrix C_mn = C.bottomLeftCorner(m, n), C_mm = C.bottomRightCorner(m, m);
    const Matrix R = C_mn - C_mm * N + N * C_nn - N * C_nm * N;
    const double residual = max_abs(R);
    const double scale = (1.0 + max_abs(C)) * std::pow(1.0 + max_abs(N), 2);
    if (residual > tol.manifold * scale) {
        throw SubsetRejected(subset, "saddle manifold not invariant (residual " + format_double(residual) + ")");
    }

    BKSolution sol;
    sol.case_label = bk_case(split.n_stable, n);
    sol.chosen_subset = subset;
    sol.N = N;
    sol.conditioning = cond;
    sol.manifold_residual = residual;
    return sol;
}

Matrix reduced_transition(const ModelSpec& model, const Matrix& N) {
    if (N.rows() != model.m || N.cols() != model.n) throw UsageError("bk_solver", "N must be m x n");
    return model.A_nn() - model.A_nm() * N;
}

Matrix reduced_loss_weight(const ModelSpec& model, const Matrix& N) {
    if (N.rows() != model.m || N.cols() != model.n) throw UsageError("bk_solver", "N must be m x n");
    Matrix q = model.Q_nn() - model.Q_nm() * N - N.transpose() * model.Q_mn() + N.transpose() * model.Q_mm() * N;
    return 0.5 * (q + q.transpose());
}

std::vector<std::vector<int>> stable_subsets(int n_stable, int n) {
    std::vector<std::vector<int>> out;
    if (n < 0 || n > n_stable) return out;
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
        out.push_back(idx);
        int pos = n - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n_stable - n + pos) --pos;
        if (pos < 0) break;
        ++idx[static_cast<std::size_t>(pos)];
        for (int j = pos + 1; j < n; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

EquilibriumSet enumerate_split(const ModelSpec& model, const SpectralSplit& split, const Tolerances& tol) {
    EquilibriumSet set = prepare(model, split);
    if (set.case_label == BKCase::no_equilibrium) return set;
    const auto subsets = stable_subsets(split.n_stable, model.n);
    std::vector<SubsetOutcome> outcomes(subsets.size());
    const auto count = static_cast<long>(subsets.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < count; ++i) {
        outcomes[static_cast<std::size_t>(i)] = evaluate_subset(model, split, subsets[static_cast<std::size_t>(i)], tol);
    }
    merge(set, outcomes, tol);
    return set;
}

EquilibriumSet enumerate_equilibria(const ModelSpec& model, const PolicyRule& rule, const Tolerances& tol) {
    require_restricted(rule);
    return enumerate_split(model, classify_bk(model, rule, tol).split, tol);
}

namespace reference {

EquilibriumSet enumerate_split(const ModelSpec& model, const SpectralSplit& split, const Tolerances& tol) {
    EquilibriumSet set = prepare(model, split);
    if (set.case_label == BKCase::no_equilibrium) return set;
    std::vector<SubsetOutcome> outcomes;
    for (const auto& subset : stable_subsets(split.n_stable, model.n)) {
        outcomes.push_back(evaluate_subset(model, split, subset, tol));
    }
    merge(set, outcomes, tol);
    return set;
}

EquilibriumSet enumerate_equilibria(const ModelSpec& model, const PolicyRule& rule, const Tolerances& tol) {
    require_restricted(rule);
    return reference::enumerate_split(model, classify_bk(model, rule, tol).split, tol);
}

}  // namespace reference

QuasiOptimalSolution solve_quasi_optimal(const ModelSpec& model, const Matrix& N, const Tolerances& tol) {
    QuasiOptimalSolution out;
    out.N = N;
    out.A_reduced = reduced_transition(model, N);
    out.Q_reduced = reduced_loss_weight(model, N);
    const Matrix B_n = model.B_n();
    out.reduced_controllability = controllability(out.A_reduced, B_n, tol);
    if (!out.reduced_controllability.full) {
        throw ControllabilityError("bk_solver", "solve_quasi_optimal: reduced pair (A', B_n) is not controllable (rank " +
                                                    std::to_string(out.reduced_controllability.rank) + " of " +
                                                    std::to_string(model.n) + ")",
                                   out.reduced_controllability);
    }
    out.reduced = solve_dare(out.A_reduced, B_n, out.Q_reduced, model.rho, model.beta, tol);
    out.rule.F_n = out.reduced.F.row(0);
    out.rule.F_m = RowVector::Zero(model.m);
    out.rule.kind = RuleKind::quasi_optimal;
    return out;
}

PolicyRule observational_equivalence(const PolicyRule& rule, const Matrix& N) {
    if (N.rows() != rule.F_m.size() || N.cols() != rule.F_n.size()) {
        throw UsageError("bk_solver", "observational_equivalence: N must be m x n");
    }
    PolicyRule out;
    out.F_n = rule.F_n - rule.F_m * N;
    out.F_m = RowVector::Zero(rule.F_m.size());
    out.kind = rule.kind;
    return out;
}

}  // namespace relq
