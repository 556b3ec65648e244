#include "relq/analysis.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "relq/json_format.hpp"

namespace relq {
namespace {

Matrix shock_rows(const ModelSpec& model, const Matrix& to_x) {
    if (!model.gamma || model.gamma->cols() == 0) return {};
    return to_x * *model.gamma;
}

Vector shock_at(const ModelSpec& model, int t) {
    if (model.z_path.empty()) return Vector::Zero(model.gamma ? model.gamma->cols() : 0);
    return model.z_path[static_cast<std::size_t>(t)];
}

Matrix first_admissible_N(const ModelSpec& model, const PolicyRule& rule, const Tolerances& tol) {
    const auto set = enumerate_equilibria(model, rule, tol);
    if (set.case_label == BKCase::no_equilibrium) {
        throw RefusalError("analysis", std::string("no rational expectations equilibrium (case ") +
                                           to_string(set.case_label) + ") under the base rule");
    }
    if (set.solutions.empty()) {
        throw RefusalError("analysis", "every stable subset was rejected; no admissible saddle manifold");
    }
    return set.solutions.front().N;
}

}  // namespace

ClosedLoopLaw rule_law(const ModelSpec& model, const PolicyRule& rule) {
    const int d = model.dim();
    const RowVector F = rule.full();
    ClosedLoopLaw law;
    law.name = "rule";
    law.transition = model.A - model.B * F;
    law.to_state = Matrix::Identity(d, d);
    law.rule = -F;
    law.shock_map = shock_rows(model, Matrix::Identity(d, d));
    return law;
}

ClosedLoopLaw bk_law(const ModelSpec& model, const PolicyRule& rule, const Matrix& N) {
    const int n = model.n, m = model.m;
    if (N.rows() != m || N.cols() != n) throw UsageError("analysis", "bk_law: N must be m x n");
    const Matrix C = model.A - model.B * rule.full();
    ClosedLoopLaw law;
    law.name = "saddle_path";
    law.transition = C.topLeftCorner(n, n) - C.topRightCorner(n, m) * N;
    law.to_state.resize(n + m, n);
    law.to_state.topRows(n) = Matrix::Identity(n, n);
    law.to_state.bottomRows(m) = -N;
    law.rule = -(rule.F_n - rule.F_m * N);
    // Shocks are not propagated along the saddle path: anticipated z would
    // shift the manifold itself.
    return law;
}

ClosedLoopLaw commitment_law(const ModelSpec& model, const CommitmentSolution& sol) {
    ClosedLoopLaw law;
    law.name = "commitment";
    law.transition = sol.T_closed;
    law.to_state = sol.S;
    law.rule = sol.Phi;
    law.shock_map = shock_rows(model, sol.S_inv);
    law.mu_offset = sol.n;
    return law;
}

Vector Trajectory::y(int t) const {
    Vector out(k.cols() + q.cols());
    out << k.row(t).transpose(), q.row(t).transpose();
    return out;
}

double growth_exponent(const std::vector<double>& norms) {
    const std::size_t T = norms.size();
    double st = 0, sl = 0, stt = 0, stl = 0;
    int count = 0;
    for (std::size_t t = T / 2; t < T; ++t) {
        if (!(norms[t] > 0.0) || !std::isfinite(norms[t])) continue;
        const double x = static_cast<double>(t), y = std::log(norms[t]);
        st += x;
        sl += y;
        stt += x * x;
        stl += x * y;
        ++count;
    }
    if (count < 2) return -std::numeric_limits<double>::infinity();
    const double denom = count * stt - st * st;
    return (count * stl - st * sl) / denom;
}

Trajectory simulate(const ModelSpec& model, const ClosedLoopLaw& law, const Vector& x0, int T, const Tolerances& tol) {
    if (T < 1) throw UsageError("analysis", "simulate: horizon must be at least 1");
    const Eigen::Index dx = law.transition.rows();
    if (law.transition.cols() != dx || x0.size() != dx || law.to_state.cols() != dx ||
        law.to_state.rows() != model.dim() || law.rule.size() != dx) {
        throw UsageError("analysis", "simulate: initial state does not match the law's dimensions");
    }
    const bool shocks = law.shock_map.size() > 0;
    if (shocks && !model.z_path.empty() && model.z_path.size() < static_cast<std::size_t>(T)) {
        throw UsageError("analysis", "simulate: exogenous path shorter than the horizon");
    }
    const int n = model.n, m = model.m;

    Trajectory tr;
    tr.k.resize(T, n);
    tr.q.resize(T, m);
    tr.r.resize(T);
    if (law.mu_offset >= 0) tr.mu_q = Matrix(T, m);

    std::vector<double> norms;
    norms.reserve(static_cast<std::size_t>(T));
    Vector x = x0;
    double discount = 1.0;
    int t = 0;
    for (; t < T; ++t) {
        const Vector y = law.to_state * x;
        const double r = law.rule.dot(x);
        tr.k.row(t) = y.head(n).transpose();
        tr.q.row(t) = y.tail(m).transpose();
        tr.r(t) = r;
        if (tr.mu_q) tr.mu_q->row(t) = x.segment(law.mu_offset, m).transpose();
        tr.discounted_loss += discount * (y.dot(model.Q * y) + model.rho * r * r);
        discount *= model.beta;
        norms.push_back(y.norm());

        Vector x_next = law.transition * x;
        Vector y_model = model.A * y + model.B.col(0) * r;
        if (shocks) {
            const Vector z = shock_at(model, t);
            x_next += law.shock_map * z;
            y_model += *model.gamma * z;
        }
        const Vector y_next = law.to_state * x_next;
        tr.law_residual = std::max(tr.law_residual, max_abs(Vector(y_next - y_model)) / (1.0 + max_abs(y)));
        x = x_next;
        if (!y_next.allFinite() || y_next.norm() > tol.divergence_norm) {
            tr.divergent = true;
            ++t;
            break;
        }
    }
    tr.horizon = t;
    if (t < T) {
        tr.k.conservativeResize(t, n);
        tr.q.conservativeResize(t, m);
        tr.r.conservativeResize(t);
        if (tr.mu_q) tr.mu_q->conservativeResize(t, m);
    }
    tr.terminal_state = law.to_state * x;
    tr.growth_exponent = growth_exponent(norms);
    return tr;
}

BoundednessReport check_boundedness(const Trajectory& traj, double beta, const Tolerances& tol) {
    if (traj.horizon < 50 && !traj.divergent) {
        throw UsageError("analysis", "check_boundedness: needs a trajectory of at least 50 periods");
    }
    BoundednessReport rep;
    rep.growth_exponent = traj.growth_exponent;
    rep.threshold_exponent = std::log(1.0 / std::sqrt(beta));
    rep.bound_satisfied = !traj.divergent && traj.growth_exponent < rep.threshold_exponent - tol.stability_margin;
    return rep;
}

int numerical_rank(const Matrix& x, const Tolerances& tol, std::vector<double>* singular_values) {
    if (x.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(x);
    const Vector s = svd.singularValues();
    if (singular_values) singular_values->assign(s.data(), s.data() + s.size());
    const double cutoff = s(0) * static_cast<double>(std::max(x.rows(), x.cols())) * tol.rank_relative;
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) > cutoff ? 1 : 0;
    return rank;
}

BKIdentificationReport identification_experiment_bk(const ModelSpec& model, const PolicyRule& rule, const Matrix& N,
                                                    const Vector& k0, int T, const Tolerances& tol) {
    if (k0.size() != model.n) throw UsageError("analysis", "identification: k0 must have n entries");
    BKIdentificationReport rep;
    rep.augmented = rule;
    rep.restricted = observational_equivalence(rule, N);

    const auto a = simulate(model, bk_law(model, rep.augmented, N), k0, T, tol);
    const auto b = simulate(model, bk_law(model, rep.restricted, N), k0, T, tol);
    const Eigen::Index len = std::min(a.r.size(), b.r.size());
    rep.max_instrument_gap = max_abs(Vector(a.r.head(len) - b.r.head(len)));
    rep.paths_identical = a.horizon == b.horizon && rep.max_instrument_gap <= tol.path_equality;

    Matrix X(a.horizon, model.dim());
    X << a.k, a.q;
    rep.regressor_rank = numerical_rank(X, tol, &rep.singular_values);
    rep.expected_rank = model.n;
    rep.rank_deficiency = model.dim() - rep.regressor_rank;
    return rep;
}

CommitmentIdentificationReport identification_experiment_commitment(const ModelSpec& model,
                                                                    const CommitmentSolution& sol, const Vector& k0,
                                                                    int T, std::uint64_t seed, const Tolerances& tol) {
    if (k0.size() != model.n) throw UsageError("analysis", "identification: k0 must have n entries");
    CommitmentIdentificationReport rep;
    rep.k0_used = k0;
    if (k0.isZero(0.0)) {
        rep.refused = true;
        rep.reason = "k0 = 0 with mu_q,0 = 0 gives the zero path; nothing to identify";
        return rep;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 0.1 * (1.0 + max_abs(k0));
    const int d = model.dim();

    Vector k = k0;
    for (int attempt = 0; attempt < 4; ++attempt) {
        rep.attempts = attempt + 1;
        rep.k0_used = k;
        const auto tr = simulate(model, commitment_law(model, sol), sol.initial_state(k), T, tol);
        Matrix X(tr.horizon, d);
        X << tr.k, *tr.mu_q;
        rep.regressor_rank = numerical_rank(X, tol);
        rep.full_rank = rep.regressor_rank == d;
        if (rep.full_rank) {
            rep.recovered_phi = X.colPivHouseholderQr().solve(tr.r).transpose();
            rep.max_phi_gap = max_abs(RowVector(rep.recovered_phi - sol.Phi));
            rep.recovered = rep.max_phi_gap <= tol.identification;
            return rep;
        }
        k = k0;
        for (Eigen::Index i = 0; i < k.size(); ++i) k(i) += scale * normal(rng);
    }
    rep.refused = true;
    rep.reason = "regressors (k, mu_q) stayed rank deficient after perturbing k0";
    return rep;
}

Matrix cross_moment(const Trajectory& traj) {
    if (traj.horizon == 0) return Matrix::Zero(traj.k.cols(), traj.q.cols());
    return traj.k.transpose() * traj.q / static_cast<double>(traj.horizon);
}

Matrix regression_map(const Trajectory& traj) {
    // G' solves k G' = q in least squares
    return traj.k.completeOrthogonalDecomposition().solve(traj.q).transpose();
}

ModelSpec perturb_cross_weights(const ModelSpec& model, double perturbation, const Tolerances& tol) {
    ModelSpec out = model;
    out.Q.topRightCorner(model.n, model.m).array() += perturbation;
    out.Q.bottomLeftCorner(model.m, model.n).array() += perturbation;
    auto report = validate_model(out, tol);
    if (!report.ok()) throw ValidationError(std::move(report));
    return out;
}

CovarianceReport covariance_comparison(const ModelSpec& model, int T, double perturbation,
                                       const std::optional<PolicyRule>& base_rule, const std::optional<Vector>& k0,
                                       const Tolerances& tol) {
    const Vector k_init = k0 ? *k0 : Vector::Ones(model.n);
    if (k_init.size() != model.n) throw UsageError("analysis", "covariance_comparison: k0 must have n entries");
    const PolicyRule rule = base_rule ? *base_rule : PolicyRule::zero(model.n, model.m);
    const ModelSpec perturbed = perturb_cross_weights(model, perturbation, tol);

    CovarianceReport rep;
    rep.perturbation = perturbation;
    rep.N_baseline = first_admissible_N(model, rule, tol);
    rep.N_perturbed = first_admissible_N(perturbed, rule, tol);
    rep.bk_map_gap = max_abs(Matrix(rep.N_baseline - rep.N_perturbed));
    rep.bk_map_fixed = rep.bk_map_gap < tol.path_equality;

    const auto bk_a = simulate(model, bk_law(model, rule, rep.N_baseline), k_init, T, tol);
    const auto bk_b = simulate(perturbed, bk_law(perturbed, rule, rep.N_perturbed), k_init, T, tol);
    rep.bk_data_map_baseline = regression_map(bk_a);
    rep.bk_data_map_perturbed = regression_map(bk_b);
    rep.bk_moment_baseline = cross_moment(bk_a);
    rep.bk_moment_perturbed = cross_moment(bk_b);

    const auto sol_a = solve_commitment(model, tol);
    const auto sol_b = solve_commitment(perturbed, tol);
    const auto c_a = simulate(model, commitment_law(model, sol_a), sol_a.initial_state(k_init), T, tol);
    const auto c_b = simulate(perturbed, commitment_law(perturbed, sol_b), sol_b.initial_state(k_init), T, tol);
    rep.commitment_moment_baseline = cross_moment(c_a);
    rep.commitment_moment_perturbed = cross_moment(c_b);
    rep.commitment_moment_gap = max_abs(Matrix(rep.commitment_moment_baseline - rep.commitment_moment_perturbed));
    rep.commitment_map_baseline = regression_map(c_a);
    rep.commitment_map_perturbed = regression_map(c_b);
    rep.commitment_moves = rep.commitment_moment_gap > tol.covariance_change;
    return rep;
}

void write_trajectory_csv(std::ostream& out, const ModelSpec& model, const Trajectory& traj) {
    out << 't';
    for (int i = 0; i < model.dim(); ++i) out << ',' << model.state_name(i);
    if (traj.mu_q) {
        for (int j = 0; j < model.m; ++j) out << ",mu_" << model.state_name(model.n + j);
    }
    out << ",r\n";
    for (int t = 0; t < traj.horizon; ++t) {
        out << t;
        for (Eigen::Index i = 0; i < traj.k.cols(); ++i) out << ',' << format_double(traj.k(t, i));
        for (Eigen::Index j = 0; j < traj.q.cols(); ++j) out << ',' << format_double(traj.q(t, j));
        if (traj.mu_q) {
            for (Eigen::Index j = 0; j < traj.mu_q->cols(); ++j) out << ',' << format_double((*traj.mu_q)(t, j));
        }
        out << ',' << format_double(traj.r(t)) << '\n';
    }
}

}  // namespace relq
