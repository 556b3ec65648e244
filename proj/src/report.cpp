#include "relq/report.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <ostream>
#include <sstream>

#include "relq/analysis.hpp"
#include "relq/bk_solver.hpp"
#include "relq/commitment.hpp"
#include "relq/riccati.hpp"
#include "relq/spectral.hpp"

namespace relq {
namespace {

constexpr int kProbeResetTime = 5;
constexpr double kCovariancePerturbation = 0.1;

ordered_json error_json(const Error& e) {
    ordered_json j;
    j["status"] = e.is_refusal() ? "refused" : "error";
    j["module"] = e.module();
    j["kind"] = to_string(e.kind());
    j["message"] = e.what();
    if (const auto* v = dynamic_cast<const ValidationError*>(&e)) j["violations"] = v->report().violations;
    return j;
}

ordered_json skipped(const std::string& reason) {
    ordered_json j;
    j["status"] = "skipped";
    j["reason"] = reason;
    return j;
}

// Runs named report sections, recording failures in place.
class Sections {
public:
    template <typename Fn>
    bool run(ordered_json& parent, const std::string& key, Fn&& fn) {
        try {
            parent[key] = fn();
            return true;
        } catch (const Error& e) {
            parent[key] = error_json(e);
            (e.is_refusal() ? refused_ : failed_) = true;
        } catch (const std::exception& e) {
            ordered_json j;
            j["status"] = "error";
            j["module"] = "internal";
            j["kind"] = "internal";
            j["message"] = e.what();
            parent[key] = std::move(j);
            failed_ = true;
        }
        return false;
    }

    int exit_code() const { return failed_ ? 1 : refused_ ? 2 : 0; }
    const char* status() const { return failed_ ? "error" : refused_ ? "refused" : "ok"; }

private:
    bool refused_ = false;
    bool failed_ = false;
};

ordered_json rule_json(const PolicyRule& rule) {
    ordered_json j;
    j["kind"] = to_string(rule.kind);
    j["F_n"] = to_json(rule.F_n);
    j["F_m"] = to_json(rule.F_m);
    return j;
}

ordered_json controllability_json(const ControllabilityReport& c) {
    ordered_json j;
    j["rank"] = c.rank;
    j["states"] = c.states;
    j["full"] = c.full;
    j["singular_values"] = to_json(c.singular_values);
    return j;
}

ordered_json split_json(const SpectralSplit& s) {
    ordered_json j;
    j["eigenvalues"] = to_json(s.eigenvalues);
    j["threshold"] = json_number(s.threshold);
    j["n_stable"] = s.n_stable;
    j["n_unit_stable"] = s.n_unit_stable;
    j["borderline"] = to_json(s.borderline);
    j["distinct"] = s.distinct;
    j["diagonalizable"] = s.diagonalizable;
    return j;
}

ordered_json equilibrium_json(const ModelSpec& model, const PolicyRule& rule, const BKSolution& s,
                              const Tolerances& tol, Sections& sections) {
    ordered_json j;
    j["subset"] = to_json(s.chosen_subset);
    j["N"] = to_json(s.N);
    j["conditioning"] = json_number(s.conditioning);
    j["manifold_residual"] = json_number(s.manifold_residual);
    j["equivalent_restricted_rule"] = rule_json(observational_equivalence(rule, s.N));
    sections.run(j, "quasi_optimal", [&] {
        const auto qo = solve_quasi_optimal(model, s.N, tol);
        ordered_json o;
        o["A_reduced"] = to_json(qo.A_reduced);
        o["Q_reduced"] = to_json(qo.Q_reduced);
        o["controllability"] = controllability_json(qo.reduced_controllability);
        o["P"] = to_json(qo.reduced.P);
        o["F"] = to_json(qo.reduced.F);
        o["closed_loop_eigenvalues"] = to_json(qo.reduced.closed_loop_eigenvalues);
        o["rule"] = rule_json(qo.rule);
        return o;
    });
    return j;
}

ordered_json equilibria_json(const ModelSpec& model, const PolicyRule& rule, const EquilibriumSet& set,
                             const Tolerances& tol, Sections& sections) {
    ordered_json j;
    j["rule"] = rule_json(rule);
    j["case"] = to_string(set.case_label);
    j["spectrum"] = split_json(set.split);
    j["count_formula"] = set.count_formula;
    j["upper_bound"] = set.upper_bound;
    j["admissible_count"] = set.solutions.size();
    j["distinct_solutions"] = set.distinct_solutions;
    ordered_json sols = ordered_json::array();
    for (const auto& s : set.solutions) sols.push_back(equilibrium_json(model, rule, s, tol, sections));
    j["equilibria"] = std::move(sols);
    ordered_json rej = ordered_json::array();
    for (const auto& r : set.rejected) {
        ordered_json e;
        e["subset"] = to_json(r.subset);
        e["reason"] = r.reason;
        rej.push_back(std::move(e));
    }
    j["rejected"] = std::move(rej);
    return j;
}

// Classification plus enumeration; rules with F_m != 0 are enumerated on
// their own closed loop.
EquilibriumSet equilibria_under(const ModelSpec& model, const PolicyRule& rule, const Tolerances& tol) {
    if (rule.restricted()) return enumerate_equilibria(model, rule, tol);
    const auto cls = classify_bk(model, rule, tol);
    return enumerate_split(model, cls.split, tol);
}

Matrix first_N(const ModelSpec& model, const PolicyRule& rule, const Tolerances& tol) {
    const auto set = equilibria_under(model, rule, tol);
    if (set.case_label == BKCase::no_equilibrium) {
        throw RefusalError("bk_solver", std::string("no rational expectations equilibrium (case ") +
                                            to_string(set.case_label) + ": " + std::to_string(set.split.n_stable) +
                                            " stable eigenvalues for " + std::to_string(model.n) +
                                            " predetermined variables)");
    }
    if (set.solutions.empty()) throw RefusalError("bk_solver", "every stable subset was rejected");
    return set.solutions.front().N;
}

Vector initial_k(const ModelSpec& model, const RunOptions& opt) {
    if (!opt.k0) return Vector::Ones(model.n);
    if (opt.k0->size() != model.n) throw UsageError("cli", "k0 must have n entries");
    return *opt.k0;
}

PolicyRule default_identification_rule(const ModelSpec& model, const RunOptions& opt) {
    for (const auto& r : opt.rules) {
        if (!r.restricted()) return r;
    }
    PolicyRule r = PolicyRule::zero(model.n, model.m);
    r.F_m.setOnes();
    return r;
}

ordered_json bk_identification_json(const BKIdentificationReport& rep) {
    ordered_json j;
    j["augmented_rule"] = rule_json(rep.augmented);
    j["restricted_rule"] = rule_json(rep.restricted);
    j["max_instrument_gap"] = json_number(rep.max_instrument_gap);
    j["paths_identical"] = rep.paths_identical;
    j["regressor_rank"] = rep.regressor_rank;
    j["expected_rank"] = rep.expected_rank;
    j["rank_deficiency"] = rep.rank_deficiency;
    j["singular_values"] = to_json(rep.singular_values);
    return j;
}

ordered_json commitment_identification_json(const CommitmentIdentificationReport& rep) {
    ordered_json j;
    j["refused"] = rep.refused;
    if (rep.refused) j["reason"] = rep.reason;
    j["attempts"] = rep.attempts;
    j["k0_used"] = to_json(rep.k0_used);
    j["regressor_rank"] = rep.regressor_rank;
    j["full_rank"] = rep.full_rank;
    if (rep.full_rank) {
        j["recovered_phi"] = to_json(rep.recovered_phi);
        j["max_phi_gap"] = json_number(rep.max_phi_gap);
    }
    j["recovered"] = rep.recovered;
    return j;
}

ordered_json bk_identification(const ModelSpec& model, const RunOptions& opt) {
    const PolicyRule rule = default_identification_rule(model, opt);
    const Matrix N = first_N(model, rule, opt.tol);
    return bk_identification_json(identification_experiment_bk(model, rule, N, initial_k(model, opt), opt.horizon, opt.tol));
}

ordered_json commitment_json(const CommitmentSolution& sol, const ModelSpec& model, const Tolerances& tol,
                             Sections& sections) {
    ordered_json j;
    j["P"] = to_json(sol.P);
    j["F"] = to_json(sol.F);
    j["Phi"] = to_json(sol.Phi);
    j["q0_map"] = to_json(sol.q0_map);
    j["T_closed"] = to_json(sol.T_closed);
    j["P_mm_condition"] = json_number(sol.P_mm_condition);
    j["closed_loop_eigenvalues"] = to_json(sol.closed_loop_eigenvalues);
    j["riccati_residual"] = json_number(sol.riccati.residual);
    j["riccati_iterations"] = sol.riccati.iterations;
    j["foc_rate_residual"] = json_number(sol.foc_rate_residual);
    j["foc_costate_residual"] = json_number(sol.foc_costate_residual);
    j["similarity_residual"] = json_number(sol.similarity_residual);
    if (model.m == 1) {
        sections.run(j, "history_rule", [&] {
            const auto h = build_history_rule(sol, tol);
            ordered_json o;
            o["psi_r"] = json_number(h.psi_r);
            o["psi_k0"] = to_json(h.psi_k0);
            o["psi_k1"] = to_json(h.psi_k1);
            o["parameter_count"] = h.parameter_count;
            o["state_count"] = h.state_count;
            o["identified"] = h.identified;
            return o;
        });
    }
    return j;
}

ordered_json header(const std::string& command, const ModelSpec& model, const Tolerances& tol) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = command;
    j["model_digest"] = model_digest(model);
    ordered_json dims;
    dims["n"] = model.n;
    dims["m"] = model.m;
    dims["beta"] = json_number(model.beta);
    dims["rho"] = json_number(model.rho);
    j["model"] = std::move(dims);
    j["config"] = to_json(tol);
    return j;
}

void finish(Report& rep, const Sections& sections) {
    rep.json["status"] = sections.status();
    rep.exit_code = sections.exit_code();
}

std::vector<double> split_numbers(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
        if (used == 0 || used != item.size() || !std::isfinite(v)) {
            throw UsageError("cli", what + ": '" + item + "' is not a number");
        }
        out.push_back(v);
    }
    if (out.empty()) throw UsageError("cli", what + " is empty");
    return out;
}

}  // namespace

std::string model_digest(const ModelSpec& model) {
    const std::string text = save_model(model);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw NumericalError("cli", "SHA-256 computation failed");
    }
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

Vector parse_vector(const std::string& text, int size, const std::string& what) {
    const auto v = split_numbers(text, what);
    if (static_cast<int>(v.size()) != size) {
        throw UsageError("cli", what + " has " + std::to_string(v.size()) + " entries, expected " +
                                    std::to_string(size));
    }
    return Eigen::Map<const Vector>(v.data(), size);
}

PolicyRule parse_rule(const std::string& text, int n, int m) {
    const auto v = split_numbers(text, "rule");
    const RowVector F = Eigen::Map<const RowVector>(v.data(), static_cast<Eigen::Index>(v.size()));
    if (F.size() == n) {
        PolicyRule r = PolicyRule::zero(n, m);
        r.F_n = F;
        return r;
    }
    if (F.size() == n + m) return PolicyRule::from_full(F, n);
    throw UsageError("cli", "rule '" + text + "' needs " + std::to_string(n) + " or " + std::to_string(n + m) +
                                " coefficients");
}

Report run_analyze(const ModelSpec& model, const RunOptions& opt) {
    const Tolerances& tol = opt.tol;
    Report rep;
    Sections sections;
    rep.json = header("analyze", model, tol);

    ordered_json validation;
    const auto v = validate_model(model, tol);
    validation["ok"] = v.ok();
    validation["violations"] = v.violations;
    rep.json["validation"] = std::move(validation);

    const auto dev = deviation_convention(model);
    ordered_json deviations;
    deviations["measure"] = "relative to target, absolute where the target is zero";
    std::vector<std::string> kd, qd;
    for (auto d : dev.k) kd.push_back(to_string(d));
    for (auto d : dev.q) qd.push_back(to_string(d));
    deviations["k"] = kd;
    deviations["q"] = qd;
    rep.json["deviations"] = std::move(deviations);

    const Vector k0 = initial_k(model, opt);

    ordered_json ctrl;
    sections.run(ctrl, "full", [&] { return controllability_json(controllability(model.A, model.B, tol)); });
    rep.json["controllability"] = std::move(ctrl);
    sections.run(rep.json, "open_loop", [&] { return split_json(spectral_split(model.A, model.beta, tol)); });

    std::optional<CommitmentSolution> sol;
    sections.run(rep.json, "commitment", [&] {
        sol = solve_commitment(model, tol);
        return commitment_json(*sol, model, tol, sections);
    });

    std::vector<PolicyRule> bk_rules;
    if (sol) {
        PolicyRule r = PolicyRule::from_full(sol->F, model.n, RuleKind::commitment_as_if);
        r.F_m.setZero();
        bk_rules.push_back(r);
    }
    for (const auto& r : opt.rules) bk_rules.push_back(r);

    ordered_json bk = ordered_json::array();
    if (!sol) {
        ordered_json entry;
        entry["rule"] = "commitment_restricted";
        entry["result"] = skipped("commitment solution unavailable");
        bk.push_back(std::move(entry));
    }
    for (const auto& rule : bk_rules) {
        ordered_json entry;
        sections.run(entry, "result", [&] {
            const auto set = equilibria_under(model, rule, tol);
            if (set.solutions.size() > 1) {
                rep.warnings.push_back("indeterminacy: " + std::to_string(set.solutions.size()) +
                                       " admissible equilibria under one rule");
            }
            return equilibria_json(model, rule, set, tol, sections);
        });
        bk.push_back(std::move(entry));
    }
    rep.json["bk"] = std::move(bk);

    ordered_json exp;
    sections.run(exp, "identification_bk", [&] { return bk_identification(model, opt); });
    if (sol) {
        sections.run(exp, "identification_commitment", [&] {
            return commitment_identification_json(
                identification_experiment_commitment(model, *sol, k0, opt.horizon, opt.seed, tol));
        });
        sections.run(exp, "covariance", [&] {
            std::vector<PolicyRule> bases;
            for (const auto& r : opt.rules) {
                if (r.restricted()) bases.push_back(r);
            }
            bases.push_back(PolicyRule::zero(model.n, model.m));
            bases.push_back(bk_rules.front());
            // first base rule with an admissible saddle manifold
            for (std::size_t i = 0; i < bases.size(); ++i) {
                try {
                    const auto c = covariance_comparison(model, opt.horizon, kCovariancePerturbation, bases[i], k0, tol);
                    ordered_json o;
                    o["moment_measure"] = "equal-weight deterministic trajectory moment (1/T) sum k_t q_t'";
                    o["perturbation"] = json_number(c.perturbation);
                    o["base_rule"] = rule_json(bases[i]);
                    o["N_baseline"] = to_json(c.N_baseline);
                    o["N_perturbed"] = to_json(c.N_perturbed);
                    o["bk_map_gap"] = json_number(c.bk_map_gap);
                    o["bk_map_fixed"] = c.bk_map_fixed;
                    o["bk_moment_baseline"] = to_json(c.bk_moment_baseline);
                    o["bk_moment_perturbed"] = to_json(c.bk_moment_perturbed);
                    o["commitment_moment_baseline"] = to_json(c.commitment_moment_baseline);
                    o["commitment_moment_perturbed"] = to_json(c.commitment_moment_perturbed);
                    o["commitment_moment_gap"] = json_number(c.commitment_moment_gap);
                    o["commitment_map_baseline"] = to_json(c.commitment_map_baseline);
                    o["commitment_map_perturbed"] = to_json(c.commitment_map_perturbed);
                    o["commitment_moves"] = c.commitment_moves;
                    return o;
                } catch (const RefusalError&) {
                    if (i + 1 == bases.size()) throw;
                } catch (const ValidationError& e) {
                    // the perturbed weights are no longer PSD
                    ordered_json o = skipped(e.what());
                    o["perturbation"] = json_number(kCovariancePerturbation);
                    return o;
                }
            }
            return ordered_json{};
        });
        sections.run(exp, "time_inconsistency", [&] {
            const auto p = time_inconsistency_probe(*sol, model, kProbeResetTime, k0, std::max(opt.horizon, 50), tol);
            ordered_json o;
            o["reset_time"] = p.reset_time;
            o["mu_q_at_reset"] = to_json(p.mu_q_at_reset);
            o["q_jump"] = to_json(p.q_jump);
            o["continuation_loss"] = json_number(p.continuation_loss);
            o["reset_loss"] = json_number(p.reset_loss);
            o["committed_growth"] = json_number(p.committed_growth);
            o["reset_growth"] = json_number(p.reset_growth);
            o["repeated_reset_growth"] = json_number(p.repeated_reset_growth);
            o["committed_bounded"] = p.committed_bounded;
            o["reset_bounded"] = p.reset_bounded;
            o["repeated_reset_bounded"] = p.repeated_reset_bounded;
            return o;
        });
    } else {
        exp["identification_commitment"] = skipped("commitment solution unavailable");
        exp["covariance"] = skipped("commitment solution unavailable");
        exp["time_inconsistency"] = skipped("commitment solution unavailable");
    }
    rep.json["experiments"] = std::move(exp);
    rep.json["warnings"] = rep.warnings;
    finish(rep, sections);
    return rep;
}

Report run_enumerate(const ModelSpec& model, const PolicyRule& rule, const RunOptions& opt) {
    if (!rule.restricted()) {
        throw UsageError("cli", "enumerate needs a rule on predetermined variables only (F_m = 0)");
    }
    Report rep;
    Sections sections;
    rep.json = header("enumerate", model, opt.tol);
    sections.run(rep.json, "result", [&] {
        const auto set = enumerate_equilibria(model, rule, opt.tol);
        if (set.case_label == BKCase::no_equilibrium) {
            throw RefusalError("bk_solver", std::string("no rational expectations equilibrium (case ") +
                                                to_string(set.case_label) + ": " + std::to_string(set.split.n_stable) +
                                                " stable eigenvalues for " + std::to_string(model.n) +
                                                " predetermined variables)");
        }
        if (set.solutions.size() > 1) {
            rep.warnings.push_back("indeterminacy: " + std::to_string(set.solutions.size()) +
                                   " admissible equilibria (count formula " + std::to_string(set.count_formula) + ")");
        }
        return equilibria_json(model, rule, set, opt.tol, sections);
    });
    rep.json["warnings"] = rep.warnings;
    finish(rep, sections);
    return rep;
}

Report run_simulate(const ModelSpec& model, SolutionKind kind, const RunOptions& opt, std::ostream* csv) {
    if (opt.horizon < 1) throw UsageError("cli", "horizon must be at least 1");
    const Vector k0 = initial_k(model, opt);
    Report rep;
    Sections sections;
    rep.json = header("simulate", model, opt.tol);
    sections.run(rep.json, "summary", [&] {
        ordered_json o;
        Trajectory tr;
        if (kind == SolutionKind::commitment) {
            const auto sol = solve_commitment(model, opt.tol);
            const Vector x0 = sol.initial_state(k0);
            tr = simulate(model, commitment_law(model, sol), x0, opt.horizon, opt.tol);
            o["solution"] = "commitment";
            o["value"] = json_number(loss_of_state(sol.riccati, sol.to_y(x0)));
        } else {
            const PolicyRule rule = opt.rules.empty() ? PolicyRule::zero(model.n, model.m) : opt.rules.front();
            const Matrix N = first_N(model, rule, opt.tol);
            tr = simulate(model, bk_law(model, rule, N), k0, opt.horizon, opt.tol);
            o["solution"] = "bk";
            o["rule"] = rule_json(rule);
            o["N"] = to_json(N);
        }
        o["horizon"] = tr.horizon;
        o["discounted_loss"] = json_number(tr.discounted_loss);
        o["growth_exponent"] = json_number(tr.growth_exponent);
        o["divergent"] = tr.divergent;
        o["law_residual"] = json_number(tr.law_residual);
        o["terminal_state"] = to_json(tr.terminal_state);
        if (tr.horizon >= 50 || tr.divergent) {
            const auto b = check_boundedness(tr, model.beta, opt.tol);
            o["threshold_exponent"] = json_number(b.threshold_exponent);
            o["bounded"] = b.bound_satisfied;
        } else {
            o["bounded"] = "undetermined (horizon below 50)";
        }
        if (csv) write_trajectory_csv(*csv, model, tr);
        return o;
    });
    finish(rep, sections);
    return rep;
}

Report run_identify(const ModelSpec& model, const RunOptions& opt) {
    const Vector k0 = initial_k(model, opt);
    Report rep;
    Sections sections;
    rep.json = header("identify", model, opt.tol);
    sections.run(rep.json, "identification_bk", [&] { return bk_identification(model, opt); });
    sections.run(rep.json, "identification_commitment", [&] {
        const auto sol = solve_commitment(model, opt.tol);
        ordered_json o = commitment_identification_json(
            identification_experiment_commitment(model, sol, k0, opt.horizon, opt.seed, opt.tol));
        o["phi"] = to_json(sol.Phi);
        return o;
    });
    finish(rep, sections);
    return rep;
}

Report error_report(const std::string& command, const std::exception& e) {
    Report rep;
    rep.json["schema_version"] = kSchemaVersion;
    rep.json["command"] = command;
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        rep.json["error"] = error_json(*err);
        rep.exit_code = err->is_refusal() ? 2 : 1;
    } else {
        ordered_json j;
        j["status"] = "error";
        j["module"] = "internal";
        j["message"] = e.what();
        rep.json["error"] = std::move(j);
        rep.exit_code = 1;
    }
    rep.json["status"] = rep.exit_code == 2 ? "refused" : "error";
    return rep;
}

}  // namespace relq
