#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relq/config.hpp"
#include "relq/errors.hpp"
#include "relq/json_format.hpp"
#include "relq/types.hpp"

namespace relq {

/// Linear-quadratic rational-expectations policy problem.
///
/// The state stacks n predetermined variables k on top of m
/// non-predetermined (jump) variables q. All solvers work on deviations
/// from the targets and on the homogeneous system; `gamma` and `z_path`
/// only enter simulation.
struct ModelSpec {
    int n = 0;
    int m = 0;
    double beta = 1.0;
    double rho = 1.0;
    Matrix A;  // (n+m) x (n+m)
    Matrix B;  // (n+m) x 1
    Matrix Q;  // (n+m) x (n+m), symmetric PSD
    std::optional<Matrix> gamma;  // (n+m) x k_z
    std::vector<Vector> z_path;   // each of length k_z
    Vector k_star;                // defaults to ones(n)
    Vector q_star;                // defaults to ones(m)
    double r_star = 0.0;
    std::vector<std::string> var_names;  // empty or n+m labels

    int dim() const { return n + m; }

    Matrix A_nn() const { return A.topLeftCorner(n, n); }
    Matrix A_nm() const { return A.topRightCorner(n, m); }
    Matrix A_mn() const { return A.bottomLeftCorner(m, n); }
    Matrix A_mm() const { return A.bottomRightCorner(m, m); }
    Matrix B_n() const { return B.topRows(n); }
    Matrix B_m() const { return B.bottomRows(m); }
    Matrix Q_nn() const { return Q.topLeftCorner(n, n); }
    Matrix Q_nm() const { return Q.topRightCorner(n, m); }
    Matrix Q_mn() const { return Q.bottomLeftCorner(m, n); }
    Matrix Q_mm() const { return Q.bottomRightCorner(m, m); }

    /// Label of state component i (k1.., q1.. unless var_names is set).
    std::string state_name(int i) const;
};

enum class RuleKind { adhoc, quasi_optimal, commitment_as_if };

const char* to_string(RuleKind kind);

/// Linear stateless rule r_t - r* = -F_n k_t - F_m q_t (deviations at date t).
struct PolicyRule {
    RowVector F_n;
    RowVector F_m;
    RuleKind kind = RuleKind::adhoc;

    static PolicyRule from_full(const RowVector& F, int n, RuleKind kind = RuleKind::adhoc);
    static PolicyRule zero(int n, int m, RuleKind kind = RuleKind::adhoc);

    RowVector full() const;
    double apply(const Vector& k, const Vector& q) const;
    bool restricted() const { return F_m.size() == 0 || F_m.isZero(0.0); }
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

class ValidationError : public Error {
public:
    explicit ValidationError(ValidationReport report);
    const ValidationReport& report() const noexcept { return report_; }

private:
    ValidationReport report_;
};

/// Checks dimensions, symmetry and PSD of Q, discount and weight ranges.
/// Never throws for a malformed model; every problem becomes a violation.
ValidationReport validate_model(const ModelSpec& spec, const Tolerances& tol = {});

/// Parses the JSON model format and validates. Throws ParseError for
/// syntax, missing fields or wrong shapes; ValidationError otherwise.
ModelSpec parse_model(const std::string& text, const Tolerances& tol = {});
ModelSpec load_model(const std::filesystem::path& path, const Tolerances& tol = {});

/// Canonical serialization; parse_model(save_model(x)) == x and saving a
/// canonical file reproduces it byte for byte.
std::string save_model(const ModelSpec& spec);
ordered_json model_to_json(const ModelSpec& spec);

// Loss deviations are (x - x*)/x* per component, or x - x* where the
// target component is zero.
enum class DeviationMode { relative, absolute };

const char* to_string(DeviationMode mode);

struct DeviationConvention {
    std::vector<DeviationMode> k;
    std::vector<DeviationMode> q;
};

DeviationConvention deviation_convention(const ModelSpec& spec);
Vector to_deviation(const Vector& level, const Vector& target);
Vector to_level(const Vector& deviation, const Vector& target);

}  // namespace relq
