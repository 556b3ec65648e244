#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "relq/config.hpp"
#include "relq/json_format.hpp"
#include "relq/model.hpp"

namespace relq {

inline constexpr int kSchemaVersion = 1;

/// Hex SHA-256 of the canonical model serialization.
std::string model_digest(const ModelSpec& model);

/// "f1,f2,..." with either n entries (restricted rule) or n+m entries.
PolicyRule parse_rule(const std::string& text, int n, int m);
/// "v1,v2,..." with exactly `size` entries.
Vector parse_vector(const std::string& text, int size, const std::string& what);

struct RunOptions {
    std::vector<PolicyRule> rules;
    std::optional<Vector> k0;  // defaults to ones(n)
    int horizon = 500;
    std::uint64_t seed = 0;
    Tolerances tol;
};

/// A finished report with the process exit code it maps to:
/// 0 all sections complete, 2 a mathematical refusal, 1 anything else.
struct Report {
    ordered_json json;
    int exit_code = 0;
    std::vector<std::string> warnings;
};

Report run_analyze(const ModelSpec& model, const RunOptions& opt);

/// Every equilibrium under one rule restricted to k (F_m must be zero).
Report run_enumerate(const ModelSpec& model, const PolicyRule& rule, const RunOptions& opt);

enum class SolutionKind { bk, commitment };

/// Simulates the chosen solution; writes the CSV when `csv` is set.
Report run_simulate(const ModelSpec& model, SolutionKind kind, const RunOptions& opt, std::ostream* csv);

/// Both identification experiments.
Report run_identify(const ModelSpec& model, const RunOptions& opt);

/// Error document for failures before a model is available.
Report error_report(const std::string& command, const std::exception& e);

}  // namespace relq
