#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace relq {

/// Every numerical threshold used by the solvers, in one place.
///
/// Defaults are the values the library is tested against. A config file
/// (JSON object of key -> number) or `key=value` overrides may replace any
/// subset of them; unknown keys are rejected.
struct Tolerances {
    double symmetry = 1e-12;          // |Q - Q^T| max entry
    double psd = 1e-10;               // smallest eigenvalue of Q may reach -psd
    double stability_margin = 1e-8;   // |lambda| must be below 1/sqrt(beta) - margin
    double distinctness = 1e-7;       // relative to the largest modulus
    double imag_residual = 1e-8;      // exported real matrices
    double conditioning = 1e12;       // M_mm, P_mm admissibility
    double rank_relative = 1e-12;     // sigma_max * dim * rank_relative
    double riccati_step = 1e-12;      // fixed-point convergence
    double riccati_residual = 1e-9;   // DARE residual acceptance
    int riccati_max_iter = 100000;
    double mirror = 1e-6;             // eigenvalue mirror pairing
    double path_equality = 1e-10;     // identical instrument paths
    double foc = 1e-8;                // first-order condition residuals
    double manifold = 1e-8;           // saddle manifold invariance
    double distinct_n = 1e-8;         // distinct equilibria N gap
    double placement = 1e-6;          // pole placement round trip
    double identification = 1e-6;     // least-squares recovery of Phi
    double covariance_change = 1e-6;  // commitment moment sensitivity
    double divergence_norm = 1e12;    // simulation cutoff
};

/// Names of all configurable keys, in canonical order.
const std::vector<std::string>& tolerance_keys();

/// Sets one key from its textual value; throws UsageError on unknown key or bad value.
void set_tolerance(Tolerances& tol, const std::string& key, const std::string& value);

/// Applies `key=value`.
void apply_override(Tolerances& tol, const std::string& assignment);

Tolerances tolerances_from_json(const nlohmann::json& j, Tolerances base = {});
Tolerances load_tolerances(const std::string& path, Tolerances base = {});
nlohmann::ordered_json to_json(const Tolerances& tol);

}  // namespace relq
