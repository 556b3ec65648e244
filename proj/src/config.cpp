#include "relq/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <variant>

#include "relq/errors.hpp"

namespace relq {
namespace {

using Field = std::variant<double Tolerances::*, int Tolerances::*>;

struct Entry {
    const char* key;
    Field field;
};

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        {"symmetry", &Tolerances::symmetry},
        {"psd", &Tolerances::psd},
        {"stability_margin", &Tolerances::stability_margin},
        {"distinctness", &Tolerances::distinctness},
        {"imag_residual", &Tolerances::imag_residual},
        {"conditioning", &Tolerances::conditioning},
        {"rank_relative", &Tolerances::rank_relative},
        {"riccati_step", &Tolerances::riccati_step},
        {"riccati_residual", &Tolerances::riccati_residual},
        {"riccati_max_iter", &Tolerances::riccati_max_iter},
        {"mirror", &Tolerances::mirror},
        {"path_equality", &Tolerances::path_equality},
        {"foc", &Tolerances::foc},
        {"manifold", &Tolerances::manifold},
        {"distinct_n", &Tolerances::distinct_n},
        {"placement", &Tolerances::placement},
        {"identification", &Tolerances::identification},
        {"covariance_change", &Tolerances::covariance_change},
        {"divergence_norm", &Tolerances::divergence_norm},
    };
    return table;
}

const Entry& find_entry(const std::string& key) {
    for (const auto& e : entries()) {
        if (key == e.key) return e;
    }
    throw UsageError("config", "unknown tolerance key '" + key + "'");
}

double parse_number(const std::string& key, const std::string& text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw UsageError("config", "tolerance '" + key + "': not a finite number: '" + text + "'");
    }
    return value;
}

void assign(Tolerances& tol, const Entry& e, double value) {
    if (std::holds_alternative<int Tolerances::*>(e.field)) {
        if (value < 1 || value != std::floor(value)) {
            throw UsageError("config", std::string("tolerance '") + e.key + "' must be a positive integer");
        }
        tol.*std::get<int Tolerances::*>(e.field) = static_cast<int>(value);
    } else {
        if (!(value > 0.0)) {
            throw UsageError("config", std::string("tolerance '") + e.key + "' must be positive");
        }
        tol.*std::get<double Tolerances::*>(e.field) = value;
    }
}

}  // namespace

const std::vector<std::string>& tolerance_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& e : entries()) out.emplace_back(e.key);
        return out;
    }();
    return keys;
}

void set_tolerance(Tolerances& tol, const std::string& key, const std::string& value) {
    const Entry& e = find_entry(key);
    assign(tol, e, parse_number(key, value));
}

void apply_override(Tolerances& tol, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw UsageError("config", "override must have the form key=value, got '" + assignment + "'");
    }
    set_tolerance(tol, assignment.substr(0, eq), assignment.substr(eq + 1));
}

Tolerances tolerances_from_json(const nlohmann::json& j, Tolerances base) {
    if (!j.is_object()) throw ParseError("tolerance config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        const Entry& e = find_entry(key);
        if (!value.is_number()) throw ParseError("tolerance config key '" + key + "' must be a number");
        assign(base, e, value.get<double>());
    }
    return base;
}

Tolerances load_tolerances(const std::string& path, Tolerances base) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open tolerance config '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("tolerance config '" + path + "': " + e.what());
    }
    return tolerances_from_json(j, base);
}

nlohmann::ordered_json to_json(const Tolerances& tol) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& e : entries()) {
        if (std::holds_alternative<int Tolerances::*>(e.field)) {
            j[e.key] = tol.*std::get<int Tolerances::*>(e.field);
        } else {
            j[e.key] = tol.*std::get<double Tolerances::*>(e.field);
        }
    }
    return j;
}

}  // namespace relq
