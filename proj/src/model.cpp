#include "relq/model.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace relq {
namespace {

using json = nlohmann::json;

std::string shape(const Matrix& x) {
    return std::to_string(x.rows()) + "x" + std::to_string(x.cols());
}

double number_at(const json& j, const std::string& field) {
    if (!j.is_number()) throw ParseError("field '" + field + "': expected a number");
    return j.get<double>();
}

Matrix read_matrix(const json& j, const std::string& field, bool allow_column_vector = false) {
    if (!j.is_array()) throw ParseError("field '" + field + "': expected an array of rows");
    if (allow_column_vector && !j.empty() && j.front().is_number()) {
        Matrix out(static_cast<Eigen::Index>(j.size()), 1);
        for (std::size_t i = 0; i < j.size(); ++i) {
            out(static_cast<Eigen::Index>(i), 0) = number_at(j[i], field + "[" + std::to_string(i) + "]");
        }
        return out;
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = 0;
    if (rows > 0) {
        if (!j.front().is_array()) throw ParseError("field '" + field + "': row 0 is not an array");
        cols = static_cast<Eigen::Index>(j.front().size());
    }
    Matrix out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        const std::string where = field + "[" + std::to_string(i) + "]";
        if (!row.is_array()) throw ParseError("field '" + where + "': expected an array of numbers");
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw ParseError("field '" + field + "': dimension mismatch, row " + std::to_string(i) + " has " +
                             std::to_string(row.size()) + " entries, row 0 has " + std::to_string(cols));
        }
        for (Eigen::Index k = 0; k < cols; ++k) {
            out(i, k) = number_at(row[static_cast<std::size_t>(k)], where + "[" + std::to_string(k) + "]");
        }
    }
    return out;
}

Vector read_vector(const json& j, const std::string& field) {
    if (!j.is_array()) throw ParseError("field '" + field + "': expected an array of numbers");
    Vector out(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = number_at(j[i], field + "[" + std::to_string(i) + "]");
    }
    return out;
}

int read_count(const json& j, const std::string& field) {
    if (!j.is_number_integer()) throw ParseError("field '" + field + "': expected an integer");
    return j.get<int>();
}

bool all_finite(const Matrix& x) { return x.allFinite(); }

void check_shape(std::vector<std::string>& out, const std::string& name, const Matrix& x, Eigen::Index rows,
                 Eigen::Index cols) {
    if (x.rows() != rows || x.cols() != cols) {
        out.push_back("dimension mismatch: " + name + " is " + shape(x) + ", expected " + std::to_string(rows) +
                      "x" + std::to_string(cols));
    } else if (!all_finite(x)) {
        out.push_back(name + " has non-finite entries");
    }
}

}  // namespace

std::string ModelSpec::state_name(int i) const {
    if (static_cast<int>(var_names.size()) == dim()) return var_names[static_cast<std::size_t>(i)];
    if (i < n) return n == 1 ? "k" : "k" + std::to_string(i + 1);
    return m == 1 ? "q" : "q" + std::to_string(i - n + 1);
}

const char* to_string(RuleKind kind) {
    switch (kind) {
        case RuleKind::adhoc: return "adhoc";
        case RuleKind::quasi_optimal: return "quasi_optimal";
        case RuleKind::commitment_as_if: return "commitment_as_if";
    }
    return "adhoc";
}

PolicyRule PolicyRule::from_full(const RowVector& F, int n, RuleKind kind) {
    if (n < 0 || n > F.size()) throw UsageError("model", "rule split index out of range");
    PolicyRule r;
    r.F_n = F.head(n);
    r.F_m = F.tail(F.size() - n);
    r.kind = kind;
    return r;
}

PolicyRule PolicyRule::zero(int n, int m, RuleKind kind) {
    PolicyRule r;
    r.F_n = RowVector::Zero(n);
    r.F_m = RowVector::Zero(m);
    r.kind = kind;
    return r;
}

RowVector PolicyRule::full() const {
    RowVector F(F_n.size() + F_m.size());
    F << F_n, F_m;
    return F;
}

double PolicyRule::apply(const Vector& k, const Vector& q) const {
    return -(F_n.dot(k) + F_m.dot(q));
}

namespace {
std::string join_violations(const ValidationReport& report) {
    std::ostringstream os;
    os << "model validation failed (" << report.violations.size() << " violation"
       << (report.violations.size() == 1 ? "" : "s") << ")";
    for (const auto& v : report.violations) os << "\n  - " << v;
    return os.str();
}
}  // namespace

ValidationError::ValidationError(ValidationReport report)
    : Error(ErrorKind::validation, "model", join_violations(report)), report_(std::move(report)) {}

ValidationReport validate_model(const ModelSpec& spec, const Tolerances& tol) {
    ValidationReport rep;
    auto& v = rep.violations;
    if (spec.n < 1) v.push_back("n must be >= 1, got " + std::to_string(spec.n));
    if (spec.m < 1) v.push_back("m must be >= 1, got " + std::to_string(spec.m));
    if (!(spec.beta > 0.0 && spec.beta <= 1.0)) {
        v.push_back("discount out of range: beta must lie in (0, 1], got " + format_double(spec.beta));
    }
    if (!(spec.rho > 0.0) || !std::isfinite(spec.rho)) {
        v.push_back("rho must be a positive finite number, got " + format_double(spec.rho));
    }
    if (!std::isfinite(spec.r_star)) v.push_back("r_star must be finite");
    if (spec.n < 1 || spec.m < 1) return rep;

    const Eigen::Index d = spec.dim();
    check_shape(v, "A", spec.A, d, d);
    check_shape(v, "B", spec.B, d, 1);
    const auto before_q = v.size();
    check_shape(v, "Q", spec.Q, d, d);
    if (v.size() == before_q) {
        const double asym = max_abs(Matrix(spec.Q - spec.Q.transpose()));
        if (asym > tol.symmetry) {
            v.push_back("Q asymmetric: max |Q - Q^T| = " + format_double(asym) + " (Q_mn must equal Q_nm^T)");
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (spec.Q + spec.Q.transpose()), Eigen::EigenvaluesOnly);
        const double min_eig = es.eigenvalues().minCoeff();
        if (min_eig < -tol.psd) {
            v.push_back("Q not positive semi-definite: smallest eigenvalue " + format_double(min_eig));
        }
    }
    if (spec.gamma) {
        if (spec.gamma->rows() != d) {
            v.push_back("dimension mismatch: gamma has " + std::to_string(spec.gamma->rows()) + " rows, expected " +
                        std::to_string(d));
        } else if (!all_finite(*spec.gamma)) {
            v.push_back("gamma has non-finite entries");
        }
        for (std::size_t t = 0; t < spec.z_path.size(); ++t) {
            if (spec.z_path[t].size() != spec.gamma->cols()) {
                v.push_back("dimension mismatch: z_path[" + std::to_string(t) + "] has " +
                            std::to_string(spec.z_path[t].size()) + " entries, gamma has " +
                            std::to_string(spec.gamma->cols()) + " columns");
                break;
            }
        }
    } else if (!spec.z_path.empty()) {
        v.push_back("z_path given without gamma");
    }
    if (spec.k_star.size() != 0 && spec.k_star.size() != spec.n) {
        v.push_back("dimension mismatch: k_star has " + std::to_string(spec.k_star.size()) + " entries, expected " +
                    std::to_string(spec.n));
    }
    if (spec.q_star.size() != 0 && spec.q_star.size() != spec.m) {
        v.push_back("dimension mismatch: q_star has " + std::to_string(spec.q_star.size()) + " entries, expected " +
                    std::to_string(spec.m));
    }
    if (!spec.var_names.empty() && static_cast<Eigen::Index>(spec.var_names.size()) != d) {
        v.push_back("var_names has " + std::to_string(spec.var_names.size()) + " labels, expected " +
                    std::to_string(d));
    }
    return rep;
}

ModelSpec parse_model(const std::string& text, const Tolerances& tol) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("model file: top level must be a JSON object");

    static const std::set<std::string> known = {"n",      "m",      "beta",   "rho",    "A",
                                                "B",      "Q",      "gamma",  "z_path", "k_star",
                                                "q_star", "r_star", "var_names"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw ParseError("model file: unknown field '" + key + "'");
    }
    for (const char* key : {"n", "m", "beta", "rho", "A", "B", "Q"}) {
        if (!j.contains(key)) throw ParseError(std::string("model file: missing required field '") + key + "'");
    }

    ModelSpec s;
    s.n = read_count(j["n"], "n");
    s.m = read_count(j["m"], "m");
    s.beta = number_at(j["beta"], "beta");
    s.rho = number_at(j["rho"], "rho");
    s.A = read_matrix(j["A"], "A");
    s.B = read_matrix(j["B"], "B", true);
    s.Q = read_matrix(j["Q"], "Q");
    if (j.contains("gamma")) s.gamma = read_matrix(j["gamma"], "gamma");
    if (j.contains("z_path")) {
        const json& z = j["z_path"];
        if (!z.is_array()) throw ParseError("field 'z_path': expected an array of vectors");
        for (std::size_t t = 0; t < z.size(); ++t) s.z_path.push_back(read_vector(z[t], "z_path[" + std::to_string(t) + "]"));
    }
    s.k_star = j.contains("k_star") ? read_vector(j["k_star"], "k_star") : Vector::Ones(std::max(s.n, 0));
    s.q_star = j.contains("q_star") ? read_vector(j["q_star"], "q_star") : Vector::Ones(std::max(s.m, 0));
    if (j.contains("r_star")) s.r_star = number_at(j["r_star"], "r_star");
    if (j.contains("var_names")) {
        const json& names = j["var_names"];
        if (!names.is_array()) throw ParseError("field 'var_names': expected an array of strings");
        for (const auto& name : names) {
            if (!name.is_string()) throw ParseError("field 'var_names': expected an array of strings");
            s.var_names.push_back(name.get<std::string>());
        }
    }

    ValidationReport rep = validate_model(s, tol);
    if (!rep.ok()) throw ValidationError(std::move(rep));
    return s;
}

ModelSpec load_model(const std::filesystem::path& path, const Tolerances& tol) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open model file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str(), tol);
}

ordered_json model_to_json(const ModelSpec& s) {
    ordered_json j = ordered_json::object();
    j["n"] = s.n;
    j["m"] = s.m;
    j["beta"] = s.beta;
    j["rho"] = s.rho;
    j["A"] = to_json(s.A);
    j["B"] = to_json(s.B);
    j["Q"] = to_json(s.Q);
    if (s.gamma) j["gamma"] = to_json(*s.gamma);
    if (!s.z_path.empty()) {
        ordered_json z = ordered_json::array();
        for (const auto& zt : s.z_path) z.push_back(to_json(zt));
        j["z_path"] = std::move(z);
    }
    j["k_star"] = to_json(s.k_star.size() ? s.k_star : Vector(Vector::Ones(s.n)));
    j["q_star"] = to_json(s.q_star.size() ? s.q_star : Vector(Vector::Ones(s.m)));
    j["r_star"] = s.r_star;
    if (!s.var_names.empty()) j["var_names"] = s.var_names;
    return j;
}

std::string save_model(const ModelSpec& spec) { return dump_canonical(model_to_json(spec)); }

const char* to_string(DeviationMode mode) {
    return mode == DeviationMode::relative ? "relative" : "absolute";
}

DeviationConvention deviation_convention(const ModelSpec& spec) {
    DeviationConvention c;
    auto modes = [](const Vector& target, int size) {
        std::vector<DeviationMode> out;
        for (int i = 0; i < size; ++i) {
            const bool zero = target.size() == size && target(i) == 0.0;
            out.push_back(zero ? DeviationMode::absolute : DeviationMode::relative);
        }
        return out;
    };
    c.k = modes(spec.k_star, spec.n);
    c.q = modes(spec.q_star, spec.m);
    return c;
}

Vector to_deviation(const Vector& level, const Vector& target) {
    if (level.size() != target.size()) throw UsageError("model", "level and target sizes differ");
    Vector out(level.size());
    for (Eigen::Index i = 0; i < level.size(); ++i) {
        out(i) = target(i) == 0.0 ? level(i) : (level(i) - target(i)) / target(i);
    }
    return out;
}

Vector to_level(const Vector& deviation, const Vector& target) {
    if (deviation.size() != target.size()) throw UsageError("model", "deviation and target sizes differ");
    Vector out(deviation.size());
    for (Eigen::Index i = 0; i < deviation.size(); ++i) {
        out(i) = target(i) == 0.0 ? deviation(i) : target(i) * (1.0 + deviation(i));
    }
    return out;
}

}  // namespace relq
