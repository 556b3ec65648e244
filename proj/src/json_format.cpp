#include "relq/json_format.hpp"

#include <cmath>
#include <cstdio>

namespace relq {
namespace {

bool is_scalar(const ordered_json& j) { return !j.is_array() && !j.is_object(); }

void write(const ordered_json& j, std::string& out, int depth) {
    const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
    switch (j.type()) {
        case ordered_json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad;
                out += ordered_json(it.key()).dump();
                out += ": ";
                write(it.value(), out, depth + 1);
            }
            out += "\n" + close_pad + "}";
            return;
        }
        case ordered_json::value_t::array: {
            bool flat = true;
            for (const auto& e : j) flat = flat && is_scalar(e);
            if (flat) {
                out += "[";
                bool first = true;
                for (const auto& e : j) {
                    if (!first) out += ", ";
                    first = false;
                    write(e, out, depth + 1);
                }
                out += "]";
                return;
            }
            out += "[\n";
            bool first = true;
            for (const auto& e : j) {
                if (!first) out += ",\n";
                first = false;
                out += pad;
                write(e, out, depth + 1);
            }
            out += "\n" + close_pad + "]";
            return;
        }
        case ordered_json::value_t::number_float:
            out += format_double(j.get<double>());
            return;
        default:
            out += j.dump();
            return;
    }
}

}  // namespace

std::string format_double(double x) {
    if (x == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string dump_canonical(const ordered_json& j) {
    std::string out;
    write(j, out, 0);
    out += "\n";
    return out;
}

ordered_json json_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

ordered_json to_json(const Matrix& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(json_number(m(i, k)));
        rows.push_back(std::move(row));
    }
    return rows;
}

ordered_json to_json(const Vector& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_number(v(i)));
    return a;
}

ordered_json to_json(const RowVector& v) { return to_json(Vector(v.transpose())); }

ordered_json to_json(const CVector& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(ordered_json::array({json_number(v(i).real()), json_number(v(i).imag())}));
    }
    return a;
}

ordered_json to_json(const std::vector<double>& v) {
    ordered_json a = ordered_json::array();
    for (double x : v) a.push_back(json_number(x));
    return a;
}

ordered_json to_json(const std::vector<int>& v) {
    ordered_json a = ordered_json::array();
    for (int x : v) a.push_back(x);
    return a;
}

}  // namespace relq
