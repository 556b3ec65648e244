#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "relq/types.hpp"

namespace relq {

using ordered_json = nlohmann::ordered_json;

/// Deterministic text form: insertion-ordered keys, two-space indent,
/// arrays of scalars on one line, floats printed with 17 significant
/// digits. Non-finite floats must already be encoded with json_number().
std::string dump_canonical(const ordered_json& j);

/// %.17g formatting shared by JSON and CSV writers.
std::string format_double(double x);

/// A finite double as a JSON number; non-finite values become the strings
/// "inf", "-inf" or "nan" so the document stays valid JSON.
ordered_json json_number(double x);

ordered_json to_json(const Matrix& m);  // array of rows
ordered_json to_json(const Vector& v);
ordered_json to_json(const RowVector& v);
ordered_json to_json(const CVector& v);  // array of [re, im]
ordered_json to_json(const std::vector<double>& v);
ordered_json to_json(const std::vector<int>& v);

}  // namespace relq
