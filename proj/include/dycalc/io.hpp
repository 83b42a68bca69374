// On-disk formats for the command-line runner: JSON descriptors for grids,
// coefficient spaces, grid functions, dense multilinear coefficients, shift
// and paraproduct specifications, plus byte-stable rendering helpers.  All
// writers are deterministic: object keys come out sorted and every double is
// printed with %.17g, so equal values always produce identical bytes.
#pragma once

#include "dycalc/represent.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace dycalc {

// std::map-backed, so object keys iterate (and serialize) in sorted order.
using Json = nlohmann::json;

// {"variant": "scalar" | "seq_lp" | "schatten" | "bochner", "p", "dim" or
// "side", "weights", "inner"} with only the fields the variant uses.
Json space_to_json(const Space& V);
Space space_from_json(const Json& j);

// {"d", "l_min", "l_max", "roots", "omega": [[bit per axis] per level]};
// levels run from l_min upward, one row per scale below l_max.  On read an
// omitted "omega" falls back to "seed" (sampled translation) or to the
// untranslated lattice when both are missing.
Json grid_to_json(const Grid& g);
Grid grid_from_json(const Json& j);

// {"scale", "pos"}
Json cube_to_json(const Cube& q);
Cube cube_from_json(const Json& j);

// Dense coefficients only: {"ins", "out", "tensor": [re, im, ...]} in the
// operator's own flat layout.
Json op_to_json(const MultilinearOp& a);
MultilinearOp op_from_json(const Json& j);

// {"grid", "space", "data": [re, im, ...]} cell-major, components within a
// cell adjacent.  Reading validates the embedded grid descriptor against g.
Json function_to_json(const GridFunction& f);
GridFunction function_from_json(const Json& j, const Grid& g);

// {"complexity", "cancellative": [a, b], "ins", "out", "keys": [{"top",
// "slots": [{"cube", "eta"}, ...], "op"}, ...]} in sorted key order.
Json shift_to_json(const ShiftSpec& s);
ShiftSpec shift_from_json(const Json& j, const Grid& g);

// {"ins", "out", "keys": [{"cube", "eta", "op"}, ...]} in sorted key order.
Json paraproduct_to_json(const ParaproductSpec& p);
ParaproductSpec paraproduct_from_json(const Json& j, const Grid& g);

// %.17g; rejects non-finite values, which have no JSON representation.
std::string format_double(double v);
// Single-line canonical rendering (sorted keys, %.17g floats) plus a final
// newline.  Integers print as integers.
std::string render_json(const Json& j);
// RFC-4180-style rows: cells holding commas, quotes, or newlines are quoted.
// Every row ends with '\n'.
std::string render_csv(const std::vector<std::vector<std::string>>& rows);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
Json parse_json_file(const std::string& path);

}  // namespace dycalc
