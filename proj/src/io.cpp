#include "dycalc/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dycalc {

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw std::invalid_argument(std::string("missing field: ") + key);
  return j.at(key);
}

int int_field(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number_integer())
    throw std::invalid_argument(std::string("field is not an integer: ") + key);
  return v.get<int>();
}

double num_field(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number())
    throw std::invalid_argument(std::string("field is not a number: ") + key);
  return v.get<double>();
}

// Flat [re, im, ...] listing of a complex vector.
Json cxvec_to_json(const cxvec& v) {
  Json a = Json::array();
  for (const cx& z : v) {
    a.push_back(z.real());
    a.push_back(z.imag());
  }
  return a;
}

cxvec cxvec_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() % 2 != 0)
    throw std::invalid_argument(std::string(what) +
                                " must be a flat [re, im, ...] array");
  cxvec v(j.size() / 2);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Json& re = j.at(2 * i);
    const Json& im = j.at(2 * i + 1);
    if (!re.is_number() || !im.is_number())
      throw std::invalid_argument(std::string(what) + " has a non-number entry");
    v[i] = cx{re.get<double>(), im.get<double>()};
  }
  return v;
}

std::vector<Space> spaces_from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("\"ins\" must be an array");
  std::vector<Space> out;
  for (const Json& e : j) out.push_back(space_from_json(e));
  return out;
}

Json spaces_to_json(const std::vector<Space>& vs) {
  Json a = Json::array();
  for (const Space& v : vs) a.push_back(space_to_json(v));
  return a;
}

Json haar_index_to_json(const HaarIndex& h) {
  Json j;
  j["cube"] = cube_to_json(h.cube);
  j["eta"] = h.eta;
  return j;
}

HaarIndex haar_index_from_json(const Json& j) {
  return HaarIndex{cube_from_json(field(j, "cube")), int_field(j, "eta")};
}

void append_json(std::string& out, const Json& j) {
  switch (j.type()) {
    case Json::value_t::null:
      out += "null";
      return;
    case Json::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      return;
    case Json::value_t::string:
      out += j.dump();  // quoting and escaping only
      return;
    case Json::value_t::number_integer:
      out += std::to_string(j.get<std::int64_t>());
      return;
    case Json::value_t::number_unsigned:
      out += std::to_string(j.get<std::uint64_t>());
      return;
    case Json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    case Json::value_t::array: {
      out += '[';
      bool first = true;
      for (const Json& e : j) {
        if (!first) out += ',';
        first = false;
        append_json(out, e);
      }
      out += ']';
      return;
    }
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += Json(it.key()).dump();
        out += ':';
        append_json(out, it.value());
      }
      out += '}';
      return;
    }
    default:
      throw std::invalid_argument("unsupported JSON value type");
  }
}

}  // namespace

Json space_to_json(const Space& V) {
  Json j;
  switch (V.kind()) {
    case SpaceKind::Scalar:
      j["variant"] = "scalar";
      break;
    case SpaceKind::SeqLp:
      j["variant"] = "seq_lp";
      j["p"] = V.p();
      j["dim"] = V.dim();
      break;
    case SpaceKind::Schatten:
      j["variant"] = "schatten";
      j["p"] = V.p();
      j["side"] = V.side();
      break;
    case SpaceKind::Bochner:
      j["variant"] = "bochner";
      j["p"] = V.p();
      j["weights"] = V.weights();
      j["inner"] = space_to_json(V.inner());
      break;
  }
  return j;
}

Space space_from_json(const Json& j) {
  const Json& v = field(j, "variant");
  if (!v.is_string()) throw std::invalid_argument("\"variant\" must be a string");
  const std::string variant = v.get<std::string>();
  if (variant == "scalar") return Space::scalar();
  if (variant == "seq_lp")
    return Space::seq_lp(num_field(j, "p"), int_field(j, "dim"));
  if (variant == "schatten")
    return Space::schatten(num_field(j, "p"), int_field(j, "side"));
  if (variant == "bochner") {
    const Json& w = field(j, "weights");
    if (!w.is_array()) throw std::invalid_argument("\"weights\" must be an array");
    std::vector<double> weights;
    for (const Json& e : w) {
      if (!e.is_number())
        throw std::invalid_argument("\"weights\" has a non-number entry");
      weights.push_back(e.get<double>());
    }
    return Space::bochner(num_field(j, "p"), std::move(weights),
                          space_from_json(field(j, "inner")));
  }
  throw std::invalid_argument("unknown space variant: " + variant);
}

Json grid_to_json(const Grid& g) {
  Json j;
  j["d"] = g.dim();
  j["l_min"] = g.window().lmin;
  j["l_max"] = g.window().lmax;
  j["roots"] = g.roots();
  Json rows = Json::array();
  for (const auto& row : g.shift().bits) {
    Json r = Json::array();
    for (std::uint8_t b : row) r.push_back(static_cast<int>(b));
    rows.push_back(std::move(r));
  }
  j["omega"] = std::move(rows);
  return j;
}

Grid grid_from_json(const Json& j) {
  const int d = int_field(j, "d");
  const ScaleWindow w{int_field(j, "l_min"), int_field(j, "l_max")};
  if (!w.valid()) throw std::invalid_argument("invalid scale window");
  i64 roots = 1;
  if (j.contains("roots")) {
    if (!j.at("roots").is_number_integer())
      throw std::invalid_argument("\"roots\" must be an integer");
    roots = j.at("roots").get<i64>();
  }
  LatticeShift shift = LatticeShift::none(w, d);
  if (j.contains("omega")) {
    const Json& rows = j.at("omega");
    const std::size_t levels = static_cast<std::size_t>(w.lmax - w.lmin);
    if (!rows.is_array() || rows.size() != levels)
      throw std::invalid_argument("\"omega\" needs one row per scale level");
    for (std::size_t l = 0; l < levels; ++l) {
      const Json& row = rows.at(l);
      if (!row.is_array() || row.size() != static_cast<std::size_t>(d))
        throw std::invalid_argument("\"omega\" rows need one bit per axis");
      for (int a = 0; a < d; ++a) {
        const Json& b = row.at(static_cast<std::size_t>(a));
        if (!b.is_number_integer() ||
            (b.get<int>() != 0 && b.get<int>() != 1))
          throw std::invalid_argument("\"omega\" entries must be 0 or 1");
        shift.bits[l][static_cast<std::size_t>(a)] =
            static_cast<std::uint8_t>(b.get<int>());
      }
    }
  } else if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer())
      throw std::invalid_argument("\"seed\" must be an integer");
    Rng rng(j.at("seed").get<std::uint64_t>());
    shift = LatticeShift::sample(w, d, rng);
  }
  return Grid(d, w, std::move(shift), roots);
}

Json cube_to_json(const Cube& q) {
  Json j;
  j["scale"] = q.scale;
  j["pos"] = q.pos;
  return j;
}

Cube cube_from_json(const Json& j) {
  Cube q;
  q.scale = int_field(j, "scale");
  const Json& pos = field(j, "pos");
  if (!pos.is_array() || pos.empty())
    throw std::invalid_argument("cube \"pos\" must be a nonempty array");
  for (const Json& e : pos) {
    if (!e.is_number_integer())
      throw std::invalid_argument("cube \"pos\" has a non-integer entry");
    q.pos.push_back(e.get<i64>());
  }
  return q;
}

Json op_to_json(const MultilinearOp& a) {
  if (!a.is_dense())
    throw std::invalid_argument("only dense coefficients serialize");
  Json j;
  j["ins"] = spaces_to_json(a.ins());
  j["out"] = space_to_json(a.out());
  j["tensor"] = cxvec_to_json(a.tensor());
  return j;
}

MultilinearOp op_from_json(const Json& j) {
  return MultilinearOp::dense(spaces_from_json(field(j, "ins")),
                              space_from_json(field(j, "out")),
                              cxvec_from_json(field(j, "tensor"), "tensor"));
}

Json function_to_json(const GridFunction& f) {
  Json j;
  j["grid"] = grid_to_json(f.grid());
  j["space"] = space_to_json(f.space());
  cxvec flat;
  flat.reserve(static_cast<std::size_t>(f.grid().cell_count()) *
               static_cast<std::size_t>(f.space().dim()));
  for (i64 c = 0; c < f.grid().cell_count(); ++c)
    for (const cx& z : f.at(c)) flat.push_back(z);
  j["data"] = cxvec_to_json(flat);
  return j;
}

GridFunction function_from_json(const Json& j, const Grid& g) {
  if (render_json(field(j, "grid")) != render_json(grid_to_json(g)))
    throw std::invalid_argument("grid descriptor does not match the grid");
  const Space V = space_from_json(field(j, "space"));
  const cxvec flat = cxvec_from_json(field(j, "data"), "data");
  const std::size_t want = static_cast<std::size_t>(g.cell_count()) *
                           static_cast<std::size_t>(V.dim());
  if (flat.size() != want)
    throw std::invalid_argument("\"data\" length does not match grid and space");
  GridFunction f(g, V);
  std::size_t k = 0;
  for (i64 c = 0; c < g.cell_count(); ++c)
    for (cx& z : f.at(c)) z = flat[k++];
  return f;
}

Json shift_to_json(const ShiftSpec& s) {
  Json j;
  j["complexity"] = s.complexity();
  j["cancellative"] = Json::array({s.cancellative().first,
                                   s.cancellative().second});
  j["ins"] = spaces_to_json(s.ins());
  j["out"] = space_to_json(s.out());
  Json keys = Json::array();
  for (const auto& [key, op] : s.coefficients()) {
    Json e;
    e["top"] = cube_to_json(key.top);
    Json slots = Json::array();
    for (const HaarIndex& h : key.slots) slots.push_back(haar_index_to_json(h));
    e["slots"] = std::move(slots);
    e["op"] = op_to_json(op);
    keys.push_back(std::move(e));
  }
  j["keys"] = std::move(keys);
  return j;
}

ShiftSpec shift_from_json(const Json& j, const Grid& g) {
  const Json& cj = field(j, "complexity");
  if (!cj.is_array()) throw std::invalid_argument("\"complexity\" must be an array");
  std::vector<int> complexity;
  for (const Json& e : cj) {
    if (!e.is_number_integer())
      throw std::invalid_argument("\"complexity\" has a non-integer entry");
    complexity.push_back(e.get<int>());
  }
  const Json& canc = field(j, "cancellative");
  if (!canc.is_array() || canc.size() != 2)
    throw std::invalid_argument("\"cancellative\" must name two slots");
  ShiftSpec s(g, std::move(complexity),
              {canc.at(0).get<int>(), canc.at(1).get<int>()},
              spaces_from_json(field(j, "ins")),
              space_from_json(field(j, "out")));
  for (const Json& e : field(j, "keys")) {
    ShiftKey key;
    key.top = cube_from_json(field(e, "top"));
    for (const Json& slot : field(e, "slots"))
      key.slots.push_back(haar_index_from_json(slot));
    s.set(key, op_from_json(field(e, "op")));
  }
  return s;
}

Json paraproduct_to_json(const ParaproductSpec& p) {
  Json j;
  j["ins"] = spaces_to_json(p.ins());
  j["out"] = space_to_json(p.out());
  Json keys = Json::array();
  for (const auto& [key, op] : p.coefficients()) {
    Json e = haar_index_to_json(key);
    e["op"] = op_to_json(op);
    keys.push_back(std::move(e));
  }
  j["keys"] = std::move(keys);
  return j;
}

ParaproductSpec paraproduct_from_json(const Json& j, const Grid& g) {
  ParaproductSpec p(g, spaces_from_json(field(j, "ins")),
                    space_from_json(field(j, "out")));
  for (const Json& e : field(j, "keys"))
    p.set(haar_index_from_json(e), op_from_json(field(e, "op")));
  return p;
}

std::string format_double(double v) {
  if (!std::isfinite(v))
    throw std::invalid_argument("non-finite value has no JSON representation");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string render_json(const Json& j) {
  std::string out;
  append_json(out, j);
  out += '\n';
  return out;
}

std::string render_csv(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      const std::string& cell = row[i];
      if (cell.find_first_of(",\"\n\r") != std::string::npos) {
        out += '"';
        for (char c : cell) {
          if (c == '"') out += '"';
          out += c;
        }
        out += '"';
      } else {
        out += cell;
      }
    }
    out += '\n';
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

Json parse_json_file(const std::string& path) {
  return Json::parse(read_text_file(path));
}

}  // namespace dycalc
