#pragma once

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "weakmfg/checker.hpp"
#include "weakmfg/model.hpp"
#include "weakmfg/nash.hpp"
#include "weakmfg/solver.hpp"

namespace weakmfg {

using Json = nlohmann::ordered_json;

/// Parse failure; `line` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line = 0)
      : std::runtime_error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------- problems

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

inline void require_keys(const YAML::Node& map, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!map.IsMap()) throw ParseError(where + ": expected a mapping", line_of(map));
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError("unknown key '" + key + "' in " + where, line_of(kv.first));
  }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ParseError("invalid value for key '" + key + "'", line_of(n));
  }
}

inline std::vector<double> parse_args(const std::string& s, const std::string& key, int line) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ParseError("bad preset argument '" + item + "' for key '" + key + "'", line);
    }
  }
  return out;
}

/// Samples a preset or inline array on the grid nodes.
inline SpatialField parse_field(const YAML::Node& n, const std::string& key, int d, int nx) {
  SpatialField f(d, nx, 0.0);
  const int line = line_of(n);
  if (n.IsSequence()) {
    std::vector<double> flat;
    for (const auto& row : n) {
      if (row.IsSequence()) {
        for (const auto& v : row) flat.push_back(scalar<double>(v, key));
      } else {
        flat.push_back(scalar<double>(row, key));
      }
    }
    if (flat.size() != f.size())
      throw ParseError("key '" + key + "' has " + std::to_string(flat.size()) + " samples, expected " +
                           std::to_string(f.size()),
                       line);
    f.values = std::move(flat);
    return f;
  }
  if (!n.IsScalar()) throw ParseError("key '" + key + "' must be a number, preset or array", line);
  const std::string text = n.as<std::string>();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (text.find_first_not_of(" \t", used) == std::string::npos) {
      f.values.assign(f.size(), v);
      return f;
    }
  } catch (const std::exception&) {
  }
  static const std::regex call(R"(^\s*([A-Za-z_]+)\s*(?:\((.*)\))?\s*$)");
  std::smatch mt;
  if (!std::regex_match(text, mt, call)) throw ParseError("unrecognized value '" + text + "' for key '" + key + "'", line);
  const std::string name = mt[1];
  const std::vector<double> args = mt[2].matched ? parse_args(mt[2], key, line) : std::vector<double>{};
  const SpaceTimeGrid g(d, nx, 2, 1.0);
  if (name == "uniform") {
    if (args.size() > 1) throw ParseError("uniform takes at most one argument", line);
    f.values.assign(f.size(), args.empty() ? 1.0 : args[0]);
  } else if (name == "gaussian_bump") {
    const std::size_t need = d == 1 ? 2 : 3;
    if (args.size() != need && args.size() != need + 1)
      throw ParseError("gaussian_bump expects " + std::string(d == 1 ? "(center, width[, amplitude])" : "(cx, cy, width[, amplitude])"),
                       line);
    const Point c{args[0], d == 2 ? args[1] : 0.0};
    const double w = args[need - 1];
    const double amp = args.size() > need ? args[need] : 1.0;
    if (!(w > 0.0)) throw ParseError("gaussian_bump width must be positive", line);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Point x = g.node_position(i);
      double s = 0.0;
      for (int a = 0; a < d; ++a) s += std::pow(torus_delta(x[a], c[a]), 2);
      f[i] = amp * std::exp(-s / (2 * w * w));
    }
  } else if (name == "cosine") {
    if (args.size() != 2 && args.size() != 3) throw ParseError("cosine expects (amplitude, frequency[, offset])", line);
    const double off = args.size() == 3 ? args[2] : 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Point x = g.node_position(i);
      double v = std::cos(2 * std::numbers::pi * args[1] * x[0]);
      if (d == 2) v *= std::cos(2 * std::numbers::pi * args[1] * x[1]);
      f[i] = off + args[0] * v;
    }
  } else {
    throw ParseError("unknown preset '" + name + "' for key '" + key + "'", line);
  }
  return f;
}

inline double observed_slope(const SpatialField& f, int d, int nx) {
  const SpaceTimeGrid g(d, nx, 2, 1.0);
  const NeighborTable nb(g);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    for (int a = 0; a < d; ++a) s = std::max(s, std::abs(f[nb.plus[a][i]] - f[i]) / g.hx());
  return s;
}

}  // namespace detail

/// Problem file (YAML):
///   d, nx, nt, T
///   hamiltonian: {r, potential, lipschitz}
///   coupling:    {q, weight, lipschitz}
///   m0, phi_T
/// Field values are a number, `uniform[(v)]`, `gaussian_bump(...)`,
/// `cosine(amplitude, frequency[, offset])` or an inline array. m0 is
/// rescaled to unit mass. Omitted Lipschitz constants default to the largest
/// adjacent-node slope of the samples. Positive overrides replace nx / nt.
inline ProblemData parse_problem(const std::string& text, int nx_override = 0, int nt_override = 0) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(std::string("malformed problem file: ") + e.msg, e.mark.line + 1);
  }
  if (!root || !root.IsMap()) throw ParseError("problem file must be a mapping");
  detail::require_keys(root, {"name", "d", "nx", "nt", "T", "hamiltonian", "coupling", "m0", "phi_T"}, "problem");
  for (const char* k : {"d", "nx", "nt", "hamiltonian", "coupling", "m0", "phi_T"})
    if (!root[k]) throw ParseError(std::string("missing key '") + k + "'");
  ProblemData p;
  p.d = detail::scalar<int>(root["d"], "d");
  p.nx = detail::scalar<int>(root["nx"], "nx");
  p.nt = detail::scalar<int>(root["nt"], "nt");
  if (nx_override > 0) p.nx = nx_override;
  if (nt_override > 0) p.nt = nt_override;
  p.T = root["T"] ? detail::scalar<double>(root["T"], "T") : 1.0;
  if (p.d != 1 && p.d != 2) throw ParseError("key 'd' must be 1 or 2", detail::line_of(root["d"]));
  if (p.nx < 4) throw ParseError("key 'nx' must be at least 4", detail::line_of(root["nx"]));
  if (p.nt < 2) throw ParseError("key 'nt' must be at least 2", detail::line_of(root["nt"]));

  const YAML::Node h = root["hamiltonian"];
  detail::require_keys(h, {"r", "potential", "lipschitz"}, "hamiltonian");
  p.hamiltonian.r = h["r"] ? detail::scalar<double>(h["r"], "hamiltonian.r") : 2.0;
  p.hamiltonian.potential = h["potential"] ? detail::parse_field(h["potential"], "hamiltonian.potential", p.d, p.nx)
                                           : SpatialField(p.d, p.nx, 0.0);
  p.hamiltonian.lipschitz = h["lipschitz"] ? detail::scalar<double>(h["lipschitz"], "hamiltonian.lipschitz")
                                           : detail::observed_slope(p.hamiltonian.potential, p.d, p.nx);

  const YAML::Node c = root["coupling"];
  detail::require_keys(c, {"q", "weight", "lipschitz"}, "coupling");
  p.coupling.q = c["q"] ? detail::scalar<double>(c["q"], "coupling.q") : 2.0;
  p.coupling.weight =
      c["weight"] ? detail::parse_field(c["weight"], "coupling.weight", p.d, p.nx) : SpatialField(p.d, p.nx, 1.0);
  p.coupling.lipschitz = c["lipschitz"] ? detail::scalar<double>(c["lipschitz"], "coupling.lipschitz")
                                        : detail::observed_slope(p.coupling.weight, p.d, p.nx);

  p.m0 = detail::parse_field(root["m0"], "m0", p.d, p.nx);
  double mass = 0.0;
  for (double v : p.m0.values) mass += v;
  mass *= p.d == 1 ? 1.0 / p.nx : 1.0 / (static_cast<double>(p.nx) * p.nx);
  if (!(mass > 0.0)) throw ParseError("m0 has no positive mass", detail::line_of(root["m0"]));
  for (double& v : p.m0.values) v /= mass;
  p.phi_T = detail::parse_field(root["phi_T"], "phi_T", p.d, p.nx);
  return p;
}

inline ProblemData load_problem(const std::filesystem::path& path) { return parse_problem(read_text(path)); }

// ------------------------------------------------------------------ config

struct StudyConfig {
  std::vector<int> grid{16, 32};
  std::vector<int> players{16, 64, 256};
  std::vector<double> eps{0.5, 0.25, 0.125, 0.0625, 0.03125};
};

struct RunConfig {
  SolverConfig solver;
  GameConfig game;
  CheckThresholds check;
  StudyConfig study;
};

/// Config file (YAML) with optional sections solver, game, check, study.
inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(std::string("malformed config file: ") + e.msg, e.mark.line + 1);
  }
  if (!root || root.IsNull()) return cfg;
  detail::require_keys(root, {"solver", "game", "check", "study"}, "config");
  if (const YAML::Node s = root["solver"]) {
    detail::require_keys(s, {"tol", "max_iters", "step_safety", "step_ratio", "seed", "checkpoint_every", "threads",
                             "check_every"},
                         "solver");
    auto& c = cfg.solver;
    if (s["tol"]) c.tol = detail::scalar<double>(s["tol"], "solver.tol");
    if (s["max_iters"]) c.max_iters = detail::scalar<long>(s["max_iters"], "solver.max_iters");
    if (s["step_safety"]) c.step_safety = detail::scalar<double>(s["step_safety"], "solver.step_safety");
    if (s["step_ratio"]) c.step_ratio = detail::scalar<double>(s["step_ratio"], "solver.step_ratio");
    if (s["seed"]) c.seed = detail::scalar<std::uint64_t>(s["seed"], "solver.seed");
    if (s["checkpoint_every"]) c.checkpoint_every = detail::scalar<long>(s["checkpoint_every"], "solver.checkpoint_every");
    if (s["threads"]) c.threads = detail::scalar<unsigned>(s["threads"], "solver.threads");
    if (s["check_every"]) c.check_every = detail::scalar<long>(s["check_every"], "solver.check_every");
    if (!(c.tol > 0.0)) throw ParseError("solver.tol must be positive", detail::line_of(s["tol"]));
    if (c.max_iters < 1) throw ParseError("solver.max_iters must be positive", detail::line_of(s["max_iters"]));
  }
  if (const YAML::Node s = root["game"]) {
    detail::require_keys(s, {"N", "delta", "sigma", "seed", "ode_steps", "sample_players"}, "game");
    auto& c = cfg.game;
    if (s["N"]) c.N = detail::scalar<int>(s["N"], "game.N");
    if (s["delta"]) c.delta = detail::scalar<double>(s["delta"], "game.delta");
    if (s["sigma"]) c.sigma = detail::scalar<double>(s["sigma"], "game.sigma");
    if (s["seed"]) c.seed = detail::scalar<std::uint64_t>(s["seed"], "game.seed");
    if (s["ode_steps"]) c.ode_steps = detail::scalar<int>(s["ode_steps"], "game.ode_steps");
    if (s["sample_players"]) c.sample_players = detail::scalar<int>(s["sample_players"], "game.sample_players");
  }
  if (const YAML::Node s = root["check"]) {
    detail::require_keys(s, {"m_cut_rel", "res_iii_factor", "res_iv_rel", "condsup", "res_ii_ae"}, "check");
    auto& c = cfg.check;
    if (s["m_cut_rel"]) c.m_cut_rel = detail::scalar<double>(s["m_cut_rel"], "check.m_cut_rel");
    if (s["res_iii_factor"]) c.res_iii_factor = detail::scalar<double>(s["res_iii_factor"], "check.res_iii_factor");
    if (s["res_iv_rel"]) c.res_iv_rel = detail::scalar<double>(s["res_iv_rel"], "check.res_iv_rel");
    if (s["condsup"]) c.condsup = detail::scalar<double>(s["condsup"], "check.condsup");
    if (s["res_ii_ae"]) c.res_ii_ae = detail::scalar<double>(s["res_ii_ae"], "check.res_ii_ae");
  }
  if (const YAML::Node s = root["study"]) {
    detail::require_keys(s, {"grid", "N", "eps"}, "study");
    auto& c = cfg.study;
    if (s["grid"]) c.grid = detail::scalar<std::vector<int>>(s["grid"], "study.grid");
    if (s["N"]) c.players = detail::scalar<std::vector<int>>(s["N"], "study.N");
    if (s["eps"]) c.eps = detail::scalar<std::vector<double>>(s["eps"], "study.eps");
  }
  cfg.check.solver_tol = cfg.solver.tol;
  return cfg;
}

inline Json config_json(const RunConfig& c) {
  Json j;
  j["solver"] = {{"tol", c.solver.tol},
                 {"max_iters", c.solver.max_iters},
                 {"step_safety", c.solver.step_safety},
                 {"step_ratio", c.solver.step_ratio},
                 {"seed", c.solver.seed},
                 {"checkpoint_every", c.solver.checkpoint_every},
                 {"threads", c.solver.threads},
                 {"check_every", c.solver.check_every}};
  j["game"] = {{"N", c.game.N},
               {"delta", c.game.delta},
               {"sigma", c.game.sigma},
               {"seed", c.game.seed},
               {"ode_steps", c.game.ode_steps},
               {"sample_players", c.game.sample_players}};
  j["check"] = {{"m_cut_rel", c.check.m_cut_rel},
                {"res_iii_factor", c.check.res_iii_factor},
                {"res_iv_rel", c.check.res_iv_rel},
                {"condsup", c.check.condsup},
                {"res_ii_ae", c.check.res_ii_ae}};
  j["study"] = {{"grid", c.study.grid}, {"N", c.study.players}, {"eps", c.study.eps}};
  return j;
}

// ------------------------------------------------------------------ fields

/// Coordinates attached to a field sample: time by the time tag, space by the
/// space tag (faces are shifted by h/2 along their axis).
inline Point sample_position(const Field& f, std::size_t i, int comp) {
  return f.space == SpaceLoc::face ? f.grid.face_position(i, comp) : f.grid.node_position(i);
}

inline double sample_time(const Field& f, int k) {
  return f.time == TimeLoc::node ? f.grid.time_node(k) : f.grid.time_cell(k);
}

/// CSV with header t,x(,y),value, one row per sample in slice order.
inline void write_field_csv(const std::filesystem::path& path, const Field& f, int comp = 0) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const int d = f.grid.dim();
  out << (d == 1 ? "t,x,value\n" : "t,x,y,value\n");
  for (int k = 0; k < f.slices(); ++k) {
    const auto sl = f.slice(k, comp);
    const std::string t = format_double(sample_time(f, k));
    for (std::size_t i = 0; i < sl.size(); ++i) {
      const Point x = sample_position(f, i, comp);
      out << t << ',' << format_double(x[0]) << ',';
      if (d == 2) out << format_double(x[1]) << ',';
      out << format_double(sl[i]) << '\n';
    }
  }
}

/// Reads values written by write_field_csv into component `comp` of `f`,
/// whose layout must already be set.
inline void read_field_csv(const std::filesystem::path& path, Field& f, int comp = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing field file " + path.string());
  const int d = f.grid.dim();
  std::string line;
  std::getline(in, line);
  const std::string expect = d == 1 ? "t,x,value" : "t,x,y,value";
  if (line != expect) throw ParseError(path.string() + ": expected header '" + expect + "'", 1);
  const std::size_t n = f.grid.slice_size();
  const std::size_t rows = static_cast<std::size_t>(f.slices()) * n;
  std::size_t r = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (r >= rows) throw ParseError(path.string() + ": too many rows", static_cast<int>(r + 2));
    const auto pos = line.rfind(',');
    if (pos == std::string::npos) throw ParseError(path.string() + ": malformed row", static_cast<int>(r + 2));
    double v = 0.0;
    try {
      v = std::stod(line.substr(pos + 1));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad number", static_cast<int>(r + 2));
    }
    f.at(static_cast<int>(r / n), r % n, comp) = v;
    ++r;
  }
  if (r != rows)
    throw ParseError(path.string() + ": expected " + std::to_string(rows) + " rows, got " + std::to_string(r));
}

/// Little-endian dump: "WMFG", u32 version 1, i32 d, nx, nt, slices,
/// components, then slices*components*slice_size 64-bit floats.
inline void write_field_binary(const std::filesystem::path& path, const Field& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto put32 = [&](std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xff));
  };
  out.write("WMFG", 4);
  put32(1);
  for (int v : {f.grid.dim(), f.grid.nx(), f.grid.nt(), f.slices(), f.components()}) put32(static_cast<std::uint32_t>(v));
  for (double v : f.values) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) out.put(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
}

inline void read_field_binary(const std::filesystem::path& path, Field& f) {
  const std::string bytes = read_text(path);
  auto get32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + b])) << (8 * b);
    return v;
  };
  if (bytes.size() < 28 || bytes.compare(0, 4, "WMFG") != 0) throw ParseError(path.string() + ": not a field dump");
  const int dims[5] = {f.grid.dim(), f.grid.nx(), f.grid.nt(), f.slices(), f.components()};
  for (int i = 0; i < 5; ++i)
    if (static_cast<int>(get32(8 + 4 * i)) != dims[i]) throw ParseError(path.string() + ": layout mismatch");
  if (bytes.size() != 28 + 8 * f.values.size()) throw ParseError(path.string() + ": truncated");
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[28 + 8 * i + b])) << (8 * b);
    std::memcpy(&f.values[i], &bits, sizeof bits);
  }
}

// ------------------------------------------------------------------ reports

inline Json grid_json(const SpaceTimeGrid& g) {
  return {{"d", g.dim()}, {"nx", g.nx()}, {"nt", g.nt()}, {"T", g.horizon()}, {"hx", g.hx()}, {"ht", g.ht()}};
}

/// Solve report without wall time, which belongs in the manifest.
inline Json solve_report_json(const SolveReport& r) {
  Json hist = Json::array();
  for (const auto& [it, gap] : r.gap_history) hist.push_back({it, gap});
  return {{"converged", r.converged},
          {"iterations", r.iterations},
          {"duality_gap", r.duality_gap},
          {"primal_value", r.primal_value},
          {"dual_value", r.dual_value},
          {"continuity_residual", r.continuity_residual},
          {"constraint_residual", r.constraint_residual},
          {"energy_identity_residual", r.energy_identity_residual},
          {"momentum_residual", r.momentum_residual},
          {"induced_continuity_residual", r.induced_continuity_residual},
          {"alpha_discrepancy", r.alpha_discrepancy},
          {"raw_minus_delivered_max", r.max_superlevel_gap},
          {"operator_norm", r.operator_norm},
          {"sigma", r.sigma},
          {"tau", r.tau},
          {"gap_history", hist}};
}

inline Json check_report_json(const WeakSolutionReport& r) {
  const auto& t = r.thresholds;
  return {{"ok", r.ok()},
          {"res_i", {{"grad_r", r.res_i.grad_r},
                     {"flux", r.res_i.flux},
                     {"energy_density", r.res_i.energy_density},
                     {"finite", r.res_i.finite},
                     {"pass", r.pass_i()}}},
          {"res_ii_ae", {{"value", r.res_ii_ae}, {"bound", t.res_ii_ae}, {"pass", r.pass_ii()}}},
          {"res_ii_distrib", r.res_ii_distrib},
          {"res_iii", {{"value", r.res_iii}, {"bound", t.res_iii_factor * t.solver_tol}, {"pass", r.pass_iii()}}},
          {"res_iv", {{"lhs", r.res_iv_lhs},
                      {"rhs", r.res_iv_rhs},
                      {"defect", r.res_iv_defect},
                      {"relative", r.res_iv_relative()},
                      {"bound", t.res_iv_rel},
                      {"pass", r.pass_iv()}}},
          {"condsup", {{"value", r.condsup_residual}, {"bound", t.condsup}, {"pass", r.pass_condsup()}}},
          {"m_cut", r.m_cut},
          {"m_cut_rel", t.m_cut_rel}};
}

inline Json nash_report_json(const NashReport& r) {
  Json w = Json::array();
  for (const auto& [t, v] : r.wasserstein) w.push_back({t, v});
  return {{"epsilon_hat", r.epsilon_hat},
          {"mean_cost", r.mean_cost},
          {"value", r.value},
          {"mean_cost_minus_value", r.mean_cost - r.value},
          {"energy_defect", r.energy_defect},
          {"lipschitz_warning", r.lipschitz_warning},
          {"sampled_players", r.players.size()},
          {"wasserstein", w}};
}

}  // namespace weakmfg
