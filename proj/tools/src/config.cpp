#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "csbp/errors.hpp"
#include "csbp/io.hpp"
#include "csbp/levy.hpp"
#include "csbp/verify.hpp"

namespace csbp::cli {

namespace {

enum class Type { Real, RealOrInf, RealOrAuto, Int, U64, Word, Text, RealList, AtomList };

struct Key {
  std::string name;
  Type type;
  std::optional<std::string> fallback;  // nullopt: required
  std::vector<std::string> choices = {};  // Word only
};

Key required(std::string n, Type t, std::vector<std::string> choices = {}) {
  return {std::move(n), t, std::nullopt, std::move(choices)};
}
Key optional_key(std::string n, Type t, std::string def, std::vector<std::string> choices = {}) {
  return {std::move(n), t, std::move(def), std::move(choices)};
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) {
    throw ConfigError("key '" + key + "': expected a finite real number, got '" + v + "'");
  }
  return out;
}

template <class I>
I parse_integer(const std::string& key, const std::string& v) {
  I out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::string join_reals(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += format_double(xs[i]);
  }
  return out;
}

std::string canonical(const Key& k, const std::string& raw) {
  const std::string v = trim(raw);
  switch (k.type) {
    case Type::Real:
      return format_double(parse_real(k.name, v));
    case Type::RealOrInf:
      if (v == "inf") return v;
      return format_double(parse_real(k.name, v));
    case Type::RealOrAuto:
      if (v == "auto") return v;
      return format_double(parse_real(k.name, v));
    case Type::Int:
      return std::to_string(parse_integer<std::int64_t>(k.name, v));
    case Type::U64:
      return std::to_string(parse_integer<std::uint64_t>(k.name, v));
    case Type::Word:
      if (std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end()) {
        std::string allowed;
        for (const auto& c : k.choices) allowed += (allowed.empty() ? "" : ", ") + c;
        throw ConfigError("key '" + k.name + "': '" + v + "' is not one of {" + allowed + "}");
      }
      return v;
    case Type::Text:
      if (v.empty()) throw ConfigError("key '" + k.name + "' is empty");
      return v;
    case Type::RealList: {
      std::vector<double> xs;
      for (const auto& item : split(v, ',')) xs.push_back(parse_real(k.name, item));
      return join_reals(xs);
    }
    case Type::AtomList: {
      std::string out;
      for (const auto& item : split(v, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) {
          throw ConfigError("key '" + k.name + "': atoms are written 'r:m, r:m, ...'");
        }
        out += (out.empty() ? "" : ", ") + format_double(parse_real(k.name, parts[0])) + ":" +
               format_double(parse_real(k.name, parts[1]));
      }
      return out;
    }
  }
  return v;
}

void apply(Section& out, const Section& in, const std::vector<Key>& keys, const std::string& where) {
  for (const auto& [name, value] : in) {
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const Key& k) { return k.name == name; });
    if (!known) throw ConfigError("[" + where + "]: key '" + name + "' is not valid here");
  }
  for (const auto& k : keys) {
    const auto it = in.find(k.name);
    if (it != in.end()) {
      out[k.name] = canonical(k, it->second);
    } else if (k.fallback) {
      out[k.name] = canonical(k, *k.fallback);
    } else {
      throw ConfigError("[" + where + "]: missing required key '" + k.name + "'");
    }
  }
}

std::vector<Key> mechanism_keys(const std::string& family) {
  std::vector<Key> keys{
      required("family", Type::Word, {"feller", "exponential", "stable", "atoms"}),
      required("alpha", Type::Real),
      optional_key("beta", Type::Real, "0"),
  };
  if (family == "exponential") {
    keys.push_back(required("c", Type::Real));
    keys.push_back(required("b", Type::Real));
  } else if (family == "stable") {
    keys.push_back(required("c", Type::Real));
    keys.push_back(required("a", Type::Real));
    keys.push_back(optional_key("tilt", Type::Real, "0"));
  } else if (family == "atoms") {
    keys.push_back(required("atoms", Type::AtomList));
  }
  return keys;
}

const std::vector<std::string> kSimKinds{"csbp", "spine", "die_by_T", "lambda_skeleton", "T_skeleton"};

std::vector<Key> path_keys() {
  return {
      optional_key("x", Type::Real, "1"),
      optional_key("t", Type::Real, "1"),
      optional_key("N", Type::Int, "10000"),
      optional_key("dt", Type::Real, "0.001"),
      optional_key("eps_jump", Type::RealOrAuto, "auto"),
      optional_key("small_jump_mode", Type::Word, "compensate", {"compensate", "drop"}),
      optional_key("theta_grid", Type::RealList, "0.5, 1, 2"),
  };
}

std::vector<Key> experiment_keys(Command cmd, const Section& raw) {
  auto kind_of = [&]() -> std::string {
    const auto it = raw.find("kind");
    return it == raw.end() ? std::string{} : trim(it->second);
  };
  switch (cmd) {
    case Command::Mech:
      return {optional_key("theta_max", Type::Real, "10"), optional_key("points", Type::Int, "101")};
    case Command::Table: {
      std::vector<Key> keys{required("kind", Type::Word, {"u", "schedule"})};
      if (kind_of() == "u") {
        keys.push_back(required("theta", Type::RealOrInf));
        keys.push_back(required("t", Type::Real));
        keys.push_back(optional_key("points", Type::Int, "101"));
      } else if (kind_of() == "schedule") {
        keys.push_back(required("T", Type::Real));
        keys.push_back(required("t", Type::Real));
        keys.push_back(optional_key("dt", Type::Real, "0.01"));
      }
      return keys;
    }
    case Command::Simulate: {
      std::vector<Key> keys{required("kind", Type::Word, kSimKinds)};
      for (auto& k : path_keys()) keys.push_back(std::move(k));
      keys.push_back(optional_key("paths_limit", Type::Int, "100"));
      const std::string kind = kind_of();
      if (kind == "die_by_T" || kind == "T_skeleton") keys.push_back(required("T", Type::Real));
      if (kind == "lambda_skeleton") keys.push_back(required("lambda", Type::Real));
      if (kind == "lambda_skeleton" || kind == "T_skeleton") {
        keys.push_back(optional_key("init", Type::Word, "poisson", {"poisson", "poisson_positive", "fixed"}));
        const auto it = raw.find("init");
        if (it != raw.end() && trim(it->second) == "fixed") keys.push_back(required("init_n", Type::Int));
      }
      return keys;
    }
    case Command::Sweep: {
      std::vector<Key> keys{optional_key("kind", Type::Word, "sweep", {"sweep"})};
      for (auto& k : path_keys()) keys.push_back(std::move(k));
      keys.push_back(required("T_list", Type::RealList));
      return keys;
    }
    case Command::Verify:
      return {optional_key("kind", Type::Word, "verify", {"verify"}),
              optional_key("N", Type::Int, "0"), optional_key("dt", Type::Real, "0.001")};
  }
  return {};
}

template <class F>
void guard(F&& check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void validate(const RunConfig& c, Command cmd) {
  const auto& e = c.experiment;
  auto positive = [&](const char* key) {
    if (c.has(e, key)) require(c.real(e, key) > 0.0, std::string("[experiment] ") + key + " must be > 0");
  };
  positive("t");
  positive("dt");
  positive("T");
  positive("theta_max");
  if (c.has(e, "x")) require(c.real(e, "x") >= 0.0, "[experiment] x must be >= 0");
  if (c.has(e, "N")) {
    const auto n = c.integer(e, "N");
    require(cmd == Command::Verify ? (n == 0 || n >= 1000) : n >= 2,
            cmd == Command::Verify ? "[experiment] N must be 0 (suite default) or >= 1000"
                                   : "[experiment] N must be >= 2");
  }
  if (c.has(e, "points")) require(c.integer(e, "points") >= 2, "[experiment] points must be >= 2");
  if (c.has(e, "paths_limit")) require(c.integer(e, "paths_limit") >= 0, "[experiment] paths_limit must be >= 0");
  if (c.has(e, "init_n")) require(c.integer(e, "init_n") >= 0, "[experiment] init_n must be >= 0");
  if (c.has(e, "eps_jump") && c.word(e, "eps_jump") != "auto") {
    require(c.real(e, "eps_jump") >= 0.0, "[experiment] eps_jump must be >= 0");
  }
  if (c.has(e, "theta_grid")) {
    for (double th : c.reals(e, "theta_grid")) require(th >= 0.0, "[experiment] theta_grid values must be >= 0");
  }
  if (c.has(e, "theta") && c.word(e, "theta") != "inf") {
    require(c.real(e, "theta") >= 0.0, "[experiment] theta must be >= 0");
  }

  if (c.mechanism.empty()) return;  // verify without a mechanism
  BranchingMechanism mech = build_mechanism(c);
  const std::string kind = c.has(e, "kind") ? c.word(e, "kind") : std::string{};
  guard([&] {
    if (kind == "die_by_T" || kind == "T_skeleton" || kind == "schedule") {
      require(c.real(e, "t") < c.real(e, "T"), "[experiment] t must be < T");
      require(greys_condition(mech), "Grey's condition fails for this mechanism; no finite horizon skeleton");
    }
    if (kind == "u" && c.word(e, "theta") == "inf") {
      require(greys_condition(mech), "Grey's condition fails: u_t(inf) is infinite");
    }
    if (kind == "lambda_skeleton") {
      require(classify(mech) == Criticality::Supercritical, "lambda_skeleton needs a supercritical mechanism");
      require(c.real(e, "lambda") >= lambda_star(mech) * (1.0 - 1e-12),
              "[experiment] lambda must be >= lambda* = " + format_double(lambda_star(mech)));
    }
    if (kind == "spine") {
      require(classify(mech) != Criticality::Supercritical, "spine needs a critical or subcritical mechanism");
    }
    if (cmd == Command::Sweep) {
      require(classify(mech) == Criticality::Subcritical, "sweep needs a subcritical mechanism");
      require(greys_condition(mech), "sweep needs Grey's condition");
      const auto Ts = c.reals(e, "T_list");
      require(!Ts.empty(), "[experiment] T_list is empty");
      for (std::size_t i = 1; i < Ts.size(); ++i) require(Ts[i] > Ts[i - 1], "[experiment] T_list must increase");
      require(c.real(e, "t") < Ts.front(), "[experiment] t must be < min(T_list)");
    }
    if (kind == "lambda_skeleton" || kind == "T_skeleton") {
      if (c.word(e, "init") != "fixed") {
        require(c.real(e, "x") > 0.0 || c.word(e, "init") == "poisson",
                "init = poisson_positive needs x > 0");
      }
    }
  });
}

}  // namespace

std::string to_string(Command c) {
  switch (c) {
    case Command::Mech: return "mech";
    case Command::Table: return "table";
    case Command::Simulate: return "simulate";
    case Command::Verify: return "verify";
    case Command::Sweep: return "sweep";
  }
  return "?";
}

std::string RunConfig::to_ini() const {
  std::ostringstream os;
  auto section = [&](const char* name, const Section& s) {
    if (s.empty()) return;
    os << '[' << name << "]\n";
    for (const auto& [k, v] : s) os << k << " = " << v << '\n';
    os << '\n';
  };
  section("mechanism", mechanism);
  section("experiment", experiment);
  section("run", run);
  return os.str();
}

double RunConfig::real(const Section& s, const std::string& key) const {
  return parse_real(key, word(s, key));
}

std::int64_t RunConfig::integer(const Section& s, const std::string& key) const {
  return parse_integer<std::int64_t>(key, word(s, key));
}

std::uint64_t RunConfig::u64(const Section& s, const std::string& key) const {
  return parse_integer<std::uint64_t>(key, word(s, key));
}

const std::string& RunConfig::word(const Section& s, const std::string& key) const {
  const auto it = s.find(key);
  if (it == s.end()) throw ConfigError("missing key '" + key + "'");
  return it->second;
}

std::vector<double> RunConfig::reals(const Section& s, const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split(word(s, key), ',')) out.push_back(parse_real(key, item));
  return out;
}

std::vector<std::pair<double, double>> RunConfig::atoms(const Section& s, const std::string& key) const {
  std::vector<std::pair<double, double>> out;
  for (const auto& item : split(word(s, key), ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw ConfigError("key '" + key + "': malformed atom '" + item + "'");
    out.emplace_back(parse_real(key, parts[0]), parse_real(key, parts[1]));
  }
  return out;
}

RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [name, node] : tree) {
    Section* target = nullptr;
    if (name == "mechanism") target = &cfg.mechanism;
    if (name == "experiment") target = &cfg.experiment;
    if (name == "run") target = &cfg.run;
    if (!target) {
      throw ConfigError(node.empty() && !node.data().empty()
                            ? "key '" + name + "' must be inside a section"
                            : "unknown section [" + name + "]");
    }
    for (const auto& [key, value] : node) {
      if (!value.empty()) throw ConfigError("nested value under '" + key + "'");
      (*target)[key] = value.data();
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

RunConfig resolve(const RunConfig& raw, Command cmd) {
  RunConfig out;
  const bool needs_mechanism = cmd != Command::Verify;
  if (!raw.mechanism.empty() || needs_mechanism) {
    if (raw.mechanism.empty()) throw ConfigError("missing [mechanism] section");
    const auto fam = raw.mechanism.find("family");
    apply(out.mechanism, raw.mechanism,
          mechanism_keys(fam == raw.mechanism.end() ? std::string{} : trim(fam->second)), "mechanism");
  }
  apply(out.experiment, raw.experiment, experiment_keys(cmd, raw.experiment), "experiment");

  std::vector<Key> run_keys{optional_key("seed", Type::U64, "1"), optional_key("out", Type::Text, "runs"),
                            optional_key("command", Type::Word, to_string(cmd), {to_string(cmd)})};
  if (cmd == Command::Verify) run_keys.push_back(required("suite", Type::Word, suite_names()));
  apply(out.run, raw.run, run_keys, "run");

  validate(out, cmd);
  return out;
}

BranchingMechanism build_mechanism(const RunConfig& cfg) {
  const Section& m = cfg.mechanism;
  const std::string& family = cfg.word(m, "family");
  try {
    LevyMeasure levy = LevyMeasure::none();
    if (family == "exponential") levy = LevyMeasure::exponential(cfg.real(m, "c"), cfg.real(m, "b"));
    if (family == "stable") levy = LevyMeasure::stable_tail(cfg.real(m, "c"), cfg.real(m, "a"), cfg.real(m, "tilt"));
    if (family == "atoms") levy = LevyMeasure::atoms(cfg.atoms(m, "atoms"));
    return BranchingMechanism(cfg.real(m, "alpha"), cfg.real(m, "beta"), std::move(levy));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("[mechanism]: ") + e.what());
  }
}

}  // namespace csbp::cli
