#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "csbp/mechanism.hpp"

namespace csbp::cli {

enum class Command { Mech, Table, Simulate, Verify, Sweep };

std::string to_string(Command c);

/// Canonicalised key/value pairs of one INI section.
using Section = std::map<std::string, std::string>;

/// Sections [mechanism], [experiment] and [run]. After resolve() every value
/// is in canonical form and every applicable default is filled in, so the
/// serialized text reproduces the run on its own.
struct RunConfig {
  Section mechanism;
  Section experiment;
  Section run;

  bool operator==(const RunConfig&) const = default;

  std::string to_ini() const;

  bool has(const Section& s, const std::string& key) const { return s.count(key) > 0; }
  double real(const Section& s, const std::string& key) const;
  std::int64_t integer(const Section& s, const std::string& key) const;
  std::uint64_t u64(const Section& s, const std::string& key) const;
  const std::string& word(const Section& s, const std::string& key) const;
  std::vector<double> reals(const Section& s, const std::string& key) const;
  std::vector<std::pair<double, double>> atoms(const Section& s, const std::string& key) const;
};

/// Syntax only: sections must be known and keys unique. Throws ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Checks every key against the command (and experiment kind), converts values
/// to canonical form, fills defaults and runs semantic validation.
RunConfig resolve(const RunConfig& raw, Command cmd);

BranchingMechanism build_mechanism(const RunConfig& cfg);

}  // namespace csbp::cli
