#include "kinlab/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kinlab/errors.hpp"

namespace kinlab {

namespace {

double parse_double(const std::string& s, const std::string& where)
{
  const std::string t = boost::algorithm::trim_copy(s);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  const auto res = std::from_chars(t.data(), end, v);
  if (t.empty() || res.ec != std::errc() || res.ptr != end) throw ConfigError(where + ": expected a number, got '" + s + "'");
  return v;
}

std::string location(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

}  // namespace

const std::map<std::string, std::vector<std::string>>& RunConfig::schema()
{
  static const std::map<std::string, std::vector<std::string>> s{
      {"global", {"R", "d", "output_dir", "seed"}},
      {"grid", {"n_cells", "length", "axis", "hermite_nodes", "velocity_nodes", "safety", "n_sigma", "derivative"}},
      {"bgk", {"tau"}},
      {"fields", {"profile", "amplitude", "rho", "T", "u"}},
      {"ce", {"tolerance", "eps_probe"}},
      {"spectral", {"operator_file", "dump_matrix", "path_T_end", "path_points", "samples"}},
      {"solver", {"eps", "t_final", "cfl", "scheme", "advection", "relax_resolution"}},
      {"scan", {"eps_list", "well_prepared", "samples", "slope_min", "slope_max", "snapshot_stride"}},
      {"shear",
       {"profile", "Re", "kx", "kz", "ny", "n_times", "Re_list", "a0", "a_nl", "custom_file", "expected_slope",
        "slope_tolerance", "budget_points"}},
      {"energy",
       {"macroscopic", "d", "n_cells", "velocity_nodes", "amplitude", "eps", "t_final", "relax_resolution",
        "tolerance"}},
      {"entropy", {"d", "velocity_nodes", "anisotropy", "eps", "t_final", "threshold"}},
  };
  return s;
}

RunConfig RunConfig::parse(const std::string& text)
{
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig cfg;
  const auto& sch = schema();
  for (const auto& [section, node] : tree) {
    if (node.empty() && !node.data().empty()) throw ConfigError("key '" + section + "' outside any [section]");
    const auto it = sch.find(section);
    if (it == sch.end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, leaf] : node) {
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        throw ConfigError("unknown config key " + location(section, key));
      cfg.values_[section][key] = boost::algorithm::trim_copy(leaf.data());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool RunConfig::has(const std::string& section, const std::string& key) const { return raw(section, key).has_value(); }

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value)
{
  const auto& sch = schema();
  const auto it = sch.find(section);
  if (it == sch.end() || std::find(it->second.begin(), it->second.end(), key) == it->second.end())
    throw ConfigError("unknown config key " + location(section, key));
  values_[section][key] = value;
}

std::optional<std::string> RunConfig::raw(const std::string& section, const std::string& key) const
{
  const auto s = values_.find(section);
  if (s == values_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

void RunConfig::record(const std::string& section, const std::string& key, nlohmann::json value) const
{
  resolved_[section][key] = std::move(value);
}

double RunConfig::get_double(const std::string& section, const std::string& key, double fallback) const
{
  const auto r = raw(section, key);
  const double v = r ? parse_double(*r, location(section, key)) : fallback;
  record(section, key, v);
  return v;
}

int RunConfig::get_int(const std::string& section, const std::string& key, int fallback) const
{
  const auto r = raw(section, key);
  int v = fallback;
  if (r) {
    const std::string t = boost::algorithm::trim_copy(*r);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
      throw ConfigError(location(section, key) + ": expected an integer, got '" + *r + "'");
  }
  record(section, key, v);
  return v;
}

std::uint64_t RunConfig::get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const
{
  const auto r = raw(section, key);
  std::uint64_t v = fallback;
  if (r) {
    const std::string t = boost::algorithm::trim_copy(*r);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
      throw ConfigError(location(section, key) + ": expected a non-negative integer, got '" + *r + "'");
  }
  record(section, key, v);
  return v;
}

bool RunConfig::get_bool(const std::string& section, const std::string& key, bool fallback) const
{
  const auto r = raw(section, key);
  bool v = fallback;
  if (r) {
    const std::string t = boost::algorithm::to_lower_copy(*r);
    if (t == "true" || t == "1" || t == "yes" || t == "on")
      v = true;
    else if (t == "false" || t == "0" || t == "no" || t == "off")
      v = false;
    else
      throw ConfigError(location(section, key) + ": expected a boolean, got '" + *r + "'");
  }
  record(section, key, v);
  return v;
}

std::string RunConfig::get_string(const std::string& section, const std::string& key, const std::string& fallback) const
{
  const auto r = raw(section, key);
  const std::string v = r ? *r : fallback;
  record(section, key, v);
  return v;
}

std::vector<double> RunConfig::get_list(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const
{
  const auto r = raw(section, key);
  std::vector<double> v = fallback;
  if (r) {
    v.clear();
    std::vector<std::string> parts;
    boost::algorithm::split(parts, *r, boost::algorithm::is_any_of(", \t"), boost::algorithm::token_compress_on);
    for (const auto& p : parts)
      if (!boost::algorithm::trim_copy(p).empty()) v.push_back(parse_double(p, location(section, key)));
  }
  record(section, key, v);
  return v;
}

nlohmann::json RunConfig::echo() const
{
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [section, keys] : values_)
    for (const auto& [key, value] : keys) out[section][key] = value;
  for (const auto& [section, keys] : resolved_)
    for (const auto& [key, value] : keys) out[section][key] = value;
  return out;
}

}  // namespace kinlab
