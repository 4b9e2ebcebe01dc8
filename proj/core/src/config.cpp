#include "bilevel/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace bilevel {

namespace {
std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}
}  // namespace

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (cfg.kv_.count(key))
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.kv_[key] = value;
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_string(ss.str());
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << " = " << v << '\n';
  return os.str();
}

std::string ExperimentConfig::require(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("missing required config key '" + key + "'");
  return it->second;
}

std::string ExperimentConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double ExperimentConfig::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + it->second + "'");
  }
  if (pos != it->second.size())
    throw ConfigError("config key '" + key + "': bad number '" + it->second + "'");
  return v;
}

int ExperimentConfig::get_int(const std::string& key, int fallback) const {
  return static_cast<int>(get_double(key, fallback));
}

bool ExperimentConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second == "1" || it->second == "true") return true;
  if (it->second == "0" || it->second == "false") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + it->second + "'");
}

std::vector<std::string> ExperimentConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  auto it = kv_.find(key);
  if (it == kv_.end()) return out;
  std::string cur;
  for (char ch : it->second) {
    if (ch == ',') {
      const std::string item = trim(cur);
      if (!item.empty()) out.push_back(item);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  const std::string item = trim(cur);
  if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<int> ExperimentConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& s : get_list(key)) {
    try {
      out.push_back(std::stoi(s));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad integer '" + s + "'");
    }
  }
  return out;
}

void ExperimentConfig::validate_keys(const std::string& command) const {
  static const std::set<std::string> kProblem = {
      "problem.name",       "problem.n",          "problem.q",
      "problem.seed",       "problem.d",          "problem.dx",
      "problem.dy",         "problem.rho1",       "problem.rho2",
      "problem.corrupt_frac", "problem.label_noise", "problem.data_variance",
      "problem.noise_variance"};
  static const std::set<std::string> kSolver = {
      "solver.kind",       "solver.T",          "solver.K",
      "solver.eta_z",      "solver.eta_x",      "solver.eta_y",
      "solver.eta_m",      "solver.batch",      "solver.record_every",
      "solver.full_batch", "solver.record_grad_oracle", "solver.record_y_dist",
      "solver.x0",         "solver.seed"};
  static const std::set<std::string> kRun = {"run.seeds", "run.name"};
  static const std::set<std::string> kSweepAxes = {"sweep.n", "sweep.T", "sweep.schedules",
                                                   "sweep.K"};
  static const std::set<std::string> kStability = {
      "stability.pairs",       "stability.swap_index", "stability.probe_count",
      "stability.base_seed",   "stability.force_identical"};
  static const std::set<std::string> kCheck = {"check.T", "check.n", "check.z0_norm"};
  static const std::set<std::string> kGradCheck = {"grad_check.points", "grad_check.k_list",
                                                   "grad_check.seed"};

  auto allowed = [&](const std::string& key) {
    if (kProblem.count(key) || kSolver.count(key) || kRun.count(key)) return true;
    if ((command == "run" || command == "sweep" || command == "stability") &&
        kSweepAxes.count(key))
      return true;
    if (command == "stability" && kStability.count(key)) return true;
    if (command == "check" && kCheck.count(key)) return true;
    if (command == "grad-check" && kGradCheck.count(key)) return true;
    return false;
  };
  for (const auto& [k, v] : kv_) {
    (void)v;
    if (!allowed(k))
      throw ConfigError("unknown config key '" + k + "' for command '" + command + "'");
  }
}

}  // namespace bilevel
