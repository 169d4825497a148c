#include "tdlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace tdlab {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class Int>
Int parse_int(std::string_view text, std::string_view field) {
  Int v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(std::string(field), "expected an integer, got '" + std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view text, std::string_view field) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(std::string(field), "expected true or false, got '" + std::string(text) + "'");
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ',';
    out += format_double(v[k]);
  }
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ',';
    out += v[k];
  }
  return out;
}

// Converts library exceptions into field-tagged config errors.
template <class F>
auto field_guard(std::string_view field, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string(field), e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double_field(std::string_view text, std::string_view field) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(std::string(field), "expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    out.emplace_back(trim(text.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<double> parse_double_list(std::string_view text, std::string_view field) {
  std::vector<double> out;
  for (const std::string& item : split_list(text)) out.push_back(parse_double_field(item, field));
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "environment", "alpha",          "damping",      "substep",        "reward_scale",    "variant",
      "lambda",      "schedule",       "behavior",     "greedy_mode",    "initial_weights", "frozen_weights",
      "start",       "shadow_start",   "steps",        "seed",           "log_every",       "divergence_bound",
      "desync_interval", "diagnostics", "track",       "output_dir",     "csv_name"};
  return keys;
}

std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream os;
  auto line = [&](std::string_view key, const std::string& value) { os << key << " = " << value << '\n'; };
  auto opt = [&](std::string_view key, const std::optional<double>& v) {
    if (v) line(key, format_double(*v));
  };
  line("environment", c.environment);
  opt("alpha", c.alpha);
  opt("damping", c.damping);
  opt("substep", c.substep);
  opt("reward_scale", c.reward_scale);
  line("variant", to_string(c.variant));
  line("lambda", format_double(c.lambda));
  line("schedule", c.schedule.to_string());
  line("behavior", c.behavior);
  line("greedy_mode", to_string(c.greedy_mode));
  if (!c.initial_weights.empty()) line("initial_weights", join_doubles(c.initial_weights));
  if (!c.frozen_weights.empty()) line("frozen_weights", join_doubles(c.frozen_weights));
  if (!c.start.empty()) line("start", c.start);
  if (!c.shadow_start.empty()) line("shadow_start", c.shadow_start);
  line("steps", std::to_string(c.steps));
  line("seed", std::to_string(c.seed));
  line("log_every", std::to_string(c.log_every));
  line("divergence_bound", format_double(c.divergence_bound));
  line("desync_interval", std::to_string(c.desync_interval));
  line("diagnostics", c.diagnostics ? "true" : "false");
  if (!c.track.empty()) line("track", join_strings(c.track));
  line("output_dir", c.output_dir);
  line("csv_name", c.csv_name);
  return os.str();
}

ExperimentConfig parse_config(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
    }
    const std::string key(trim(raw.substr(0, eq)));
    const std::string value(trim(raw.substr(eq + 1)));
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError(key, "unknown key");
    if (!kv.emplace(key, value).second) throw ConfigError(key, "duplicate key");
  }

  ExperimentConfig c;
  auto get = [&](std::string_view key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto* v = get("environment")) c.environment = *v;
  if (auto* v = get("alpha")) c.alpha = parse_double_field(*v, "alpha");
  if (auto* v = get("damping")) c.damping = parse_double_field(*v, "damping");
  if (auto* v = get("substep")) c.substep = parse_double_field(*v, "substep");
  if (auto* v = get("reward_scale")) c.reward_scale = parse_double_field(*v, "reward_scale");
  if (auto* v = get("variant")) c.variant = field_guard("variant", [&] { return parse_learner_variant(*v); });
  if (auto* v = get("lambda")) c.lambda = parse_double_field(*v, "lambda");
  if (auto* v = get("schedule")) c.schedule = field_guard("schedule", [&] { return StepSchedule::parse(*v); });
  if (auto* v = get("behavior")) c.behavior = *v;
  if (auto* v = get("greedy_mode")) c.greedy_mode = field_guard("greedy_mode", [&] { return parse_greedy_mode(*v); });
  if (auto* v = get("initial_weights")) c.initial_weights = parse_double_list(*v, "initial_weights");
  if (auto* v = get("frozen_weights")) c.frozen_weights = parse_double_list(*v, "frozen_weights");
  if (auto* v = get("start")) c.start = *v;
  if (auto* v = get("shadow_start")) c.shadow_start = *v;
  if (auto* v = get("steps")) c.steps = parse_int<std::int64_t>(*v, "steps");
  if (auto* v = get("seed")) c.seed = parse_int<std::uint64_t>(*v, "seed");
  if (auto* v = get("log_every")) c.log_every = parse_int<std::int64_t>(*v, "log_every");
  if (auto* v = get("divergence_bound")) c.divergence_bound = parse_double_field(*v, "divergence_bound");
  if (auto* v = get("desync_interval")) c.desync_interval = parse_int<std::int64_t>(*v, "desync_interval");
  if (auto* v = get("diagnostics")) c.diagnostics = parse_bool(*v, "diagnostics");
  if (auto* v = get("track")) c.track = split_list(*v);
  if (auto* v = get("output_dir")) c.output_dir = *v;
  if (auto* v = get("csv_name")) c.csv_name = *v;

  if (c.steps < 0) throw ConfigError("steps", "must be >= 0");
  if (c.log_every < 0) throw ConfigError("log_every", "must be >= 0");
  if (c.desync_interval < 0) throw ConfigError("desync_interval", "must be >= 0");
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) throw ConfigError("lambda", "must lie in [0, 1]");
  if (!(c.divergence_bound > 0.0)) throw ConfigError("divergence_bound", "must be positive");
  if (c.csv_name.empty() || c.csv_name.find('/') != std::string::npos) {
    throw ConfigError("csv_name", "must be a plain file name");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace tdlab
