#include "tdlab/experiment.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tdlab/learners.hpp"

namespace tdlab {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

#ifndef TDLAB_VERSION
#define TDLAB_VERSION "unknown"
#endif

std::string tool_version() { return TDLAB_VERSION; }

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[k];
  return out;
}

bool is_known_environment(std::string_view name) {
  for (const auto& info : environment_catalog()) {
    if (info.name == name) return true;
  }
  return false;
}

System resolve_system(const ExperimentConfig& c) {
  if (!is_known_environment(c.environment)) {
    throw ConfigError("environment", "unknown environment '" + c.environment + "'");
  }
  const bool tabular = c.environment != "acrobot";
  if (tabular && c.damping) throw ConfigError("damping", "applies to the acrobot only");
  if (tabular && c.substep) throw ConfigError("substep", "applies to the acrobot only");
  if (!tabular && c.reward_scale) throw ConfigError("reward_scale", "applies to tabular environments only");
  EnvironmentOverrides ov{c.alpha, c.damping, c.substep, c.reward_scale};
  try {
    return make_environment(c.environment, ov);
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    if (what.find("alpha") != std::string::npos) throw ConfigError("alpha", what);
    if (what.find("substep") != std::string::npos) throw ConfigError("substep", what);
    if (what.find("damping") != std::string::npos) throw ConfigError("damping", what);
    throw ConfigError("environment", what);
  }
}

Eigen::VectorXd initial_weights(const ExperimentConfig& c, std::size_t dim) {
  if (c.initial_weights.empty()) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  if (c.initial_weights.size() != dim) {
    throw ConfigError("initial_weights", "expected " + std::to_string(dim) + " values, got " +
                                             std::to_string(c.initial_weights.size()));
  }
  return to_vector(c.initial_weights);
}

Eigen::VectorXd frozen_weights(const ExperimentConfig& c, const Eigen::VectorXd& w0) {
  if (c.frozen_weights.empty()) return w0;
  if (static_cast<Eigen::Index>(c.frozen_weights.size()) != w0.size()) {
    throw ConfigError("frozen_weights", "expected " + std::to_string(w0.size()) + " values");
  }
  return to_vector(c.frozen_weights);
}

StateId resolve_state(const TabularBmdp& bmdp, const std::string& name, StateId fallback, const char* field) {
  if (name.empty()) return fallback;
  if (auto s = bmdp.find_state(name)) return *s;
  throw ConfigError(field, "unknown state '" + name + "' in " + bmdp.name());
}

LearnerConfig learner_config(const ExperimentConfig& c, double alpha) {
  LearnerConfig lc;
  lc.lambda = c.lambda;
  lc.alpha = alpha;
  lc.schedule = c.schedule;
  lc.variant = c.variant;
  return lc;
}

RunOptions run_options(const ExperimentConfig& c) {
  RunOptions o;
  o.steps = c.steps;
  o.seed = c.seed;
  o.log_every = c.log_every;
  o.divergence_bound = c.divergence_bound;
  o.desync_interval = c.desync_interval;
  o.stop_on_divergence = true;
  return o;
}

bool is_sibling_variant(LearnerVariant v) {
  return v == LearnerVariant::std || v == LearnerVariant::std_nonlinear;
}

// One CSV row per log point.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) out += ',';
        out += cells[k];
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

OracleComparison compare_with_oracle(const TabularSystem& sys, const Policy& policy, const ExperimentConfig& c,
                                     const Eigen::VectorXd& w) {
  OracleComparison oc;
  oc.policy = policy.describe(sys.bmdp);
  const ChainAnalysis a = analyze(sys.bmdp, policy, sys.alpha);
  oc.td_limit = td_limit_ls(a, sys.features);
  try {
    oc.std_limit = std_limit_ls(a, sys.features);
  } catch (const RankDeficientError&) {
  }
  try {
    oc.dt_limit = dt_limit_ls(a, sys.features);
  } catch (const RankDeficientError&) {
  }
  if (c.lambda == 1.0) {
    switch (c.variant) {
      case LearnerVariant::td: oc.target = oc.td_limit; break;
      case LearnerVariant::std:
      case LearnerVariant::std_nonlinear: oc.target = oc.std_limit; break;
      case LearnerVariant::std_scaled:
        if (oc.std_limit) oc.target = 2.0 * *oc.std_limit;
        break;
      case LearnerVariant::dt: oc.target = oc.dt_limit; break;
    }
    if (oc.target) oc.delta = (w - *oc.target).norm();
  }
  oc.errors = error_functionals(a, sys.features, w);
  oc.errors.environment = sys.bmdp.name();
  oc.errors.policy = oc.policy;
  if (is_sibling_variant(c.variant) && oc.std_limit) oc.bound = sibling_bound_check(a, sys.features, c.lambda, w);
  return oc;
}

RunRecord simulate_tabular(const ExperimentConfig& c, const TabularSystem& sys, Table& table) {
  const std::size_t dim = sys.features.dim();
  const Eigen::VectorXd w0 = initial_weights(c, dim);
  const StateId start = resolve_state(sys.bmdp, c.start, sys.start, "start");
  std::optional<StateId> shadow;
  if (!c.shadow_start.empty()) shadow = resolve_state(sys.bmdp, c.shadow_start, start, "shadow_start");

  std::optional<Policy> observed;  // nullopt: greedy on live weights
  BehaviorSpec<StateId> spec = GreedyOnline{c.greedy_mode};
  if (c.behavior == "greedy-online") {
    // keep GreedyOnline
  } else if (c.behavior == "greedy-frozen") {
    observed = greedy_policy(sys.bmdp, frozen_weights(c, w0), sys.features, c.greedy_mode, sys.alpha);
    spec = policy_behavior(*observed);
  } else if (c.behavior == "handcoded" || c.behavior == "converse") {
    throw ConfigError("behavior", "'" + c.behavior + "' applies to the acrobot only");
  } else {
    observed = resolve_policy(sys, c.behavior);
    spec = policy_behavior(*observed);
  }

  std::vector<StateId> tracked;
  if (c.track.empty()) {
    for (StateId i = 0; i < sys.bmdp.n_states(); ++i) tracked.push_back(i);
  } else {
    for (const auto& name : c.track) tracked.push_back(resolve_state(sys.bmdp, name, 0, "track"));
  }

  LearnerConfig lc = learner_config(c, sys.alpha);
  RunResult res;
  try {
    res = run_learner(sys.branches(), spec, lc, sys.features, w0, start, run_options(c), shadow);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("learner", e.what());
  }

  auto policy_at = [&](const Eigen::VectorXd& w) {
    return observed ? *observed : greedy_policy(sys.bmdp, w, sys.features, c.greedy_mode, sys.alpha);
  };

  table.header = {"step"};
  for (std::size_t k = 0; k < dim; ++k) table.header.push_back("w" + std::to_string(k));
  for (StateId i : tracked) table.header.push_back("Jt_" + sys.bmdp.state_name(i));
  table.header.push_back("region");
  if (c.diagnostics) {
    for (const char* h : {"E", "E1", "E2"}) table.header.emplace_back(h);
  }
  std::map<std::string, std::optional<ChainAnalysis>> cache;
  for (const LogPoint& lp : res.log) {
    std::vector<std::string> row{std::to_string(lp.t)};
    for (Eigen::Index k = 0; k < lp.w.size(); ++k) row.push_back(format_double(lp.w[k]));
    for (StateId i : tracked) row.push_back(format_double(detail::dot(lp.w, sys.features(i))));
    row.push_back(sys.region_label(lp.w, c.greedy_mode));
    if (c.diagnostics) {
      const Policy p = policy_at(lp.w);
      const std::string key = p.describe(sys.bmdp);
      auto it = cache.find(key);
      if (it == cache.end()) {
        std::optional<ChainAnalysis> a;
        try {
          a = analyze(sys.bmdp, p, sys.alpha);
        } catch (const ReducibleChainError&) {
        }
        it = cache.emplace(key, std::move(a)).first;
      }
      if (it->second) {
        const ErrorReport er = error_functionals(*it->second, sys.features, lp.w);
        for (double v : {er.E, er.E1, er.E2}) row.push_back(format_double(v));
      } else {
        row.insert(row.end(), 3, "");
      }
    }
    table.rows.push_back(std::move(row));
  }

  RunRecord rec;
  rec.config = c;
  rec.final_w = res.final_state.w;
  rec.steps_done = res.final_state.t;
  rec.status = res.diverged ? "diverged" : "completed";
  rec.exit_code = res.diverged ? kExitDiverged : kExitOk;
  rec.final_region = sys.region_label(rec.final_w, c.greedy_mode);
  rec.log = std::move(res.log);
  if (!res.diverged) {
    try {
      rec.oracle = compare_with_oracle(sys, policy_at(rec.final_w), c, rec.final_w);
    } catch (const ReducibleChainError&) {
    }
  }
  return rec;
}

RunRecord simulate_acrobot(const ExperimentConfig& c, const AcrobotSystem& sys, Table& table) {
  if (!c.track.empty()) throw ConfigError("track", "the acrobot has no named states");
  if (c.diagnostics) throw ConfigError("diagnostics", "error functionals need a tabular environment");
  for (const std::string* s : {&c.start, &c.shadow_start}) {
    if (!s->empty() && *s != "rest") throw ConfigError(s == &c.start ? "start" : "shadow_start", "only 'rest' is available");
  }
  const AcrobotFeatures phi;
  const Eigen::VectorXd w0 = initial_weights(c, phi.dim());
  const double alpha = sys.alpha;
  BehaviorSpec<AcrobotState> spec = GreedyOnline{c.greedy_mode};
  if (c.behavior == "handcoded") {
    spec = acrobot_handcoded_behavior();
  } else if (c.behavior == "converse") {
    spec = acrobot_converse_behavior();
  } else if (c.behavior == "greedy-frozen") {
    const Eigen::VectorXd wf = frozen_weights(c, w0);
    const GreedyMode mode = c.greedy_mode;
    spec = Behavior<AcrobotState>([wf, mode, alpha, phi](const AcrobotState&, const Branch<AcrobotState>& br, Rng&) {
      return lookahead_action(br, detail::dot(wf, phi(br.first)), detail::dot(wf, phi(br.second)), mode, alpha);
    });
  } else if (c.behavior != "greedy-online") {
    throw ConfigError("behavior", "acrobot behaviors are handcoded, converse, greedy-frozen, greedy-online");
  }
  const AcrobotEnvironment env = sys.environment();
  const RunResult res = run_learner(env, spec, learner_config(c, alpha), phi, w0, sys.start, run_options(c));

  table.header = {"step"};
  for (std::size_t k = 0; k < phi.dim(); ++k) table.header.push_back("w" + std::to_string(k));
  table.header.push_back("region");
  for (const LogPoint& lp : res.log) {
    std::vector<std::string> row{std::to_string(lp.t)};
    for (Eigen::Index k = 0; k < lp.w.size(); ++k) row.push_back(format_double(lp.w[k]));
    row.push_back(sys.region_label(lp.w));
    table.rows.push_back(std::move(row));
  }
  RunRecord rec;
  rec.config = c;
  rec.final_w = res.final_state.w;
  rec.steps_done = res.final_state.t;
  rec.status = res.diverged ? "diverged" : "completed";
  rec.exit_code = res.diverged ? kExitDiverged : kExitOk;
  rec.final_region = sys.region_label(rec.final_w);
  rec.log = res.log;
  return rec;
}

RunRecord simulate(const ExperimentConfig& c, Table& table) {
  const System sys = resolve_system(c);
  if (const auto* t = std::get_if<TabularSystem>(&sys)) return simulate_tabular(c, *t, table);
  return simulate_acrobot(c, std::get<AcrobotSystem>(sys), table);
}

json config_json(const ExperimentConfig& c) {
  json j = json::object();
  const std::string text = emit_config(c);
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

json oracle_json(const OracleComparison& oc) {
  json j;
  j["policy"] = oc.policy;
  j["td_limit"] = to_json(oc.td_limit);
  j["std_limit"] = oc.std_limit ? to_json(*oc.std_limit) : json(nullptr);
  j["dt_limit"] = oc.dt_limit ? to_json(*oc.dt_limit) : json(nullptr);
  j["target"] = oc.target ? to_json(*oc.target) : json(nullptr);
  j["delta"] = oc.target ? json(oc.delta) : json(nullptr);
  j["errors"] = {{"E", oc.errors.E}, {"E1", oc.errors.E1}, {"E2", oc.errors.E2}, {"E_DT", oc.errors.E_DT}};
  if (oc.bound) {
    j["bound"] = {{"observed", oc.bound->observed}, {"infimum", oc.bound->infimum}, {"factor", oc.bound->factor},
                  {"bound", oc.bound->bound},       {"pass", oc.bound->pass}};
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// Removes the files a previous manifest in `dir` owned, then the manifest.
void clear_previous_run(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) return;
  try {
    std::ifstream in(manifest);
    const json old = json::parse(in);
    if (old.contains("files")) {
      for (const auto& f : old["files"]) {
        const fs::path p = dir / f.get<std::string>();
        if (p.parent_path() == dir) fs::remove(p);
      }
    }
  } catch (const std::exception&) {
    // Unreadable manifest: leave other files alone and overwrite it.
  }
  fs::remove(manifest);
}

}  // namespace

Policy resolve_policy(const TabularSystem& sys, std::string_view spec) {
  const TabularBmdp& b = sys.bmdp;
  if (spec == "optimal") return sys.optimal_policy;
  if (spec == "uniform") return Policy::uniform(b);
  auto action_id = [&](std::string_view name) {
    if (auto a = b.find_action(name)) return *a;
    throw ConfigError("behavior", "unknown action '" + std::string(name) + "'");
  };
  if (spec.starts_with("constant:")) return Policy::constant_action(b, action_id(spec.substr(9)));
  if (spec.starts_with("actions:")) {
    const auto names = split_list(spec.substr(8));
    if (static_cast<int>(names.size()) != b.n_states()) {
      throw ConfigError("behavior", "actions: needs one action per state (" + std::to_string(b.n_states()) + ")");
    }
    std::vector<ActionId> acts;
    for (const auto& n : names) acts.push_back(action_id(n));
    try {
      return Policy::fixed(b, std::move(acts));
    } catch (const std::exception& e) {
      throw ConfigError("behavior", e.what());
    }
  }
  throw ConfigError("behavior", "unknown behavior '" + std::string(spec) +
                                    "' (optimal, uniform, constant:<a>, actions:<a,...>, greedy-frozen, greedy-online)");
}

RunRecord simulate_experiment(const ExperimentConfig& config) {
  Table table;
  return simulate(config, table);
}

RunRecord run_experiment(const ExperimentConfig& config) {
  const std::string started = utc_now();
  Table table;
  RunRecord rec = simulate(config, table);

  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  clear_previous_run(dir);
  rec.csv_path = dir / config.csv_name;
  rec.manifest_path = dir / "manifest.json";
  write_text(rec.csv_path, table.render());

  json m;
  m["kind"] = "run";
  m["tool"] = "tdlab";
  m["version"] = tool_version();
  m["config"] = config_json(config);
  m["seed"] = config.seed;
  m["rng"] = Rng::algorithm();
  m["started_at"] = started;
  m["finished_at"] = utc_now();
  m["status"] = rec.status;
  m["exit_code"] = rec.exit_code;
  m["steps_done"] = rec.steps_done;
  m["final_weights"] = to_json(rec.final_w);
  m["final_region"] = rec.final_region;
  m["oracle"] = rec.oracle ? oracle_json(*rec.oracle) : json(nullptr);
  json checks;
  checks["completed"] = rec.status == "completed";
  if (rec.oracle && rec.oracle->bound) checks["sibling_bound"] = rec.oracle->bound->pass;
  m["checks"] = checks;
  m["files"] = json::array({config.csv_name});
  write_text(rec.manifest_path, m.dump(2) + "\n");
  return rec;
}

std::vector<CompareRow> run_compare(const std::vector<std::pair<std::string, ExperimentConfig>>& configs,
                                    const std::vector<std::uint64_t>& seeds, const fs::path& out_dir) {
  if (configs.size() < 2) throw ConfigError("compare", "needs at least two learner configs");
  if (seeds.empty()) throw ConfigError("seeds", "needs at least one seed");
  fs::create_directories(out_dir);
  clear_previous_run(out_dir);
  std::vector<CompareRow> rows;
  std::vector<std::string> labels;
  for (const auto& [label, cfg0] : configs) {
    std::string unique = label;
    for (int k = 2; std::find(labels.begin(), labels.end(), unique) != labels.end(); ++k) {
      unique = label + "-" + std::to_string(k);
    }
    labels.push_back(unique);
    for (std::uint64_t seed : seeds) {
      ExperimentConfig cfg = cfg0;
      cfg.seed = seed;
      cfg.output_dir = (out_dir / (unique + "-seed" + std::to_string(seed))).string();
      CompareRow row{unique, seed, {}, {}};
      try {
        row.record = run_experiment(cfg);
      } catch (const std::exception& e) {
        row.error = e.what();
        row.record.config = cfg;
        row.record.status = "failed";
      }
      rows.push_back(std::move(row));
    }
  }

  Table t;
  t.header = {"label", "seed", "variant", "status", "final_w", "region", "E", "E1", "E2", "oracle_delta"};
  json runs = json::array();
  for (const auto& r : rows) {
    std::string w;
    for (Eigen::Index k = 0; k < r.record.final_w.size(); ++k) w += (k ? " " : "") + format_double(r.record.final_w[k]);
    const auto& oc = r.record.oracle;
    t.rows.push_back({r.label, std::to_string(r.seed), to_string(r.record.config.variant), r.record.status, w,
                      r.record.final_region, oc ? format_double(oc->errors.E) : "",
                      oc ? format_double(oc->errors.E1) : "", oc ? format_double(oc->errors.E2) : "",
                      oc && oc->target ? format_double(oc->delta) : ""});
    runs.push_back({{"label", r.label},
                    {"seed", r.seed},
                    {"dir", fs::path(r.record.config.output_dir).filename().string()},
                    {"status", r.record.status},
                    {"error", r.error}});
  }
  write_text(out_dir / "compare.csv", t.render());
  json m;
  m["kind"] = "compare";
  m["tool"] = "tdlab";
  m["version"] = tool_version();
  m["finished_at"] = utc_now();
  m["seeds"] = seeds;
  m["runs"] = runs;
  bool partial = false;
  for (const auto& r : rows) partial = partial || !r.error.empty() || r.record.status != "completed";
  m["checks"] = {{"all_completed", !partial}};
  m["files"] = json::array({"compare.csv"});
  write_text(out_dir / "manifest.json", m.dump(2) + "\n");
  return rows;
}

std::string format_compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "label" << std::setw(6) << "seed" << std::setw(15) << "variant"
     << std::setw(11) << "status" << std::setw(26) << "final w" << std::setw(12) << "region" << std::setw(13)
     << "E" << std::setw(13) << "E1" << std::setw(13) << "E2" << "oracle delta\n";
  for (const auto& r : rows) {
    std::ostringstream w;
    w << std::setprecision(6);
    for (Eigen::Index k = 0; k < r.record.final_w.size(); ++k) w << (k ? " " : "") << r.record.final_w[k];
    os << std::left << std::setw(18) << r.label << std::setw(6) << r.seed << std::setw(15)
       << to_string(r.record.config.variant) << std::setw(11) << r.record.status << std::setw(26) << w.str()
       << std::setw(12) << r.record.final_region << std::setprecision(5);
    if (const auto& oc = r.record.oracle) {
      os << std::setw(13) << oc->errors.E << std::setw(13) << oc->errors.E1 << std::setw(13) << oc->errors.E2;
      if (oc->target) os << oc->delta;
    } else {
      os << std::setw(13) << "-" << std::setw(13) << "-" << std::setw(13) << "-";
    }
    if (!r.error.empty()) os << "  error: " << r.error;
    os << '\n';
  }
  return os.str();
}

std::string oracle_report_json(const OracleRequest& req) {
  ExperimentConfig probe;
  probe.environment = req.environment;
  probe.alpha = req.overrides.alpha;
  probe.damping = req.overrides.damping;
  probe.substep = req.overrides.substep;
  probe.reward_scale = req.overrides.reward_scale;
  const System sys = resolve_system(probe);
  Rng rng(req.seed);
  json j;
  j["environment"] = req.environment;

  if (const auto* acro = std::get_if<AcrobotSystem>(&sys)) {
    j["alpha"] = acro->alpha;
    j["damping"] = acro->params.damping;
    const AcrobotEnvironment env = acro->environment();
    json r;
    for (const auto& [name, beh] : {std::pair{"handcoded", acrobot_handcoded_behavior()},
                                    std::pair{"converse", acrobot_converse_behavior()}}) {
      const RolloutEstimate rest = rollout_estimate(env, beh, acro->start, 1, acro->alpha, req.epsilon, rng);
      const RolloutEstimate steady =
          on_policy_rollout_average(env, beh, acro->start, 2000, std::max<std::int64_t>(req.rollouts, 2), 100, 1,
                                    acro->alpha, req.epsilon, rng);
      r[name] = {{"from_rest", rest.mean},
                 {"on_policy_mean", steady.mean},
                 {"on_policy_standard_error", steady.standard_error},
                 {"horizon", rest.horizon}};
    }
    j["rollouts"] = r;
    if (req.w) {
      if (req.w->size() != 1) throw ConfigError("w", "the acrobot has a single weight");
      j["region"] = acro->region_label(to_vector(*req.w));
    }
    return j.dump(2) + "\n";
  }

  const auto& tab = std::get<TabularSystem>(sys);
  const TabularBmdp& b = tab.bmdp;
  std::optional<Eigen::VectorXd> w;
  if (req.w) {
    if (req.w->size() != tab.features.dim()) {
      throw ConfigError("w", "expected " + std::to_string(tab.features.dim()) + " weights");
    }
    w = to_vector(*req.w);
  }
  if (req.policy == "greedy" && !w) throw ConfigError("policy", "greedy needs weights");
  const Policy policy = req.policy == "greedy" ? greedy_policy(b, *w, tab.features) : resolve_policy(tab, req.policy);
  if (!(req.lambda >= 0.0 && req.lambda <= 1.0)) throw ConfigError("lambda", "must lie in [0, 1]");

  const ChainAnalysis a = analyze(b, policy, tab.alpha);
  j["alpha"] = tab.alpha;
  j["lambda"] = req.lambda;
  j["policy"] = policy.describe(b);
  json states = json::array();
  for (StateId i = 0; i < b.n_states(); ++i) {
    states.push_back({{"state", b.state_name(i)}, {"value", a.values[i]}, {"stationary", a.dist.pi[i]}});
  }
  j["states"] = states;
  json pairs = json::array();
  for (StateId i = 0; i < b.n_states(); ++i) {
    for (StateId k = 0; k < b.n_states(); ++k) {
      if (a.dist.pair_pi(i, k) == 0.0) continue;
      pairs.push_back({{"state", b.state_name(i)},
                       {"sibling", b.state_name(k)},
                       {"mass", a.dist.pair_pi(i, k)},
                       {"eta", eta(a.dist.pair_pi, i, k)}});
    }
  }
  j["pairs"] = pairs;
  json limits;
  limits["td"] = to_json(td_limit_ls(a, tab.features));
  try {
    limits["std"] = to_json(std_limit_ls(a, tab.features));
  } catch (const RankDeficientError& e) {
    limits["std"] = e.what();
  }
  try {
    limits["dt"] = to_json(dt_limit_ls(a, tab.features));
  } catch (const RankDeficientError& e) {
    limits["dt"] = e.what();
  }
  j["limits"] = limits;
  json sc = json::array();
  for (const auto& e : sign_condition_check(a)) {
    sc.push_back({{"i", b.state_name(e.i)},
                  {"j", b.state_name(e.j)},
                  {"eta_ij", e.eta_ij},
                  {"eta_ji", e.eta_ji},
                  {"preferred", e.preferred ? json(b.state_name(*e.preferred)) : json(nullptr)},
                  {"target", e.target},
                  {"true_difference", e.true_difference},
                  {"condition_holds", e.condition_holds},
                  {"sign_correct", e.sign_correct}});
  }
  j["sign_condition"] = sc;
  if (w) {
    const ErrorReport er = error_functionals(a, tab.features, *w);
    j["w"] = to_json(*w);
    j["approx_values"] = to_json(tab.features.matrix() * *w);
    j["region"] = tab.region_label(*w);
    j["errors"] = {{"E", er.E}, {"E1", er.E1}, {"E2", er.E2}, {"E_DT", er.E_DT}};
    try {
      const BoundCheck bc = sibling_bound_check(a, tab.features, req.lambda, *w);
      j["sibling_bound"] = {{"observed", bc.observed}, {"infimum", bc.infimum}, {"factor", bc.factor},
                             {"bound", bc.bound},       {"pass", bc.pass}};
    } catch (const RankDeficientError& e) {
      j["sibling_bound"] = e.what();
    }
  }
  if (req.rollouts > 0) {
    const TabularBranches br = tab.branches();
    const Behavior<StateId> beh = policy_behavior(policy);
    json ro = json::array();
    for (StateId i = 0; i < b.n_states(); ++i) {
      const RolloutEstimate e = rollout_estimate(br, beh, i, req.rollouts, tab.alpha, req.epsilon, rng);
      ro.push_back({{"state", b.state_name(i)}, {"mean", e.mean}, {"standard_error", e.standard_error}});
    }
    j["rollouts"] = ro;
  }
  return j.dump(2) + "\n";
}

}  // namespace tdlab
