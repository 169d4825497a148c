// tdlab: run learners, reproduce figure data, query the analytic oracles.
//
//   tdlab list-envs
//   tdlab run <config> [--seed N] [--out DIR] [--log-every N]
//   tdlab reproduce <fig2|fig4|fig10|sec4_4|acrobot> [--seed N] [--out DIR] [--log-every N]
//                   [--step-scale X] [--export-configs DIR]
//   tdlab oracle --env NAME [--policy P] [--alpha A] [--lambda L] [--w W,...]
//   tdlab compare <config> <config>... [--seeds 1,2,3] [--out DIR]
//
// Exit codes: 0 ok, 1 configuration or usage error, 2 divergence guard,
// 3 a preset check failed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tdlab/config.hpp"
#include "tdlab/environments.hpp"
#include "tdlab/experiment.hpp"
#include "tdlab/reproduce.hpp"

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::int64_t> log_every;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Override the RNG seed");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--log-every", c.log_every, "Log interval in steps (0: first and last only)")
      ->check(CLI::NonNegativeNumber);
}

void apply(const Common& c, tdlab::ExperimentConfig& cfg) {
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output_dir = *c.out;
  if (c.log_every) cfg.log_every = *c.log_every;
}

int cmd_list_envs() {
  std::cout << std::left << std::setw(20) << "name" << std::setw(12) << "kind" << std::setw(8) << "alpha"
            << "description\n";
  for (const auto& e : tdlab::environment_catalog()) {
    std::cout << std::setw(20) << e.name << std::setw(12) << e.kind << std::setw(8) << e.default_alpha
              << e.description << "\n";
  }
  return tdlab::kExitOk;
}

int cmd_run(const std::string& path, const Common& common) {
  tdlab::ExperimentConfig cfg = tdlab::load_config(path);
  apply(common, cfg);
  const tdlab::RunRecord rec = tdlab::run_experiment(cfg);
  std::cout << "status: " << rec.status << " after " << rec.steps_done << " steps\n";
  std::cout << "final w:";
  for (Eigen::Index k = 0; k < rec.final_w.size(); ++k) std::cout << " " << rec.final_w[k];
  std::cout << "  [" << rec.final_region << "]\n";
  if (rec.oracle && rec.oracle->target) {
    std::cout << "oracle limit:";
    for (Eigen::Index k = 0; k < rec.oracle->target->size(); ++k) std::cout << " " << (*rec.oracle->target)[k];
    std::cout << "  (distance " << rec.oracle->delta << ")\n";
  }
  std::cout << "wrote " << rec.csv_path.string() << " and " << rec.manifest_path.string() << "\n";
  if (rec.exit_code == tdlab::kExitDiverged) std::cerr << "divergence guard tripped (||w|| > " << cfg.divergence_bound << ")\n";
  return rec.exit_code;
}

int cmd_reproduce(const std::string& id, const Common& common, double step_scale) {
  tdlab::ReproduceOptions opt;
  opt.seed = common.seed;
  opt.log_every = common.log_every;
  opt.step_scale = step_scale;
  if (common.out) opt.out_dir = *common.out;
  const tdlab::PresetReport rep = tdlab::reproduce(id, opt);
  std::cout << tdlab::format_report(rep);
  std::cout << "manifest: " << rep.manifest_path.string() << "\n";
  for (const auto& r : rep.runs) {
    if (r.record.exit_code == tdlab::kExitDiverged) return tdlab::kExitDiverged;
  }
  return rep.passed() ? tdlab::kExitOk : tdlab::kExitCheckFailed;
}

// Writes each pinned run of a preset as a config file, without running it.
int cmd_export(const std::string& id, const std::filesystem::path& dir) {
  for (auto [label, cfg] : tdlab::preset_configs(id)) {
    cfg.output_dir = "runs/" + id + "/" + label;
    const std::filesystem::path path = dir / id / (label + ".conf");
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    out << "# " << id << " preset, run " << label << "\n" << tdlab::emit_config(cfg);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    std::cout << path.string() << "\n";
  }
  return tdlab::kExitOk;
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& seeds_text, const Common& common) {
  std::vector<std::pair<std::string, tdlab::ExperimentConfig>> configs;
  for (const auto& p : paths) {
    tdlab::ExperimentConfig cfg = tdlab::load_config(p);
    if (common.log_every) cfg.log_every = *common.log_every;
    configs.emplace_back(std::filesystem::path(p).stem().string(), cfg);
  }
  std::vector<std::uint64_t> seeds;
  for (double s : tdlab::parse_double_list(seeds_text, "seeds")) {
    if (s < 0 || s != static_cast<double>(static_cast<std::uint64_t>(s))) {
      throw tdlab::ConfigError("seeds", "seeds must be non-negative integers");
    }
    seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (common.seed) seeds = {*common.seed};
  const std::string out = common.out.value_or("runs/compare");
  const auto rows = tdlab::run_compare(configs, seeds, out);
  std::cout << tdlab::format_compare_table(rows);
  std::cout << "wrote " << out << "/compare.csv\n";
  bool diverged = false;
  bool failed = false;
  for (const auto& r : rows) {
    diverged = diverged || r.record.status == "diverged";
    failed = failed || !r.error.empty();
  }
  if (failed) return tdlab::kExitConfig;
  return diverged ? tdlab::kExitDiverged : tdlab::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tdlab: TD(lambda), STD(lambda) and DT(lambda) on binary MDPs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tdlab::tool_version());

  app.add_subcommand("list-envs", "List built-in environments");

  Common run_common;
  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one configured experiment");
  run->add_option("config", config_path, "Config file (key = value lines)")->required();
  add_common(run, run_common);

  Common rep_common;
  std::string figure;
  double step_scale = 1.0;
  auto* rep = app.add_subcommand("reproduce", "Regenerate the data behind a figure and check it");
  rep->add_option("figure_id", figure, "fig2, fig4, fig10, sec4_4 or acrobot")
      ->required()
      ->check(CLI::IsMember(tdlab::preset_ids()));
  rep->add_option("--step-scale", step_scale, "Scale every pinned step count (checks assume 1)")
      ->check(CLI::PositiveNumber);
  std::string export_dir;
  rep->add_option("--export-configs", export_dir, "Write the preset's run configs under DIR and exit");
  add_common(rep, rep_common);

  tdlab::OracleRequest oreq;
  std::optional<double> o_alpha, o_damping, o_substep, o_scale;
  std::string o_w;
  auto* orc = app.add_subcommand("oracle", "Print analytic ground truth as JSON");
  orc->add_option("--env", oreq.environment, "Environment name")->required();
  orc->add_option("--policy", oreq.policy, "optimal, uniform, constant:<a>, actions:<a,...> or greedy (needs --w)");
  orc->add_option("--alpha", o_alpha, "Discount factor override");
  orc->add_option("--lambda", oreq.lambda, "Trace decay for the bound factor");
  orc->add_option("--w", o_w, "Weights, comma separated");
  orc->add_option("--damping", o_damping, "Acrobot damping constant");
  orc->add_option("--substep", o_substep, "Acrobot integrator substep");
  orc->add_option("--reward-scale", o_scale, "Multiply tabular rewards");
  orc->add_option("--rollouts", oreq.rollouts, "Rollouts per state (0 disables)")->check(CLI::NonNegativeNumber);
  orc->add_option("--epsilon", oreq.epsilon, "Rollout truncation tolerance")->check(CLI::PositiveNumber);
  orc->add_option("--seed", oreq.seed, "Rollout seed");

  Common cmp_common;
  std::vector<std::string> cmp_paths;
  std::string cmp_seeds = "1,2,3";
  auto* cmp = app.add_subcommand("compare", "Run several configs over a seed grid");
  cmp->add_option("configs", cmp_paths, "Two or more config files")->required()->expected(2, -1);
  cmp->add_option("--seeds", cmp_seeds, "Comma-separated seed grid");
  add_common(cmp, cmp_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? tdlab::kExitOk : tdlab::kExitConfig;
  }

  try {
    if (app.got_subcommand("list-envs")) return cmd_list_envs();
    if (run->parsed()) return cmd_run(config_path, run_common);
    if (rep->parsed()) {
      if (!export_dir.empty()) return cmd_export(figure, export_dir);
      return cmd_reproduce(figure, rep_common, step_scale);
    }
    if (cmp->parsed()) return cmd_compare(cmp_paths, cmp_seeds, cmp_common);
    if (orc->parsed()) {
      oreq.overrides = {o_alpha, o_damping, o_substep, o_scale};
      if (!o_w.empty()) oreq.w = tdlab::parse_double_list(o_w, "w");
      std::cout << tdlab::oracle_report_json(oreq);
      return tdlab::kExitOk;
    }
  } catch (const tdlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return tdlab::kExitConfig;
  } catch (const tdlab::DivergenceError& e) {
    std::cerr << e.what() << "\n";
    return tdlab::kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return tdlab::kExitConfig;
  }
  return tdlab::kExitOk;
}
