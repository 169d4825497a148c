#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tdlab/experiment.hpp"

namespace tdlab {

struct PresetCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct PresetRun {
  std::string label;
  RunRecord record;
};

struct PresetReport {
  std::string id;
  std::string title;
  std::vector<PresetRun> runs;
  std::vector<PresetCheck> checks;
  std::map<std::string, double> metrics;
  /// Published readings kept for reference; never asserted.
  std::vector<std::string> notes;
  std::filesystem::path manifest_path;

  bool passed() const;
  const RunRecord& run(const std::string& label) const;
};

struct ReproduceOptions {
  std::filesystem::path out_dir = "runs";
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> log_every;
  /// Multiplies every pinned step count (smoke tests only; checks are
  /// calibrated for 1).
  double step_scale = 1.0;
  bool write_files = true;
};

/// fig2, fig4, fig10, sec4_4, acrobot.
const std::vector<std::string>& preset_ids();

/// The pinned runs of a preset, labelled, before options are applied.
std::vector<std::pair<std::string, ExperimentConfig>> preset_configs(const std::string& id);

/// Runs a preset, evaluates its checks and writes `<out_dir>/<id>/` with one
/// sub-directory per run and a preset manifest. Throws ConfigError for an
/// unknown id.
PresetReport reproduce(const std::string& id, const ReproduceOptions& options = {});

/// Human-readable check summary.
std::string format_report(const PresetReport& report);

}  // namespace tdlab
