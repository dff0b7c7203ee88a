#pragma once

#include <filesystem>
#include <string>

namespace kdrank::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Locations fixed at configure time.
std::filesystem::path source_dir();
std::filesystem::path cli_binary();
std::filesystem::path work_dir();

Outcome gradient_correctness();
Outcome margin_mse_algebra();
Outcome metric_oracles();
Outcome scorer_oracles();
Outcome cache_soundness();
Outcome toy_pipeline();
Outcome margin_statistics();
Outcome latency_ordering();
Outcome determinism();

/// Output directory of scripts/run_pipeline.sh on configs/smoke.json with
/// seed 7. Each name runs the script once per process; throws when the
/// script fails.
std::filesystem::path cli_pipeline(const std::string& name);

}  // namespace kdrank::acceptance
