#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace maclab {

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
};

// Executes one batch command described by a JSON config. Returns the process
// exit status; artifacts are CSV files plus a sidecar metadata JSON.
int run_config(const std::string& command, const nlohmann::json& config,
               const RunOverrides& overrides);

int run_from_file(const std::string& command, const std::string& config_path,
                  const RunOverrides& overrides);

// Groups trial CSVs by configuration columns and emits means and standard
// errors per group.
void aggregate_csvs(const std::vector<std::string>& inputs, const std::string& out_path);

}  // namespace maclab
