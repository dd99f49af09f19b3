#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hamlearn/evaluation.hpp"
#include "hamlearn/training.hpp"

namespace hamlearn::cli {

inline constexpr const char* kToolVersion = "hamlearn 1.0.0";

/// One experiment: data generation + model + training + evaluation settings.
/// Exactly one of (dt, t_final) may be set; the other is derived.
struct ExperimentConfig {
    std::string system_id = "pendulum-k1";
    int n = 500;
    int m = 5;
    double dt = 0.0;      // 0 = unset
    double t_final = 0.0; // 0 = unset
    double eps = 0.0;
    bool project_noise = false;
    double rtol = 1e-10;
    double atol = 1e-12;
    std::uint64_t master_seed = 0;
    std::vector<int> hidden = {100, 100, 100};
    bool linear_potential = false;
    training::TrainConfig train;
    evaluation::EvalOptions eval;

    /// Validates and returns the resolved step size.
    double resolved_dt() const;
    /// Render as "# key=value" lines (reproducibility header).
    std::string header_lines() const;
};

/// Parse a JSON experiment document; unknown keys are errors. Fields missing
/// from the document keep the defaults above.
ExperimentConfig parse_experiment_config(const std::string& json_text);

/// Parse a JSON sweep document (grid + repeats + shared experiment settings).
evaluation::SweepGrid parse_sweep_config(const std::string& json_text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Prefix relative paths with $HAMLEARN_OUT_DIR when it is set.
std::string out_path(const std::string& path);

} // namespace hamlearn::cli
