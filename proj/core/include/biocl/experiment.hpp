#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "biocl/trainer.hpp"

namespace biocl {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything one experiment needs: dataset, stream construction, model
/// assembly, mechanism toggles and hyperparameters. Field names mirror the
/// snake_case keys accepted in config files and flag names.
struct ExperimentConfig {
    std::string run_id = "run";
    std::string dataset = "mnist";
    std::string data_dir;            // or env DATA_DIR
    std::string out_dir = "out";
    std::string scenario = "perm";   // rot | perm | seq
    int n_tasks = 5;
    real theta_inc = 8;
    int classes_per_task = 2;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    int parallel_seeds = 1;
    int train_limit = 0;
    int test_limit = 0;

    // model
    std::string mode = "bio";        // bio | standard
    std::vector<int> hidden_sizes{2048, 2048};
    real k_ratio = real(0.05);
    real inhibitory_fraction = real(204.0 / 2048.0);
    real weight_sparsity = 0;
    int n_segments = 0;              // 0 = one per task
    std::string activation;          // "", "kwta", "relu"

    // toggles
    bool dale = true;
    bool dendrites = true;
    bool hebbian = true;
    bool dropout = true;
    bool si = true;
    bool er = true;
    bool cr = true;
    bool joint = false;
    bool oracle_context = false;
    bool forward_transfer = true;

    // optimization
    int epochs = 3;
    int batch_size = 128;
    real eta = real(0.3);
    real eta_wie = real(3e-2);
    real eta_wei = real(3e-3);
    real eta_h = real(3e-6);
    std::string clip_mode = "norm";  // norm | literal
    real clip_value = real(1.0);

    // synaptic consolidation
    real lambda = real(0.1);
    real lambda_wie = real(10);
    real lambda_wei = real(10);
    real gamma = real(0.1);

    // replay
    int buffer_capacity = 500;
    real alpha = real(1);
    real beta = real(0.5);

    // heterogeneous dropout strength, one value per hidden layer (broadcasts)
    std::vector<real> rho{real(0.1)};

    std::optional<std::string> checkpoint_dir;

    void validate() const;  // throws ConfigError
};

/// Built-in configurations covering the reported hyperparameter rows and
/// component ablations for each setting.
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

struct ExperimentResult {
    std::vector<RunResult> per_seed;
    real mean_accuracy = 0;
    real std_accuracy = 0;
    real mean_forgetting = 0;
    real std_forgetting = 0;
};

/// Runs every seed (optionally on parallel threads), writes one metrics CSV
/// per seed plus an aggregate JSON summary into out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Assembles the network/trainer for one seed without running it.
NetworkConfig make_network_config(const ExperimentConfig& cfg);
TrainerConfig make_trainer_config(const ExperimentConfig& cfg);
StreamConfig make_stream_config(const ExperimentConfig& cfg, std::uint64_t seed);

/// One seed end to end; exposed for tests and the acceptance suite.
RunResult run_single_seed(const ExperimentConfig& cfg, const Dataset& train,
                          const Dataset& test, std::uint64_t seed);

/// Deterministic CSV serialization of one seed's result.
std::string metrics_csv(const ExperimentConfig& cfg, const RunResult& result,
                        std::uint64_t seed);

/// JSON summary across seeds, including the effective config echo.
std::string summary_json(const ExperimentConfig& cfg, const ExperimentResult& result);

/// Resolves cfg.data_dir, the DATA_DIR environment variable, or a handful of
/// conventional relative locations. Throws IdxParseError when nothing works.
std::string resolve_data_dir(const ExperimentConfig& cfg);

}  // namespace biocl
