#pragma once

#include <optional>
#include <string>
#include <vector>

#include "biocl/consolidation.hpp"
#include "biocl/context.hpp"
#include "biocl/data.hpp"
#include "biocl/metrics.hpp"
#include "biocl/network.hpp"
#include "biocl/plasticity.hpp"
#include "biocl/replay.hpp"

namespace biocl {

struct TrainerConfig {
    int epochs = 3;
    int batch_size = 128;
    OptimizerConfig opt;
    SiConfig si;
    std::size_t buffer_capacity = 500;
    real alpha = real(1);
    real beta = real(0.5);

    bool hebbian = false;
    bool dropout = false;
    bool si_enabled = false;
    bool er = false;
    bool cr = false;  // consistency term; requires er
    bool oracle_context = false;  // evaluate with true task identity
    bool measure_forward_transfer = true;
};

struct StepLossBreakdown {
    real task = 0;
    real replay_ce = 0;
    real consistency = 0;
    real si = 0;
};

struct TaskTrainStats {
    std::vector<StepLossBreakdown> steps;
    StepLossBreakdown mean() const;
};

struct RunResult {
    AccuracyMatrix acc;  // acc[i][j]: accuracy on task j after training task i; -1 unmeasured
    real avg_final_accuracy = 0;
    real forgetting = 0;
    std::optional<real> fwd_transfer;
    double wall_seconds = 0;
    std::uint64_t seed = 0;
    std::vector<TaskTrainStats> task_stats;
};

/// Drives the training loop over a task stream: prototype construction,
/// context-gated forward passes, replay and consistency losses, synaptic
/// consolidation, Hebbian updates, heterogeneous dropout bookkeeping and
/// evaluation via nearest-prototype context inference.
class Trainer {
public:
    Trainer(Network net, const TrainerConfig& cfg, std::uint64_t seed);

    /// Sequential training over the stream; tasks materialize lazily.
    RunResult run(const TaskStream& stream);

    /// One task of Algorithm-style training; computes and stores the task
    /// prototype first. task_index counts tasks already trained.
    TaskTrainStats train_task(const Task& task, int task_index);

    /// Accuracy in eval mode (no dropout, k-WTA active). oracle_task_id >= 0
    /// bypasses inference with the true task prototype.
    real evaluate(const Dataset& test, int oracle_task_id = -1) const;

    /// Per-unit activation counts (h_out != 0) of one hidden layer over a
    /// dataset, eval mode. Feeds the activation-overlap diagnostic.
    std::vector<real> activation_counts(const Dataset& data, int layer_index) const;

    Network& network() { return net_; }
    const Network& network() const { return net_; }
    const ContextStore& context_store() const { return store_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const SiState& si_state() const { return si_; }
    int tasks_trained() const { return tasks_trained_; }

    void save_checkpoint(const std::string& path, const std::string& config_echo = "") const;
    void restore_checkpoint(const std::string& path);

private:
    struct BatchViews {
        Matrix x;                // d x B
        std::vector<int> y;
    };
    BatchViews gather(const Dataset& ds, std::span<const int> indices) const;
    ContextBatch infer_contexts(const Matrix& x_cols, std::vector<int>* store_indices) const;

    Network net_;
    TrainerConfig cfg_;
    ContextStore store_;
    SiState si_;
    ReplayBuffer buffer_;
    Rng master_;
    Rng dropout_rng_;
    Rng reservoir_rng_;
    Rng sampling_rng_;
    int tasks_trained_ = 0;
};

}  // namespace biocl
