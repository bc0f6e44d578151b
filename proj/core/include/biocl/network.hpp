#pragma once

#include <vector>

#include "biocl/layers.hpp"

namespace biocl {

struct NetworkConfig {
    int n_inputs = 784;
    int n_classes = 10;
    std::vector<int> hidden_sizes{2048, 2048};
    bool dale = true;
    bool dendrites = true;
    HiddenActivation activation = HiddenActivation::KWta;
    real k_ratio = real(0.05);
    real inhibitory_fraction = real(204.0 / 2048.0);
    real weight_sparsity = 0;
    int n_segments = 0;               // dendritic segments per unit (# tasks)
    int context_dim = 784;            // raw input dimension
    std::vector<real> rho{real(0.1)};  // per hidden layer; last value broadcasts
};

/// MLP of bio/standard hidden layers topped by an unconstrained affine
/// classifier (no k-WTA, dendrites or Dale constraint on the output).
class Network {
public:
    Network() = default;
    Network(const NetworkConfig& cfg, Rng& init_rng);

    const NetworkConfig& config() const { return cfg_; }
    int n_layers() const { return static_cast<int>(hidden_.size()); }
    HiddenLayer& hidden(int i) { return hidden_[i]; }
    const HiddenLayer& hidden(int i) const { return hidden_[i]; }
    Matrix& output_w() { return w_out_; }
    Matrix& output_b() { return b_out_; }
    const Matrix& output_w() const { return w_out_; }
    const Matrix& output_b() const { return b_out_; }

    struct ForwardRecord {
        std::vector<LayerActivationRecord> layers;
        Matrix last_hidden;  // input to the classifier
    };

    /// Columns of x are samples. ctx may be null when no layer has
    /// dendrites. dropout_rng non-null enables heterogeneous dropout
    /// (train mode, current-task batches only).
    Matrix forward(const Matrix& x, const ContextBatch* ctx, bool train_mode, Rng* dropout_rng,
                   ForwardRecord* rec) const;

    /// Accumulate parameter gradients from dlogits; returns nothing (input
    /// gradients are not needed by the training loop).
    void backward(const ForwardRecord& rec, const Matrix& dlogits);

    void zero_grads();
    std::vector<ParamView> params();

private:
    NetworkConfig cfg_;
    std::vector<HiddenLayer> hidden_;
    Matrix w_out_, b_out_;
    Matrix g_wout_, g_bout_;
};

}  // namespace biocl
