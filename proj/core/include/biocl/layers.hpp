#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "biocl/matrix.hpp"
#include "biocl/rng.hpp"

namespace biocl {

/// Parameter group tags. The excitatory/inhibitory groups carry a
/// non-negativity constraint; the tag also selects per-group learning
/// rates, gradient scaling and importance scaling.
enum class ParamKind : std::uint8_t {
    Wee,       // excitatory -> excitatory, constrained >= 0
    Wie,       // excitatory -> inhibitory, constrained >= 0
    Wei,       // inhibitory -> excitatory, constrained >= 0
    Dense,     // unconstrained feedforward weights (standard layers, classifier)
    Bias,      // unconstrained
    Dendrite,  // context segment weights
};

inline bool is_sign_constrained(ParamKind k) {
    return k == ParamKind::Wee || k == ParamKind::Wie || k == ParamKind::Wei;
}

/// A view over one parameter tensor, its gradient buffer, and the frozen
/// connection-sparsity mask (null when dense). layer_n_units / layer_in_dim
/// feed the inhibitory gradient scaling.
struct ParamView {
    ParamKind kind;
    Matrix* value = nullptr;
    Matrix* grad = nullptr;
    const Matrix* mask = nullptr;
    int layer_n_e = 0;
    int layer_in_dim = 0;
};

/// Three non-negative weight groups plus bias: the subtractive-inhibition
/// affine map z = (W_ee - W_ei W_ie) h + b. Inhibitory units do not project
/// to the next layer; their drive h_i = W_ie h stays inside the layer.
struct DannLayer {
    int n_in = 0;
    int n_e = 0;
    int n_i = 0;
    Matrix w_ee;  // n_e x n_in
    Matrix w_ie;  // n_i x n_in
    Matrix w_ei;  // n_e x n_i
    Matrix b;     // n_e x 1
    std::optional<Matrix> mask_ee, mask_ie, mask_ei;  // binary, frozen after init
};

/// z = (W_ee - W_ei W_ie) h_in + b for a batch of column vectors.
/// Masked entries are held at exactly 0 in the weights, so they contribute
/// nothing. h_in is expected elementwise >= 0 (excitatory projections).
Matrix dann_forward(const DannLayer& layer, const Matrix& h_in);

/// Per-neuron dendritic segments: u[(unit * n_segments) + j] is the weight
/// row of segment j. Context dimension matches the raw input image.
struct DendriteBank {
    int n_units = 0;
    int n_segments = 0;
    int context_dim = 0;
    Matrix u;  // (n_units * n_segments) x context_dim

    std::span<const real> segment(int unit, int j) const {
        return {u.row(unit * n_segments + j), static_cast<std::size_t>(context_dim)};
    }
    std::span<real> segment(int unit, int j) {
        return {u.row(unit * n_segments + j), static_cast<std::size_t>(context_dim)};
    }
};

/// Winning segment per unit: argmax_j |u_j . c|, response keeps its sign,
/// ties broken by lowest index.
struct DendriteSelection {
    std::vector<int> segment;    // n_units
    std::vector<real> response;  // n_units, signed
};

DendriteSelection dendrite_select(const DendriteBank& bank, std::span<const real> context);

/// Batch context: unique context rows plus a per-sample index. Current-task
/// batches share one prototype; replay batches carry one inferred prototype
/// per sample, deduplicated here.
struct ContextBatch {
    Matrix contexts;                  // n_unique x d
    std::vector<int> index_of_sample;  // batch entries in [0, n_unique)

    static ContextBatch shared(std::span<const real> c, int batch);
    int unique_count() const { return contexts.rows(); }
};

/// Cumulative activation counts and the keep probabilities derived from
/// them: p_j = exp(-a_j / max a * rho), all 1 while no counts exist.
struct DropoutState {
    std::vector<real> counts;
    std::vector<real> keep_probs;
    real rho = 0;

    explicit DropoutState(int n = 0, real rho_ = 0)
        : counts(n, real(0)), keep_probs(n, real(1)), rho(rho_) {}
};

/// Recompute keep_probs from the current counts.
void refresh_keep_probs(DropoutState& drop);

/// Everything the backward pass needs from one forward call.
struct LayerActivationRecord {
    Matrix h_in;       // n_in x B
    Matrix h_i;        // inhibitory drive W_ie h_in (dale layers only)
    Matrix pre_mod;    // z, n_units_out x B
    Matrix gate;       // sigma(response) per sample, n_units_out x B (all 1 w/o dendrites)
    Matrix h_out;      // post k-WTA output
    Matrix contexts;   // unique context rows (copied for the backward pass)
    std::vector<DendriteSelection> selections;  // per unique context
    std::vector<int> ctx_of_sample;
    std::vector<std::uint8_t> dropout_mask;  // per unit, one draw per batch
    std::vector<std::uint8_t> kwta_mask;     // n_units_out * B, column-major by sample
    bool train_mode = false;
    bool dropout_applied = false;

    std::uint8_t& kwta(int unit, int sample) { return kwta_mask[static_cast<std::size_t>(sample) * n_units + unit]; }
    std::uint8_t kwta(int unit, int sample) const { return kwta_mask[static_cast<std::size_t>(sample) * n_units + unit]; }
    int n_units = 0;
};

/// counts[j] += number of samples where unit j survived k-WTA. Only legal
/// for records produced in train mode on current-task batches.
void update_activation_counts(DropoutState& drop, const LayerActivationRecord& rec);

enum class HiddenActivation : std::uint8_t { KWta, Relu, Identity };

struct HiddenLayerConfig {
    int n_in = 0;
    int n_units = 0;  // total units; dale layers split e/i internally
    bool dale = true;
    real inhibitory_fraction = real(204.0 / 2048.0);
    bool dendrites = true;
    int n_segments = 0;
    int context_dim = 0;
    HiddenActivation activation = HiddenActivation::KWta;
    real k_ratio = real(0.05);
    real weight_sparsity = 0;  // S_W
    real rho = real(0.1);
};

/// One hidden layer of the framework. With dale=true the affine map is the
/// three-group subtractive inhibition; otherwise a plain dense map. Either
/// way the output can be gated by dendritic segments, thinned by
/// heterogeneous dropout (train mode, before k-WTA) and sparsified by
/// k-WTA or ReLU.
class HiddenLayer {
public:
    HiddenLayer() = default;
    HiddenLayer(const HiddenLayerConfig& cfg, Rng& init_rng);

    const HiddenLayerConfig& config() const { return cfg_; }
    int out_dim() const { return out_dim_; }
    int k() const { return k_; }

    /// Forward one batch (columns are samples). ctx may be null when the
    /// layer has no dendrites. dropout_rng drives the per-batch Bernoulli
    /// mask and may be null to disable dropout (replay batches, eval).
    Matrix forward(const Matrix& h_in, const ContextBatch* ctx, bool train_mode,
                   Rng* dropout_rng, LayerActivationRecord& rec) const;

    /// Accumulates parameter gradients from grad_out (same shape as h_out)
    /// and returns the gradient w.r.t. h_in. The winning-segment argmax is
    /// treated as constant; losing segments receive zero gradient.
    Matrix backward(const LayerActivationRecord& rec, const Matrix& grad_out);

    void zero_grads();
    std::vector<ParamView> params();

    const DannLayer& dann() const { return dann_; }
    DannLayer& dann() { return dann_; }
    const DendriteBank* bank() const { return bank_ ? &*bank_ : nullptr; }
    DendriteBank* bank() { return bank_ ? &*bank_ : nullptr; }
    const Matrix& dense_w() const { return w_; }
    DropoutState& dropout() { return drop_; }
    const DropoutState& dropout() const { return drop_; }

private:
    HiddenLayerConfig cfg_;
    int out_dim_ = 0;
    int k_ = 0;

    DannLayer dann_;          // when dale
    Matrix w_;                // when !dale, out x in
    Matrix b_;                // out x 1 (dense path; dale path bias lives in dann_)
    std::optional<Matrix> mask_w_;
    std::optional<DendriteBank> bank_;
    DropoutState drop_;

    // gradient buffers, same shapes as the parameters
    Matrix g_ee_, g_ie_, g_ei_, g_w_, g_b_, g_u_;
};

/// k-WTA: keep the top-k units per sample by signed value among eligible
/// (non-dropped, nonzero) units, zero the rest. Ties go to the lowest
/// index. Returns the number kept.
int kwta_select(std::span<const real> values, std::span<const std::uint8_t> eligible, int k,
                std::span<std::uint8_t> mask_out);

}  // namespace biocl
