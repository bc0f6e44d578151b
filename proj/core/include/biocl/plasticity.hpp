#pragma once

#include <span>
#include <vector>

#include "biocl/layers.hpp"

namespace biocl {

enum class ClipMode : std::uint8_t {
    Norm,     // rescale all gradients when the global L2 norm exceeds clip_value
    Literal,  // clamp every component into [0, 1]
};

struct OptimizerConfig {
    real eta = real(0.3);        // base learning rate, all groups on the first task
    real eta_wie = real(3e-2);   // W_ie rate from the second task onward
    real eta_wei = real(3e-3);   // W_ei rate from the second task onward
    real eta_h = real(0);        // Hebbian rate (0 disables the step)
    ClipMode clip_mode = ClipMode::Norm;
    real clip_value = real(1.0);
};

/// Per-group learning rate: inhibitory groups switch to their reduced rates
/// once the first task is done (task_index >= 1).
real effective_lr(ParamKind kind, const OptimizerConfig& cfg, int task_index);

/// W_ie gradients scale by n_e^{-1/2}, W_ei by d^{-1} (d = layer input dim),
/// compensating their outsized effect on the layer output distribution.
void scale_inhibitory_grads(std::vector<ParamView>& params);

/// Returns the pre-clip global L2 norm (norm mode) or 0 (literal mode).
real clip_gradients(std::vector<ParamView>& params, const OptimizerConfig& cfg);

/// theta -= lr_group * grad, then non-negativity projection on the Dale
/// groups and re-application of the frozen connection masks.
void sgd_step(std::vector<ParamView>& params, const OptimizerConfig& cfg, int task_index);

/// Oja-constrained Hebbian update on the winning segment per unit:
/// u_k += eta_h * d * (c - d * u_k) with d = u_k . c.
void hebbian_step(DendriteBank& bank, std::span<const real> context, real eta_h);

/// One update per distinct context (rows of contexts).
void hebbian_step(DendriteBank& bank, const Matrix& contexts, real eta_h);

}  // namespace biocl
