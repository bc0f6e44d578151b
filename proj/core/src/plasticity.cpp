#include "biocl/plasticity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace biocl {

real effective_lr(ParamKind kind, const OptimizerConfig& cfg, int task_index) {
    if (task_index >= 1) {
        if (kind == ParamKind::Wie) return cfg.eta_wie;
        if (kind == ParamKind::Wei) return cfg.eta_wei;
    }
    return cfg.eta;
}

void scale_inhibitory_grads(std::vector<ParamView>& params) {
    for (auto& p : params) {
        if (p.kind == ParamKind::Wie) {
            const real s = real(1) / std::sqrt(static_cast<real>(p.layer_n_e));
            *p.grad *= s;
        } else if (p.kind == ParamKind::Wei) {
            *p.grad *= real(1) / static_cast<real>(p.layer_in_dim);
        }
    }
}

real clip_gradients(std::vector<ParamView>& params, const OptimizerConfig& cfg) {
    if (cfg.clip_value <= real(0)) throw std::invalid_argument("clip_gradients: clip_value <= 0");
    if (cfg.clip_mode == ClipMode::Literal) {
        for (auto& p : params) {
            for (auto& g : p.grad->flat()) g = std::clamp(g, real(0), real(1));
        }
        return real(0);
    }
    real norm_sq = 0;
    for (const auto& p : params) norm_sq += l2_norm_squared(p.grad->flat());
    const real norm = std::sqrt(norm_sq);
    if (norm > cfg.clip_value) {
        const real s = cfg.clip_value / norm;
        for (auto& p : params) *p.grad *= s;
    }
    return norm;
}

void sgd_step(std::vector<ParamView>& params, const OptimizerConfig& cfg, int task_index) {
    for (auto& p : params) {
        const real lr = effective_lr(p.kind, cfg, task_index);
        auto vf = p.value->flat();
        auto gf = p.grad->flat();
        if (vf.size() != gf.size()) throw std::invalid_argument("sgd_step: shape mismatch");
        for (std::size_t i = 0; i < vf.size(); ++i) vf[i] -= lr * gf[i];
        if (is_sign_constrained(p.kind)) {
            for (auto& v : vf) v = std::max(v, real(0));
        }
        if (p.mask != nullptr) {
            auto mf = p.mask->flat();
            for (std::size_t i = 0; i < vf.size(); ++i) vf[i] *= mf[i];
        }
    }
}

void hebbian_step(DendriteBank& bank, std::span<const real> context, real eta_h) {
    if (eta_h == real(0)) return;
    if (static_cast<int>(context.size()) != bank.context_dim) {
        throw std::invalid_argument("hebbian_step: context dim mismatch");
    }
    const auto sel = dendrite_select(bank, context);
    for (int n = 0; n < bank.n_units; ++n) {
        auto u = bank.segment(n, sel.segment[n]);
        const real d = sel.response[n];
        for (int t = 0; t < bank.context_dim; ++t) {
            u[t] += eta_h * d * (context[t] - d * u[t]);
        }
    }
}

void hebbian_step(DendriteBank& bank, const Matrix& contexts, real eta_h) {
    for (int r = 0; r < contexts.rows(); ++r) {
        hebbian_step(bank, {contexts.row(r), static_cast<std::size_t>(contexts.cols())}, eta_h);
    }
}

}  // namespace biocl
