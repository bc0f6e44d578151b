#include "biocl/consolidation.hpp"

#include <stdexcept>

namespace biocl {

SiState::SiState(const std::vector<ParamView>& params) {
    kinds_.reserve(params.size());
    for (const auto& p : params) {
        kinds_.push_back(p.kind);
        omega_.emplace_back(p.value->rows(), p.value->cols());
        Omega_.emplace_back(p.value->rows(), p.value->cols());
        Omega_adj_.emplace_back(p.value->rows(), p.value->cols());
        theta_c_.push_back(*p.value);
    }
}

void SiState::check(const std::vector<ParamView>& params) const {
    if (params.size() != kinds_.size()) {
        throw std::invalid_argument("SiState: parameter registry size changed");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].value->same_shape(omega_[i])) {
            throw std::invalid_argument("SiState: parameter shape changed");
        }
    }
}

void SiState::accumulate(const std::vector<ParamView>& params,
                         std::span<const real> per_view_lr) {
    check(params);
    if (per_view_lr.size() != params.size()) {
        throw std::invalid_argument("SiState::accumulate: lr count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto of = omega_[i].flat();
        auto gf = params[i].grad->flat();
        const real lr = per_view_lr[i];
        for (std::size_t j = 0; j < of.size(); ++j) of[j] += lr * gf[j] * gf[j];
    }
}

void SiState::accumulate(const std::vector<ParamView>& params, real eta) {
    std::vector<real> lrs(params.size(), eta);
    accumulate(params, lrs);
}

void SiState::consolidate(const std::vector<ParamView>& params, const SiConfig& cfg) {
    check(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto Of = Omega_[i].flat();
        auto of = omega_[i].flat();
        auto tf = theta_c_[i].flat();
        auto vf = params[i].value->flat();
        for (std::size_t j = 0; j < Of.size(); ++j) {
            const real drift = vf[j] - tf[j];
            Of[j] += of[j] / (drift * drift + cfg.gamma);
            of[j] = real(0);
            tf[j] = vf[j];
        }
        real scale = real(1);
        if (kinds_[i] == ParamKind::Wie) scale = cfg.lambda_wie;
        if (kinds_[i] == ParamKind::Wei) scale = cfg.lambda_wei;
        auto af = Omega_adj_[i].flat();
        for (std::size_t j = 0; j < af.size(); ++j) af[j] = scale * Of[j];
    }
    consolidated_ = true;
}

real SiState::penalty(const std::vector<ParamView>& params, const SiConfig& cfg,
                      bool add_grads) const {
    if (!consolidated_) return real(0);
    check(params);
    real loss = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto af = Omega_adj_[i].flat();
        auto tf = theta_c_[i].flat();
        auto vf = params[i].value->flat();
        auto gf = params[i].grad->flat();
        for (std::size_t j = 0; j < af.size(); ++j) {
            const real drift = vf[j] - tf[j];
            loss += af[j] * drift * drift;
            if (add_grads) {
                gf[j] += real(2) * cfg.lambda * af[j] * drift;
            }
        }
    }
    return cfg.lambda * loss;
}

}  // namespace biocl
