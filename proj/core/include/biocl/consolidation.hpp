#pragma once

#include <span>
#include <vector>

#include "biocl/layers.hpp"

namespace biocl {

struct SiConfig {
    real lambda = real(0.1);      // penalty weight
    real lambda_wie = real(10);   // importance upscale for W_ie
    real lambda_wei = real(10);   // importance upscale for W_ei
    real gamma = real(0.1);       // damping in the importance denominator
};

/// Synaptic Intelligence state over a fixed parameter registry: per-parameter
/// path integrals omega accumulated during a task, consolidated importances
/// Omega at task boundaries, reference weights theta_c, and the adjusted
/// importances Omega_adj used by the penalty (inhibitory groups upscaled).
class SiState {
public:
    SiState() = default;
    explicit SiState(const std::vector<ParamView>& params);

    bool attached() const { return !kinds_.empty(); }
    bool consolidated() const { return consolidated_; }

    /// omega += lr * grad^2, elementwise; lr is the per-group rate actually
    /// used by the step (equals -grad * delta_theta for plain SGD).
    void accumulate(const std::vector<ParamView>& params, std::span<const real> per_view_lr);
    void accumulate(const std::vector<ParamView>& params, real eta);

    /// Omega += omega / ((theta - theta_c)^2 + gamma); omega <- 0;
    /// theta_c <- theta; Omega_adj recomputed with inhibitory upscaling.
    void consolidate(const std::vector<ParamView>& params, const SiConfig& cfg);

    /// lambda * sum Omega_adj (theta - theta_c)^2. Zero before the first
    /// consolidation. When add_grads is set, 2 lambda Omega_adj (theta -
    /// theta_c) is added into the parameter gradients.
    real penalty(const std::vector<ParamView>& params, const SiConfig& cfg,
                 bool add_grads) const;

    int group_count() const { return static_cast<int>(kinds_.size()); }
    ParamKind kind(int i) const { return kinds_[i]; }
    const Matrix& omega(int i) const { return omega_[i]; }
    const Matrix& Omega(int i) const { return Omega_[i]; }
    const Matrix& omega_adj(int i) const { return Omega_adj_[i]; }
    const Matrix& theta_c(int i) const { return theta_c_[i]; }

    Matrix& mutable_omega(int i) { return omega_[i]; }
    Matrix& mutable_Omega(int i) { return Omega_[i]; }
    Matrix& mutable_omega_adj(int i) { return Omega_adj_[i]; }
    Matrix& mutable_theta_c(int i) { return theta_c_[i]; }
    void set_consolidated(bool v) { consolidated_ = v; }

private:
    void check(const std::vector<ParamView>& params) const;

    std::vector<ParamKind> kinds_;
    std::vector<Matrix> omega_, Omega_, theta_c_, Omega_adj_;
    bool consolidated_ = false;
};

}  // namespace biocl
