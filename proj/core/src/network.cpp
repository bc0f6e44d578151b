#include "biocl/network.hpp"

#include <cmath>
#include <stdexcept>

namespace biocl {

Network::Network(const NetworkConfig& cfg, Rng& init_rng) : cfg_(cfg) {
    if (cfg.hidden_sizes.empty()) throw std::invalid_argument("Network: no hidden layers");
    int in_dim = cfg.n_inputs;
    for (std::size_t l = 0; l < cfg.hidden_sizes.size(); ++l) {
        HiddenLayerConfig hl;
        hl.n_in = in_dim;
        hl.n_units = cfg.hidden_sizes[l];
        hl.dale = cfg.dale;
        hl.inhibitory_fraction = cfg.inhibitory_fraction;
        hl.dendrites = cfg.dendrites;
        hl.n_segments = cfg.n_segments;
        hl.context_dim = cfg.context_dim;
        hl.activation = cfg.activation;
        hl.k_ratio = cfg.k_ratio;
        hl.weight_sparsity = cfg.weight_sparsity;
        hl.rho = cfg.rho.empty() ? real(0)
                                 : cfg.rho[std::min(l, cfg.rho.size() - 1)];
        hidden_.emplace_back(hl, init_rng);
        in_dim = hidden_.back().out_dim();
    }
    const real sd = std::sqrt(real(2) / static_cast<real>(in_dim));
    w_out_ = Matrix(cfg.n_classes, in_dim);
    for (auto& v : w_out_.flat()) v = static_cast<real>(init_rng.normal()) * sd;
    b_out_ = Matrix(cfg.n_classes, 1, real(0));
    g_wout_ = Matrix(cfg.n_classes, in_dim);
    g_bout_ = Matrix(cfg.n_classes, 1);
}

Matrix Network::forward(const Matrix& x, const ContextBatch* ctx, bool train_mode,
                        Rng* dropout_rng, ForwardRecord* rec) const {
    Matrix h = x;
    LayerActivationRecord scratch;
    if (rec) rec->layers.resize(hidden_.size());
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        LayerActivationRecord& r = rec ? rec->layers[l] : scratch;
        h = hidden_[l].forward(h, ctx, train_mode, dropout_rng, r);
    }
    if (rec) rec->last_hidden = h;
    return affine(w_out_, h, b_out_.flat());
}

void Network::backward(const ForwardRecord& rec, const Matrix& dlogits) {
    Matrix d_w = matmul_a_bt(dlogits, rec.last_hidden);
    g_wout_ += d_w;
    for (int i = 0; i < dlogits.rows(); ++i) {
        real acc = 0;
        for (int j = 0; j < dlogits.cols(); ++j) acc += dlogits(i, j);
        g_bout_(i, 0) += acc;
    }
    Matrix grad = matmul_at_b(w_out_, dlogits);
    for (int l = static_cast<int>(hidden_.size()) - 1; l >= 0; --l) {
        grad = hidden_[l].backward(rec.layers[l], grad);
    }
}

void Network::zero_grads() {
    for (auto& h : hidden_) h.zero_grads();
    g_wout_.set_zero();
    g_bout_.set_zero();
}

std::vector<ParamView> Network::params() {
    std::vector<ParamView> out;
    for (auto& h : hidden_) {
        auto views = h.params();
        out.insert(out.end(), views.begin(), views.end());
    }
    out.push_back({ParamKind::Dense, &w_out_, &g_wout_, nullptr, cfg_.n_classes, w_out_.cols()});
    out.push_back({ParamKind::Bias, &b_out_, &g_bout_, nullptr, cfg_.n_classes, w_out_.cols()});
    return out;
}

}  // namespace biocl
