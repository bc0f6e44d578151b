#include "biocl/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "biocl/losses.hpp"

namespace biocl {

namespace {

void apply_mask(Matrix& m, const std::optional<Matrix>& mask) {
    if (!mask) return;
    auto mf = m.flat();
    auto kf = mask->flat();
    for (std::size_t i = 0; i < mf.size(); ++i) mf[i] *= kf[i];
}

Matrix sample_mask(int rows, int cols, real keep_prob, Rng& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.flat()) v = rng.bernoulli(keep_prob) ? real(1) : real(0);
    return m;
}

std::vector<real> row_means(const Matrix& m) {
    std::vector<real> out(m.rows());
    for (int i = 0; i < m.rows(); ++i) {
        real acc = 0;
        for (int j = 0; j < m.cols(); ++j) acc += m(i, j);
        out[i] = acc / static_cast<real>(m.cols());
    }
    return out;
}

}  // namespace

Matrix dann_forward(const DannLayer& layer, const Matrix& h_in) {
    if (h_in.rows() != layer.n_in) throw std::invalid_argument("dann_forward: input dim mismatch");
    Matrix h_i = matmul(layer.w_ie, h_in);
    Matrix z = affine(layer.w_ee, h_in, layer.b.flat());
    Matrix inhib = matmul(layer.w_ei, h_i);
    z -= inhib;
    return z;
}

DendriteSelection dendrite_select(const DendriteBank& bank, std::span<const real> context) {
    if (bank.n_units <= 0 || bank.n_segments <= 0) {
        throw std::invalid_argument("dendrite_select: empty segment bank");
    }
    if (static_cast<int>(context.size()) != bank.context_dim) {
        throw std::invalid_argument("dendrite_select: context dim mismatch");
    }
    DendriteSelection sel;
    sel.segment.resize(bank.n_units);
    sel.response.resize(bank.n_units);
    for (int n = 0; n < bank.n_units; ++n) {
        int best = 0;
        real best_resp = dot(bank.segment(n, 0), context);
        real best_abs = std::abs(best_resp);
        for (int j = 1; j < bank.n_segments; ++j) {
            const real r = dot(bank.segment(n, j), context);
            if (std::abs(r) > best_abs) {  // strict: ties keep the lowest index
                best = j;
                best_resp = r;
                best_abs = std::abs(r);
            }
        }
        sel.segment[n] = best;
        sel.response[n] = best_resp;
    }
    return sel;
}

ContextBatch ContextBatch::shared(std::span<const real> c, int batch) {
    ContextBatch out;
    out.contexts = Matrix(1, static_cast<int>(c.size()));
    std::copy(c.begin(), c.end(), out.contexts.row(0));
    out.index_of_sample.assign(batch, 0);
    return out;
}

void refresh_keep_probs(DropoutState& drop) {
    if (drop.rho < real(0)) throw std::invalid_argument("refresh_keep_probs: rho must be >= 0");
    const real max_count = drop.counts.empty()
                               ? real(0)
                               : *std::max_element(drop.counts.begin(), drop.counts.end());
    drop.keep_probs.assign(drop.counts.size(), real(1));
    if (max_count <= real(0)) return;
    for (std::size_t j = 0; j < drop.counts.size(); ++j) {
        drop.keep_probs[j] = std::exp(-drop.counts[j] / max_count * drop.rho);
    }
}

void update_activation_counts(DropoutState& drop, const LayerActivationRecord& rec) {
    if (!rec.train_mode) {
        throw std::invalid_argument("update_activation_counts: record not from a train-mode batch");
    }
    if (static_cast<int>(drop.counts.size()) != rec.h_out.rows()) {
        throw std::invalid_argument("update_activation_counts: unit count mismatch");
    }
    for (int j = 0; j < rec.h_out.cols(); ++j) {
        for (int n = 0; n < rec.h_out.rows(); ++n) {
            if (rec.h_out(n, j) != real(0)) drop.counts[n] += real(1);
        }
    }
}

int kwta_select(std::span<const real> values, std::span<const std::uint8_t> eligible, int k,
                std::span<std::uint8_t> mask_out) {
    struct Cand {
        real v;
        int i;
    };
    std::fill(mask_out.begin(), mask_out.end(), std::uint8_t(0));
    std::vector<Cand> cand;
    cand.reserve(values.size());
    for (int i = 0; i < static_cast<int>(values.size()); ++i) {
        const bool ok = eligible.empty() || eligible[i] != 0;
        if (ok && values[i] != real(0)) cand.push_back({values[i], i});
    }
    const int keep = std::min<int>(k, static_cast<int>(cand.size()));
    if (keep < static_cast<int>(cand.size())) {
        std::partial_sort(cand.begin(), cand.begin() + keep, cand.end(),
                          [](const Cand& a, const Cand& b) {
                              if (a.v != b.v) return a.v > b.v;
                              return a.i < b.i;
                          });
    }
    for (int i = 0; i < keep; ++i) mask_out[cand[i].i] = 1;
    return keep;
}

HiddenLayer::HiddenLayer(const HiddenLayerConfig& cfg, Rng& init_rng) : cfg_(cfg) {
    if (cfg.n_in <= 0 || cfg.n_units <= 0) {
        throw std::invalid_argument("HiddenLayer: sizes must be positive");
    }
    if (cfg.dale) {
        int n_i = static_cast<int>(std::lround(cfg.inhibitory_fraction * cfg.n_units));
        n_i = std::clamp(n_i, 1, cfg.n_units - 1);
        dann_.n_in = cfg.n_in;
        dann_.n_i = n_i;
        dann_.n_e = cfg.n_units - n_i;
        out_dim_ = dann_.n_e;

        const real sd = std::sqrt(real(2) / static_cast<real>(cfg.n_in));
        dann_.w_ee = Matrix(dann_.n_e, cfg.n_in);
        for (auto& v : dann_.w_ee.flat()) v = std::abs(static_cast<real>(init_rng.normal()) * sd);
        dann_.w_ie = Matrix(dann_.n_i, cfg.n_in);
        for (auto& v : dann_.w_ie.flat()) v = std::abs(static_cast<real>(init_rng.normal()) * sd);

        // Center the effective weight W_ee - W_ei W_ie at zero per row.
        const auto ee_means = row_means(dann_.w_ee);
        real ie_mean = 0;
        for (real v : dann_.w_ie.flat()) ie_mean += v;
        ie_mean /= static_cast<real>(dann_.w_ie.size());
        dann_.w_ei = Matrix(dann_.n_e, dann_.n_i);
        for (int r = 0; r < dann_.n_e; ++r) {
            const real base = ee_means[r] / (static_cast<real>(dann_.n_i) * ie_mean);
            for (int i = 0; i < dann_.n_i; ++i) {
                const real noise = real(1) + real(0.05) * static_cast<real>(init_rng.normal());
                dann_.w_ei(r, i) = std::max(real(0), base * noise);
            }
        }
        dann_.b = Matrix(dann_.n_e, 1, real(0));

        if (cfg.weight_sparsity > real(0)) {
            const real keep = real(1) - cfg.weight_sparsity;
            dann_.mask_ee = sample_mask(dann_.n_e, cfg.n_in, keep, init_rng);
            dann_.mask_ie = sample_mask(dann_.n_i, cfg.n_in, keep, init_rng);
            dann_.mask_ei = sample_mask(dann_.n_e, dann_.n_i, keep, init_rng);
            apply_mask(dann_.w_ee, dann_.mask_ee);
            apply_mask(dann_.w_ie, dann_.mask_ie);
            apply_mask(dann_.w_ei, dann_.mask_ei);
        }
        g_ee_ = Matrix(dann_.n_e, cfg.n_in);
        g_ie_ = Matrix(dann_.n_i, cfg.n_in);
        g_ei_ = Matrix(dann_.n_e, dann_.n_i);
        g_b_ = Matrix(dann_.n_e, 1);
    } else {
        out_dim_ = cfg.n_units;
        const real sd = std::sqrt(real(2) / static_cast<real>(cfg.n_in));
        w_ = Matrix(cfg.n_units, cfg.n_in);
        for (auto& v : w_.flat()) v = static_cast<real>(init_rng.normal()) * sd;
        b_ = Matrix(cfg.n_units, 1, real(0));
        if (cfg.weight_sparsity > real(0)) {
            mask_w_ = sample_mask(cfg.n_units, cfg.n_in, real(1) - cfg.weight_sparsity, init_rng);
            apply_mask(w_, mask_w_);
        }
        g_w_ = Matrix(cfg.n_units, cfg.n_in);
        g_b_ = Matrix(cfg.n_units, 1);
    }

    if (cfg.dendrites && cfg.n_segments > 0) {
        DendriteBank bank;
        bank.n_units = out_dim_;
        bank.n_segments = cfg.n_segments;
        bank.context_dim = cfg.context_dim;
        bank.u = Matrix(out_dim_ * cfg.n_segments, cfg.context_dim);
        const real sd = real(1) / std::sqrt(static_cast<real>(cfg.context_dim));
        for (auto& v : bank.u.flat()) v = static_cast<real>(init_rng.normal()) * sd;
        bank_ = std::move(bank);
        g_u_ = Matrix(out_dim_ * cfg.n_segments, cfg.context_dim);
    }

    if (cfg.activation == HiddenActivation::KWta) {
        k_ = std::max(1, static_cast<int>(std::lround(cfg.k_ratio * out_dim_)));
    }
    drop_ = DropoutState(out_dim_, cfg.rho);
}

Matrix HiddenLayer::forward(const Matrix& h_in, const ContextBatch* ctx, bool train_mode,
                            Rng* dropout_rng, LayerActivationRecord& rec) const {
    if (h_in.rows() != cfg_.n_in) throw std::invalid_argument("HiddenLayer: input dim mismatch");
    const int batch = h_in.cols();

    rec = LayerActivationRecord{};
    rec.n_units = out_dim_;
    rec.train_mode = train_mode;
    rec.h_in = h_in;

    if (cfg_.dale) {
        rec.h_i = matmul(dann_.w_ie, h_in);
        rec.pre_mod = affine(dann_.w_ee, h_in, dann_.b.flat());
        rec.pre_mod -= matmul(dann_.w_ei, rec.h_i);
    } else {
        rec.pre_mod = affine(w_, h_in, b_.flat());
    }

    rec.gate = Matrix(out_dim_, batch, real(1));
    if (bank_) {
        if (ctx == nullptr) throw std::invalid_argument("HiddenLayer: context required");
        if (static_cast<int>(ctx->index_of_sample.size()) != batch) {
            throw std::invalid_argument("HiddenLayer: context batch size mismatch");
        }
        rec.ctx_of_sample = ctx->index_of_sample;
        rec.contexts = ctx->contexts;
        rec.selections.reserve(ctx->unique_count());
        for (int u = 0; u < ctx->unique_count(); ++u) {
            rec.selections.push_back(dendrite_select(
                *bank_, {ctx->contexts.row(u), static_cast<std::size_t>(ctx->contexts.cols())}));
        }
        for (int j = 0; j < batch; ++j) {
            const auto& sel = rec.selections[rec.ctx_of_sample[j]];
            for (int n = 0; n < out_dim_; ++n) rec.gate(n, j) = sigmoid(sel.response[n]);
        }
    }

    Matrix modulated = rec.pre_mod;
    {
        auto mf = modulated.flat();
        auto gf = rec.gate.flat();
        for (std::size_t i = 0; i < mf.size(); ++i) mf[i] *= gf[i];
    }

    // Heterogeneous dropout: one Bernoulli draw per unit per batch, applied
    // before k-WTA so winners are picked among survivors only.
    if (train_mode && dropout_rng != nullptr) {
        rec.dropout_applied = true;
        rec.dropout_mask.resize(out_dim_);
        for (int n = 0; n < out_dim_; ++n) {
            rec.dropout_mask[n] = dropout_rng->bernoulli(drop_.keep_probs[n]) ? 1 : 0;
        }
        for (int n = 0; n < out_dim_; ++n) {
            if (rec.dropout_mask[n]) continue;
            for (int j = 0; j < batch; ++j) modulated(n, j) = real(0);
        }
    }

    rec.kwta_mask.assign(static_cast<std::size_t>(out_dim_) * batch, 0);
    rec.h_out = Matrix(out_dim_, batch);
    std::vector<real> column(out_dim_);
    std::vector<std::uint8_t> col_mask(out_dim_);
    std::span<const std::uint8_t> eligible =
        rec.dropout_applied ? std::span<const std::uint8_t>(rec.dropout_mask)
                            : std::span<const std::uint8_t>();
    for (int j = 0; j < batch; ++j) {
        for (int n = 0; n < out_dim_; ++n) column[n] = modulated(n, j);
        switch (cfg_.activation) {
            case HiddenActivation::KWta:
                kwta_select(column, eligible, k_, col_mask);
                break;
            case HiddenActivation::Relu:
                for (int n = 0; n < out_dim_; ++n) {
                    const bool ok = eligible.empty() || eligible[n] != 0;
                    col_mask[n] = (ok && column[n] > real(0)) ? 1 : 0;
                }
                break;
            case HiddenActivation::Identity:
                for (int n = 0; n < out_dim_; ++n) {
                    col_mask[n] = (eligible.empty() || eligible[n] != 0) ? 1 : 0;
                }
                break;
        }
        for (int n = 0; n < out_dim_; ++n) {
            rec.kwta(n, j) = col_mask[n];
            rec.h_out(n, j) = col_mask[n] ? column[n] : real(0);
        }
    }
    return rec.h_out;
}

Matrix HiddenLayer::backward(const LayerActivationRecord& rec, const Matrix& grad_out) {
    if (rec.n_units != out_dim_ || rec.h_in.rows() != cfg_.n_in) {
        throw std::invalid_argument("HiddenLayer::backward: stale record");
    }
    ensure_shape(grad_out, out_dim_, rec.h_in.cols(), "HiddenLayer::backward grad_out");
    const int batch = rec.h_in.cols();

    // Gradient flows only through units kept by dropout and k-WTA.
    Matrix g = grad_out;
    for (int j = 0; j < batch; ++j) {
        for (int n = 0; n < out_dim_; ++n) {
            if (!rec.kwta(n, j)) g(n, j) = real(0);
        }
    }

    Matrix dz = g;
    if (bank_) {
        auto df = dz.flat();
        auto gf = rec.gate.flat();
        for (std::size_t i = 0; i < df.size(); ++i) df[i] *= gf[i];

        // Winning segments only; argmax held constant.
        const int d = bank_->context_dim;
        for (std::size_t u = 0; u < rec.selections.size(); ++u) {
            const auto& sel = rec.selections[u];
            for (int n = 0; n < out_dim_; ++n) {
                real dr = 0;
                for (int j = 0; j < batch; ++j) {
                    if (rec.ctx_of_sample[j] != static_cast<int>(u)) continue;
                    const real s = rec.gate(n, j);
                    dr += g(n, j) * rec.pre_mod(n, j) * sigmoid_grad_from_value(s);
                }
                if (dr == real(0)) continue;
                real* urow = g_u_.row(n * bank_->n_segments + sel.segment[n]);
                const real* ctx_row = rec.contexts.row(static_cast<int>(u));
                for (int t = 0; t < d; ++t) urow[t] += dr * ctx_row[t];
            }
        }
    }

    if (cfg_.dale) {
        Matrix d_ee = matmul_a_bt(dz, rec.h_in);
        apply_mask(d_ee, dann_.mask_ee);
        g_ee_ += d_ee;
        for (int n = 0; n < out_dim_; ++n) {
            real acc = 0;
            for (int j = 0; j < batch; ++j) acc += dz(n, j);
            g_b_(n, 0) += acc;
        }
        Matrix d_ei = matmul_a_bt(dz, rec.h_i);
        d_ei *= real(-1);
        apply_mask(d_ei, dann_.mask_ei);
        g_ei_ += d_ei;

        Matrix t = matmul_at_b(dann_.w_ei, dz);  // n_i x B
        Matrix d_ie = matmul_a_bt(t, rec.h_in);
        d_ie *= real(-1);
        apply_mask(d_ie, dann_.mask_ie);
        g_ie_ += d_ie;

        Matrix dh = matmul_at_b(dann_.w_ee, dz);
        Matrix inhib = matmul_at_b(dann_.w_ie, t);
        dh -= inhib;
        return dh;
    }

    Matrix d_w = matmul_a_bt(dz, rec.h_in);
    apply_mask(d_w, mask_w_);
    g_w_ += d_w;
    for (int n = 0; n < out_dim_; ++n) {
        real acc = 0;
        for (int j = 0; j < batch; ++j) acc += dz(n, j);
        g_b_(n, 0) += acc;
    }
    return matmul_at_b(w_, dz);
}

void HiddenLayer::zero_grads() {
    g_ee_.set_zero();
    g_ie_.set_zero();
    g_ei_.set_zero();
    g_w_.set_zero();
    g_b_.set_zero();
    g_u_.set_zero();
}

std::vector<ParamView> HiddenLayer::params() {
    std::vector<ParamView> out;
    const int n_e = cfg_.dale ? dann_.n_e : out_dim_;
    if (cfg_.dale) {
        out.push_back({ParamKind::Wee, &dann_.w_ee, &g_ee_,
                       dann_.mask_ee ? &*dann_.mask_ee : nullptr, n_e, cfg_.n_in});
        out.push_back({ParamKind::Wie, &dann_.w_ie, &g_ie_,
                       dann_.mask_ie ? &*dann_.mask_ie : nullptr, n_e, cfg_.n_in});
        out.push_back({ParamKind::Wei, &dann_.w_ei, &g_ei_,
                       dann_.mask_ei ? &*dann_.mask_ei : nullptr, n_e, cfg_.n_in});
        out.push_back({ParamKind::Bias, &dann_.b, &g_b_, nullptr, n_e, cfg_.n_in});
    } else {
        out.push_back({ParamKind::Dense, &w_, &g_w_, mask_w_ ? &*mask_w_ : nullptr, n_e,
                       cfg_.n_in});
        out.push_back({ParamKind::Bias, &b_, &g_b_, nullptr, n_e, cfg_.n_in});
    }
    if (bank_) {
        out.push_back({ParamKind::Dendrite, &bank_->u, &g_u_, nullptr, n_e, cfg_.n_in});
    }
    return out;
}

}  // namespace biocl
