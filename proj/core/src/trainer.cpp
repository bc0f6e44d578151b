#include "biocl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "biocl/checkpoint.hpp"
#include "biocl/losses.hpp"

namespace biocl {

StepLossBreakdown TaskTrainStats::mean() const {
    StepLossBreakdown m;
    if (steps.empty()) return m;
    for (const auto& s : steps) {
        m.task += s.task;
        m.replay_ce += s.replay_ce;
        m.consistency += s.consistency;
        m.si += s.si;
    }
    const real inv = real(1) / static_cast<real>(steps.size());
    m.task *= inv;
    m.replay_ce *= inv;
    m.consistency *= inv;
    m.si *= inv;
    return m;
}

Trainer::Trainer(Network net, const TrainerConfig& cfg, std::uint64_t seed)
    : net_(std::move(net)),
      cfg_(cfg),
      buffer_(cfg.buffer_capacity),
      master_(seed),
      dropout_rng_(master_.substream(Rng::kDropout)),
      reservoir_rng_(master_.substream(Rng::kReservoir)),
      sampling_rng_(master_.substream(Rng::kSampling)) {
    if (cfg_.cr && !cfg_.er) {
        throw std::invalid_argument("Trainer: consistency regularization requires replay");
    }
    si_ = SiState(net_.params());
}

Trainer::BatchViews Trainer::gather(const Dataset& ds, std::span<const int> indices) const {
    BatchViews out;
    out.x = Matrix(ds.dim(), static_cast<int>(indices.size()));
    out.y.resize(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const real* src = ds.images.row(indices[j]);
        for (int i = 0; i < ds.dim(); ++i) out.x(i, static_cast<int>(j)) = src[i];
        out.y[j] = ds.labels[indices[j]];
    }
    return out;
}

ContextBatch Trainer::infer_contexts(const Matrix& x_cols, std::vector<int>* store_indices) const {
    const int batch = x_cols.cols();
    std::vector<real> sample(x_cols.rows());
    std::vector<int> inferred(batch);
    for (int j = 0; j < batch; ++j) {
        for (int i = 0; i < x_cols.rows(); ++i) sample[i] = x_cols(i, j);
        inferred[j] = store_.infer_index(sample);
    }
    // Deduplicate in ascending store order.
    std::vector<int> unique(inferred);
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    ContextBatch cb;
    cb.contexts = Matrix(static_cast<int>(unique.size()), store_.dim());
    for (std::size_t u = 0; u < unique.size(); ++u) {
        const auto proto = store_.prototype(unique[u]);
        std::copy(proto.begin(), proto.end(), cb.contexts.row(static_cast<int>(u)));
    }
    cb.index_of_sample.resize(batch);
    for (int j = 0; j < batch; ++j) {
        cb.index_of_sample[j] = static_cast<int>(
            std::lower_bound(unique.begin(), unique.end(), inferred[j]) - unique.begin());
    }
    if (store_indices) *store_indices = unique;
    return cb;
}

TaskTrainStats Trainer::train_task(const Task& task, int task_index) {
    TaskTrainStats stats;
    const bool has_dendrites = net_.config().dendrites && net_.config().n_segments > 0;

    // Alg. ordering: the prototype is computed from the full training split
    // before any gradient step.
    std::vector<real> proto = compute_prototype(task.train.images);
    store_.add(task.spec.task_id, proto);

    const int n = task.train.size();
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        auto shuffle_rng = master_.substream(Rng::kShuffle)
                               .substream(static_cast<std::uint64_t>(task_index) * 1000 + epoch);
        shuffle_rng.shuffle(order);

        for (int start = 0; start < n; start += cfg_.batch_size) {
            const int bsz = std::min(cfg_.batch_size, n - start);
            auto batch = gather(task.train, {order.data() + start, static_cast<std::size_t>(bsz)});

            net_.zero_grads();
            StepLossBreakdown losses;

            // Current-task pass: shared prototype context, dropout active.
            ContextBatch cb = ContextBatch::shared(proto, bsz);
            Network::ForwardRecord rec;
            Matrix logits =
                net_.forward(batch.x, has_dendrites ? &cb : nullptr, /*train=*/true,
                             cfg_.dropout ? &dropout_rng_ : nullptr, &rec);
            Matrix dlogits(logits.rows(), logits.cols());
            losses.task = batch_cross_entropy(logits, batch.y, &dlogits);
            net_.backward(rec, dlogits);

            // Replay pass: inferred contexts, dropout disabled.
            std::vector<int> replay_ctx_indices;
            if (cfg_.er && !buffer_.empty()) {
                const auto entries = buffer_.sample(cfg_.batch_size, sampling_rng_);
                const int m = static_cast<int>(entries.size());
                Matrix xm(net_.config().n_inputs, m);
                Matrix zm(net_.config().n_classes, m);
                std::vector<int> ym(m);
                for (int j = 0; j < m; ++j) {
                    for (int i = 0; i < xm.rows(); ++i) xm(i, j) = entries[j]->x[i];
                    for (int i = 0; i < zm.rows(); ++i) zm(i, j) = entries[j]->logits[i];
                    ym[j] = entries[j]->y;
                }
                ContextBatch cbm = infer_contexts(xm, &replay_ctx_indices);
                Network::ForwardRecord rec_m;
                Matrix logits_m = net_.forward(xm, has_dendrites ? &cbm : nullptr,
                                               /*train=*/true, nullptr, &rec_m);
                Matrix dlogits_m(logits_m.rows(), logits_m.cols());
                const auto parts = replay_loss(logits_m, ym, zm, cfg_.alpha,
                                               cfg_.cr ? cfg_.beta : real(0), &dlogits_m);
                losses.replay_ce = parts.ce;
                losses.consistency = parts.consistency;
                net_.backward(rec_m, dlogits_m);
            }

            auto params = net_.params();
            if (cfg_.si_enabled) {
                losses.si = si_.penalty(params, cfg_.si, /*add_grads=*/true);
            }

            scale_inhibitory_grads(params);
            clip_gradients(params, cfg_.opt);
            sgd_step(params, cfg_.opt, task_index);

            if (cfg_.hebbian && has_dendrites) {
                // One update per distinct context: the current prototype plus
                // deduplicated inferred prototypes from the replay batch.
                Matrix contexts(1 + static_cast<int>(replay_ctx_indices.size()), store_.dim());
                std::copy(proto.begin(), proto.end(), contexts.row(0));
                int row = 1;
                const int current_index = store_.size() - 1;
                for (int idx : replay_ctx_indices) {
                    if (idx == current_index) continue;
                    const auto p = store_.prototype(idx);
                    std::copy(p.begin(), p.end(), contexts.row(row++));
                }
                for (int l = 0; l < net_.n_layers(); ++l) {
                    if (auto* bank = net_.hidden(l).bank()) {
                        for (int r = 0; r < row; ++r) {
                            hebbian_step(*bank,
                                         {contexts.row(r), static_cast<std::size_t>(contexts.cols())},
                                         cfg_.opt.eta_h);
                        }
                    }
                }
            }

            if (cfg_.si_enabled) {
                std::vector<real> lrs(params.size());
                for (std::size_t i = 0; i < params.size(); ++i) {
                    lrs[i] = effective_lr(params[i].kind, cfg_.opt, task_index);
                }
                si_.accumulate(params, lrs);
            }

            if (cfg_.er) {
                std::vector<real> xcol(batch.x.rows());
                std::vector<real> zcol(logits.rows());
                for (int j = 0; j < bsz; ++j) {
                    for (int i = 0; i < batch.x.rows(); ++i) xcol[i] = batch.x(i, j);
                    for (int i = 0; i < logits.rows(); ++i) zcol[i] = logits(i, j);
                    buffer_.insert({xcol, batch.y[j], zcol}, reservoir_rng_);
                }
            }

            if (cfg_.dropout) {
                for (int l = 0; l < net_.n_layers(); ++l) {
                    update_activation_counts(net_.hidden(l).dropout(), rec.layers[l]);
                }
            }

            stats.steps.push_back(losses);
        }
    }

    // Task boundary.
    if (cfg_.dropout) {
        for (int l = 0; l < net_.n_layers(); ++l) refresh_keep_probs(net_.hidden(l).dropout());
    }
    if (cfg_.si_enabled) {
        auto params = net_.params();
        si_.consolidate(params, cfg_.si);
    }
    ++tasks_trained_;
    return stats;
}

real Trainer::evaluate(const Dataset& test, int oracle_task_id) const {
    if (store_.empty()) throw std::logic_error("Trainer::evaluate: no prototypes stored");
    const bool has_dendrites = net_.config().dendrites && net_.config().n_segments > 0;
    const int n = test.size();
    int correct = 0;

    // Group samples by inferred context so each group forwards as one batch.
    std::vector<int> group(n, 0);
    if (has_dendrites) {
        int oracle_idx = -1;
        for (int i = 0; i < store_.size(); ++i) {
            if (oracle_task_id >= 0 && store_.task_id(i) == oracle_task_id) oracle_idx = i;
        }
        if (oracle_idx >= 0) {
            std::fill(group.begin(), group.end(), oracle_idx);
        } else {
            // Nearest-prototype inference; also the fallback for oracle
            // evaluation of a task whose prototype does not exist yet.
            std::vector<real> sample(test.dim());
            for (int i = 0; i < n; ++i) {
                const real* row = test.images.row(i);
                std::copy(row, row + test.dim(), sample.begin());
                group[i] = store_.infer_index(sample);
            }
        }
    }

    const int n_groups = store_.size();
    for (int g = 0; g < n_groups; ++g) {
        std::vector<int> idx;
        for (int i = 0; i < n; ++i) {
            if (group[i] == g) idx.push_back(i);
        }
        if (idx.empty()) continue;
        for (std::size_t start = 0; start < idx.size(); start += 512) {
            const std::size_t bsz = std::min<std::size_t>(512, idx.size() - start);
            auto batch = gather(test, {idx.data() + start, bsz});
            ContextBatch cb = ContextBatch::shared(store_.prototype(g), static_cast<int>(bsz));
            Matrix logits = net_.forward(batch.x, has_dendrites ? &cb : nullptr,
                                         /*train=*/false, nullptr, nullptr);
            for (int j = 0; j < logits.cols(); ++j) {
                int argmax = 0;
                for (int c = 1; c < logits.rows(); ++c) {
                    if (logits(c, j) > logits(argmax, j)) argmax = c;
                }
                if (argmax == batch.y[j]) ++correct;
            }
        }
        if (!has_dendrites) break;  // grouping only matters with contexts
    }
    return static_cast<real>(correct) / static_cast<real>(n);
}

std::vector<real> Trainer::activation_counts(const Dataset& data, int layer_index) const {
    if (layer_index < 0 || layer_index >= net_.n_layers()) {
        throw std::out_of_range("activation_counts: bad layer index");
    }
    const bool has_dendrites = net_.config().dendrites && net_.config().n_segments > 0;
    std::vector<real> counts(net_.hidden(layer_index).out_dim(), real(0));
    const int n = data.size();
    for (int start = 0; start < n; start += 512) {
        const int bsz = std::min(512, n - start);
        std::vector<int> idx(bsz);
        for (int i = 0; i < bsz; ++i) idx[i] = start + i;
        auto batch = gather(data, idx);
        ContextBatch cb;
        if (has_dendrites) {
            cb = infer_contexts(batch.x, nullptr);
        }
        Network::ForwardRecord rec;
        net_.forward(batch.x, has_dendrites ? &cb : nullptr, /*train=*/false, nullptr, &rec);
        const auto& h = rec.layers[layer_index].h_out;
        for (int j = 0; j < h.cols(); ++j) {
            for (int u = 0; u < h.rows(); ++u) {
                if (h(u, j) != real(0)) counts[u] += real(1);
            }
        }
    }
    return counts;
}

RunResult Trainer::run(const TaskStream& stream) {
    const auto t0 = std::chrono::steady_clock::now();
    const int T = stream.n_tasks();
    RunResult res;
    res.seed = master_.seed();
    res.acc.assign(T, std::vector<real>(T, real(-1)));

    for (int t = 0; t < T; ++t) {
        {
            Task current = stream.task(t);
            res.task_stats.push_back(train_task(current, t));
        }
        for (int j = 0; j < T; ++j) {
            const bool needed = j <= t || (cfg_.measure_forward_transfer && j == t + 1);
            if (!needed) continue;
            const Dataset test = stream.materialize_test(j);
            res.acc[t][j] =
                evaluate(test, cfg_.oracle_context ? stream.spec(j).task_id : -1);
        }
    }

    res.avg_final_accuracy = average_final_accuracy(res.acc);
    res.forgetting = forgetting(res.acc);
    if (cfg_.measure_forward_transfer && T > 1) {
        res.fwd_transfer =
            forward_transfer(res.acc, real(1) / static_cast<real>(net_.config().n_classes));
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

namespace {

std::vector<std::int64_t> rng_state_to_ints(const Rng& rng) {
    const auto s = rng.state();
    std::vector<std::int64_t> v;
    v.push_back(static_cast<std::int64_t>(rng.seed()));
    for (auto x : s) v.push_back(static_cast<std::int64_t>(x));
    return v;
}

void restore_rng(Rng& rng, const std::vector<std::int64_t>& v) {
    rng = Rng(static_cast<std::uint64_t>(v[0]));
    rng.set_state({static_cast<std::uint64_t>(v[1]), static_cast<std::uint64_t>(v[2]),
                   static_cast<std::uint64_t>(v[3]), static_cast<std::uint64_t>(v[4])});
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path, const std::string& config_echo) const {
    ArchiveWriter w;
    w.put_ints("meta/version", {1});
    w.put_ints("meta/tasks_trained", {tasks_trained_});
    if (!config_echo.empty()) w.put_string("meta/config", config_echo);

    // Model parameters + dropout bookkeeping.
    auto& net = const_cast<Network&>(net_);
    const auto params = net.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        w.put_matrix("param/" + std::to_string(i), *params[i].value);
        if (params[i].mask) w.put_matrix("mask/" + std::to_string(i), *params[i].mask);
    }
    for (int l = 0; l < net_.n_layers(); ++l) {
        const auto& d = net_.hidden(l).dropout();
        Matrix counts(1, static_cast<int>(d.counts.size()));
        Matrix probs(1, static_cast<int>(d.keep_probs.size()));
        std::copy(d.counts.begin(), d.counts.end(), counts.row(0));
        std::copy(d.keep_probs.begin(), d.keep_probs.end(), probs.row(0));
        w.put_matrix("dropout/counts" + std::to_string(l), counts);
        w.put_matrix("dropout/probs" + std::to_string(l), probs);
    }

    // Prototypes.
    std::vector<std::int64_t> task_ids;
    for (int i = 0; i < store_.size(); ++i) task_ids.push_back(store_.task_id(i));
    w.put_ints("proto/task_ids", task_ids);
    if (store_.size() > 0) {
        Matrix protos(store_.size(), store_.dim());
        for (int i = 0; i < store_.size(); ++i) {
            const auto p = store_.prototype(i);
            std::copy(p.begin(), p.end(), protos.row(i));
        }
        w.put_matrix("proto/vectors", protos);
    }

    // Synaptic-importance state.
    w.put_ints("si/consolidated", {si_.consolidated() ? 1 : 0});
    for (int i = 0; i < si_.group_count(); ++i) {
        w.put_matrix("si/omega" + std::to_string(i), si_.omega(i));
        w.put_matrix("si/Omega" + std::to_string(i), si_.Omega(i));
        w.put_matrix("si/Omega_adj" + std::to_string(i), si_.omega_adj(i));
        w.put_matrix("si/theta_c" + std::to_string(i), si_.theta_c(i));
    }

    // Replay buffer (raw normalized inputs).
    w.put_ints("buffer/seen", {static_cast<std::int64_t>(buffer_.seen())});
    const auto& entries = buffer_.entries();
    if (!entries.empty()) {
        Matrix bx(static_cast<int>(entries.size()), static_cast<int>(entries[0].x.size()));
        Matrix bz(static_cast<int>(entries.size()), static_cast<int>(entries[0].logits.size()));
        std::vector<std::int64_t> by;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            std::copy(entries[i].x.begin(), entries[i].x.end(), bx.row(static_cast<int>(i)));
            std::copy(entries[i].logits.begin(), entries[i].logits.end(),
                      bz.row(static_cast<int>(i)));
            by.push_back(entries[i].y);
        }
        w.put_matrix("buffer/x", bx);
        w.put_matrix("buffer/logits", bz);
        w.put_ints("buffer/y", by);
    }

    // RNG streams.
    w.put_ints("rng/master", rng_state_to_ints(master_));
    w.put_ints("rng/dropout", rng_state_to_ints(dropout_rng_));
    w.put_ints("rng/reservoir", rng_state_to_ints(reservoir_rng_));
    w.put_ints("rng/sampling", rng_state_to_ints(sampling_rng_));

    w.save(path);
}

void Trainer::restore_checkpoint(const std::string& path) {
    ArchiveReader r(path);
    tasks_trained_ = static_cast<int>(r.ints("meta/tasks_trained")[0]);

    auto params = net_.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix m = r.matrix("param/" + std::to_string(i));
        if (!m.same_shape(*params[i].value)) {
            throw std::runtime_error("restore_checkpoint: parameter shape mismatch");
        }
        *params[i].value = std::move(m);
    }
    for (int l = 0; l < net_.n_layers(); ++l) {
        auto& d = net_.hidden(l).dropout();
        const Matrix counts = r.matrix("dropout/counts" + std::to_string(l));
        const Matrix probs = r.matrix("dropout/probs" + std::to_string(l));
        d.counts.assign(counts.row(0), counts.row(0) + counts.cols());
        d.keep_probs.assign(probs.row(0), probs.row(0) + probs.cols());
    }

    store_ = ContextStore{};
    const auto task_ids = r.ints("proto/task_ids");
    if (!task_ids.empty()) {
        const Matrix protos = r.matrix("proto/vectors");
        for (std::size_t i = 0; i < task_ids.size(); ++i) {
            std::vector<real> p(protos.row(static_cast<int>(i)),
                                protos.row(static_cast<int>(i)) + protos.cols());
            store_.add(static_cast<int>(task_ids[i]), std::move(p));
        }
    }

    si_ = SiState(params);
    si_.set_consolidated(r.ints("si/consolidated")[0] != 0);
    for (int i = 0; i < si_.group_count(); ++i) {
        si_.mutable_omega(i) = r.matrix("si/omega" + std::to_string(i));
        si_.mutable_Omega(i) = r.matrix("si/Omega" + std::to_string(i));
        si_.mutable_omega_adj(i) = r.matrix("si/Omega_adj" + std::to_string(i));
        si_.mutable_theta_c(i) = r.matrix("si/theta_c" + std::to_string(i));
    }

    buffer_ = ReplayBuffer(cfg_.buffer_capacity);
    const auto seen = static_cast<std::uint64_t>(r.ints("buffer/seen")[0]);
    std::vector<ReplayEntry> entries;
    if (r.has("buffer/x")) {
        const Matrix bx = r.matrix("buffer/x");
        const Matrix bz = r.matrix("buffer/logits");
        const auto by = r.ints("buffer/y");
        for (int i = 0; i < bx.rows(); ++i) {
            ReplayEntry e;
            e.x.assign(bx.row(i), bx.row(i) + bx.cols());
            e.logits.assign(bz.row(i), bz.row(i) + bz.cols());
            e.y = static_cast<int>(by[static_cast<std::size_t>(i)]);
            entries.push_back(std::move(e));
        }
    }
    buffer_.restore(std::move(entries), seen);

    restore_rng(master_, r.ints("rng/master"));
    restore_rng(dropout_rng_, r.ints("rng/dropout"));
    restore_rng(reservoir_rng_, r.ints("rng/reservoir"));
    restore_rng(sampling_rng_, r.ints("rng/sampling"));
}

}  // namespace biocl
