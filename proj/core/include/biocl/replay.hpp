#pragma once

#include <cstdint>
#include <vector>

#include "biocl/matrix.hpp"
#include "biocl/rng.hpp"

namespace biocl {

struct ReplayEntry {
    std::vector<real> x;       // normalized input vector
    int y = 0;                 // class label
    std::vector<real> logits;  // model outputs at insertion time, frozen
};

/// Fixed-capacity reservoir over the sample stream. After N >= capacity
/// offers, every offered item sits in the buffer with probability
/// capacity / N.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 500) : capacity_(capacity) {}

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    std::uint64_t seen() const { return seen_; }
    bool empty() const { return entries_.empty(); }

    void insert(ReplayEntry entry, Rng& rng);

    /// Uniform sampling with replacement; empty batch when the buffer is
    /// empty or batch_size is 0 (the trainer branches on that).
    std::vector<const ReplayEntry*> sample(int batch_size, Rng& rng) const;

    const std::vector<ReplayEntry>& entries() const { return entries_; }
    void restore(std::vector<ReplayEntry> entries, std::uint64_t seen);

private:
    std::size_t capacity_;
    std::vector<ReplayEntry> entries_;
    std::uint64_t seen_ = 0;
};

struct ReplayLossParts {
    real ce = 0;           // alpha-weighted cross-entropy term
    real consistency = 0;  // beta-weighted mean-squared consistency term
    real total() const { return ce + consistency; }
};

/// alpha * CE(f(x_m), y_m) + beta * mean((f(x_m) - z_m)^2); both gradients
/// are added into dlogits. MSE reduction is the mean over batch and logit
/// dimensions so beta transfers across class counts.
ReplayLossParts replay_loss(const Matrix& logits, std::span<const int> labels,
                            const Matrix& stored_logits, real alpha, real beta,
                            Matrix* dlogits);

}  // namespace biocl
