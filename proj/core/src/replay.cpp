#include "biocl/replay.hpp"

#include <stdexcept>

#include "biocl/losses.hpp"

namespace biocl {

void ReplayBuffer::insert(ReplayEntry entry, Rng& rng) {
    if (entries_.size() < capacity_) {
        entries_.push_back(std::move(entry));
    } else if (capacity_ > 0) {
        // n uniform over {0, ..., N}: inclusion probability stays exactly
        // capacity / N for every streamed item.
        const std::uint64_t n = rng.below(seen_ + 1);
        if (n < capacity_) entries_[static_cast<std::size_t>(n)] = std::move(entry);
    }
    ++seen_;
}

std::vector<const ReplayEntry*> ReplayBuffer::sample(int batch_size, Rng& rng) const {
    std::vector<const ReplayEntry*> out;
    if (entries_.empty() || batch_size <= 0) return out;
    out.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        out.push_back(&entries_[static_cast<std::size_t>(rng.below(entries_.size()))]);
    }
    return out;
}

void ReplayBuffer::restore(std::vector<ReplayEntry> entries, std::uint64_t seen) {
    if (entries.size() > capacity_) throw std::invalid_argument("ReplayBuffer: over capacity");
    entries_ = std::move(entries);
    seen_ = seen;
}

ReplayLossParts replay_loss(const Matrix& logits, std::span<const int> labels,
                            const Matrix& stored_logits, real alpha, real beta,
                            Matrix* dlogits) {
    ReplayLossParts parts;
    if (alpha != real(0)) {
        parts.ce = alpha * batch_cross_entropy(logits, labels, dlogits, alpha);
    }
    if (beta != real(0)) {
        parts.consistency = beta * batch_mse(logits, stored_logits, dlogits, beta);
    }
    return parts;
}

}  // namespace biocl
