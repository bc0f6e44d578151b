#include "biocl/context.hpp"

#include <limits>
#include <stdexcept>

namespace biocl {

std::vector<real> compute_prototype(const Matrix& samples) {
    if (samples.rows() == 0) throw std::invalid_argument("compute_prototype: empty task");
    std::vector<real> mean(samples.cols(), real(0));
    for (int i = 0; i < samples.rows(); ++i) {
        const real* row = samples.row(i);
        for (int j = 0; j < samples.cols(); ++j) mean[j] += row[j];
    }
    const real inv = real(1) / static_cast<real>(samples.rows());
    for (auto& v : mean) v *= inv;
    return mean;
}

void ContextStore::add(int task_id, std::vector<real> prototype) {
    if (dim_ < 0) {
        dim_ = static_cast<int>(prototype.size());
    } else if (static_cast<int>(prototype.size()) != dim_) {
        throw std::invalid_argument("ContextStore: prototype dimension mismatch");
    }
    task_ids_.push_back(task_id);
    prototypes_.push_back(std::move(prototype));
}

std::span<const real> ContextStore::prototype_for_task(int task_id) const {
    for (std::size_t i = 0; i < task_ids_.size(); ++i) {
        if (task_ids_[i] == task_id) return prototypes_[i];
    }
    throw std::out_of_range("ContextStore: unknown task id");
}

int ContextStore::infer_index(std::span<const real> x) const {
    if (prototypes_.empty()) throw std::logic_error("ContextStore: empty store");
    if (static_cast<int>(x.size()) != dim_) {
        throw std::invalid_argument("ContextStore: query dimension mismatch");
    }
    int best = 0;
    real best_d2 = std::numeric_limits<real>::infinity();
    for (std::size_t i = 0; i < prototypes_.size(); ++i) {
        const auto& c = prototypes_[i];
        real d2 = 0;
        for (int j = 0; j < dim_; ++j) {
            const real diff = x[j] - c[j];
            d2 += diff * diff;
        }
        if (d2 < best_d2) {  // strict: ties keep the earliest task
            best_d2 = d2;
            best = static_cast<int>(i);
        }
    }
    return best;
}

std::pair<int, std::span<const real>> ContextStore::infer(std::span<const real> x) const {
    const int idx = infer_index(x);
    return {task_ids_[idx], prototypes_[idx]};
}

}  // namespace biocl
