#pragma once

#include <span>
#include <vector>

#include "biocl/matrix.hpp"

namespace biocl {

/// Elementwise mean of a task's training inputs (rows are samples).
std::vector<real> compute_prototype(const Matrix& samples);

/// Ordered task prototypes and nearest-prototype lookup. One prototype per
/// seen task; the context dimension is fixed by the first insertion.
class ContextStore {
public:
    void add(int task_id, std::vector<real> prototype);

    bool empty() const { return prototypes_.empty(); }
    int size() const { return static_cast<int>(prototypes_.size()); }
    int dim() const { return dim_; }

    int task_id(int idx) const { return task_ids_[idx]; }
    std::span<const real> prototype(int idx) const { return prototypes_[idx]; }
    std::span<const real> prototype_for_task(int task_id) const;

    /// argmin over stored prototypes of ||x - c_tau||_2; ties resolve to the
    /// earliest stored task. Returns the index into the store.
    int infer_index(std::span<const real> x) const;
    /// Same, returning (task id, prototype).
    std::pair<int, std::span<const real>> infer(std::span<const real> x) const;

private:
    std::vector<int> task_ids_;
    std::vector<std::vector<real>> prototypes_;
    int dim_ = -1;
};

}  // namespace biocl
