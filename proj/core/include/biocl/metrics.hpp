#pragma once

#include <span>
#include <vector>

#include "biocl/matrix.hpp"

namespace biocl {

/// Accuracy matrix: acc[i][j] = accuracy on task j after training task i
/// (0-based). Entries for j > i exist only when forward transfer was
/// measured; absent entries are negative.
using AccuracyMatrix = std::vector<std::vector<real>>;

/// Mean over tasks j < T-1 of (max_i acc[i][j] - acc[T-1][j]).
real forgetting(const AccuracyMatrix& acc);

/// Mean over tasks j >= 1 of (acc[j-1][j] - chance).
real forward_transfer(const AccuracyMatrix& acc, real chance);

real average_final_accuracy(const AccuracyMatrix& acc);

/// Symmetric KL divergence KL(P||Q) + KL(Q||P) between two activation-count
/// histograms, normalized to distributions with additive smoothing.
real symmetric_kl(std::span<const real> counts_p, std::span<const real> counts_q,
                  real smoothing = real(1e-12));

}  // namespace biocl
