#pragma once

#include <span>
#include <vector>

#include "biocl/matrix.hpp"

namespace biocl {

real sigmoid(real z);

/// Derivative given the already-computed sigmoid value s: s * (1 - s).
inline real sigmoid_grad_from_value(real s) { return s * (real(1) - s); }

/// Max-subtracted softmax.
std::vector<real> softmax(std::span<const real> logits);

struct CrossEntropyResult {
    real loss = 0;
    std::vector<real> grad;  // softmax(logits) - onehot(label)
};

/// Numerically stabilized -log softmax(logits)[label] and its gradient.
/// Throws std::out_of_range when label is not a valid class index.
CrossEntropyResult softmax_cross_entropy(std::span<const real> logits, int label);

/// Mean cross-entropy over a batch of logit columns. Adds
/// (softmax - onehot)/batch into dlogits (same shape as logits).
real batch_cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* dlogits,
                         real weight = real(1));

/// Mean squared error over all entries of (logits - target), with
/// `weight * 2 * (logits - target) / size` added into dlogits.
real batch_mse(const Matrix& logits, const Matrix& target, Matrix* dlogits,
               real weight = real(1));

}  // namespace biocl
