#include "biocl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace biocl {

real sigmoid(real z) { return real(1) / (real(1) + std::exp(-z)); }

std::vector<real> softmax(std::span<const real> logits) {
    std::vector<real> p(logits.begin(), logits.end());
    const real m = *std::max_element(p.begin(), p.end());
    real sum = 0;
    for (auto& v : p) {
        v = std::exp(v - m);
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return p;
}

CrossEntropyResult softmax_cross_entropy(std::span<const real> logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size())) {
        throw std::out_of_range("softmax_cross_entropy: label out of range");
    }
    const real m = *std::max_element(logits.begin(), logits.end());
    real sum = 0;
    for (real v : logits) sum += std::exp(v - m);
    const real log_z = std::log(sum) + m;

    CrossEntropyResult out;
    out.loss = log_z - logits[label];
    out.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.grad[i] = std::exp(logits[i] - log_z);
    }
    out.grad[label] -= real(1);
    return out;
}

real batch_cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* dlogits,
                         real weight) {
    const int classes = logits.rows();
    const int batch = logits.cols();
    if (static_cast<int>(labels.size()) != batch) {
        throw std::invalid_argument("batch_cross_entropy: label count != batch");
    }
    std::vector<real> column(classes);
    real total = 0;
    for (int j = 0; j < batch; ++j) {
        for (int i = 0; i < classes; ++i) column[i] = logits(i, j);
        const auto ce = softmax_cross_entropy(column, labels[j]);
        total += ce.loss;
        if (dlogits) {
            const real scale = weight / static_cast<real>(batch);
            for (int i = 0; i < classes; ++i) (*dlogits)(i, j) += scale * ce.grad[i];
        }
    }
    return total / static_cast<real>(batch);
}

real batch_mse(const Matrix& logits, const Matrix& target, Matrix* dlogits, real weight) {
    if (!logits.same_shape(target)) throw std::invalid_argument("batch_mse: shape mismatch");
    const auto n = static_cast<real>(logits.size());
    real total = 0;
    auto lf = logits.flat();
    auto tf = target.flat();
    for (std::size_t i = 0; i < lf.size(); ++i) {
        const real diff = lf[i] - tf[i];
        total += diff * diff;
        if (dlogits) dlogits->flat()[i] += weight * real(2) * diff / n;
    }
    return total / n;
}

}  // namespace biocl
