#include "biocl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace biocl {

real forgetting(const AccuracyMatrix& acc) {
    const int T = static_cast<int>(acc.size());
    if (T <= 1) return real(0);
    real total = 0;
    for (int j = 0; j < T - 1; ++j) {
        real peak = 0;
        for (int i = j; i < T; ++i) peak = std::max(peak, acc[i][j]);
        total += peak - acc[T - 1][j];
    }
    return total / static_cast<real>(T - 1);
}

real forward_transfer(const AccuracyMatrix& acc, real chance) {
    const int T = static_cast<int>(acc.size());
    if (T <= 1) return real(0);
    real total = 0;
    int count = 0;
    for (int j = 1; j < T; ++j) {
        if (acc[j - 1][j] < real(0)) {
            throw std::invalid_argument("forward_transfer: pre-training accuracy not measured");
        }
        total += acc[j - 1][j] - chance;
        ++count;
    }
    return total / static_cast<real>(count);
}

real average_final_accuracy(const AccuracyMatrix& acc) {
    if (acc.empty()) return real(0);
    const auto& last = acc.back();
    real total = 0;
    for (real v : last) total += v;
    return total / static_cast<real>(last.size());
}

real symmetric_kl(std::span<const real> counts_p, std::span<const real> counts_q,
                  real smoothing) {
    if (counts_p.size() != counts_q.size()) {
        throw std::invalid_argument("symmetric_kl: size mismatch");
    }
    const auto n = counts_p.size();
    real sum_p = 0, sum_q = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sum_p += counts_p[i] + smoothing;
        sum_q += counts_q[i] + smoothing;
    }
    real kl_pq = 0, kl_qp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const real p = (counts_p[i] + smoothing) / sum_p;
        const real q = (counts_q[i] + smoothing) / sum_q;
        kl_pq += p * std::log(p / q);
        kl_qp += q * std::log(q / p);
    }
    return kl_pq + kl_qp;
}

}  // namespace biocl
