#include "opslab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "opslab/rng.hpp"

namespace opslab {

double topk_regret(const TrueValues& values, const std::vector<int>& ranking, int k) {
    const int n = static_cast<int>(values.values.size());
    if (n == 0) throw std::invalid_argument("topk_regret: no values");
    if (k < 1 || k > n) throw std::invalid_argument("topk_regret: k out of range");
    if (static_cast<int>(ranking.size()) != n)
        throw std::invalid_argument("topk_regret: ranking is not a permutation");
    std::vector<bool> seen(n, false);
    for (int idx : ranking) {
        if (idx < 0 || idx >= n || seen[idx])
            throw std::invalid_argument("topk_regret: ranking is not a permutation");
        seen[idx] = true;
    }
    const double best = *std::max_element(values.values.begin(), values.values.end());
    const double worst = *std::min_element(values.values.begin(), values.values.end());
    if (best == worst) return 0.0;
    double top = values.values[ranking[0]];
    for (int i = 1; i < k; ++i) top = std::max(top, values.values[ranking[i]]);
    return (best - top) / (best - worst);
}

namespace {

// Inversion counting on y (strict), standard merge sort.
std::uint64_t count_inversions(std::vector<double>& y, std::vector<double>& buf, std::size_t lo,
                               std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = (lo + hi) / 2;
    std::uint64_t inv = count_inversions(y, buf, lo, mid) + count_inversions(y, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (y[j] < y[i]) {
            inv += mid - i;
            buf[k++] = y[j++];
        } else {
            buf[k++] = y[i++];
        }
    }
    while (i < mid) buf[k++] = y[i++];
    while (j < hi) buf[k++] = y[j++];
    std::copy(buf.begin() + lo, buf.begin() + hi, y.begin() + lo);
    return inv;
}

template <typename Key>
std::uint64_t tie_pairs(std::vector<Key> keys) {
    std::sort(keys.begin(), keys.end());
    std::uint64_t total = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= keys.size(); ++i) {
        if (i < keys.size() && keys[i] == keys[i - 1]) {
            ++run;
        } else {
            total += static_cast<std::uint64_t>(run) * (run - 1) / 2;
            run = 1;
        }
    }
    return total;
}

}  // namespace

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size()) throw std::invalid_argument("kendall_tau: length mismatch");
    if (n < 2) throw std::invalid_argument("kendall_tau: need at least 2 points");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    const std::uint64_t n1 = tie_pairs(std::vector<double>(x));
    const std::uint64_t n2 = tie_pairs(std::vector<double>(y));
    std::vector<std::pair<double, double>> xy;
    for (std::size_t i = 0; i < n; ++i) xy.emplace_back(x[i], y[i]);
    const std::uint64_t n3 = tie_pairs(std::move(xy));

    std::vector<double> ysorted(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) ysorted[i] = y[order[i]];
    const std::uint64_t swaps = count_inversions(ysorted, buf, 0, n);

    const double denom =
        std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
    if (denom == 0.0) return 0.0;
    const double pq = static_cast<double>(static_cast<std::int64_t>(n0) -
                                          static_cast<std::int64_t>(n1) -
                                          static_cast<std::int64_t>(n2) +
                                          static_cast<std::int64_t>(n3)) -
                      2.0 * static_cast<double>(swaps);
    return pq / denom;
}

double random_baseline_regret(const TrueValues& values, int k, int repeats, std::uint64_t seed) {
    const int n = static_cast<int>(values.values.size());
    if (n == 0) throw std::invalid_argument("random_baseline_regret: no values");
    if (k < 1 || k > n) throw std::invalid_argument("random_baseline_regret: k out of range");
    if (repeats < 1) throw std::invalid_argument("random_baseline_regret: repeats must be >= 1");
    const double best = *std::max_element(values.values.begin(), values.values.end());
    const double worst = *std::min_element(values.values.begin(), values.values.end());
    if (best == worst) return 0.0;

    Rng rng(derive_seed(seed, 0x72616e64));
    std::vector<int> pool(n);
    double total = 0.0;
    for (int rep = 0; rep < repeats; ++rep) {
        std::iota(pool.begin(), pool.end(), 0);
        double top = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < k; ++i) {
            const int j = i + rng.next_int(n - i);
            std::swap(pool[i], pool[j]);
            top = std::max(top, values.values[pool[i]]);
        }
        total += (best - top) / (best - worst);
    }
    return total / static_cast<double>(repeats);
}

SoundnessResult empirical_soundness(const std::function<int(std::uint64_t)>& select_for_seed,
                                    const TrueValues& values, double eps, int seeds) {
    if (seeds < 1) throw std::invalid_argument("empirical_soundness: seeds must be >= 1");
    const double best = *std::max_element(values.values.begin(), values.values.end());
    int successes = 0;
    for (int s = 0; s < seeds; ++s) {
        const int chosen = select_for_seed(static_cast<std::uint64_t>(s));
        if (chosen < 0 || chosen >= static_cast<int>(values.values.size()))
            throw std::invalid_argument("empirical_soundness: chosen index out of range");
        if (values.values[chosen] >= best - eps) ++successes;
    }
    SoundnessResult out;
    out.seeds = seeds;
    out.success_rate = static_cast<double>(successes) / seeds;
    out.stderr_ = std::sqrt(out.success_rate * (1.0 - out.success_rate) / seeds);
    return out;
}

}  // namespace opslab
