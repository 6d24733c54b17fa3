#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tangled/error.hpp"
#include "tangled/permutation.hpp"
#include "tangled/rng.hpp"

namespace tangled {

inline constexpr double kPi = 3.14159265358979323846;

namespace detail {

inline void require_q(double q) { require(q >= 0.0 && q <= 1.0 && !std::isnan(q), "q must lie in [0, 1]"); }

/// 1 - q^m for 0 < q < 1, accurate near q = 1.
inline double one_minus_pow(double q, double m) { return -std::expm1(m * std::log(q)); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Truncated geometric distribution nu_{n,q}(j) proportional to q^{j-1} on {1..n}.

struct TruncatedGeometric {
    Index n;
    double q;

    TruncatedGeometric(Index n_, double q_) : n(n_), q(q_) {
        detail::require(n >= 1, "truncated geometric needs n >= 1");
        detail::require_q(q);
    }
};

inline double tg_pmf(const TruncatedGeometric& d, Index j) {
    detail::require(j >= 1 && j <= d.n, "tg_pmf: j outside {1..n}");
    if (d.q == 0.0) return j == 1 ? 1.0 : 0.0;
    if (d.q == 1.0) return 1.0 / d.n;
    return (1.0 - d.q) * std::pow(d.q, j - 1.0) / detail::one_minus_pow(d.q, d.n);
}

/// Pr[v >= x] = q^{x-1} (1 - q^{n-x+1}) / (1 - q^n).
inline double tg_tail(const TruncatedGeometric& d, Index x) {
    detail::require(x >= 1 && x <= d.n, "tg_tail: x outside {1..n}");
    if (x == 1) return 1.0;
    if (d.q == 0.0) return 0.0;
    if (d.q == 1.0) return static_cast<double>(d.n - x + 1) / d.n;
    return std::pow(d.q, x - 1.0) * detail::one_minus_pow(d.q, d.n - x + 1.0) / detail::one_minus_pow(d.q, d.n);
}

/// Pr[v <= x] = (1 - q^x) / (1 - q^n).
inline double tg_cdf(const TruncatedGeometric& d, Index x) {
    detail::require(x <= d.n, "tg_cdf: x outside {0..n}");
    if (x == 0) return 0.0;
    if (x == d.n) return 1.0;
    if (d.q == 0.0) return 1.0;
    if (d.q == 1.0) return static_cast<double>(x) / d.n;
    return detail::one_minus_pow(d.q, x) / detail::one_minus_pow(d.q, d.n);
}

/// Inverse-CDF draw with closed-form inversion; one uniform per call.
inline Index tg_sample(Index n, double q, CounterRng& rng) {
    const double u = rng.uniform01();
    if (q == 0.0 || n == 1) return 1;
    if (q == 1.0) return std::min<Index>(n, static_cast<Index>(u * n) + 1);
    const double log_q = std::log(q);
    const double x = std::log1p(-u * detail::one_minus_pow(q, n)) / log_q;
    const double j = std::floor(x) + 1.0;
    if (!(j >= 1.0)) return 1;  // also catches NaN
    if (j >= static_cast<double>(n)) return n;
    return static_cast<Index>(j);
}

// ---------------------------------------------------------------------------
// Insertion traces and the q-Mallows process.

struct InsertionTrace {
    std::vector<Index> positions;  // v_1..v_n, 1 <= v_i <= i
    double q = 1.0;
    std::optional<std::uint64_t> seed;

    InsertionTrace() = default;
    InsertionTrace(std::vector<Index> v, double q_, std::optional<std::uint64_t> seed_ = std::nullopt)
        : positions(std::move(v)), q(q_), seed(seed_) {
        validate();
    }

    Index size() const noexcept { return static_cast<Index>(positions.size()); }

    /// v_i, 1-based.
    Index operator()(Index i) const { return positions[i - 1]; }

    void validate() const {
        detail::require(!positions.empty(), "trace must have n >= 1");
        detail::require_q(q);
        for (std::size_t i = 0; i < positions.size(); ++i) {
            detail::require(positions[i] >= 1 && positions[i] <= i + 1, "trace entry v_i must satisfy 1 <= v_i <= i");
        }
    }
};

inline std::string format_trace(const InsertionTrace& t) { return format_sequence(kTraceLabel, t.positions); }

inline InsertionTrace parse_trace(std::string_view text, double q = 1.0) { return InsertionTrace(parse_sequence(text), q); }

inline InsertionTrace sample_trace(Index n, double q, CounterRng& rng) {
    detail::require(n >= 1, "sample_trace needs n >= 1");
    detail::require_q(q);
    InsertionTrace t;
    t.q = q;
    t.seed = rng.key();
    t.positions.resize(n);
    for (Index i = 1; i <= n; ++i) t.positions[i - 1] = tg_sample(i, q, rng);
    return t;
}

inline InsertionTrace sample_trace(Index n, double q, std::uint64_t seed) {
    CounterRng rng(seed);
    return sample_trace(n, q, rng);
}

/// r_n: at step i the value i is inserted at position v_i from the left.
///
/// Runs backwards in O(n log n): removing n from r_n leaves r_{n-1}, so value i
/// occupies the v_i-th slot (from the left) among those not taken by values > i.
inline Permutation mallows_process(std::span<const Index> positions) {
    const Index n = static_cast<Index>(positions.size());
    detail::require(n >= 1, "trace must have n >= 1");
    for (Index i = 1; i <= n; ++i) {
        detail::require(positions[i - 1] >= 1 && positions[i - 1] <= i, "trace entry v_i must satisfy 1 <= v_i <= i");
    }
    // Fenwick tree over free slots.
    std::vector<Index> tree(n + 1, 0);
    for (Index x = 1; x <= n; ++x) {
        tree[x] += 1;
        if (Index parent = x + (x & (~x + 1)); parent <= n) tree[parent] += tree[x];
    }
    Index top = 1;
    while (top * 2 <= n) top *= 2;
    std::vector<Index> image(n);
    for (Index value = n; value >= 1; --value) {
        Index rank = positions[value - 1];
        Index slot = 0;
        for (Index step = top; step > 0; step >>= 1) {
            if (slot + step <= n && tree[slot + step] < rank) {
                slot += step;
                rank -= tree[slot];
            }
        }
        ++slot;
        image[slot - 1] = value;
        for (Index x = slot; x <= n; x += x & (~x + 1)) --tree[x];
    }
    return make_unchecked(std::move(image));
}

inline Permutation mallows_process(const InsertionTrace& trace) { return mallows_process(std::span<const Index>(trace.positions)); }

struct MallowsSample {
    InsertionTrace trace;
    Permutation permutation;  // r_n; its reverse is mu_{n,q}-distributed
};

inline MallowsSample sample_mallows(Index n, double q, CounterRng& rng) {
    auto trace = sample_trace(n, q, rng);
    auto perm = mallows_process(trace);
    return {std::move(trace), std::move(perm)};
}

// ---------------------------------------------------------------------------
// The Mallows measure mu_{n,q}(sigma) = q^{inv(sigma)} / Z_{n,q}.

/// log Z_{n,q} = sum_i log(1 + q + ... + q^{i-1}); log n! at q = 1, 0 at q = 0.
inline double log_partition_function(Index n, double q) {
    detail::require(n >= 1, "partition function needs n >= 1");
    detail::require_q(q);
    if (q == 0.0) return 0.0;
    double acc = 0.0;
    if (q == 1.0) {
        for (Index i = 2; i <= n; ++i) acc += std::log(static_cast<double>(i));
        return acc;
    }
    const double log_one_minus_q = std::log1p(-q);
    for (Index i = 2; i <= n; ++i) acc += std::log(detail::one_minus_pow(q, i)) - log_one_minus_q;
    return acc;
}

inline double partition_function(Index n, double q) {
    detail::require(n >= 1, "partition function needs n >= 1");
    detail::require_q(q);
    if (q == 0.0) return 1.0;
    if (n > 300) return std::exp(log_partition_function(n, q));
    double z = 1.0;
    double geometric = 1.0;  // 1 + q + ... + q^{i-1}
    double power = 1.0;
    for (Index i = 2; i <= n; ++i) {
        power *= q;
        geometric += power;
        z *= geometric;
    }
    return z;
}

inline double mallows_pmf(const Permutation& p, double q) {
    detail::require_q(q);
    const std::uint64_t inv = inversions(p);
    if (q == 0.0) return inv == 0 ? 1.0 : 0.0;
    const double log_p = static_cast<double>(inv) * std::log(q) - log_partition_function(p.size(), q);
    return std::exp(log_p);
}

// ---------------------------------------------------------------------------
// Exhaustive oracle over the trace product space {1} x {1,2} x ... x {1..n}.

inline constexpr Index kMaxEnumerateN = 9;

/// Calls fn(std::span<const Index> positions, double weight) for every trace.
/// Weights are prod_i nu_{i,q}(v_i) and sum to 1.
template <class Fn>
void enumerate_traces(Index n, double q, Fn&& fn) {
    detail::require(n >= 1, "enumerate_traces needs n >= 1");
    detail::require_q(q);
    if (n > kMaxEnumerateN) {
        throw refusal_error("enumerate_traces: n = " + std::to_string(n) + " exceeds the exhaustive cap of " +
                            std::to_string(kMaxEnumerateN));
    }
    // pmf[i][j-1] = nu_{i+1,q}(j)
    std::vector<std::vector<double>> pmf(n);
    for (Index i = 1; i <= n; ++i) {
        TruncatedGeometric d(i, q);
        for (Index j = 1; j <= i; ++j) pmf[i - 1].push_back(tg_pmf(d, j));
    }
    std::vector<Index> v(n, 1);
    std::vector<double> prefix(n + 1, 1.0);  // prefix[i] = prod_{m<i} pmf[m][v_m - 1]
    for (Index i = 0; i < n; ++i) prefix[i + 1] = prefix[i] * pmf[i][0];
    while (true) {
        fn(std::span<const Index>(v), prefix[n]);
        // odometer: advance the highest index that can still move
        Index i = n;
        while (i > 0 && v[i - 1] == i) --i;
        if (i == 0) return;
        ++v[i - 1];
        prefix[i] = prefix[i - 1] * pmf[i - 1][v[i - 1] - 1];
        for (Index m = i; m < n; ++m) {
            v[m] = 1;
            prefix[m + 1] = prefix[m] * pmf[m][0];
        }
    }
}

// ---------------------------------------------------------------------------

/// (1/2) sum_j |nu_{k,q}(j) - 1/k|.
inline double tv_distance_to_uniform(Index k, double q) {
    detail::require(k >= 1, "tv_distance_to_uniform needs k >= 1");
    detail::require_q(q);
    if (k == 1 || q == 1.0) return 0.0;
    TruncatedGeometric d(k, q);
    double acc = 0.0;
    for (Index j = 1; j <= k; ++j) acc += std::abs(tg_pmf(d, j) - 1.0 / k);
    return 0.5 * acc;
}

struct TailEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    std::uint64_t trials = 0;
};

/// Monte Carlo estimate of Pr[|sigma(i) - i| >= t], sigma = reverse(r_n) ~ mu_{n,q}.
inline TailEstimate displacement_tail_empirical(Index n, double q, Index i, Index t, std::uint64_t trials,
                                                std::uint64_t seed) {
    detail::require(n >= 1 && i >= 1 && i <= n, "displacement: need 1 <= i <= n");
    detail::require(t >= 1, "displacement: need t >= 1");
    detail::require(trials > 0, "displacement: trials must be positive");
    detail::require_q(q);
    std::uint64_t hits = 0;
    for (std::uint64_t trial = 0; trial < trials; ++trial) {
        CounterRng rng(derive_seed(seed, trial));
        const auto r = sample_mallows(n, q, rng).permutation;
        const Index sigma_i = r(n + 1 - i);  // reverse(r)(i)
        const Index d = sigma_i > i ? sigma_i - i : i - sigma_i;
        if (d >= t) ++hits;
    }
    TailEstimate out;
    out.trials = trials;
    out.estimate = static_cast<double>(hits) / static_cast<double>(trials);
    if (trials > 1) {
        const double var = out.estimate * (1.0 - out.estimate) * static_cast<double>(trials) / (trials - 1.0);
        out.std_error = std::sqrt(var / static_cast<double>(trials));
    }
    return out;
}

}  // namespace tangled
