#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tangled/error.hpp"
#include "tangled/graph.hpp"
#include "tangled/mallows.hpp"
#include "tangled/permutation.hpp"
#include "tangled/rng.hpp"

namespace tangled {

/// Probabilities that drift past 1 by at most this much after a log-space
/// round trip are clamped; anything larger is a bug.
inline constexpr double kProbEpsilon = 1e-12;

namespace detail {

inline double clamp_prob(double p) {
    if (std::isnan(p) || p < -kProbEpsilon || p > 1.0 + kProbEpsilon) {
        throw std::logic_error("probability out of range: " + std::to_string(p));
    }
    return std::clamp(p, 0.0, 1.0);
}

inline void require_open_q(double q, const char* what) {
    require(q > 0.0 && q < 1.0, std::string(what) + ": needs 0 < q < 1");
}

}  // namespace detail

/// b(q) = ceil(8 log n / log(1/q)). Undefined at q in {0, 1}.
inline Index b_value(Index n, double q) {
    detail::require(n >= 1, "b_value needs n >= 1");
    detail::require_q(q);
    if (q == 0.0 || q == 1.0) throw refusal_error("b(q) is undefined at q = 0 and q = 1");
    const double b = std::ceil(8.0 * std::log(static_cast<double>(n)) / -std::log(q));
    return static_cast<Index>(std::min(b, 4.0e9));
}

/// Integer range [ceil((1-alpha) n), floor(alpha n)] of balanced cut positions.
/// A 1e-9 slack absorbs representation error such as (1 - 2/3) * 9.
inline std::pair<Index, Index> separator_k_range(Index n, double alpha) {
    detail::require(alpha > 0.5 && alpha < 1.0, "alpha must lie in (1/2, 1)");
    const double lo = std::ceil((1.0 - alpha) * n - 1e-9);
    const double hi = std::floor(alpha * n + 1e-9);
    return {static_cast<Index>(std::max(lo, 0.0)), static_cast<Index>(std::max(hi, 0.0))};
}

// ---------------------------------------------------------------------------
// Event detection on traces.

/// Greedy earliest match for S(k, b, ell): some k <= t_1 < ... < t_b <= k + ell
/// with v_{t_j} <= j. Taking the first admissible t_j is optimal because the
/// thresholds j only grow, so an earlier t_j never rules out a later match.
inline bool sparse_flush(const InsertionTrace& trace, Index k, Index b, std::uint64_t ell) {
    const Index n = trace.size();
    detail::require(k >= 1 && k <= n, "sparse_flush: k out of range");
    if (b == 0) return true;
    const std::uint64_t last = std::min<std::uint64_t>(n, std::uint64_t{k} + ell);
    Index j = 1;
    for (std::uint64_t t = k; t <= last; ++t) {
        if (trace(static_cast<Index>(t)) <= j && ++j > b) return true;
    }
    return false;
}

struct SparseQuery {
    Index k = 1;
    Index b = 1;
    std::uint64_t ell = 0;
};

struct EventOptions {
    bool local_flush = false;
    std::vector<SparseQuery> sparse;
};

/// Per-index flags, indexed 1..n (slot 0 unused).
struct EventReport {
    Index n = 0;
    double q = 1.0;
    std::vector<bool> flush;          // F_k
    std::vector<bool> reverse_flush;  // R_k
    std::vector<bool> cut_flush;      // C_k^F
    std::vector<bool> cut_reverse;    // C_k^R
    std::optional<Index> b;
    std::optional<std::vector<bool>> local_flush;  // L_k
    std::vector<std::pair<SparseQuery, bool>> sparse;
    std::vector<Index> cut_set;  // k in 2..n-1 with C_k^F or C_k^R
};

inline EventReport detect_events(const InsertionTrace& trace, const EventOptions& opt = {}) {
    trace.validate();
    const Index n = trace.size();
    EventReport r;
    r.n = n;
    r.q = trace.q;
    r.flush.assign(n + 1, false);
    r.reverse_flush.assign(n + 1, false);
    r.cut_flush.assign(n + 1, false);
    r.cut_reverse.assign(n + 1, false);

    // F_k <=> k <= min_{i>k} (i - v_i);  R_k <=> min_{i>k} v_i > k
    std::uint64_t slack = std::numeric_limits<std::uint64_t>::max();
    Index low_v = std::numeric_limits<Index>::max();
    for (Index k = n; k >= 1; --k) {
        r.flush[k] = k <= slack;
        r.reverse_flush[k] = low_v > k;
        r.cut_flush[k] = r.flush[k] && trace(k) == 1;
        r.cut_reverse[k] = r.reverse_flush[k] && trace(k) == k;
        slack = std::min<std::uint64_t>(slack, k - trace(k));
        low_v = std::min(low_v, trace(k));
    }
    for (Index k = 2; k + 1 <= n; ++k)
        if (r.cut_flush[k] || r.cut_reverse[k]) r.cut_set.push_back(k);

    if (opt.local_flush || !opt.sparse.empty()) {
        if (trace.q == 0.0 || trace.q == 1.0) {
            throw refusal_error("local and sparse flush need 0 < q < 1 (b(q) is undefined)");
        }
    }
    if (opt.local_flush) {
        const Index b = b_value(n, trace.q);
        r.b = b;
        // L_k: min of (i - v_i) over the window k < i <= k + b
        std::vector<bool> local(n + 1, false);
        std::deque<Index> window;
        for (Index k = n; k >= 1; --k) {
            if (k < n) {
                const Index i = k + 1;
                const Index val = i - trace(i);
                while (!window.empty() && window.back() - trace(window.back()) >= val) window.pop_back();
                window.push_back(i);
            }
            while (!window.empty() && std::uint64_t{window.front()} > std::uint64_t{k} + b) window.pop_front();
            local[k] = window.empty() || k <= window.front() - trace(window.front());
        }
        r.local_flush = std::move(local);
    }
    for (const auto& s : opt.sparse) r.sparse.emplace_back(s, sparse_flush(trace, s.k, s.b, s.ell));
    return r;
}

/// Cut vertices of the tangled graph read off the trace alone, in O(n).
inline std::vector<Index> cut_vertices_from_trace(const InsertionTrace& trace) {
    if (trace.size() < 3) return {};
    return detect_events(trace).cut_set;
}

/// |cut_set ∩ [ceil((1-alpha) n), floor(alpha n)]|
inline std::size_t count_cuts_in_range(const std::vector<Index>& cut_set, Index n, double alpha) {
    const auto [lo, hi] = separator_k_range(n, alpha);
    return static_cast<std::size_t>(
        std::count_if(cut_set.begin(), cut_set.end(), [lo = lo, hi = hi](Index k) { return k >= lo && k <= hi; }));
}

// ---------------------------------------------------------------------------
// Exact probabilities.

/// log Pr[F_k] = sum_{i=1}^{k} log(1 - q^i) - log(1 - q^{n-k+i}).
inline double log_flush_prob(Index n, Index k, double q) {
    detail::require(k >= 1 && k <= n, "flush_prob: need 1 <= k <= n");
    detail::require_q(q);
    if (q == 0.0 || k == n) return 0.0;
    double acc = 0.0;
    if (q == 1.0) {
        for (Index i = 1; i <= k; ++i) acc += std::log(static_cast<double>(i) / static_cast<double>(n - k + i));
        return acc;
    }
    for (Index i = 1; i <= k; ++i) {
        acc += std::log(detail::one_minus_pow(q, i)) - std::log(detail::one_minus_pow(q, n - k + i));
    }
    return acc;
}

inline double flush_prob(Index n, Index k, double q) { return detail::clamp_prob(std::exp(log_flush_prob(n, k, q))); }

/// Pr[R_k] = q^{k(n-k)} Pr[F_k].
inline double reverse_flush_prob(Index n, Index k, double q) {
    const double lf = log_flush_prob(n, k, q);
    const double e = static_cast<double>(k) * static_cast<double>(n - k);
    if (e == 0.0) return detail::clamp_prob(std::exp(lf));
    if (q == 0.0) return 0.0;
    return detail::clamp_prob(std::exp(e * std::log(q) + lf));
}

struct CutEventProbs {
    double flush = 0.0;    // Pr[C_k^F]
    double reverse = 0.0;  // Pr[C_k^R]
};

/// Pr[C_k^F] = Pr[F_k] Pr[v_k = 1] and Pr[C_k^R] = q^{k(n-k+1)-1} Pr[C_k^F].
inline CutEventProbs cut_event_probs(Index n, Index k, double q) {
    detail::require(k >= 2 && k + 1 <= n, "cut_event_probs: need 2 <= k <= n-1");
    detail::require_q(q);
    if (q == 0.0) return {1.0, 0.0};
    double log_first = 0.0;  // log Pr[v_k = 1]
    if (q == 1.0) {
        log_first = -std::log(static_cast<double>(k));
    } else {
        log_first = std::log1p(-q) - std::log(detail::one_minus_pow(q, k));
    }
    const double lf = log_flush_prob(n, k, q) + log_first;
    const double e = static_cast<double>(k) * static_cast<double>(n - k + 1) - 1.0;
    return {detail::clamp_prob(std::exp(lf)), detail::clamp_prob(std::exp(e * std::log(q) + lf))};
}

/// E[X_n(alpha)]: expected number of cut vertices in the balanced range.
inline double expected_cuts(Index n, double q, double alpha) {
    const auto [lo, hi] = separator_k_range(n, alpha);
    double total = 0.0;
    for (Index k = std::max<Index>(lo, 2); k <= hi && k + 1 <= n; ++k) {
        const auto p = cut_event_probs(n, k, q);
        total += p.flush + p.reverse;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Special functions and analytic bounds.

/// Li_2(x) for x <= 1.
inline double dilog(double x) {
    detail::require(x <= 1.0 && !std::isnan(x), "dilog needs x <= 1");
    auto series = [](double y) {
        double term = y, acc = 0.0;
        for (int k = 1; k < 10000; ++k) {
            const double add = term / (static_cast<double>(k) * k);
            acc += add;
            if (std::abs(add) < 1e-18 * std::max(1.0, std::abs(acc))) break;
            term *= y;
        }
        return acc;
    };
    if (x == 1.0) {
        // partial sum of 1/k^2 plus the Euler-Maclaurin tail
        constexpr int N = 1000;
        double acc = 0.0;
        for (int k = N - 1; k >= 1; --k) acc += 1.0 / (static_cast<double>(k) * k);
        const double m = N;
        return acc + 1.0 / m + 1.0 / (2 * m * m) + 1.0 / (6 * m * m * m) - 1.0 / (30 * std::pow(m, 5));
    }
    if (x == 0.0) return 0.0;
    if (x < -1.0) {
        // Li2(x) = -pi^2/6 - log^2(-x)/2 - Li2(1/x)
        const double l = std::log(-x);
        return -dilog(1.0) - 0.5 * l * l - dilog(1.0 / x);
    }
    if (x < -0.5) {
        // Landen: Li2(x) = -Li2(x/(x-1)) - log^2(1-x)/2
        const double l = std::log1p(-x);
        return -series(x / (x - 1.0)) - 0.5 * l * l;
    }
    if (x <= 0.5) return series(x);
    // reflection: Li2(x) = Li2(1) - log(x) log(1-x) - Li2(1-x)
    return dilog(1.0) - std::log(x) * std::log1p(-x) - series(1.0 - x);
}

/// Sum_{i>=1} log(1 - q^i) - pi^2/(6 log q) + log(1 - q)/2, with the series
/// truncated once terms fall below 1e-15.
inline double maclaurin_residual(double q) {
    detail::require_open_q(q, "maclaurin_residual");
    const double lq = std::log(q);
    double acc = 0.0;
    for (std::uint64_t i = 1;; ++i) {
        const double t = std::log(detail::one_minus_pow(q, static_cast<double>(i)));
        acc += t;
        if (std::abs(t) < 1e-15) break;
    }
    return acc - kPi * kPi / (6.0 * lq) + 0.5 * std::log1p(-q);
}

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

/// Bounds on maclaurin_residual(q): [q log q / (6(1-q)), -(1-q)/(q log q)].
inline Interval maclaurin_bounds(double q) {
    detail::require_open_q(q, "maclaurin_bounds");
    const double lq = std::log(q);
    return {q * lq / (6.0 * (1.0 - q)), -(1.0 - q) / (q * lq)};
}

/// Sandwich for log Pr[F_k] around pi^2/(6 log q) - log(1-q)/2.
///
/// With m = min(n-k, k) = 0 the simplified upper term is infinite; the two
/// tail sums it stands for are used directly instead.
inline Interval flush_log_bounds(Index n, Index k, double q) {
    detail::require(k >= 1 && k <= n, "flush_log_bounds: need 1 <= k <= n");
    detail::require_open_q(q, "flush_log_bounds");
    const double lq = std::log(q);
    const double base = kPi * kPi / (6.0 * lq) - 0.5 * std::log1p(-q);
    const auto mac = maclaurin_bounds(q);
    const Index m = std::min(n - k, k);
    auto tail = [q](double from) { return std::exp(from * std::log(q)) / ((1.0 - q) * detail::one_minus_pow(q, from)); };
    const double extra = m >= 1 ? 2.0 * tail(m) : tail(k + 1.0) + tail(n - k + 1.0);
    return {base + mac.lower, base + extra + mac.upper};
}

/// exp(-q (1 - q^m) / (2 (1 - q))) with m = min(k, n-k); dominates Pr[F_k].
inline double flush_cheap_bound(Index n, Index k, double q) {
    detail::require(k >= 1 && k <= n, "flush_cheap_bound: need 1 <= k <= n");
    detail::require_open_q(q, "flush_cheap_bound");
    const Index m = std::min(k, n - k);
    return std::exp(-q * detail::one_minus_pow(q, m) / (2.0 * (1.0 - q)));
}

struct CutProbWindow {
    std::optional<double> lower;  // absent in relaxed mode
    double upper = 0.0;
    bool relaxed = false;
};

/// Closed-form window e^{-1/6} s <= Pr[C_k^F] <= e^5 s, s = sqrt(1-q) exp(-pi^2/(6(1-q))).
///
/// Hypotheses: n >= (100/(1-alpha))^5, k in the balanced range and
/// 1 <= 1/(1-q) <= n^{4/5}. With `relaxed` the size hypothesis is waived and
/// only the upper closed form is returned.
inline CutProbWindow cut_prob_window(Index n, Index k, double q, double alpha, bool relaxed = false) {
    detail::require_q(q);
    const auto [lo, hi] = separator_k_range(n, alpha);
    if (k < lo || k > hi) throw refusal_error("cut_prob_window: k outside the balanced range");
    if (q == 1.0 || 1.0 / (1.0 - q) > std::pow(static_cast<double>(n), 0.8)) {
        throw refusal_error("cut_prob_window: needs 1/(1-q) <= n^(4/5)");
    }
    const bool size_ok = static_cast<double>(n) >= std::pow(100.0 / (1.0 - alpha), 5.0);
    if (!size_ok && !relaxed) {
        throw refusal_error("cut_prob_window: needs n >= (100/(1-alpha))^5; pass relaxed to get the upper form only");
    }
    const double s = std::sqrt(1.0 - q) * std::exp(-kPi * kPi / (6.0 * (1.0 - q)));
    CutProbWindow w;
    w.upper = std::exp(5.0) * s;
    w.relaxed = !size_ok;
    if (size_ok) w.lower = std::exp(-1.0 / 6.0) * s;
    return w;
}

struct ThresholdWindow {
    Index n = 0;
    double margin = 0.0;
    double q_critical = 0.0;
    double q_exist = 0.0;
    double q_nonexist = 0.0;
};

/// q = 1 - pi^2/(6 (log n -/+ margin log log n)). q_exist is clamped at 0 once
/// the shifted log is at most pi^2/6.
inline ThresholdWindow threshold_window(Index n, double margin) {
    detail::require(n >= 16, "threshold_window needs n >= 16");
    detail::require(margin >= 0.0, "threshold_window needs margin >= 0");
    const double ln = std::log(static_cast<double>(n));
    const double lln = std::log(ln);
    detail::require(lln > 0.0, "threshold_window needs log log n > 0");
    const double c = kPi * kPi / 6.0;
    auto at = [c](double denom) { return denom <= c ? 0.0 : 1.0 - c / denom; };
    return {n, margin, 1.0 - c / ln, at(ln - margin * lln), at(ln + margin * lln)};
}

struct BadEdgeReport {
    std::vector<Edge> bad_edges;  // permuted-path edges {j, k}, j < i < k
    std::vector<Index> a, b, c;
};

/// Bad edges for i and the A_i / B_i / C_i split of {i+1..n}.
inline BadEdgeReport bad_edge_classification(const InsertionTrace& trace, Index i, Index ell, Index L) {
    const Index n = trace.size();
    detail::require(i >= 1 && i <= n, "bad_edge_classification: i out of range");
    detail::require(ell <= L, "bad_edge_classification: need ell <= L");
    const auto sigma = mallows_process(trace);
    BadEdgeReport out;
    for (Index x = 1; x < n; ++x) {
        const Edge e = Edge::of(sigma(x), sigma(x + 1));
        if (e.u < i && e.v > i) out.bad_edges.push_back(e);
    }
    std::sort(out.bad_edges.begin(), out.bad_edges.end());
    out.bad_edges.erase(std::unique(out.bad_edges.begin(), out.bad_edges.end()), out.bad_edges.end());
    for (Index k = i + 1; k <= n; ++k) {
        if (std::uint64_t{k} > std::uint64_t{i} + L) {
            out.c.push_back(k);
        } else if (trace(k) > ell) {
            out.a.push_back(k);
        } else {
            out.b.push_back(k);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Concentration bounds.

/// lambda^{-1} (1 - p*)^{mu (lambda - 1 - log lambda)}
inline double janson_tail_bound(double lambda, double mu, double p_star) {
    detail::require(lambda >= 1.0, "janson_tail_bound needs lambda >= 1");
    detail::require(mu >= 0.0, "janson_tail_bound needs mu >= 0");
    detail::require(p_star > 0.0 && p_star <= 1.0, "janson_tail_bound needs 0 < p* <= 1");
    const double e = mu * (lambda - 1.0 - std::log(lambda));
    if (e == 0.0) return 1.0 / lambda;
    if (p_star == 1.0) return 0.0;
    return std::exp(e * std::log1p(-p_star)) / lambda;
}

/// (e^delta / (1+delta)^{1+delta})^mu
inline double chernoff_bound(double mu, double delta) {
    detail::require(delta > 0.0, "chernoff_bound needs delta > 0");
    detail::require(mu >= 0.0, "chernoff_bound needs mu >= 0");
    return std::exp(mu * (delta - (1.0 + delta) * std::log1p(delta)));
}

struct SparseFlushBound {
    double ell = 0.0;
    double bound = 1.0;
};

/// Window length ell = lambda (b + q/(1-q) + log((1-q)/(1-q^b)) / log q) and the
/// failure bound ((1-q) q^b / (1-q^b))^{lambda - 1 - log lambda}.
inline SparseFlushBound sparse_flush_bound(Index n, Index b, double q, double lambda) {
    detail::require(n >= 1, "sparse_flush_bound needs n >= 1");
    detail::require(b >= 1, "sparse_flush_bound needs b >= 1");
    detail::require(lambda >= 1.0, "sparse_flush_bound needs lambda >= 1");
    detail::require_open_q(q, "sparse_flush_bound");
    const double lq = std::log(q);
    const double omb = detail::one_minus_pow(q, b);
    SparseFlushBound out;
    out.ell = lambda * (b + q / (1.0 - q) + (std::log1p(-q) - std::log(omb)) / lq);
    const double e = lambda - 1.0 - std::log(lambda);
    out.bound = e == 0.0 ? 1.0 : std::exp(e * (std::log1p(-q) + b * lq - std::log(omb)));
    return out;
}

// ---------------------------------------------------------------------------

struct FlushCovariance {
    double p_first = 0.0;   // Pr[F_k]
    double p_second = 0.0;  // Pr[F_{k+j}]
    double p_joint = 0.0;
    double covariance = 0.0;
    std::uint64_t trials = 0;
};

/// Empirical covariance of the indicators of F_k and F_{k+j}. Observational.
inline FlushCovariance flush_covariance_empirical(Index n, Index k, Index j, double q, std::uint64_t trials,
                                                  std::uint64_t seed) {
    detail::require(k >= 1 && k + j <= n, "flush_covariance: need 1 <= k, k + j <= n");
    detail::require(trials > 0, "flush_covariance: trials must be positive");
    std::uint64_t a = 0, b = 0, ab = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        CounterRng rng(derive_seed(seed, t));
        const auto rep = detect_events(sample_trace(n, q, rng));
        const bool x = rep.flush[k], y = rep.flush[k + j];
        a += x;
        b += y;
        ab += x && y;
    }
    FlushCovariance out;
    out.trials = trials;
    const double T = static_cast<double>(trials);
    out.p_first = a / T;
    out.p_second = b / T;
    out.p_joint = ab / T;
    out.covariance = out.p_joint - out.p_first * out.p_second;
    return out;
}

}  // namespace tangled
