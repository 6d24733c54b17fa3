#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "tangled/error.hpp"
#include "tangled/graph.hpp"

namespace tangled {

/// Exact solvers below enumerate vertex subsets and refuse past this size.
inline constexpr Index kExactWidthCap = 20;

/// Nonnegative rational kept in lowest terms.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Rational of(std::int64_t p, std::int64_t q) {
        detail::require(q > 0, "rational: denominator must be positive");
        const auto g = std::gcd(p, q);
        return g == 0 ? Rational{0, 1} : Rational{p / g, q / g};
    }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    /// floor(this * m)
    std::int64_t floor_times(std::int64_t m) const { return (num * m) / den; }

    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }

    friend bool operator==(const Rational& a, const Rational& b) { return a.num == b.num && a.den == b.den; }
    friend auto operator<=>(const Rational& a, const Rational& b) { return a.num * b.den <=> b.num * a.den; }
};

namespace detail {

template <GraphLike G>
void require_exact_size(const G& g, const char* what) {
    if (g.vertex_count() > kExactWidthCap) {
        throw refusal_error(std::string(what) + ": n = " + std::to_string(g.vertex_count()) +
                            " exceeds the exact cap of " + std::to_string(kExactWidthCap) +
                            "; use treewidth_bounds / cutwidth_identity instead");
    }
}

/// adjacency bitmasks, vertex v -> bit v-1
template <GraphLike G>
std::vector<std::uint64_t> adjacency_masks(const G& g) {
    std::vector<std::uint64_t> adj(g.vertex_count(), 0);
    for (const auto& e : g.edges()) {
        adj[e.u - 1] |= std::uint64_t{1} << (e.v - 1);
        adj[e.v - 1] |= std::uint64_t{1} << (e.u - 1);
    }
    return adj;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Treewidth.

/// Exact treewidth by dynamic programming over vertex subsets.
///
/// TW(S) is the best achievable maximum back-degree when the vertices of S are
/// eliminated first: TW(S) = min_{v in S} max(TW(S - v), |Q(S - v, v)|), where
/// Q(S, v) is the set of vertices outside S + v reachable from v through S.
/// tw(G) = TW(V). O*(2^n) time, 2^n bytes.
template <GraphLike G>
int treewidth_exact(const G& g) {
    detail::require_exact_size(g, "treewidth_exact");
    const Index n = g.vertex_count();
    if (n <= 1) return 0;
    const auto adj = detail::adjacency_masks(g);
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    std::vector<std::int8_t> tw(full + 1, 0);
    tw[0] = -1;
    for (std::uint64_t s = 1; s <= full; ++s) {
        int best = 127;
        for (std::uint64_t rest = s; rest != 0; rest &= rest - 1) {
            const int v = std::countr_zero(rest);
            const std::uint64_t vbit = std::uint64_t{1} << v;
            const std::uint64_t without = s ^ vbit;
            const int prev = tw[without];
            if (std::max(prev, 0) >= best) continue;
            // component of v inside G[without + v], and everything it touches
            std::uint64_t comp = vbit;
            std::uint64_t frontier = vbit;
            std::uint64_t reach = 0;
            while (frontier != 0) {
                std::uint64_t nb = 0;
                for (std::uint64_t f = frontier; f != 0; f &= f - 1) nb |= adj[std::countr_zero(f)];
                reach |= nb;
                frontier = nb & without & ~comp;
                comp |= frontier;
            }
            const int q = std::popcount(reach & ~s);
            best = std::min(best, std::max(prev, q));
        }
        tw[s] = static_cast<std::int8_t>(best);
    }
    return tw[full];
}

struct WidthInterval {
    int lower = 0;
    int upper = 0;
};

/// Degeneracy lower bound (largest minimum degree met while peeling
/// min-degree vertices) and min-fill elimination upper bound.
template <GraphLike G>
WidthInterval treewidth_bounds(const G& g) {
    const Index n = g.vertex_count();
    WidthInterval out;
    if (n <= 1) return out;

    {
        std::vector<Index> deg(n + 1);
        std::vector<bool> gone(n + 1, false);
        for (Index v = 1; v <= n; ++v) deg[v] = static_cast<Index>(g.neighbors(v).size());
        for (Index step = 0; step < n; ++step) {
            Index pick = 0;
            for (Index v = 1; v <= n; ++v)
                if (!gone[v] && (pick == 0 || deg[v] < deg[pick])) pick = v;
            out.lower = std::max<int>(out.lower, static_cast<int>(deg[pick]));
            gone[pick] = true;
            for (Index w : g.neighbors(pick))
                if (!gone[w]) --deg[w];
        }
    }

    {
        std::vector<std::vector<Index>> adj(n + 1);
        for (Index v = 1; v <= n; ++v) adj[v].assign(g.neighbors(v).begin(), g.neighbors(v).end());
        std::vector<bool> gone(n + 1, false);
        auto adjacent = [&](Index a, Index b) { return std::binary_search(adj[a].begin(), adj[a].end(), b); };
        auto fill_in = [&](Index v) {
            std::size_t missing = 0;
            const auto& nb = adj[v];
            for (std::size_t i = 0; i < nb.size(); ++i)
                for (std::size_t j = i + 1; j < nb.size(); ++j)
                    if (!adjacent(nb[i], nb[j])) ++missing;
            return missing;
        };
        auto connect = [&](Index a, Index b) {
            adj[a].insert(std::lower_bound(adj[a].begin(), adj[a].end(), b), b);
            adj[b].insert(std::lower_bound(adj[b].begin(), adj[b].end(), a), a);
        };
        for (Index step = 0; step < n; ++step) {
            Index pick = 0;
            std::size_t pick_fill = 0;
            for (Index v = 1; v <= n; ++v) {
                if (gone[v]) continue;
                const std::size_t f = fill_in(v);
                if (pick == 0 || f < pick_fill || (f == pick_fill && adj[v].size() < adj[pick].size())) {
                    pick = v;
                    pick_fill = f;
                }
            }
            const std::vector<Index> nb = adj[pick];
            out.upper = std::max<int>(out.upper, static_cast<int>(nb.size()));
            for (std::size_t i = 0; i < nb.size(); ++i)
                for (std::size_t j = i + 1; j < nb.size(); ++j)
                    if (!adjacent(nb[i], nb[j])) connect(nb[i], nb[j]);
            for (Index w : nb) adj[w].erase(std::lower_bound(adj[w].begin(), adj[w].end(), pick));
            adj[pick].clear();
            gone[pick] = true;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cutwidth.

/// Exact cutwidth: cost(S) = max(boundary(S), min_{v in S} cost(S - v)) over
/// subsets S placed first in the layout.
template <GraphLike G>
int cutwidth_exact(const G& g) {
    detail::require_exact_size(g, "cutwidth_exact");
    const Index n = g.vertex_count();
    if (n <= 1) return 0;
    const auto adj = detail::adjacency_masks(g);
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    std::vector<std::uint8_t> boundary(full + 1, 0);
    std::vector<std::uint8_t> cost(full + 1, 0);
    for (std::uint64_t s = 1; s <= full; ++s) {
        const int low = std::countr_zero(s);
        const std::uint64_t without = s & (s - 1);
        boundary[s] = static_cast<std::uint8_t>(boundary[without] + std::popcount(adj[low]) -
                                                2 * std::popcount(adj[low] & without));
        int best = 255;
        for (std::uint64_t rest = s; rest != 0; rest &= rest - 1) {
            best = std::min<int>(best, cost[s ^ (std::uint64_t{1} << std::countr_zero(rest))]);
        }
        cost[s] = static_cast<std::uint8_t>(std::max<int>(best, boundary[s]));
    }
    return cost[full];
}

struct CutProfile {
    int width = 0;
    /// profile[x-1] = edges crossing the point x + 0.5, for x = 1..n-1
    std::vector<int> profile;
};

/// Crossing counts of the layout 1, 2, ..., n.
template <GraphLike G>
CutProfile cutwidth_identity(const G& g) {
    const Index n = g.vertex_count();
    CutProfile out;
    if (n <= 1) return out;
    std::vector<int> diff(n + 1, 0);
    for (const auto& e : g.edges()) {
        ++diff[e.u];
        --diff[e.v];
    }
    out.profile.resize(n - 1);
    int running = 0;
    for (Index x = 1; x < n; ++x) {
        running += diff[x];
        out.profile[x - 1] = running;
        out.width = std::max(out.width, running);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Isoperimetric numbers, minimised over 0 < |S| <= n/2.

namespace detail {

template <GraphLike G, class Boundary>
Rational min_ratio_over_small_sets(const G& g, const char* what, Boundary&& boundary) {
    require_exact_size(g, what);
    const Index n = g.vertex_count();
    require(n >= 2, std::string(what) + ": needs n >= 2");
    const auto adj = adjacency_masks(g);
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    std::optional<Rational> best;
    for (std::uint64_t s = 1; s <= full; ++s) {
        const int size = std::popcount(s);
        if (2 * size > static_cast<int>(n)) continue;
        const auto r = Rational::of(boundary(adj, s), size);
        if (!best || r < *best) best = r;
    }
    return *best;
}

}  // namespace detail

/// iso(G) = min |N(S) \ S| / |S|.
template <GraphLike G>
Rational vertex_iso(const G& g) {
    return detail::min_ratio_over_small_sets(g, "vertex_iso", [](const auto& adj, std::uint64_t s) {
        std::uint64_t nb = 0;
        for (std::uint64_t f = s; f != 0; f &= f - 1) nb |= adj[std::countr_zero(f)];
        return static_cast<std::int64_t>(std::popcount(nb & ~s));
    });
}

/// phi(G) = min |edges(S, V \ S)| / |S|.
template <GraphLike G>
Rational edge_iso(const G& g) {
    return detail::min_ratio_over_small_sets(g, "edge_iso", [](const auto& adj, std::uint64_t s) {
        std::int64_t cut = 0;
        for (std::uint64_t f = s; f != 0; f &= f - 1) cut += std::popcount(adj[std::countr_zero(f)] & ~s);
        return cut;
    });
}

// ---------------------------------------------------------------------------
// Unit separators.

struct UnitSeparator {
    Index vertex = 0;
    Index side_a = 0;  // part containing the lowest remaining vertex
    Index side_b = 0;
};

namespace detail {

inline void require_alpha(double alpha) { require(alpha > 0.5 && alpha < 1.0, "alpha must lie in (1/2, 1)"); }

/// Component sizes of g - k, listed with the component of the smallest vertex first.
template <GraphLike G>
std::vector<Index> component_sizes_without(const G& g, Index k) {
    const Index n = g.vertex_count();
    std::vector<bool> seen(n + 1, false);
    seen[k] = true;
    std::vector<Index> sizes;
    std::vector<Index> stack;
    for (Index s = 1; s <= n; ++s) {
        if (seen[s]) continue;
        Index count = 0;
        seen[s] = true;
        stack.push_back(s);
        while (!stack.empty()) {
            const Index u = stack.back();
            stack.pop_back();
            ++count;
            for (Index w : g.neighbors(u))
                if (!seen[w]) {
                    seen[w] = true;
                    stack.push_back(w);
                }
        }
        sizes.push_back(count);
    }
    return sizes;
}

}  // namespace detail

/// Whether removing k leaves components that can be grouped into two sides of
/// at most alpha * n vertices each. Returns the side sizes when it does.
template <GraphLike G>
std::optional<UnitSeparator> separator_at(const G& g, Index k, double alpha) {
    detail::require_alpha(alpha);
    const Index n = g.vertex_count();
    detail::require(k >= 1 && k <= n, "separator vertex out of range");
    const auto sizes = detail::component_sizes_without(g, k);
    const double cap = alpha * static_cast<double>(n);
    const Index rest = n - 1;
    // subset sums over components other than the first; side A holds the first
    std::vector<bool> reachable(rest + 1, false);
    reachable[0] = true;
    for (std::size_t c = 1; c < sizes.size(); ++c)
        for (Index s = rest; s + 1 > sizes[c]; --s)
            if (reachable[s - sizes[c]]) reachable[s] = true;
    const Index first = sizes.empty() ? 0 : sizes[0];
    for (Index extra = 0; extra + first <= rest; ++extra) {
        if (!reachable[extra]) continue;
        const Index a = first + extra;
        const Index b = rest - a;
        if (a <= cap && b <= cap) return UnitSeparator{k, a, b};
    }
    return std::nullopt;
}

/// Smallest vertex k forming a (1, alpha)-separator, if any.
template <GraphLike G>
std::optional<UnitSeparator> unit_separator(const G& g, double alpha) {
    detail::require_alpha(alpha);
    const Index n = g.vertex_count();
    for (Index k = 1; k <= n; ++k) {
        if (auto s = separator_at(g, k, alpha)) return s;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

/// 2 * C(n-1, k): the number of vertex subsets S of the path P_n with exactly
/// k boundary edges is at most this.
inline std::uint64_t boundary_subset_count(Index n, Index k) {
    detail::require(n >= 2 && k >= 1 && k <= n - 1, "boundary_subset_count: need 1 <= k <= n-1");
    std::uint64_t c = 1;
    const Index m = n - 1;
    const Index r = std::min(k, m - k);
    for (Index i = 1; i <= r; ++i) c = c * (m - r + i) / i;
    return 2 * c;
}

// ---------------------------------------------------------------------------

struct WidthReport {
    Index n = 0;
    std::size_t edges = 0;

    std::optional<int> treewidth_exact;
    std::optional<WidthInterval> treewidth_interval;
    std::optional<int> cutwidth_exact;
    int cutwidth_identity = 0;
    std::optional<Rational> vertex_iso;
    std::optional<Rational> edge_iso;

    std::string treewidth_method;  // "exact-dp" or "degeneracy-lower/minfill-upper"
    std::string cutwidth_exact_method;
    std::string cutwidth_identity_method = "identity-layout";
    std::string iso_method;
};

struct WidthOptions {
    bool treewidth = true;
    bool cutwidth = true;
    bool iso = true;
    /// When false, exact metrics past the cap are skipped or bounded instead of refused.
    bool refuse_past_cap = false;
};

template <GraphLike G>
WidthReport compute_width_report(const G& g, const WidthOptions& opt = {}) {
    WidthReport r;
    r.n = g.vertex_count();
    r.edges = g.edges().size();
    const bool small = r.n <= kExactWidthCap;
    if (!small && opt.refuse_past_cap && (opt.treewidth || opt.cutwidth || opt.iso)) {
        detail::require_exact_size(g, "width report");
    }
    if (opt.treewidth) {
        if (small) {
            r.treewidth_exact = treewidth_exact(g);
            r.treewidth_method = "exact-dp";
        } else {
            r.treewidth_interval = treewidth_bounds(g);
            r.treewidth_method = "degeneracy-lower/minfill-upper";
        }
    }
    if (opt.cutwidth && small) {
        r.cutwidth_exact = cutwidth_exact(g);
        r.cutwidth_exact_method = "exact-dp";
    }
    r.cutwidth_identity = cutwidth_identity(g).width;
    if (opt.iso && small && r.n >= 2) {
        r.vertex_iso = vertex_iso(g);
        r.edge_iso = edge_iso(g);
        r.iso_method = "exact-dp";
    }
    return r;
}

}  // namespace tangled
