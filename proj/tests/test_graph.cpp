#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "tangled/graph.hpp"

using namespace tangled;

namespace {

Permutation perm(std::vector<Index> v) { return Permutation(std::move(v)); }

Permutation random_perm(Index n, std::mt19937_64& gen) {
    std::vector<Index> v(n);
    std::iota(v.begin(), v.end(), Index{1});
    std::shuffle(v.begin(), v.end(), gen);
    return Permutation(v);
}

/// Connectivity of g minus `removed`, by flood fill.
template <GraphLike G>
bool connected_without(const G& g, Index removed) {
    const Index n = g.vertex_count();
    Index start = removed == 1 ? 2 : 1;
    if (n <= 2) return true;
    std::vector<bool> seen(n + 1, false);
    seen[removed] = true;
    std::vector<Index> stack{start};
    seen[start] = true;
    Index reached = 1;
    while (!stack.empty()) {
        const Index u = stack.back();
        stack.pop_back();
        for (Index w : g.neighbors(u))
            if (!seen[w]) {
                seen[w] = true;
                ++reached;
                stack.push_back(w);
            }
    }
    return reached == n - 1;
}

template <GraphLike G>
std::vector<Index> brute_cut_vertices(const G& g) {
    std::vector<Index> out;
    for (Index v = 1; v <= g.vertex_count(); ++v)
        if (!connected_without(g, v)) out.push_back(v);
    return out;
}

}  // namespace

TEST(BuildTangled, IdentityIsPath) {
    const auto g = build_tangled(Permutation::identity(5));
    EXPECT_EQ(g.edge_count(), 4u);
    std::vector<Edge> want{{1, 2}, {2, 3}, {3, 4}, {4, 5}};
    EXPECT_TRUE(std::equal(g.edges().begin(), g.edges().end(), want.begin(), want.end()));
}

TEST(BuildTangled, WorkedExampleEdges) {
    const auto g = build_tangled(perm({7, 9, 6, 8, 4, 2, 5, 3, 1}));
    std::vector<Edge> want;
    for (Index i = 1; i < 9; ++i) want.push_back({i, i + 1});
    for (auto [a, b] : std::vector<std::pair<Index, Index>>{{7, 9}, {9, 6}, {6, 8}, {8, 4}, {4, 2}, {2, 5}, {5, 3}, {3, 1}})
        want.push_back(Edge::of(a, b));
    std::sort(want.begin(), want.end());
    want.erase(std::unique(want.begin(), want.end()), want.end());
    EXPECT_TRUE(std::equal(g.edges().begin(), g.edges().end(), want.begin(), want.end()));
}

TEST(BuildTangled, ModelInvariants) {
    std::mt19937_64 gen(5);
    for (int rep = 0; rep < 100; ++rep) {
        const Index n = 1 + rep % 50;
        const auto g = build_tangled(random_perm(n, gen));
        ASSERT_LE(g.edge_count(), 2u * (n - 1));
        ASSERT_LE(max_degree(g), 4u);
        ASSERT_TRUE(is_connected(g));
        for (Index i = 1; i < n; ++i) {
            auto nb = g.neighbors(i);
            ASSERT_TRUE(std::binary_search(nb.begin(), nb.end(), i + 1));
        }
        for (const auto& e : g.edges()) ASSERT_LT(e.u, e.v);
        for (Index v = 1; v <= n; ++v) ASSERT_TRUE(std::is_sorted(g.neighbors(v).begin(), g.neighbors(v).end()));
    }
}

TEST(BuildTangled, ReversalInvariance) {
    std::mt19937_64 gen(6);
    for (int rep = 0; rep < 1000; ++rep) {
        const auto p = random_perm(2 + rep % 40, gen);
        const auto a = build_tangled(p), b = build_tangled(reverse(p));
        ASSERT_TRUE(std::equal(a.edges().begin(), a.edges().end(), b.edges().begin(), b.edges().end()));
    }
}

TEST(BuildTangled, DegenerateSizes) {
    EXPECT_EQ(build_tangled(perm({1})).edge_count(), 0u);
    EXPECT_EQ(build_tangled(perm({2, 1})).edge_count(), 1u);
    EXPECT_EQ(diameter(build_tangled(perm({1}))), 0u);
    EXPECT_EQ(diameter(build_tangled(perm({2, 1}))), 1u);
    EXPECT_TRUE(articulation_points(build_tangled(perm({1}))).empty());
}

TEST(BuildTangled, TraceProvenance) {
    const InsertionTrace t({1, 1, 2}, 0.25, 77);
    const auto g = build_tangled(t);
    ASSERT_TRUE(g.provenance().has_value());
    EXPECT_EQ(g.provenance()->trace, t.positions);
    EXPECT_EQ(g.provenance()->q, 0.25);
    EXPECT_EQ(g.provenance()->seed, std::optional<std::uint64_t>(77));
}

TEST(ArticulationPoints, Examples) {
    EXPECT_EQ(articulation_points(make_path(5)), (std::vector<Index>{2, 3, 4}));
    EXPECT_TRUE(articulation_points(make_cycle(5)).empty());
    const auto g = build_tangled(mallows_process(std::vector<Index>{1, 1, 3, 2, 1, 1, 1, 3, 2}));
    const auto cuts = articulation_points(g);
    EXPECT_NE(std::find(cuts.begin(), cuts.end(), 5u), cuts.end());
    EXPECT_EQ(articulation_points(make_star(4)), std::vector<Index>{1});
    EXPECT_THROW(articulation_points(SimpleGraph(3, {{1, 2}})), domain_error);
}

TEST(ArticulationPoints, AllTangledGraphsUpToEight) {
    for (Index n = 1; n <= 8; ++n) {
        std::vector<Index> v(n);
        std::iota(v.begin(), v.end(), Index{1});
        do {
            const auto g = build_tangled(Permutation(v));
            const auto cuts = articulation_points(g);
            ASSERT_EQ(cuts, brute_cut_vertices(g));
            if (n >= 2) {
                ASSERT_TRUE(std::find(cuts.begin(), cuts.end(), 1u) == cuts.end());
                ASSERT_TRUE(std::find(cuts.begin(), cuts.end(), n) == cuts.end());
            }
        } while (std::next_permutation(v.begin(), v.end()));
    }
}

TEST(ArticulationPoints, RandomGeneralGraphs) {
    std::mt19937_64 gen(7);
    int checked = 0;
    while (checked < 500) {
        const Index n = 2 + static_cast<Index>(gen() % 7);
        std::vector<Edge> e;
        for (Index a = 1; a <= n; ++a)
            for (Index b = a + 1; b <= n; ++b)
                if (gen() % 3 == 0) e.push_back({a, b});
        const SimpleGraph g(n, e);
        if (!is_connected(g)) continue;
        ++checked;
        ASSERT_EQ(articulation_points(g), brute_cut_vertices(g));
    }
}

TEST(Distances, Examples) {
    EXPECT_EQ(diameter(make_path(10)), 9u);
    EXPECT_EQ(diameter(make_cycle(6)), 3u);
    EXPECT_EQ(diameter(make_complete(5)), 1u);
    EXPECT_EQ(diameter(make_grid(3, 4)), 5u);
    const auto d = bfs_distances(make_path(4), 2);
    EXPECT_EQ(d[1], 1u);
    EXPECT_EQ(d[4], 2u);
    EXPECT_THROW(diameter(SimpleGraph(3, {{1, 2}})), domain_error);
    EXPECT_THROW(bfs_distances(make_path(3), 4), domain_error);
    EXPECT_EQ(bfs_distances(SimpleGraph(3, {{1, 2}}), 1)[3], kUnreached);
}

TEST(EdgeList, RoundTrip) {
    const auto g = build_tangled(perm({3, 5, 1, 4, 6, 2}));
    const auto text = format_edge_list(g);
    EXPECT_EQ(text.substr(0, 4), "n=6\n");
    const auto h = parse_edge_list(text);
    EXPECT_EQ(h.vertex_count(), 6u);
    EXPECT_TRUE(std::equal(g.edges().begin(), g.edges().end(), h.edges().begin(), h.edges().end()));
    EXPECT_THROW(parse_edge_list("6\n1 2\n"), domain_error);
    EXPECT_THROW(parse_edge_list("n=2\n1 3\n"), domain_error);
}

TEST(Fixtures, Shapes) {
    EXPECT_EQ(make_complete(6).edge_count(), 15u);
    EXPECT_EQ(make_grid(3, 3).edge_count(), 12u);
    EXPECT_EQ(make_star(4).vertex_count(), 5u);
    const auto s = subdivide_edge(make_cycle(4), {1, 4});
    EXPECT_EQ(s.vertex_count(), 5u);
    EXPECT_EQ(s.edge_count(), 5u);
    EXPECT_THROW(subdivide_edge(make_path(3), {1, 3}), domain_error);
    EXPECT_THROW(SimpleGraph(2, {{1, 1}}), domain_error);
}
