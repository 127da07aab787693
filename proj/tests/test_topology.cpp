#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dish/topology.hpp"

using namespace dish;

namespace {

NetworkTopology peers_at(std::vector<Point> pts, double r = 1.0)
{
    std::vector<NodeRecord> nodes;
    for (std::size_t k = 0; k < pts.size(); ++k)
        nodes.push_back({static_cast<NodeId>(k), pts[k], NodeKind::Peer});
    return build_adjacency(nodes, r);
}

AdjacencyGraph graph(std::size_t n, std::initializer_list<std::pair<std::size_t, std::size_t>> edges)
{
    AdjacencyGraph g(n);
    for (auto [a, b] : edges)
        g.add_edge(a, b);
    return g;
}

// Chain x - u - v - w - y with spacing 200 m, r = 250 m, one altruist above
// the midpoint of u and v.
NetworkTopology chain_with_altruist()
{
    std::vector<NodeRecord> nodes{
        {0, {0, 0}, NodeKind::Peer},     {1, {200, 0}, NodeKind::Peer}, {2, {400, 0}, NodeKind::Peer},
        {3, {600, 0}, NodeKind::Peer},   {4, {800, 0}, NodeKind::Peer}, {5, {300, 50}, NodeKind::Altruist},
    };
    return build_adjacency(nodes, 250.0, 500.0);
}

} // namespace

TEST(Adjacency, ClosedDiskBoundary)
{
    auto t = peers_at({{0, 0}, {1, 0}, {3.02, 0}});
    EXPECT_TRUE(t.adjacent(0, 1));
    EXPECT_FALSE(t.adjacent(1, 2));  // 2.02 > 1
    auto u = peers_at({{0, 0}, {1.01, 0}});
    EXPECT_FALSE(u.adjacent(0, 1));
}

TEST(Adjacency, CollinearChainIsPath)
{
    auto t = peers_at({{0, 0}, {1, 0}, {2, 0}});
    EXPECT_TRUE(t.adjacent(0, 1));
    EXPECT_TRUE(t.adjacent(1, 2));
    EXPECT_FALSE(t.adjacent(0, 2));
    EXPECT_EQ(t.degree(1), 2u);
}

TEST(Adjacency, SymmetricAndIrreflexive)
{
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0, 3);
    std::vector<Point> pts;
    for (int k = 0; k < 40; ++k)
        pts.push_back({u(gen), u(gen)});
    auto t = peers_at(pts);
    for (NodeId a = 0; a < 40; ++a) {
        EXPECT_FALSE(t.adjacent(a, a));
        for (NodeId b = 0; b < 40; ++b)
            EXPECT_EQ(t.adjacent(a, b), t.adjacent(b, a));
    }
}

TEST(Adjacency, CoincidentNodesAllowed)
{
    auto t = peers_at({{1, 1}, {1, 1}});
    EXPECT_TRUE(t.adjacent(0, 1));
}

TEST(Adjacency, RejectsBadInput)
{
    std::vector<NodeRecord> dup{{0, {0, 0}, NodeKind::Peer}, {0, {1, 0}, NodeKind::Peer}};
    EXPECT_THROW(build_adjacency(dup, 1.0), std::invalid_argument);
    std::vector<NodeRecord> nan{{0, {std::nan(""), 0}, NodeKind::Peer}};
    EXPECT_THROW(build_adjacency(nan, 1.0), std::invalid_argument);
    EXPECT_THROW(build_adjacency({}, 0.0), std::invalid_argument);
    EXPECT_THROW(NetworkTopology({}, 2.0, 1.0), std::invalid_argument);
}

TEST(Adjacency, AltruistsStayOutOfPeerGraph)
{
    auto t = chain_with_altruist();
    EXPECT_EQ(t.peer_count(), 5u);
    EXPECT_EQ(t.altruist_count(), 1u);
    EXPECT_EQ(t.peer_graph().vertex_count(), 5u);
    EXPECT_THROW(t.vertex_of(5), std::invalid_argument);
}

TEST(UnsafePairs, PathEndpointNotUnsafeWithoutPsm)
{
    auto g = graph(3, {{0, 1}, {1, 2}});
    EXPECT_FALSE(is_unsafe_pair(g, 0, 1, MccMode::NoPsm));
    EXPECT_TRUE(is_unsafe_pair(g, 0, 1, MccMode::PsmDeafTerminal));
}

TEST(UnsafePairs, TriangleHasNone)
{
    auto g = graph(3, {{0, 1}, {1, 2}, {0, 2}});
    EXPECT_TRUE(enumerate_ups(g, MccMode::NoPsm).empty());
}

TEST(UnsafePairs, FourCycleAllEdges)
{
    auto g = graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
    EXPECT_EQ(enumerate_ups(g, MccMode::NoPsm).size(), 4u);
}

TEST(UnsafePairs, SingleEdgeHasNone)
{
    auto g = graph(2, {{0, 1}});
    EXPECT_TRUE(enumerate_ups(g, MccMode::NoPsm).empty());
    EXPECT_TRUE(enumerate_ups(g, MccMode::PsmDeafTerminal).empty());
}

TEST(UnsafePairs, NonAdjacentThrows)
{
    auto g = graph(3, {{0, 1}});
    EXPECT_THROW(is_unsafe_pair(g, 0, 2, MccMode::NoPsm), std::invalid_argument);
}

TEST(UnsafePairs, ChainFigureHasTwoCentralPairs)
{
    auto t = chain_with_altruist();
    const auto ups = enumerate_ups(t, MccMode::NoPsm);
    ASSERT_EQ(ups.size(), 2u);
    EXPECT_EQ(ups[0], (UnsafePair{1, 2}));
    EXPECT_EQ(ups[1], (UnsafePair{2, 3}));
}

TEST(UnsafePairs, SymmetricInArguments)
{
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + gen() % 9;
        AdjacencyGraph g(n);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (gen() % 3 == 0)
                    g.add_edge(a, b);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b : g.neighbors(a))
                for (auto m : {MccMode::NoPsm, MccMode::PsmDeafTerminal})
                    EXPECT_EQ(is_unsafe_pair(g, a, b, m), is_unsafe_pair(g, b, a, m));
    }
}

TEST(UnsafePairs, TriangleExemptionInLargerGraphs)
{
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 3 + gen() % 8;
        AdjacencyGraph g(n);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (gen() % 4 == 0)
                    g.add_edge(a, b);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b : g.neighbors(a)) {
                if (g.degree(a) != 2 || g.degree(b) != 2)
                    continue;
                bool tri = false;
                for (std::size_t w = 0; w < n; ++w)
                    tri = tri || (g.has_edge(a, w) && g.has_edge(b, w));
                if (tri) {
                    EXPECT_FALSE(is_unsafe_pair(g, a, b, MccMode::NoPsm));
                }
            }
    }
}

TEST(UnsafePairs, PsmConditionContainsNoPsmUps)
{
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + gen() % 9;
        AdjacencyGraph g(n);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (gen() % 3 == 0)
                    g.add_edge(a, b);
        const auto strict = enumerate_ups(g, MccMode::NoPsm);
        const auto psm = enumerate_ups(g, MccMode::PsmDeafTerminal);
        const std::set<std::pair<std::size_t, std::size_t>> psm_set(psm.begin(), psm.end());
        for (const auto& p : strict)
            EXPECT_TRUE(psm_set.contains(p));
    }
}

TEST(Coverage, ChainFigureHalfCovered)
{
    auto t = chain_with_altruist();
    EXPECT_TRUE(covered({1, 2}, t));
    EXPECT_FALSE(covered({2, 3}, t));
    const auto c = cooperation_coverage(t, MccMode::NoPsm);
    EXPECT_EQ(c.n_up, 2u);
    EXPECT_EQ(c.n_cup, 1u);
    EXPECT_DOUBLE_EQ(c.fraction(), 0.5);
    EXPECT_FALSE(c.vacuous());
}

TEST(Coverage, NoAltruistsNothingCovered)
{
    auto t = peers_at({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const auto c = cooperation_coverage(t, MccMode::NoPsm);
    EXPECT_EQ(c.n_up, 4u);
    EXPECT_DOUBLE_EQ(c.fraction(), 0.0);
}

TEST(Coverage, MidpointAltruistCovers)
{
    auto t = peers_at({{0, 0}, {0.9, 0}, {0.9, 0.9}, {0, 0.9}}).with_altruists(std::vector<Point>{{0.45, 0}});
    EXPECT_TRUE(covered({0, 1}, t));
}

TEST(Coverage, FullWhenEveryPairCovered)
{
    auto t = peers_at({{0, 0}, {1, 0}, {1, 1}, {0, 1}}).with_altruists(std::vector<Point>{{0.5, 0.5}});
    EXPECT_DOUBLE_EQ(cooperation_coverage(t, MccMode::NoPsm).fraction(), 1.0);
}

TEST(Coverage, VacuousWithoutUps)
{
    auto t = peers_at({{0, 0}, {0.5, 0}});
    const auto c = cooperation_coverage(t, MccMode::NoPsm);
    EXPECT_TRUE(c.vacuous());
    EXPECT_DOUBLE_EQ(c.fraction(), 1.0);
}

TEST(Coverage, AddingAltruistNeverDecreases)
{
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(0, 4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Point> pts;
        for (int k = 0; k < 12; ++k)
            pts.push_back({u(gen), u(gen)});
        auto t = peers_at(pts);
        std::vector<Point> alts;
        double prev = cooperation_coverage(t, MccMode::NoPsm).fraction();
        if (cooperation_coverage(t, MccMode::NoPsm).vacuous())
            continue;
        for (int k = 0; k < 6; ++k) {
            alts.push_back({u(gen), u(gen)});
            const double now = cooperation_coverage(t.with_altruists(alts), MccMode::NoPsm).fraction();
            EXPECT_GE(now, prev);
            prev = now;
        }
    }
}
