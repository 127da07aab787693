#pragma once

// Altruist sizing and placement: the random-deployment density law, Poisson
// deployment, greedy set-cover placement on a given topology, and grid cover.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "dish/random.hpp"
#include "dish/topology.hpp"

namespace dish {

/// Lens area at d = r, in units of r^2: 2*pi/3 - sqrt(3)/2.
inline constexpr double kMinLensFactor = 2.0 * std::numbers::pi / 3.0 - std::numbers::sqrt3 / 2.0;

/// Default operating point: 80% coverage, about 1.31 altruists per r^2.
inline constexpr double kDefaultCoverageTarget = 0.80;
inline constexpr double kDefaultAltruistDensity = 1.31;

struct DensitySpec {
    double rho_alt = 0.0;   ///< altruists per m^2
    double rho_peer = 0.0;  ///< peers per m^2
    double p_cov_target = 0.0;
};

/// Minimum altruist density (per unit area) such that every UP, including the
/// worst case d = r, is covered with probability at least p_cov.
inline double min_altruist_density(double p_cov, double r)
{
    if (!(p_cov >= 0.0 && p_cov < 1.0))
        throw std::domain_error("coverage target must lie in [0, 1); full coverage needs infinite density");
    if (!(r > 0.0))
        throw std::domain_error("range must be positive");
    return -std::log1p(-p_cov) / (kMinLensFactor * r * r);
}

struct LensArea {
    double d = 0.0;
    double r = 0.0;
    double area = 0.0;
};

/// Intersection area of two radius-r disks whose centers are d apart.
inline LensArea lens_area(double d, double r)
{
    if (!(r > 0.0) || !(d >= 0.0))
        throw std::domain_error("lens area needs d >= 0 and r > 0");
    if (d > 2.0 * r)
        throw std::domain_error("disks do not intersect (d > 2r)");
    const double theta = std::acos(d / (2.0 * r));
    return {d, r, 2.0 * r * r * theta - r * r * std::sin(2.0 * theta)};
}

/// Probability that a Poisson field of altruists places at least one inside
/// the common range of a pair at distance d.
inline double pair_coverage_probability(double rho_alt, double d, double r)
{
    if (!(rho_alt >= 0.0))
        throw std::domain_error("density must be non-negative");
    if (d > r)
        throw std::domain_error("pair distance exceeds the transmission range");
    if (std::isinf(rho_alt))
        return 1.0;
    return -std::expm1(-rho_alt * lens_area(d, r).area);
}

/// Homogeneous Poisson point process of intensity rho over a rectangle.
inline std::vector<Point> poisson_deploy(const Rect& area, double rho, Rng& rng)
{
    if (!(rho >= 0.0) || !(area.w >= 0.0) || !(area.h >= 0.0))
        throw std::domain_error("poisson_deploy needs non-negative density and area");
    const std::uint64_t n = rng.poisson(rho * area.area());
    std::vector<Point> pts;
    pts.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) {
        const double x = rng.uniform(area.x0, area.x0 + area.w);
        const double y = rng.uniform(area.y0, area.y0 + area.h);
        pts.push_back({x, y});
    }
    return pts;
}

inline std::vector<Point> poisson_deploy(const Rect& area, double rho, std::uint64_t seed)
{
    Rng rng(seed);
    return poisson_deploy(area, rho, rng);
}

/// Minimum number of radius-r disks covering a w x h rectangle with a square grid.
inline std::size_t grid_cover_count(double w, double h, double r)
{
    if (!(w > 0.0) || !(h > 0.0) || !(r > 0.0))
        throw std::domain_error("grid cover needs positive dimensions");
    const double cell = std::sqrt(2.0) * r;
    // Tolerance so that w = sqrt(2) r lands in exactly one cell.
    auto cells = [&](double len) { return static_cast<std::size_t>(std::ceil(len / cell - 1e-9)); };
    return std::max<std::size_t>(1, cells(w)) * std::max<std::size_t>(1, cells(h));
}

// --- Greedy set cover -------------------------------------------------------

struct SetCoverResult {
    std::vector<std::size_t> chosen;  ///< set indices in pick order
    std::vector<bool> covered;        ///< per universe element
};

/// Classic greedy: repeatedly take the set covering most uncovered elements,
/// lowest index on ties, until nothing more can be covered.
template <typename SetList>
SetCoverResult greedy_set_cover(std::size_t universe, const SetList& sets)
{
    SetCoverResult res;
    res.covered.assign(universe, false);
    std::vector<bool> used(std::size(sets), false);
    std::size_t remaining = universe;
    while (remaining > 0) {
        std::size_t best = 0;
        std::size_t best_gain = 0;
        for (std::size_t s = 0; s < std::size(sets); ++s) {
            if (used[s])
                continue;
            std::size_t gain = 0;
            for (std::size_t e : sets[s])
                if (!res.covered.at(e))
                    ++gain;
            if (gain > best_gain) {
                best_gain = gain;
                best = s;
            }
        }
        if (best_gain == 0)
            break;
        used[best] = true;
        res.chosen.push_back(best);
        for (std::size_t e : sets[best])
            if (!res.covered[e]) {
                res.covered[e] = true;
                --remaining;
            }
    }
    return res;
}

// --- Placement plans --------------------------------------------------------

enum class PlacementMethod : std::uint8_t { Random, GreedySetCover, Grid };

inline constexpr std::string_view to_string(PlacementMethod m)
{
    switch (m) {
    case PlacementMethod::Random: return "random";
    case PlacementMethod::GreedySetCover: return "greedy";
    case PlacementMethod::Grid: return "grid";
    }
    return "?";
}

struct PlacementPlan {
    std::vector<Point> altruists;
    std::vector<UnsafePair> covered_ups;
    std::vector<UnsafePair> uncovered_ups;
    PlacementMethod method = PlacementMethod::GreedySetCover;
    std::optional<double> target_pcov;

    std::size_t n_up() const { return covered_ups.size() + uncovered_ups.size(); }
    Coverage coverage() const { return {n_up(), covered_ups.size()}; }
};

/// Split the UPs of `peers` by whether the given altruist sites cover them.
inline void classify_ups(const NetworkTopology& peers, MccMode mode, PlacementPlan& plan)
{
    plan.covered_ups.clear();
    plan.uncovered_ups.clear();
    const double r = peers.tx_range();
    for (const auto& up : enumerate_ups(peers, mode)) {
        const Point a = peers.node(up.i).pos;
        const Point b = peers.node(up.j).pos;
        const bool hit = std::any_of(plan.altruists.begin(), plan.altruists.end(),
                                     [&](Point s) { return covers(s, a, b, r); });
        (hit ? plan.covered_ups : plan.uncovered_ups).push_back(up);
    }
}

enum class CandidateStrategy : std::uint8_t {
    /// Peer positions, UP midpoints, and pairwise intersections of the range
    /// circles around UP endpoints.
    Arrangement,
    /// Peer positions only.
    PeerPositions,
};

/// Finite candidate set for altruist sites, sorted by (x, y) and deduplicated.
/// Circle intersections use a radius shrunk by a relative 1e-9 so each point
/// lies strictly inside both disks it came from.
inline std::vector<Point> candidate_sites(const NetworkTopology& peers, std::span<const UnsafePair> ups,
                                          CandidateStrategy strategy = CandidateStrategy::Arrangement)
{
    std::vector<Point> sites;
    for (const auto& n : peers.nodes())
        if (n.kind == NodeKind::Peer)
            sites.push_back(n.pos);

    if (strategy == CandidateStrategy::Arrangement) {
        std::vector<NodeId> endpoints;
        for (const auto& up : ups) {
            const Point a = peers.node(up.i).pos;
            const Point b = peers.node(up.j).pos;
            sites.push_back({(a.x + b.x) / 2, (a.y + b.y) / 2});
            endpoints.push_back(up.i);
            endpoints.push_back(up.j);
        }
        std::sort(endpoints.begin(), endpoints.end());
        endpoints.erase(std::unique(endpoints.begin(), endpoints.end()), endpoints.end());

        const double rr = peers.tx_range() * (1.0 - 1e-9);
        for (std::size_t p = 0; p < endpoints.size(); ++p)
            for (std::size_t q = p + 1; q < endpoints.size(); ++q) {
                const Point a = peers.node(endpoints[p]).pos;
                const Point b = peers.node(endpoints[q]).pos;
                const double d = distance(a, b);
                if (d == 0.0 || d > 2.0 * rr)
                    continue;
                const double half = d / 2;
                const double hgt = std::sqrt(std::max(0.0, rr * rr - half * half));
                const double ux = (b.x - a.x) / d;
                const double uy = (b.y - a.y) / d;
                const Point m{a.x + ux * half, a.y + uy * half};
                sites.push_back({m.x - uy * hgt, m.y + ux * hgt});
                sites.push_back({m.x + uy * hgt, m.y - ux * hgt});
            }
    }

    std::sort(sites.begin(), sites.end(), [](Point a, Point b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
    auto same = [](Point a, Point b) { return std::abs(a.x - b.x) <= 1e-9 && std::abs(a.y - b.y) <= 1e-9; };
    sites.erase(std::unique(sites.begin(), sites.end(), same), sites.end());
    return sites;
}

/// For each candidate site, the indices (into `ups`) of the UPs it covers.
inline std::vector<std::vector<std::size_t>> coverage_sets(const NetworkTopology& peers,
                                                           std::span<const UnsafePair> ups,
                                                           std::span<const Point> sites)
{
    std::vector<std::vector<std::size_t>> sets(sites.size());
    const double r = peers.tx_range();
    for (std::size_t u = 0; u < ups.size(); ++u) {
        const Point a = peers.node(ups[u].i).pos;
        const Point b = peers.node(ups[u].j).pos;
        for (std::size_t s = 0; s < sites.size(); ++s)
            if (covers(sites[s], a, b, r))
                sets[s].push_back(u);
    }
    return sets;
}

/// Greedy set-cover altruist placement for a fixed peer topology. Altruists
/// already present in `topology` are ignored; the plan is self-contained.
inline PlacementPlan greedy_set_cover_deploy(const NetworkTopology& topology, MccMode mode,
                                             CandidateStrategy strategy = CandidateStrategy::Arrangement)
{
    const NetworkTopology peers = topology.peers_only();
    const auto ups = enumerate_ups(peers, mode);
    const auto sites = candidate_sites(peers, ups, strategy);
    const auto sets = coverage_sets(peers, ups, sites);
    const auto res = greedy_set_cover(ups.size(), sets);

    PlacementPlan plan;
    plan.method = PlacementMethod::GreedySetCover;
    plan.target_pcov = 1.0;
    for (std::size_t s : res.chosen)
        plan.altruists.push_back(sites[s]);
    for (std::size_t u = 0; u < ups.size(); ++u)
        (res.covered[u] ? plan.covered_ups : plan.uncovered_ups).push_back(ups[u]);
    return plan;
}

/// Square-grid placement that covers every point of `area`. Covering the area
/// does not imply covering every UP; the plan reports the difference.
inline PlacementPlan grid_deploy(const NetworkTopology& topology, const Rect& area, MccMode mode)
{
    const double r = topology.tx_range();
    const double cell = std::sqrt(2.0) * r;
    const auto nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(area.w / cell - 1e-9)));
    const auto ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(area.h / cell - 1e-9)));
    const double cw = area.w / static_cast<double>(nx);
    const double ch = area.h / static_cast<double>(ny);

    PlacementPlan plan;
    plan.method = PlacementMethod::Grid;
    for (std::size_t ix = 0; ix < nx; ++ix)
        for (std::size_t iy = 0; iy < ny; ++iy)
            plan.altruists.push_back({area.x0 + (static_cast<double>(ix) + 0.5) * cw,
                                      area.y0 + (static_cast<double>(iy) + 0.5) * ch});
    classify_ups(topology.peers_only(), mode, plan);
    return plan;
}

/// Poisson deployment sized for a coverage target.
inline PlacementPlan random_deploy(const NetworkTopology& topology, const Rect& area, double p_cov_target,
                                   std::uint64_t seed, MccMode mode)
{
    PlacementPlan plan;
    plan.method = PlacementMethod::Random;
    plan.target_pcov = p_cov_target;
    plan.altruists = poisson_deploy(area, min_altruist_density(p_cov_target, topology.tx_range()), seed);
    classify_ups(topology.peers_only(), mode, plan);
    return plan;
}

} // namespace dish
