#pragma once

// Parameter sweeps with replications. Every (point, replication) runs with
// seed mix_seed(master, point, replication), so any row can be replayed alone.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "dish/engine.hpp"
#include "dish/io.hpp"
#include "dish/metrics.hpp"
#include "dish/random.hpp"

namespace dish {

/// Sweep axes. An unset axis keeps the base value; an axis set to an empty
/// list yields no points.
struct SweepAxes {
    std::optional<std::vector<ProtocolVariant>> variants;
    std::optional<std::vector<std::size_t>> peers;
    std::optional<std::vector<double>> alt_density;
    std::optional<std::vector<int>> altruists;
    std::optional<std::vector<double>> rates;
};

struct Campaign {
    ScenarioConfig base;
    SweepAxes axes;
    std::uint32_t replications = 5;
    std::uint64_t master_seed = 1;
    unsigned workers = 0;  ///< 0: hardware concurrency
};

inline std::uint64_t derived_seed(std::uint64_t master, std::size_t point, std::size_t replication)
{
    return mix_seed(master, point, replication);
}

/// Cross product in the order variant, peers, alt_density, altruists, rate
/// (last axis varies fastest).
inline std::vector<ScenarioConfig> expand_points(const Campaign& c)
{
    auto values = [](const auto& axis, auto base) {
        using T = std::decay_t<decltype(base)>;
        return axis ? std::vector<T>(axis->begin(), axis->end()) : std::vector<T>{base};
    };
    const auto vs = values(c.axes.variants, c.base.variant);
    const auto ps = values(c.axes.peers, c.base.n_peers);
    const auto ds = values(c.axes.alt_density, c.base.alt_density);
    const auto as = values(c.axes.altruists, c.base.n_altruists);
    const auto rs = values(c.axes.rates, c.base.rate_bps);
    std::vector<ScenarioConfig> out;
    for (auto v : vs)
        for (auto p : ps)
            for (auto d : ds)
                for (auto a : as)
                    for (auto r : rs) {
                        ScenarioConfig s = c.base;
                        s.variant = v;
                        s.n_peers = p;
                        s.alt_density = d;
                        s.n_altruists = a;
                        s.rate_bps = r;
                        out.push_back(s);
                    }
    return out;
}

struct PointSummary {
    std::size_t index = 0;
    ScenarioConfig config;
    std::vector<std::uint64_t> seeds;
    std::vector<RunResult> runs;  ///< completed replications, in replication order
    std::vector<std::string> errors;

    bool complete() const { return errors.empty(); }

    std::vector<double> column(double (*get)(const RunResult&)) const
    {
        std::vector<double> v;
        for (const auto& r : runs)
            v.push_back(get(r));
        return v;
    }
};

inline double throughput_of(const RunResult& r) { return r.throughput_bps; }
inline double power_of(const RunResult& r) { return r.power_W_aggregate; }
inline double bmp_of(const RunResult& r) { return run_bmp(r); }

/// Run every replication of every point on up to `workers` threads. A failed
/// replication is recorded on its point; the campaign carries on.
inline std::vector<PointSummary> run_campaign(const Campaign& c)
{
    const auto points = expand_points(c);
    const std::size_t reps = c.replications;
    std::vector<std::optional<RunResult>> results(points.size() * reps);
    std::vector<std::string> errors(points.size() * reps);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t job; (job = next.fetch_add(1)) < results.size();) {
            const std::size_t p = job / reps;
            const std::size_t k = job % reps;
            try {
                results[job] = run(points[p], derived_seed(c.master_seed, p, k));
            } catch (const std::exception& e) {
                errors[job] = e.what();
            }
        }
    };
    const unsigned want = c.workers > 0 ? c.workers : std::max(1u, std::thread::hardware_concurrency());
    const unsigned n = std::max(1u, std::min<unsigned>(want, static_cast<unsigned>(results.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < n; ++w)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    std::vector<PointSummary> out;
    for (std::size_t p = 0; p < points.size(); ++p) {
        PointSummary s;
        s.index = p;
        s.config = points[p];
        for (std::size_t k = 0; k < reps; ++k) {
            s.seeds.push_back(derived_seed(c.master_seed, p, k));
            auto& r = results[p * reps + k];
            if (r)
                s.runs.push_back(std::move(*r));
            else
                s.errors.push_back("replication " + std::to_string(k) + ": " + errors[p * reps + k]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

// --- Campaign files -------------------------------------------------------------

/// Scenario keys plus `master_seed`, `workers` and `sweep.<axis> = a, b, ...`
/// for axis in variant, peers, alt_density, altruists, rate.
inline Campaign parse_campaign(std::istream& in)
{
    Campaign c;
    for (const auto& kv : read_key_values(in)) {
        const auto items = split_list(kv.value);
        if (kv.key == "master_seed") {
            c.master_seed = parse_number<std::uint64_t>(kv.value, kv.key);
        } else if (kv.key == "workers") {
            c.workers = parse_number<unsigned>(kv.value, kv.key);
        } else if (kv.key == "sweep.variant") {
            c.axes.variants.emplace();
            for (const auto& s : items)
                c.axes.variants->push_back(parse_variant(s));
        } else if (kv.key == "sweep.peers") {
            c.axes.peers.emplace();
            for (const auto& s : items)
                c.axes.peers->push_back(parse_number<std::size_t>(s, kv.key));
        } else if (kv.key == "sweep.alt_density") {
            c.axes.alt_density.emplace();
            for (const auto& s : items)
                c.axes.alt_density->push_back(parse_number<double>(s, kv.key));
        } else if (kv.key == "sweep.altruists") {
            c.axes.altruists.emplace();
            for (const auto& s : items)
                c.axes.altruists->push_back(parse_number<int>(s, kv.key));
        } else if (kv.key == "sweep.rate") {
            c.axes.rates.emplace();
            for (const auto& s : items)
                c.axes.rates->push_back(parse_number<double>(s, kv.key));
        } else if (apply_config_entry(c.base, kv.key, kv.value)) {
            if (kv.key == "seed")
                c.master_seed = c.base.seed;
        } else {
            throw FormatError("line " + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
        }
    }
    c.replications = c.base.replications;
    return c;
}

inline constexpr std::string_view kSummaryCsvHeader =
    "point,variant,mode,n_peers,alt_density,altruists,rate_bps,saturated,replications,completed,"
    "throughput_mean,throughput_sd,power_mean,power_sd,bmp_mean,bmp_sd,master_seed";

inline void write_summary(std::ostream& o, const Campaign& c, const std::vector<PointSummary>& points)
{
    o << kSummaryCsvHeader << '\n';
    for (const auto& p : points) {
        const auto thr = p.column(throughput_of);
        const auto pw = p.column(power_of);
        const auto bm = p.column(bmp_of);
        const auto& s = p.config;
        o << p.index << ',' << to_string(s.variant) << ',' << to_string(s.mode) << ',' << s.peers() << ','
          << format_double(s.alt_density) << ',' << s.n_altruists << ',' << format_double(s.rate_bps) << ','
          << (s.saturated ? "true" : "false") << ',' << p.seeds.size() << ',' << p.runs.size() << ','
          << format_double(mean(thr)) << ',' << format_double(stddev(thr)) << ',' << format_double(mean(pw)) << ','
          << format_double(stddev(pw)) << ',' << format_double(mean(bm)) << ',' << format_double(stddev(bm)) << ','
          << c.master_seed << '\n';
    }
}

/// One row per completed replication, keyed by point so it can be replayed.
inline void write_replications(std::ostream& o, const std::vector<PointSummary>& points)
{
    o << "point," << kRunCsvHeader << '\n';
    for (const auto& p : points)
        for (const auto& r : p.runs) {
            o << p.index << ',';
            write_run_row(o, r);
        }
}

} // namespace dish
