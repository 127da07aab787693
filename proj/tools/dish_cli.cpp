// Command-line front end: single runs, campaigns, altruist planning and
// topology generation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dish/campaign.hpp"
#include "dish/deployment.hpp"
#include "dish/engine.hpp"
#include "dish/io.hpp"

namespace {

using namespace dish;

struct ScenarioFlags {
    std::string config;
    std::string mode;
    std::string variant;
    std::optional<std::size_t> peers;
    std::optional<int> altruists;
    std::optional<double> alt_density;
    std::string area;
    std::optional<std::uint32_t> channels;
    std::optional<double> rate;
    bool saturated = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> reps;
    std::optional<std::uint64_t> stop_after;
    std::optional<double> tx_range;
    std::optional<double> interference;

    void add(CLI::App* app)
    {
        app->add_option("--config", config, "scenario file (key = value)")->check(CLI::ExistingFile);
        app->add_option("--mode", mode, "single-hop | multi-hop");
        app->add_option("--variant", variant, "dish-p | non-dish | non-dish-psm | genie-in-situ | altruistic");
        app->add_option("--peers", peers, "number of peers");
        app->add_option("--altruists", altruists, "altruist count (altruistic variant)");
        app->add_option("--alt-density", alt_density, "altruists per r^2 for random deployment");
        app->add_option("--area", area, "WxH in meters");
        app->add_option("--channels", channels, "number of data channels");
        app->add_option("--rate", rate, "Poisson arrival rate per source, bits/s");
        app->add_flag("--saturated", saturated, "keep every source backlogged");
        app->add_option("--seed", seed, "seed");
        app->add_option("--reps", reps, "replications");
        app->add_option("--stop-after", stop_after, "end-to-end packets to generate");
        app->add_option("--range", tx_range, "transmission range, m");
        app->add_option("--interference", interference, "interference range, m");
    }

    ScenarioConfig build() const
    {
        ScenarioConfig c;
        if (!config.empty()) {
            std::ifstream in(config);
            c = parse_config(in);
        }
        if (!mode.empty())
            c.mode = parse_flow_mode(mode);
        if (!variant.empty())
            c.variant = parse_variant(variant);
        if (peers)
            c.n_peers = *peers;
        if (altruists)
            c.n_altruists = *altruists;
        if (alt_density)
            c.alt_density = *alt_density;
        if (!area.empty())
            std::tie(c.area_w, c.area_h) = parse_area(area);
        if (channels)
            c.channels = *channels;
        if (rate)
            c.rate_bps = *rate;
        if (saturated)
            c.saturated = true;
        if (seed)
            c.seed = *seed;
        if (reps)
            c.replications = *reps;
        if (stop_after)
            c.stop_after = *stop_after;
        if (tx_range)
            c.radio.tx_range = *tx_range;
        if (interference)
            c.radio.interference_range = *interference;
        return c;
    }
};

/// stdout when the path is empty or "-".
class Output {
public:
    explicit Output(const std::string& path)
    {
        if (!path.empty() && path != "-") {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_)
                throw std::runtime_error("cannot write " + path);
        }
    }
    std::ostream& get() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

NetworkTopology load_topology(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    return read_topology(in);
}

int cmd_run(const ScenarioFlags& flags, const std::string& out, const std::string& trace_path)
{
    ScenarioConfig cfg = flags.build();
    cfg.trace = cfg.trace || !trace_path.empty();
    cfg.validate();
    // A lone run uses the seed as given, so a recorded seed replays exactly.
    const bool derive = flags.reps.has_value() && cfg.replications > 1;
    const std::uint32_t reps = derive ? cfg.replications : 1;
    Output o(out);
    o.get() << kRunCsvHeader << '\n';
    for (std::uint32_t k = 0; k < reps; ++k) {
        const std::uint64_t seed = derive ? derived_seed(cfg.seed, 0, k) : cfg.seed;
        const RunResult r = run(cfg, seed);
        write_run_row(o.get(), r);
        if (k == 0 && !trace_path.empty()) {
            Output t(trace_path);
            write_trace(t.get(), r.trace);
        }
        std::fprintf(stderr, "seed %llu: %.1f kbit/s, %.3f W aggregate, %llu delivered in %.3f s\n",
                     static_cast<unsigned long long>(seed), r.throughput_bps / 1e3, r.power_W_aggregate,
                     static_cast<unsigned long long>(r.delivered), r.sim_time_s());
    }
    return 0;
}

int cmd_campaign(const std::string& path, const ScenarioFlags& flags, const std::string& out, unsigned workers)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    Campaign c = parse_campaign(in);
    if (flags.reps)
        c.replications = *flags.reps;
    if (flags.seed)
        c.master_seed = *flags.seed;
    if (flags.stop_after)
        c.base.stop_after = *flags.stop_after;
    if (workers > 0)
        c.workers = workers;
    const auto points = run_campaign(c);
    {
        Output o(out);
        write_summary(o.get(), c, points);
    }
    if (!out.empty() && out != "-") {
        Output runs(out + ".runs.csv");
        write_replications(runs.get(), points);
    }
    for (const auto& p : points)
        for (const auto& e : p.errors)
            std::fprintf(stderr, "point %zu incomplete: %s\n", p.index, e.c_str());
    return 0;
}

int cmd_plan_size(double pcov, double r, const std::string& area)
{
    const double rho = min_altruist_density(pcov, r);
    std::printf("target_pcov %s\n", format_double(pcov).c_str());
    std::printf("density_per_r2 %.4f\n", rho * r * r);
    std::printf("density_per_m2 %s\n", format_double(rho).c_str());
    if (!area.empty()) {
        const auto [w, h] = parse_area(area);
        std::printf("expected_altruists %.1f\n", rho * w * h);
        std::printf("grid_altruists %zu\n", grid_cover_count(w, h, r));
    }
    return 0;
}

int cmd_plan_place(const std::string& topo_path, const std::string& method, const std::string& mode, double pcov,
                   std::uint64_t seed, const std::string& out)
{
    const NetworkTopology t = load_topology(topo_path).peers_only();
    const MccMode m = mode == "psm" ? MccMode::PsmDeafTerminal : MccMode::NoPsm;
    if (mode != "psm" && mode != "nopsm")
        throw std::invalid_argument("--ups must be nopsm or psm");
    Rect area = t.area();
    if (area.area() <= 0) {
        // No area recorded: use the peers' bounding box.
        double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
        for (const auto& n : t.nodes()) {
            x0 = std::min(x0, n.pos.x);
            y0 = std::min(y0, n.pos.y);
            x1 = std::max(x1, n.pos.x);
            y1 = std::max(y1, n.pos.y);
        }
        area = {x0, y0, std::max(x1 - x0, 1e-9), std::max(y1 - y0, 1e-9)};
    }
    PlacementPlan plan;
    if (method == "greedy")
        plan = greedy_set_cover_deploy(t, m);
    else if (method == "grid")
        plan = grid_deploy(t, area, m);
    else if (method == "random")
        plan = random_deploy(t, area, pcov, seed, m);
    else
        throw std::invalid_argument("--method must be greedy, grid or random");
    Output o(out);
    write_plan(o.get(), plan);
    return 0;
}

int cmd_topo_gen(const ScenarioFlags& flags, const std::string& out)
{
    const ScenarioConfig cfg = flags.build();
    const Scenario sc = build_scenario(cfg, cfg.seed);
    Output o(out);
    write_topology(o.get(), sc.topology);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-channel MAC cooperation simulator"};
    app.require_subcommand(1);

    ScenarioFlags run_flags;
    std::string run_out, run_trace;
    auto* run_cmd = app.add_subcommand("run", "simulate one scenario");
    run_flags.add(run_cmd);
    run_cmd->add_option("--out", run_out, "CSV output (default stdout)");
    run_cmd->add_option("--trace", run_trace, "write the frame trace of the first replication");

    ScenarioFlags camp_flags;
    std::string camp_path, camp_out;
    unsigned workers = 0;
    auto* camp_cmd = app.add_subcommand("campaign", "run a parameter sweep");
    camp_cmd->add_option("campaign", camp_path, "campaign file")->required()->check(CLI::ExistingFile);
    camp_cmd->add_option("--seed", camp_flags.seed, "master seed");
    camp_cmd->add_option("--reps", camp_flags.reps, "replications per point");
    camp_cmd->add_option("--stop-after", camp_flags.stop_after, "end-to-end packets per run");
    camp_cmd->add_option("--workers", workers, "worker threads (default: hardware concurrency)");
    camp_cmd->add_option("--out", camp_out, "summary CSV; replications go to <out>.runs.csv");

    auto* plan_cmd = app.add_subcommand("plan", "altruist planning");
    plan_cmd->require_subcommand(1);
    double pcov = kDefaultCoverageTarget, range = 250.0;
    std::string plan_area;
    auto* size_cmd = plan_cmd->add_subcommand("size", "minimum altruist density for a coverage target");
    size_cmd->add_option("--pcov", pcov, "coverage target in [0, 1)");
    size_cmd->add_option("--r", range, "transmission range, m");
    size_cmd->add_option("--area", plan_area, "WxH in meters, for expected counts");
    std::string place_topo, place_method = "greedy", place_ups = "nopsm", place_out;
    std::uint64_t place_seed = 1;
    double place_pcov = kDefaultCoverageTarget;
    auto* place_cmd = plan_cmd->add_subcommand("place", "place altruists over a topology");
    place_cmd->add_option("--topology", place_topo, "topology file")->required()->check(CLI::ExistingFile);
    place_cmd->add_option("--method", place_method, "greedy | grid | random");
    place_cmd->add_option("--ups", place_ups, "unsafe-pair condition: nopsm | psm");
    place_cmd->add_option("--pcov", place_pcov, "coverage target (random method)");
    place_cmd->add_option("--seed", place_seed, "seed (random method)");
    place_cmd->add_option("--out", place_out, "output file (default stdout)");

    auto* topo_cmd = app.add_subcommand("topo", "topology tools");
    topo_cmd->require_subcommand(1);
    ScenarioFlags gen_flags;
    std::string gen_out;
    auto* gen_cmd = topo_cmd->add_subcommand("gen", "generate a scenario topology");
    gen_flags.add(gen_cmd);
    gen_cmd->add_option("--out", gen_out, "output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd)
            return cmd_run(run_flags, run_out, run_trace);
        if (*camp_cmd)
            return cmd_campaign(camp_path, camp_flags, camp_out, workers);
        if (*size_cmd)
            return cmd_plan_size(pcov, range, plan_area);
        if (*place_cmd)
            return cmd_plan_place(place_topo, place_method, place_ups, place_pcov, place_seed, place_out);
        if (*gen_cmd)
            return cmd_topo_gen(gen_flags, gen_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
