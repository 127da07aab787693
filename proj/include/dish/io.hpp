#pragma once

// Text formats: flat `key = value` scenario configs, topology files,
// placement plans, and delimiter-separated run/trace tables.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <type_traits>
#include <vector>

#include "dish/deployment.hpp"
#include "dish/engine.hpp"
#include "dish/metrics.hpp"
#include "dish/topology.hpp"

namespace dish {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{})
        throw std::runtime_error("cannot format number");
    return std::string(buf, end);
}

inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(std::string_view s, char sep = ',')
{
    std::vector<std::string> out;
    while (true) {
        const auto p = s.find(sep);
        const auto item = trim(s.substr(0, p));
        if (!item.empty())
            out.emplace_back(item);
        if (p == std::string_view::npos)
            break;
        s.remove_prefix(p + 1);
    }
    return out;
}

template <typename T>
T parse_number(std::string_view s, std::string_view what)
{
    s = trim(s);
    T v{};
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size())
        throw FormatError("bad value for " + std::string(what) + ": '" + std::string(s) + "'");
    return v;
}

inline bool parse_bool(std::string_view s, std::string_view what)
{
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes" || s == "on")
        return true;
    if (s == "false" || s == "0" || s == "no" || s == "off")
        return false;
    throw FormatError("bad boolean for " + std::string(what) + ": '" + std::string(s) + "'");
}

/// "WxH" in meters.
inline std::pair<double, double> parse_area(std::string_view s)
{
    const auto x = s.find_first_of("xX");
    if (x == std::string_view::npos)
        throw FormatError("area must look like WxH: '" + std::string(s) + "'");
    return {parse_number<double>(s.substr(0, x), "area width"), parse_number<double>(s.substr(x + 1), "area height")};
}

// --- Scenario config ------------------------------------------------------------

/// Set one config key. Returns false for keys this schema does not know.
inline bool apply_config_entry(ScenarioConfig& c, std::string_view key, std::string_view value)
{
    auto num = [&](auto& field) { field = parse_number<std::remove_reference_t<decltype(field)>>(value, key); };
    if (key == "mode")
        c.mode = parse_flow_mode(trim(value));
    else if (key == "variant")
        c.variant = parse_variant(trim(value));
    else if (key == "area")
        std::tie(c.area_w, c.area_h) = parse_area(value);
    else if (key == "area_w")
        num(c.area_w);
    else if (key == "area_h")
        num(c.area_h);
    else if (key == "peers")
        num(c.n_peers);
    else if (key == "peer_density")
        num(c.peer_density);
    else if (key == "altruists")
        num(c.n_altruists);
    else if (key == "alt_density")
        num(c.alt_density);
    else if (key == "channels")
        num(c.channels);
    else if (key == "bandwidth_bps")
        num(c.timing.bandwidth_bps);
    else if (key == "payload_bytes")
        num(c.timing.payload_bytes);
    else if (key == "plcp_bytes")
        num(c.timing.plcp_bytes);
    else if (key == "ctrl_bytes")
        num(c.timing.ctrl_bytes);
    else if (key == "inv_bytes")
        num(c.timing.inv_bytes);
    else if (key == "ack_bytes")
        num(c.timing.ack_bytes);
    else if (key == "sifs_us")
        num(c.timing.sifs);
    else if (key == "difs_us")
        num(c.timing.difs);
    else if (key == "ccap_us")
        num(c.timing.ccap);
    else if (key == "slot_us")
        num(c.timing.slot);
    else if (key == "switch_delay_us")
        num(c.timing.switch_delay);
    else if (key == "cw_min")
        num(c.timing.cw_min);
    else if (key == "cw_max")
        num(c.timing.cw_max);
    else if (key == "retry_limit")
        num(c.timing.retry_limit);
    else if (key == "tx_range")
        num(c.radio.tx_range);
    else if (key == "interference_range")
        num(c.radio.interference_range);
    else if (key == "capture_db")
        num(c.radio.capture_threshold_db);
    else if (key == "path_loss_exponent")
        num(c.radio.path_loss_exponent);
    else if (key == "rate_bps")
        num(c.rate_bps);
    else if (key == "saturated")
        c.saturated = parse_bool(value, key);
    else if (key == "stop_after")
        num(c.stop_after);
    else if (key == "max_time_s")
        num(c.max_time_s);
    else if (key == "seed")
        num(c.seed);
    else if (key == "replications")
        num(c.replications);
    else if (key == "topology_retries")
        num(c.topology_retries);
    else if (key == "trace")
        c.trace = parse_bool(value, key);
    else
        return false;
    return true;
}

struct KeyValue {
    std::string key;
    std::string value;
    int line = 0;
};

/// `key = value` lines; `#` starts a comment; blank lines are skipped.
inline std::vector<KeyValue> read_key_values(std::istream& in)
{
    std::vector<KeyValue> out;
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        std::string_view s = line;
        if (auto h = s.find('#'); h != std::string_view::npos)
            s = s.substr(0, h);
        s = trim(s);
        if (s.empty())
            continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos)
            throw FormatError("line " + std::to_string(no) + ": expected key = value");
        out.push_back({std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))), no});
    }
    return out;
}

inline ScenarioConfig parse_config(std::istream& in, ScenarioConfig base = {})
{
    for (const auto& kv : read_key_values(in))
        if (!apply_config_entry(base, kv.key, kv.value))
            throw FormatError("line " + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
    return base;
}

inline ScenarioConfig parse_config(std::string_view text, ScenarioConfig base = {})
{
    std::istringstream in{std::string(text)};
    return parse_config(in, std::move(base));
}

inline std::string serialize_config(const ScenarioConfig& c)
{
    std::ostringstream o;
    auto kv = [&](std::string_view k, const auto& v) { o << k << " = " << v << '\n'; };
    auto kd = [&](std::string_view k, double v) { kv(k, format_double(v)); };
    kv("mode", to_string(c.mode));
    kv("variant", to_string(c.variant));
    kd("area_w", c.area_w);
    kd("area_h", c.area_h);
    kv("peers", c.n_peers);
    kd("peer_density", c.peer_density);
    kv("altruists", c.n_altruists);
    kd("alt_density", c.alt_density);
    kv("channels", c.channels);
    kd("bandwidth_bps", c.timing.bandwidth_bps);
    kv("payload_bytes", c.timing.payload_bytes);
    kv("plcp_bytes", c.timing.plcp_bytes);
    kv("ctrl_bytes", c.timing.ctrl_bytes);
    kv("inv_bytes", c.timing.inv_bytes);
    kv("ack_bytes", c.timing.ack_bytes);
    kv("sifs_us", c.timing.sifs);
    kv("difs_us", c.timing.difs);
    kv("ccap_us", c.timing.ccap);
    kv("slot_us", c.timing.slot);
    kv("switch_delay_us", c.timing.switch_delay);
    kv("cw_min", c.timing.cw_min);
    kv("cw_max", c.timing.cw_max);
    kv("retry_limit", c.timing.retry_limit);
    kd("tx_range", c.radio.tx_range);
    kd("interference_range", c.radio.interference_range);
    kd("capture_db", c.radio.capture_threshold_db);
    kd("path_loss_exponent", c.radio.path_loss_exponent);
    kd("rate_bps", c.rate_bps);
    kv("saturated", c.saturated ? "true" : "false");
    kv("stop_after", c.stop_after);
    kd("max_time_s", c.max_time_s);
    kv("seed", c.seed);
    kv("replications", c.replications);
    kv("topology_retries", c.topology_retries);
    kv("trace", c.trace ? "true" : "false");
    return o.str();
}

// --- Topology files --------------------------------------------------------------

inline void write_topology(std::ostream& o, const NetworkTopology& t)
{
    o << "tx_range " << format_double(t.tx_range()) << '\n';
    o << "interference_range " << format_double(t.interference_range()) << '\n';
    const Rect& a = t.area();
    o << "area " << format_double(a.x0) << ' ' << format_double(a.y0) << ' ' << format_double(a.w) << ' '
      << format_double(a.h) << '\n';
    for (const auto& n : t.nodes())
        o << "node " << n.id << ' ' << to_string(n.kind) << ' ' << format_double(n.pos.x) << ' '
          << format_double(n.pos.y) << '\n';
}

inline NetworkTopology read_topology(std::istream& in)
{
    std::optional<double> r;
    std::optional<double> ir;
    Rect area;
    std::vector<NodeRecord> nodes;
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        std::string_view s = line;
        if (auto h = s.find('#'); h != std::string_view::npos)
            s = s.substr(0, h);
        std::istringstream ls{std::string(trim(s))};
        std::string tag;
        if (!(ls >> tag))
            continue;
        auto fail = [&](const std::string& why) { return FormatError("topology line " + std::to_string(no) + ": " + why); };
        std::vector<std::string> f;
        for (std::string w; ls >> w;)
            f.push_back(w);
        if (tag == "tx_range" && f.size() == 1) {
            r = parse_number<double>(f[0], tag);
        } else if (tag == "interference_range" && f.size() == 1) {
            ir = parse_number<double>(f[0], tag);
        } else if (tag == "area" && f.size() == 4) {
            area = {parse_number<double>(f[0], tag), parse_number<double>(f[1], tag), parse_number<double>(f[2], tag),
                    parse_number<double>(f[3], tag)};
        } else if (tag == "node" && f.size() == 4) {
            NodeKind k;
            if (f[1] == "peer")
                k = NodeKind::Peer;
            else if (f[1] == "altruist")
                k = NodeKind::Altruist;
            else
                throw fail("unknown node kind '" + f[1] + "'");
            nodes.push_back({parse_number<NodeId>(f[0], "node id"),
                             {parse_number<double>(f[2], "x"), parse_number<double>(f[3], "y")},
                             k});
        } else {
            throw fail("unrecognized record '" + tag + "'");
        }
    }
    if (!r)
        throw FormatError("topology: missing tx_range");
    try {
        return NetworkTopology(std::move(nodes), *r, ir.value_or(2.0 * *r), area);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("topology: ") + e.what());
    }
}

// --- Placement plans -------------------------------------------------------------

inline void write_plan(std::ostream& o, const PlacementPlan& p)
{
    o << "method " << to_string(p.method) << '\n';
    if (p.target_pcov)
        o << "target_pcov " << format_double(*p.target_pcov) << '\n';
    const Coverage c = p.coverage();
    o << "n_up " << c.n_up << '\n';
    o << "covered_ups " << c.n_cup << '\n';
    o << "achieved_pcov " << format_double(c.fraction()) << (c.vacuous() ? " vacuous" : "") << '\n';
    o << "altruists " << p.altruists.size() << '\n';
    for (Point a : p.altruists)
        o << "altruist " << format_double(a.x) << ' ' << format_double(a.y) << '\n';
    for (const auto& u : p.uncovered_ups)
        o << "uncovered " << u.i << ' ' << u.j << '\n';
}

// --- Result tables -----------------------------------------------------------------

/// BMP of a run; zero when nothing was measured.
inline double run_bmp(const RunResult& r, double b0 = 1.0)
{
    if (r.sim_time <= 0 || std::max(r.p_max_peer_W, r.p_max_alt_W) <= 0)
        return 0.0;
    return bmp(r.bmp_inputs(b0));
}

inline constexpr std::string_view kRunCsvHeader =
    "seed,variant,n_peers,n_altruists,throughput_bps,power_W_aggregate,p_max_peer_W,p_max_alt_W,bmp,"
    "collisions,invs,suppressed,ncfs,drops,generated,delivered,sim_time_s";

inline void write_run_row(std::ostream& o, const RunResult& r)
{
    o << r.seed << ',' << to_string(r.variant) << ',' << r.n_peers << ',' << r.n_altruists << ','
      << format_double(r.throughput_bps) << ',' << format_double(r.power_W_aggregate) << ','
      << format_double(r.p_max_peer_W) << ',' << format_double(r.p_max_alt_W) << ',' << format_double(run_bmp(r))
      << ',' << r.collisions << ',' << r.invs << ',' << r.suppressed << ',' << r.ncfs << ',' << r.drops << ','
      << r.generated << ',' << r.delivered << ',' << format_double(r.sim_time_s()) << '\n';
}

inline constexpr std::string_view kTraceCsvHeader = "time_us,src,dst,kind,channel,outcome";

inline void write_trace(std::ostream& o, const std::vector<TraceRecord>& trace)
{
    o << kTraceCsvHeader << '\n';
    for (const auto& t : trace) {
        o << t.time << ',' << t.src << ',';
        if (t.dst == kBroadcast)
            o << '*';
        else
            o << t.dst;
        o << ',' << to_string(t.kind) << ',' << t.channel << ',' << to_string(t.outcome) << '\n';
    }
}

} // namespace dish
