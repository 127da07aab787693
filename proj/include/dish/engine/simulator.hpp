#pragma once

// Event-driven simulation of the multi-channel MAC: one control channel for
// the PRA/PRB/CCAP/CFA/CFB handshake, m data channels for DATA/ACK.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "dish/engine/event_queue.hpp"
#include "dish/engine/radio.hpp"
#include "dish/engine/scenario.hpp"
#include "dish/engine/traffic.hpp"
#include "dish/metrics.hpp"
#include "dish/protocol.hpp"
#include "dish/random.hpp"
#include "dish/topology.hpp"

namespace dish {

struct FlowStats {
    NodeId src = 0;
    NodeId dst = 0;
    std::size_t hops = 0;
    double distance_m = 0.0;
    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t delivered_bits = 0;

    std::uint64_t in_flight() const { return generated - delivered - dropped; }
    friend bool operator==(const FlowStats&, const FlowStats&) = default;
};

enum class TraceOutcome : std::uint8_t { Ok, Collided, NotHeard, Suppressed };

inline constexpr std::string_view to_string(TraceOutcome o)
{
    switch (o) {
    case TraceOutcome::Ok: return "ok";
    case TraceOutcome::Collided: return "collided";
    case TraceOutcome::NotHeard: return "not_heard";
    case TraceOutcome::Suppressed: return "suppressed";
    }
    return "?";
}

/// One frame (or suppressed INV attempt). The outcome is the one at the
/// addressed node; broadcast frames report ok.
struct TraceRecord {
    SimTime time = 0;
    NodeId src = 0;
    NodeId dst = 0;
    FrameKind kind = FrameKind::PRA;
    ChannelId channel = 0;
    TraceOutcome outcome = TraceOutcome::Ok;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct RunResult {
    std::uint64_t seed = 0;
    ProtocolVariant variant = ProtocolVariant::DishP;
    std::size_t n_peers = 0;
    std::size_t n_altruists = 0;
    std::uint32_t topology_attempts = 1;

    double throughput_bps = 0.0;
    double power_W_aggregate = 0.0;  ///< sum of average power over all nodes
    double p_max_peer_W = 0.0;
    double p_max_alt_W = 0.0;

    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    std::uint64_t collisions = 0;  ///< frames lost at their addressed receiver
    std::uint64_t invs = 0;
    std::uint64_t suppressed = 0;  ///< INV attempts silenced by carrier sense
    std::uint64_t ncfs = 0;
    std::uint64_t drops = 0;
    std::uint64_t frames = 0;
    SimTime sim_time = 0;

    std::vector<FlowStats> flows;
    std::vector<double> node_power_W;
    EnergyLedger ledger;
    std::vector<TraceRecord> trace;

    double sim_time_s() const { return to_seconds(sim_time); }

    /// BMP inputs from this run, with N_a and P_a^max zero when no altruists exist.
    BmpInputs bmp_inputs(double b0 = 1.0) const
    {
        BmpInputs in;
        const double secs = sim_time_s();
        for (const auto& f : flows) {
            in.flow_throughputs.push_back(secs > 0 ? static_cast<double>(f.delivered_bits) / secs : 0.0);
            in.flow_distances.push_back(f.distance_m);
        }
        in.n_peers = n_peers;
        in.n_altruists = n_altruists;
        in.p_peer_max = p_max_peer_W;
        in.p_alt_max = n_altruists > 0 ? p_max_alt_W : 0.0;
        in.b0 = b0;
        return in;
    }

    friend bool operator==(const RunResult&, const RunResult&) = default;
};

class Simulator {
public:
    Simulator(const ScenarioConfig& cfg, NetworkTopology topology, std::vector<Flow> flows, std::uint64_t seed)
        : cfg_(cfg), t_(cfg.timing), topo_(std::move(topology)), flows_(std::move(flows)), seed_(seed),
          mac_rng_(stream_seed(seed, Stream::Mac))
    {
        cfg_.radio.validate();
        const auto& nodes = topo_.nodes();
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (nodes[k].id != k)
                throw std::invalid_argument("simulator requires node ids 0..n-1 in order");
            check_kind_allowed(cfg_.variant, nodes[k].kind);
        }
        for (const auto& f : flows_) {
            if (f.route.size() < 2 || f.route.front() != f.src || f.route.back() != f.dst)
                throw std::invalid_argument("malformed flow route");
            for (std::size_t h = 0; h + 1 < f.route.size(); ++h)
                if (!topo_.adjacent(f.route[h], f.route[h + 1]))
                    throw std::invalid_argument("flow route uses a non-adjacent hop");
        }
        const std::size_t n = nodes.size();
        nodes_.resize(n);
        dist_.assign(n * n, 0.0);
        rx_nbrs_.resize(n);
        for (std::size_t a = 0; a < n; ++a) {
            nodes_[a].kind = nodes[a].kind;
            nodes_[a].cw = t_.cw_min;
            for (std::size_t b = 0; b < n; ++b) {
                const double d = distance(nodes[a].pos, nodes[b].pos);
                dist_[a * n + b] = d;
                if (a != b && d <= cfg_.radio.tx_range)
                    rx_nbrs_[a].push_back(static_cast<NodeId>(b));
            }
        }
        for (std::size_t k = 0; k < n; ++k) {
            nodes_[k].billed = billed_state(static_cast<NodeId>(k));
            nodes_[k].listening = listens(static_cast<NodeId>(k));
        }
        history_.resize(cfg_.channels + 1);
        history_base_.assign(cfg_.channels + 1, 0);
        const SimTime longest = std::max({t_.duration(FrameKind::DATA), t_.duration(FrameKind::INV),
                                          t_.duration(FrameKind::PRA), t_.duration(FrameKind::ACK)});
        horizon_ = 2 * longest + t_.difs + t_.ccap + t_.sifs * 4 + 1000;
        stats_.resize(flows_.size());
        for (std::size_t f = 0; f < flows_.size(); ++f) {
            stats_[f].src = flows_[f].src;
            stats_[f].dst = flows_[f].dst;
            stats_[f].hops = flows_[f].hops();
            stats_[f].distance_m = dist(flows_[f].src, flows_[f].dst);
            sources_.emplace_back(cfg_.rate_bps, payload_bits(), stream_seed(seed, Stream::Traffic, f));
        }
    }

    RunResult run()
    {
        ledger_ = EnergyLedger(nodes_.size());
        if (cfg_.stop_after > 0) {
            for (std::size_t f = 0; f < flows_.size(); ++f) {
                if (cfg_.saturated)
                    q_.push(0, Ev{EvType::Arrival, static_cast<NodeId>(f), 0, 0});
                else if (sources_[f].active())
                    schedule_arrival(f, 0);
            }
        }
        const SimTime limit = cfg_.max_time_s > 0 ? static_cast<SimTime>(std::llround(cfg_.max_time_s * 1e6)) : kNever;
        SimTime end = 0;
        while (!q_.empty() && !stopped_) {
            if (q_.top().time > limit) {
                end = limit;
                break;
            }
            auto e = q_.pop();
            now_ = e.time;
            end = now_;
            dispatch(e.payload);
        }
        if (stopped_)
            end = stop_time_;
        return finish(end);
    }

private:
    enum class EvType : std::uint8_t { TxEnd, Timer, Arrival, InvAttempt };
    enum class TimerKind : std::uint8_t {
        BackoffEnd,
        DifsEnd,
        SendPrb,
        CcapEnd,
        InvWait,
        CfaTimeout,
        SendCfb,
        CfbTimeout,
        SendData,
        AckTimeout,
        DataTimeout,
        SendAck,
    };

    struct Ev {
        EvType type;
        NodeId node;     // node, flow index, or channel for TxEnd
        std::uint64_t a; // timer token, tx serial, or INV plan index
        std::uint32_t b; // timer kind
    };

    struct Tx {
        Frame frame;
        SimTime start = 0;
        SimTime end = 0;
        ChannelId channel = 0;
    };

    struct Packet {
        std::uint32_t flow = 0;
        std::uint32_t hop = 0;  // index into the route of the current holder
        NodeId holder = 0;
    };

    struct Handshake {
        std::uint64_t id = 0;
        HandshakeRole role = HandshakeRole::Sender;
        NodeId peer = 0;
        ChannelId channel = 0;
        bool got_prb = false;
        bool aborted = false;
        SimTime ccap_start = 0;
        SimTime reservation_until = 0;
        std::uint64_t packet = 0;
        bool from_source = false;
    };

    struct Node {
        NodeKind kind = NodeKind::Peer;
        FsmPhase phase = FsmPhase::ControlIdle;
        ChannelId tuned = kControlChannel;
        SimTime tuned_since = 0;
        bool listening = true;
        SimTime listening_since = 0;
        bool transmitting = false;
        ChannelUsageTable table;
        std::deque<std::uint64_t> queue;
        std::uint32_t cw = 31;
        std::uint32_t retries = 0;
        SimTime defer_until = 0;
        std::uint64_t token = 0;
        Handshake hs;
        RadioState billed = RadioState::IDLE;
        SimTime billed_until = 0;
        SimTime state_since = 0;
        SimTime rx_credit_until = 0;
        std::unordered_set<std::uint64_t> inv_for;
    };

    struct InvPlan {
        NodeId node = 0;
        Frame frame;
        SimTime ccap_start = 0;
    };

    // --- helpers --------------------------------------------------------------

    std::uint64_t payload_bits() const { return std::uint64_t{t_.payload_bytes} * 8; }
    double dist(NodeId a, NodeId b) const { return dist_[std::size_t{a} * nodes_.size() + b]; }
    NodeKind kind(NodeId n) const { return nodes_[n].kind; }

    RadioState billed_state(NodeId n) const
    {
        const Node& nd = nodes_[n];
        return psm_radio_policy(cfg_.variant, nd.kind, {engaged(nd.phase), nd.transmitting, false});
    }

    bool listens(NodeId n) const
    {
        return !sleeps_when_idle(cfg_.variant, nodes_[n].kind) || engaged(nodes_[n].phase);
    }

    void flush(NodeId n)
    {
        Node& nd = nodes_[n];
        ledger_.add(n, nd.billed, now_ - nd.billed_until);
        nd.billed_until = now_;
    }

    void refresh_radio(NodeId n)
    {
        Node& nd = nodes_[n];
        const bool l = listens(n);
        if (l && !nd.listening)
            nd.listening_since = now_;
        nd.listening = l;
        const RadioState s = billed_state(n);
        if (s != nd.billed) {
            flush(n);
            nd.billed = s;
            nd.state_since = now_;
        }
    }

    void set_phase(NodeId n, FsmPhase p)
    {
        nodes_[n].phase = p;
        refresh_radio(n);
    }

    void set_timer(NodeId n, SimTime at, TimerKind k)
    {
        Node& nd = nodes_[n];
        ++nd.token;
        q_.push(at, Ev{EvType::Timer, n, nd.token, static_cast<std::uint32_t>(k)});
    }

    void cancel_timer(NodeId n) { ++nodes_[n].token; }

    void tune(NodeId n, ChannelId ch, SimTime since)
    {
        nodes_[n].tuned = ch;
        nodes_[n].tuned_since = since;
    }

    void return_to_control(NodeId n)
    {
        if (nodes_[n].tuned != kControlChannel)
            tune(n, kControlChannel, now_ + t_.switch_delay);
    }

    std::deque<Tx>& hist(ChannelId ch) { return history_[ch]; }
    const Tx& tx_at(ChannelId ch, std::uint64_t serial) const { return history_[ch][serial - history_base_[ch]]; }

    /// Latest end among transmissions on `ch` sensed by `n` that overlap [a, b).
    /// Frames starting exactly at b are not yet sensed.
    std::optional<SimTime> sensed_busy(NodeId n, ChannelId ch, SimTime a, SimTime b) const
    {
        std::optional<SimTime> busy;
        const auto& h = history_[ch];
        for (auto it = h.rbegin(); it != h.rend(); ++it) {
            if (it->start + horizon_ < a)
                break;
            if (it->start < b && it->end > a && dist(it->frame.src, n) <= cfg_.radio.interference_range)
                busy = std::max(busy.value_or(it->end), it->end);
        }
        return busy;
    }

    /// Whether an INV from within transmission range started in [since, now).
    bool inv_energy_since(NodeId n, SimTime since) const
    {
        const auto& h = history_[kControlChannel];
        for (auto it = h.rbegin(); it != h.rend(); ++it) {
            if (it->start < since)
                break;
            if (it->frame.kind == FrameKind::INV && it->start < now_ && it->frame.src != n
                && dist(it->frame.src, n) <= cfg_.radio.tx_range)
                return true;
        }
        return false;
    }

    void trace(SimTime time, const Frame& f, TraceOutcome o)
    {
        if (cfg_.trace)
            trace_.push_back({time, f.src, f.dst, f.kind, f.channel, o});
    }

    // --- traffic ----------------------------------------------------------------

    void schedule_arrival(std::size_t f, SimTime from)
    {
        const SimTime gap = sources_[f].next_gap();
        if (gap == kNever)
            return;
        q_.push(from + gap, Ev{EvType::Arrival, static_cast<NodeId>(f), 0, 0});
    }

    void generate(std::size_t f)
    {
        if (stopped_)
            return;
        const NodeId src = flows_[f].src;
        packets_.push_back({static_cast<std::uint32_t>(f), 0, src});
        ++stats_[f].generated;
        ++generated_;
        nodes_[src].queue.push_back(packets_.size() - 1);
        if (generated_ >= cfg_.stop_after) {
            stopped_ = true;
            stop_time_ = now_;
            return;
        }
        kick(src);
    }

    void on_arrival(std::size_t f)
    {
        generate(f);
        if (!cfg_.saturated)
            schedule_arrival(f, now_);
    }

    // --- medium -------------------------------------------------------------------

    void transmit(NodeId n, Frame f)
    {
        Node& nd = nodes_[n];
        const ChannelId ch = f.air_channel();
        auto& h = hist(ch);
        while (!h.empty() && h.front().start + horizon_ < now_) {
            h.pop_front();
            ++history_base_[ch];
        }
        const SimTime end = now_ + t_.duration(f.kind);
        const std::uint64_t serial = history_base_[ch] + h.size();
        if (f.kind == FrameKind::INV)
            ++invs_;
        if (f.kind == FrameKind::NCF)
            ++ncfs_;
        ++frames_;
        h.push_back(Tx{std::move(f), now_, end, ch});
        nd.transmitting = true;
        refresh_radio(n);
        q_.push(end, Ev{EvType::TxEnd, ch, serial, 0});
    }

    bool hears(NodeId r, const Tx& tx) const
    {
        const Node& nd = nodes_[r];
        if (nd.tuned != tx.channel || nd.tuned_since > tx.start)
            return false;
        if (nd.listening && nd.listening_since <= tx.start)
            return true;
        // Wake-on-request: a dozing peer still picks up frames addressed to it.
        return tx.channel == kControlChannel && tx.frame.dst == r;
    }

    void credit_rx(NodeId r, const Tx& tx)
    {
        Node& nd = nodes_[r];
        if (nd.billed == RadioState::TX)
            return;
        if (nd.billed != RadioState::IDLE && tx.frame.dst != r)
            return;
        flush(r);
        const SimTime lo = std::max({tx.start, nd.rx_credit_until, nd.state_since});
        if (now_ > lo)
            ledger_.convert(r, nd.billed, RadioState::RX, now_ - lo);
        nd.rx_credit_until = now_;
    }

    void on_tx_end(ChannelId ch, std::uint64_t serial)
    {
        const Tx tx = tx_at(ch, serial);
        const NodeId src = tx.frame.src;
        nodes_[src].transmitting = false;
        refresh_radio(src);

        std::vector<AirSignal> others;
        std::vector<NodeId> other_src;
        for (auto it = hist(ch).rbegin(); it != hist(ch).rend(); ++it) {
            if (it->start + horizon_ < tx.start)
                break;
            if (&*it == &tx_at(ch, serial))
                continue;
            if (it->start < tx.end && it->end > tx.start) {
                others.push_back({topo_.nodes()[it->frame.src].pos, it->start, it->end, ch});
                other_src.push_back(it->frame.src);
            }
        }
        const AirSignal wanted{topo_.nodes()[src].pos, tx.start, tx.end, ch};

        std::optional<ReceptionOutcome> at_dst;
        std::vector<Detection> detections;
        for (NodeId r : rx_nbrs_[src]) {
            if (!hears(r, tx))
                continue;
            if (std::find(other_src.begin(), other_src.end(), r) != other_src.end())
                continue;  // was itself transmitting
            const auto outcome = reception_outcome(wanted, others, topo_.nodes()[r].pos, true, cfg_.radio);
            if (outcome == ReceptionOutcome::NotHeard)
                continue;
            credit_rx(r, tx);
            if (r == tx.frame.dst)
                at_dst = outcome;
            if (outcome == ReceptionOutcome::Collided) {
                if (tx.frame.kind == FrameKind::INV)
                    handle_inv(r, std::nullopt);
                continue;
            }
            on_frame(r, tx, detections);
        }

        TraceOutcome o = TraceOutcome::Ok;
        if (tx.frame.dst != kBroadcast) {
            o = !at_dst ? TraceOutcome::NotHeard
                        : (*at_dst == ReceptionOutcome::Ok ? TraceOutcome::Ok : TraceOutcome::Collided);
            if (o == TraceOutcome::Collided)
                ++collisions_;
        }
        trace(tx.start, tx.frame, o);

        if (!detections.empty())
            cooperate(tx.frame, detections);
        after_own_tx(src, tx.frame);
    }

    // --- reception ----------------------------------------------------------------

    void on_frame(NodeId r, const Tx& tx, std::vector<Detection>& detections)
    {
        Node& nd = nodes_[r];
        const Frame& f = tx.frame;
        const bool party = f.dst == r;
        const bool third = f.src != r && f.dst != r;
        if (third && gathers_information(cfg_.variant, nd.kind)) {
            if (f.kind == FrameKind::CFA || f.kind == FrameKind::CFB || f.kind == FrameKind::NCF)
                update_table(nd.table, f, now_);
            if ((f.kind == FrameKind::PRA || f.kind == FrameKind::PRB)
                && (nd.phase == FsmPhase::ControlIdle || nd.phase == FsmPhase::Backoff))
                if (auto mcc = detect_mcc(nd.table, f, now_))
                    detections.push_back({r, *mcc});
        }
        const bool mine = nd.hs.id == f.handshake;
        switch (f.kind) {
        case FrameKind::PRA:
            if (party)
                on_pra(r, f);
            break;
        case FrameKind::PRB:
            if (party && mine && nd.phase == FsmPhase::AwaitPRB) {
                nd.hs.got_prb = true;
                nd.hs.channel = f.channel;
            }
            break;
        case FrameKind::CFA:
            if (party && mine && nd.phase == FsmPhase::AwaitCFA) {
                nd.hs.reservation_until = f.reservation_until;
                set_phase(r, FsmPhase::Confirming);
                set_timer(r, now_ + t_.sifs, TimerKind::SendCfb);
            }
            break;
        case FrameKind::CFB:
            if (party && mine && nd.phase == FsmPhase::AwaitCFB) {
                tune(r, nd.hs.channel, now_ + t_.switch_delay);
                set_phase(r, FsmPhase::DataExchange);
                set_timer(r, now_ + t_.switch_delay, TimerKind::SendData);
            }
            break;
        case FrameKind::INV:
            handle_inv(r, f);
            break;
        case FrameKind::NCF:
            break;
        case FrameKind::DATA:
            if (party && mine && nd.phase == FsmPhase::DataExchange && nd.hs.role == HandshakeRole::Receiver) {
                accept_packet(r, f);
                set_timer(r, now_ + t_.sifs, TimerKind::SendAck);
            }
            break;
        case FrameKind::ACK:
            if (party && mine && nd.phase == FsmPhase::DataExchange && nd.hs.role == HandshakeRole::Sender)
                succeed(r);
            break;
        }
    }

    void on_pra(NodeId r, const Frame& f)
    {
        Node& nd = nodes_[r];
        if (nd.phase != FsmPhase::ControlIdle && nd.phase != FsmPhase::Backoff && nd.phase != FsmPhase::CarrierSense)
            return;
        nd.table.prune(now_);
        const auto ch = receiver_channel(cfg_.variant, nd.table, f.channel, cfg_.channels, now_, mac_rng_);
        if (!ch)
            return;
        nd.hs = Handshake{};
        nd.hs.id = f.handshake;
        nd.hs.role = HandshakeRole::Receiver;
        nd.hs.peer = f.src;
        nd.hs.channel = *ch;
        set_phase(r, FsmPhase::ReceiverCcap);
        set_timer(r, now_ + t_.sifs, TimerKind::SendPrb);
    }

    void accept_packet(NodeId r, const Frame& f)
    {
        Packet& p = packets_[f.packet];
        if (p.holder != f.src)
            return;  // duplicate after a lost ACK
        const Flow& flow = flows_[p.flow];
        ++p.hop;
        p.holder = r;
        if (r == flow.dst) {
            ++stats_[p.flow].delivered;
            stats_[p.flow].delivered_bits += payload_bits();
            ++delivered_;
        } else {
            nodes_[r].queue.push_back(f.packet);
        }
    }

    void handle_inv(NodeId r, const std::optional<Frame>& inv)
    {
        Node& nd = nodes_[r];
        if (!inv_sensitive(nd.phase))
            return;
        const auto resp = on_inv_received(nd.hs.role, nd.phase, inv, nd.hs.id, nd.hs.peer, now_, t_.estimated_backoff());
        if (resp.action == InvResponse::Action::Abort)
            abort_handshake(r, resp.backoff_until, resp.learned);
    }

    // --- cooperation ----------------------------------------------------------------

    void cooperate(const Frame& f, std::vector<Detection>& detections)
    {
        const SimTime ccap_start = f.kind == FrameKind::PRA ? now_ + t_.sifs + t_.duration(FrameKind::PRB) : now_;
        std::vector<Detection> chosen;
        if (cfg_.variant == ProtocolVariant::GenieInSitu) {
            if (!genie_served_.insert(f.handshake).second)
                return;
            const auto best = best_neighbor(detections);
            for (const auto& d : detections)
                if (best && d.node == *best)
                    chosen.push_back(d);
        } else {
            chosen = detections;
        }
        for (const auto& d : chosen) {
            Node& nd = nodes_[d.node];
            if (nd.inv_for.contains(f.handshake))
                continue;
            const auto act = cooperation_policy(cfg_.variant, nd.kind, d.problem, mac_rng_, t_.ccap);
            if (!act)
                continue;
            nd.inv_for.insert(f.handshake);
            Frame inv;
            inv.kind = FrameKind::INV;
            inv.src = d.node;
            inv.dst = f.src;
            inv.channel = d.problem.blocking.channel;
            inv.usage = d.problem.blocking;
            inv.handshake = f.handshake;
            inv_plans_.push_back({d.node, inv, ccap_start});
            q_.push(ccap_start + act->wait, Ev{EvType::InvAttempt, d.node, inv_plans_.size() - 1, 0});
        }
    }

    void on_inv_attempt(std::uint64_t plan)
    {
        const InvPlan p = inv_plans_[plan];
        const Node& nd = nodes_[p.node];
        if ((nd.phase != FsmPhase::ControlIdle && nd.phase != FsmPhase::Backoff) || nd.tuned != kControlChannel
            || nd.tuned_since > now_ || nd.transmitting)
            return;
        if (sensed_busy(p.node, kControlChannel, p.ccap_start, now_)) {
            ++suppressed_;
            trace(now_, p.frame, TraceOutcome::Suppressed);
            return;
        }
        transmit(p.node, p.frame);
    }

    // --- sender side ------------------------------------------------------------------

    void kick(NodeId n)
    {
        if (nodes_[n].phase == FsmPhase::ControlIdle && !nodes_[n].queue.empty())
            start_access(n);
    }

    void start_access(NodeId n)
    {
        Node& nd = nodes_[n];
        if (nd.queue.empty()) {
            set_phase(n, FsmPhase::ControlIdle);
            return;
        }
        const auto k = static_cast<SimTime>(mac_rng_.below(std::uint64_t{nd.cw} + 1));
        const SimTime base = std::max({now_, nd.defer_until, nd.tuned_since});
        set_phase(n, FsmPhase::Backoff);
        set_timer(n, base + k * t_.slot, TimerKind::BackoffEnd);
    }

    void attempt_pra(NodeId n)
    {
        Node& nd = nodes_[n];
        const std::uint64_t pid = nd.queue.front();
        const Packet& p = packets_[pid];
        const Flow& flow = flows_[p.flow];
        if (p.holder != n) {
            // Forwarded on an earlier attempt whose ACK was lost.
            nd.queue.pop_front();
            nd.retries = 0;
            nd.cw = t_.cw_min;
            if (cfg_.saturated && flow.src == n)
                generate(p.flow);
            set_phase(n, FsmPhase::ControlIdle);
            kick(n);
            return;
        }
        const NodeId next = flow.route[p.hop + 1];
        nd.table.prune(now_);
        if (auto e = nd.table.blocking_node(next, now_)) {
            nd.defer_until = e->release;
            start_access(n);
            return;
        }
        const auto choice = select_channel(cfg_.variant, nd.table, cfg_.channels, now_, mac_rng_);
        if (!choice.channel) {
            nd.defer_until = choice.defer_until;
            start_access(n);
            return;
        }
        nd.hs = Handshake{};
        nd.hs.id = ++handshake_counter_;
        nd.hs.role = HandshakeRole::Sender;
        nd.hs.peer = next;
        nd.hs.channel = *choice.channel;
        nd.hs.packet = pid;
        nd.hs.from_source = flow.src == n;
        set_phase(n, FsmPhase::AwaitPRB);
        Frame f;
        f.kind = FrameKind::PRA;
        f.src = n;
        f.dst = next;
        f.channel = *choice.channel;
        f.handshake = nd.hs.id;
        transmit(n, f);
    }

    /// Packet left this node (ACKed or dropped): a saturated source refills.
    void release_head(NodeId n, bool dropped)
    {
        Node& nd = nodes_[n];
        const std::uint64_t pid = nd.queue.front();
        nd.queue.pop_front();
        Packet& p = packets_[pid];
        if (dropped && p.holder == n) {
            ++stats_[p.flow].dropped;
            ++drops_;
            p.holder = kBroadcast;
        }
        nd.retries = 0;
        nd.cw = t_.cw_min;
        if (cfg_.saturated && nd.hs.from_source && flows_[p.flow].src == n)
            generate(p.flow);
    }

    void succeed(NodeId n)
    {
        cancel_timer(n);
        return_to_control(n);
        release_head(n, false);
        nodes_[n].hs = Handshake{};
        set_phase(n, FsmPhase::ControlIdle);
        kick(n);
    }

    void fail(NodeId n)
    {
        Node& nd = nodes_[n];
        cancel_timer(n);
        return_to_control(n);
        if (++nd.retries > t_.retry_limit)
            release_head(n, true);
        else
            nd.cw = std::min(2 * nd.cw + 1, t_.cw_max);
        nd.hs = Handshake{};
        set_phase(n, FsmPhase::ControlIdle);
        kick(n);
    }

    void abort_handshake(NodeId n, SimTime until, const std::optional<UsageEntry>& learned)
    {
        Node& nd = nodes_[n];
        if (learned)
            nd.table.upsert(*learned);
        nd.defer_until = std::max(nd.defer_until, until);
        cancel_timer(n);
        if (nd.hs.role == HandshakeRole::Sender && nd.phase == FsmPhase::AwaitCFB) {
            nd.hs.aborted = true;
            send_ncf(n);
            return;
        }
        nd.hs = Handshake{};
        set_phase(n, FsmPhase::ControlIdle);
        kick(n);
    }

    void send_ncf(NodeId n)
    {
        Node& nd = nodes_[n];
        set_phase(n, FsmPhase::SendingNcf);
        Frame f;
        f.kind = FrameKind::NCF;
        f.src = n;
        f.dst = kBroadcast;
        f.channel = nd.hs.channel;
        f.usage = UsageEntry{nd.hs.channel, n, nd.hs.peer, nd.hs.reservation_until};
        f.handshake = nd.hs.id;
        transmit(n, f);
    }

    // --- timers -----------------------------------------------------------------------

    void on_timer(NodeId n, TimerKind k)
    {
        Node& nd = nodes_[n];
        switch (k) {
        case TimerKind::BackoffEnd:
            set_phase(n, FsmPhase::CarrierSense);
            set_timer(n, now_ + t_.difs, TimerKind::DifsEnd);
            break;
        case TimerKind::DifsEnd:
            if (auto busy = sensed_busy(n, kControlChannel, now_ - t_.difs, now_); busy || nd.transmitting) {
                const auto slots = static_cast<SimTime>(mac_rng_.below(std::uint64_t{nd.cw} + 1));
                set_phase(n, FsmPhase::Backoff);
                set_timer(n, std::max(now_, busy.value_or(now_)) + slots * t_.slot, TimerKind::BackoffEnd);
            } else {
                attempt_pra(n);
            }
            break;
        case TimerKind::SendPrb: {
            Frame f;
            f.kind = FrameKind::PRB;
            f.src = n;
            f.dst = nd.hs.peer;
            f.channel = nd.hs.channel;
            f.handshake = nd.hs.id;
            transmit(n, f);
            break;
        }
        case TimerKind::CcapEnd:
            if (inv_energy_since(n, nd.hs.ccap_start)) {
                set_phase(n, FsmPhase::AwaitInv);
                set_timer(n, now_ + t_.duration(FrameKind::INV) + t_.sifs, TimerKind::InvWait);
            } else if (nd.hs.role == HandshakeRole::Receiver) {
                set_phase(n, FsmPhase::AwaitCFA);
                set_timer(n, now_ + t_.duration(FrameKind::CFA) + t_.sifs, TimerKind::CfaTimeout);
            } else if (nd.hs.got_prb) {
                send_cfa(n);
            } else {
                fail(n);
            }
            break;
        case TimerKind::InvWait:
            abort_handshake(n, now_ + t_.estimated_backoff(), std::nullopt);
            break;
        case TimerKind::CfaTimeout:
        case TimerKind::DataTimeout:
            return_to_control(n);
            nd.hs = Handshake{};
            set_phase(n, FsmPhase::ControlIdle);
            kick(n);
            break;
        case TimerKind::SendCfb: {
            Frame f;
            f.kind = FrameKind::CFB;
            f.src = n;
            f.dst = nd.hs.peer;
            f.channel = nd.hs.channel;
            f.reservation_until = nd.hs.reservation_until;
            f.handshake = nd.hs.id;
            transmit(n, f);
            break;
        }
        case TimerKind::CfbTimeout:
            send_ncf(n);
            break;
        case TimerKind::SendData: {
            Frame f;
            f.kind = FrameKind::DATA;
            f.src = n;
            f.dst = nd.hs.peer;
            f.channel = nd.hs.channel;
            f.handshake = nd.hs.id;
            f.packet = nd.hs.packet;
            transmit(n, f);
            break;
        }
        case TimerKind::AckTimeout:
            fail(n);
            break;
        case TimerKind::SendAck: {
            Frame f;
            f.kind = FrameKind::ACK;
            f.src = n;
            f.dst = nd.hs.peer;
            f.channel = nd.hs.channel;
            f.handshake = nd.hs.id;
            transmit(n, f);
            break;
        }
        }
    }

    void send_cfa(NodeId n)
    {
        Node& nd = nodes_[n];
        const SimTime cfa_end = now_ + t_.duration(FrameKind::CFA);
        nd.hs.reservation_until = cfa_end + t_.sifs + t_.duration(FrameKind::CFB) + t_.switch_delay + t_.t_data();
        set_phase(n, FsmPhase::AwaitCFB);
        Frame f;
        f.kind = FrameKind::CFA;
        f.src = n;
        f.dst = nd.hs.peer;
        f.channel = nd.hs.channel;
        f.reservation_until = nd.hs.reservation_until;
        f.handshake = nd.hs.id;
        transmit(n, f);
    }

    /// Continuation of the transmitting node once its frame is off the air.
    void after_own_tx(NodeId n, const Frame& f)
    {
        Node& nd = nodes_[n];
        if (f.kind == FrameKind::INV || nd.hs.id != f.handshake)
            return;
        switch (f.kind) {
        case FrameKind::PRA:
            if (nd.phase == FsmPhase::AwaitPRB) {
                nd.hs.ccap_start = now_ + t_.sifs + t_.duration(FrameKind::PRB);
                set_timer(n, nd.hs.ccap_start + t_.ccap, TimerKind::CcapEnd);
            }
            break;
        case FrameKind::PRB:
            if (nd.phase == FsmPhase::ReceiverCcap) {
                nd.hs.ccap_start = now_;
                set_timer(n, now_ + t_.ccap, TimerKind::CcapEnd);
            }
            break;
        case FrameKind::CFA:
            if (nd.phase == FsmPhase::AwaitCFB)
                set_timer(n, now_ + t_.sifs + t_.duration(FrameKind::CFB) + t_.sifs, TimerKind::CfbTimeout);
            break;
        case FrameKind::CFB:
            if (nd.phase == FsmPhase::Confirming) {
                tune(n, nd.hs.channel, now_ + t_.switch_delay);
                set_phase(n, FsmPhase::DataExchange);
                set_timer(n, now_ + t_.switch_delay + t_.duration(FrameKind::DATA) + t_.sifs,
                          TimerKind::DataTimeout);
            }
            break;
        case FrameKind::DATA:
            if (nd.phase == FsmPhase::DataExchange)
                set_timer(n, now_ + t_.sifs + t_.duration(FrameKind::ACK) + t_.sifs, TimerKind::AckTimeout);
            break;
        case FrameKind::ACK:
            if (nd.phase == FsmPhase::DataExchange) {
                cancel_timer(n);
                return_to_control(n);
                nd.hs = Handshake{};
                set_phase(n, FsmPhase::ControlIdle);
                kick(n);
            }
            break;
        case FrameKind::NCF:
            if (nd.phase == FsmPhase::SendingNcf) {
                if (nd.hs.aborted) {
                    nd.hs = Handshake{};
                    set_phase(n, FsmPhase::ControlIdle);
                    kick(n);
                } else {
                    fail(n);
                }
            }
            break;
        default:
            break;
        }
    }

    void dispatch(const Ev& e)
    {
        switch (e.type) {
        case EvType::TxEnd:
            on_tx_end(e.node, e.a);
            break;
        case EvType::Timer:
            if (e.a == nodes_[e.node].token)
                on_timer(e.node, static_cast<TimerKind>(e.b));
            break;
        case EvType::Arrival:
            on_arrival(e.node);
            break;
        case EvType::InvAttempt:
            on_inv_attempt(e.a);
            break;
        }
    }

    RunResult finish(SimTime end)
    {
        now_ = end;
        RunResult r;
        r.seed = seed_;
        r.variant = cfg_.variant;
        r.n_peers = topo_.peer_count();
        r.n_altruists = topo_.altruist_count();
        r.sim_time = end;
        r.generated = generated_;
        r.delivered = delivered_;
        r.collisions = collisions_;
        r.invs = invs_;
        r.suppressed = suppressed_;
        r.ncfs = ncfs_;
        r.drops = drops_;
        r.frames = frames_;
        r.flows = stats_;
        for (NodeId n = 0; n < nodes_.size(); ++n)
            flush(n);
        r.node_power_W.assign(nodes_.size(), 0.0);
        if (end > 0) {
            for (NodeId n = 0; n < nodes_.size(); ++n) {
                const double p = node_power(ledger_, n);
                r.node_power_W[n] = p;
                r.power_W_aggregate += p;
                double& mx = nodes_[n].kind == NodeKind::Peer ? r.p_max_peer_W : r.p_max_alt_W;
                mx = std::max(mx, p);
            }
        }
        std::vector<std::uint64_t> bits;
        for (const auto& s : stats_)
            bits.push_back(s.delivered_bits);
        r.throughput_bps = aggregate_throughput(bits, end);
        r.ledger = ledger_;
        r.trace = std::move(trace_);
        return r;
    }

    ScenarioConfig cfg_;
    TimingParams t_;
    NetworkTopology topo_;
    std::vector<Flow> flows_;
    std::uint64_t seed_;
    Rng mac_rng_;

    std::vector<Node> nodes_;
    std::vector<double> dist_;
    std::vector<std::vector<NodeId>> rx_nbrs_;
    std::vector<std::deque<Tx>> history_;
    std::vector<std::uint64_t> history_base_;
    SimTime horizon_ = 0;

    EventQueue<Ev> q_;
    SimTime now_ = 0;
    bool stopped_ = false;
    SimTime stop_time_ = 0;

    std::vector<PoissonSource> sources_;
    std::vector<Packet> packets_;
    std::vector<FlowStats> stats_;
    std::vector<InvPlan> inv_plans_;
    std::unordered_set<std::uint64_t> genie_served_;
    std::uint64_t handshake_counter_ = 0;

    EnergyLedger ledger_;
    std::vector<TraceRecord> trace_;
    std::uint64_t generated_ = 0;
    std::uint64_t delivered_ = 0;
    std::uint64_t collisions_ = 0;
    std::uint64_t invs_ = 0;
    std::uint64_t suppressed_ = 0;
    std::uint64_t ncfs_ = 0;
    std::uint64_t drops_ = 0;
    std::uint64_t frames_ = 0;
};

/// One replication: build the network from `seed` and simulate it.
inline RunResult run(const ScenarioConfig& cfg, std::uint64_t seed)
{
    auto sc = build_scenario(cfg, seed);
    Simulator sim(cfg, std::move(sc.topology), std::move(sc.flows), seed);
    auto r = sim.run();
    r.topology_attempts = sc.attempts;
    return r;
}

inline RunResult run(const ScenarioConfig& cfg) { return run(cfg, cfg.seed); }

} // namespace dish
