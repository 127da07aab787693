#include <gtest/gtest.h>

#include <map>

#include "dish/protocol.hpp"

using namespace dish;

namespace {

Frame frame(FrameKind k, NodeId src, NodeId dst, ChannelId ch, SimTime until = 0)
{
    Frame f;
    f.kind = k;
    f.src = src;
    f.dst = dst;
    f.channel = ch;
    f.reservation_until = until;
    return f;
}

} // namespace

TEST(Timing, FrameDurations)
{
    const TimingParams p;
    EXPECT_EQ(p.duration(FrameKind::PRA), 280);
    EXPECT_EQ(p.duration(FrameKind::INV), 360);
    EXPECT_EQ(p.duration(FrameKind::ACK), 232);
    EXPECT_EQ(p.duration(FrameKind::DATA), 16504);
    EXPECT_EQ(p.t_payload(), 16384);
    EXPECT_EQ(p.t_ctrl(), 1225);
    EXPECT_EQ(p.t_data(), 16746);
}

TEST(Timing, TimelineSumsToControlAndDataPhases)
{
    const TimingParams p;
    const auto tl = handshake_timeline(p);
    SimTime ctrl = 0, data = 0, t = 0;
    for (const auto& ph : tl) {
        EXPECT_EQ(ph.start, t);
        t += ph.duration;
        (ph.on_data_channel ? data : ctrl) += ph.duration;
    }
    EXPECT_EQ(ctrl, p.t_ctrl());
    EXPECT_EQ(data, p.switch_delay + p.t_data());
    EXPECT_EQ(tl.front().name, "DIFS");
    EXPECT_EQ(tl.back().name, "ACK");
}

TEST(Timing, AirtimeRoundsUp)
{
    TimingParams p;
    p.bandwidth_bps = 3e6;
    EXPECT_EQ(p.airtime(1), 3);  // 8/3 us
    EXPECT_EQ(p.airtime(3), 8);
}

TEST(UsageTable, CfaAndCfbInsertSamePair)
{
    ChannelUsageTable t;
    update_table(t, frame(FrameKind::CFA, 1, 2, 3, 500), 0);
    update_table(t, frame(FrameKind::CFB, 2, 1, 3, 520), 0);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t.entries()[0], (UsageEntry{3, 1, 2, 520}));
}

TEST(UsageTable, NcfWithdrawsReservation)
{
    ChannelUsageTable t;
    update_table(t, frame(FrameKind::CFA, 1, 2, 3, 500), 0);
    update_table(t, frame(FrameKind::CFA, 4, 5, 2, 500), 0);
    auto ncf = frame(FrameKind::NCF, 2, 1, 3);
    ncf.usage = UsageEntry{3, 1, 2, 500};
    update_table(t, ncf, 10);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t.entries()[0].sender, 4u);
    update_table(t, frame(FrameKind::NCF, 4, 5, 2), 10);
    EXPECT_TRUE(t.empty());
}

TEST(UsageTable, PruneAtRelease)
{
    ChannelUsageTable t;
    t.upsert({1, 1, 2, 100});
    t.upsert({2, 3, 4, 200});
    EXPECT_EQ(t.free_channels(3, 50), (std::vector<ChannelId>{3}));
    EXPECT_EQ(t.earliest_release(50), 100);
    t.prune(100);
    EXPECT_EQ(t.size(), 1u);
    EXPECT_EQ(t.free_channels(3, 100), (std::vector<ChannelId>{1, 3}));
    EXPECT_EQ(t.earliest_release(300), kNever);
}

TEST(UsageTable, OtherFramesOnlyPrune)
{
    ChannelUsageTable t;
    t.upsert({1, 1, 2, 100});
    const auto before = t;
    EXPECT_EQ(updated_table(t, frame(FrameKind::PRA, 5, 6, 1), 50), before);
    EXPECT_TRUE(updated_table(t, frame(FrameKind::PRB, 6, 5, 1), 150).empty());
}

TEST(Mcc, ChannelConflictOnPra)
{
    ChannelUsageTable t;
    t.upsert({2, 7, 8, 400});
    const auto p = detect_mcc(t, frame(FrameKind::PRA, 1, 2, 2), 100);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->kind, MccProblem::Kind::ChannelConflict);
    EXPECT_EQ(p->channel, 2u);
    EXPECT_EQ(p->blocking.release, 400);
    EXPECT_FALSE(detect_mcc(t, frame(FrameKind::PRA, 1, 2, 3), 100));
    EXPECT_FALSE(detect_mcc(t, frame(FrameKind::PRA, 1, 2, 2), 400));
}

TEST(Mcc, DeafDestinationTakesPrecedence)
{
    ChannelUsageTable t;
    t.upsert({2, 7, 8, 400});
    t.upsert({4, 2, 9, 300});
    const auto p = detect_mcc(t, frame(FrameKind::PRA, 1, 2, 2), 100);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->kind, MccProblem::Kind::DeafTerminal);
    EXPECT_EQ(p->target, 2u);
    EXPECT_EQ(p->blocking, (UsageEntry{4, 2, 9, 300}));
}

TEST(Mcc, OwnReservationIsNotAProblem)
{
    ChannelUsageTable t;
    t.upsert({2, 1, 2, 400});
    EXPECT_FALSE(detect_mcc(t, frame(FrameKind::PRA, 1, 2, 2), 100));
    EXPECT_FALSE(detect_mcc(t, frame(FrameKind::PRB, 2, 1, 2), 100));
}

TEST(Mcc, PrbChecksConfirmedChannel)
{
    ChannelUsageTable t;
    t.upsert({3, 7, 8, 400});
    const auto p = detect_mcc(t, frame(FrameKind::PRB, 2, 1, 3), 100);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->kind, MccProblem::Kind::ChannelConflict);
    EXPECT_FALSE(detect_mcc(t, frame(FrameKind::CFA, 1, 2, 3), 100));
}

TEST(Variants, RoundTripNames)
{
    for (auto v : kAllVariants)
        EXPECT_EQ(parse_variant(to_string(v)), v);
    EXPECT_EQ(parse_variant("genie"), ProtocolVariant::GenieInSitu);
    EXPECT_THROW(parse_variant("dish"), std::invalid_argument);
}

TEST(Variants, CooperationPolicy)
{
    Rng rng(1);
    const MccProblem p;
    using V = ProtocolVariant;
    EXPECT_TRUE(cooperation_policy(V::DishP, NodeKind::Peer, p, rng, 35));
    EXPECT_FALSE(cooperation_policy(V::NonDish, NodeKind::Peer, p, rng, 35));
    EXPECT_FALSE(cooperation_policy(V::NonDishPsm, NodeKind::Peer, p, rng, 35));
    const auto g = cooperation_policy(V::GenieInSitu, NodeKind::Peer, p, rng, 35);
    ASSERT_TRUE(g);
    EXPECT_TRUE(g->genie_gated);
    EXPECT_FALSE(cooperation_policy(V::Altruistic, NodeKind::Peer, p, rng, 35));
    EXPECT_TRUE(cooperation_policy(V::Altruistic, NodeKind::Altruist, p, rng, 35));
    EXPECT_THROW(cooperation_policy(V::DishP, NodeKind::Altruist, p, rng, 35), std::invalid_argument);
}

TEST(Variants, InvWaitInsideCcap)
{
    Rng rng(9);
    std::map<SimTime, int> seen;
    for (int k = 0; k < 5000; ++k) {
        const auto a = cooperation_policy(ProtocolVariant::DishP, NodeKind::Peer, {}, rng, 35);
        ASSERT_TRUE(a);
        EXPECT_GE(a->wait, 0);
        EXPECT_LT(a->wait, 35);
        ++seen[a->wait];
    }
    EXPECT_EQ(seen.size(), 35u);
}

TEST(Variants, PowerSaveFlags)
{
    using V = ProtocolVariant;
    EXPECT_TRUE(sleeps_when_idle(V::NonDishPsm, NodeKind::Peer));
    EXPECT_TRUE(sleeps_when_idle(V::Altruistic, NodeKind::Peer));
    EXPECT_FALSE(sleeps_when_idle(V::Altruistic, NodeKind::Altruist));
    EXPECT_FALSE(sleeps_when_idle(V::GenieInSitu, NodeKind::Peer));
    EXPECT_TRUE(billed_asleep_when_idle(V::GenieInSitu, NodeKind::Peer));
    EXPECT_TRUE(gathers_information(V::GenieInSitu, NodeKind::Peer));
    EXPECT_FALSE(gathers_information(V::Altruistic, NodeKind::Peer));
    EXPECT_TRUE(gathers_information(V::Altruistic, NodeKind::Altruist));
}

TEST(Genie, LatestReleaseWins)
{
    auto det = [](NodeId n, SimTime rel) {
        Detection d;
        d.node = n;
        d.problem.blocking.release = rel;
        return d;
    };
    const std::vector<Detection> ds{det(4, 80), det(7, 120), det(2, 95)};
    EXPECT_EQ(best_neighbor(ds), 7u);
    const std::vector<Detection> tie{det(9, 120), det(3, 120)};
    EXPECT_EQ(best_neighbor(tie), 3u);
    EXPECT_FALSE(best_neighbor({}));
}

TEST(InvReaction, DeafPeerWaitsForRelease)
{
    Frame inv = frame(FrameKind::INV, 9, kBroadcast, 2);
    inv.handshake = 5;
    inv.usage = UsageEntry{2, 3, 8, 150};
    const auto r = on_inv_received(HandshakeRole::Sender, FsmPhase::AwaitPRB, inv, 5, 3, 100, 999);
    EXPECT_EQ(r.action, InvResponse::Action::Abort);
    EXPECT_EQ(r.backoff_until - 100, 50);
    EXPECT_FALSE(r.suppress_cfb);
    EXPECT_EQ(r.learned, inv.usage);
}

TEST(InvReaction, ChannelConflictRetriesNow)
{
    Frame inv = frame(FrameKind::INV, 9, kBroadcast, 2);
    inv.handshake = 5;
    inv.usage = UsageEntry{2, 6, 7, 150};
    const auto r = on_inv_received(HandshakeRole::Receiver, FsmPhase::ReceiverCcap, inv, 5, 3, 100, 999);
    EXPECT_EQ(r.action, InvResponse::Action::Abort);
    EXPECT_EQ(r.backoff_until, 100);
    EXPECT_TRUE(r.suppress_cfb);
}

TEST(InvReaction, UndecodableUsesEstimate)
{
    const auto r = on_inv_received(HandshakeRole::Sender, FsmPhase::AwaitInv, std::nullopt, 5, 3, 100, 999);
    EXPECT_EQ(r.action, InvResponse::Action::Abort);
    EXPECT_EQ(r.backoff_until, 1099);
    EXPECT_FALSE(r.learned);
}

TEST(InvReaction, IgnoredOutsideSensitivePhases)
{
    for (auto ph : {FsmPhase::ControlIdle, FsmPhase::Backoff, FsmPhase::Confirming, FsmPhase::DataExchange})
        EXPECT_EQ(on_inv_received(HandshakeRole::Sender, ph, std::nullopt, 5, 3, 100, 999).action,
                  InvResponse::Action::Ignore);
}

TEST(InvReaction, ForeignInv)
{
    Frame inv = frame(FrameKind::INV, 9, kBroadcast, 2);
    inv.handshake = 6;
    inv.usage = UsageEntry{2, 6, 7, 150};
    EXPECT_EQ(on_inv_received(HandshakeRole::Sender, FsmPhase::AwaitPRB, inv, 5, 3, 100, 999).action,
              InvResponse::Action::Ignore);
    const auto r = on_inv_received(HandshakeRole::Sender, FsmPhase::AwaitInv, inv, 5, 3, 100, 999);
    EXPECT_EQ(r.action, InvResponse::Action::Abort);
    EXPECT_EQ(r.backoff_until, 100);
}

TEST(ChannelSelection, UniformOverFreeChannels)
{
    ChannelUsageTable t;
    t.upsert({1, 1, 2, 1000});
    t.upsert({2, 3, 4, 1000});
    Rng rng(3);
    std::map<ChannelId, int> hist;
    const int n = 30000;
    for (int k = 0; k < n; ++k) {
        const auto c = select_channel(ProtocolVariant::DishP, t, 5, 0, rng);
        ASSERT_TRUE(c.channel);
        ++hist[*c.channel];
    }
    ASSERT_EQ(hist.size(), 3u);
    for (ChannelId c : {3u, 4u, 5u})
        EXPECT_NEAR(hist[c] / double(n), 1.0 / 3, 0.015);
}

TEST(ChannelSelection, DefersWhenAllBusy)
{
    ChannelUsageTable t;
    for (ChannelId c = 1; c <= 3; ++c)
        t.upsert({c, c, c + 10, 100 * static_cast<SimTime>(c)});
    Rng rng(1);
    const auto c = select_channel(ProtocolVariant::NonDish, t, 3, 0, rng);
    EXPECT_FALSE(c.channel);
    EXPECT_EQ(c.defer_until, 100);
    // Without knowledge every channel is fair game.
    const auto p = select_channel(ProtocolVariant::NonDishPsm, t, 3, 0, rng);
    ASSERT_TRUE(p.channel);
    EXPECT_GE(*p.channel, 1u);
    EXPECT_LE(*p.channel, 3u);
    EXPECT_THROW(select_channel(ProtocolVariant::DishP, t, 0, 0, rng), std::invalid_argument);
}

TEST(ChannelSelection, ReceiverOverridesBusyProposal)
{
    ChannelUsageTable t;
    t.upsert({2, 7, 8, 1000});
    Rng rng(2);
    EXPECT_EQ(receiver_channel(ProtocolVariant::DishP, t, 3, 3, 0, rng), 3u);
    const auto c = receiver_channel(ProtocolVariant::DishP, t, 2, 3, 0, rng);
    ASSERT_TRUE(c);
    EXPECT_NE(*c, 2u);
    t.upsert({1, 5, 6, 1000});
    t.upsert({3, 5, 6, 1000});
    EXPECT_FALSE(receiver_channel(ProtocolVariant::DishP, t, 2, 3, 0, rng));
}

TEST(RadioPolicy, BilledStates)
{
    using V = ProtocolVariant;
    EXPECT_EQ(psm_radio_policy(V::NonDishPsm, NodeKind::Peer, {}), RadioState::SLEEP);
    EXPECT_EQ(psm_radio_policy(V::NonDish, NodeKind::Peer, {}), RadioState::IDLE);
    EXPECT_EQ(psm_radio_policy(V::GenieInSitu, NodeKind::Peer, {false, false, true}), RadioState::SLEEP);
    EXPECT_EQ(psm_radio_policy(V::Altruistic, NodeKind::Altruist, {false, false, true}), RadioState::RX);
    EXPECT_EQ(psm_radio_policy(V::NonDishPsm, NodeKind::Peer, {true, false, false}), RadioState::IDLE);
    EXPECT_EQ(psm_radio_policy(V::NonDishPsm, NodeKind::Peer, {true, true, false}), RadioState::TX);
}
