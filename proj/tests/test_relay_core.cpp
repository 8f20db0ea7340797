#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rtkar/relay.hpp"

using namespace rtkar;
using namespace rtkar::relay;

namespace {

std::string hello(Role role) {
  return encode_envelope({MsgType::HELLO, role, "", 0, 0, ""});
}

std::string position_line(const std::string& sensor, std::uint64_t seq, std::int64_t ms = 0) {
  SensorMessage m{sensor, SensorKind::RTK, seq, ms, GeoPoint(49.5, 6.36 + 1e-6 * double(seq)),
                  FixQuality::FIXED};
  return encode_envelope({MsgType::POSITION, Role::sensor, sensor, seq, ms, encode_kml(m)});
}

std::string command_line(std::uint64_t seq, const Command& cmd) {
  return encode_envelope({MsgType::COMMAND, Role::console, "", seq, 0, encode_command(cmd)});
}

struct Fixture {
  explicit Fixture(RelayConfig config = {}) : core(config, clock.as_clock()) {}

  SessionId join(Role role) {
    const SessionId id = core.open_session();
    core.handle_line(id, hello(role));
    const auto ack = core.drain(id);
    EXPECT_EQ(ack.size(), 1u);
    return id;
  }

  std::vector<Envelope> received(SessionId id) {
    std::vector<Envelope> out;
    for (const auto& line : core.drain(id)) out.push_back(decode_envelope(line));
    return out;
  }

  ManualClock clock;
  RelayCore core;
};

}  // namespace

TEST(RelayHello, AcknowledgesRegistration) {
  Fixture f;
  const SessionId s = f.core.open_session();
  EXPECT_FALSE(f.core.registered(s));
  f.core.handle_line(s, hello(Role::hmd));
  EXPECT_TRUE(f.core.registered(s));
  EXPECT_EQ(f.core.role_of(s), Role::hmd);
  const auto acks = f.received(s);
  ASSERT_EQ(acks.size(), 1u);
  EXPECT_EQ(acks[0].msg_type, MsgType::HELLO);
  EXPECT_EQ(acks[0].payload, "registered");
}

TEST(RelayHello, PositionFirstIsRejectedAndClosed) {
  Fixture f;
  const SessionId hmd = f.join(Role::hmd);
  const SessionId s = f.core.open_session();
  const HandleOutcome out = f.core.handle_line(s, position_line("rtk", 1));
  EXPECT_TRUE(out.close);
  EXPECT_TRUE(f.core.closing(s));
  const auto notice = f.received(s);
  ASSERT_EQ(notice.size(), 1u);
  EXPECT_EQ(notice[0].msg_type, MsgType::NACK);
  EXPECT_NE(notice[0].payload.find("protocol error"), std::string::npos);
  EXPECT_TRUE(f.received(hmd).empty());
  EXPECT_EQ(f.core.metrics().protocol_errors, 1u);
}

TEST(RelayHello, MalformedHelloCloses) {
  Fixture f;
  const SessionId s = f.core.open_session();
  EXPECT_TRUE(f.core.handle_line(s, "{not json").close);
  EXPECT_TRUE(f.core.closing(s));
}

TEST(RelayHello, TimeoutExpiresOnlyUnregistered) {
  Fixture f;
  const SessionId quiet = f.core.open_session();
  const SessionId hmd = f.join(Role::hmd);
  f.core.expire_if_unregistered(quiet);
  f.core.expire_if_unregistered(hmd);
  EXPECT_TRUE(f.core.closing(quiet));
  EXPECT_FALSE(f.core.closing(hmd));
  const auto notice = f.received(quiet);
  ASSERT_EQ(notice.size(), 1u);
  EXPECT_EQ(notice[0].msg_type, MsgType::NACK);
}

TEST(RelayHello, UnregisteredSessionsReceiveNothing) {
  Fixture f;
  const SessionId pending = f.core.open_session();
  const SessionId sensor = f.join(Role::sensor);
  f.core.handle_line(sensor, position_line("rtk", 1));
  EXPECT_TRUE(f.core.drain(pending).empty());
}

TEST(RelayRoles, DisallowedTypesAreNacked) {
  Fixture f;
  const SessionId hmd = f.join(Role::hmd);
  const SessionId console = f.join(Role::console);
  f.core.handle_line(hmd, encode_envelope({MsgType::POSITION, Role::hmd, "x", 1, 0, ""}));
  f.core.handle_line(console, position_line("rtk", 1));
  f.core.handle_line(hmd, command_line(2, PauseCommand{}));
  EXPECT_EQ(f.received(hmd).size(), 2u);
  const auto c = f.received(console);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].msg_type, MsgType::NACK);
  EXPECT_EQ(f.core.metrics().nacks, 3u);
}

TEST(RelayRoles, SecondHelloIsNacked) {
  Fixture f;
  const SessionId hmd = f.join(Role::hmd);
  f.core.handle_line(hmd, hello(Role::console));
  EXPECT_EQ(f.core.role_of(hmd), Role::hmd);
  EXPECT_EQ(f.received(hmd).at(0).msg_type, MsgType::NACK);
}

TEST(RelayIngest, BroadcastIsByteIdentical) {
  Fixture f;
  const SessionId sensor = f.join(Role::sensor);
  const SessionId hmd = f.join(Role::hmd);
  const std::string line = position_line("rtk", 1, 42);
  const HandleOutcome out = f.core.handle_line(sensor, line);
  EXPECT_EQ(out.ingest, IngestResult::accepted);
  const auto got = f.core.drain(hmd);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], line);
  EXPECT_EQ(decode_envelope(got[0]).payload, decode_envelope(line).payload);
  EXPECT_TRUE(f.core.drain(sensor).empty());
}

TEST(RelayIngest, TwoHmdsBothReceive) {
  Fixture f;
  const SessionId sensor = f.join(Role::sensor);
  const SessionId a = f.join(Role::hmd);
  const SessionId b = f.join(Role::hmd);
  for (std::uint64_t seq = 1; seq <= 5; ++seq) {
    f.core.handle_line(sensor, position_line("rtk", seq));
    f.clock.advance(100);
  }
  EXPECT_EQ(f.core.drain(a), f.core.drain(b));
  f.core.handle_line(sensor, position_line("rtk", 6));
  EXPECT_EQ(f.core.drain(a).size(), 1u);
}

TEST(RelayIngest, UndecodablePayloadIsNackedAndCounted) {
  Fixture f;
  const SessionId sensor = f.join(Role::sensor);
  const SessionId hmd = f.join(Role::hmd);
  const auto out = f.core.handle_line(
      sensor, encode_envelope({MsgType::POSITION, Role::sensor, "rtk", 1, 0, "<kml>"}));
  EXPECT_EQ(out.ingest, IngestResult::rejected);
  EXPECT_EQ(f.received(sensor).at(0).msg_type, MsgType::NACK);
  EXPECT_TRUE(f.core.drain(hmd).empty());
  EXPECT_EQ(f.core.metrics().sensors.at("rtk").rejected, 1u);
}

TEST(RelayIngest, SeqMustIncrease) {
  Fixture f;
  const SessionId sensor = f.join(Role::sensor);
  EXPECT_EQ(f.core.handle_line(sensor, position_line("rtk", 5)).ingest, IngestResult::accepted);
  f.clock.advance(200);
  EXPECT_EQ(f.core.handle_line(sensor, position_line("rtk", 5)).ingest, IngestResult::rejected);
  EXPECT_EQ(f.core.handle_line(sensor, position_line("rtk", 3)).ingest, IngestResult::rejected);
  EXPECT_EQ(f.core.handle_line(sensor, position_line("rtk", 6)).ingest, IngestResult::accepted);
}

TEST(RelayThrottle, HundredHertzForOneSecond) {
  Fixture f;
  const SessionId sensor = f.join(Role::sensor);
  const SessionId hmd = f.join(Role::hmd);
  std::vector<std::int64_t> accepted_at;
  for (std::uint64_t i = 0; i < 100; ++i) {
    f.clock.set(static_cast<std::int64_t>(i) * 10);
    if (f.core.handle_line(sensor, position_line("rtk", i + 1)).ingest == IngestResult::accepted) {
      accepted_at.push_back(f.clock.now());
    }
  }
  EXPECT_GE(accepted_at.size(), 9u);
  EXPECT_LE(accepted_at.size(), 11u);
  for (std::size_t i = 1; i < accepted_at.size(); ++i) {
    EXPECT_GE(accepted_at[i] - accepted_at[i - 1], 100);
  }
  EXPECT_EQ(f.core.drain(hmd).size(), accepted_at.size());
  const auto m = f.core.metrics().sensors.at("rtk");
  EXPECT_EQ(m.accepted + m.dropped, 100u);
  EXPECT_EQ(m.dropped, 100u - accepted_at.size());
}

TEST(RelayThrottle, ZeroIntervalAcceptsAll) {
  Fixture f(RelayConfig{ThrottlePolicy{0}, 256, 5000});
  const SessionId sensor = f.join(Role::sensor);
  for (std::uint64_t i = 1; i <= 100; ++i) {
    EXPECT_EQ(f.core.handle_line(sensor, position_line("rtk", i)).ingest, IngestResult::accepted);
  }
}

TEST(RelayThrottle, SoundUnderRandomSchedules) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::int64_t> gap(0, 150), interval(1, 300);
  std::uniform_int_distribution<int> which(0, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t min_interval = interval(rng);
    Fixture f(RelayConfig{ThrottlePolicy{min_interval}, 1 << 20, 5000});
    const SessionId sensor = f.join(Role::sensor);
    std::map<std::string, std::vector<std::int64_t>> accepted;
    std::map<std::string, std::uint64_t> seq;
    for (int i = 0; i < 500; ++i) {
      f.clock.advance(gap(rng));
      const std::string id = "s" + std::to_string(which(rng));
      if (f.core.handle_line(sensor, position_line(id, ++seq[id])).ingest ==
          IngestResult::accepted) {
        accepted[id].push_back(f.clock.now());
      }
    }
    for (const auto& [id, times] : accepted) {
      for (std::size_t i = 1; i < times.size(); ++i) {
        ASSERT_GE(times[i] - times[i - 1], min_interval) << id;
      }
    }
  }
}

TEST(RelayBroadcast, SubscriberCounts) {
  Fixture f;
  EXPECT_EQ(f.core.broadcast("x"), 0u);
  f.join(Role::sensor);
  for (int i = 0; i < 2; ++i) f.join(Role::hmd);
  f.join(Role::console);
  EXPECT_EQ(f.core.broadcast("x"), 3u);
}

TEST(RelayBroadcast, PerSensorFifoUnderRandomInterleaving) {
  Fixture f(RelayConfig{ThrottlePolicy{0}, 1 << 20, 5000});
  std::mt19937_64 rng(2718);
  const std::vector<std::string> ids = {"A", "B", "C"};
  std::vector<SessionId> sensors;
  for (std::size_t i = 0; i < ids.size(); ++i) sensors.push_back(f.join(Role::sensor));
  std::vector<SessionId> subs = {f.join(Role::hmd), f.join(Role::hmd), f.join(Role::console)};

  std::map<std::string, std::uint64_t> next;
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  std::uniform_int_distribution<int> drain_now(0, 9);
  std::vector<std::map<std::string, std::uint64_t>> last(subs.size());
  std::vector<std::size_t> seen(subs.size(), 0);
  const auto check = [&](std::size_t k) {
    for (const auto& env : f.received(subs[k])) {
      ASSERT_EQ(env.msg_type, MsgType::POSITION);
      ASSERT_GT(env.seq, last[k][env.sensor_id]);
      last[k][env.sensor_id] = env.seq;
      ++seen[k];
    }
  };
  for (int i = 0; i < 10000; ++i) {
    const std::size_t s = pick(rng);
    f.core.handle_line(sensors[s], position_line(ids[s], ++next[ids[s]]));
    for (std::size_t k = 0; k < subs.size(); ++k) {
      if (drain_now(rng) == 0) check(k);
    }
  }
  for (std::size_t k = 0; k < subs.size(); ++k) {
    check(k);
    EXPECT_EQ(seen[k], 10000u);
  }
}

TEST(RelayBroadcast, SlowConsumerIsEvicted) {
  Fixture f(RelayConfig{ThrottlePolicy{0}, 8, 5000});
  const SessionId sensor = f.join(Role::sensor);
  const SessionId slow = f.join(Role::hmd);
  const SessionId fast = f.join(Role::hmd);
  for (std::uint64_t i = 1; i <= 20; ++i) {
    f.core.handle_line(sensor, position_line("rtk", i));
    f.core.drain(fast);
  }
  EXPECT_TRUE(f.core.closing(slow));
  EXPECT_FALSE(f.core.closing(fast));
  EXPECT_EQ(f.core.metrics().evicted_sessions, 1u);
  f.core.handle_line(sensor, position_line("rtk", 21));
  EXPECT_EQ(f.core.drain(fast).size(), 1u);
}

TEST(RelayBroadcast, DisconnectDoesNotAffectOthers) {
  Fixture f(RelayConfig{ThrottlePolicy{0}, 256, 5000});
  const SessionId sensor = f.join(Role::sensor);
  std::vector<SessionId> subs;
  for (int i = 0; i < 4; ++i) subs.push_back(f.join(Role::hmd));
  for (std::uint64_t i = 1; i <= 10; ++i) {
    f.core.handle_line(sensor, position_line("rtk", i));
    if (i == 5) {
      f.core.close_session(subs[1]);
      f.core.close_session(subs[3]);
    }
  }
  EXPECT_EQ(f.core.drain(subs[0]).size(), 10u);
  EXPECT_EQ(f.core.drain(subs[2]).size(), 10u);
  EXPECT_TRUE(f.core.drain(subs[1]).empty());
}

TEST(RelayCommand, PauseAndDriveReachSink) {
  Fixture f;
  std::vector<Command> sink;
  f.core.set_command_sink([&](const Command& c) { sink.push_back(c); });
  const SessionId console = f.join(Role::console);
  const SessionId sensor = f.join(Role::sensor);
  const SessionId hmd = f.join(Role::hmd);
  f.core.handle_line(console, command_line(1, PauseCommand{}));
  f.core.handle_line(console, command_line(2, DriveCommand{0.0, 1.0}));
  ASSERT_EQ(sink.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<PauseCommand>(sink[0]));
  EXPECT_EQ(std::get<DriveCommand>(sink[1]).speed_mps, 1.0);
  EXPECT_EQ(f.received(sensor).size(), 2u);
  EXPECT_TRUE(f.received(hmd).empty());
}

TEST(RelayCommand, MarkSampleReachesHmd) {
  Fixture f;
  const SessionId console = f.join(Role::console);
  const SessionId hmd = f.join(Role::hmd);
  f.core.handle_line(console, command_line(1, MarkSampleCommand{"L3"}));
  const auto got = f.received(hmd);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].msg_type, MsgType::SAMPLE_MARK);
  EXPECT_EQ(nlohmann::json::parse(got[0].payload).at("label"), "L3");
}

TEST(RelayCommand, CalibrateReachesHmd) {
  Fixture f;
  const SessionId console = f.join(Role::console);
  const SessionId hmd = f.join(Role::hmd);
  f.core.handle_line(console, command_line(1, CalibrateCommand{}));
  const auto got = f.received(hmd);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].msg_type, MsgType::COMMAND);
}

TEST(RelayCommand, UnknownCommandIsNacked) {
  Fixture f;
  int calls = 0;
  f.core.set_command_sink([&](const Command&) { ++calls; });
  const SessionId console = f.join(Role::console);
  f.core.handle_line(console,
                     encode_envelope({MsgType::COMMAND, Role::console, "", 1, 0,
                                      R"({"cmd":"self_destruct"})"}));
  const auto got = f.received(console);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].msg_type, MsgType::NACK);
  EXPECT_NE(got[0].payload.find("self_destruct"), std::string::npos);
  EXPECT_EQ(calls, 0);
}

TEST(RelaySampleMark, HmdResultGoesToConsole) {
  Fixture f;
  const SessionId console = f.join(Role::console);
  const SessionId hmd = f.join(Role::hmd);
  f.core.handle_line(hmd, encode_envelope({MsgType::SAMPLE_MARK, Role::hmd, "", 1, 0,
                                           R"({"label":"L1","error_m":0.7})"}));
  EXPECT_EQ(f.received(console).size(), 1u);
  EXPECT_TRUE(f.received(hmd).empty());
}

TEST(RelayTelemetry, HmdStateGoesToConsoles) {
  Fixture f;
  const SessionId console = f.join(Role::console);
  const SessionId hmd = f.join(Role::hmd);
  const SessionId other = f.join(Role::hmd);
  const std::string line =
      encode_envelope({MsgType::METRICS, Role::hmd, "", 1, 0, R"({"kind":"state"})"});
  f.core.handle_line(hmd, line);
  EXPECT_EQ(f.core.drain(console), std::vector<std::string>{line});
  EXPECT_TRUE(f.core.drain(hmd).empty());
  EXPECT_TRUE(f.core.drain(other).empty());
  // Without a payload it is a request for relay counters.
  f.core.handle_line(hmd, encode_envelope({MsgType::METRICS, Role::hmd, "", 2, 0, ""}));
  EXPECT_EQ(f.received(hmd).at(0).msg_type, MsgType::METRICS);
  EXPECT_TRUE(f.core.drain(console).empty());
}

TEST(RelayMetrics, FreshServerIsZero) {
  RelayCore core;
  const Metrics m = core.metrics();
  EXPECT_TRUE(m.sensors.empty());
  EXPECT_TRUE(m.sessions.empty());
  EXPECT_EQ(m.latency.count, 0u);
  EXPECT_EQ(m.nacks, 0u);
  EXPECT_EQ(m.evicted_sessions, 0u);
  EXPECT_EQ(m.protocol_errors, 0u);
}

TEST(RelayMetrics, HundredSentTenAccepted) {
  Fixture f;
  const SessionId sensor = f.join(Role::sensor);
  for (std::uint64_t i = 0; i < 100; ++i) {
    f.clock.set(static_cast<std::int64_t>(i) * 10);
    f.core.handle_line(sensor, position_line("rtk", i + 1));
  }
  const auto c = f.core.metrics().sensors.at("rtk");
  EXPECT_EQ(c.accepted, 10u);
  EXPECT_EQ(c.dropped, 90u);
}

TEST(RelayMetrics, QueueDepthAndLatency) {
  Fixture f;
  const SessionId sensor = f.join(Role::sensor);
  const SessionId hmd = f.join(Role::hmd);
  f.core.handle_line(sensor, position_line("rtk", 1));
  const Metrics before = f.core.metrics();
  const auto it = std::find_if(before.sessions.begin(), before.sessions.end(),
                               [&](const SessionInfo& s) { return s.id == hmd; });
  ASSERT_NE(it, before.sessions.end());
  EXPECT_EQ(it->queue_depth, 1u);
  const auto latency_before = before.latency.count;
  f.core.drain(hmd);
  EXPECT_EQ(f.core.metrics().latency.count, latency_before + 1);
}

TEST(RelayMetrics, RequestedByConsole) {
  Fixture f;
  const SessionId console = f.join(Role::console);
  f.core.handle_line(console, encode_envelope({MsgType::METRICS, Role::console, "", 1, 0, ""}));
  const auto got = f.received(console);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].msg_type, MsgType::METRICS);
  const auto j = nlohmann::json::parse(got[0].payload);
  EXPECT_TRUE(j.contains("sensors"));
  EXPECT_TRUE(j.contains("latency"));
  EXPECT_EQ(f.core.broadcast_metrics(), 1u);
}
