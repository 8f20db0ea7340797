#ifndef RTKAR_RELAY_HPP
#define RTKAR_RELAY_HPP

// Transport-agnostic relay: session registry, HELLO-first protocol checks,
// per-sensor refresh throttle, fan-out through bounded per-session queues,
// command routing and metrics.
//
// All shared state sits behind one mutex. Transports own the sockets: they
// feed complete lines into handle_line() and drain each session's queue from
// their own writer, so broadcasting never waits on a slow socket. The wake
// callback given to open_session() runs under the core lock and must only
// schedule work.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rtkar/command.hpp"
#include "rtkar/envelope.hpp"
#include "rtkar/error.hpp"
#include "rtkar/kml.hpp"

namespace rtkar::relay {

using SessionId = std::uint64_t;
using SteadyTime = std::chrono::steady_clock::time_point;

/// Millisecond clock used for throttling. Must be monotone.
using Clock = std::function<std::int64_t()>;

inline Clock steady_clock_ms() {
  return [] {
    using namespace std::chrono;
    return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
  };
}

/// Hand-driven clock for tests and the in-process harness.
class ManualClock {
 public:
  explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}
  void set(std::int64_t ms) { now_.store(ms); }
  void advance(std::int64_t ms) { now_.fetch_add(ms); }
  std::int64_t now() const { return now_.load(); }
  Clock as_clock() const {
    return [this] { return now_.load(); };
  }

 private:
  std::atomic<std::int64_t> now_;
};

struct ThrottlePolicy {
  std::int64_t min_interval_ms = 100;
};

struct RelayConfig {
  ThrottlePolicy throttle;
  std::size_t queue_bound = 256;
  std::int64_t hello_timeout_ms = 5000;
};

enum class IngestResult { accepted, dropped, rejected };

struct SensorCounters {
  std::uint64_t accepted = 0;
  std::uint64_t dropped = 0;
  std::uint64_t rejected = 0;
};

struct SessionInfo {
  SessionId id = 0;
  std::optional<Role> role;
  std::size_t queue_depth = 0;
};

struct LatencyStats {
  std::uint64_t count = 0;
  double p50_us = 0.0;
  double p99_us = 0.0;
  double max_us = 0.0;
  /// Upper bounds (microseconds) of the histogram buckets; last is open.
  std::vector<double> bucket_upper_us;
  std::vector<std::uint64_t> bucket_counts;
};

struct Metrics {
  std::map<std::string, SensorCounters> sensors;
  std::vector<SessionInfo> sessions;
  LatencyStats latency;
  std::uint64_t nacks = 0;
  std::uint64_t evicted_sessions = 0;
  std::uint64_t protocol_errors = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["sensors"] = nlohmann::json::object();
    for (const auto& [id, c] : sensors) {
      j["sensors"][id] = {{"accepted", c.accepted}, {"dropped", c.dropped}, {"rejected", c.rejected}};
    }
    j["sessions"] = nlohmann::json::array();
    for (const auto& s : sessions) {
      j["sessions"].push_back({{"id", s.id},
                               {"role", s.role ? std::string(to_string(*s.role)) : "unregistered"},
                               {"queue_depth", s.queue_depth}});
    }
    j["latency"] = {{"count", latency.count},     {"p50_us", latency.p50_us},
                    {"p99_us", latency.p99_us},   {"max_us", latency.max_us},
                    {"bucket_upper_us", latency.bucket_upper_us},
                    {"bucket_counts", latency.bucket_counts}};
    j["nacks"] = nacks;
    j["evicted_sessions"] = evicted_sessions;
    j["protocol_errors"] = protocol_errors;
    return j;
  }
};

struct OutboundLine {
  std::string line;
  SteadyTime enqueued;
};

struct HandleOutcome {
  /// Transport should flush the queue and then close the connection.
  bool close = false;
  std::optional<IngestResult> ingest;
};

class RelayCore {
 public:
  explicit RelayCore(RelayConfig config = {}, Clock clock = steady_clock_ms())
      : config_(config), clock_(std::move(clock)) {
    if (config_.throttle.min_interval_ms < 0) {
      throw InvalidArgument("RelayCore: min_interval_ms must be >= 0");
    }
    if (config_.queue_bound == 0) throw InvalidArgument("RelayCore: queue_bound must be >= 1");
  }

  const RelayConfig& config() const { return config_; }

  /// Invoked for every routed COMMAND; stands in for the link to an
  /// in-process trajectory simulator.
  void set_command_sink(std::function<void(const Command&)> sink) {
    std::lock_guard lock(mu_);
    command_sink_ = std::move(sink);
  }

  SessionId open_session(std::function<void()> wake = {}) {
    std::lock_guard lock(mu_);
    const SessionId id = ++next_id_;
    Session& s = sessions_[id];
    s.wake = std::move(wake);
    s.opened_ms = clock_();
    return id;
  }

  void close_session(SessionId id) {
    std::lock_guard lock(mu_);
    sessions_.erase(id);
  }

  bool registered(SessionId id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it != sessions_.end() && it->second.role.has_value();
  }

  std::optional<Role> role_of(SessionId id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return std::nullopt;
    return it->second.role;
  }

  /// True once the session should be torn down (protocol error or eviction).
  bool closing(SessionId id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() || it->second.closing;
  }

  /// Called by the transport when no HELLO arrived in time.
  void expire_if_unregistered(SessionId id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end() || it->second.role) return;
    ++metrics_.protocol_errors;
    nack_locked(it->second, "protocol error: no HELLO within " +
                                std::to_string(config_.hello_timeout_ms) + " ms");
    it->second.closing = true;
  }

  HandleOutcome handle_line(SessionId id, std::string_view line) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return {true, std::nullopt};
    Session& s = it->second;
    if (s.closing) return {true, std::nullopt};

    Envelope env;
    try {
      env = decode_envelope(line);
    } catch (const ParseError& e) {
      if (!s.role) return protocol_error_locked(s, std::string("malformed HELLO: ") + e.what());
      nack_locked(s, std::string("malformed envelope: ") + e.what());
      return {};
    }

    if (!s.role) {
      if (env.msg_type != MsgType::HELLO) {
        return protocol_error_locked(s, "protocol error: first message must be HELLO, got " +
                                            std::string(to_string(env.msg_type)));
      }
      s.role = env.role;
      Envelope ack{MsgType::HELLO, env.role, env.sensor_id, 0, clock_(), "registered"};
      enqueue_locked(s, encode_envelope(ack));
      return {};
    }

    if (env.msg_type == MsgType::HELLO) {
      nack_locked(s, "already registered");
      return {};
    }
    if (env.role != *s.role || !allowed(*s.role, env.msg_type)) {
      nack_locked(s, std::string(to_string(env.msg_type)) + " not allowed for role " +
                         std::string(to_string(*s.role)));
      return {};
    }
    const std::string stream = *s.role == Role::sensor
                                   ? "sensor/" + env.sensor_id
                                   : std::string(to_string(*s.role)) + "/" + std::to_string(id);
    if (auto last = last_seq_.find(stream); last != last_seq_.end() && env.seq <= last->second) {
      if (env.msg_type == MsgType::POSITION) ++metrics_.sensors[env.sensor_id].rejected;
      nack_locked(s, "seq " + std::to_string(env.seq) + " not greater than " +
                         std::to_string(last->second));
      if (env.msg_type == MsgType::POSITION) return {false, IngestResult::rejected};
      return {};
    }

    switch (env.msg_type) {
      case MsgType::POSITION: {
        const IngestResult r = ingest_locked(s, env, line);
        if (r != IngestResult::rejected) last_seq_[stream] = env.seq;
        return {false, r};
      }
      case MsgType::COMMAND:
        if (route_locked(s, env)) last_seq_[stream] = env.seq;
        return {};
      case MsgType::SAMPLE_MARK:
        last_seq_[stream] = env.seq;
        if (*s.role == Role::console) {
          broadcast_locked(std::string(trim_newline(line)), {Role::hmd, Role::console});
        } else {
          broadcast_locked(std::string(trim_newline(line)), {Role::console});
        }
        return {};
      case MsgType::METRICS:
        last_seq_[stream] = env.seq;
        // An hmd with a payload publishes its state to consoles; an empty
        // payload asks for the relay's own counters.
        if (*s.role == Role::hmd && !env.payload.empty()) {
          broadcast_locked(std::string(trim_newline(line)), {Role::console});
        } else {
          enqueue_locked(s, metrics_envelope_locked());
        }
        return {};
      default:
        return {};
    }
  }

  /// Takes everything queued for a session and records relay latency as of
  /// now. Transports that write asynchronously use pop() + record_write().
  std::vector<std::string> drain(SessionId id) {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return out;
    const auto now = std::chrono::steady_clock::now();
    for (auto& item : it->second.queue) {
      record_latency_locked(now - item.enqueued);
      out.push_back(std::move(item.line));
    }
    it->second.queue.clear();
    return out;
  }

  std::optional<OutboundLine> pop(SessionId id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end() || it->second.queue.empty()) return std::nullopt;
    OutboundLine item = std::move(it->second.queue.front());
    it->second.queue.pop_front();
    return item;
  }

  void record_write(SteadyTime enqueued) {
    std::lock_guard lock(mu_);
    record_latency_locked(std::chrono::steady_clock::now() - enqueued);
  }

  /// Sends `line` to every live hmd and console session. Returns the number
  /// of sessions it was queued for.
  std::size_t broadcast(const std::string& line) {
    std::lock_guard lock(mu_);
    return broadcast_locked(line, {Role::hmd, Role::console});
  }

  /// Pushes a METRICS envelope to every console.
  std::size_t broadcast_metrics() {
    std::lock_guard lock(mu_);
    return broadcast_locked(metrics_envelope_locked(), {Role::console});
  }

  Metrics metrics() const {
    std::lock_guard lock(mu_);
    return metrics_locked();
  }

 private:
  struct Session {
    std::optional<Role> role;
    std::deque<OutboundLine> queue;
    std::function<void()> wake;
    std::int64_t opened_ms = 0;
    bool closing = false;
  };

  static bool allowed(Role role, MsgType type) {
    switch (role) {
      case Role::sensor: return type == MsgType::POSITION;
      case Role::console:
        return type == MsgType::COMMAND || type == MsgType::SAMPLE_MARK ||
               type == MsgType::METRICS;
      case Role::hmd: return type == MsgType::SAMPLE_MARK || type == MsgType::METRICS;
    }
    return false;
  }

  static std::string_view trim_newline(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
    return line;
  }

  HandleOutcome protocol_error_locked(Session& s, const std::string& reason) {
    ++metrics_.protocol_errors;
    nack_locked(s, reason);
    s.closing = true;
    return {true, std::nullopt};
  }

  void nack_locked(Session& s, const std::string& reason) {
    ++metrics_.nacks;
    Envelope nack{MsgType::NACK, s.role.value_or(Role::sensor), "", ++server_seq_, clock_(),
                  reason};
    // NACKs bypass the queue bound so a protocol notice is never lost.
    s.queue.push_back({encode_envelope(nack), std::chrono::steady_clock::now()});
    if (s.wake) s.wake();
  }

  void enqueue_locked(Session& s, std::string line) {
    s.queue.push_back({std::move(line), std::chrono::steady_clock::now()});
    if (s.wake) s.wake();
  }

  IngestResult ingest_locked(Session& s, const Envelope& env, std::string_view line) {
    SensorCounters& counters = metrics_.sensors[env.sensor_id];
    SensorMessage msg;
    try {
      msg = decode_kml(env.payload);
    } catch (const Error& e) {
      ++counters.rejected;
      nack_locked(s, std::string("undecodable KML: ") + e.what());
      return IngestResult::rejected;
    }
    if (msg.sensor_id != env.sensor_id) {
      ++counters.rejected;
      nack_locked(s, "KML sensor_id '" + msg.sensor_id + "' does not match envelope '" +
                         env.sensor_id + "'");
      return IngestResult::rejected;
    }
    const std::int64_t now = clock_();
    auto last = last_accepted_ms_.find(env.sensor_id);
    if (last != last_accepted_ms_.end() &&
        now - last->second < config_.throttle.min_interval_ms) {
      ++counters.dropped;
      return IngestResult::dropped;
    }
    last_accepted_ms_[env.sensor_id] = now;
    ++counters.accepted;
    broadcast_locked(std::string(trim_newline(line)), {Role::hmd, Role::console});
    return IngestResult::accepted;
  }

  bool route_locked(Session& s, const Envelope& env) {
    Command cmd;
    try {
      cmd = decode_command(env.payload);
    } catch (const ParseError& e) {
      nack_locked(s, std::string("bad command: ") + e.what());
      return false;
    }
    if (command_sink_) command_sink_(cmd);
    const std::string line = encode_envelope(env);
    broadcast_locked(line, {Role::sensor, Role::console});
    if (std::holds_alternative<CalibrateCommand>(cmd)) {
      broadcast_locked(line, {Role::hmd});
    } else if (const auto* mark = std::get_if<MarkSampleCommand>(&cmd)) {
      nlohmann::json payload = {{"label", mark->label}};
      Envelope sample{MsgType::SAMPLE_MARK, Role::console, "", env.seq, env.sent_ms,
                      payload.dump()};
      broadcast_locked(encode_envelope(sample), {Role::hmd, Role::console});
    }
    return true;
  }

  std::size_t broadcast_locked(const std::string& line, std::set<Role> to) {
    std::size_t delivered = 0;
    const auto now = std::chrono::steady_clock::now();
    for (auto& [id, s] : sessions_) {
      if (!s.role || s.closing || !to.contains(*s.role)) continue;
      if (s.queue.size() >= config_.queue_bound) {
        // Slow consumer: drop its backlog and ask the transport to close it.
        s.queue.clear();
        s.closing = true;
        ++metrics_.evicted_sessions;
        if (s.wake) s.wake();
        continue;
      }
      s.queue.push_back({line, now});
      if (s.wake) s.wake();
      ++delivered;
    }
    return delivered;
  }

  void record_latency_locked(std::chrono::steady_clock::duration d) {
    const double us = std::chrono::duration<double, std::micro>(d).count();
    ++latency_count_;
    latency_max_us_ = std::max(latency_max_us_, us);
    auto bucket = std::lower_bound(kBucketUpperUs.begin(), kBucketUpperUs.end(), us);
    ++latency_buckets_[static_cast<std::size_t>(bucket - kBucketUpperUs.begin())];
    if (recent_latency_us_.size() == kLatencyWindow) recent_latency_us_.pop_front();
    recent_latency_us_.push_back(us);
  }

  std::string metrics_envelope_locked() {
    Envelope env{MsgType::METRICS, Role::console, "", ++server_seq_, clock_(),
                 metrics_locked().to_json().dump()};
    return encode_envelope(env);
  }

  Metrics metrics_locked() const {
    Metrics m = metrics_;
    for (const auto& [id, s] : sessions_) m.sessions.push_back({id, s.role, s.queue.size()});
    m.latency.count = latency_count_;
    m.latency.max_us = latency_max_us_;
    m.latency.bucket_upper_us.assign(kBucketUpperUs.begin(), kBucketUpperUs.end());
    m.latency.bucket_counts.assign(latency_buckets_.begin(), latency_buckets_.end());
    if (!recent_latency_us_.empty()) {
      std::vector<double> v(recent_latency_us_.begin(), recent_latency_us_.end());
      std::sort(v.begin(), v.end());
      const auto pct = [&](double p) {
        const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()))) - 1;
        return v[std::min(idx, v.size() - 1)];
      };
      m.latency.p50_us = pct(0.50);
      m.latency.p99_us = pct(0.99);
    }
    return m;
  }

  static constexpr std::size_t kLatencyWindow = 4096;
  static constexpr std::array<double, 11> kBucketUpperUs = {
      50, 100, 250, 500, 1000, 2500, 5000, 10000, 25000, 50000, 100000};

  RelayConfig config_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<SessionId, Session> sessions_;
  std::map<std::string, std::uint64_t> last_seq_;
  std::map<std::string, std::int64_t> last_accepted_ms_;
  std::function<void(const Command&)> command_sink_;
  Metrics metrics_;
  SessionId next_id_ = 0;
  std::uint64_t server_seq_ = 0;
  std::uint64_t latency_count_ = 0;
  double latency_max_us_ = 0.0;
  std::array<std::uint64_t, 12> latency_buckets_{};
  std::deque<double> recent_latency_us_;
};

}  // namespace rtkar::relay

#endif  // RTKAR_RELAY_HPP
