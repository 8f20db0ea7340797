#ifndef RTKAR_RELAY_LINK_HPP
#define RTKAR_RELAY_LINK_HPP

// Runs a scenario against a live relay: one sensor connection and one hmd
// connection over TCP.

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "rtkar/relay_net.hpp"
#include "rtkar/scenario.hpp"

namespace rtkar {

class RelayLink final : public ScenarioLink {
 public:
  /// `time_scale` paces ticks against the wall clock (1 = real time). With 0
  /// every tick waits for the relay to catch up, which keeps the relay's
  /// queues short and makes the run reproduce the in-process result.
  RelayLink(const std::string& host, std::uint16_t port, double time_scale = 0.0,
            std::chrono::milliseconds settle_timeout = std::chrono::seconds(10))
      : time_scale_(time_scale), settle_timeout_(settle_timeout) {
    if (!(time_scale >= 0.0)) throw InvalidArgument("RelayLink: time_scale must be >= 0");
    sensor_.connect(host, port);
    sensor_.hello(Role::sensor);
    hmd_.connect(host, port);
    hmd_.hello(Role::hmd);
    baseline_ = processed_counts();
    next_tick_ = std::chrono::steady_clock::now();
  }

  void send_sensor(const std::string& line, std::int64_t) override {
    ++sent_[decode_envelope(line).sensor_id];
    sensor_.send(line);
  }

  std::vector<std::string> receive_hmd(bool settle) override {
    if (settle || time_scale_ == 0.0) wait_until_processed();
    for (auto& line : hmd_.drain()) pending_.push_back(std::move(line));
    std::vector<std::string> out;
    out.swap(pending_);
    return out;
  }

  void end_tick(std::int64_t tick_ms) override {
    for (const auto& line : sensor_.drain()) {
      const Envelope env = decode_envelope(line);
      if (env.msg_type == MsgType::NACK) throw ProtocolError("relay rejected sensor data: " + env.payload);
    }
    if (sensor_.closed_by_peer() || hmd_.closed_by_peer()) {
      throw ConnectionError("relay closed the connection");
    }
    if (time_scale_ > 0.0) {
      next_tick_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double, std::milli>(static_cast<double>(tick_ms) * time_scale_));
      std::this_thread::sleep_until(next_tick_);
    }
  }

 private:
  // Per sensor id: messages the relay has accepted, dropped or rejected.
  std::map<std::string, std::uint64_t> processed_counts() {
    hmd_.send(encode_envelope({MsgType::METRICS, Role::hmd, "", ++hmd_seq_, 0, ""}));
    const auto deadline = std::chrono::steady_clock::now() + settle_timeout_;
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) break;
      const auto line = hmd_.receive(left);
      if (!line) break;
      const Envelope env = decode_envelope(*line);
      if (env.msg_type != MsgType::METRICS) {
        pending_.push_back(*line);
        continue;
      }
      std::map<std::string, std::uint64_t> out;
      const auto j = nlohmann::json::parse(env.payload);
      for (const auto& [id, c] : j.at("sensors").items()) {
        out[id] = c.at("accepted").get<std::uint64_t>() + c.at("dropped").get<std::uint64_t>() +
                  c.at("rejected").get<std::uint64_t>();
      }
      return out;
    }
    throw ConnectionError("relay did not answer a METRICS request");
  }

  // Barrier: returns once the relay has processed every line sent so far.
  // Lines it accepted are then already queued ahead of the METRICS reply.
  void wait_until_processed() {
    const auto deadline = std::chrono::steady_clock::now() + settle_timeout_;
    for (;;) {
      const auto now = processed_counts();
      bool done = true;
      for (const auto& [id, n] : sent_) {
        const auto it = now.find(id);
        const auto base = baseline_.find(id);
        const std::uint64_t seen = (it == now.end() ? 0 : it->second) -
                                   (base == baseline_.end() ? 0 : base->second);
        if (seen < n) done = false;
      }
      if (done) return;
      if (std::chrono::steady_clock::now() > deadline) {
        throw ConnectionError("relay did not settle within the timeout");
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  }

  relay::RelayClient sensor_;
  relay::RelayClient hmd_;
  double time_scale_;
  std::chrono::milliseconds settle_timeout_;
  std::chrono::steady_clock::time_point next_tick_;
  std::map<std::string, std::uint64_t> sent_;
  std::map<std::string, std::uint64_t> baseline_;
  std::vector<std::string> pending_;
  std::uint64_t hmd_seq_ = 0;
};

}  // namespace rtkar

#endif  // RTKAR_RELAY_LINK_HPP
