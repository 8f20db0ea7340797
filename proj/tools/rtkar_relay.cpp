// Relay server: TCP for sensors and trackers, WebSocket for the console.

#include <CLI11.hpp>

#include <iostream>

#include "rtkar/relay_net.hpp"

using namespace rtkar::relay;

int main(int argc, char** argv) {
  CLI::App app{"Position relay"};
  RelayConfig config;
  ServerOptions options;
  bool no_ws = false;
  app.add_option("--bind", options.bind_address, "listen address");
  app.add_option("--port", options.tcp_port, "TCP port (0 picks one)");
  app.add_option("--ws-port", options.ws_port, "WebSocket port (0 picks one)");
  app.add_flag("--no-ws", no_ws, "disable the WebSocket endpoint");
  app.add_option("--min-interval-ms", config.throttle.min_interval_ms,
                 "minimum gap between accepted messages per sensor")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--queue-bound", config.queue_bound,
                 "queued envelopes per session before it is disconnected")
      ->check(CLI::PositiveNumber);
  app.add_option("--hello-timeout-ms", config.hello_timeout_ms)->check(CLI::PositiveNumber);
  app.add_option("--metrics-interval-s", options.metrics_interval_s,
                 "push METRICS to consoles this often; 0 disables")
      ->check(CLI::NonNegativeNumber);
  CLI11_PARSE(app, argc, argv);
  options.enable_ws = !no_ws;

  try {
    RelayServer server(config, options);
    server.stop_on_signals();
    server.start();
    std::cout << "tcp " << options.bind_address << ":" << server.tcp_port() << "\n";
    if (options.enable_ws) std::cout << "ws " << options.bind_address << ":" << server.ws_port() << "\n";
    std::cout << std::flush;
    server.wait();
    const auto m = server.core().metrics();
    std::cerr << "stopped; nacks " << m.nacks << ", evicted " << m.evicted_sessions << "\n";
  } catch (const rtkar::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
