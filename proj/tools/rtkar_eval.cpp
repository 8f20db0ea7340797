// Scenario runner and evaluation CLI.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "rtkar/live.hpp"
#include "rtkar/relay_link.hpp"
#include "rtkar/scenario.hpp"

namespace fs = std::filesystem;
using namespace rtkar;

namespace {

std::atomic<bool> g_stop{false};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw InvalidArgument("expected host:port, got '" + text + "'");
  }
  const std::string port = text.substr(colon + 1);
  int value = 0;
  try {
    value = std::stoi(port);
  } catch (const std::exception&) {
    value = -1;
  }
  if (value <= 0 || value > 65535) throw InvalidArgument("bad port in '" + text + "'");
  return {text.substr(0, colon), static_cast<std::uint16_t>(value)};
}

ScenarioConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  ScenarioConfig c = path.empty() ? default_scenario() : load_scenario(path);
  if (seed) c.seed = *seed;
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << text;
}

std::vector<ErrorSample> read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_samples_csv(in);
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out_dir, const std::string& relay, double time_scale) {
  const ScenarioConfig config = load_config(config_path, seed);
  ScenarioResult result;
  if (relay.empty()) {
    result = run_scenario(config);
  } else {
    const Endpoint ep = parse_endpoint(relay);
    RelayLink link(ep.host, ep.port, time_scale);
    result = run_scenario(config, link);
  }
  result.report.annotations.emplace_back("mode", relay.empty() ? "in-process" : "relay " + relay);

  const std::string report = render_report(result.report);
  std::cout << report;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    std::ostringstream samples, summary, locations;
    write_samples_csv(samples, result.samples);
    write_summary_csv(summary, result.report);
    write_locations_csv(locations, result.report);
    write_file(dir / "report.txt", report);
    write_file(dir / "samples.csv", samples.str());
    write_file(dir / "summary.csv", summary.str());
    write_file(dir / "locations.csv", locations.str());
    write_file(dir / "overlay_log.csv", result.overlay_log);
    write_file(dir / "config.json", scenario_to_json(config).dump(2) + "\n");
  }
  return 0;
}

int cmd_compare(const std::string& a, const std::string& b) {
  const CompareResult r = compare_samples(read_csv_file(a), read_csv_file(b));
  if (r.identical()) {
    std::cout << "identical\n";
    return 0;
  }
  for (const auto& d : r.differences) std::cout << d << '\n';
  return 1;
}

int cmd_ensemble(const std::string& config_path, std::size_t runs, std::uint64_t first_seed) {
  const EnsembleResult r = run_ensemble(load_config(config_path, std::nullopt), runs, first_seed);
  std::cout << "runs " << r.runs << '\n'
            << "gps_mean_m " << text::format_double(r.gps_mean_m) << '\n'
            << "rtk_mean_m " << text::format_double(r.rtk_mean_m) << '\n';
  return 0;
}

int cmd_live(const std::string& relay, const std::string& config_path,
             std::optional<std::uint64_t> seed, const std::string& out_dir, double time_scale,
             LiveOptions options) {
  const Endpoint ep = parse_endpoint(relay);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    options.samples_path = (fs::path(out_dir) / "samples.csv").string();
  }
  LiveHarness live(load_config(config_path, seed), ep.host, ep.port, options);
  std::signal(SIGINT, [](int) { g_stop.store(true); });
  std::signal(SIGTERM, [](int) { g_stop.store(true); });
  std::cerr << "live harness connected to " << relay << "\n";
  live.run(g_stop, time_scale);
  std::cerr << "stopped after " << live.now_ms() << " ms, " << live.samples().size()
            << " samples\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RTK + HMD tracking evaluation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, relay, file_a, file_b;
  std::optional<std::uint64_t> seed;
  double time_scale = 1.0;

  auto* run = app.add_subcommand("run", "run a scenario and write its report");
  run->add_option("--config", config_path, "scenario JSON (default scenario if omitted)")
      ->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "overrides the config seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--relay", relay, "host:port of a relay; in-process when omitted");
  double run_scale = 0.0;
  run->add_option("--time-scale", run_scale,
                  "wall seconds per simulated second over a relay; 0 runs unpaced")
      ->check(CLI::NonNegativeNumber);

  app.add_subcommand("fixture", "print statistics of the reference measurements");

  auto* compare = app.add_subcommand("compare", "diff two samples CSV files");
  compare->add_option("--a", file_a)->required()->check(CLI::ExistingFile);
  compare->add_option("--b", file_b)->required()->check(CLI::ExistingFile);

  std::size_t runs = 100;
  std::uint64_t first_seed = 1;
  auto* ensemble = app.add_subcommand("ensemble", "mean errors over a range of seeds");
  ensemble->add_option("--config", config_path)->check(CLI::ExistingFile);
  ensemble->add_option("--runs", runs)->check(CLI::PositiveNumber);
  ensemble->add_option("--first-seed", first_seed);

  LiveOptions live_opts;
  auto* live = app.add_subcommand("live", "interactive simulation for the operator console");
  live->add_option("--relay", relay, "host:port of the relay")->required();
  live->add_option("--config", config_path)->check(CLI::ExistingFile);
  live->add_option("--seed", seed);
  live->add_option("--out", out_dir, "directory for samples.csv");
  live->add_option("--time-scale", time_scale, "wall seconds per simulated second")->check(CLI::PositiveNumber);
  live->add_option("--telemetry-ms", live_opts.telemetry_interval_ms)->check(CLI::PositiveNumber);
  live->add_option("--sample-sensor", live_opts.sample_sensor, "sample only this sensor id");
  live->add_flag("--follow-script", live_opts.follow_script,
                 "drive the scripted trajectory until the first drive command");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seed, out_dir, relay, run_scale);
    if (app.got_subcommand("fixture")) {
      std::cout << render_report(replay_fixture());
      return 0;
    }
    if (*compare) return cmd_compare(file_a, file_b);
    if (*ensemble) return cmd_ensemble(config_path, runs, first_seed);
    if (*live) return cmd_live(relay, config_path, seed, out_dir, time_scale, live_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
