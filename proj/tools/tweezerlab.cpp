#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tweezerlab/runner.hpp"

using namespace tweezerlab;

namespace {

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    T v{};
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw ConfigError(std::string("bad ") + what + " list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tweezerlab: virtual SLM tweezer laboratory"};
  app.require_subcommand(1);

  std::string scenario_file;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  std::string out_dir = "out";
  app.add_option("--scenario", scenario_file, "scenario JSON file (defaults when omitted)");
  auto* seed_opt = app.add_option("--seed", seed, "global 64-bit seed, overrides the scenario");
  app.add_option("--threads", threads, "worker threads; 1 gives the reference output")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory (TWEEZERLAB_OUT overrides)");

  std::string zones, omegas;
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : command_names()) subs[name] = app.add_subcommand(name);
  subs["correct"]->description("zone-wise aberration correction");
  subs["correct"]->add_option("--zones", zones, "comma-separated zone ladder, e.g. 1,16,64,256");
  subs["map"]->description("2D beam map of the uncorrected tweezer");
  subs["cpt"]->description("fluorescence vs power and detuning with the ten-level model");
  subs["rabi"]->description("Rabi-frequency profile from detuning sweeps");
  subs["forces"]->description("apparent-centre shift vs axial trap frequency");
  subs["forces"]->add_option("--omega", omegas, "comma-separated trap frequencies in Hz (not angular)");
  subs["two-tweezers"]->description("checkerboard two-tweezer addressing of an ion chain");
  subs["zernike"]->description("Zernike decomposition of the measured correction");
  subs["validate"]->description("invariant self-test");

  CLI11_PARSE(app, argc, argv);
  seed_given = seed_opt->count() > 0;

  try {
    Scenario sc = scenario_file.empty() ? Scenario{} : load_scenario(scenario_file);
    if (seed_given) sc.seed = seed;
    RunOptions opt;
    opt.threads = threads;
    opt.out = out_dir;
    if (const char* env = std::getenv("TWEEZERLAB_OUT"); env && *env) opt.out = env;
    if (!zones.empty()) opt.zones = parse_list<int>(zones, "zone");
    if (!omegas.empty())
      for (double f : parse_list<double>(omegas, "frequency")) opt.omegas.push_back(kTwoPi * f);
    std::string command;
    for (const auto& [name, sub] : subs)
      if (sub->parsed()) command = name;
    return run_command(command, sc, opt);
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
