// floquet: command-line front end.
//
//   floquet <spectrum|bulk|edge|verify|oracle> --config run.json [--out DIR]
//           [--seeds N] [--override key=value]... [--threads N]
//
// Exit codes: 0 success, 2 config error, 3 numeric precondition failure,
// 4 verification failure.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "floquet/pipeline.hpp"

namespace fs = std::filesystem;
using floquet::json;
namespace pl = floquet::pipeline;

namespace {

enum Exit { Ok = 0, ConfigFail = 2, NumericFail = 3, VerifyFail = 4 };

json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw floquet::ConfigError("cannot open config '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw floquet::ConfigError("config '" + path + "' is not valid JSON");
  return j;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw floquet::ConfigError("cannot write '" + p.string() + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floquet topological invariants at finite volume"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir = ".";
  int seeds = 0, threads = 1;
  std::vector<std::string> overrides;
  for (const char* name : {"spectrum", "bulk", "edge", "verify", "oracle"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seeds", seeds, "ensemble size (replaces ensemble.seeds)");
    sub->add_option("--override", overrides, "key=value with a dot path into the config");
    sub->add_option("--threads", threads, "worker threads over seeds")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? Ok : ConfigFail;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    json raw = read_config(config_path);
    for (const auto& o : overrides) pl::apply_override(raw, o);
    if (seeds > 0) {
      json base = raw.value("ensemble", json::object());
      const auto first = base.contains("seeds") && base["seeds"].is_array() && !base["seeds"].empty()
                             ? base["seeds"][0].get<std::uint64_t>()
                             : base.value("base_seed", std::uint64_t{1});
      raw["ensemble"] = {{"base_seed", first}, {"count", seeds}};
    }
    const json cfg = pl::normalize_config(raw);

    const auto t0 = std::chrono::steady_clock::now();
    const auto cmd = pl::command_from_string(command);
    pl::Report rep = cmd == pl::Command::Spectrum ? pl::run_spectrum(cfg, threads) : pl::run_invariants(cfg, cmd, threads);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.document["provenance"] = pl::provenance(command, threads);

    fs::create_directories(out_dir);
    const std::string prefix = cfg["output"]["prefix"].get<std::string>() + "_" + command;
    write_file(fs::path(out_dir) / (prefix + ".json"), rep.document.dump(2) + "\n");
    write_file(fs::path(out_dir) / (prefix + ".csv"), rep.csv);
    write_file(fs::path(out_dir) / (prefix + "_timing.json"), json{{"wall_seconds", wall}}.dump(2) + "\n");

    if (cmd == pl::Command::Verify || cmd == pl::Command::Oracle) {
      std::cout << "identity                                   seed  lhs          rhs          residual    tol    ok\n";
      for (const auto& r : rep.document["results"])
        for (const auto& row : r["rows"])
          std::printf("%-42s %4llu  %+.6f  %+.6f  %.3e  %.3f  %s\n", r["kind"].get<std::string>().c_str(),
                      static_cast<unsigned long long>(row["seed"].get<std::uint64_t>()), row["lhs"].get<double>(),
                      row["rhs"].get<double>(), row["residual"].get<double>(), row["tolerance"].get<double>(),
                      row["pass"].get<bool>() ? "yes" : "NO");
      return rep.all_pass ? Ok : VerifyFail;
    }
    std::cout << "wrote " << (fs::path(out_dir) / (prefix + ".json")).string() << "\n";
    return Ok;
  } catch (const floquet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ConfigFail;
  } catch (const floquet::PreconditionError& e) {
    std::cerr << "numeric precondition failed: " << e.what() << "\n";
    return NumericFail;
  } catch (const floquet::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ConfigFail;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ConfigFail;
  }
}
