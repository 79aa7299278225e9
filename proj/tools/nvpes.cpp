#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "nvpes/parallel.hpp"
#include "nvpes/run.hpp"

namespace {

// Exit codes: 0 success, 1 simulation or I/O failure, 2 bad config or usage,
// 3 outputs written but an invariant or self-check failed.
int report_error(const std::string& kind, const std::string& message, int line = 0) {
  nlohmann::ordered_json rec;
  rec["error"] = {{"kind", kind}, {"message", message}};
  if (line > 0) rec["error"]["line"] = line;
  std::cerr << rec.dump() << "\n";
  return kind == "config" || kind == "usage" ? 2 : 1;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) nvpes::fail(nvpes::ErrorKind::io, "cannot read config " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photon emission statistics of a driven NV center"};
  app.set_version_flag("--version", NVPES_VERSION);
  app.require_subcommand(1, 1);

  std::string config_path, out_dir, format;
  std::uint64_t seed = 0;
  std::size_t workers = nvpes::default_workers();
  bool record_timing = false;

  for (const auto& type : nvpes::experiment_types()) {
    auto* cmd = app.add_subcommand(type, "run the " + type + " experiment");
    cmd->add_option("--config", config_path, "config file")->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "output directory (overrides [output] directory)");
    cmd->add_option("--seed", seed, "random seed (overrides [output] seed)");
    cmd->add_option("--workers", workers, "parallel workers")->check(CLI::PositiveNumber);
    cmd->add_option("--format", format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
    cmd->add_flag("--record-timing", record_timing, "store wall time in the metadata sidecar");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("usage", e.what());
  }

  const std::string type = app.get_subcommands().front()->get_name();
  const auto* cmd = app.get_subcommands().front();
  try {
    auto config = nvpes::parse_config(config_path.empty() ? std::string{} : read_file(config_path), type);
    if (cmd->count("--out")) config.output.directory = out_dir;
    if (cmd->count("--seed")) config.output.seed = seed;
    if (cmd->count("--format")) config.output.format = format;

    const auto outcome = nvpes::run(config, {workers, record_timing});
    for (const auto& f : outcome.files) std::cout << f.string() << "\n";
    if (!outcome.invariants_ok) {
      std::ostringstream msg;
      msg << "normalization deviation " << outcome.invariants.max_norm_deviation << " exceeds "
          << nvpes::normalization_tolerance;
      report_error("invariant", msg.str());
      return 3;
    }
    if (!outcome.checks_passed) {
      report_error("validation", "oracle cross-check failed; see the metadata sidecar");
      return 3;
    }
    return 0;
  } catch (const nvpes::ConfigError& e) {
    return report_error("config", e.what(), e.line());
  } catch (const nvpes::Error& e) {
    return report_error(std::string(nvpes::to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
}
