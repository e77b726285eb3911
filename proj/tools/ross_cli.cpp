#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ross/experiment.hpp"

namespace {

ross::ordered_json load_config(const std::string& path, ross::Task task) {
  if (path.empty()) return ross::default_config(task);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  ross::ordered_json j = ross::ordered_json::parse(ss.str());
  if (!j.is_object())
    throw std::runtime_error(path + ": top level must be a JSON object");
  const std::string name = ross::task_name(task);
  if (j.contains("task")) {
    if (j["task"] != name)
      throw std::runtime_error(path + ": config task \"" +
                               j["task"].get<std::string>() +
                               "\" does not match subcommand \"" + name +
                               "\"");
  } else {
    j["task"] = name;
  }
  return j;
}

/// Write-then-rename so a crashed run never leaves a truncated file.
void write_atomic(const std::filesystem::path& path,
                  const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

int run_task(ross::Task task, const std::string& config_path,
             std::uint64_t seed, const std::string& out_dir, int workers,
             bool deterministic) {
  const ross::ordered_json raw = load_config(config_path, task);
  const ross::ExperimentConfig cfg = ross::parse_config(raw);
  const ross::RunResult result =
      ross::run_experiment(cfg, seed, workers, deterministic);

  std::filesystem::create_directories(out_dir);
  write_atomic(std::filesystem::path(out_dir) / "results.csv",
               results_csv(result));
  write_atomic(std::filesystem::path(out_dir) / "resolved_config.json",
               result.resolved.dump(2) + "\n");

  std::size_t errors = 0;
  for (const ross::Record& r : result.records) {
    if (r.variant == "error") {
      ++errors;
      std::cerr << "point " << r.point << " failed: " << r.params << "\n";
      continue;
    }
    std::printf("%-14s %-14s %-12.6g  n=%-8zu %s\n", r.variant.c_str(),
                r.metric.c_str(), r.value, r.samples, r.params.c_str());
  }
  if (task == ross::Task::equalize || task == ross::Task::scan)
    std::printf("reference      hd_fec_ber     %-12.6g\n"
                "reference      sd_fec_ber     %-12.6g\n",
                3.8e-3, 2e-2);
  std::printf("wrote %s/results.csv (%zu records, config %016llx)\n",
              out_dir.c_str(), result.records.size(),
              static_cast<unsigned long long>(result.config_hash));
  if (errors > 0)
    std::cerr << errors << " sweep point(s) failed; see results.csv\n";

  if (!result.assertion_failures.empty()) {
    for (const std::string& f : result.assertion_failures)
      std::cerr << "assertion failed: " << f << "\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optical spectrum slicing network simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int workers = 1;
  bool deterministic = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "concurrent sweep points")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--deterministic", deterministic,
                  "zero wall times for byte-identical reruns");
  };
  add_common(app.add_subcommand("narma", "nonlinear series prediction"));
  add_common(app.add_subcommand("equalize", "fiber link equalization"));
  add_common(app.add_subcommand("memcap", "linear memory capacity"));
  add_common(app.add_subcommand("fading", "dispersion power fading probe"));
  add_common(app.add_subcommand("scan", "hyperparameter grid"));

  CLI11_PARSE(app, argc, argv);

  try {
    const ross::Task task =
        ross::parse_task(app.get_subcommands().front()->get_name());
    return run_task(task, config_path, seed, out_dir, workers, deterministic);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
