#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sidelink/adversary.hpp"
#include "sidelink/metrics.hpp"
#include "sidelink/scenario.hpp"
#include "sidelink/simulation.hpp"

namespace fs = std::filesystem;
using namespace sidelink;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level log_level() {
  const char* env = std::getenv("SIDELINK_LOG_LEVEL");
  if (!env) return Level::Warn;
  const std::string v = env;
  if (v == "error") return Level::Error;
  if (v == "info") return Level::Info;
  if (v == "debug") return Level::Debug;
  return Level::Warn;
}

void say(Level l, const std::string& msg) {
  static const Level threshold = log_level();
  if (l > threshold) return;
  static constexpr const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "[" << names[static_cast<int>(l)] << "] " << msg << '\n';
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

struct Outcome {
  int code = kOk;
  std::string message;
};

Outcome run_one(const fs::path& scenario, std::optional<std::uint64_t> seed, const fs::path& out_dir) {
  try {
    const auto sc = load_scenario(scenario.string());
    say(Level::Info, "running " + sc.name + " (seed " + std::to_string(seed.value_or(sc.seed)) + ")");
    const auto res = run_scenario(sc, seed);
    fs::create_directories(out_dir);
    const auto csv = out_dir / (sc.name + ".csv");
    const auto events = out_dir / (sc.name + ".events.jsonl");
    {
      std::ofstream os(csv, std::ios::binary);
      res.metrics.write_csv(os);
    }
    {
      std::ofstream os(events, std::ios::binary);
      res.log.write(os);
    }
    say(Level::Debug, sc.name + ": " + std::to_string(res.log.records().size()) + " events");
    std::ostringstream summary;
    const auto total = res.metrics.total();
    summary << sc.name << ": slots=" << res.end_slot;
    for (std::size_t i = 0; i < 10; ++i) summary << ' ' << kMetricColumns[i].name << '=' << fmt(total.values[i]);
    summary << "\n  wrote " << csv.string() << " and " << events.string();
    return {kOk, summary.str()};
  } catch (const ScenarioError& e) {
    return {kValidation, e.what()};
  } catch (const std::exception& e) {
    return {kRuntime, scenario.string() + ": " + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic NR V2X sidelink attack/defense simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run one scenario");
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  run->add_option("scenario", scenario, "Scenario YAML file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_dir, "Output directory for CSV and event log");

  auto* batch = app.add_subcommand("batch", "Run every *.yaml scenario in a directory");
  std::string batch_dir;
  std::string batch_out = "out";
  unsigned jobs = 1;
  batch->add_option("dir", batch_dir, "Directory of scenarios")->required();
  batch->add_option("--out", batch_out, "Output directory");
  batch->add_option("--jobs,-j", jobs, "Scenarios run concurrently")->check(CLI::Range(1u, 256u));

  auto* cmp = app.add_subcommand("compare", "Per-metric deltas between two metric CSVs");
  std::string csv_a;
  std::string csv_b;
  cmp->add_option("a", csv_a, "Baseline CSV")->required();
  cmp->add_option("b", csv_b, "Other CSV")->required();

  auto* val = app.add_subcommand("validate", "Check a scenario without running it");
  std::string val_path;
  val->add_option("scenario", val_path, "Scenario YAML file")->required();

  auto* list = app.add_subcommand("list-attacks", "List the attack kinds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  if (*run) {
    const auto o = run_one(scenario, seed, out_dir);
    (o.code == kOk ? std::cout : std::cerr) << o.message << '\n';
    return o.code;
  }

  if (*batch) {
    std::vector<fs::path> files;
    try {
      for (const auto& e : fs::directory_iterator(batch_dir)) {
        if (e.is_regular_file() && (e.path().extension() == ".yaml" || e.path().extension() == ".yml")) {
          files.push_back(e.path());
        }
      }
    } catch (const fs::filesystem_error& e) {
      std::cerr << e.what() << '\n';
      return kRuntime;
    }
    std::sort(files.begin(), files.end());
    std::vector<Outcome> outcomes(files.size());
    for (std::size_t i = 0; i < files.size(); i += jobs) {
      std::vector<std::future<Outcome>> running;
      for (std::size_t j = i; j < std::min(files.size(), i + jobs); ++j) {
        running.push_back(std::async(std::launch::async, run_one, files[j], std::nullopt, fs::path(batch_out)));
      }
      for (std::size_t j = 0; j < running.size(); ++j) outcomes[i + j] = running[j].get();
    }
    int code = kOk;
    for (const auto& o : outcomes) {
      (o.code == kOk ? std::cout : std::cerr) << o.message << '\n';
      code = std::max(code, o.code);
    }
    say(Level::Info, std::to_string(files.size()) + " scenarios processed");
    return code;
  }

  if (*cmp) {
    try {
      const auto a = parse_metrics_csv(read_file(csv_a), csv_a);
      const auto b = parse_metrics_csv(read_file(csv_b), csv_b);
      std::cout << "metric,a,b,absolute,relative\n";
      for (const auto& d : compare(a, b)) {
        std::cout << d.name << ',' << fmt(d.a) << ',' << fmt(d.b) << ',' << fmt(d.absolute) << ','
                  << fmt(d.relative) << '\n';
      }
      return kOk;
    } catch (const MetricsError& e) {
      std::cerr << e.what() << '\n';
      return kValidation;
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return kRuntime;
    }
  }

  if (*val) {
    try {
      const auto sc = load_scenario(val_path);
      std::cout << val_path << ": ok (" << sc.ues.size() << " UEs, " << sc.attacks.size() << " attacks, "
                << sc.duration_slots << " slots)\n";
      return kOk;
    } catch (const ScenarioError& e) {
      std::cerr << e.what() << '\n';
      return kValidation;
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return kRuntime;
    }
  }

  if (*list) {
    for (const auto k : all_attack_kinds()) std::cout << to_string(k) << '\t' << describe(k) << '\n';
    return kOk;
  }
  return kOk;
}
