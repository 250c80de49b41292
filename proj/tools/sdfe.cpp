// Command-line front end for the semi-decentralized federated ego-graph
// recommendation simulator.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdfe/config.hpp"
#include "sdfe/io.hpp"
#include "sdfe/metrics.hpp"
#include "sdfe/runner.hpp"

namespace fs = std::filesystem;
using sdfe::cfg::ExperimentConfig;

namespace {

struct Overrides {
  std::string config_path;
  std::vector<std::string> sets;  // key=value pairs, applied after the file
};

void add_common_options(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_path, "config file (flat key = value lines)");
  cmd->add_option("--set", ov.sets, "override a config key, e.g. --set rounds=5")
      ->take_all();
  // Frequently used overrides get first-class flags.
  for (const char* key : {"dataset", "format", "seed", "rounds", "eval_every", "fake_count",
                          "groups", "layers", "neg_count", "local_epochs", "k"}) {
    cmd->add_option_function<std::string>(
        std::string("--") + key,
        [&ov, key](const std::string& v) { ov.sets.push_back(std::string(key) + "=" + v); },
        std::string("override config key '") + key + "'");
  }
}

// File first, then overrides in order. Returns false (after printing every
// violation) when the resulting config is invalid.
bool resolve_config(const Overrides& ov, ExperimentConfig& out) {
  try {
    if (!ov.config_path.empty()) out = sdfe::cfg::parse_config_file(ov.config_path);
    for (const auto& kv : ov.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::runtime_error("override must be key=value: " + kv);
      const std::string key = kv.substr(0, eq);
      if (!sdfe::cfg::apply_key(out, key, kv.substr(eq + 1)))
        throw std::runtime_error("unknown config key '" + key + "'");
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return false;
  }
  const auto errors = sdfe::cfg::validate(out);
  for (const auto& e : errors) std::cerr << "config error: " << e << "\n";
  return errors.empty();
}

int run_one(const ExperimentConfig& cfg, const std::string& out_dir, bool quiet = false) {
  auto result = sdfe::run::run_config(cfg);
  sdfe::run::write_outputs(cfg, result, out_dir);
  for (const auto& ev : result.world.events) std::cerr << "event: " << ev << "\n";
  if (!quiet) {
    const auto& last = result.experiment.rows.back();
    std::printf("round %d: recall@%d=%s ndcg@%d=%s\n", last.round, last.k,
                sdfe::io::fmt(last.recall).c_str(), last.k, sdfe::io::fmt(last.ndcg).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SemiDFEGL-style federated ego-graph recommendation simulator"};
  app.require_subcommand(1);

  Overrides ov_ingest, ov_run, ov_sweep, ov_ablate, ov_eval;
  std::string out_dir = "out";
  std::string sweep_param;
  std::vector<int> sweep_values;
  std::vector<unsigned long long> seeds;
  std::string checkpoint_path;
  std::vector<std::string> merge_inputs;
  std::string merge_output;

  auto* c_ingest = app.add_subcommand("ingest", "parse, filter, split and write the id map");
  add_common_options(c_ingest, ov_ingest);
  c_ingest->add_option("--out", out_dir, "output directory");

  auto* c_run = app.add_subcommand("run", "run one experiment");
  add_common_options(c_run, ov_run);
  c_run->add_option("--out", out_dir, "output directory");

  auto* c_sweep = app.add_subcommand("sweep", "run a hyperparameter sweep");
  add_common_options(c_sweep, ov_sweep);
  c_sweep->add_option("--param", sweep_param, "fake_nodes | groups | layers | neg_count")
      ->required();
  c_sweep->add_option("--values", sweep_values, "values to sweep (default per param)");
  c_sweep->add_option("--seeds", seeds, "seeds (default: the config seed)");
  c_sweep->add_option("--out", out_dir, "output directory");

  auto* c_ablate = app.add_subcommand("ablate", "paired runs with and without fake items");
  add_common_options(c_ablate, ov_ablate);
  c_ablate->add_option("--seeds", seeds, "seeds (default: the config seed)");
  c_ablate->add_option("--out", out_dir, "output directory");

  auto* c_eval = app.add_subcommand("eval", "re-evaluate a checkpoint");
  add_common_options(c_eval, ov_eval);
  c_eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();

  auto* c_report = app.add_subcommand("report", "merge report CSV files");
  c_report->add_option("--inputs", merge_inputs, "input CSV files")->required();
  c_report->add_option("--output", merge_output, "merged CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_ingest->parsed()) {
      ExperimentConfig cfg;
      if (!resolve_config(ov_ingest, cfg)) return 2;
      const auto ds = sdfe::run::load_dataset(cfg);
      fs::create_directories(out_dir);
      sdfe::data::write_idmap(ds, out_dir + "/idmap.tsv");
      std::printf("users=%d items=%d train=%zu valid=%zu test=%zu\n", ds.num_users, ds.num_items,
                  ds.train.size(), ds.valid.size(), ds.test.size());
      return 0;
    }

    if (c_run->parsed()) {
      ExperimentConfig cfg;
      if (!resolve_config(ov_run, cfg)) return 2;
      return run_one(cfg, out_dir);
    }

    if (c_sweep->parsed()) {
      ExperimentConfig base;
      if (!resolve_config(ov_sweep, base)) return 2;
      std::string key;
      if (sweep_param == "fake_nodes") key = "fake_count";
      else if (sweep_param == "groups") key = "groups";
      else if (sweep_param == "layers") key = "layers";
      else if (sweep_param == "neg_count") key = "neg_count";
      else {
        std::cerr << "unknown sweep param '" << sweep_param
                  << "' (valid: fake_nodes, groups, layers, neg_count)\n";
        return 2;
      }
      if (sweep_values.empty()) {
        if (sweep_param == "fake_nodes") sweep_values = {1, 5, 10, 20};
        else if (sweep_param == "groups") sweep_values = {50, 100, 200, 500};
        else if (sweep_param == "layers") sweep_values = {1, 2, 3, 4, 5};
        else sweep_values = {1, 2, 4, 8};
      }
      if (seeds.empty()) seeds.push_back(base.seed);
      fs::create_directories(out_dir);
      auto csv = sdfe::io::open_out(out_dir + "/sweep.csv");
      csv << "param,value,seed,round,recall,ndcg,uplink,downlink,d2d\n";
      int failures = 0;
      for (int value : sweep_values) {
        for (auto seed : seeds) {
          ExperimentConfig cfg = base;
          sdfe::cfg::apply_key(cfg, key, std::to_string(value));
          cfg.seed = seed;
          const std::string cell =
              out_dir + "/" + sweep_param + "=" + std::to_string(value) + "/seed=" + std::to_string(seed);
          try {
            auto result = sdfe::run::run_config(cfg);
            sdfe::run::write_outputs(cfg, result, cell);
            const auto& last = result.experiment.rows.back();
            csv << sweep_param << ',' << value << ',' << seed << ',' << last.round << ','
                << sdfe::io::fmt(last.recall) << ',' << sdfe::io::fmt(last.ndcg) << ','
                << last.comm.uplink << ',' << last.comm.downlink << ',' << last.comm.d2d << '\n';
          } catch (const std::exception& e) {
            std::cerr << "sweep cell " << sweep_param << "=" << value << " seed=" << seed
                      << " failed: " << e.what() << "\n";
            ++failures;
          }
        }
      }
      return failures == 0 ? 0 : 1;
    }

    if (c_ablate->parsed()) {
      ExperimentConfig base;
      if (!resolve_config(ov_ablate, base)) return 2;
      if (seeds.empty()) seeds.push_back(base.seed);
      fs::create_directories(out_dir);
      auto csv = sdfe::io::open_out(out_dir + "/ablation.csv");
      csv << "seed,recall_with,recall_without,delta\n";
      for (auto seed : seeds) {
        ExperimentConfig with = base, without = base;
        with.seed = seed;
        without.seed = seed;
        without.fake_count = 0;
        auto rw = sdfe::run::run_config(with);
        auto ro = sdfe::run::run_config(without);
        sdfe::run::write_outputs(with, rw, out_dir + "/with/seed=" + std::to_string(seed));
        sdfe::run::write_outputs(without, ro, out_dir + "/without/seed=" + std::to_string(seed));
        const double a = rw.experiment.rows.back().recall;
        const double b = ro.experiment.rows.back().recall;
        csv << seed << ',' << sdfe::io::fmt(a) << ',' << sdfe::io::fmt(b) << ','
            << sdfe::io::fmt(a - b) << '\n';
      }
      return 0;
    }

    if (c_eval->parsed()) {
      ExperimentConfig cfg;
      if (!resolve_config(ov_eval, cfg)) return 2;
      const auto ds = sdfe::run::load_dataset(cfg);
      const auto cp = sdfe::srv::Server::load_checkpoint(checkpoint_path);
      if (cp.server.num_users() != ds.num_users || cp.server.num_items() != ds.num_items) {
        std::cerr << "checkpoint shape does not match the dataset\n";
        return 1;
      }
      const auto ev = sdfe::metrics::evaluate(cp.server, ds, cfg.k);
      std::printf("round=%d recall@%d=%s ndcg@%d=%s users=%d skipped=%d\n", cp.round, cfg.k,
                  sdfe::io::fmt(ev.recall).c_str(), cfg.k, sdfe::io::fmt(ev.ndcg).c_str(),
                  ev.users_evaluated, ev.users_skipped);
      return 0;
    }

    if (c_report->parsed()) {
      std::ofstream out(merge_output);
      if (!out) throw std::runtime_error("cannot write " + merge_output);
      bool wrote_header = false;
      for (const auto& path : merge_inputs) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
          if (first) {
            first = false;
            if (wrote_header) continue;
            wrote_header = true;
          }
          out << line << '\n';
        }
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
