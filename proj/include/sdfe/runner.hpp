#pragma once

#include <filesystem>
#include <string>

#include "sdfe/config.hpp"
#include "sdfe/data.hpp"
#include "sdfe/io.hpp"
#include "sdfe/sim.hpp"
#include "sdfe/synthetic.hpp"

namespace sdfe::run {

inline data::Dataset load_dataset(const cfg::ExperimentConfig& c) {
  std::vector<data::Interaction> raw;
  int min_interactions = c.min_interactions;
  if (c.format == "synthetic") {
    raw = data::make_synthetic(c.synth_users, c.synth_items, c.synth_communities,
                               c.synth_per_user, c.seed);
    min_interactions = 1;
  } else {
    const auto fmt = c.format == "movielens-dat" ? data::Format::MovielensDat : data::Format::Tsv;
    raw = data::ingest(c.dataset, fmt);
  }
  const auto mode =
      c.split_mode == "global" ? data::SplitMode::Global : data::SplitMode::PerUser;
  return data::filter_and_split(raw, min_interactions, data::Ratios{}, c.seed, mode);
}

struct RunResult {
  sim::ExperimentResult experiment;
  sim::World world;
};

inline RunResult run_config(const cfg::ExperimentConfig& c) {
  data::Dataset ds = load_dataset(c);
  sim::World world = sim::make_world(c.sim(), std::move(ds));
  auto exp = sim::run_experiment(world, c.rounds, c.eval_every, c.k, c.select_on_valid);
  return RunResult{std::move(exp), std::move(world)};
}

// Stable output-directory layout shared by the CLI and the test suites.
inline void write_outputs(const cfg::ExperimentConfig& c, const RunResult& r,
                          const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  io::write_report_csv(r.experiment.rows, out_dir + "/report.csv");
  io::write_report_jsonl(r.experiment.rows, out_dir + "/report.jsonl");
  io::write_ledger_csv(r.world.ledger, out_dir + "/ledger.csv");
  io::write_transcript_jsonl(r.world.transcript, out_dir + "/transcript.jsonl");
  const auto& server = r.experiment.best_server ? *r.experiment.best_server : r.world.server;
  server.save_checkpoint(out_dir + "/checkpoint.sdfe", r.experiment.best_round, c.groups);
  io::open_out(out_dir + "/config.resolved") << cfg::resolved(c);
  data::write_idmap(r.world.ds, out_dir + "/idmap.tsv");
}

}  // namespace sdfe::run
