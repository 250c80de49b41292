#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "sdfe/config.hpp"
#include "sdfe/runner.hpp"

using namespace sdfe;
using namespace sdfe::cfg;

TEST_CASE("defaults form a valid synthetic config", "[config]") {
  ExperimentConfig c;
  c.format = "synthetic";
  REQUIRE(validate(c).empty());
  REQUIRE(c.d == 64);
  REQUIRE(c.layers == 4);
  REQUIRE(c.groups == 100);
  REQUIRE(c.fake_count == 1);
  REQUIRE(c.neg_count == 1);
  REQUIRE(c.lr == 0.001);
  REQUIRE(c.weight_decay == 0.0001);
  REQUIRE(c.delta == 1.0);
  REQUIRE(c.ldp_lambda == 0.1);
  REQUIRE(c.fuzz == 2.0);
  REQUIRE(c.local_epochs == 3);
  REQUIRE(c.sample_frac == 1.0);
  REQUIRE(c.k == 20);
}

TEST_CASE("missing dataset path is a named violation", "[config]") {
  ExperimentConfig c;  // format tsv, no dataset
  const auto errors = validate(c);
  REQUIRE_FALSE(errors.empty());
  bool found = false;
  for (const auto& e : errors)
    if (e.find("dataset") != std::string::npos) found = true;
  REQUIRE(found);
}

TEST_CASE("every violation is listed at once", "[config]") {
  ExperimentConfig c;
  c.format = "synthetic";
  c.d = 0;
  c.layers = -1;
  c.lr = 0.0;
  c.fuzz = 1.0;
  c.k = 0;
  const auto errors = validate(c);
  REQUIRE(errors.size() >= 5);
}

TEST_CASE("config files accept comments sections and whitespace", "[config]") {
  const std::string dir = testutil::temp_dir("cfg");
  const std::string path = dir + "/exp.cfg";
  testutil::write_file(path,
                       "# experiment\n[main]\nformat = synthetic\n  rounds=5 # inline\n"
                       "seed = 99\nselect_on_valid = true\n\n");
  const auto c = parse_config_file(path);
  REQUIRE(c.format == "synthetic");
  REQUIRE(c.rounds == 5);
  REQUIRE(c.seed == 99);
  REQUIRE(c.select_on_valid);
}

TEST_CASE("bad keys and values are reported with context", "[config]") {
  const std::string dir = testutil::temp_dir("cfg_bad");
  testutil::write_file(dir + "/a.cfg", "no_such_key = 1\n");
  REQUIRE_THROWS_WITH(parse_config_file(dir + "/a.cfg"),
                      Catch::Matchers::ContainsSubstring("no_such_key"));
  testutil::write_file(dir + "/b.cfg", "rounds = soon\n");
  REQUIRE_THROWS_WITH(parse_config_file(dir + "/b.cfg"),
                      Catch::Matchers::ContainsSubstring("rounds"));
  testutil::write_file(dir + "/c.cfg", "just a line\n");
  REQUIRE_THROWS_WITH(parse_config_file(dir + "/c.cfg"),
                      Catch::Matchers::ContainsSubstring(":1"));
  ExperimentConfig c;
  REQUIRE_FALSE(apply_key(c, "bogus", "1"));
}

TEST_CASE("resolved output round-trips through the parser", "[config]") {
  ExperimentConfig c;
  c.format = "synthetic";
  c.rounds = 7;
  c.fake_count = 3;
  c.ldp_lambda = 0.25;
  c.item_topk_mode = true;
  c.seed = 1234567;
  const std::string dir = testutil::temp_dir("cfg_rt");
  testutil::write_file(dir + "/r.cfg", resolved(c));
  const auto back = parse_config_file(dir + "/r.cfg");
  REQUIRE(back.rounds == 7);
  REQUIRE(back.fake_count == 3);
  REQUIRE(back.ldp_lambda == 0.25);
  REQUIRE(back.item_topk_mode);
  REQUIRE(back.seed == 1234567);
  REQUIRE(resolved(back) == resolved(c));
}

TEST_CASE("runner writes the stable output layout deterministically", "[config]") {
  ExperimentConfig c;
  c.format = "synthetic";
  c.synth_users = 15;
  c.synth_items = 12;
  c.synth_communities = 3;
  c.synth_per_user = 6;
  c.d = 4;
  c.layers = 2;
  c.groups = 3;
  c.rounds = 2;
  c.fcm_max_iters = 15;
  c.seed = 5;
  REQUIRE(validate(c).empty());

  const std::string d1 = testutil::temp_dir("run1");
  const std::string d2 = testutil::temp_dir("run2");
  auto r1 = run::run_config(c);
  run::write_outputs(c, r1, d1);
  auto r2 = run::run_config(c);
  run::write_outputs(c, r2, d2);
  for (const char* f : {"report.csv", "report.jsonl", "ledger.csv", "transcript.jsonl",
                        "checkpoint.sdfe", "config.resolved", "idmap.tsv"}) {
    const std::string a = testutil::slurp(d1 + "/" + f);
    REQUIRE_FALSE(a.empty());
    REQUIRE(a == testutil::slurp(d2 + "/" + f));
  }
}
