#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdfe/sim.hpp"

namespace sdfe::cfg {

// Flat key=value experiment configuration. Defaults follow the reference
// hyperparameters: d=64, K=4, F=1, lr=0.001, weight decay 1e-4.
struct ExperimentConfig {
  std::string dataset;               // file path, or unused for synthetic
  std::string format = "tsv";        // movielens-dat | tsv | synthetic
  int min_interactions = 20;
  std::string split_mode = "per_user";  // per_user | global
  int d = 64;
  int layers = 4;
  int groups = 100;
  int fake_count = 1;
  int neg_count = 1;
  double lr = 0.001;
  double weight_decay = 0.0001;
  double delta = 1.0;
  double ldp_lambda = 0.1;
  double fuzz = 2.0;
  int fcm_max_iters = 100;
  double fcm_tol = 1e-4;
  int rounds = 10;
  int local_epochs = 3;
  double sample_frac = 1.0;
  int recluster_every = 1;
  int ego_upload_every = 1;
  int eval_every = 1;
  int k = 20;
  std::uint64_t seed = 1;
  bool item_topk_mode = false;
  bool select_on_valid = false;
  // synthetic generator knobs (format = synthetic)
  int synth_users = 500;
  int synth_items = 300;
  int synth_communities = 5;
  int synth_per_user = 36;

  sim::SimConfig sim() const {
    sim::SimConfig s;
    s.d = d;
    s.layers = layers;
    s.groups = groups;
    s.fake_count = fake_count;
    s.neg_count = neg_count;
    s.local_epochs = local_epochs;
    s.lr = lr;
    s.weight_decay = weight_decay;
    s.delta = delta;
    s.ldp_lambda = ldp_lambda;
    s.fuzz = fuzz;
    s.fcm_max_iters = fcm_max_iters;
    s.fcm_tol = fcm_tol;
    s.sample_frac = sample_frac;
    s.recluster_every = recluster_every;
    s.ego_upload_every = ego_upload_every;
    s.item_topk_mode = item_topk_mode;
    s.seed = seed;
    return s;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("not a boolean: " + v);
}

}  // namespace detail

inline bool apply_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  try {
    if (key == "dataset") c.dataset = value;
    else if (key == "format") c.format = value;
    else if (key == "min_interactions") c.min_interactions = std::stoi(value);
    else if (key == "split_mode") c.split_mode = value;
    else if (key == "d") c.d = std::stoi(value);
    else if (key == "layers") c.layers = std::stoi(value);
    else if (key == "groups") c.groups = std::stoi(value);
    else if (key == "fake_count") c.fake_count = std::stoi(value);
    else if (key == "neg_count") c.neg_count = std::stoi(value);
    else if (key == "lr") c.lr = std::stod(value);
    else if (key == "weight_decay") c.weight_decay = std::stod(value);
    else if (key == "delta") c.delta = std::stod(value);
    else if (key == "ldp_lambda") c.ldp_lambda = std::stod(value);
    else if (key == "fuzz") c.fuzz = std::stod(value);
    else if (key == "fcm_max_iters") c.fcm_max_iters = std::stoi(value);
    else if (key == "fcm_tol") c.fcm_tol = std::stod(value);
    else if (key == "rounds") c.rounds = std::stoi(value);
    else if (key == "local_epochs") c.local_epochs = std::stoi(value);
    else if (key == "sample_frac") c.sample_frac = std::stod(value);
    else if (key == "recluster_every") c.recluster_every = std::stoi(value);
    else if (key == "ego_upload_every") c.ego_upload_every = std::stoi(value);
    else if (key == "eval_every") c.eval_every = std::stoi(value);
    else if (key == "k") c.k = std::stoi(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "item_topk_mode") c.item_topk_mode = detail::parse_bool(value);
    else if (key == "select_on_valid") c.select_on_valid = detail::parse_bool(value);
    else if (key == "synth_users") c.synth_users = std::stoi(value);
    else if (key == "synth_items") c.synth_items = std::stoi(value);
    else if (key == "synth_communities") c.synth_communities = std::stoi(value);
    else if (key == "synth_per_user") c.synth_per_user = std::stoi(value);
    else return false;
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("bad value for " + key + ": '" + value + "'");
  } catch (const std::out_of_range&) {
    throw std::runtime_error("value out of range for " + key + ": '" + value + "'");
  }
  return true;
}

// Parses a flat key=value config file. `[section]` headers and `#` comments
// are allowed and ignored.
inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ExperimentConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!apply_key(c, key, value))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return c;
}

// Returns every violation; an empty vector means the config is runnable.
inline std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  if (c.format != "movielens-dat" && c.format != "tsv" && c.format != "synthetic")
    errors.push_back("format must be movielens-dat, tsv, or synthetic");
  if (c.format != "synthetic" && c.dataset.empty()) errors.push_back("dataset path is required");
  if (c.split_mode != "per_user" && c.split_mode != "global")
    errors.push_back("split_mode must be per_user or global");
  if (c.min_interactions < 1) errors.push_back("min_interactions must be >= 1");
  if (c.d < 1) errors.push_back("d must be >= 1");
  if (c.layers < 1) errors.push_back("layers must be >= 1");
  if (c.groups < 2) errors.push_back("groups must be >= 2");
  if (c.fake_count < 0) errors.push_back("fake_count must be >= 0");
  if (c.neg_count < 0) errors.push_back("neg_count must be >= 0");
  if (c.lr <= 0) errors.push_back("lr must be positive");
  if (c.weight_decay < 0) errors.push_back("weight_decay must be >= 0");
  if (c.delta <= 0) errors.push_back("delta must be positive");
  if (c.ldp_lambda < 0) errors.push_back("ldp_lambda must be >= 0");
  if (!(c.fuzz > 1.0)) errors.push_back("fuzz (weighting exponent) must be > 1");
  if (c.fcm_max_iters < 1) errors.push_back("fcm_max_iters must be >= 1");
  if (c.fcm_tol <= 0) errors.push_back("fcm_tol must be positive");
  if (c.rounds < 0) errors.push_back("rounds must be >= 0");
  if (c.local_epochs < 0) errors.push_back("local_epochs must be >= 0");
  if (c.sample_frac <= 0 || c.sample_frac > 1) errors.push_back("sample_frac must be in (0, 1]");
  if (c.recluster_every < 1) errors.push_back("recluster_every must be >= 1");
  if (c.ego_upload_every < 1) errors.push_back("ego_upload_every must be >= 1");
  if (c.eval_every < 1) errors.push_back("eval_every must be >= 1");
  if (c.k < 1) errors.push_back("k must be >= 1");
  if (c.format == "synthetic") {
    if (c.synth_users < 1) errors.push_back("synth_users must be >= 1");
    if (c.synth_items < 1) errors.push_back("synth_items must be >= 1");
    if (c.synth_communities < 1) errors.push_back("synth_communities must be >= 1");
    if (c.synth_per_user < 1) errors.push_back("synth_per_user must be >= 1");
    if (c.synth_per_user > c.synth_items) errors.push_back("synth_per_user exceeds synth_items");
  }
  return errors;
}

// Echo of every effective value; written as config.resolved so a run can be
// reproduced from its artifacts alone.
inline std::string resolved(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "dataset = " << c.dataset << '\n';
  out << "format = " << c.format << '\n';
  out << "min_interactions = " << c.min_interactions << '\n';
  out << "split_mode = " << c.split_mode << '\n';
  out << "d = " << c.d << '\n';
  out << "layers = " << c.layers << '\n';
  out << "groups = " << c.groups << '\n';
  out << "fake_count = " << c.fake_count << '\n';
  out << "neg_count = " << c.neg_count << '\n';
  out << "lr = " << c.lr << '\n';
  out << "weight_decay = " << c.weight_decay << '\n';
  out << "delta = " << c.delta << '\n';
  out << "ldp_lambda = " << c.ldp_lambda << '\n';
  out << "fuzz = " << c.fuzz << '\n';
  out << "fcm_max_iters = " << c.fcm_max_iters << '\n';
  out << "fcm_tol = " << c.fcm_tol << '\n';
  out << "rounds = " << c.rounds << '\n';
  out << "local_epochs = " << c.local_epochs << '\n';
  out << "sample_frac = " << c.sample_frac << '\n';
  out << "recluster_every = " << c.recluster_every << '\n';
  out << "ego_upload_every = " << c.ego_upload_every << '\n';
  out << "eval_every = " << c.eval_every << '\n';
  out << "k = " << c.k << '\n';
  out << "seed = " << c.seed << '\n';
  out << "item_topk_mode = " << (c.item_topk_mode ? "true" : "false") << '\n';
  out << "select_on_valid = " << (c.select_on_valid ? "true" : "false") << '\n';
  out << "synth_users = " << c.synth_users << '\n';
  out << "synth_items = " << c.synth_items << '\n';
  out << "synth_communities = " << c.synth_communities << '\n';
  out << "synth_per_user = " << c.synth_per_user << '\n';
  return out.str();
}

}  // namespace sdfe::cfg
