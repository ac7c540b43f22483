// Copyright (c) 2026 The funnelrank Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// funnelrank: generate journeys, train rankers, evaluate and compare them.
//
// Exit codes: 0 success, 1 usage or config error, 2 data validation error,
// 3 numeric failure.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "funnelrank/eval/evaluate.hpp"
#include "funnelrank/eval/experiment.hpp"
#include "funnelrank/eval/ntc.hpp"
#include "funnelrank/journey/dataset_io.hpp"
#include "funnelrank/journey/labels.hpp"
#include "funnelrank/model/config.hpp"
#include "funnelrank/model/manifest.hpp"
#include "funnelrank/model/train.hpp"
#include "funnelrank/sim/generator.hpp"
#include "funnelrank/util/hash.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace funnelrank;

namespace {

constexpr const char* kToolVersion = "funnelrank 0.1.0";
constexpr const char* kConfigDirVariable = "FUNNELRANK_CONFIG_DIR";

enum ExitCode { kOk = 0, kUsageError = 1, kDataError = 2, kNumericError = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool json_only = false;
  std::string out;
};

// Relative config paths that do not exist fall back to $FUNNELRANK_CONFIG_DIR.
fs::path resolve_config(const std::string& name) {
  fs::path p(name);
  if (fs::exists(p) || p.is_absolute()) return p;
  if (const char* dir = std::getenv(kConfigDirVariable)) {
    fs::path candidate = fs::path(dir) / p;
    if (fs::exists(candidate)) return candidate;
  }
  return p;
}

json read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

journey::Dataset read_dataset(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("dataset file " + path.string() + " does not exist");
  return journey::load_dataset(path);
}

void require_valid(const journey::Dataset& dataset, const fs::path& path) {
  const journey::ValidationReport report = journey::validate_dataset(dataset);
  if (report.accepted()) return;
  std::ostringstream msg;
  msg << "dataset " << path.string() << " failed validation:";
  for (const auto& [v, n] : report.counts) msg << ' ' << journey::to_string(v) << '=' << n;
  throw DataError(msg.str());
}

json validation_json(const journey::ValidationReport& r) {
  json violations = json::object();
  for (const auto& [v, n] : r.counts) violations[std::string(journey::to_string(v))] = n;
  return {{"accepted", r.accepted()},
          {"journeys", r.journeys},
          {"searches", r.searches},
          {"impressions", r.impressions},
          {"violations", violations}};
}

fs::path output_dir(const Common& common) {
  if (common.out.empty()) throw UsageError("--out is required");
  fs::path dir(common.out);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << content;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json file_entries(const std::vector<fs::path>& paths) {
  json out = json::array();
  for (const auto& p : paths) {
    out.push_back({{"path", p.string()}, {"sha256", fs::is_regular_file(p) ? util::sha256_file(p) : ""}});
  }
  return out;
}

// The only place a timestamp is written.
void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<std::uint64_t>& seeds, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs) {
  json seeds_json = json::array();
  for (auto s : seeds) seeds_json.push_back(s);
  const json manifest = {{"command", command},
                         {"config", config},
                         {"seeds", seeds_json},
                         {"inputs", file_entries(inputs)},
                         {"outputs", file_entries(outputs)},
                         {"tool_version", kToolVersion},
                         {"created_at", utc_timestamp()}};
  write_file(dir / "run_manifest.json", dump(manifest));
}

// Writes `name`.json, plus `name`.txt unless --json; prints one of them.
std::vector<fs::path> emit_report(const Common& common, const fs::path& dir, const std::string& name, const json& j,
                                  const std::string& text) {
  std::vector<fs::path> written = {dir / (name + ".json")};
  write_file(written.back(), dump(j));
  if (common.json_only) {
    std::cout << dump(j);
  } else {
    written.push_back(dir / (name + ".txt"));
    write_file(written.back(), text);
    std::cout << text;
  }
  return written;
}

journey::Dataset select_split(const journey::Dataset& dataset, const std::string& split) {
  if (split == "all") return dataset;
  model::DatasetSplit s = model::split_by_guest(dataset);
  if (split == "train") return std::move(s.train);
  if (split == "eval") return std::move(s.eval);
  throw UsageError("--split must be train, eval or all");
}

model::ModelConfig load_model_config(const std::string& path, const Common& common, std::optional<int> epochs,
                                     std::optional<double> learning_rate) {
  json j = read_config(resolve_config(path));
  if (!j.is_object()) throw UsageError("model config must be a JSON object");
  if (common.seed) j["seed"] = *common.seed;
  if (epochs) j["epochs"] = *epochs;
  if (learning_rate) j["learning_rate"] = *learning_rate;
  return model::config_from_json(j);
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string config;
  std::optional<int> n_guests;
};

int cmd_gen(const Common& common, const GenArgs& args) {
  const fs::path config_path = resolve_config(args.config);
  json j = read_config(config_path);
  if (!j.is_object()) throw UsageError("generator config must be a JSON object");
  if (common.seed) j["seed"] = *common.seed;
  if (args.n_guests) j["n_guests"] = *args.n_guests;
  const sim::GeneratorConfig config = sim::config_from_json(j);
  const fs::path dir = output_dir(common);

  const sim::GeneratedData data = sim::generate(config, common.jobs);
  require_valid(data.dataset, dir / "dataset.jsonl");
  journey::save_dataset(dir / "dataset.jsonl", data.dataset);
  write_file(dir / "world.json", dump(data.world.to_json()));

  json summary = sim::summarize(data.dataset).to_json();
  summary["ctr_rejection_correlation"] = sim::ctr_rejection_correlation(data.dataset);
  std::ostringstream text;
  text << "generated " << data.dataset.journeys.size() << " journeys, " << data.dataset.search_count()
       << " searches, " << data.dataset.impression_count() << " impressions\n"
       << dump(summary);
  auto outputs = emit_report(common, dir, "funnel", summary, text.str());
  outputs.insert(outputs.begin(), {dir / "dataset.jsonl", dir / "world.json"});
  write_manifest(dir, "gen", sim::config_to_json(config), {config.seed}, {config_path}, outputs);
  return kOk;
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
  std::string data;
  std::string gen_config;
  std::string model_config;
};

int cmd_validate(const Common& common, const ValidateArgs& args) {
  if (args.data.empty() && args.gen_config.empty() && args.model_config.empty()) {
    throw UsageError("validate needs --data, --gen-config or --model-config");
  }
  json result = json::object();
  if (!args.gen_config.empty()) {
    sim::config_from_json(read_config(resolve_config(args.gen_config)));
    result["gen_config"] = "ok";
  }
  if (!args.model_config.empty()) {
    model::config_from_json(read_config(resolve_config(args.model_config))).validate();
    result["model_config"] = "ok";
  }
  int code = kOk;
  if (!args.data.empty()) {
    const journey::ValidationReport report = journey::validate_dataset(read_dataset(args.data));
    result["dataset"] = validation_json(report);
    if (!report.accepted()) code = kDataError;
  }
  if (common.json_only) {
    std::cout << dump(result);
  } else {
    for (const auto& [k, v] : result.items()) {
      std::cout << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
    }
  }
  if (!common.out.empty()) {
    const fs::path dir = output_dir(common);
    write_file(dir / "validation.json", dump(result));
    std::vector<fs::path> inputs;
    for (const auto* p : {&args.data, &args.gen_config, &args.model_config})
      if (!p->empty()) inputs.emplace_back(*p);
    write_manifest(dir, "validate", json::object(), {}, inputs, {dir / "validation.json"});
  }
  if (code != kOk) std::cerr << "error: dataset failed validation\n";
  return code;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string data;
  std::string split = "train";
  std::optional<int> epochs;
  std::optional<double> learning_rate;
};

int cmd_train(const Common& common, const TrainArgs& args) {
  const model::ModelConfig config = load_model_config(args.config, common, args.epochs, args.learning_rate);
  const journey::Dataset dataset = read_dataset(args.data);
  require_valid(dataset, args.data);
  const fs::path dir = output_dir(common);

  const journey::Dataset train_set = select_split(dataset, args.split);
  const journey::FilterResult filtered = model::prepare_training_data(config, train_set);
  for (const auto& w : filtered.warnings) std::cerr << "warning: " << w << "\n";
  const model::TrainResult result = model::train(config, filtered.dataset);
  model::save_model(result.model, dir);
  write_file(dir / "history.csv", model::history_csv(result.history));

  json summary = {{"config", result.model.config().name},
                  {"train_searches", result.train_searches},
                  {"searches_before_filter", filtered.searches_before},
                  {"parameters", model::parameter_count(result.model.config())},
                  {"epochs", result.history.size()}};
  if (!result.history.empty()) {
    const auto& last = result.history.back();
    summary["final_loss"] = {
        {"base", last.base}, {"twiddler", last.twiddler}, {"combination", last.combination}, {"total", last.total}};
  }
  std::ostringstream text;
  text << "trained " << result.model.config().name << " on " << result.train_searches << " searches\n"
       << model::history_csv(result.history);
  auto outputs = emit_report(common, dir, "train", summary, text.str());
  outputs.insert(outputs.begin(), {dir / "model.json", dir / "params.json", dir / "params.bin", dir / "history.csv"});
  write_manifest(dir, "train", model::config_to_json(result.model.config()), {config.seed},
                 {resolve_config(args.config), args.data}, outputs);
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string model;
  std::string world;
  std::string scorer = "model";
  std::string data;
  std::string split = "eval";
};

int cmd_eval(const Common& common, const EvalArgs& args) {
  const journey::Dataset dataset = read_dataset(args.data);
  require_valid(dataset, args.data);
  const journey::Dataset eval_set = select_split(dataset, args.split);
  const fs::path dir = output_dir(common);

  eval::EvalReport report;
  std::vector<fs::path> inputs = {args.data};
  json config = {{"scorer", args.scorer}, {"split", args.split}};
  std::vector<std::uint64_t> seeds;
  if (args.scorer == "model") {
    if (args.model.empty()) throw UsageError("--model is required for the model scorer");
    const model::MilestoneRanker ranker = model::load_model(args.model);
    report = eval::evaluate(ranker, eval_set);
    inputs.push_back(fs::path(args.model) / "model.json");
    inputs.push_back(fs::path(args.model) / "params.bin");
    config["model"] = ranker.config().name;
  } else if (args.scorer == "random") {
    seeds.push_back(common.seed.value_or(0));
    report = eval::evaluate_scores(eval_set, eval::random_scores(eval_set, seeds.back()));
  } else if (args.scorer == "oracle" || args.scorer == "reversed-oracle") {
    if (args.world.empty()) throw UsageError("--world is required for the " + args.scorer + " scorer");
    const sim::WorldTruth world = sim::WorldTruth::from_json(read_config(args.world));
    auto scores = eval::oracle_scores(world, eval_set);
    if (args.scorer == "reversed-oracle") scores = eval::reversed_scores(scores);
    report = eval::evaluate_scores(eval_set, scores);
    inputs.emplace_back(args.world);
  } else {
    throw UsageError("--scorer must be model, oracle, reversed-oracle or random");
  }
  const auto outputs = emit_report(common, dir, "eval", report.to_json(), report.to_text());
  write_manifest(dir, "eval", config, seeds, inputs, outputs);
  return kOk;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  std::string config_a;
  std::string config_b;
  std::string data;
  int seeds = 5;
  std::optional<int> epochs;
};

int cmd_compare(const Common& common, const CompareArgs& args) {
  Common no_seed = common;
  no_seed.seed.reset();
  const model::ModelConfig a = load_model_config(args.config_a, no_seed, args.epochs, std::nullopt);
  const model::ModelConfig b = load_model_config(args.config_b, no_seed, args.epochs, std::nullopt);
  const journey::Dataset dataset = read_dataset(args.data);
  require_valid(dataset, args.data);
  const fs::path dir = output_dir(common);

  const std::uint64_t base_seed = common.seed.value_or(0);
  const eval::CompareReport report =
      eval::compare(a, b, model::split_by_guest(dataset), args.seeds, base_seed, common.jobs);
  const auto outputs = emit_report(common, dir, "compare", report.to_json(), report.to_text());
  write_manifest(dir, "compare", {{"a", model::config_to_json(a)}, {"b", model::config_to_json(b)}},
                 eval::seed_range(base_seed, args.seeds),
                 {resolve_config(args.config_a), resolve_config(args.config_b), args.data}, outputs);
  return kOk;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string data;
  std::string config;
  std::vector<std::string> cells;
  int seeds = 5;
  std::optional<int> epochs;
};

int cmd_ablate(const Common& common, const AblateArgs& args) {
  Common no_seed = common;
  no_seed.seed.reset();
  model::ModelConfig base = model::baseline_config(0);
  std::vector<fs::path> inputs;
  if (!args.config.empty()) {
    base = load_model_config(args.config, no_seed, args.epochs, std::nullopt);
    inputs.push_back(resolve_config(args.config));
  } else if (args.epochs) {
    base.training.epochs = *args.epochs;
  }
  std::vector<std::vector<journey::Milestone>> cells;
  if (args.cells.empty()) {
    cells = eval::default_ablation_cells();
  } else {
    for (const auto& c : args.cells) cells.push_back(model::parse_task_set(c));
  }
  const journey::Dataset dataset = read_dataset(args.data);
  require_valid(dataset, args.data);
  inputs.emplace_back(args.data);
  const fs::path dir = output_dir(common);

  const std::uint64_t base_seed = common.seed.value_or(0);
  const eval::AblationReport report =
      eval::run_ablation(model::split_by_guest(dataset), cells, base, args.seeds, base_seed, common.jobs);
  json cell_names = json::array();
  for (const auto& c : cells) cell_names.push_back(model::task_set_name(c));
  const auto outputs = emit_report(common, dir, "ablation", report.to_json(), report.to_text());
  write_manifest(dir, "ablate", {{"base", model::config_to_json(base)}, {"cells", cell_names}},
                 eval::seed_range(base_seed, args.seeds), inputs, outputs);
  return kOk;
}

// ---------------------------------------------------------------- ntc

struct NtcArgs {
  std::string model;
  std::string data;
  std::string feature = journey::kDaysAheadFeature;
  std::string split = "eval";
  int buckets = 5;
  bool normalize = false;
};

int cmd_ntc(const Common& common, const NtcArgs& args) {
  const model::MilestoneRanker ranker = model::load_model(args.model);
  const journey::Dataset dataset = read_dataset(args.data);
  require_valid(dataset, args.data);
  const fs::path dir = output_dir(common);

  const eval::NtcCurve curve =
      eval::ntc_curves(ranker, select_split(dataset, args.split), args.feature, args.buckets, args.normalize);
  for (const auto& w : curve.warnings) std::cerr << "warning: " << w << "\n";
  auto outputs = emit_report(common, dir, "ntc", curve.to_json(), curve.to_text());
  outputs.push_back(dir / "ntc.csv");
  write_file(outputs.back(), curve.to_csv());
  write_manifest(dir, "ntc",
                 {{"feature", args.feature},
                  {"buckets", args.buckets},
                  {"normalize", args.normalize},
                  {"split", args.split},
                  {"model", ranker.config().name}},
                 {}, {fs::path(args.model) / "model.json", fs::path(args.model) / "params.bin", args.data}, outputs);
  return kOk;
}

void add_common(CLI::App* cmd, Common& common, bool with_jobs) {
  cmd->add_option("--seed", common.seed, "Seed (overrides the config file)");
  if (with_jobs) cmd->add_option("--jobs", common.jobs, "Parallel jobs")->check(CLI::PositiveNumber);
  cmd->add_flag("--json", common.json_only, "Machine-readable output only");
  cmd->add_option("--out", common.out, "Output directory");
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-milestone learning-to-rank toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  Common common;

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic journey dataset");
  gen_cmd->add_option("--config", gen.config, "Generator config (JSON)")->required();
  gen_cmd->add_option("--n-guests", gen.n_guests, "Override n_guests");
  add_common(gen_cmd, common, true);

  ValidateArgs val;
  auto* val_cmd = app.add_subcommand("validate", "Validate a dataset or config files");
  val_cmd->add_option("--data", val.data, "Dataset (JSONL)");
  val_cmd->add_option("--gen-config", val.gen_config, "Generator config");
  val_cmd->add_option("--model-config", val.model_config, "Model config");
  add_common(val_cmd, common, false);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", tr.config, "Model config (JSON)")->required();
  train_cmd->add_option("--data", tr.data, "Dataset (JSONL)")->required();
  train_cmd->add_option("--split", tr.split, "train, eval or all")->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs, "Override epochs");
  train_cmd->add_option("--learning-rate", tr.learning_rate, "Override learning_rate");
  add_common(train_cmd, common, false);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate NDCG on a dataset");
  eval_cmd->add_option("--model", ev.model, "Model directory");
  eval_cmd->add_option("--world", ev.world, "World truth (for oracle scorers)");
  eval_cmd->add_option("--scorer", ev.scorer, "model, oracle, reversed-oracle or random")->capture_default_str();
  eval_cmd->add_option("--data", ev.data, "Dataset (JSONL)")->required();
  eval_cmd->add_option("--split", ev.split, "train, eval or all")->capture_default_str();
  add_common(eval_cmd, common, false);

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Paired multi-seed comparison of two configs");
  cmp_cmd->add_option("--a", cmp.config_a, "Model config A")->required();
  cmp_cmd->add_option("--b", cmp.config_b, "Model config B")->required();
  cmp_cmd->add_option("--data", cmp.data, "Dataset (JSONL)")->required();
  cmp_cmd->add_option("--seeds", cmp.seeds, "Number of seeds")->capture_default_str();
  cmp_cmd->add_option("--epochs", cmp.epochs, "Override epochs");
  add_common(cmp_cmd, common, true);

  AblateArgs abl;
  auto* abl_cmd = app.add_subcommand("ablate", "Base-module task ablation");
  abl_cmd->add_option("--data", abl.data, "Dataset (JSONL)")->required();
  abl_cmd->add_option("--config", abl.config, "Template model config");
  abl_cmd->add_option("--cells", abl.cells, "Task sets, e.g. unc,req+book+unc,c+unc,all6")->delimiter(',');
  abl_cmd->add_option("--seeds", abl.seeds, "Number of seeds")->capture_default_str();
  abl_cmd->add_option("--epochs", abl.epochs, "Override epochs");
  add_common(abl_cmd, common, true);

  NtcArgs ntc;
  auto* ntc_cmd = app.add_subcommand("ntc", "Normalized twiddler coefficient curves");
  ntc_cmd->add_option("--model", ntc.model, "Model directory")->required();
  ntc_cmd->add_option("--data", ntc.data, "Dataset (JSONL)")->required();
  ntc_cmd->add_option("--feature", ntc.feature, "days_ahead or num_previous_searches")->capture_default_str();
  ntc_cmd->add_option("--buckets", ntc.buckets, "Number of buckets")->capture_default_str();
  ntc_cmd->add_option("--split", ntc.split, "train, eval or all")->capture_default_str();
  ntc_cmd->add_flag("--normalize", ntc.normalize, "Divide by the first bucket");
  add_common(ntc_cmd, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  if (*gen_cmd) return cmd_gen(common, gen);
  if (*val_cmd) return cmd_validate(common, val);
  if (*train_cmd) return cmd_train(common, tr);
  if (*eval_cmd) return cmd_eval(common, ev);
  if (*cmp_cmd) return cmd_compare(common, cmp);
  if (*abl_cmd) return cmd_ablate(common, abl);
  return cmd_ntc(common, ntc);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const model::TrainingError& e) {
    std::cerr << "error: " << e.what() << " (epoch " << e.epoch() << ")\n";
    return kNumericError;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const journey::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const model::SchemaMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const nn::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }
}
