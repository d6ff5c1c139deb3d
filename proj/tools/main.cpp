// SPDX-License-Identifier: Apache-2.0

// riskpath CLI: taxonomy validation, prompt rendering, reward audits,
// synthetic data generation, two-stage training, cascade evaluation, and
// metric reports. Every artifact-producing subcommand writes a manifest
// beside its outputs. All randomness flows from --seed; identical argv plus
// seed reproduce output files byte for byte (manifests carry timestamps and
// are exempt).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "riskpath/riskpath.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace riskpath;

namespace {

std::string iso_now() {
  auto tt = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Taxonomy load_tax(const std::string& path) {
  return path.empty() ? demo_taxonomy() : load_taxonomy_file(path);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
}

struct ManifestWriter {
  std::string command;
  fs::path out_dir;
  json config = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string started_at = iso_now();

  void write() const {
    json m{{"command", command},       {"tool_version", version()},
           {"seed", seed},             {"config", config},
           {"inputs", inputs},         {"outputs", outputs},
           {"started_at", started_at}, {"finished_at", iso_now()}};
    write_text_file(out_dir / "manifest.json", m.dump(2) + "\n");
  }
};

json reward_breakdown_json(const RewardBreakdown& b) {
  return json{{"per_level", b.per_level},
              {"r_acc", b.r_acc},
              {"r_format", b.r_format},
              {"r_final", b.r_final}};
}

void print_reward_breakdown(const RewardBreakdown& b, bool as_json) {
  if (as_json) {
    std::cout << reward_breakdown_json(b).dump(2) << "\n";
    return;
  }
  if (!b.per_level.empty()) {
    std::printf("per_level  ");
    for (double v : b.per_level) std::printf("% .2f ", v);
    std::printf("\n");
  }
  std::printf("r_acc      % .2f\n", b.r_acc);
  std::printf("r_format   % .2f\n", b.r_format);
  std::printf("r_final    % .2f\n", b.r_final);
}

void print_reward_table(const std::vector<RewardSpaceRow>& rows, int depth, bool as_json) {
  if (as_json) {
    json arr = json::array();
    for (const auto& r : rows)
      arr.push_back(json{{"label", r.label},
                         {"format_ok", r.format_ok},
                         {"marks", r.level_marks},
                         {"per_level", r.per_level},
                         {"r_acc", r.r_acc},
                         {"r_format", r.r_format},
                         {"r_final", r.r_final},
                         {"calculation", r.calculation}});
    std::cout << arr.dump(2) << "\n";
    return;
  }
  for (int l = 1; l <= depth; ++l) std::printf("L%-4d", l);
  std::printf("%-8s%-8s%-10s%-9s%-26s%s\n", "Format", "R_acc", "R_format", "R_final",
              "Calculation", "Solution");
  for (const auto& r : rows) {
    for (int l = 0; l < depth; ++l)
      std::printf("%-5s", r.level_marks.empty() ? "-" : r.level_marks[l].c_str());
    std::printf("%-8s% -8.2f%-10.0f% -9.2f%-26s%s\n", r.format_ok ? "yes" : "no", r.r_acc,
                r.r_format, r.r_final, r.calculation.c_str(), r.label.c_str());
  }
}

void print_metric_report(const MetricReport& rep, bool as_json) {
  if (as_json) {
    json per_class = json::array();
    for (const auto& c : rep.per_class)
      per_class.push_back(json{{"leaf", c.leaf},
                               {"path", c.path_string},
                               {"tp", c.tp},
                               {"fp", c.fp},
                               {"fn", c.fn},
                               {"precision", c.precision},
                               {"recall", c.recall},
                               {"precision_undefined", c.precision_undefined},
                               {"recall_undefined", c.recall_undefined}});
    json j{{"record_count", rep.record_count},
           {"overall_accuracy", rep.overall_accuracy},
           {"risky_macro_precision", rep.risky_macro_precision},
           {"risky_macro_recall", rep.risky_macro_recall},
           {"per_level_accuracy", rep.per_level_accuracy},
           {"per_class", per_class}};
    j["sibling_confusion_rate"] =
        rep.sibling_confusion_rate ? json(*rep.sibling_confusion_rate) : json(nullptr);
    j["deep_sibling_error_rate"] =
        rep.deep_sibling_error_rate ? json(*rep.deep_sibling_error_rate) : json(nullptr);
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::printf("records                  %zu\n", rep.record_count);
  std::printf("overall_accuracy         %.4f\n", rep.overall_accuracy);
  std::printf("risky_macro_precision    %.4f\n", rep.risky_macro_precision);
  std::printf("risky_macro_recall       %.4f\n", rep.risky_macro_recall);
  if (!rep.per_level_accuracy.empty()) {
    std::printf("per_level_accuracy      ");
    for (std::size_t l = 0; l < rep.per_level_accuracy.size(); ++l)
      std::printf(" L%zu %.4f", l + 1, rep.per_level_accuracy[l]);
    std::printf("\n");
  }
  if (rep.sibling_confusion_rate)
    std::printf("sibling_confusion_rate   %.4f\n", *rep.sibling_confusion_rate);
  else
    std::printf("sibling_confusion_rate   n/a (no qualifying errors)\n");
  if (rep.deep_sibling_error_rate)
    std::printf("deep_sibling_error_rate  %.4f\n", *rep.deep_sibling_error_rate);
  if (!rep.per_class.empty()) {
    std::printf("\n%-6s%-6s%-6s%-11s%-9s%s\n", "tp", "fp", "fn", "precision", "recall", "class");
    for (const auto& c : rep.per_class)
      std::printf("%-6d%-6d%-6d%-11.4f%-9.4f%s%s\n", c.tp, c.fp, c.fn, c.precision, c.recall,
                  c.path_string.c_str(),
                  c.precision_undefined || c.recall_undefined ? "  [zero denominator]" : "");
  }
}

void write_trace(const fs::path& path, const std::vector<TraceRecord>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  for (const auto& rec : trace)
    out << json{{"step", rec.step},
                {"mean_reward", rec.mean_reward},
                {"exact_acc", rec.exact_acc},
                {"sibling_confusion", rec.sibling_confusion}}
               .dump()
        << "\n";
}

/// Values from --config <file.json>, applied as defaults beneath the flags
/// (explicit flags win).
struct ConfigLayer {
  json values = json::object();

  static ConfigLayer scan(int argc, char** argv) {
    ConfigLayer layer;
    for (int i = 1; i < argc; ++i) {
      std::string arg = argv[i];
      std::string path;
      if (arg == "--config" && i + 1 < argc)
        path = argv[i + 1];
      else if (arg.rfind("--config=", 0) == 0)
        path = arg.substr(9);
      if (path.empty()) continue;
      std::ifstream in(path);
      if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
      in >> layer.values;
      if (!layer.values.is_object()) throw std::runtime_error("config: expected a JSON object");
    }
    return layer;
  }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!values.contains(key)) return fallback;
    return values.at(key).get<T>();
  }
};

void warn_reward_config(const RewardConfig& rcfg, int depth) {
  for (const auto& v : validate_reward_config(rcfg, depth))
    std::fprintf(stderr, "warning: reward config: %s\n", v.c_str());
}

void add_reward_flags(CLI::App* cmd, RewardConfig& rcfg) {
  cmd->add_option("--level-correct", rcfg.level_correct, "Per-level reward for a correct node")
      ->capture_default_str();
  cmd->add_option("--sibling-base", rcfg.sibling_base,
                  "Sibling error at level l costs -base^(l-1)")
      ->capture_default_str();
  cmd->add_option("--safe-risky-penalty", rcfg.safe_risky_penalty,
                  "Flat accuracy reward for safe/risky confusion")
      ->capture_default_str();
  cmd->add_option("--format-bonus", rcfg.format_bonus, "Reward for a well-formed transcript")
      ->capture_default_str();
}

/// Reads a taxonomy document without load-time validation so `taxonomy
/// validate` can report every violation as data instead of failing fast.
Taxonomy read_taxonomy_unchecked(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json doc;
  in >> doc;
  Taxonomy t;
  t.depth = doc.at("depth").get<int>();
  for (const auto& jn : doc.at("nodes")) {
    TaxonomyNode n;
    n.id = jn.at("id").get<std::string>();
    n.name = jn.at("name").get<std::string>();
    n.level = jn.at("level").get<int>();
    n.rule = jn.value("rule", std::string{});
    if (jn.contains("parent") && !jn.at("parent").is_null())
      n.parent = jn.at("parent").get<std::string>();
    t.nodes.push_back(std::move(n));
  }
  t.reindex();
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical risk-path moderation lab"};
  app.require_subcommand(1);

  ConfigLayer config;
  try {
    config = ConfigLayer::scan(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  int rc = 0;

  // --- taxonomy validate ---------------------------------------------------
  auto* taxonomy_cmd = app.add_subcommand("taxonomy", "Taxonomy utilities");
  taxonomy_cmd->require_subcommand(1);
  auto* validate_cmd = taxonomy_cmd->add_subcommand("validate", "Check a taxonomy file");
  {
    auto tax_path = std::make_shared<std::string>();
    validate_cmd->add_option("--taxonomy", *tax_path, "Taxonomy JSON (default: built-in tree)");
    validate_cmd->callback([tax_path, &rc] {
      Taxonomy t = tax_path->empty() ? demo_taxonomy() : read_taxonomy_unchecked(*tax_path);
      auto violations = validate_taxonomy(t);
      if (violations.empty()) {
        std::printf("ok: %zu nodes, %zu leaves, depth %d\n", t.nodes.size(), t.leaves().size(),
                    t.depth);
      } else {
        for (const auto& v : violations) std::printf("violation: %s\n", v.c_str());
        rc = 1;
      }
    });
  }

  // --- prompt render ---------------------------------------------------------
  auto* prompt_cmd = app.add_subcommand("prompt", "Prompt rendering");
  prompt_cmd->require_subcommand(1);
  auto* render_cmd = prompt_cmd->add_subcommand("render", "Render the structured prompt");
  {
    auto tax_path = std::make_shared<std::string>();
    auto style = std::make_shared<std::string>("hierarchical");
    auto min_words = std::make_shared<int>(kDefaultMinWords);
    render_cmd->add_option("--taxonomy", *tax_path, "Taxonomy JSON (default: built-in tree)");
    render_cmd->add_option("--style", *style, "hierarchical | flat | flat_with_rules")
        ->capture_default_str();
    render_cmd->add_option("--min-words", *min_words, "Reasoning word minimum")
        ->capture_default_str();
    render_cmd->callback([=] {
      std::cout << render_prompt(load_tax(*tax_path), prompt_style_from_string(*style),
                                 *min_words);
    });
  }

  // --- reward score / table ---------------------------------------------------
  auto* reward_cmd = app.add_subcommand("reward", "Reward computation and audit");
  reward_cmd->require_subcommand(1);
  auto* score_cmd = reward_cmd->add_subcommand("score", "Score an answer or transcript");
  {
    auto tax_path = std::make_shared<std::string>();
    auto truth_text = std::make_shared<std::string>();
    auto answer = std::make_shared<std::string>();
    auto raw = std::make_shared<std::string>();
    auto batch = std::make_shared<std::string>();
    auto notes = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto format_ok = std::make_shared<bool>(false);
    auto as_json = std::make_shared<bool>(false);
    auto min_words = std::make_shared<int>(kDefaultMinWords);
    auto mode = std::make_shared<std::string>("soft_margin");
    auto rcfg = std::make_shared<RewardConfig>();
    score_cmd->add_option("--taxonomy", *tax_path, "Taxonomy JSON (default: built-in tree)");
    score_cmd->add_option("--truth", *truth_text, "Ground-truth path string or 'No Risk'");
    auto* answer_opt = score_cmd->add_option("--answer", *answer, "Answer text to score");
    auto* raw_opt =
        score_cmd->add_option("--raw", *raw, "Full raw transcript (think + answer tags)");
    auto* batch_opt = score_cmd->add_option(
        "--batch", *batch, "Transcript batch file (JSONL {note_id, raw}) scored against --notes");
    score_cmd->add_option("--notes", *notes, "Notes file supplying truths for --batch");
    score_cmd->add_option("--out", *out_path, "Write batch scores to this file");
    score_cmd->add_flag("--format-ok", *format_ok,
                        "With --answer: grant the format bonus (parseable answers only)");
    score_cmd->add_flag("--json", *as_json, "Emit JSON");
    score_cmd->add_option("--min-words", *min_words, "Reasoning word minimum")
        ->capture_default_str();
    score_cmd->add_option("--mode", *mode, "soft_margin | hard")->capture_default_str();
    add_reward_flags(score_cmd, *rcfg);
    answer_opt->excludes(raw_opt);
    batch_opt->excludes(answer_opt);
    batch_opt->excludes(raw_opt);
    score_cmd->callback([=] {
      Taxonomy t = load_tax(*tax_path);
      warn_reward_config(*rcfg, t.depth);
      RewardMode rmode = reward_mode_from_string(*mode);
      if (!batch->empty()) {
        if (notes->empty()) throw std::runtime_error("--batch requires --notes for truths");
        Corpus corpus = read_corpus(t, *notes);
        std::map<std::string, const Note*> by_id;
        for (const auto& n : corpus.notes) by_id[n.id] = &n;
        std::ifstream in(*batch);
        if (!in) throw std::runtime_error("cannot open '" + *batch + "'");
        std::ostringstream lines;
        std::string line;
        while (std::getline(in, line)) {
          if (trim(line).empty()) continue;
          json j = json::parse(line);
          std::string note_id = j.at("note_id").get<std::string>();
          auto it = by_id.find(note_id);
          if (it == by_id.end())
            throw std::runtime_error("batch references unknown note '" + note_id + "'");
          Transcript tr = parse_transcript(j.at("raw").get<std::string>(), *min_words);
          auto b = score_transcript(t, tr, it->second->truth, *rcfg, rmode);
          json out{{"note_id", note_id}};
          out.update(reward_breakdown_json(b));
          lines << out.dump() << "\n";
        }
        if (out_path->empty())
          std::cout << lines.str();
        else
          write_text_file(*out_path, lines.str());
        return;
      }

      if (truth_text->empty()) throw std::runtime_error("--truth is required");
      auto truth_parsed = parse_path(t, *truth_text);
      if (!truth_parsed.ok()) throw std::runtime_error("bad --truth: " + truth_parsed.message);

      RewardBreakdown b;
      if (!raw->empty()) {
        b = score_transcript(t, parse_transcript(*raw, *min_words), truth_parsed.path, *rcfg,
                             rmode);
      } else {
        Prediction pred;
        auto parsed = parse_path(t, *answer);
        if (parsed.ok()) pred = parsed.path;
        if (rmode == RewardMode::soft_margin) {
          b = accuracy_reward(t, pred, truth_parsed.path, *rcfg);
        } else {
          b.r_acc = hard_accuracy_reward(pred, truth_parsed.path);
        }
        b.r_format = (pred && *format_ok) ? rcfg->format_bonus : 0.0;
        b.r_final = b.r_acc + b.r_format;
      }
      print_reward_breakdown(b, *as_json);
    });
  }
  auto* table_cmd = reward_cmd->add_subcommand("table", "Reward-value space table");
  {
    auto depth = std::make_shared<int>(kDefaultDepth);
    auto as_json = std::make_shared<bool>(false);
    auto rcfg = std::make_shared<RewardConfig>();
    table_cmd->add_option("--depth", *depth, "Taxonomy depth L")->capture_default_str();
    table_cmd->add_flag("--json", *as_json, "Emit JSON rows");
    add_reward_flags(table_cmd, *rcfg);
    table_cmd->callback(
        [=] {
          warn_reward_config(*rcfg, *depth);
          print_reward_table(reward_space_table(*depth, *rcfg), *depth, *as_json);
        });
  }

  // --- gen-data ------------------------------------------------------------------
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic labeled corpus");
  {
    auto tax_path = std::make_shared<std::string>(config.get<std::string>("taxonomy", ""));
    auto out_dir = std::make_shared<std::string>();
    auto spec = std::make_shared<CorpusSpec>();
    spec->n_train = config.get<int>("n-train", spec->n_train);
    spec->n_eval = config.get<int>("n-eval", spec->n_eval);
    spec->risky_ratio = config.get<double>("risky-ratio", spec->risky_ratio);
    spec->feature_dim = config.get<int>("dim", spec->feature_dim);
    spec->class_separation = config.get<double>("separation", spec->class_separation);
    spec->label_noise = config.get<double>("label-noise", spec->label_noise);
    spec->seed = config.get<std::uint64_t>("seed", spec->seed);
    spec->eval_risky_ratio = config.get<double>("eval-risky-ratio", spec->eval_risky_ratio);
    auto held_out = std::make_shared<std::vector<std::string>>(
        config.get<std::vector<std::string>>("held-out", {}));
    auto config_path = std::make_shared<std::string>();
    auto preset = std::make_shared<std::string>("desk");
    gen_cmd->add_option("--config", *config_path, "JSON config file (flags override)");
    gen_cmd->add_option("--taxonomy", *tax_path, "Taxonomy JSON (default: built-in tree)");
    gen_cmd->add_option("--out", *out_dir, "Output directory")->required();
    gen_cmd->add_option("--preset", *preset,
                        "desk (2,000/500 notes) | full (24,000 risky-heavy train, "
                        "10,000 safe-heavy eval)")
        ->capture_default_str();
    auto* n_train_opt =
        gen_cmd->add_option("--n-train", spec->n_train, "Training notes")->capture_default_str();
    auto* n_eval_opt = gen_cmd->add_option("--n-eval", spec->n_eval, "Notes per evaluation split")
                           ->capture_default_str();
    auto* ratio_opt =
        gen_cmd->add_option("--risky-ratio", spec->risky_ratio, "Risky fraction of train")
            ->capture_default_str();
    auto* eval_ratio_opt =
        gen_cmd->add_option("--eval-risky-ratio", spec->eval_risky_ratio,
                            "Risky fraction of eval splits (negative: same as train)")
            ->capture_default_str();
    gen_cmd->add_option("--dim", spec->feature_dim, "Feature dimension")->capture_default_str();
    gen_cmd->add_option("--separation", spec->class_separation,
                        "Level-1 centroid offset scale (halves per level)")
        ->capture_default_str();
    gen_cmd->add_option("--label-noise", spec->label_noise,
                        "Fraction of risky truths resampled among sibling leaves")
        ->capture_default_str();
    gen_cmd->add_option("--held-out", *held_out,
                        "Leaf ids or full path strings excluded from train/base_eval");
    gen_cmd->add_option("--seed", spec->seed, "Generation seed")->capture_default_str();
    gen_cmd->callback([=] {
      if (*preset == "full") {
        // full-scale split shape; explicit flags still win
        if (!n_train_opt->count()) spec->n_train = 24000;
        if (!n_eval_opt->count()) spec->n_eval = 10000;
        if (!ratio_opt->count()) spec->risky_ratio = 20000.0 / 24000.0;
        if (!eval_ratio_opt->count()) spec->eval_risky_ratio = 0.2;
      } else if (*preset != "desk") {
        throw std::runtime_error("unknown preset '" + *preset + "'");
      }
      Taxonomy t = load_tax(*tax_path);
      for (const auto& h : *held_out) {
        if (t.has(h)) {
          spec->held_out_leaves.push_back(h);
          continue;
        }
        auto parsed = parse_path(t, h);
        if (!parsed.ok() || parsed.path.is_no_risk())
          throw std::runtime_error("--held-out '" + h + "' is neither a node id nor a path");
        spec->held_out_leaves.push_back(parsed.path.leaf());
      }
      auto bundle = generate_corpus(t, *spec);
      fs::create_directories(*out_dir);
      ManifestWriter manifest;
      manifest.command = "gen-data";
      manifest.out_dir = *out_dir;
      manifest.seed = spec->seed;
      manifest.config = json{{"n_train", spec->n_train},
                             {"n_eval", spec->n_eval},
                             {"risky_ratio", spec->risky_ratio},
                             {"eval_risky_ratio", spec->resolved_eval_ratio()},
                             {"feature_dim", spec->feature_dim},
                             {"class_separation", spec->class_separation},
                             {"label_noise", spec->label_noise},
                             {"held_out_leaves", spec->held_out_leaves}};
      if (!tax_path->empty()) manifest.inputs.push_back(*tax_path);
      manifest.outputs = {"train.jsonl", "base_eval.jsonl", "gen_eval.jsonl", "taxonomy.json"};
      write_corpus(bundle.train, t, (fs::path(*out_dir) / "train.jsonl").string());
      write_corpus(bundle.base_eval, t, (fs::path(*out_dir) / "base_eval.jsonl").string());
      write_corpus(bundle.gen_eval, t, (fs::path(*out_dir) / "gen_eval.jsonl").string());
      write_text_file(fs::path(*out_dir) / "taxonomy.json", taxonomy_to_json(t).dump(2) + "\n");
      manifest.write();
      std::printf("wrote %zu train / %zu base_eval / %zu gen_eval notes to %s\n",
                  bundle.train.size(), bundle.base_eval.size(), bundle.gen_eval.size(),
                  out_dir->c_str());
    });
  }

  // --- train stage1 / grpo -----------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Model training");
  train_cmd->require_subcommand(1);
  auto* stage1_cmd = train_cmd->add_subcommand("stage1", "Train the binary risk filter");
  {
    auto tax_path = std::make_shared<std::string>();
    auto train_path = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto cfg = std::make_shared<Stage1TrainConfig>();
    stage1_cmd->add_option("--taxonomy", *tax_path, "Taxonomy JSON (default: built-in tree)");
    stage1_cmd->add_option("--train", *train_path, "Training notes (JSONL)")->required();
    stage1_cmd->add_option("--out", *out_dir, "Output directory")->required();
    stage1_cmd->add_option("--lr", cfg->learning_rate, "Learning rate")->capture_default_str();
    stage1_cmd->add_option("--epochs", cfg->epochs, "Full-batch epochs")->capture_default_str();
    stage1_cmd->callback([=] {
      Taxonomy t = load_tax(*tax_path);
      Corpus corpus = read_corpus(t, *train_path);
      auto result = train_stage1_sft(corpus, *cfg);
      for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      fs::create_directories(*out_dir);
      save_stage1(result.params, (fs::path(*out_dir) / "stage1.json").string());
      std::ostringstream trace;
      for (std::size_t e = 0; e < result.loss_trace.size(); ++e)
        trace << json{{"epoch", e}, {"loss", result.loss_trace[e]}}.dump() << "\n";
      write_text_file(fs::path(*out_dir) / "loss_trace.jsonl", trace.str());
      ManifestWriter manifest;
      manifest.command = "train stage1";
      manifest.out_dir = *out_dir;
      manifest.config = json{{"learning_rate", cfg->learning_rate}, {"epochs", cfg->epochs}};
      manifest.inputs = {*train_path};
      manifest.outputs = {"stage1.json", "loss_trace.jsonl"};
      manifest.write();
      std::printf("final loss %.6f after %d epochs\n", result.loss_trace.back(), cfg->epochs);
    });
  }
  auto* grpo_cmd = train_cmd->add_subcommand("grpo", "Train the stage-2 path policy");
  {
    auto tax_path = std::make_shared<std::string>(config.get<std::string>("taxonomy", ""));
    auto train_path = std::make_shared<std::string>(config.get<std::string>("train", ""));
    auto eval_path = std::make_shared<std::string>(config.get<std::string>("eval", ""));
    auto init_path = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto cfg = std::make_shared<TrainConfig>();
    auto rcfg = std::make_shared<RewardConfig>();
    auto mode =
        std::make_shared<std::string>(config.get<std::string>("reward-mode", "soft_margin"));
    cfg->group_size = config.get<int>("group-size", cfg->group_size);
    cfg->learning_rate = config.get<double>("lr", cfg->learning_rate);
    cfg->epochs = config.get<int>("epochs", cfg->epochs);
    cfg->batch_size = config.get<int>("batch-size", cfg->batch_size);
    cfg->seed = config.get<std::uint64_t>("seed", cfg->seed);
    cfg->epsilon_std = config.get<double>("epsilon-std", cfg->epsilon_std);
    cfg->min_words = config.get<int>("min-words", cfg->min_words);
    cfg->eval_interval = config.get<int>("eval-interval", cfg->eval_interval);
    auto config_path = std::make_shared<std::string>();
    grpo_cmd->add_option("--config", *config_path, "JSON config file (flags override)");
    grpo_cmd->add_option("--taxonomy", *tax_path, "Taxonomy JSON (default: built-in tree)");
    auto* train_opt = grpo_cmd->add_option("--train", *train_path, "Training notes (JSONL)");
    if (train_path->empty()) train_opt->required();
    grpo_cmd->add_option("--eval", *eval_path, "Evaluation notes for the metric trace");
    grpo_cmd->add_option("--init", *init_path, "Initial stage-2 checkpoint (default: zeros)");
    grpo_cmd->add_option("--out", *out_dir, "Output directory")->required();
    grpo_cmd->add_option("--group-size", cfg->group_size, "Samples per note (G)")
        ->capture_default_str();
    grpo_cmd->add_option("--lr", cfg->learning_rate, "Learning rate")->capture_default_str();
    grpo_cmd->add_option("--epochs", cfg->epochs, "Training epochs")->capture_default_str();
    grpo_cmd->add_option("--batch-size", cfg->batch_size, "Notes per step")
        ->capture_default_str();
    grpo_cmd->add_option("--seed", cfg->seed, "Training seed")->capture_default_str();
    grpo_cmd->add_option("--epsilon-std", cfg->epsilon_std,
                         "Reward spread below which advantages are zeroed")
        ->capture_default_str();
    grpo_cmd->add_option("--reward-mode", *mode, "soft_margin | hard")->capture_default_str();
    grpo_cmd->add_option("--min-words", cfg->min_words, "Reasoning word minimum")
        ->capture_default_str();
    grpo_cmd->add_option("--eval-interval", cfg->eval_interval, "Steps between trace records")
        ->capture_default_str();
    add_reward_flags(grpo_cmd, *rcfg);
    grpo_cmd->callback([=] {
      cfg->reward_mode = reward_mode_from_string(*mode);
      Taxonomy t = load_tax(*tax_path);
      warn_reward_config(*rcfg, t.depth);
      Corpus train_corpus = read_corpus(t, *train_path);
      if (train_corpus.empty()) throw std::runtime_error("training corpus is empty");
      std::optional<Corpus> eval_corpus;
      if (!eval_path->empty()) eval_corpus = read_corpus(t, *eval_path);
      int dim = static_cast<int>(train_corpus.notes.front().features.size());
      Stage2Params init = init_path->empty() ? init_stage2(t, dim) : load_stage2(*init_path);
      if (auto shape = stage2_shape_violations(t, init); !shape.empty())
        throw std::runtime_error("initial checkpoint does not fit the taxonomy: " +
                                 shape.front());
      auto result = grpo_train(std::move(init), t, train_corpus,
                               eval_corpus ? &*eval_corpus : nullptr, *rcfg, *cfg);
      fs::create_directories(*out_dir);
      save_stage2(result.params, (fs::path(*out_dir) / "stage2.json").string());
      write_trace(fs::path(*out_dir) / "trace.jsonl", result.trace);
      ManifestWriter manifest;
      manifest.command = "train grpo";
      manifest.out_dir = *out_dir;
      manifest.seed = cfg->seed;
      manifest.config = json{{"group_size", cfg->group_size},
                             {"learning_rate", cfg->learning_rate},
                             {"epochs", cfg->epochs},
                             {"batch_size", cfg->batch_size},
                             {"epsilon_std", cfg->epsilon_std},
                             {"reward_mode", to_string(cfg->reward_mode)},
                             {"min_words", cfg->min_words},
                             {"eval_interval", cfg->eval_interval},
                             {"reward",
                              {{"level_correct", rcfg->level_correct},
                               {"sibling_base", rcfg->sibling_base},
                               {"safe_risky_penalty", rcfg->safe_risky_penalty},
                               {"format_bonus", rcfg->format_bonus}}}};
      manifest.inputs = {*train_path};
      if (!eval_path->empty()) manifest.inputs.push_back(*eval_path);
      manifest.outputs = {"stage2.json", "trace.jsonl"};
      manifest.write();
      const auto& last = result.trace.back();
      std::printf("step %d  mean_reward %.4f  exact_acc %.4f  sibling_confusion %.4f\n",
                  last.step, last.mean_reward, last.exact_acc, last.sibling_confusion);
    });
  }

  // --- pipeline eval -------------------------------------------------------------
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Cascade pipeline");
  pipeline_cmd->require_subcommand(1);
  auto* eval_cmd = pipeline_cmd->add_subcommand("eval", "Run the cascade over a corpus");
  {
    auto tax_path = std::make_shared<std::string>();
    auto notes_path = std::make_shared<std::string>();
    auto s1_path = std::make_shared<std::string>();
    auto s2_path = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto ccfg = std::make_shared<CascadeConfig>();
    auto rcfg = std::make_shared<RewardConfig>();
    eval_cmd->add_option("--taxonomy", *tax_path, "Taxonomy JSON (default: built-in tree)");
    eval_cmd->add_option("--notes", *notes_path, "Notes to judge (JSONL)")->required();
    eval_cmd->add_option("--stage1", *s1_path, "Stage-1 checkpoint")->required();
    eval_cmd->add_option("--stage2", *s2_path, "Stage-2 checkpoint")->required();
    eval_cmd->add_option("--out", *out_dir, "Output directory")->required();
    eval_cmd->add_option("--tau", ccfg->tau, "Routing threshold on stage-1 risk probability")
        ->capture_default_str();
    auto sweep = std::make_shared<std::vector<double>>();
    eval_cmd->add_option("--sweep", *sweep,
                         "Additional thresholds: prints a recall/efficiency curve");
    eval_cmd->add_option("--min-words", ccfg->min_words, "Reasoning word minimum")
        ->capture_default_str();
    add_reward_flags(eval_cmd, *rcfg);
    eval_cmd->callback([=] {
      Taxonomy t = load_tax(*tax_path);
      Corpus corpus = read_corpus(t, *notes_path);
      Stage1Params s1 = load_stage1(*s1_path);
      Stage2Params s2 = load_stage2(*s2_path);
      if (auto shape = stage2_shape_violations(t, s2); !shape.empty())
        throw std::runtime_error("stage-2 checkpoint does not fit the taxonomy: " +
                                 shape.front());
      if (!sweep->empty()) {
        std::printf("%-8s%-12s%-14s%-13s%s\n", "tau", "routed", "stage1_recall", "overall_acc",
                    "stage2_invocations");
        for (double tau : *sweep) {
          CascadeConfig c = *ccfg;
          c.tau = tau;
          auto r = evaluate_run(t, s1, s2, corpus, c, *rcfg);
          std::size_t risky = 0, routed_risky = 0;
          for (const auto& rec : r.records) {
            if (rec.truth.is_no_risk()) continue;
            ++risky;
            routed_risky += rec.routed_to_stage2 ? 1 : 0;
          }
          double recall = risky ? static_cast<double>(routed_risky) / risky : 0.0;
          std::printf("%-8.3f%-12.4f%-14.4f%-13.4f%zu\n", tau, r.summary.routed_fraction,
                      recall, overall_accuracy(r.records), r.summary.stage2_invocations);
        }
      }
      auto run = evaluate_run(t, s1, s2, corpus, *ccfg, *rcfg);
      fs::create_directories(*out_dir);
      write_predictions(t, run.records, (fs::path(*out_dir) / "predictions.jsonl").string());
      json summary{{"records", run.summary.records},
                   {"routed", run.summary.routed},
                   {"stage2_invocations", run.summary.stage2_invocations},
                   {"routed_fraction", run.summary.routed_fraction}};
      write_text_file(fs::path(*out_dir) / "summary.json", summary.dump(2) + "\n");
      ManifestWriter manifest;
      manifest.command = "pipeline eval";
      manifest.out_dir = *out_dir;
      manifest.config = json{{"tau", ccfg->tau}, {"min_words", ccfg->min_words}};
      manifest.inputs = {*notes_path, *s1_path, *s2_path};
      manifest.outputs = {"predictions.jsonl", "summary.json"};
      manifest.write();
      std::printf("records %zu  routed %zu (%.4f)  stage2_invocations %zu\n",
                  run.summary.records, run.summary.routed, run.summary.routed_fraction,
                  run.summary.stage2_invocations);
    });
  }

  // --- metrics report --------------------------------------------------------------
  auto* metrics_cmd = app.add_subcommand("metrics", "Evaluation metrics");
  metrics_cmd->require_subcommand(1);
  auto* report_cmd = metrics_cmd->add_subcommand("report", "Score a prediction file");
  {
    auto tax_path = std::make_shared<std::string>();
    auto pred_path = std::make_shared<std::string>();
    auto as_json = std::make_shared<bool>(false);
    report_cmd->add_option("--taxonomy", *tax_path, "Taxonomy JSON (default: built-in tree)");
    report_cmd->add_option("--predictions", *pred_path, "Prediction records (JSONL)")
        ->required();
    report_cmd->add_flag("--json", *as_json, "Emit JSON");
    report_cmd->callback([=] {
      Taxonomy t = load_tax(*tax_path);
      auto records = read_predictions(t, *pred_path);
      print_metric_report(compute_metrics(records, t), *as_json);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help exits clean; usage errors exit 2
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
