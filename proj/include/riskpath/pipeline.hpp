#pragma once

// SPDX-License-Identifier: Apache-2.0

// Two-stage cascade: the cheap binary filter discharges notes scoring below
// the routing threshold as No Risk without ever invoking stage 2; routed
// notes get a greedy stage-2 path (which may itself be No Risk, so the
// cascade can overturn stage-1 false positives but never its false
// negatives).

#include <json.hpp>

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskpath/corpus.hpp"
#include "riskpath/policy.hpp"
#include "riskpath/reward.hpp"
#include "riskpath/taxonomy.hpp"

namespace riskpath {

struct PredictionRecord {
  std::string note_id;
  double stage1_prob = 0.0;
  bool routed_to_stage2 = false;
  CategoryPath final;  // No Risk when filtered at stage 1
  CategoryPath truth;
  std::optional<Transcript> transcript;  // absent when filtered
  RewardBreakdown reward;                // scored against truth
};

struct CascadeConfig {
  double tau = 0.5;  // route to stage 2 when stage1_prob >= tau
  int min_words = kDefaultMinWords;
};

inline PredictionRecord cascade_predict(const Taxonomy& t, const Stage1Params& s1,
                                        const Stage2Params& s2, const Note& note,
                                        const CascadeConfig& cfg = {},
                                        const RewardConfig& rcfg = {}) {
  PredictionRecord rec;
  rec.note_id = note.id;
  rec.truth = note.truth;
  rec.stage1_prob = stage1_predict(s1, note.features);
  rec.routed_to_stage2 = rec.stage1_prob >= cfg.tau;
  if (!rec.routed_to_stage2) {
    rec.final = CategoryPath::no_risk();
    rec.reward = accuracy_reward(t, rec.final, note.truth, rcfg);  // no transcript, no bonus
    return rec;
  }
  rec.final = greedy_decode(t, s2, note.features);
  rec.transcript = make_transcript(t, rec.final, cfg.min_words);
  rec.reward = final_reward(t, *rec.transcript, note.truth, rcfg);
  return rec;
}

struct RunSummary {
  std::size_t records = 0;
  std::size_t routed = 0;
  std::size_t stage2_invocations = 0;
  double routed_fraction = 0.0;
};

struct EvalRun {
  std::vector<PredictionRecord> records;
  RunSummary summary;
};

inline EvalRun evaluate_run(const Taxonomy& t, const Stage1Params& s1, const Stage2Params& s2,
                            const Corpus& corpus, const CascadeConfig& cfg = {},
                            const RewardConfig& rcfg = {}) {
  if (corpus.empty()) throw std::invalid_argument("evaluate_run: empty corpus");
  EvalRun run;
  run.records.reserve(corpus.size());
  for (const auto& note : corpus.notes) {
    run.records.push_back(cascade_predict(t, s1, s2, note, cfg, rcfg));
    if (run.records.back().routed_to_stage2) {
      ++run.summary.routed;
      ++run.summary.stage2_invocations;  // greedy decode runs once per routed note
    }
  }
  run.summary.records = run.records.size();
  run.summary.routed_fraction =
      static_cast<double>(run.summary.routed) / static_cast<double>(run.summary.records);
  return run;
}

// ---------------------------------------------------------------------------
// Prediction files: line-delimited JSON records

inline nlohmann::json prediction_to_json(const Taxonomy& t, const PredictionRecord& rec) {
  nlohmann::json j{{"note_id", rec.note_id},
                   {"stage1_prob", rec.stage1_prob},
                   {"routed_to_stage2", rec.routed_to_stage2},
                   {"final", serialize_path(t, rec.final)},
                   {"truth", serialize_path(t, rec.truth)},
                   {"reward",
                    {{"per_level", rec.reward.per_level},
                     {"r_acc", rec.reward.r_acc},
                     {"r_format", rec.reward.r_format},
                     {"r_final", rec.reward.r_final}}}};
  if (rec.transcript) j["transcript_raw"] = rec.transcript->raw;
  return j;
}

inline PredictionRecord prediction_from_json(const Taxonomy& t, const nlohmann::json& j,
                                             int min_words = kDefaultMinWords) {
  PredictionRecord rec;
  rec.note_id = j.at("note_id").get<std::string>();
  rec.stage1_prob = j.at("stage1_prob").get<double>();
  rec.routed_to_stage2 = j.at("routed_to_stage2").get<bool>();
  auto final_parsed = parse_path(t, j.at("final").get<std::string>());
  if (!final_parsed.ok())
    throw std::runtime_error("prediction '" + rec.note_id + "': bad final path");
  rec.final = final_parsed.path;
  auto truth_parsed = parse_path(t, j.at("truth").get<std::string>());
  if (!truth_parsed.ok())
    throw std::runtime_error("prediction '" + rec.note_id + "': bad truth path");
  rec.truth = truth_parsed.path;
  if (j.contains("reward")) {
    const auto& jr = j.at("reward");
    rec.reward.per_level = jr.value("per_level", std::vector<double>{});
    rec.reward.r_acc = jr.value("r_acc", 0.0);
    rec.reward.r_format = jr.value("r_format", 0.0);
    rec.reward.r_final = jr.value("r_final", 0.0);
  }
  if (j.contains("transcript_raw"))
    rec.transcript = parse_transcript(j.at("transcript_raw").get<std::string>(), min_words);
  return rec;
}

inline void write_predictions(const Taxonomy& t, const std::vector<PredictionRecord>& records,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("predictions: cannot open '" + path + "' for writing");
  for (const auto& rec : records) out << prediction_to_json(t, rec).dump() << "\n";
}

inline std::vector<PredictionRecord> read_predictions(const Taxonomy& t,
                                                      const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("predictions: cannot open '" + path + "'");
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(prediction_from_json(t, nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("predictions: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace riskpath
