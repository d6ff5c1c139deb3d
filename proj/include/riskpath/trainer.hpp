#pragma once

// SPDX-License-Identifier: Apache-2.0

// Training: full-batch logistic regression for the stage-1 filter, and
// group-relative policy optimization for the stage-2 path policy. For each
// note a group of G paths is sampled, scored with the composite reward, and
// normalized within the group (mean 0, population std 1); the update ascends
// the advantage-weighted path log-probabilities. No critic, no KL term, no
// ratio clipping. Everything is deterministic given (seed, config, corpus):
// per-note sample streams are derived from (step seed, note id), so results
// do not depend on scheduling.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskpath/corpus.hpp"
#include "riskpath/policy.hpp"
#include "riskpath/reward.hpp"
#include "riskpath/rng.hpp"
#include "riskpath/taxonomy.hpp"

namespace riskpath {

// ---------------------------------------------------------------------------
// Stage 1: supervised binary filter

struct Stage1TrainConfig {
  double learning_rate = 0.1;
  int epochs = 500;
};

struct Stage1TrainResult {
  Stage1Params params;
  std::vector<double> loss_trace;  // epochs+1 entries; first is the untrained loss
  std::vector<std::string> warnings;
};

/// Full-batch gradient descent on mean binary cross-entropy, zero init.
/// Labels derive from truth: No Risk = 0 (safe), any path = 1 (risky).
inline Stage1TrainResult train_stage1_sft(const Corpus& corpus,
                                          const Stage1TrainConfig& cfg = {}) {
  if (corpus.empty()) throw std::invalid_argument("train_stage1_sft: empty corpus");
  const std::size_t n = corpus.size();
  const std::size_t dim = corpus.notes.front().features.size();

  std::vector<double> labels(n);
  std::size_t risky = 0;
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = corpus.notes[i].truth.is_no_risk() ? 0.0 : 1.0;
    risky += labels[i] > 0.5 ? 1 : 0;
  }

  Stage1TrainResult out;
  if (risky == 0 || risky == n)
    out.warnings.push_back("corpus has a single class; filter will trivially saturate");

  out.params.weights.assign(dim, 0.0);
  out.params.bias = 0.0;

  auto mean_loss = [&] {
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double p = stage1_predict(out.params, corpus.notes[i].features);
      p = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
      loss += labels[i] > 0.5 ? -std::log(p) : -std::log(1.0 - p);
    }
    return loss / static_cast<double>(n);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    out.loss_trace.push_back(mean_loss());
    std::vector<double> grad_w(dim, 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double err = stage1_predict(out.params, corpus.notes[i].features) - labels[i];
      for (std::size_t k = 0; k < dim; ++k) grad_w[k] += err * corpus.notes[i].features[k];
      grad_b += err;
    }
    for (std::size_t k = 0; k < dim; ++k)
      out.params.weights[k] -= cfg.learning_rate * grad_w[k] / static_cast<double>(n);
    out.params.bias -= cfg.learning_rate * grad_b / static_cast<double>(n);
  }
  out.loss_trace.push_back(mean_loss());
  return out;
}

// ---------------------------------------------------------------------------
// Group-relative advantages

/// A_i = (R_i - mean) / population-std; all zero when the spread is below
/// epsilon_std (degenerate groups must not divide by ~0).
inline std::vector<double> compute_advantages(std::span<const double> rewards,
                                              double epsilon_std = 1e-8) {
  if (rewards.size() < 2)
    throw std::invalid_argument("compute_advantages: need a group of at least 2");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  double std_dev = std::sqrt(var / n);
  std::vector<double> out(rewards.size(), 0.0);
  if (std_dev < epsilon_std) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / std_dev;
  return out;
}

// ---------------------------------------------------------------------------
// GRPO

struct TrainConfig {
  int group_size = 4;  // G
  double learning_rate = 0.2;
  int epochs = 1;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double epsilon_std = 1e-8;
  RewardMode reward_mode = RewardMode::soft_margin;
  int min_words = kDefaultMinWords;
  int eval_interval = 10;  // steps between metric-trace records
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (cfg.group_size < 2) throw std::invalid_argument("train: group_size must be at least 2");
  if (cfg.learning_rate < 0.0) throw std::invalid_argument("train: learning_rate must be >= 0");
  if (cfg.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.epsilon_std <= 0.0) throw std::invalid_argument("train: epsilon_std must be positive");
  if (cfg.eval_interval < 1) throw std::invalid_argument("train: eval_interval must be >= 1");
}

struct GroupSample {
  std::string note_id;
  std::vector<PathSample> samples;
  std::vector<double> rewards;     // R_i = final reward of sample i
  std::vector<double> advantages;  // A_i
};

/// Samples and scores one group for a note. The note's sample stream is
/// derived from (step_seed, note id).
inline GroupSample make_group_sample(const Taxonomy& t, const Stage2Params& p, const Note& note,
                                     const RewardConfig& rcfg, const TrainConfig& cfg,
                                     std::uint64_t step_seed) {
  GroupSample g;
  g.note_id = note.id;
  g.samples = stage2_sample_group(t, p, note.features, cfg.group_size,
                                  derive_seed(step_seed, note.id), cfg.min_words);
  g.rewards.reserve(g.samples.size());
  for (const auto& s : g.samples)
    g.rewards.push_back(
        score_transcript(t, s.transcript, note.truth, rcfg, cfg.reward_mode).r_final);
  g.advantages = compute_advantages(g.rewards, cfg.epsilon_std);
  return g;
}

/// Batch objective estimate: mean over notes and samples of A_i * log pi.
inline double grpo_objective(const Taxonomy& t, const Stage2Params& p,
                             const std::vector<Note const*>& batch,
                             const std::vector<GroupSample>& groups) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < groups.size(); ++b)
    for (std::size_t i = 0; i < groups[b].samples.size(); ++i) {
      total += groups[b].advantages[i] *
               stage2_path_logprob(t, p, batch[b]->features, groups[b].samples[i].path);
      ++count;
    }
  return count ? total / static_cast<double>(count) : 0.0;
}

namespace detail {

inline void axpy_block(DecisionBlock& acc, const DecisionBlock& g, double a) {
  for (std::size_t r = 0; r < acc.weights.size(); ++r)
    for (std::size_t c = 0; c < acc.weights[r].size(); ++c) acc.weights[r][c] += a * g.weights[r][c];
  for (std::size_t r = 0; r < acc.bias.size(); ++r) acc.bias[r] += a * g.bias[r];
}

inline void axpy(Stage2Params& acc, const Stage2Params& g, double a) {
  axpy_block(acc.root, g.root, a);
  for (auto& [id, block] : acc.nodes) axpy_block(block, g.nodes.at(id), a);
}

inline double squared_norm(const Stage2Params& p) {
  double s = 0.0;
  auto add_block = [&s](const DecisionBlock& b) {
    for (const auto& row : b.weights)
      for (double v : row) s += v * v;
    for (double v : b.bias) s += v * v;
  };
  add_block(p.root);
  for (const auto& [id, block] : p.nodes) add_block(block);
  return s;
}

}  // namespace detail

struct StepStats {
  double mean_reward = 0.0;
  double mean_abs_advantage = 0.0;
  double grad_norm = 0.0;
};

/// Gradient of the batch objective at the sampled groups: the average of
/// A_i * grad log pi(path_i | x) over notes and samples. Zero-spread groups
/// contribute exactly nothing.
inline Stage2Params grpo_gradient(const Taxonomy& t, const Stage2Params& p,
                                  const std::vector<Note const*>& batch,
                                  const std::vector<GroupSample>& groups) {
  Stage2Params grad = zeros_like(p);
  const double scale =
      1.0 / (static_cast<double>(batch.size()) *
             static_cast<double>(groups.empty() ? 1 : groups.front().samples.size()));
  for (std::size_t b = 0; b < groups.size(); ++b) {
    const auto& g = groups[b];
    for (std::size_t i = 0; i < g.samples.size(); ++i) {
      if (g.advantages[i] == 0.0) continue;
      Stage2Params sample_grad =
          stage2_grad_logprob(t, p, batch[b]->features, g.samples[i].path);
      detail::axpy(grad, sample_grad, g.advantages[i] * scale);
    }
  }
  return grad;
}

/// One ascent step over a batch of notes: sample groups, normalize rewards,
/// accumulate the advantage-weighted gradient, apply learning_rate.
inline StepStats grpo_step(Stage2Params& p, const Taxonomy& t,
                           const std::vector<Note const*>& batch, const RewardConfig& rcfg,
                           const TrainConfig& cfg, std::uint64_t step_seed) {
  if (batch.empty()) throw std::invalid_argument("grpo_step: empty batch");
  validate_train_config(cfg);

  std::vector<GroupSample> groups;
  groups.reserve(batch.size());
  StepStats stats;
  for (const Note* note : batch) {
    groups.push_back(make_group_sample(t, p, *note, rcfg, cfg, step_seed));
    for (std::size_t i = 0; i < groups.back().rewards.size(); ++i) {
      stats.mean_reward += groups.back().rewards[i];
      stats.mean_abs_advantage += std::abs(groups.back().advantages[i]);
    }
  }
  const double total = static_cast<double>(batch.size() * cfg.group_size);
  stats.mean_reward /= total;
  stats.mean_abs_advantage /= total;

  Stage2Params grad = grpo_gradient(t, p, batch, groups);
  stats.grad_norm = std::sqrt(detail::squared_norm(grad));
  detail::axpy(p, grad, cfg.learning_rate);
  return stats;
}

// ---------------------------------------------------------------------------
// Training loop

struct TraceRecord {
  int step = 0;
  double mean_reward = 0.0;
  double exact_acc = 0.0;
  double sibling_confusion = 0.0;
};

struct GrpoResult {
  Stage2Params params;
  std::vector<TraceRecord> trace;
};

/// Greedy-decode evaluation used for the metric trace. mean_reward is the
/// reward of the greedy prediction (deterministic in the params), exact_acc
/// the exact-match rate, sibling_confusion the fraction of risky-truth notes
/// whose prediction is correct down to the last level and lands on a sibling
/// there (the deep near-miss the soft margin targets; shallower divergences
/// are sibling errors at their own level, not confusions between the
/// fine-grained classes).
inline TraceRecord evaluate_policy(const Taxonomy& t, const Stage2Params& p,
                                   const Corpus& corpus, const RewardConfig& rcfg,
                                   const TrainConfig& cfg) {
  TraceRecord rec;
  std::size_t risky_truths = 0, sibling_errors = 0, exact = 0;
  for (const auto& note : corpus.notes) {
    CategoryPath pred = greedy_decode(t, p, note.features);
    Transcript tr = make_transcript(t, pred, cfg.min_words);
    rec.mean_reward += score_transcript(t, tr, note.truth, rcfg, cfg.reward_mode).r_final;
    if (pred == note.truth) ++exact;
    if (!note.truth.is_no_risk()) {
      ++risky_truths;
      if (!pred.is_no_risk() && !(pred == note.truth)) {
        int divergence = 0;
        for (int l = 0; l < t.depth; ++l)
          if (pred.ids()[l] != note.truth.ids()[l]) {
            divergence = l + 1;
            break;
          }
        if (divergence == t.depth) {
          auto sibs = siblings(t, note.truth.ids()[t.depth - 1]);
          if (std::find(sibs.begin(), sibs.end(), pred.ids()[t.depth - 1]) != sibs.end())
            ++sibling_errors;
        }
      }
    }
  }
  const double n = static_cast<double>(corpus.size());
  rec.mean_reward /= n;
  rec.exact_acc = static_cast<double>(exact) / n;
  rec.sibling_confusion =
      risky_truths ? static_cast<double>(sibling_errors) / static_cast<double>(risky_truths)
                   : 0.0;
  return rec;
}

/// Epoch loop over shuffled batches. The trace records the untrained policy
/// (step 0), every eval_interval steps, and the final step.
inline GrpoResult grpo_train(Stage2Params init, const Taxonomy& t, const Corpus& train,
                             const Corpus* eval_corpus, const RewardConfig& rcfg,
                             const TrainConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("grpo_train: empty corpus");
  validate_train_config(cfg);
  if (auto shape = stage2_shape_violations(t, init); !shape.empty())
    throw std::invalid_argument("grpo_train: params do not fit taxonomy: " + shape.front());

  const Corpus& eval_on = eval_corpus ? *eval_corpus : train;
  GrpoResult out;
  out.params = std::move(init);

  auto record = [&](int step) {
    TraceRecord rec = evaluate_policy(t, out.params, eval_on, rcfg, cfg);
    rec.step = step;
    out.trace.push_back(rec);
  };

  record(0);
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle:" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);

    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      std::vector<Note const*> batch;
      for (std::size_t i = at; i < std::min(order.size(), at + cfg.batch_size); ++i)
        batch.push_back(&train.notes[order[i]]);
      ++step;
      grpo_step(out.params, t, batch, rcfg, cfg, derive_seed(cfg.seed, step));
      if (step % cfg.eval_interval == 0) record(step);
    }
  }
  if (out.trace.back().step != step) record(step);
  return out;
}

// ---------------------------------------------------------------------------
// Gradient verification

struct GradCheckReport {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped = 0;  // entries where both gradients sit below the magnitude floor
};

/// Central finite differences of stage2_path_logprob against the analytic
/// gradient, over every parameter entry touched by the path. Entries whose
/// analytic and numeric magnitudes both fall below `magnitude_floor` are
/// counted as skipped rather than scored: below that scale the difference
/// quotient is dominated by cancellation noise (saturated softmax entries
/// land here), and a relative comparison would only measure that noise. The
/// default floor keeps truncation error well under a 1e-5 tolerance for
/// scored entries.
inline GradCheckReport gradcheck(const Taxonomy& t, const Stage2Params& p,
                                 const FeatureVector& x, const CategoryPath& path,
                                 double step = 1e-5, double magnitude_floor = 1e-3) {
  if (step <= 0.0) throw std::invalid_argument("gradcheck: step must be positive");
  Stage2Params analytic = stage2_grad_logprob(t, p, x, path);
  GradCheckReport report;
  Stage2Params work = p;

  auto probe = [&](double* param, double analytic_value) {
    const double saved = *param;
    *param = saved + step;
    double up = stage2_path_logprob(t, work, x, path);
    *param = saved - step;
    double down = stage2_path_logprob(t, work, x, path);
    *param = saved;
    double fd = (up - down) / (2.0 * step);
    double denom = std::max(std::abs(fd), std::abs(analytic_value));
    if (denom < magnitude_floor) {
      ++report.skipped;
      return;
    }
    ++report.checked;
    report.max_rel_error = std::max(report.max_rel_error, std::abs(fd - analytic_value) / denom);
  };

  auto probe_block = [&](DecisionBlock& wb, const DecisionBlock& gb) {
    for (std::size_t r = 0; r < wb.weights.size(); ++r)
      for (std::size_t c = 0; c < wb.weights[r].size(); ++c)
        probe(&wb.weights[r][c], gb.weights[r][c]);
    for (std::size_t r = 0; r < wb.bias.size(); ++r) probe(&wb.bias[r], gb.bias[r]);
  };

  // only blocks on the path carry gradient; everything else is exactly zero
  probe_block(work.root, analytic.root);
  if (!path.is_no_risk())
    for (std::size_t k = 0; k + 1 < path.ids().size(); ++k)
      probe_block(work.nodes.at(path.ids()[k]), analytic.nodes.at(path.ids()[k]));
  return report;
}

}  // namespace riskpath
