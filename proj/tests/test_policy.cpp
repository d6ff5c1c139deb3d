// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <map>

#include "riskpath/demo_taxonomy.hpp"
#include "riskpath/policy.hpp"
#include "support.hpp"

using namespace riskpath;
using namespace testsupport;

TEST_SUITE("policy") {

TEST_CASE("stage1: zero params give 0.5") {
  Stage1Params p;
  p.weights = {0, 0};
  CHECK(stage1_predict(p, {1.0, -2.0}) == doctest::Approx(0.5));
}

TEST_CASE("stage1: logistic(ln 3) = 3/4") {
  // by hand: 1 / (1 + e^-ln3) = 1 / (1 + 1/3) = 3/4
  Stage1Params p;
  p.weights = {1, 0};
  CHECK(stage1_predict(p, {std::log(3.0), 5.0}) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("stage1: probability is monotone in the bias") {
  Stage1Params p;
  p.weights = {0.3, -0.2};
  FeatureVector x{1.0, 2.0};
  double prev = 0.0;
  for (double b : {-20.0, -5.0, 0.0, 5.0, 20.0, 50.0}) {
    p.bias = b;
    double prob = stage1_predict(p, x);
    CHECK(prob > prev);
    prev = prob;
  }
  CHECK(prev > 1.0 - 1e-9);  // saturates toward 1
}

TEST_CASE("stage1: dimension mismatch throws") {
  Stage1Params p;
  p.weights = {1, 2, 3};
  CHECK_THROWS_AS(stage1_predict(p, {1.0}), std::invalid_argument);
}

TEST_CASE("stage2: single-chain taxonomy gives logprob 0 for its sure path") {
  // one root, one child per level: the unique risky path and No Risk split
  // the root softmax; a huge root logit makes the path certain
  Taxonomy t = chain_taxonomy(3);
  Stage2Params p = init_stage2(t, 2);
  p.root.bias[0] = 40.0;  // root action overwhelms No Risk
  FeatureVector x{0.0, 0.0};
  CategoryPath path = CategoryPath::risky({"c1", "c2", "c3"});
  CHECK(stage2_path_logprob(t, p, x, path) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("stage2: uniform softmax arithmetic on a crafted tree") {
  // root decision with 3 equiprobable actions (2 roots + No Risk at zero
  // params) and 3 further binary levels: ln(1/3) + 3 ln(1/2)
  Taxonomy t = uniform_taxonomy(4, 2, 2);
  Stage2Params p = init_stage2(t, 3);
  FeatureVector x{0.4, -1.0, 2.0};  // weights are zero, features irrelevant
  CategoryPath path = enumerate_paths(t).front();
  double expected = std::log(1.0 / 3.0) + 3.0 * std::log(0.5);
  CHECK(stage2_path_logprob(t, p, x, path) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("stage2: path probabilities normalize over leaves plus no-risk") {
  Taxonomy t = demo_taxonomy();
  Rng rng(42);
  for (int draw = 0; draw < 10; ++draw) {
    Stage2Params p = random_stage2(t, 5, rng);
    FeatureVector x = random_features(5, rng);
    double total = std::exp(stage2_path_logprob(t, p, x, CategoryPath::no_risk()));
    for (const auto& path : enumerate_paths(t))
      total += std::exp(stage2_path_logprob(t, p, x, path));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("stage2: invalid paths and wrong dimensions throw") {
  Taxonomy t = uniform_taxonomy(3, 2, 2);
  Stage2Params p = init_stage2(t, 2);
  CHECK_THROWS(stage2_path_logprob(t, p, {1.0, 2.0}, CategoryPath::risky({"n1", "n2.1", "x"})));
  CHECK_THROWS(stage2_path_logprob(t, p, {1.0}, enumerate_paths(t).front()));
}

TEST_CASE("gradient matches central finite differences") {
  Taxonomy t = uniform_taxonomy(3, 2, 3);
  Rng rng(7);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    Stage2Params p = random_stage2(t, 4, rng);
    FeatureVector x = random_features(4, rng);
    auto paths = enumerate_paths(t);
    CategoryPath path =
        trial % 5 == 0 ? CategoryPath::no_risk() : paths[rng.index(paths.size())];
    Stage2Params g = stage2_grad_logprob(t, p, x, path);

    Stage2Params work = p;
    double worst = 0.0;
    // entries below the floor are cancellation noise, not signal
    auto score = [&](double fd, double analytic) {
      double denom = std::max(std::abs(fd), std::abs(analytic));
      if (denom < 1e-3) return;
      worst = std::max(worst, std::abs(fd - analytic) / denom);
    };
    auto check_block = [&](DecisionBlock& wb, const DecisionBlock& gb) {
      for (std::size_t r = 0; r < wb.weights.size(); ++r)
        for (std::size_t c = 0; c < wb.weights[r].size(); ++c)
          score(fd_logprob(t, work, x, path, &wb.weights[r][c], h), gb.weights[r][c]);
      for (std::size_t r = 0; r < wb.bias.size(); ++r)
        score(fd_logprob(t, work, x, path, &wb.bias[r], h), gb.bias[r]);
    };
    check_block(work.root, g.root);
    if (!path.is_no_risk())
      for (std::size_t k = 0; k + 1 < path.ids().size(); ++k)
        check_block(work.nodes.at(path.ids()[k]), g.nodes.at(path.ids()[k]));
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("gradient is zero off the sampled path") {
  Taxonomy t = uniform_taxonomy(3, 2, 2);
  Rng rng(3);
  Stage2Params p = random_stage2(t, 3, rng);
  FeatureVector x = random_features(3, rng);
  CategoryPath path = enumerate_paths(t).front();  // descends n1
  Stage2Params g = stage2_grad_logprob(t, p, x, path);
  for (const auto& [id, block] : g.nodes) {
    bool on_path =
        std::find(path.ids().begin(), path.ids().end() - 1, id) != path.ids().end() - 1;
    if (on_path) continue;
    for (const auto& row : block.weights)
      for (double v : row) CHECK(v == 0.0);
    for (double v : block.bias) CHECK(v == 0.0);
  }
}

TEST_CASE("saturated decisions have near-zero gradient") {
  Taxonomy t = chain_taxonomy(2);
  Stage2Params p = init_stage2(t, 2);
  p.root.bias[0] = 30.0;   // root action certain
  p.root.bias[1] = -30.0;  // No Risk suppressed
  FeatureVector x{1.0, 1.0};
  Stage2Params g = stage2_grad_logprob(t, p, x, CategoryPath::risky({"c1", "c2"}));
  for (double v : g.root.bias) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("greedy decode: all-zero params pick first-listed actions") {
  Taxonomy t = demo_taxonomy();
  Stage2Params p = init_stage2(t, 2);
  CategoryPath path = greedy_decode(t, p, {0.0, 0.0});
  // ties break to the lowest index; No Risk sits last at the root
  CHECK(path.ids() == std::vector<NodeId>{"1", "1.1", "1.1.1", "1.1.1.1"});
}

TEST_CASE("greedy decode: boosted chain wins") {
  Taxonomy t = uniform_taxonomy(3, 2, 2);
  Stage2Params p = init_stage2(t, 2);
  p.root.bias[1] = 10.0;              // n2
  p.nodes.at("n2").bias[1] = 10.0;    // n2.2
  p.nodes.at("n2.2").bias[0] = 10.0;  // n2.2.1
  CHECK(greedy_decode(t, p, {0.3, 0.7}).ids() == std::vector<NodeId>{"n2", "n2.2", "n2.2.1"});
}

TEST_CASE("greedy decode picks the per-decision argmax everywhere") {
  Taxonomy t = uniform_taxonomy(3, 2, 3);  // 18 leaves
  Rng rng(19);
  for (int trial = 0; trial < 25; ++trial) {
    Stage2Params p = random_stage2(t, 4, rng);
    FeatureVector x = random_features(4, rng);
    CategoryPath greedy = greedy_decode(t, p, x);
    auto root_logits = block_logits(p.root, x);
    std::size_t root_choice =
        greedy.is_no_risk()
            ? t.roots.size()
            : static_cast<std::size_t>(
                  std::find(t.roots.begin(), t.roots.end(), greedy.ids()[0]) - t.roots.begin());
    for (std::size_t a = 0; a < root_logits.size(); ++a)
      CHECK(root_logits[root_choice] >= root_logits[a]);
    if (greedy.is_no_risk()) continue;
    for (std::size_t k = 0; k + 1 < greedy.ids().size(); ++k) {
      const auto& kids = t.node(greedy.ids()[k]).children;
      auto logits = block_logits(p.nodes.at(greedy.ids()[k]), x);
      std::size_t choice = static_cast<std::size_t>(
          std::find(kids.begin(), kids.end(), greedy.ids()[k + 1]) - kids.begin());
      for (std::size_t a = 0; a < logits.size(); ++a) CHECK(logits[choice] >= logits[a]);
    }
  }
}

TEST_CASE("greedy decode equals brute-force argmax for a peaked policy") {
  // with every decision on one chain near-certain, that chain dominates all
  // alternatives (any other path pays at least one vanishing step), so the
  // enumeration oracle and the greedy decode must agree
  Taxonomy t = uniform_taxonomy(3, 2, 3);
  Stage2Params p = init_stage2(t, 2);
  p.root.bias[1] = 12.0;
  p.nodes.at("n2").bias[2] = 12.0;
  p.nodes.at("n2.3").bias[0] = 12.0;
  FeatureVector x{0.1, -0.2};
  CategoryPath greedy = greedy_decode(t, p, x);
  CategoryPath best;
  double best_lp = stage2_path_logprob(t, p, x, CategoryPath::no_risk());
  for (const auto& path : enumerate_paths(t)) {
    double lp = stage2_path_logprob(t, p, x, path);
    if (lp > best_lp) {
      best_lp = lp;
      best = path;
    }
  }
  CHECK(greedy == best);
  CHECK(greedy.ids() == std::vector<NodeId>{"n2", "n2.3", "n2.3.1"});
}

TEST_CASE("greedy decode: adding a constant per decision point changes nothing") {
  Taxonomy t = uniform_taxonomy(3, 2, 2);
  Rng rng(23);
  Stage2Params p = random_stage2(t, 3, rng);
  FeatureVector x = random_features(3, rng);
  CategoryPath before = greedy_decode(t, p, x);
  Stage2Params shifted = p;
  for (auto& v : shifted.root.bias) v += 3.25;
  for (auto& [id, block] : shifted.nodes)
    for (auto& v : block.bias) v += -1.5;
  CHECK(greedy_decode(t, shifted, x) == before);
}

TEST_CASE("sampling: deterministic policy collapses the group") {
  Taxonomy t = uniform_taxonomy(3, 2, 2);
  Stage2Params p = init_stage2(t, 2);
  p.root.bias[0] = 50.0;
  p.nodes.at("n1").bias[1] = 50.0;
  p.nodes.at("n1.2").bias[0] = 50.0;
  auto group = stage2_sample_group(t, p, {0.0, 0.0}, 6, 99);
  for (const auto& s : group)
    CHECK(s.path.ids() == std::vector<NodeId>{"n1", "n1.2", "n1.2.1"});
}

TEST_CASE("sampling: same seed reproduces the group exactly") {
  Taxonomy t = demo_taxonomy();
  Rng rng(5);
  Stage2Params p = random_stage2(t, 4, rng);
  FeatureVector x = random_features(4, rng);
  auto a = stage2_sample_group(t, p, x, 8, 1234);
  auto b = stage2_sample_group(t, p, x, 8, 1234);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].path == b[i].path);
    CHECK(a[i].logprob == b[i].logprob);
    CHECK(a[i].transcript.raw == b[i].transcript.raw);
  }
}

TEST_CASE("sampling: logprob matches stage2_path_logprob exactly") {
  Taxonomy t = demo_taxonomy();
  Rng rng(6);
  Stage2Params p = random_stage2(t, 4, rng);
  FeatureVector x = random_features(4, rng);
  for (const auto& s : stage2_sample_group(t, p, x, 16, 77))
    CHECK(s.logprob == stage2_path_logprob(t, p, x, s.path));
}

TEST_CASE("sampling: group below 2 is rejected") {
  Taxonomy t = chain_taxonomy(2);
  Stage2Params p = init_stage2(t, 1);
  CHECK_THROWS_AS(stage2_sample_group(t, p, {0.0}, 1, 1), std::invalid_argument);
}

TEST_CASE("sampling: transcripts are well-formed and parse back to the path") {
  Taxonomy t = demo_taxonomy();
  Rng rng(8);
  Stage2Params p = random_stage2(t, 4, rng, 0.3);
  FeatureVector x = random_features(4, rng);
  for (const auto& s : stage2_sample_group(t, p, x, 8, 2024, 20)) {
    CHECK(s.transcript.format_ok);
    CHECK(s.transcript.word_count >= 20);
    REQUIRE(s.transcript.answer_raw.has_value());
    auto parsed = parse_path(t, *s.transcript.answer_raw);
    REQUIRE(parsed.ok());
    CHECK(parsed.path == s.path);
  }
}

TEST_CASE("sampling: empirical frequencies track exact probabilities") {
  // uniform over 54 leaves + No Risk, crafted with bias-only logits:
  // root probs (27/55, 27/55, 1/55), every deeper decision uniform 1/3
  Taxonomy t = demo_taxonomy();
  Stage2Params p = init_stage2(t, 1);
  p.root.bias[0] = std::log(27.0);
  p.root.bias[1] = std::log(27.0);
  // No Risk bias stays 0 = log(1)
  FeatureVector x{0.0};

  const int n = 100000;
  std::map<std::string, int> counts;
  for (int chunk = 0; chunk < n / 1000; ++chunk)
    for (const auto& s : stage2_sample_group(t, p, x, 1000, derive_seed(314159, chunk)))
      counts[s.path.is_no_risk() ? std::string("<no-risk>") : s.path.leaf()]++;

  const double q = 1.0 / 55.0;
  const double se = std::sqrt(n * q * (1 - q));
  auto leaves = t.leaves();
  for (const auto& leaf : leaves) {
    double dev = std::abs(counts[leaf] - n * q);
    CHECK_MESSAGE(dev <= 3.0 * se, "leaf ", leaf, " count ", counts[leaf]);
  }
  CHECK(std::abs(counts["<no-risk>"] - n * q) <= 3.0 * se);

  // chi-square over the 55 cells: rejection at alpha=0.01 needs
  // chi2 > 85.95 (df=54); a healthy sampler sits far below
  double chi2 = 0.0;
  for (const auto& leaf : leaves) chi2 += std::pow(counts[leaf] - n * q, 2) / (n * q);
  chi2 += std::pow(counts["<no-risk>"] - n * q, 2) / (n * q);
  CHECK(chi2 < 85.95);
}

TEST_CASE("checkpoints: stage-2 round trip is bit-exact") {
  Taxonomy t = demo_taxonomy();
  Rng rng(31);
  Stage2Params p = random_stage2(t, 16, rng);
  auto dir = temp_dir("ckpt");
  auto path = (dir / "stage2.json").string();
  save_stage2(p, path);
  Stage2Params q = load_stage2(path);
  CHECK(q.feature_dim == p.feature_dim);
  CHECK(q.root.weights == p.root.weights);
  CHECK(q.root.bias == p.root.bias);
  REQUIRE(q.nodes.size() == p.nodes.size());
  for (const auto& [id, block] : p.nodes) {
    CHECK(q.nodes.at(id).weights == block.weights);
    CHECK(q.nodes.at(id).bias == block.bias);
  }
  CHECK(stage2_shape_violations(t, q).empty());
  // write -> read -> write produces identical bytes
  auto path2 = (dir / "stage2b.json").string();
  save_stage2(q, path2);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("checkpoints: stage-1 round trip") {
  Stage1Params p;
  p.weights = {0.1, -2.5, 3.14159265358979, 1e-17};
  p.bias = -0.75;
  auto dir = temp_dir("ckpt1");
  auto path = (dir / "stage1.json").string();
  save_stage1(p, path);
  Stage1Params q = load_stage1(path);
  CHECK(q.weights == p.weights);
  CHECK(q.bias == p.bias);
}

TEST_CASE("shape violations catch missing and misshapen blocks") {
  Taxonomy t = uniform_taxonomy(3, 2, 2);
  Stage2Params p = init_stage2(t, 3);
  CHECK(stage2_shape_violations(t, p).empty());
  Stage2Params missing = p;
  missing.nodes.erase("n1");
  CHECK(!stage2_shape_violations(t, missing).empty());
  Stage2Params wrong = p;
  wrong.root.bias.push_back(0.0);
  wrong.root.weights.emplace_back(3, 0.0);
  CHECK(!stage2_shape_violations(t, wrong).empty());
}

}  // TEST_SUITE
