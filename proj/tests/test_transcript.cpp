// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "riskpath/rng.hpp"
#include "riskpath/transcript.hpp"

using namespace riskpath;

namespace {

// 69-word think text in the shape of a real moderation transcript, paired
// with the full 4-level answer path; reused by the acceptance suite
const char* kBarSceneThink =
    "The image shows two girls sitting in a bar, with one of them drinking beer and making a "
    "victory gesture, suggesting they might be enjoying nightlife or celebrating an event. "
    "However, since drinking alcohol may be considered inappropriate behavior, we need to "
    "further analyze whether there are more specific inappropriate actions or other potential "
    "risk factors involved. Based on the provided information, the image does not involve any "
    "other illegal or harmful content.";

const char* kBarSceneAnswer =
    "Minor–Inappropriate Behavior Involving Minors–Delinquent Social "
    "Atmosphere–Underage Drinking";

std::string random_tagfree_text(Rng& rng, int max_words) {
  static const char* words[] = {"note",  "image", "rule",   "risk",  "path", "scene",
                                "check", "match", "review", "level", "tag",  "case"};
  int n = 1 + static_cast<int>(rng.index(max_words));
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += words[rng.index(std::size(words))];
  }
  return out;
}

}  // namespace

TEST_SUITE("transcript") {

TEST_CASE("well-formed transcript parses with answer intact") {
  std::string raw = serialize_transcript(kBarSceneThink, kBarSceneAnswer);
  Transcript t = parse_transcript(raw, 20);
  CHECK(t.format_ok);
  REQUIRE(t.think.has_value());
  REQUIRE(t.answer_raw.has_value());
  CHECK(*t.think == kBarSceneThink);
  CHECK(*t.answer_raw == kBarSceneAnswer);
  CHECK(t.word_count >= 20);
}

TEST_CASE("input without tags yields nothing but never fails") {
  Transcript t = parse_transcript("just some free text with no structure", 20);
  CHECK(!t.format_ok);
  CHECK(!t.think.has_value());
  CHECK(!t.answer_raw.has_value());
  CHECK(t.word_count == 0);
}

TEST_CASE("reversed tag order breaks the format") {
  Transcript t = parse_transcript(
      "<answer>No Risk</answer><think>one two three four five six seven eight nine ten "
      "eleven twelve thirteen fourteen fifteen sixteen seventeen eighteen nineteen "
      "twenty</think>",
      20);
  CHECK(!t.format_ok);
  // the think block still extracts; the answer sits before it and is lost
  CHECK(t.think.has_value());
  CHECK(!t.answer_raw.has_value());
}

TEST_CASE("missing think close keeps the answer parseable") {
  Transcript t = parse_transcript("<think> reasoning that never ends <answer>No Risk</answer>", 0);
  CHECK(!t.format_ok);
  CHECK(!t.think.has_value());
  REQUIRE(t.answer_raw.has_value());
  CHECK(*t.answer_raw == "No Risk");
}

TEST_CASE("duplicate tags before the answer close break the format") {
  std::string raw =
      "<think> a a a a a a a a a a a a a a a a a a a a </think> <think> x </think> "
      "<answer>No Risk</answer>";
  CHECK(!parse_transcript(raw, 0).format_ok);
}

TEST_CASE("trailing text after the answer close is tolerated") {
  std::string raw = serialize_transcript(
      "one two three four five six seven eight nine ten eleven twelve thirteen fourteen "
      "fifteen sixteen seventeen eighteen nineteen twenty",
      "No Risk");
  raw += " trailing commentary <think> even stray tags";
  CHECK(parse_transcript(raw, 20).format_ok);
}

TEST_CASE("word-count rule gates format_ok") {
  std::string raw = serialize_transcript("a b c", "X");
  CHECK(!parse_transcript(raw, 20).format_ok);
  CHECK(parse_transcript(raw, 3).format_ok);
  CHECK(parse_transcript(raw, 2).format_ok);  // monotone in min_words
}

TEST_CASE("format_ok is monotone in min_words") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::string think = random_tagfree_text(rng, 30);
    std::string raw = serialize_transcript(think, "No Risk");
    bool prev = parse_transcript(raw, 0).format_ok;
    CHECK(prev);  // structure is valid, zero minimum always passes
    for (int mw = 1; mw <= 32; ++mw) {
      bool ok = parse_transcript(raw, mw).format_ok;
      CHECK(!(ok && !prev));  // lowering the bar never flips true -> false
      prev = ok;
    }
  }
}

TEST_CASE("round-trip identity over random tag-free pairs") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::string think = random_tagfree_text(rng, 40);
    std::string answer = random_tagfree_text(rng, 6);
    Transcript t = parse_transcript(serialize_transcript(think, answer), 0);
    REQUIRE(t.think.has_value());
    REQUIRE(t.answer_raw.has_value());
    CHECK(*t.think == think);
    CHECK(*t.answer_raw == answer);
    CHECK(t.format_ok);
  }
}

TEST_CASE("serialize rejects embedded tag literals") {
  CHECK_THROWS_AS(serialize_transcript("evil </think> injection", "No Risk"),
                  std::invalid_argument);
  CHECK_THROWS_AS(serialize_transcript("fine", "evil <answer>"), std::invalid_argument);
}

TEST_CASE("empty input maps to an empty transcript") {
  Transcript t = parse_transcript("", 20);
  CHECK(!t.format_ok);
  CHECK(t.raw.empty());
}

}  // TEST_SUITE
