#pragma once

// SPDX-License-Identifier: Apache-2.0

// Structured-output handling for the "<think> ... </think> <answer> ... </answer>"
// format. Parsing never fails: malformed input yields format_ok = false and
// whatever segments could still be extracted (a well-formed answer after a
// broken think block still parses, it just forfeits the format reward).

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "riskpath/util.hpp"

namespace riskpath {

inline constexpr const char* kThinkOpen = "<think>";
inline constexpr const char* kThinkClose = "</think>";
inline constexpr const char* kAnswerOpen = "<answer>";
inline constexpr const char* kAnswerClose = "</answer>";

struct Transcript {
  std::string raw;
  std::optional<std::string> think;
  std::optional<std::string> answer_raw;
  bool format_ok = false;
  int word_count = 0;  // whitespace tokens of think; 0 when absent
};

namespace detail {

inline std::size_t count_occurrences(std::string_view s, std::string_view needle) {
  std::size_t n = 0, pos = 0;
  while ((pos = s.find(needle, pos)) != std::string_view::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

// serialize_transcript frames each segment with single spaces; drop exactly
// one so the round trip is an identity
inline std::string strip_frame_space(std::string_view s) {
  if (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  if (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return std::string(s);
}

}  // namespace detail

/// Extracts the first think block and the first answer block after it.
/// format_ok requires both tag pairs present in think-then-answer order,
/// each appearing exactly once up to the answer close, and a think of at
/// least `min_words` words. Trailing text after </answer> is tolerated.
inline Transcript parse_transcript(std::string_view raw, int min_words = kDefaultMinWords) {
  Transcript t;
  t.raw = std::string(raw);

  const std::size_t t_open = raw.find(kThinkOpen);
  std::size_t t_close = std::string_view::npos;
  if (t_open != std::string_view::npos)
    t_close = raw.find(kThinkClose, t_open + std::char_traits<char>::length(kThinkOpen));
  if (t_close != std::string_view::npos) {
    std::size_t body = t_open + std::char_traits<char>::length(kThinkOpen);
    t.think = detail::strip_frame_space(raw.substr(body, t_close - body));
  }

  // answer search starts after the think block when one was extracted
  std::size_t a_from =
      t_close != std::string_view::npos
          ? t_close + std::char_traits<char>::length(kThinkClose)
          : 0;
  const std::size_t a_open = raw.find(kAnswerOpen, a_from);
  std::size_t a_close = std::string_view::npos;
  if (a_open != std::string_view::npos)
    a_close = raw.find(kAnswerClose, a_open + std::char_traits<char>::length(kAnswerOpen));
  if (a_close != std::string_view::npos) {
    std::size_t body = a_open + std::char_traits<char>::length(kAnswerOpen);
    t.answer_raw = detail::strip_frame_space(raw.substr(body, a_close - body));
  }

  t.word_count = t.think ? count_words(*t.think) : 0;

  bool structured = t_open != std::string_view::npos && t_close != std::string_view::npos &&
                    a_open != std::string_view::npos && a_close != std::string_view::npos &&
                    t_open < t_close && t_close < a_open && a_open < a_close;
  if (structured) {
    std::string_view prefix =
        raw.substr(0, a_close + std::char_traits<char>::length(kAnswerClose));
    structured = detail::count_occurrences(prefix, kThinkOpen) == 1 &&
                 detail::count_occurrences(prefix, kThinkClose) == 1 &&
                 detail::count_occurrences(prefix, kAnswerOpen) == 1 &&
                 detail::count_occurrences(prefix, kAnswerClose) == 1;
  }
  t.format_ok = structured && t.word_count >= min_words;
  return t;
}

/// Inverse of parse_transcript for tag-free segments. Throws when either
/// argument embeds one of the four tag literals.
inline std::string serialize_transcript(std::string_view think, std::string_view answer) {
  for (const char* tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (contains(think, tag))
      throw std::invalid_argument(std::string("serialize_transcript: think contains ") + tag);
    if (contains(answer, tag))
      throw std::invalid_argument(std::string("serialize_transcript: answer contains ") + tag);
  }
  std::string out;
  out.reserve(think.size() + answer.size() + 40);
  out += kThinkOpen;
  out += ' ';
  out += think;
  out += ' ';
  out += kThinkClose;
  out += ' ';
  out += kAnswerOpen;
  out += ' ';
  out += answer;
  out += ' ';
  out += kAnswerClose;
  return out;
}

}  // namespace riskpath
