#pragma once

// Score-log data model: per-token confidence scores of one model on one
// dataset, the QA records they were computed from, and the core-token
// samples (CTCS) extracted from them.
//
// On-disk format is line-delimited JSON. The first line is a header
//   {"model_id", "model_role", "dataset_id", "dataset_role",
//    "tokenizer_id", "format_version": "1"}
// and every following line is one entry
//   {"record_id", "answer_tokens", "token_probs", "core_token_indices"}.

#include "error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace ugauge {

inline constexpr std::string_view kFormatVersion = "1";

enum class ModelRole { original, target, unlearned, retrained, other };
enum class DatasetRole { forget, validation, retain, update, holdout };

inline std::string_view to_string(ModelRole r) {
  switch (r) {
  case ModelRole::original: return "M_o";
  case ModelRole::target: return "M_t";
  case ModelRole::unlearned: return "M_u";
  case ModelRole::retrained: return "M_r";
  case ModelRole::other: return "other";
  }
  return "other";
}

inline std::string_view to_string(DatasetRole r) {
  switch (r) {
  case DatasetRole::forget: return "D_f";
  case DatasetRole::validation: return "D_v";
  case DatasetRole::retain: return "D_r";
  case DatasetRole::update: return "D_u";
  case DatasetRole::holdout: return "holdout";
  }
  return "holdout";
}

inline std::optional<ModelRole> parse_model_role(std::string_view s) {
  for (auto r : {ModelRole::original, ModelRole::target, ModelRole::unlearned,
                 ModelRole::retrained, ModelRole::other})
    if (to_string(r) == s)
      return r;
  return std::nullopt;
}

inline std::optional<DatasetRole> parse_dataset_role(std::string_view s) {
  for (auto r : {DatasetRole::forget, DatasetRole::validation, DatasetRole::retain,
                 DatasetRole::update, DatasetRole::holdout})
    if (to_string(r) == s)
      return r;
  return std::nullopt;
}

//==============================================================================

struct LogHeader {
  std::string model_id;
  ModelRole model_role = ModelRole::other;
  std::string dataset_id;
  DatasetRole dataset_role = DatasetRole::holdout;
  std::string tokenizer_id;
  std::string format_version{kFormatVersion};

  bool operator==(const LogHeader &) const = default;
};

struct ScoreEntry {
  std::string record_id;
  std::vector<std::string> answer_tokens;
  std::vector<double> token_probs;
  std::vector<std::size_t> core_token_indices;

  bool operator==(const ScoreEntry &) const = default;
};

struct TokenScoreLog {
  LogHeader header;
  std::vector<ScoreEntry> entries;

  bool operator==(const TokenScoreLog &) const = default;
};

/// Flat sample of core-token confidence scores for one (model, dataset).
struct CtcsSample {
  std::string model_id;
  std::string dataset_id;
  std::vector<double> values;
  /// Entries dropped because they had no core tokens.
  std::size_t skipped_entries = 0;

  std::size_t n() const noexcept { return values.size(); }
};

struct MultipleChoice {
  std::vector<std::string> options; // exactly 4
  int correct = 0;                  // 1-based
};

struct QARecord {
  std::string id;
  std::string question;
  std::string answer;
  std::vector<std::string> core_words;
  std::optional<std::string> fill_blank;
  std::optional<MultipleChoice> choices;
  std::optional<std::string> adversarial_question;
  std::optional<std::string> adversarial_type;
};

//==============================================================================
// Validation

/// Throws ValidationError on the first violated entry invariant.
inline void validate_entry(const ScoreEntry &e) {
  if (e.answer_tokens.size() != e.token_probs.size())
    throw ValidationError(e.record_id, "token_probs",
                          "length " + std::to_string(e.token_probs.size()) +
                              " != answer_tokens length " +
                              std::to_string(e.answer_tokens.size()));
  for (std::size_t i = 0; i < e.token_probs.size(); ++i) {
    const double p = e.token_probs[i];
    if (!(p > 0.0 && p <= 1.0))
      throw ValidationError(e.record_id, "token_probs",
                            "value at position " + std::to_string(i) +
                                " outside (0, 1]");
  }
  for (std::size_t i = 0; i < e.core_token_indices.size(); ++i) {
    const auto idx = e.core_token_indices[i];
    if (idx >= e.answer_tokens.size())
      throw ValidationError(e.record_id, "core_token_indices",
                            "index " + std::to_string(idx) + " out of range [0, " +
                                std::to_string(e.answer_tokens.size()) + ")");
    if (i > 0 && idx <= e.core_token_indices[i - 1])
      throw ValidationError(e.record_id, "core_token_indices",
                            "indices must be strictly increasing");
  }
}

inline void validate_log(const TokenScoreLog &log) {
  std::unordered_set<std::string> seen;
  for (const auto &e : log.entries) {
    validate_entry(e);
    if (!seen.insert(e.record_id).second)
      throw ValidationError(e.record_id, "record_id", "duplicate record_id");
  }
}

//==============================================================================
// Serialization

namespace detail {

using ojson = nlohmann::ordered_json;

template <class T>
T required(const nlohmann::json &j, const char *key, const std::string &source,
           std::size_t line) {
  auto it = j.find(key);
  if (it == j.end())
    throw ParseError(source, line, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception &ex) {
    throw ParseError(source, line, std::string("field '") + key + "': " + ex.what());
  }
}

inline nlohmann::json parse_line(const std::string &text, const std::string &source,
                                 std::size_t line) {
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_object())
      throw ParseError(source, line, "expected a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error &ex) {
    throw ParseError(source, line, ex.what());
  }
}

inline bool blank(const std::string &s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

/// Common header fields shared by score, generation and truth-ratio logs.
inline LogHeader parse_header(const nlohmann::json &j, const std::string &source,
                              std::size_t line, bool tokenizer_required) {
  LogHeader h;
  h.model_id = required<std::string>(j, "model_id", source, line);
  const auto mrole = required<std::string>(j, "model_role", source, line);
  const auto drole = required<std::string>(j, "dataset_role", source, line);
  h.dataset_id = required<std::string>(j, "dataset_id", source, line);
  if (tokenizer_required)
    h.tokenizer_id = required<std::string>(j, "tokenizer_id", source, line);
  else if (j.contains("tokenizer_id"))
    h.tokenizer_id = required<std::string>(j, "tokenizer_id", source, line);
  h.format_version = required<std::string>(j, "format_version", source, line);
  auto mr = parse_model_role(mrole);
  if (!mr)
    throw ParseError(source, line, "unknown model_role '" + mrole + "'");
  auto dr = parse_dataset_role(drole);
  if (!dr)
    throw ParseError(source, line, "unknown dataset_role '" + drole + "'");
  h.model_role = *mr;
  h.dataset_role = *dr;
  if (h.format_version != kFormatVersion)
    throw ParseError(source, line,
                     "unsupported format_version '" + h.format_version + "'");
  return h;
}

inline ojson header_json(const LogHeader &h, bool with_tokenizer) {
  ojson j;
  j["model_id"] = h.model_id;
  j["model_role"] = std::string(to_string(h.model_role));
  j["dataset_id"] = h.dataset_id;
  j["dataset_role"] = std::string(to_string(h.dataset_role));
  if (with_tokenizer)
    j["tokenizer_id"] = h.tokenizer_id;
  j["format_version"] = h.format_version;
  return j;
}

/// Iterates non-blank lines, handing (json, line number) to the callback.
/// The first non-blank line goes to on_header.
template <class OnHeader, class OnEntry>
void read_jsonl(std::istream &in, const std::string &source, OnHeader &&on_header,
                OnEntry &&on_entry) {
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (blank(text))
      continue;
    auto j = parse_line(text, source, line);
    if (!have_header) {
      on_header(j, line);
      have_header = true;
    } else {
      on_entry(j, line);
    }
  }
  if (!have_header)
    throw ParseError(source, line, "missing header line");
}

inline std::ifstream open_input(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError(path, 0, "cannot open file");
  return in;
}

} // namespace detail

/// Parses and validates a score log. `source` names the stream in errors.
inline TokenScoreLog parse_score_log(std::istream &in, const std::string &source) {
  TokenScoreLog log;
  std::unordered_set<std::string> seen;
  detail::read_jsonl(
      in, source,
      [&](const nlohmann::json &j, std::size_t line) {
        log.header = detail::parse_header(j, source, line, true);
      },
      [&](const nlohmann::json &j, std::size_t line) {
        ScoreEntry e;
        e.record_id = detail::required<std::string>(j, "record_id", source, line);
        e.answer_tokens =
            detail::required<std::vector<std::string>>(j, "answer_tokens", source, line);
        e.token_probs =
            detail::required<std::vector<double>>(j, "token_probs", source, line);
        const auto &idx = j.find("core_token_indices");
        if (idx == j.end() || !idx->is_array())
          throw ParseError(source, line, "missing array 'core_token_indices'");
        for (const auto &v : *idx) {
          if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ParseError(source, line,
                             "core_token_indices must be non-negative integers");
          e.core_token_indices.push_back(v.get<std::size_t>());
        }
        try {
          validate_entry(e);
        } catch (const ValidationError &ex) {
          throw ParseError(source, line, ex.what());
        }
        if (!seen.insert(e.record_id).second)
          throw ParseError(source, line,
                           "record '" + e.record_id + "': duplicate record_id");
        log.entries.push_back(std::move(e));
      });
  return log;
}

inline TokenScoreLog load_score_log(const std::string &path) {
  auto in = detail::open_input(path);
  return parse_score_log(in, path);
}

inline void write_score_log(std::ostream &out, const TokenScoreLog &log) {
  out << detail::header_json(log.header, true).dump() << '\n';
  for (const auto &e : log.entries) {
    detail::ojson j;
    j["record_id"] = e.record_id;
    j["answer_tokens"] = e.answer_tokens;
    j["token_probs"] = e.token_probs;
    j["core_token_indices"] = e.core_token_indices;
    out << j.dump() << '\n';
  }
}

inline void save_score_log(const std::string &path, const TokenScoreLog &log) {
  std::ofstream out(path);
  if (!out)
    throw Error("cannot write " + path);
  write_score_log(out, log);
}

/// Reads a QA dataset file (one QARecord per line, no header).
inline std::vector<QARecord> parse_dataset(std::istream &in, const std::string &source) {
  std::vector<QARecord> records;
  std::unordered_set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (detail::blank(text))
      continue;
    const auto j = detail::parse_line(text, source, line);
    QARecord r;
    r.id = detail::required<std::string>(j, "id", source, line);
    r.question = detail::required<std::string>(j, "question", source, line);
    r.answer = detail::required<std::string>(j, "answer", source, line);
    r.core_words = detail::required<std::vector<std::string>>(j, "core_words", source, line);
    if (j.contains("fill_blank"))
      r.fill_blank = detail::required<std::string>(j, "fill_blank", source, line);
    if (j.contains("choices") || j.contains("correct_choice")) {
      MultipleChoice mc;
      mc.options = detail::required<std::vector<std::string>>(j, "choices", source, line);
      mc.correct = detail::required<int>(j, "correct_choice", source, line);
      if (mc.options.size() != 4)
        throw ParseError(source, line, "record '" + r.id + "': choices must have 4 options");
      if (mc.correct < 1 || mc.correct > 4)
        throw ParseError(source, line,
                         "record '" + r.id + "': correct_choice must be in 1..4");
      r.choices = std::move(mc);
    }
    if (j.contains("adversarial_question"))
      r.adversarial_question =
          detail::required<std::string>(j, "adversarial_question", source, line);
    if (j.contains("adversarial_type"))
      r.adversarial_type = detail::required<std::string>(j, "adversarial_type", source, line);
    if (!seen.insert(r.id).second)
      throw ParseError(source, line, "record '" + r.id + "': duplicate id");
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<QARecord> load_dataset(const std::string &path) {
  auto in = detail::open_input(path);
  return parse_dataset(in, path);
}

//==============================================================================
// Core-token alignment

namespace detail {

inline constexpr std::string_view kSentencePieceSpace = "\xE2\x96\x81"; // U+2581
inline constexpr std::string_view kByteLevelSpace = "\xC4\xA0";        // U+0120

/// Strips one leading whitespace marker. Returns true if one was present.
inline bool strip_marker(std::string_view &tok) {
  for (auto marker : {kSentencePieceSpace, kByteLevelSpace, std::string_view(" ")}) {
    if (tok.starts_with(marker)) {
      tok.remove_prefix(marker.size());
      return true;
    }
  }
  return false;
}

inline bool is_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

inline std::string_view trim_punct(std::string_view w) {
  while (!w.empty() && is_punct(w.front()))
    w.remove_prefix(1);
  while (!w.empty() && is_punct(w.back()))
    w.remove_suffix(1);
  return w;
}

} // namespace detail

struct AlignResult {
  std::vector<std::size_t> indices;
  /// Core words with no occurrence in the answer tokens.
  std::vector<std::string> unmatched;
};

/// Maps core words onto answer-token positions.
///
/// A word matches a run of consecutive tokens whose marker-stripped text
/// concatenates to the word, provided the run starts and ends on a word
/// boundary (whitespace marker, punctuation, or sequence edge). Every
/// occurrence of every word contributes all of its token positions.
/// Surrounding punctuation on a core word is ignored.
inline AlignResult align_core_tokens(std::span<const std::string> answer_tokens,
                                     std::span<const std::string> core_words) {
  if (answer_tokens.empty())
    throw DomainError("align_core_tokens: answer_tokens is empty");

  const std::size_t n = answer_tokens.size();
  std::vector<std::string_view> text(n);
  std::vector<bool> marked(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string_view t = answer_tokens[i];
    marked[i] = detail::strip_marker(t);
    text[i] = t;
  }
  auto starts_word = [&](std::size_t i) {
    return i == 0 || marked[i] || (!text[i].empty() && detail::is_punct(text[i].front())) ||
           (!text[i - 1].empty() && detail::is_punct(text[i - 1].back()));
  };
  auto ends_word = [&](std::size_t j) { return j == n || starts_word(j); };

  std::set<std::size_t> hits;
  AlignResult result;
  for (const auto &raw : core_words) {
    std::string_view word = detail::trim_punct(raw);
    if (word.empty())
      word = raw;
    bool found = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!starts_word(i))
        continue;
      std::string acc;
      for (std::size_t j = i; j < n && acc.size() < word.size(); ++j) {
        acc += text[j];
        if (acc.size() == word.size() && acc == word && ends_word(j + 1)) {
          for (std::size_t k = i; k <= j; ++k)
            hits.insert(k);
          found = true;
        }
        if (!word.starts_with(acc))
          break;
      }
    }
    if (!found)
      result.unmatched.push_back(raw);
  }
  result.indices.assign(hits.begin(), hits.end());
  return result;
}

//==============================================================================

/// Concatenates the probabilities at core positions, entry order then index
/// order. Entries without core tokens are skipped and counted.
inline CtcsSample extract_ctcs(const TokenScoreLog &log) {
  CtcsSample s{log.header.model_id, log.header.dataset_id, {}, 0};
  for (const auto &e : log.entries) {
    if (e.core_token_indices.empty()) {
      ++s.skipped_entries;
      continue;
    }
    for (auto idx : e.core_token_indices)
      s.values.push_back(e.token_probs.at(idx));
  }
  if (s.values.empty())
    throw Error("extract_ctcs: no core tokens in " + log.header.model_id + " on " +
                log.header.dataset_id + " (" + std::to_string(s.skipped_entries) +
                " entries skipped)");
  return s;
}

} // namespace ugauge
