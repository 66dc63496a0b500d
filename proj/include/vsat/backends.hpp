#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vsat/media.hpp"

namespace vsat {

// ---------------------------------------------------------------- LLM

enum class SchemaId { SpellFindings, SpellFix, HarmSpans };

std::string_view schema_name(SchemaId id);  // "SPELL_FINDINGS", ...
SchemaId schema_from_name(std::string_view name);
/// Versioned system prompt shipped with the library.
std::string_view system_prompt(SchemaId id);

struct LlmRequest {
  std::string system_prompt;
  std::string user_prompt;
  SchemaId schema = SchemaId::SpellFindings;
  double temperature = 0.0;
};

/// Stable key for a request: FNV-1a 64 over schema name, system and user
/// prompt, as 16 lowercase hex digits.
std::string prompt_hash(const LlmRequest& req);

struct SpellFindingsResponse {
  struct Item {
    std::string word;
    std::string rationale;
    friend bool operator==(const Item&, const Item&) = default;
  };
  std::vector<Item> findings;
  friend bool operator==(const SpellFindingsResponse&, const SpellFindingsResponse&) = default;
};

struct SpellFixResponse {
  std::vector<std::string> candidates;
  friend bool operator==(const SpellFixResponse&, const SpellFixResponse&) = default;
};

struct CharSpan {
  int start = 0;
  int end = 0;
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
  friend auto operator<=>(const CharSpan&, const CharSpan&) = default;
};

struct HarmSpansResponse {
  std::vector<CharSpan> spans;
  friend bool operator==(const HarmSpansResponse&, const HarmSpansResponse&) = default;
};

// Strict parsers: a missing or mistyped required field is a SchemaError.
SpellFindingsResponse parse_spell_findings(const nlohmann::json& j);
SpellFixResponse parse_spell_fix(const nlohmann::json& j);
HarmSpansResponse parse_harm_spans(const nlohmann::json& j);
nlohmann::json to_json(const SpellFindingsResponse& r);
nlohmann::json to_json(const SpellFixResponse& r);
nlohmann::json to_json(const HarmSpansResponse& r);
/// Parses `text` as JSON and checks it against `schema`; returns the
/// canonical value.
nlohmann::json validate_response(SchemaId schema, std::string_view text);

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;

  /// Sends the request and returns a schema-valid value. A schema violation
  /// is retried once; a second violation raises SchemaError.
  nlohmann::json complete(const LlmRequest& req);

  SpellFindingsResponse spell_findings(const LlmRequest& req) { return parse_spell_findings(complete(req)); }
  SpellFixResponse spell_fix(const LlmRequest& req) { return parse_spell_fix(complete(req)); }
  HarmSpansResponse harm_spans(const LlmRequest& req) { return parse_harm_spans(complete(req)); }

  virtual std::string name() const = 0;

 protected:
  /// Raw response text. `attempt` is 0 for the first try.
  virtual std::string raw_complete(const LlmRequest& req, int attempt) = 0;
};

/// Answers from a table keyed by prompt_hash. Table file format:
/// {"<hash>": <response object or JSON string>, ...}.
class MockLlm final : public LlmBackend {
 public:
  MockLlm() = default;
  explicit MockLlm(std::map<std::string, std::string> table) : table_(std::move(table)) {}
  static MockLlm from_file(const std::filesystem::path& path);
  static MockLlm from_json(const nlohmann::json& j);

  void add(const LlmRequest& req, const nlohmann::json& response);
  std::size_t size() const { return table_.size(); }
  nlohmann::json to_table_json() const;
  std::string name() const override { return "mock"; }

 protected:
  std::string raw_complete(const LlmRequest& req, int attempt) override;

 private:
  std::map<std::string, std::string> table_;
};

struct HttpRetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double timeout_s = 30.0;
};

/// Caps the number of concurrent calls.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit) : limit_(limit < 1 ? 1 : limit) {}
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int used_ = 0;
};

struct HttpLlmConfig {
  std::string base_url;  // e.g. "https://api.example.com/v1"
  std::string model;
  std::string api_key;
  HttpRetryPolicy retry;
  int max_in_flight = 4;

  /// Fills unset fields from VSAT_LLM_BASE_URL / VSAT_LLM_MODEL / VSAT_LLM_API_KEY.
  void apply_env();
};

/// Chat-completion style endpoint: POST {base_url}/chat/completions.
class HttpLlm final : public LlmBackend {
 public:
  explicit HttpLlm(HttpLlmConfig config);
  std::string name() const override { return "http"; }

  /// Request body sent for `req`.
  nlohmann::json request_body(const LlmRequest& req) const;

 protected:
  std::string raw_complete(const LlmRequest& req, int attempt) override;

 private:
  HttpLlmConfig config_;
  InFlightLimiter limiter_;
};

// ---------------------------------------------------------------- labels

/// The fixed audio-event class table.
class LabelTable {
 public:
  static const LabelTable& builtin();
  static LabelTable parse(std::string_view text);  // one label per line

  bool contains(const std::string& label) const { return set_.count(label) > 0; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
  std::set<std::string> set_;
};

// ---------------------------------------------------------------- ASR

struct TranscriptWord {
  std::string text;
  std::int64_t start_ms = 0;  // clip-relative
  std::int64_t end_ms = 0;
  double confidence = 1.0;

  friend bool operator==(const TranscriptWord&, const TranscriptWord&) = default;
};

struct Transcript {
  std::vector<TranscriptWord> words;
  std::vector<std::string> warnings;
};

/// Parses transcript JSON: a list of words, or {"words": [...]}.
std::vector<TranscriptWord> parse_transcript_json(const nlohmann::json& j);
nlohmann::json transcript_to_json(const std::vector<TranscriptWord>& words);

/// Sorts words by start and shifts any start that precedes the previous
/// word's end up to that end. A word left with no duration is dropped. Each
/// adjustment adds a warning.
Transcript normalize_transcript(std::vector<TranscriptWord> words);

class AsrBackend {
 public:
  virtual ~AsrBackend() = default;
  virtual Transcript transcribe(const AudioClip& clip) = 0;
  virtual std::string name() const = 0;
};

/// Reads <dir>/<cue_id>/transcript.json.
class AssetsAsr final : public AsrBackend {
 public:
  explicit AssetsAsr(std::filesystem::path dir) : dir_(std::move(dir)) {}
  Transcript transcribe(const AudioClip& clip) override;
  std::string name() const override { return "assets"; }

 private:
  std::filesystem::path dir_;
};

struct HttpServiceConfig {
  std::string url;  // full endpoint URL accepting audio/wav
  HttpRetryPolicy retry;
};

/// POSTs the clip as audio/wav; expects transcript JSON back.
class HttpAsr final : public AsrBackend {
 public:
  explicit HttpAsr(HttpServiceConfig config) : config_(std::move(config)) {}
  Transcript transcribe(const AudioClip& clip) override;
  std::string name() const override { return "http"; }

 private:
  HttpServiceConfig config_;
};

// ---------------------------------------------------------------- events

struct EventScore {
  std::string label;
  double score = 0.0;

  friend bool operator==(const EventScore&, const EventScore&) = default;
};

/// Accepts clip-level scores ([{label,score}]) or per-window scores
/// ({"windows": [[{label,score}], ...]}), max-pooled over windows. Labels
/// must be in `table`, scores in [0,1]. Output sorted by score descending,
/// then label.
std::vector<EventScore> parse_events_json(const nlohmann::json& j, const LabelTable& table);
nlohmann::json events_to_json(const std::vector<EventScore>& events);

class EventBackend {
 public:
  virtual ~EventBackend() = default;
  virtual std::vector<EventScore> classify(const AudioClip& clip) = 0;
  virtual std::string name() const = 0;
};

/// Reads <dir>/<cue_id>/events.json.
class AssetsEvents final : public EventBackend {
 public:
  explicit AssetsEvents(std::filesystem::path dir, const LabelTable& table = LabelTable::builtin())
      : dir_(std::move(dir)), table_(table) {}
  std::vector<EventScore> classify(const AudioClip& clip) override;
  std::string name() const override { return "assets"; }

 private:
  std::filesystem::path dir_;
  const LabelTable& table_;
};

class HttpEvents final : public EventBackend {
 public:
  explicit HttpEvents(HttpServiceConfig config, const LabelTable& table = LabelTable::builtin())
      : config_(std::move(config)), table_(table) {}
  std::vector<EventScore> classify(const AudioClip& clip) override;
  std::string name() const override { return "http"; }

 private:
  HttpServiceConfig config_;
  const LabelTable& table_;
};

/// POSTs `body` to `url` with bounded retries and exponential backoff.
/// Retries transport failures, 429 and 5xx; other statuses fail at once.
std::string http_post_with_retry(const std::string& url, const std::string& body,
                                 const std::string& content_type,
                                 const std::map<std::string, std::string>& headers,
                                 const HttpRetryPolicy& policy);

}  // namespace vsat
