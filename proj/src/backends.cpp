#include "vsat/backends.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "vsat/error.hpp"
#include "vsat/text.hpp"

namespace vsat {

namespace embedded {
extern const std::string_view prompt_spell_findings;
extern const std::string_view prompt_spell_fix;
extern const std::string_view prompt_harm_spans;
extern const std::string_view audio_event_labels;
}  // namespace embedded

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view schema_name(SchemaId id) {
  switch (id) {
    case SchemaId::SpellFindings:
      return "SPELL_FINDINGS";
    case SchemaId::SpellFix:
      return "SPELL_FIX";
    case SchemaId::HarmSpans:
      return "HARM_SPANS";
  }
  return "?";
}

SchemaId schema_from_name(std::string_view name) {
  if (name == "SPELL_FINDINGS") return SchemaId::SpellFindings;
  if (name == "SPELL_FIX") return SchemaId::SpellFix;
  if (name == "HARM_SPANS") return SchemaId::HarmSpans;
  throw ValidationError("unknown response schema " + std::string(name));
}

std::string_view system_prompt(SchemaId id) {
  switch (id) {
    case SchemaId::SpellFindings:
      return embedded::prompt_spell_findings;
    case SchemaId::SpellFix:
      return embedded::prompt_spell_fix;
    case SchemaId::HarmSpans:
      return embedded::prompt_harm_spans;
  }
  return {};
}

std::string prompt_hash(const LlmRequest& req) {
  std::uint64_t h = 14695981039346656037ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  feed(schema_name(req.schema));
  feed(std::string_view("\0", 1));
  feed(req.system_prompt);
  feed(std::string_view("\0", 1));
  feed(req.user_prompt);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- schemas

namespace {

const json& require(const json& j, const char* key, const char* where) {
  if (!j.is_object()) throw SchemaError(std::string(where) + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(std::string(where) + ": missing field \"" + key + "\"");
  return *it;
}

std::string require_string(const json& j, const char* key, const char* where) {
  const auto& v = require(j, key, where);
  if (!v.is_string()) throw SchemaError(std::string(where) + ": field \"" + key + "\" must be a string");
  return v.get<std::string>();
}

std::int64_t require_int(const json& j, const char* key, const char* where) {
  const auto& v = require(j, key, where);
  if (!v.is_number_integer()) {
    if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) {
      return static_cast<std::int64_t>(v.get<double>());
    }
    throw SchemaError(std::string(where) + ": field \"" + key + "\" must be an integer");
  }
  return v.get<std::int64_t>();
}

const json& require_array(const json& j, const char* key, const char* where) {
  const auto& v = require(j, key, where);
  if (!v.is_array()) throw SchemaError(std::string(where) + ": field \"" + key + "\" must be a list");
  return v;
}

}  // namespace

SpellFindingsResponse parse_spell_findings(const json& j) {
  SpellFindingsResponse r;
  for (const auto& item : require_array(j, "findings", "SPELL_FINDINGS")) {
    SpellFindingsResponse::Item it{require_string(item, "word", "SPELL_FINDINGS finding"),
                                   require_string(item, "rationale", "SPELL_FINDINGS finding")};
    if (text::trim(it.word).empty()) throw SchemaError("SPELL_FINDINGS finding: empty word");
    r.findings.push_back(std::move(it));
  }
  return r;
}

SpellFixResponse parse_spell_fix(const json& j) {
  SpellFixResponse r;
  for (const auto& c : require_array(j, "candidates", "SPELL_FIX")) {
    if (!c.is_string()) throw SchemaError("SPELL_FIX: candidates must be strings");
    r.candidates.push_back(c.get<std::string>());
  }
  return r;
}

HarmSpansResponse parse_harm_spans(const json& j) {
  HarmSpansResponse r;
  for (const auto& s : require_array(j, "spans", "HARM_SPANS")) {
    const auto start = require_int(s, "start", "HARM_SPANS span");
    const auto end = require_int(s, "end", "HARM_SPANS span");
    if (start < 0 || end <= start || end > 1'000'000) {
      throw SchemaError("HARM_SPANS span: need 0 <= start < end");
    }
    r.spans.push_back({static_cast<int>(start), static_cast<int>(end)});
  }
  return r;
}

json to_json(const SpellFindingsResponse& r) {
  json items = json::array();
  for (const auto& f : r.findings) items.push_back({{"word", f.word}, {"rationale", f.rationale}});
  return {{"findings", items}};
}

json to_json(const SpellFixResponse& r) { return {{"candidates", r.candidates}}; }

json to_json(const HarmSpansResponse& r) {
  json spans = json::array();
  for (const auto& s : r.spans) spans.push_back({{"start", s.start}, {"end", s.end}});
  return {{"spans", spans}};
}

json validate_response(SchemaId schema, std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    throw SchemaError(std::string(schema_name(schema)) + ": response is not valid JSON");
  }
  switch (schema) {
    case SchemaId::SpellFindings:
      return to_json(parse_spell_findings(j));
    case SchemaId::SpellFix:
      return to_json(parse_spell_fix(j));
    case SchemaId::HarmSpans:
      return to_json(parse_harm_spans(j));
  }
  throw SchemaError("unknown schema");
}

// ---------------------------------------------------------------- LLM

json LlmBackend::complete(const LlmRequest& req) {
  if (req.temperature != 0.0) throw ValidationError("LLM requests must use temperature 0");
  std::string last;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto text = raw_complete(req, attempt);
    try {
      return validate_response(req.schema, text);
    } catch (const SchemaError& e) {
      last = e.what();
    }
  }
  throw SchemaError(last + " (after retry)");
}

MockLlm MockLlm::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("mock LLM table must be a JSON object");
  std::map<std::string, std::string> table;
  for (const auto& [key, value] : j.items()) {
    table[key] = value.is_string() ? value.get<std::string>() : value.dump();
  }
  return MockLlm(std::move(table));
}

MockLlm MockLlm::from_file(const fs::path& path) {
  try {
    return from_json(json::parse(read_text_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError("mock LLM table " + path.string() + ": " + e.what());
  }
}

void MockLlm::add(const LlmRequest& req, const json& response) { table_[prompt_hash(req)] = response.dump(); }

json MockLlm::to_table_json() const {
  json j = json::object();
  for (const auto& [k, v] : table_) {
    try {
      j[k] = json::parse(v);
    } catch (const json::exception&) {
      j[k] = v;
    }
  }
  return j;
}

std::string MockLlm::raw_complete(const LlmRequest& req, int) {
  const auto h = prompt_hash(req);
  const auto it = table_.find(h);
  if (it == table_.end()) {
    throw BackendError("mock_miss", "no mock response for " + std::string(schema_name(req.schema)) +
                                        " prompt " + h);
  }
  return it->second;
}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return used_ < limit_; });
  ++used_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --used_;
  }
  cv_.notify_one();
}

void HttpLlmConfig::apply_env() {
  auto env = [](const char* name, std::string& field) {
    if (!field.empty()) return;
    if (const char* v = std::getenv(name)) field = v;
  };
  env("VSAT_LLM_BASE_URL", base_url);
  env("VSAT_LLM_MODEL", model);
  env("VSAT_LLM_API_KEY", api_key);
}

HttpLlm::HttpLlm(HttpLlmConfig config) : config_(std::move(config)), limiter_(config_.max_in_flight) {
  if (config_.base_url.empty()) throw ConfigError("HTTP LLM backend needs a base URL (VSAT_LLM_BASE_URL)");
  if (config_.model.empty()) throw ConfigError("HTTP LLM backend needs a model name (VSAT_LLM_MODEL)");
}

json HttpLlm::request_body(const LlmRequest& req) const {
  return {{"model", config_.model},
          {"messages",
           json::array({{{"role", "system"}, {"content", req.system_prompt}},
                        {{"role", "user"}, {"content", req.user_prompt}}})},
          {"temperature", 0},
          {"response_format", {{"type", "json_object"}}}};
}

std::string HttpLlm::raw_complete(const LlmRequest& req, int) {
  std::map<std::string, std::string> headers;
  if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";

  limiter_.acquire();
  std::string body;
  try {
    body = http_post_with_retry(url, request_body(req).dump(), "application/json", headers, config_.retry);
  } catch (...) {
    limiter_.release();
    throw;
  }
  limiter_.release();

  // An unexpected envelope is handed on as-is so that it counts as a schema
  // violation and gets its retry.
  try {
    const auto j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    return body;
  }
}

// ---------------------------------------------------------------- HTTP

namespace {

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL needs a scheme: " + url);
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

}  // namespace

std::string http_post_with_retry(const std::string& url, const std::string& body,
                                 const std::string& content_type,
                                 const std::map<std::string, std::string>& headers,
                                 const HttpRetryPolicy& policy) {
  const auto parts = split_url(url);
  httplib::Client client(parts.origin);
  const auto secs = static_cast<time_t>(policy.timeout_s);
  const auto usecs = static_cast<time_t>((policy.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);

  const int attempts = std::clamp(policy.max_attempts, 1, 3);
  std::string last_error;
  auto backoff = policy.initial_backoff;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(parts.path, hdrs, body, content_type);
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    if (res->status != 429 && res->status < 500) break;
  }
  throw BackendError("backend_unavailable", url + ": " + last_error);
}

// ---------------------------------------------------------------- labels

LabelTable LabelTable::parse(std::string_view body) {
  LabelTable t;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    auto line = text::trim(body.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    if (!t.set_.insert(line).second) throw ConfigError("duplicate label in table: " + line);
    t.labels_.push_back(std::move(line));
  }
  return t;
}

const LabelTable& LabelTable::builtin() {
  static const LabelTable table = parse(embedded::audio_event_labels);
  return table;
}

// ---------------------------------------------------------------- ASR

std::vector<TranscriptWord> parse_transcript_json(const json& j) {
  const json* list = &j;
  if (j.is_object()) {
    const auto it = j.find("words");
    if (it == j.end()) throw BackendError("malformed_transcript", "transcript object has no \"words\" list");
    list = &*it;
  }
  if (!list->is_array()) throw BackendError("malformed_transcript", "transcript must be a list of words");
  std::vector<TranscriptWord> words;
  try {
    for (const auto& w : *list) {
      TranscriptWord tw;
      tw.text = require_string(w, "text", "transcript word");
      tw.start_ms = require_int(w, "start_ms", "transcript word");
      tw.end_ms = require_int(w, "end_ms", "transcript word");
      if (w.contains("confidence")) {
        if (!w["confidence"].is_number()) throw SchemaError("transcript word: confidence must be a number");
        tw.confidence = w["confidence"].get<double>();
      }
      if (tw.start_ms < 0 || tw.end_ms <= tw.start_ms) {
        throw SchemaError("transcript word \"" + tw.text + "\": need 0 <= start_ms < end_ms");
      }
      if (!(tw.confidence >= 0.0 && tw.confidence <= 1.0)) {
        throw SchemaError("transcript word \"" + tw.text + "\": confidence outside [0,1]");
      }
      words.push_back(std::move(tw));
    }
  } catch (const SchemaError& e) {
    throw BackendError("malformed_transcript", e.what());
  }
  return words;
}

json transcript_to_json(const std::vector<TranscriptWord>& words) {
  json out = json::array();
  for (const auto& w : words) {
    out.push_back({{"text", w.text}, {"start_ms", w.start_ms}, {"end_ms", w.end_ms}, {"confidence", w.confidence}});
  }
  return out;
}

Transcript normalize_transcript(std::vector<TranscriptWord> words) {
  std::stable_sort(words.begin(), words.end(),
                   [](const auto& a, const auto& b) { return a.start_ms < b.start_ms; });
  Transcript t;
  for (auto& w : words) {
    if (!t.words.empty() && w.start_ms < t.words.back().end_ms) {
      const auto prev_end = t.words.back().end_ms;
      if (w.end_ms <= prev_end) {
        t.warnings.push_back("dropped word \"" + w.text + "\" at " + std::to_string(w.start_ms) +
                             "ms: fully inside the previous word");
        continue;
      }
      t.warnings.push_back("word \"" + w.text + "\" start moved from " + std::to_string(w.start_ms) +
                           "ms to " + std::to_string(prev_end) + "ms to remove overlap");
      w.start_ms = prev_end;
    }
    t.words.push_back(std::move(w));
  }
  return t;
}

Transcript AssetsAsr::transcribe(const AudioClip& clip) {
  if (clip.samples.empty()) return {};
  const auto path = dir_ / std::to_string(clip.cue_id) / "transcript.json";
  if (!fs::exists(path)) throw AssetMissingError(path.string());
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw BackendError("malformed_transcript", path.string() + ": " + e.what());
  }
  return normalize_transcript(parse_transcript_json(j));
}

Transcript HttpAsr::transcribe(const AudioClip& clip) {
  if (clip.samples.empty()) return {};
  const auto wav = encode_wav(clip);
  const auto body = http_post_with_retry(config_.url, std::string(wav.begin(), wav.end()), "audio/wav", {},
                                         config_.retry);
  try {
    return normalize_transcript(parse_transcript_json(json::parse(body)));
  } catch (const json::exception& e) {
    throw BackendError("malformed_transcript", std::string("ASR response: ") + e.what());
  }
}

// ---------------------------------------------------------------- events

std::vector<EventScore> parse_events_json(const json& j, const LabelTable& table) {
  std::vector<const json*> windows;
  if (j.is_array()) {
    windows.push_back(&j);
  } else if (j.is_object() && j.contains("windows") && j["windows"].is_array()) {
    for (const auto& w : j["windows"]) windows.push_back(&w);
  } else {
    throw BackendError("malformed_events", "events must be a list of {label, score} or {\"windows\": [...]}");
  }

  std::map<std::string, double> pooled;
  std::vector<std::string> unknown;
  for (const json* win : windows) {
    if (!win->is_array()) throw BackendError("malformed_events", "each window must be a list");
    for (const auto& e : *win) {
      std::string label;
      double score = 0;
      try {
        label = require_string(e, "label", "event");
        const auto& s = require(e, "score", "event");
        if (!s.is_number()) throw SchemaError("event: score must be a number");
        score = s.get<double>();
      } catch (const SchemaError& err) {
        throw BackendError("malformed_events", err.what());
      }
      if (!(score >= 0.0 && score <= 1.0)) {
        throw BackendError("score_range", "event \"" + label + "\" score " + json(score).dump() + " outside [0,1]");
      }
      if (!table.contains(label)) {
        unknown.push_back(label);
        continue;
      }
      auto [it, inserted] = pooled.emplace(label, score);
      if (!inserted) it->second = std::max(it->second, score);
    }
  }
  if (!unknown.empty()) throw BackendError("unknown_label", "unknown audio-event label(s): " + text::join(unknown, ", "));

  std::vector<EventScore> out;
  for (const auto& [label, score] : pooled) out.push_back({label, score});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

json events_to_json(const std::vector<EventScore>& events) {
  json out = json::array();
  for (const auto& e : events) out.push_back({{"label", e.label}, {"score", e.score}});
  return out;
}

std::vector<EventScore> AssetsEvents::classify(const AudioClip& clip) {
  if (clip.samples.empty()) return {};
  const auto path = dir_ / std::to_string(clip.cue_id) / "events.json";
  if (!fs::exists(path)) throw AssetMissingError(path.string());
  try {
    return parse_events_json(json::parse(read_text_file(path)), table_);
  } catch (const json::exception& e) {
    throw BackendError("malformed_events", path.string() + ": " + e.what());
  }
}

std::vector<EventScore> HttpEvents::classify(const AudioClip& clip) {
  if (clip.samples.empty()) return {};
  const auto wav = encode_wav(clip);
  const auto body = http_post_with_retry(config_.url, std::string(wav.begin(), wav.end()), "audio/wav", {},
                                         config_.retry);
  try {
    return parse_events_json(json::parse(body), table_);
  } catch (const json::exception& e) {
    throw BackendError("malformed_events", std::string("event classifier response: ") + e.what());
  }
}

}  // namespace vsat
