#include "vsat/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "vsat/backends.hpp"
#include "vsat/error.hpp"
#include "vsat/image.hpp"
#include "vsat/lang.hpp"
#include "vsat/media.hpp"
#include "vsat/text.hpp"

namespace vsat {

namespace embedded {
extern const std::string_view synthetic_transcript;
}  // namespace embedded

namespace fs = std::filesystem;
using nlohmann::json;

FaultSpec FaultSpec::one_per_kind() {
  FaultSpec s;
  for (auto k : kAllIssueKinds) s.counts[k] = 1;
  return s;
}

int FaultSpec::count(IssueKind k) const {
  const auto it = counts.find(k);
  return it == counts.end() ? 0 : it->second;
}

SubtitleDoc synthetic_base_doc() {
  SubtitleDoc doc;
  std::vector<std::string> lines;
  std::int64_t t = 1000;
  auto flush = [&] {
    if (lines.empty()) return;
    Cue c;
    c.id = static_cast<int>(doc.cues.size()) + 1;
    c.lines = lines;
    const auto chars = static_cast<std::int64_t>(text::length(c.flat_text()));
    c.start = {t};
    c.end = {t + (1000 + 55 * chars) / 10 * 10};
    t = c.end.ms + 300;
    doc.cues.push_back(std::move(c));
    lines.clear();
  };
  std::size_t pos = 0;
  const auto src = embedded::synthetic_transcript;
  while (pos <= src.size()) {
    auto nl = src.find('\n', pos);
    if (nl == std::string_view::npos) nl = src.size();
    const auto line = text::trim(src.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) {
      flush();
    } else if (line[0] != '#') {
      lines.push_back(line);
    }
  }
  flush();
  return doc;
}

namespace {

constexpr int kFrameW = 160;
constexpr int kFrameH = 90;

// Swaps a correct word for its homophone; the first entry is the correct form.
const std::pair<const char*, const char*> kHomophones[] = {
    {"dessert", "desert"}, {"flour", "flower"}, {"bread", "bred"}, {"pale", "pail"}, {"board", "bored"}};

constexpr const char* kProfanity = "idiot";

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  // Own reduction so the sequence does not depend on the standard library's
  // distribution implementations.
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen() % n); }
  double unit() { return static_cast<double>(gen() >> 11) / 9007199254740992.0; }
  double in(double lo, double hi) { return lo + (hi - lo) * unit(); }
};

bool fits(const std::vector<std::string>& lines) {
  return std::all_of(lines.begin(), lines.end(),
                     [](const std::string& l) { return !cpl_flags(static_cast<int>(text::length(l))); });
}

void fill_rect(Frame& f, double x0, double y0, double w, double h, std::uint8_t v) {
  const int xa = static_cast<int>(x0 * f.width);
  const int ya = static_cast<int>(y0 * f.height);
  const int xb = std::min(f.width, static_cast<int>((x0 + w) * f.width));
  const int yb = std::min(f.height, static_cast<int>((y0 + h) * f.height));
  for (int y = ya; y < yb; ++y) {
    for (int x = xa; x < xb; ++x) {
      auto* p = f.at(x, y);
      p[0] = p[1] = p[2] = v;
    }
  }
}

enum class FrameKind { Clean, Salient, Bright };

// Draws frames until one behaves as intended under the default thresholds.
Frame make_frame(Rng& rng, FrameKind kind) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    Frame f;
    if (kind == FrameKind::Bright) {
      f = Frame::filled(kFrameW, kFrameH, 235, 235, 225);
    } else {
      f = Frame::filled(kFrameW, kFrameH, 20, 20, 30);
    }
    const double w = rng.in(0.15, 0.3);
    const double x0 = rng.in(0.1, 0.9 - w);
    if (kind == FrameKind::Salient) {
      fill_rect(f, x0, rng.in(0.84, 0.88), w, 0.08, static_cast<std::uint8_t>(rng.in(200, 250)));
    } else {
      const auto v = kind == FrameKind::Bright ? rng.in(10, 40) : rng.in(200, 240);
      fill_rect(f, x0, rng.in(0.25, 0.35), w, rng.in(0.12, 0.2), static_cast<std::uint8_t>(v));
    }
    const auto placement = choose_placement(saliency_spectral_residual(f), kDefaultSubtitleRegion);
    const auto color = choose_font_color(f, placement.chosen);
    switch (kind) {
      case FrameKind::Clean:
        if (placement.default_score <= kOverlapThreshold / 2 && color == FontColor::White) return f;
        break;
      case FrameKind::Salient:
        if (placement.flagged && color == FontColor::White) return f;
        break;
      case FrameKind::Bright:
        if (placement.default_score <= kOverlapThreshold / 2 && color == FontColor::Black) return f;
        break;
    }
  }
  throw ValidationError("could not draw a synthetic frame");
}

AudioClip make_audio(int cue_id, std::int64_t duration_ms) {
  AudioClip clip;
  clip.cue_id = cue_id;
  clip.samples.resize(static_cast<std::size_t>(duration_ms) * kCanonicalSampleRate / 1000);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    // Integer-only tone so the bytes do not depend on libm.
    const auto phase = static_cast<int>(i % 64);
    const int tri = phase < 32 ? phase - 16 : 48 - phase;
    clip.samples[i] = static_cast<std::int16_t>(tri * 40);
  }
  return clip;
}

// Spoken words spread evenly over [begin, end) relative to the clip start.
void spread(json& out, const std::vector<std::string>& words, std::int64_t begin, std::int64_t end) {
  const auto n = static_cast<std::int64_t>(words.size());
  for (std::int64_t k = 0; k < n; ++k) {
    out.push_back({{"text", words[static_cast<std::size_t>(k)]},
                   {"start_ms", begin + (end - begin) * k / n},
                   {"end_ms", begin + (end - begin) * (k + 1) / n},
                   {"confidence", 0.95}});
  }
}

std::vector<std::string> spoken_words(const std::vector<std::string>& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) {
    if (!l.empty() && l.front() == '[') continue;
    for (auto& w : text::split_words(l)) out.push_back(std::move(w));
  }
  return out;
}

std::string write_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

SyntheticCorpus make_synthetic_corpus(std::uint64_t seed, const FaultSpec& spec, const fs::path& dir) {
  const SubtitleDoc base = synthetic_base_doc();
  const std::size_t n = base.cues.size();
  Rng rng(seed);
  std::set<std::size_t> used;

  auto pick = [&](const char* what, auto&& eligible) {
    std::vector<std::size_t> cands;
    for (std::size_t i = 0; i < n; ++i) {
      if (!used.count(i) && eligible(i)) cands.push_back(i);
    }
    if (cands.empty()) throw ValidationError(std::string("not enough eligible cues for ") + what + " faults");
    const auto i = cands[rng.below(cands.size())];
    used.insert(i);
    return i;
  };
  auto single = [&](std::size_t i) { return base.cues[i].lines.size() == 1; };

  std::vector<std::vector<std::string>> ref_lines(n);
  std::vector<std::vector<std::string>> bad_lines(n);
  for (std::size_t i = 0; i < n; ++i) ref_lines[i] = bad_lines[i] = base.cues[i].lines;

  std::set<std::size_t> merged;  // first cue of each merged pair
  for (int k = 0; k < spec.count(IssueKind::Segmentation); ++k) {
    const auto i = pick("segmentation", [&](std::size_t i) {
      if (i + 1 >= n || used.count(i + 1) || !single(i) || !single(i + 1)) return false;
      const auto& a = base.cues[i].lines[0];
      const auto first = text::split_words(base.cues[i + 1].lines[0]).front();
      // The greedy split must land exactly on the original boundary.
      return cpl_flags(static_cast<int>(text::length(a) + 1 + text::length(first)));
    });
    used.insert(i + 1);
    merged.insert(i);
  }

  std::set<std::size_t> shifted;
  for (int k = 0; k < spec.count(IssueKind::TimeSync); ++k) {
    const auto i = pick("time-sync", [&](std::size_t i) {
      if (i + 1 >= n || !single(i)) return false;
      return time_sync_flags(cosine_bow(text::normalize_tokens(base.cues[i].flat_text()),
                                        text::normalize_tokens(base.cues[i + 1].flat_text())));
    });
    bad_lines[i] = base.cues[i + 1].lines;
    shifted.insert(i);
  }

  struct Swap {
    std::string wrong;
    std::string right;
  };
  std::map<std::size_t, Swap> swaps;
  for (int k = 0; k < spec.count(IssueKind::ContextualSpelling); ++k) {
    auto swapped = [&](std::size_t i) -> std::optional<std::pair<std::vector<std::string>, Swap>> {
      const auto& lines = base.cues[i].lines;
      if (text::normalize_tokens(base.cues[i].flat_text()).size() < 4) return std::nullopt;
      for (std::size_t l = 0; l < lines.size(); ++l) {
        for (const auto& [right, wrong] : kHomophones) {
          const auto span = find_word(lines[l], right);
          if (!span) continue;
          auto out = lines;
          out[l] = text::substr(lines[l], 0, span->start) + wrong +
                   text::substr(lines[l], span->end, text::length(lines[l]));
          if (fits(out)) return std::make_pair(out, Swap{wrong, right});
        }
      }
      return std::nullopt;
    };
    const auto i = pick("spelling", [&](std::size_t i) { return swapped(i).has_value(); });
    auto [lines, swap] = *swapped(i);
    bad_lines[i] = lines;
    swaps[i] = swap;
  }

  std::map<std::size_t, CharSpan> profane;
  for (int k = 0; k < spec.count(IssueKind::HarmfulWord); ++k) {
    auto inserted = [&](std::size_t i) {
      auto lines = base.cues[i].lines;
      auto words = text::split_words(lines[0]);
      words.insert(words.begin() + 1, kProfanity);
      lines[0] = text::join(words, " ");
      return lines;
    };
    const auto i = pick("harmful-word", [&](std::size_t i) { return fits(inserted(i)); });
    bad_lines[i] = inserted(i);
    profane[i] = *find_word(text::join(bad_lines[i], "\n"), kProfanity);
  }

  std::set<std::size_t> music;
  for (int k = 0; k < spec.count(IssueKind::NonWord); ++k) {
    const auto i = pick("non-word", [](std::size_t) { return true; });
    ref_lines[i].push_back("[music]");
    music.insert(i);
  }

  std::set<std::size_t> salient;
  for (int k = 0; k < spec.count(IssueKind::Positioning); ++k) {
    salient.insert(pick("positioning", [](std::size_t) { return true; }));
  }
  std::set<std::size_t> bright;
  for (int k = 0; k < spec.count(IssueKind::FontColor); ++k) {
    bright.insert(pick("font-color", [](std::size_t) { return true; }));
  }

  SyntheticCorpus out;
  out.dir = dir;
  out.ref.format = out.faulted.format = SubtitleFormat::Srt;
  for (std::size_t i = 0; i < n; ++i) {
    Cue c = base.cues[i];
    c.lines = ref_lines[i];
    out.ref.cues.push_back(std::move(c));
  }

  // Faulted cues, remembering which base cues each one covers.
  std::vector<std::vector<std::size_t>> covers;
  for (std::size_t i = 0; i < n; ++i) {
    Cue c = base.cues[i];
    c.id = static_cast<int>(out.faulted.cues.size()) + 1;
    c.lines = bad_lines[i];
    if (merged.count(i)) {
      c.end = base.cues[i + 1].end;
      c.lines = {base.cues[i].lines[0] + " " + base.cues[i + 1].lines[0]};
      covers.push_back({i, i + 1});
      ++i;
    } else {
      covers.push_back({i});
    }
    out.faulted.cues.push_back(std::move(c));
  }

  fs::create_directories(dir);
  out.ref_path = dir / "ref.srt";
  out.faulted_path = dir / "faulted.srt";
  out.labels_path = dir / "labels.json";
  out.assets_dir = dir / "assets";
  out.mock_path = dir / "mock_llm.json";
  out.config_path = dir / "vsat.conf";
  fs::create_directories(out.assets_dir);

  MockLlm mock;
  for (std::size_t f = 0; f < out.faulted.cues.size(); ++f) {
    const Cue& cue = out.faulted.cues[f];
    const auto first = covers[f].front();
    auto label = [&](IssueKind k) { out.labels.push_back({cue.id, k, true, false}); };
    if (covers[f].size() == 2) label(IssueKind::Segmentation);
    if (shifted.count(first)) label(IssueKind::TimeSync);
    if (swaps.count(first)) label(IssueKind::ContextualSpelling);
    if (profane.count(first)) label(IssueKind::HarmfulWord);
    if (music.count(first)) label(IssueKind::NonWord);
    if (salient.count(first)) label(IssueKind::Positioning);
    if (bright.count(first)) label(IssueKind::FontColor);

    const auto context = spell_context(out.faulted, f);
    json findings = json::array();
    if (const auto s = swaps.find(first); s != swaps.end()) {
      findings.push_back({{"word", s->second.wrong}, {"rationale", "homophone that does not fit the cooking context"}});
      mock.add(spell_fix_request(cue, context, s->second.wrong),
               {{"candidates", {s->second.wrong + "y", s->second.right}}});
    }
    mock.add(spell_findings_request(cue, context), {{"findings", findings}});
    json spans = json::array();
    if (const auto p = profane.find(first); p != profane.end()) {
      spans.push_back({{"start", p->second.start}, {"end", p->second.end}});
    }
    mock.add(harm_spans_request(cue), {{"spans", spans}});

    const auto cue_dir = out.assets_dir / std::to_string(cue.id);
    fs::create_directories(cue_dir);
    json words = json::array();
    for (auto i : covers[f]) {
      spread(words, spoken_words(ref_lines[i]), base.cues[i].start.ms - cue.start.ms,
             base.cues[i].end.ms - cue.start.ms);
    }
    write_text_file_atomic(cue_dir / "transcript.json", write_json({{"words", words}}));
    const json events = music.count(first)
                            ? json::array({{{"label", "Music"}, {"score", 0.71}}, {{"label", "Speech"}, {"score", 0.2}}})
                            : json::array({{{"label", "Speech"}, {"score", 0.9}}, {{"label", "Music"}, {"score", 0.1}}});
    write_text_file_atomic(cue_dir / "events.json", write_json(events));
    const auto wav = encode_wav(make_audio(cue.id, cue.end.ms - cue.start.ms));
    write_binary_file(cue_dir / "audio.wav", wav);
    const auto kind = salient.count(first) ? FrameKind::Salient
                      : bright.count(first) ? FrameKind::Bright
                                            : FrameKind::Clean;
    write_binary_file(cue_dir / "frame.ppm", encode_ppm(make_frame(rng, kind)));
  }

  std::sort(out.labels.begin(), out.labels.end(), [](const DetectionLabel& a, const DetectionLabel& b) {
    return std::pair(a.cue_id, a.kind) < std::pair(b.cue_id, b.kind);
  });
  const json manifest = {{"duration_ms", base.cues.back().end.ms + 1000},
                         {"width", kFrameW},
                         {"height", kFrameH},
                         {"fps", 25.0}};
  write_text_file_atomic(out.assets_dir / "manifest.json", write_json(manifest));
  write_text_file_atomic(out.ref_path, serialize(out.ref, SubtitleFormat::Srt));
  write_text_file_atomic(out.faulted_path, serialize(out.faulted, SubtitleFormat::Srt));
  write_text_file_atomic(out.labels_path, write_json(truth_labels_to_json(out.labels)));
  write_text_file_atomic(out.mock_path, write_json(mock.to_table_json()));
  write_text_file_atomic(out.config_path, "# synthetic corpus, seed " + std::to_string(seed) +
                                              "\n[backend]\nllm = \"mock\"\nasr = \"assets\"\nevents = \"assets\"\n"
                                              "mock_table = \"mock_llm.json\"\n");
  return out;
}

}  // namespace vsat
