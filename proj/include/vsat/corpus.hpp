#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "json.hpp"
#include "vsat/evaluation.hpp"
#include "vsat/issues.hpp"
#include "vsat/subtitle.hpp"

namespace vsat {

struct FaultSpec {
  std::map<IssueKind, int> counts;

  static FaultSpec one_per_kind();
  static FaultSpec none() { return {}; }
  int count(IssueKind k) const;
};

/// Files written by the generator, all under `dir`.
struct SyntheticCorpus {
  SubtitleDoc ref;
  SubtitleDoc faulted;
  std::vector<DetectionLabel> labels;  // one per planted fault, ids of `faulted`
  std::filesystem::path dir;
  std::filesystem::path ref_path;      // ref.srt
  std::filesystem::path faulted_path;  // faulted.srt
  std::filesystem::path labels_path;   // labels.json
  std::filesystem::path assets_dir;    // assets/
  std::filesystem::path mock_path;     // mock_llm.json
  std::filesystem::path config_path;   // vsat.conf
};

/// The bundled clean transcript as an SRT document.
SubtitleDoc synthetic_base_doc();

/// Plants faults into the bundled transcript and writes the reference, the
/// faulted subtitles, labels, offline assets and a mock LLM table. Output is
/// a pure function of (seed, spec). Throws ValidationError when the transcript
/// has too few eligible cues for the requested counts.
SyntheticCorpus make_synthetic_corpus(std::uint64_t seed, const FaultSpec& spec, const std::filesystem::path& dir);

}  // namespace vsat
