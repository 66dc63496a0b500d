#include "vsat/evaluation.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "vsat/error.hpp"
#include "vsat/fixes.hpp"
#include "vsat/text.hpp"

namespace vsat {

using nlohmann::json;

std::string token_string(const MetricToken& t) {
  switch (t.kind) {
    case MetricToken::Kind::EOL: return "<eol>";
    case MetricToken::Kind::EOB: return "<eob>";
    default: return t.text;
  }
}

std::vector<MetricToken> tokenize_cue(const Cue& cue) {
  std::vector<MetricToken> out;
  for (std::size_t i = 0; i < cue.lines.size(); ++i) {
    if (i > 0) out.push_back(MetricToken::eol());
    for (auto& w : text::normalize_tokens(cue.lines[i])) out.push_back(MetricToken::word(std::move(w)));
  }
  out.push_back(MetricToken::eob());
  return out;
}

std::vector<MetricToken> tokenize_doc(const SubtitleDoc& doc) {
  std::vector<MetricToken> out;
  for (const auto& c : doc.cues) {
    auto t = tokenize_cue(c);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

EditCounts& EditCounts::operator+=(const EditCounts& o) {
  substitution += o.substitution;
  insertion += o.insertion;
  deletion += o.deletion;
  shift += o.shift;
  return *this;
}

std::vector<EditOp> align_tokens(const std::vector<MetricToken>& ref, const std::vector<MetricToken>& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<int> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> int& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  std::vector<EditOp> ops;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        ops.push_back({same ? EditOp::Type::Match : EditOp::Type::Substitute, static_cast<int>(i - 1),
                       static_cast<int>(j - 1)});
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ops.push_back({EditOp::Type::Delete, static_cast<int>(i - 1), -1});
      --i;
    } else {
      ops.push_back({EditOp::Type::Insert, -1, static_cast<int>(j - 1)});
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

EditCounts count_edits(const std::vector<EditOp>& ops) {
  EditCounts c;
  for (const auto& op : ops) {
    switch (op.type) {
      case EditOp::Type::Substitute: ++c.substitution; break;
      case EditOp::Type::Insert: ++c.insertion; break;
      case EditOp::Type::Delete: ++c.deletion; break;
      default: break;
    }
  }
  return c;
}

int token_edit_distance(const std::vector<MetricToken>& ref, const std::vector<MetricToken>& hyp) {
  return count_edits(align_tokens(ref, hyp)).total();
}

namespace {

std::int64_t overlap_ms(const Cue& a, const Cue& b) {
  return std::min(a.end.ms, b.end.ms) - std::max(a.start.ms, b.start.ms);
}

// One scoring unit: a pair, an unpaired ref cue or an unpaired hyp cue.
struct Unit {
  std::int64_t start = 0;
  int ref = -1;
  int hyp = -1;
  EditCounts edits;
  std::multiset<std::string> deleted;
  std::multiset<std::string> inserted;
};

// Collapses a word deleted on one side of a unit boundary and inserted on the
// other into one shift.
int collapse(std::multiset<std::string>& del, std::multiset<std::string>& ins) {
  int n = 0;
  for (auto it = del.begin(); it != del.end();) {
    const auto hit = ins.find(*it);
    if (hit == ins.end()) {
      ++it;
      continue;
    }
    ins.erase(hit);
    it = del.erase(it);
    ++n;
  }
  return n;
}

}  // namespace

std::vector<std::pair<int, int>> pair_cues(const SubtitleDoc& hyp, const SubtitleDoc& ref) {
  struct Cand {
    std::int64_t overlap;
    int r;
    int h;
  };
  std::vector<Cand> cands;
  for (std::size_t r = 0; r < ref.cues.size(); ++r) {
    for (std::size_t h = 0; h < hyp.cues.size(); ++h) {
      const auto ov = overlap_ms(ref.cues[r], hyp.cues[h]);
      if (ov > 0) cands.push_back({ov, static_cast<int>(r), static_cast<int>(h)});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.r != b.r) return a.r < b.r;
    return a.h < b.h;
  });
  std::map<int, int> by_ref;
  std::set<int> used_hyp;
  for (const auto& c : cands) {
    if (by_ref.count(c.r) || used_hyp.count(c.h)) continue;
    const auto next = by_ref.upper_bound(c.r);
    if (next != by_ref.end() && next->second < c.h) continue;
    if (next != by_ref.begin() && std::prev(next)->second > c.h) continue;
    by_ref.emplace(c.r, c.h);
    used_hyp.insert(c.h);
  }
  return {by_ref.begin(), by_ref.end()};
}

SuberReport suber(const SubtitleDoc& hyp, const SubtitleDoc& ref, const SuberOptions& options) {
  SuberReport report;
  std::vector<std::vector<MetricToken>> ref_tokens;
  for (const auto& c : ref.cues) {
    ref_tokens.push_back(tokenize_cue(c));
    for (const auto& t : ref_tokens.back()) {
      if (t.kind == MetricToken::Kind::Word) ++report.ref_tokens;
    }
  }
  if (ref.cues.empty() || report.ref_tokens == 0) throw ValidationError("reference has no words to score against");
  std::vector<std::vector<MetricToken>> hyp_tokens;
  for (const auto& c : hyp.cues) hyp_tokens.push_back(tokenize_cue(c));

  std::vector<Unit> units;
  std::vector<bool> ref_paired(ref.cues.size());
  std::vector<bool> hyp_paired(hyp.cues.size());
  for (const auto& [r, h] : pair_cues(hyp, ref)) {
    ref_paired[r] = hyp_paired[h] = true;
    Unit u;
    u.start = std::min(ref.cues[r].start.ms, hyp.cues[h].start.ms);
    u.ref = r;
    u.hyp = h;
    units.push_back(std::move(u));
  }
  for (std::size_t r = 0; r < ref.cues.size(); ++r) {
    if (!ref_paired[r]) units.push_back({ref.cues[r].start.ms, static_cast<int>(r), -1, {}, {}, {}});
  }
  for (std::size_t h = 0; h < hyp.cues.size(); ++h) {
    if (!hyp_paired[h]) units.push_back({hyp.cues[h].start.ms, -1, static_cast<int>(h), {}, {}, {}});
  }
  std::stable_sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) {
    if (a.start != b.start) return a.start < b.start;
    return (a.ref >= 0 ? a.ref : a.hyp) < (b.ref >= 0 ? b.ref : b.hyp);
  });

  static const std::vector<MetricToken> kNone;
  for (auto& u : units) {
    const auto& rt = u.ref >= 0 ? ref_tokens[u.ref] : kNone;
    const auto& ht = u.hyp >= 0 ? hyp_tokens[u.hyp] : kNone;
    const auto ops = align_tokens(rt, ht);
    u.edits = count_edits(ops);
    for (const auto& op : ops) {
      if (op.type == EditOp::Type::Delete && rt[op.ref].kind == MetricToken::Kind::Word) u.deleted.insert(rt[op.ref].text);
      if (op.type == EditOp::Type::Insert && ht[op.hyp].kind == MetricToken::Kind::Word) u.inserted.insert(ht[op.hyp].text);
    }
  }
  if (options.shift_pass) {
    for (std::size_t i = 0; i + 1 < units.size(); ++i) {
      auto& a = units[i];
      auto& b = units[i + 1];
      for (int pass = 0; pass < 2; ++pass) {
        auto& from = pass == 0 ? a : b;
        auto& to = pass == 0 ? b : a;
        const int n = collapse(from.deleted, to.inserted);
        from.edits.deletion -= n;
        to.edits.insertion -= n;
        from.edits.shift += n;
      }
    }
  }
  for (const auto& u : units) report.edits += u.edits;
  report.score = 100.0 * report.edits.total() / report.ref_tokens;
  return report;
}

json suber_to_json(const SuberReport& r) {
  return {{"score", r.score},
          {"edits",
           {{"substitution", r.edits.substitution},
            {"insertion", r.edits.insertion},
            {"deletion", r.edits.deletion},
            {"shift", r.edits.shift}}},
          {"ref_tokens", r.ref_tokens}};
}

double Confusion::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp); }
double Confusion::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
double Confusion::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

Confusion confusion(const std::vector<DetectionLabel>& labels) {
  Confusion c;
  for (const auto& l : labels) {
    if (l.truth && l.predicted) ++c.tp;
    else if (!l.truth && l.predicted) ++c.fp;
    else if (l.truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1(const std::vector<DetectionLabel>& labels) { return confusion(labels).f1(); }

std::vector<DetectionLabel> parse_truth_labels(const json& j) {
  if (!j.is_array()) throw FormatError("label file must be a JSON list");
  std::vector<DetectionLabel> out;
  for (const auto& e : j) {
    try {
      DetectionLabel l;
      l.cue_id = e.at("cue_id").get<int>();
      l.kind = kind_from_name(e.at("kind").get<std::string>());
      l.truth = e.at("truth").get<bool>();
      out.push_back(l);
    } catch (const json::exception& ex) {
      throw FormatError(std::string("bad label entry: ") + ex.what());
    }
  }
  return out;
}

json truth_labels_to_json(const std::vector<DetectionLabel>& labels) {
  json out = json::array();
  for (const auto& l : labels) out.push_back({{"cue_id", l.cue_id}, {"kind", kind_slug(l.kind)}, {"truth", l.truth}});
  return out;
}

std::vector<DetectionLabel> score_detections(const std::vector<DetectionLabel>& truth, const std::vector<Issue>& issues) {
  std::set<std::pair<int, IssueKind>> predicted;
  for (const auto& i : issues) predicted.insert({i.cue_id, i.kind});
  std::vector<DetectionLabel> out;
  std::set<std::pair<int, IssueKind>> labelled;
  for (auto l : truth) {
    l.predicted = predicted.count({l.cue_id, l.kind}) > 0;
    labelled.insert({l.cue_id, l.kind});
    out.push_back(l);
  }
  for (const auto& p : predicted) {
    if (!labelled.count(p)) out.push_back({p.first, p.second, false, true});
  }
  return out;
}

json detection_report(const std::vector<DetectionLabel>& scored, const std::vector<IssueKind>& kinds) {
  json out = json::object();
  for (auto k : kinds) {
    std::vector<DetectionLabel> sub;
    for (const auto& l : scored) {
      if (l.kind == k) sub.push_back(l);
    }
    const auto c = confusion(sub);
    out[std::string(kind_slug(k))] = {{"tp", c.tp},         {"fp", c.fp},
                                      {"fn", c.fn},         {"precision", c.precision()},
                                      {"recall", c.recall()}, {"f1", c.f1()}};
  }
  return out;
}

std::vector<StageRow> stage_report(const SubtitleDoc& base, const SubtitleDoc& ref, const std::vector<Issue>& issues,
                                   const std::vector<IssueKind>& stages, const SuberOptions& options) {
  std::vector<StageRow> rows;
  rows.push_back({"input", suber(base, ref, options)});
  std::vector<Issue> accepted;
  std::string name = "Issue_";
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto kind = stages[s];
    for (const auto& i : issues) {
      if (i.kind == kind) accepted.push_back(i);
    }
    name += (s == 0 ? "" : "+") + std::to_string(static_cast<int>(kind) + 1);
    const auto fixed = apply_fixes(base, accept_all(accepted));
    rows.push_back({name, suber(fixed.doc, ref, options)});
  }
  return rows;
}

json stage_report_to_json(const std::vector<StageRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    auto j = suber_to_json(r.report);
    j["stage"] = r.name;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace vsat
