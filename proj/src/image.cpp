#include "vsat/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vsat/error.hpp"
#include "vsat/parallel.hpp"

namespace vsat {

using nlohmann::json;
using cplx = std::complex<double>;

SaliencyMap SaliencyMap::uniform(int width, int height) {
  const auto n = static_cast<std::size_t>(width) * height;
  return {width, height, std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

void fft(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw ValidationError("FFT length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1 : -1);
    const cplx wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

void fft2d(std::vector<cplx>& grid, int size, bool inverse) {
  const auto n = static_cast<std::size_t>(size);
  std::vector<cplx> line(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(grid.begin() + static_cast<std::ptrdiff_t>(r * n), n, line.begin());
    fft(line, inverse);
    std::copy(line.begin(), line.end(), grid.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < n; ++r) line[r] = grid[r * n + c];
    fft(line, inverse);
    for (std::size_t r = 0; r < n; ++r) grid[r * n + c] = line[r];
  }
}

std::vector<double> gray_resized(const Frame& frame, int size) {
  if (!frame.valid()) throw ValidationError("invalid frame");
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  const double sx = static_cast<double>(frame.width) / size;
  const double sy = static_cast<double>(frame.height) / size;
  auto gray = [&](int x, int y) {
    const auto* p = frame.at(x, y);
    return luma(p[0], p[1], p[2]);
  };
  for (int y = 0; y < size; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(frame.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, frame.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < size; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(frame.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, frame.width - 1);
      const double wx = fx - x0;
      const double top = gray(x0, y0) * (1 - wx) + gray(x1, y0) * wx;
      const double bot = gray(x0, y1) * (1 - wx) + gray(x1, y1) * wx;
      out[static_cast<std::size_t>(y) * size + x] = top * (1 - wy) + bot * wy;
    }
  }
  return out;
}

std::vector<double> box3(const std::vector<double>& g, int w, int h) {
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
  };
  std::vector<double> out(g.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          s += g[static_cast<std::size_t>(reflect(y + dy, h)) * w + reflect(x + dx, w)];
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = s / 9.0;
    }
  }
  return out;
}

SaliencyMap saliency_spectral_residual(const Frame& frame) {
  const int n = kSaliencySize;
  const auto gray = gray_resized(frame, n);
  const auto [lo, hi] = std::minmax_element(gray.begin(), gray.end());
  if (*hi - *lo < 1e-9) return SaliencyMap::uniform(n, n);

  std::vector<cplx> spec(gray.begin(), gray.end());
  fft2d(spec, n, false);
  std::vector<double> log_amp(spec.size());
  std::vector<double> phase(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    log_amp[i] = std::log1p(std::abs(spec[i]));
    phase[i] = std::arg(spec[i]);
  }
  const auto smooth = box3(log_amp, n, n);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = std::polar(std::exp(log_amp[i] - smooth[i]), phase[i]);
  fft2d(spec, n, true);

  std::vector<double> sal(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) sal[i] = std::norm(spec[i]);
  sal = box3(box3(sal, n, n), n, n);
  double total = 0;
  for (double v : sal) total += v;
  if (!(total > 0) || !std::isfinite(total)) return SaliencyMap::uniform(n, n);
  for (double& v : sal) v /= total;
  return {n, n, std::move(sal)};
}

double overlap_score(const SaliencyMap& map, const Region& region) {
  double s = 0;
  for (int y = 0; y < map.height; ++y) {
    const double cy = (y + 0.5) / map.height;
    if (cy < region.y || cy >= region.y + region.h) continue;
    for (int x = 0; x < map.width; ++x) {
      if (region.contains_point((x + 0.5) / map.width, cy)) s += map.at(x, y);
    }
  }
  return s;
}

std::vector<Candidate> candidate_ladder(const Region& base) {
  const double w = base.w;
  const double h = base.h;
  const double cx = (1.0 - w) / 2;
  const double bottom = std::max(0.0, 0.95 - h);
  return {{"bottom-center", Region::make(cx, bottom, w, h)},
          {"middle-center", Region::make(cx, (1.0 - h) / 2, w, h)},
          {"top-center", Region::make(cx, std::min(0.05, 1.0 - h), w, h)},
          {"bottom-left", Region::make(0.0, bottom, w, h)},
          {"bottom-right", Region::make(1.0 - w, bottom, w, h)}};
}

PlacementResult choose_placement(const SaliencyMap& map, const Region& default_region, double threshold) {
  PlacementResult r;
  r.default_score = overlap_score(map, default_region);
  r.flagged = overlap_flags(r.default_score, threshold);
  r.chosen = default_region;
  r.chosen_name = "current";
  double best = 0;
  bool first = true;
  for (const auto& c : candidate_ladder(default_region)) {
    const double s = overlap_score(map, c.region);
    r.scores.emplace_back(c.name, s);
    if (r.flagged && (first || s < best)) {
      best = s;
      r.chosen = c.region;
      r.chosen_name = c.name;
    }
    first = false;
  }
  return r;
}

namespace {

json region_json(const Region& r) { return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }

}  // namespace

std::optional<Issue> detect_positioning(int cue_id, const Frame& frame, const Region& default_region,
                                        double threshold) {
  const auto map = saliency_spectral_residual(frame);
  // A flat map carries no saliency; any move would only follow cell quantization.
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  if (*hi - *lo < 1e-12) return std::nullopt;
  const auto placement = choose_placement(map, default_region, threshold);
  // Nothing on the ladder beats the current spot (e.g. a flat frame).
  if (!placement.flagged || placement.chosen == default_region) return std::nullopt;
  json scores = json::array();
  const auto ladder = candidate_ladder(default_region);
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    scores.push_back({{"name", ladder[i].name}, {"score", placement.scores[i].second},
                      {"region", region_json(ladder[i].region)}});
  }
  json evidence = {{"score", placement.default_score},
                   {"threshold", threshold},
                   {"current", region_json(default_region)},
                   {"candidates", scores},
                   {"chosen", placement.chosen_name}};
  return make_issue(cue_id, IssueKind::Positioning, std::move(evidence), Suggestion::move_region(placement.chosen));
}

double average_brightness(const Frame& frame, const Region& region) {
  if (!frame.valid()) throw ValidationError("invalid frame");
  std::int64_t sum = 0;
  std::int64_t count = 0;
  for (int y = 0; y < frame.height; ++y) {
    const double cy = (y + 0.5) / frame.height;
    if (cy < region.y || cy >= region.y + region.h) continue;
    for (int x = 0; x < frame.width; ++x) {
      if (!region.contains_point((x + 0.5) / frame.width, cy)) continue;
      const auto* p = frame.at(x, y);
      sum += 299 * p[0] + 587 * p[1] + 114 * p[2];
      ++count;
    }
  }
  if (count == 0) {
    // Region narrower than a pixel: use the pixel under its center.
    const int x = std::clamp(static_cast<int>((region.x + region.w / 2) * frame.width), 0, frame.width - 1);
    const int y = std::clamp(static_cast<int>((region.y + region.h / 2) * frame.height), 0, frame.height - 1);
    const auto* p = frame.at(x, y);
    return luma(p[0], p[1], p[2]);
  }
  return static_cast<double>(sum) / (1000.0 * static_cast<double>(count));
}

FontColor choose_font_color(const Frame& frame, const Region& region, double threshold) {
  return font_color_for_brightness(average_brightness(frame, region), threshold);
}

PassResult run_image_pass(const SubtitleDoc& doc, MediaSource* media, const ImageConfig& config) {
  std::vector<PassResult> per_cue(doc.cues.size());
  if (!config.positioning && !config.fontcolor) return {};

  parallel_for(doc.cues.size(), config.parallelism, [&](std::size_t idx) {
    const Cue& cue = doc.cues[idx];
    PassResult& r = per_cue[idx];
    auto skip_all = [&](const std::string& reason) {
      if (config.positioning) r.skips.push_back({cue.id, "positioning", reason});
      if (config.fontcolor) r.skips.push_back({cue.id, "fontcolor", reason});
    };
    if (!media) {
      skip_all("no media source");
      return;
    }
    Frame frame;
    try {
      frame = media->extract_first_frame(cue.id, cue.start);
    } catch (const std::exception& e) {
      skip_all(e.what());
      return;
    }

    const Region current = cue.position.value_or(config.default_region);
    Region text_region = current;
    if (config.positioning) {
      try {
        if (auto issue = detect_positioning(cue.id, frame, current, config.overlap_threshold)) {
          text_region = issue->suggestion.region;
          r.issues.push_back(std::move(*issue));
        }
      } catch (const std::exception& e) {
        r.skips.push_back({cue.id, "positioning", e.what()});
      }
    }
    if (config.fontcolor) {
      try {
        const double brightness = average_brightness(frame, text_region);
        const auto wanted = font_color_for_brightness(brightness, config.brightness_threshold);
        if (wanted != config.current_color) {
          json evidence = {{"brightness", brightness},
                           {"threshold", config.brightness_threshold},
                           {"region", region_json(text_region)},
                           {"current", color_name(config.current_color)},
                           {"suggested", color_name(wanted)}};
          r.issues.push_back(make_issue(cue.id, IssueKind::FontColor, std::move(evidence), Suggestion::set_color(wanted)));
        }
      } catch (const std::exception& e) {
        r.skips.push_back({cue.id, "fontcolor", e.what()});
      }
    }
  });

  PassResult out;
  for (auto& r : per_cue) {
    for (auto& i : r.issues) out.issues.push_back(std::move(i));
    for (auto& s : r.skips) out.skips.push_back(std::move(s));
  }
  sort_issues(out.issues);
  return out;
}

}  // namespace vsat
