#pragma once

#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vsat/issues.hpp"
#include "vsat/media.hpp"
#include "vsat/subtitle.hpp"

namespace vsat {

inline constexpr int kSaliencySize = 64;
inline constexpr double kOverlapThreshold = 0.006;
inline constexpr double kBrightnessThreshold = 128.0;

struct SaliencyMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, sums to 1

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  static SaliencyMap uniform(int width, int height);
};

/// In-place radix-2 FFT; `n` must be a power of two.
void fft(std::vector<std::complex<double>>& data, bool inverse);
/// 2-D FFT over a row-major `size`×`size` grid.
void fft2d(std::vector<std::complex<double>>& grid, int size, bool inverse);

/// Luma with weights 0.299/0.587/0.114, computed exactly in thousandths.
inline double luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return (299.0 * r + 587.0 * g + 114.0 * b) / 1000.0;
}

/// Grayscale frame resized to `size`×`size` by bilinear sampling with
/// half-pixel centers.
std::vector<double> gray_resized(const Frame& frame, int size = kSaliencySize);
/// 3×3 mean filter with reflect-101 borders.
std::vector<double> box3(const std::vector<double>& grid, int width, int height);

SaliencyMap saliency_spectral_residual(const Frame& frame);

/// Saliency mass over cells whose centers lie inside `region`.
double overlap_score(const SaliencyMap& map, const Region& region);

struct Candidate {
  std::string name;
  Region region;
};

/// bottom-center (the default band), middle-center, top-center,
/// bottom-left, bottom-right; all share the default's width and height.
std::vector<Candidate> candidate_ladder(const Region& base = kDefaultSubtitleRegion);

struct PlacementResult {
  Region chosen;
  std::string chosen_name;
  std::vector<std::pair<std::string, double>> scores;  // ladder order
  bool flagged = false;
  double default_score = 0.0;
};

inline bool overlap_flags(double score, double threshold = kOverlapThreshold) { return score > threshold; }

/// Scores `default_region` and every ladder candidate; the minimum wins,
/// earlier candidates winning ties.
PlacementResult choose_placement(const SaliencyMap& map, const Region& default_region,
                                 double threshold = kOverlapThreshold);

std::optional<Issue> detect_positioning(int cue_id, const Frame& frame, const Region& default_region,
                                        double threshold = kOverlapThreshold);

/// Mean luma of the pixels whose centers lie inside `region`.
double average_brightness(const Frame& frame, const Region& region);

inline FontColor font_color_for_brightness(double brightness, double threshold = kBrightnessThreshold) {
  return brightness > threshold ? FontColor::Black : FontColor::White;
}
FontColor choose_font_color(const Frame& frame, const Region& region, double threshold = kBrightnessThreshold);

struct ImageConfig {
  bool positioning = true;
  bool fontcolor = true;
  double overlap_threshold = kOverlapThreshold;
  double brightness_threshold = kBrightnessThreshold;
  Region default_region = kDefaultSubtitleRegion;
  FontColor current_color = FontColor::White;
  int parallelism = 1;
};

/// Per cue: at most one Positioning and one FontColor issue. Font color is
/// judged at the suggested region when a move is suggested.
PassResult run_image_pass(const SubtitleDoc& doc, MediaSource* media, const ImageConfig& config);

}  // namespace vsat
