#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vsat/subtitle.hpp"

namespace vsat {

struct MediaInfo {
  std::int64_t duration_ms = 0;
  int width = 0;
  int height = 0;
  double fps = 0.0;

  friend bool operator==(const MediaInfo&, const MediaInfo&) = default;
};

inline constexpr int kCanonicalSampleRate = 16000;

/// Mono 16 kHz PCM-16 audio for one cue.
struct AudioClip {
  int cue_id = 0;
  int sample_rate_hz = kCanonicalSampleRate;
  int channels = 1;
  std::vector<std::int16_t> samples;

  std::int64_t duration_ms() const {
    return static_cast<std::int64_t>(samples.size()) * 1000 / sample_rate_hz;
  }
};

/// Row-major RGB, 8 bits per channel.
struct Frame {
  int cue_id = 0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  static Frame filled(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  bool valid() const {
    return width > 0 && height > 0 &&
           pixels.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  }
  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  }
};

// WAV: RIFF / PCM-16 / mono / 16 kHz only. Anything else is an
// UnsupportedFormatError.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);

// PPM: binary P6, maxval 255.
Frame decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const Frame& frame);

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Parses a manifest ({"duration_ms","width","height","fps"}) or ffprobe JSON
/// output ({"streams":[{width,height,r_frame_rate}],"format":{duration}}).
MediaInfo parse_media_info_json(const std::string& json_text);

struct ClipRequest {
  int cue_id = 0;
  Timecode start;
  Timecode end;
};

/// Source of per-cue audio clips and first frames. Implementations must be
/// safe to call concurrently for distinct cues.
class MediaSource {
 public:
  virtual ~MediaSource() = default;
  virtual MediaInfo probe() = 0;
  virtual AudioClip extract_audio_clip(const ClipRequest& req) = 0;
  virtual Frame extract_first_frame(int cue_id, Timecode at) = 0;
  /// Directory holding per-cue files (assets/<cue_id>/...), used by the
  /// review service for previews.
  virtual std::filesystem::path asset_dir() const = 0;
};

/// Reads pre-extracted files: <dir>/manifest.json and
/// <dir>/<cue_id>/{audio.wav,frame.ppm}.
class OfflineAssetSource final : public MediaSource {
 public:
  explicit OfflineAssetSource(std::filesystem::path dir);

  MediaInfo probe() override;
  AudioClip extract_audio_clip(const ClipRequest& req) override;
  Frame extract_first_frame(int cue_id, Timecode at) override;
  std::filesystem::path asset_dir() const override { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// A shell command with {placeholder} substitution. Placeholders are checked
/// against an allowed set when the template is constructed.
class CommandTemplate {
 public:
  CommandTemplate(std::string pattern, std::vector<std::string> allowed);

  const std::string& pattern() const { return pattern_; }
  /// Substitutes every placeholder with a shell-quoted value.
  std::string render(const std::map<std::string, std::string>& values) const;

 private:
  std::string pattern_;
};

struct CommandResult {
  int exit_code = 0;
  std::string stdout_text;
  std::string stderr_text;
};

/// Runs `command` through /bin/sh, capturing stdout and stderr.
CommandResult run_command(const std::string& command, const std::filesystem::path& scratch_dir);

struct ExternalToolConfig {
  std::string audio_cmd =
      "ffmpeg -nostdin -y -loglevel error -ss {start} -to {end} -i {in} -ac 1 -ar 16000 -c:a pcm_s16le {out}";
  std::string frame_cmd =
      "ffmpeg -nostdin -y -loglevel error -ss {start} -i {in} -frames:v 1 -c:v ppm -f image2 {out}";
  std::string probe_cmd =
      "ffprobe -v error -select_streams v:0 -show_entries stream=width,height,r_frame_rate:format=duration -of json {in}";
};

/// Invokes an external media processor through configurable command
/// templates. Outputs land in <cache_dir>/<cue_id>/.
class ExternalToolSource final : public MediaSource {
 public:
  ExternalToolSource(std::filesystem::path video, std::filesystem::path cache_dir,
                     const ExternalToolConfig& config);

  MediaInfo probe() override;
  AudioClip extract_audio_clip(const ClipRequest& req) override;
  Frame extract_first_frame(int cue_id, Timecode at) override;
  std::filesystem::path asset_dir() const override { return cache_dir_; }

 private:
  std::filesystem::path video_;
  std::filesystem::path cache_dir_;
  CommandTemplate audio_;
  CommandTemplate frame_;
  CommandTemplate probe_;
  std::optional<MediaInfo> info_;
};

/// Seconds with millisecond precision, e.g. "12.345".
std::string seconds_string(Timecode t);

}  // namespace vsat
