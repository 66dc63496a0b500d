#include "vsat/media.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include "json.hpp"
#include <set>
#include <sstream>
#include <thread>

#include "vsat/error.hpp"
#include "vsat/text.hpp"

namespace vsat {

namespace fs = std::filesystem;
using nlohmann::json;

Frame Frame::filled(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Frame f;
  f.width = width;
  f.height = height;
  f.pixels.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < f.pixels.size(); i += 3) {
    f.pixels[i] = r;
    f.pixels[i + 1] = g;
    f.pixels[i + 2] = b;
  }
  return f;
}

namespace {

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw UnsupportedFormatError("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t size = le32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size() && std::memcmp(hdr, "data", 4) != 0) {
      throw UnsupportedFormatError("truncated WAV chunk");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) throw UnsupportedFormatError("short fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      const auto tag = le16(f);
      const auto channels = le16(f + 2);
      const auto rate = le32(f + 4);
      const auto bits = le16(f + 14);
      if (tag != 1) throw UnsupportedFormatError("WAV is not PCM (format tag " + std::to_string(tag) + ")");
      if (bits != 16) throw UnsupportedFormatError("WAV is not 16-bit (" + std::to_string(bits) + " bits)");
      if (channels != 1) throw UnsupportedFormatError("WAV is not mono (" + std::to_string(channels) + " channels)");
      if (rate != kCanonicalSampleRate) {
        throw UnsupportedFormatError("WAV sample rate " + std::to_string(rate) + " is not 16000");
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw UnsupportedFormatError("WAV data chunk before fmt chunk");
      // Streaming writers sometimes leave the size unset; take what is there.
      std::size_t n = std::min<std::size_t>(size, bytes.size() - body);
      n -= n % 2;
      AudioClip clip;
      clip.samples.resize(n / 2);
      for (std::size_t i = 0; i < n / 2; ++i) {
        clip.samples[i] = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i));
      }
      return clip;
    }
    pos = body + size + (size & 1);
  }
  throw UnsupportedFormatError(have_fmt ? "WAV has no data chunk" : "WAV has no fmt chunk");
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  if (clip.channels != 1 || clip.sample_rate_hz != kCanonicalSampleRate) {
    throw UnsupportedFormatError("only mono 16 kHz clips can be encoded");
  }
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, kCanonicalSampleRate);
  put32(out, kCanonicalSampleRate * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_bytes);
  for (auto s : clip.samples) put16(out, static_cast<std::uint16_t>(s));
  return out;
}

Frame decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_ws();
    long v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) throw UnsupportedFormatError(std::string("PPM ") + what + " too large");
      ++pos;
      ++digits;
    }
    if (digits == 0) throw UnsupportedFormatError(std::string("PPM header: missing ") + what);
    return static_cast<int>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw UnsupportedFormatError("not a binary P6 PPM");
  }
  pos = 2;
  Frame f;
  f.width = read_int("width");
  f.height = read_int("height");
  const int maxval = read_int("maxval");
  if (maxval != 255) throw UnsupportedFormatError("PPM maxval " + std::to_string(maxval) + " is not 255");
  if (f.width <= 0 || f.height <= 0) throw UnsupportedFormatError("PPM has zero dimension");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw UnsupportedFormatError("PPM header not terminated");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(f.width) * f.height * 3;
  if (bytes.size() - pos < need) throw UnsupportedFormatError("PPM pixel data truncated");
  f.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return f;
}

std::vector<std::uint8_t> encode_ppm(const Frame& frame) {
  if (!frame.valid()) throw ValidationError("frame buffer does not match its dimensions");
  const std::string header =
      "P6\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), frame.pixels.begin(), frame.pixels.end());
  return out;
}

std::vector<std::uint8_t> read_binary_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AssetMissingError(path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_binary_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IngestError("short write to " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AssetMissingError(path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IngestError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

MediaInfo parse_media_info_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw IngestError(std::string("media info is not JSON: ") + e.what());
  }
  MediaInfo info;
  try {
    if (j.contains("duration_ms")) {
      info.duration_ms = j.at("duration_ms").get<std::int64_t>();
      info.width = j.at("width").get<int>();
      info.height = j.at("height").get<int>();
      info.fps = j.value("fps", 25.0);
    } else if (j.contains("streams")) {
      const auto& streams = j.at("streams");
      if (streams.empty()) throw IngestError("probe output lists no video stream");
      const auto& s = streams.at(0);
      info.width = s.at("width").get<int>();
      info.height = s.at("height").get<int>();
      const auto rate = s.value("r_frame_rate", std::string("25/1"));
      const auto slash = rate.find('/');
      const double num = std::stod(rate.substr(0, slash));
      const double den = slash == std::string::npos ? 1.0 : std::stod(rate.substr(slash + 1));
      info.fps = den > 0 ? num / den : 0.0;
      const auto& d = j.at("format").at("duration");
      const double secs = d.is_string() ? std::stod(d.get<std::string>()) : d.get<double>();
      info.duration_ms = static_cast<std::int64_t>(std::llround(secs * 1000.0));
    } else {
      throw IngestError("unrecognized media info document");
    }
  } catch (const json::exception& e) {
    throw IngestError(std::string("malformed media info: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw IngestError("malformed number in media info");
  }
  if (info.duration_ms <= 0 || info.width <= 0 || info.height <= 0 || info.fps <= 0) {
    throw IngestError("media info fields must be positive");
  }
  return info;
}

std::string seconds_string(Timecode t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%03lld", static_cast<long long>(t.ms / 1000),
                static_cast<long long>(t.ms % 1000));
  return buf;
}

// ---------------------------------------------------------------------------

OfflineAssetSource::OfflineAssetSource(fs::path dir) : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_)) throw AssetMissingError(dir_.string());
}

MediaInfo OfflineAssetSource::probe() { return parse_media_info_json(read_text_file(dir_ / "manifest.json")); }

AudioClip OfflineAssetSource::extract_audio_clip(const ClipRequest& req) {
  const auto path = dir_ / std::to_string(req.cue_id) / "audio.wav";
  if (!fs::exists(path)) throw AssetMissingError(path.string());
  auto clip = decode_wav(read_binary_file(path));
  clip.cue_id = req.cue_id;
  return clip;
}

Frame OfflineAssetSource::extract_first_frame(int cue_id, Timecode) {
  const auto path = dir_ / std::to_string(cue_id) / "frame.ppm";
  if (!fs::exists(path)) throw AssetMissingError(path.string());
  auto frame = decode_ppm(read_binary_file(path));
  frame.cue_id = cue_id;
  return frame;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> placeholders(const std::string& pattern) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] != '{') continue;
    const auto close = pattern.find('}', i);
    if (close == std::string::npos) throw ConfigError("unterminated placeholder in command: " + pattern);
    out.push_back(pattern.substr(i + 1, close - i - 1));
    i = close;
  }
  return out;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

}  // namespace

CommandTemplate::CommandTemplate(std::string pattern, std::vector<std::string> allowed)
    : pattern_(std::move(pattern)) {
  if (text::trim(pattern_).empty()) throw ConfigError("empty command template");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& p : placeholders(pattern_)) {
    if (!ok.count(p)) throw ConfigError("unknown placeholder {" + p + "} in command: " + pattern_);
  }
}

std::string CommandTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  for (std::size_t i = 0; i < pattern_.size(); ++i) {
    if (pattern_[i] != '{') {
      out += pattern_[i];
      continue;
    }
    const auto close = pattern_.find('}', i);
    const auto name = pattern_.substr(i + 1, close - i - 1);
    const auto it = values.find(name);
    if (it == values.end()) throw ConfigError("no value for placeholder {" + name + "}");
    out += shell_quote(it->second);
    i = close;
  }
  return out;
}

CommandResult run_command(const std::string& command, const fs::path& scratch_dir) {
  fs::create_directories(scratch_dir);
  static std::atomic<unsigned> counter{0};
  const auto err_path =
      scratch_dir / (".stderr." + std::to_string(::getpid()) + "." + std::to_string(counter++));
  // newline so a trailing comment in the command cannot swallow the redirect
  const std::string full = "( " + command + "\n) 2>" + shell_quote(err_path.string());
  FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) throw IngestError("cannot start command: " + command);
  CommandResult res;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) res.stdout_text.append(buf.data(), n);
  const int status = ::pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
  std::error_code ec;
  if (fs::exists(err_path, ec)) {
    res.stderr_text = read_text_file(err_path);
    fs::remove(err_path, ec);
  }
  return res;
}

ExternalToolSource::ExternalToolSource(fs::path video, fs::path cache_dir, const ExternalToolConfig& config)
    : video_(std::move(video)),
      cache_dir_(std::move(cache_dir)),
      audio_(config.audio_cmd, {"in", "start", "end", "out"}),
      frame_(config.frame_cmd, {"in", "start", "out"}),
      probe_(config.probe_cmd, {"in"}) {}

MediaInfo ExternalToolSource::probe() {
  if (info_) return *info_;
  if (!fs::exists(video_)) throw AssetMissingError(video_.string());
  const auto res = run_command(probe_.render({{"in", video_.string()}}), cache_dir_);
  if (res.exit_code != 0) {
    throw IngestError("probe failed (exit " + std::to_string(res.exit_code) + "): " + res.stderr_text);
  }
  info_ = parse_media_info_json(res.stdout_text);
  return *info_;
}

AudioClip ExternalToolSource::extract_audio_clip(const ClipRequest& req) {
  if (req.start >= req.end) throw ValidationError("clip start must precede end");
  const auto out = cache_dir_ / std::to_string(req.cue_id) / "audio.wav";
  fs::create_directories(out.parent_path());
  const auto cmd = audio_.render({{"in", video_.string()},
                                  {"start", seconds_string(req.start)},
                                  {"end", seconds_string(req.end)},
                                  {"out", out.string()}});
  const auto res = run_command(cmd, cache_dir_);
  if (res.exit_code != 0) {
    throw IngestError("audio extraction failed for cue " + std::to_string(req.cue_id) + " (exit " +
                      std::to_string(res.exit_code) + "): " + res.stderr_text);
  }
  auto clip = decode_wav(read_binary_file(out));
  clip.cue_id = req.cue_id;
  return clip;
}

Frame ExternalToolSource::extract_first_frame(int cue_id, Timecode at) {
  const auto out = cache_dir_ / std::to_string(cue_id) / "frame.ppm";
  fs::create_directories(out.parent_path());
  const auto cmd = frame_.render({{"in", video_.string()}, {"start", seconds_string(at)}, {"out", out.string()}});
  const auto res = run_command(cmd, cache_dir_);
  if (res.exit_code != 0) {
    throw IngestError("frame extraction failed for cue " + std::to_string(cue_id) + " (exit " +
                      std::to_string(res.exit_code) + "): " + res.stderr_text);
  }
  auto frame = decode_ppm(read_binary_file(out));
  frame.cue_id = cue_id;
  return frame;
}

}  // namespace vsat
