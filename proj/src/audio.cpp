#include "tfg/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tfg {

namespace {
constexpr char kMagic[8] = {'T', 'F', 'G', 'F', 'E', 'A', 'T', '1'};
}

void FeatureTrack::validate() const {
  if (frames.rows() < 1)
    throw std::invalid_argument("FeatureTrack: empty track");
  if (frames.cols() != kAudioFeatureDim)
    throw std::invalid_argument("FeatureTrack: row width must be 29");
  if (!frames.allFinite())
    throw std::invalid_argument("FeatureTrack: non-finite entries");
  if (audio_frame_rate <= 0 || video_fps <= 0)
    throw std::invalid_argument("FeatureTrack: rates must be positive");
}

void save_feature_track(const FeatureTrack& track, const std::string& path) {
  track.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_feature_track: cannot open " + path);
  f.write(kMagic, sizeof(kMagic));
  const int64_t n = track.frames.rows(), w = track.frames.cols();
  f.write(reinterpret_cast<const char*>(&n), sizeof(n));
  f.write(reinterpret_cast<const char*>(&w), sizeof(w));
  f.write(reinterpret_cast<const char*>(&track.audio_frame_rate), sizeof(double));
  f.write(reinterpret_cast<const char*>(&track.video_fps), sizeof(double));
  std::vector<float> payload(static_cast<size_t>(n * w));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < w; ++j)
      payload[static_cast<size_t>(i * w + j)] = static_cast<float>(track.frames(i, j));
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!f) throw std::runtime_error("save_feature_track: write failed " + path);
}

FeatureTrack load_feature_track(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_feature_track: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_feature_track: bad magic in " + path);
  int64_t n = 0, w = 0;
  FeatureTrack track;
  f.read(reinterpret_cast<char*>(&n), sizeof(n));
  f.read(reinterpret_cast<char*>(&w), sizeof(w));
  f.read(reinterpret_cast<char*>(&track.audio_frame_rate), sizeof(double));
  f.read(reinterpret_cast<char*>(&track.video_fps), sizeof(double));
  if (!f || n < 1) throw std::runtime_error("load_feature_track: bad header in " + path);
  if (w != kAudioFeatureDim)
    throw std::runtime_error("load_feature_track: malformed row width in " + path);
  std::vector<float> payload(static_cast<size_t>(n * w));
  f.read(reinterpret_cast<char*>(payload.data()),
         static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!f) throw std::runtime_error("load_feature_track: truncated payload in " + path);
  track.frames.resize(n, w);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < w; ++j)
      track.frames(i, j) = payload[static_cast<size_t>(i * w + j)];
  track.validate();
  return track;
}

std::vector<AudioFeatureWindow> window_track(const FeatureTrack& track,
                                             long n_video_frames) {
  track.validate();
  if (n_video_frames < 1)
    throw std::invalid_argument("window_track: need at least one video frame");
  const long n_audio = track.num_frames();
  std::vector<AudioFeatureWindow> out(static_cast<size_t>(n_video_frames));
  for (long i = 0; i < n_video_frames; ++i) {
    // Mid-time of video frame i, expressed in audio frames.
    const double center = (i + 0.5) / track.video_fps * track.audio_frame_rate;
    const long start = std::lround(center - kAudioWindowFrames / 2.0);
    for (int k = 0; k < kAudioWindowFrames; ++k) {
      const long j = std::clamp(start + k, 0L, n_audio - 1);
      out[static_cast<size_t>(i)].logits.row(k) = track.frames.row(j);
    }
  }
  return out;
}

}  // namespace tfg
