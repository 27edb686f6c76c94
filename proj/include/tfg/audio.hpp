#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tfg {

inline constexpr int kAudioWindowFrames = 16;
inline constexpr int kAudioFeatureDim = 29;  // 26 characters + 3 specials

// One 16x29 window of per-frame character logits aligned to one video frame.
struct AudioFeatureWindow {
  Eigen::Matrix<double, kAudioWindowFrames, kAudioFeatureDim> logits =
      Eigen::Matrix<double, kAudioWindowFrames, kAudioFeatureDim>::Zero();
};

// Full per-clip track of character logits at the audio frame rate.
struct FeatureTrack {
  Eigen::MatrixXd frames;      // N x 29
  double audio_frame_rate = 0; // audio frames per second
  double video_fps = 0;        // target video rate

  long num_frames() const { return frames.rows(); }
  void validate() const;
};

// Binary feature file with a small header (frame count, width, rates) and a
// float32 payload.
void save_feature_track(const FeatureTrack& track, const std::string& path);
FeatureTrack load_feature_track(const std::string& path);

// Splits a track into one 16x29 window per video frame. Windows are centered
// on the video frame's mid-time; edges replicate the first/last audio frame.
std::vector<AudioFeatureWindow> window_track(const FeatureTrack& track,
                                             long n_video_frames);

}  // namespace tfg
