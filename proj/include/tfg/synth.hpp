#pragma once

#include <random>
#include <string>
#include <vector>

#include "tfg/audio.hpp"
#include "tfg/blink.hpp"
#include "tfg/data_prep.hpp"
#include "tfg/image.hpp"
#include "tfg/landmarks.hpp"

namespace tfg::synth {

// Symmetric 68-point neutral face laid out in a 128x128 frame.
LandmarkSet template_face();

// Opens the mouth by `amount` in [0,1]: jaw drops, lower lip follows,
// inner-lip gap grows. amount 0 returns the input unchanged.
LandmarkSet open_mouth(const LandmarkSet& base, double amount);

// Smooth in [0,1]: sum of seeded sinusoids, rescaled.
std::vector<double> smooth_motion_profile(long frames, double fps,
                                          std::mt19937_64& rng,
                                          double max_amount = 1.0);

// Eyelid closure displacement track. Pulses are triangular; `closure` is the
// peak fraction of full lid closure.
BlinkSequence blink_track(const LandmarkSet& base, long frames,
                          const std::vector<long>& pulse_starts, long pulse_width,
                          double closure = 0.9);

// Width (frames) whose triangular pulse keeps the detector below threshold
// for exactly `target_below` frames on this face.
long calibrate_pulse_width(const LandmarkSet& base, long target_below,
                           double closure = 0.9,
                           const BlinkDetectorConfig& det = {});

// Procedural face image: skin with identity-specific fine stripes, eyes,
// brows, nose, lips, dark mouth interior; fixed background gradient.
Image render_face(const LandmarkSet& lm, int size, unsigned long long identity_seed);

// Segmentation mask consistent with render_face geometry.
SegmentationMask render_segmentation(const LandmarkSet& lm, int size);

// Character-logit track whose rows interpolate between two fixed patterns
// according to the mouth-opening amount, resampled to the audio rate.
FeatureTrack features_from_motion(const std::vector<double>& amounts, double fps,
                                  double audio_rate);

struct CorpusOptions {
  int subjects = 2;
  int clips_per_subject = 2;
  long frames_per_clip = 60;
  int frame_size = 128;
  double fps = 25.0;
  double audio_rate = 400.0;
  double blink_rate = 0.33;      // blinks per second
  long blink_frames = 5;         // detector-visible closure frames per blink
  bool segmentation = true;
  bool lip_jitter = true;        // perturb lip landmarks so correction matters
  bool shape_jitter = true;      // per-subject face shape tweaks
  // Translation-only placement keeps every subject rigidly identical to the
  // template, the regime where absolute retarget round-trips are exact.
  bool translation_only_placement = false;
  unsigned long long seed = 7;
};

// Writes frames/, landmarks/, features/, seg/ and manifest.json under root.
std::vector<ClipManifest> write_corpus(const std::string& root,
                                       const CorpusOptions& options);

}  // namespace tfg::synth
