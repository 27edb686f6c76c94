#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tfg/landmarks.hpp"

namespace tfg {

// Fixed segmentation class list; files store raw label bytes.
enum class SegClass : uint8_t {
  kBackground = 0,
  kSkin = 1,
  kHair = 2,
  kEyes = 3,
  kNose = 4,
  kUpperLip = 5,
  kLowerLip = 6,
  kMouthInterior = 7,
};
inline constexpr uint8_t kSegClassCount = 8;

struct SegmentationMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> labels;

  SegmentationMask() = default;
  SegmentationMask(int h, int w, SegClass fill = SegClass::kBackground)
      : height(h), width(w),
        labels(static_cast<size_t>(h) * w, static_cast<uint8_t>(fill)) {}
  uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }
  bool contains_class(SegClass c) const;
};

void save_segmentation_mask(const SegmentationMask& mask, const std::string& path);
SegmentationMask load_segmentation_mask(const std::string& path);

struct LipCorrectionResult {
  LandmarkSet landmarks;
  bool missing_lip_classes = false;
  int moved_count = 0;
};

// Snaps each lip landmark (48-67) to the nearest boundary pixel of its lip
// class within the search radius; equidistant candidates resolve to the
// lowest scanline, then the lowest column. Landmarks with no boundary in
// range, and all non-lip landmarks, are left unchanged.
LipCorrectionResult correct_lip_landmarks(const LandmarkSet& lm,
                                          const SegmentationMask& mask,
                                          double search_radius = 8.0);

// Index of the frame with the smallest inner-lip vertical gap (earliest wins
// ties): the closed-lips neutral frame of a clip.
size_t select_neutral_frame(const std::vector<LandmarkSet>& lm_seq);

double inner_lip_gap(const LandmarkSet& lm);

// Rigid-aligns every face to the first, then averages.
LandmarkSet build_mean_face(const std::vector<LandmarkSet>& neutral_faces);

struct ClipManifest {
  std::string clip_id;
  std::string subject_id;
  double fps = 25.0;
  std::string frames_dir;   // numbered frames: frame_%06d.ppm
  long frame_count = 0;
  std::string landmark_file;
  std::string feature_file;
  std::string segmentation_dir;  // optional; numbered masks: mask_%06d.pgm
  long neutral_index = -1;       // -1: selected automatically
};

std::vector<ClipManifest> load_corpus_manifest(const std::string& path);
void save_corpus_manifest(const std::vector<ClipManifest>& clips,
                          const std::string& path);

std::string frame_path(const std::string& frames_dir, long index);
std::string mask_path(const std::string& seg_dir, long index);

// Generic dense-matrix CSV helpers (eye tracks, diagnostics).
void save_matrix_csv(const Eigen::MatrixXd& m, const std::string& path);
Eigen::MatrixXd load_matrix_csv(const std::string& path);

struct BuildOptions {
  double lip_search_radius = 8.0;
  double test_fraction = 0.2;  // subject-disjoint split
};

struct DatasetClip {
  std::string clip_id;
  std::string subject_id;
  double fps = 25.0;
  long frame_count = 0;
  long neutral_index = 0;
  std::string frames_dir;
  std::string feature_file;
  std::string landmark_csv;   // corrected person-specific landmarks
  std::string canonical_csv;  // canonical displacements
  std::string eye_csv;        // eye-region displacement track (T x 44)
  std::string split;          // "train" or "test"
};

struct BuildResult {
  LandmarkSet mean_face;
  std::vector<DatasetClip> clips;
  std::vector<std::string> skipped;  // "clip_id: reason"
};

// Ingests a corpus (landmarks + optional segmentation + features), corrects
// lips, selects neutral frames, builds and persists the mean face, extracts
// canonical displacements and eye tracks, and writes dataset.json.
BuildResult build_training_sets(const std::vector<ClipManifest>& manifests,
                                const std::string& root,
                                const std::string& out_dir,
                                const BuildOptions& options = {});

std::pair<LandmarkSet, std::vector<DatasetClip>> load_dataset_index(
    const std::string& out_dir);

}  // namespace tfg
