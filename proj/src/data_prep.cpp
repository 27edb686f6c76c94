#include "tfg/data_prep.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tfg/audio.hpp"
#include "tfg/blink.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tfg {

bool SegmentationMask::contains_class(SegClass c) const {
  const uint8_t v = static_cast<uint8_t>(c);
  return std::find(labels.begin(), labels.end(), v) != labels.end();
}

void save_segmentation_mask(const SegmentationMask& mask, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_segmentation_mask: cannot open " + path);
  f << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(mask.labels.data()),
          static_cast<std::streamsize>(mask.labels.size()));
}

SegmentationMask load_segmentation_mask(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_segmentation_mask: cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0)
    throw std::runtime_error("load_segmentation_mask: bad header in " + path);
  f.get();
  SegmentationMask mask(h, w);
  f.read(reinterpret_cast<char*>(mask.labels.data()),
         static_cast<std::streamsize>(mask.labels.size()));
  if (!f) throw std::runtime_error("load_segmentation_mask: truncated " + path);
  for (uint8_t v : mask.labels)
    if (v >= kSegClassCount)
      throw std::runtime_error("load_segmentation_mask: unknown label in " + path);
  return mask;
}

namespace {

// Lip class of each mouth landmark. Corners may snap to either lip.
enum class LipRole { kUpper, kLower, kCorner };

LipRole lip_role(int index) {
  // Outer: 48 corner, 49-53 upper, 54 corner, 55-59 lower.
  // Inner: 60 corner, 61-63 upper, 64 corner, 65-67 lower.
  if (index == 48 || index == 54 || index == 60 || index == 64)
    return LipRole::kCorner;
  if ((index >= 49 && index <= 53) || (index >= 61 && index <= 63))
    return LipRole::kUpper;
  return LipRole::kLower;
}

bool is_boundary(const SegmentationMask& mask, int y, int x, uint8_t cls) {
  if (mask.at(y, x) != cls) return false;
  if (y == 0 || y == mask.height - 1 || x == 0 || x == mask.width - 1) return true;
  return mask.at(y - 1, x) != cls || mask.at(y + 1, x) != cls ||
         mask.at(y, x - 1) != cls || mask.at(y, x + 1) != cls;
}

}  // namespace

LipCorrectionResult correct_lip_landmarks(const LandmarkSet& lm,
                                          const SegmentationMask& mask,
                                          double search_radius) {
  lm.validate("correct_lip_landmarks");
  LipCorrectionResult result;
  result.landmarks = lm;
  if (!mask.contains_class(SegClass::kUpperLip) ||
      !mask.contains_class(SegClass::kLowerLip)) {
    result.missing_lip_classes = true;
    return result;
  }
  const int r = static_cast<int>(std::ceil(search_radius));
  for (int i = lm_group::kMouthBegin; i < lm_group::kMouthEnd; ++i) {
    const Eigen::Vector2d p = lm.point(i);
    const int cx = static_cast<int>(std::lround(p.x()));
    const int cy = static_cast<int>(std::lround(p.y()));
    const LipRole role = lip_role(i);

    double best_d2 = search_radius * search_radius + 1e-9;
    int best_y = -1, best_x = -1;
    for (int y = std::max(0, cy - r); y <= std::min(mask.height - 1, cy + r); ++y)
      for (int x = std::max(0, cx - r); x <= std::min(mask.width - 1, cx + r); ++x) {
        const bool candidate =
            role == LipRole::kUpper
                ? is_boundary(mask, y, x, static_cast<uint8_t>(SegClass::kUpperLip))
                : role == LipRole::kLower
                      ? is_boundary(mask, y, x,
                                    static_cast<uint8_t>(SegClass::kLowerLip))
                      : (is_boundary(mask, y, x,
                                     static_cast<uint8_t>(SegClass::kUpperLip)) ||
                         is_boundary(mask, y, x,
                                     static_cast<uint8_t>(SegClass::kLowerLip)));
        if (!candidate) continue;
        const double d2 = (p - Eigen::Vector2d(x, y)).squaredNorm();
        // Tie-break: lowest scanline, then lowest column.
        if (d2 < best_d2 - 1e-12 ||
            (std::abs(d2 - best_d2) <= 1e-12 &&
             (y < best_y || (y == best_y && x < best_x)))) {
          best_d2 = d2;
          best_y = y;
          best_x = x;
        }
      }
    if (best_y >= 0 && (best_x != cx || best_y != cy)) {
      result.landmarks.set_point(i, Eigen::Vector2d(best_x, best_y));
      ++result.moved_count;
    }
  }
  return result;
}

double inner_lip_gap(const LandmarkSet& lm) {
  // Opposing inner-lip pairs: (61,67), (62,66), (63,65).
  double gap = 0.0;
  gap += std::abs(lm.points(67, 1) - lm.points(61, 1));
  gap += std::abs(lm.points(66, 1) - lm.points(62, 1));
  gap += std::abs(lm.points(65, 1) - lm.points(63, 1));
  return gap / 3.0;
}

size_t select_neutral_frame(const std::vector<LandmarkSet>& lm_seq) {
  if (lm_seq.empty())
    throw std::invalid_argument("select_neutral_frame: empty sequence");
  size_t best = 0;
  double best_gap = inner_lip_gap(lm_seq[0]);
  for (size_t i = 1; i < lm_seq.size(); ++i) {
    const double gap = inner_lip_gap(lm_seq[i]);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

LandmarkSet build_mean_face(const std::vector<LandmarkSet>& neutral_faces) {
  if (neutral_faces.empty())
    throw std::invalid_argument("build_mean_face: empty input");
  LandmarkMatrix accum = LandmarkMatrix::Zero();
  for (const LandmarkSet& face : neutral_faces) {
    const RigidTransform rt = procrustes_align(face, neutral_faces[0]);
    accum += rt.apply(face).points;
  }
  LandmarkSet mean;
  mean.points = accum / static_cast<double>(neutral_faces.size());
  return mean;
}

std::string frame_path(const std::string& frames_dir, long index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06ld.ppm", index);
  return (fs::path(frames_dir) / buf).string();
}

std::string mask_path(const std::string& seg_dir, long index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mask_%06ld.pgm", index);
  return (fs::path(seg_dir) / buf).string();
}

std::vector<ClipManifest> load_corpus_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_corpus_manifest: cannot open " + path);
  json doc = json::parse(f);
  std::vector<ClipManifest> clips;
  for (const json& c : doc.at("clips")) {
    ClipManifest m;
    m.clip_id = c.at("clip_id").get<std::string>();
    m.subject_id = c.at("subject_id").get<std::string>();
    m.fps = c.at("fps").get<double>();
    m.frames_dir = c.at("frames_dir").get<std::string>();
    m.frame_count = c.at("frame_count").get<long>();
    m.landmark_file = c.at("landmarks").get<std::string>();
    m.feature_file = c.at("features").get<std::string>();
    if (c.contains("segmentation_dir"))
      m.segmentation_dir = c.at("segmentation_dir").get<std::string>();
    if (c.contains("neutral_index")) m.neutral_index = c.at("neutral_index").get<long>();
    clips.push_back(std::move(m));
  }
  return clips;
}

void save_corpus_manifest(const std::vector<ClipManifest>& clips,
                          const std::string& path) {
  json doc;
  doc["clips"] = json::array();
  for (const ClipManifest& m : clips) {
    json c = {{"clip_id", m.clip_id},       {"subject_id", m.subject_id},
              {"fps", m.fps},               {"frames_dir", m.frames_dir},
              {"frame_count", m.frame_count}, {"landmarks", m.landmark_file},
              {"features", m.feature_file}};
    if (!m.segmentation_dir.empty()) c["segmentation_dir"] = m.segmentation_dir;
    if (m.neutral_index >= 0) c["neutral_index"] = m.neutral_index;
    doc["clips"].push_back(c);
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_corpus_manifest: cannot open " + path);
  f << doc.dump(2) << "\n";
}

void save_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_matrix_csv: cannot open " + path);
  f.precision(17);
  for (long r = 0; r < m.rows(); ++r) {
    for (long c = 0; c < m.cols(); ++c) f << (c ? "," : "") << m(r, c);
    f << "\n";
  }
}

Eigen::MatrixXd load_matrix_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_matrix_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows[0].size())
      throw std::runtime_error("load_matrix_csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<long>(rows.size()), static_cast<long>(rows[0].size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<long>(r), static_cast<long>(c)) = rows[r][c];
  return m;
}

namespace {

struct LoadedClip {
  ClipManifest manifest;
  std::vector<LandmarkSet> landmarks;  // lip-corrected when masks exist
  long neutral = 0;
};

Eigen::MatrixXd eye_track_of(const std::vector<CanonicalDisplacement>& seq) {
  const auto& idx = eye_region_indices();
  Eigen::MatrixXd track(static_cast<long>(seq.size()), kEyeDisplacementDim);
  for (size_t t = 0; t < seq.size(); ++t)
    for (int k = 0; k < kEyeRegionSize; ++k) {
      track(static_cast<long>(t), 2 * k) = seq[t].deltas(idx[static_cast<size_t>(k)], 0);
      track(static_cast<long>(t), 2 * k + 1) =
          seq[t].deltas(idx[static_cast<size_t>(k)], 1);
    }
  return track;
}

}  // namespace

BuildResult build_training_sets(const std::vector<ClipManifest>& manifests,
                                const std::string& root, const std::string& out_dir,
                                const BuildOptions& options) {
  if (manifests.empty())
    throw std::invalid_argument("build_training_sets: no clips");
  const fs::path rootp(root), outp(out_dir);
  fs::create_directories(outp / "canonical");
  fs::create_directories(outp / "landmarks");
  fs::create_directories(outp / "eye");

  BuildResult result;
  std::vector<LoadedClip> loaded;
  for (const ClipManifest& m : manifests) {
    try {
      auto lms = load_landmark_sequence((rootp / m.landmark_file).string());
      if (static_cast<long>(lms.size()) != m.frame_count)
        throw std::runtime_error("landmark row count disagrees with frame_count");
      const FeatureTrack track =
          load_feature_track((rootp / m.feature_file).string());
      const long covered = std::lround(static_cast<double>(track.num_frames()) /
                                       track.audio_frame_rate * m.fps);
      if (covered < m.frame_count)
        throw std::runtime_error("feature track shorter than the video span");
      for (long i = 0; i < m.frame_count; ++i)
        if (!fs::exists(frame_path((rootp / m.frames_dir).string(), i)))
          throw std::runtime_error("missing frame " + std::to_string(i));

      if (!m.segmentation_dir.empty()) {
        for (long i = 0; i < m.frame_count; ++i) {
          const SegmentationMask mask = load_segmentation_mask(
              mask_path((rootp / m.segmentation_dir).string(), i));
          lms[static_cast<size_t>(i)] =
              correct_lip_landmarks(lms[static_cast<size_t>(i)], mask,
                                    options.lip_search_radius)
                  .landmarks;
        }
      }
      LoadedClip lc;
      lc.manifest = m;
      lc.neutral = m.neutral_index >= 0
                       ? m.neutral_index
                       : static_cast<long>(select_neutral_frame(lms));
      if (lc.neutral >= static_cast<long>(lms.size()))
        throw std::runtime_error("neutral index out of range");
      lc.landmarks = std::move(lms);
      loaded.push_back(std::move(lc));
    } catch (const std::exception& e) {
      result.skipped.push_back(m.clip_id + ": " + e.what());
    }
  }
  if (loaded.empty())
    throw std::runtime_error("build_training_sets: all clips were skipped");

  std::vector<LandmarkSet> neutrals;
  neutrals.reserve(loaded.size());
  for (const LoadedClip& lc : loaded)
    neutrals.push_back(lc.landmarks[static_cast<size_t>(lc.neutral)]);
  result.mean_face = build_mean_face(neutrals);
  save_landmarks(result.mean_face, (outp / "mean_face.csv").string());

  // Subject-disjoint split: the tail of the sorted subject list goes to test.
  // A nonzero test fraction always reserves at least one test subject.
  std::set<std::string> subjects;
  for (const LoadedClip& lc : loaded) subjects.insert(lc.manifest.subject_id);
  std::vector<std::string> ordered(subjects.begin(), subjects.end());
  size_t train_count =
      static_cast<size_t>(std::ceil(static_cast<double>(ordered.size()) *
                                    (1.0 - options.test_fraction)));
  if (options.test_fraction > 0.0 && ordered.size() >= 2)
    train_count = std::min(train_count, ordered.size() - 1);
  train_count = std::max<size_t>(1, std::min(train_count, ordered.size()));
  std::set<std::string> train_subjects(
      ordered.begin(), ordered.begin() + static_cast<long>(train_count));

  for (const LoadedClip& lc : loaded) {
    const LandmarkSet& neutral =
        lc.landmarks[static_cast<size_t>(lc.neutral)];
    const std::vector<CanonicalDisplacement> canonical =
        extract_canonical(lc.landmarks, neutral, result.mean_face);

    DatasetClip entry;
    entry.clip_id = lc.manifest.clip_id;
    entry.subject_id = lc.manifest.subject_id;
    entry.fps = lc.manifest.fps;
    entry.frame_count = lc.manifest.frame_count;
    entry.neutral_index = lc.neutral;
    entry.frames_dir = (rootp / lc.manifest.frames_dir).string();
    entry.feature_file = (rootp / lc.manifest.feature_file).string();
    entry.landmark_csv = (outp / "landmarks" / (lc.manifest.clip_id + ".csv")).string();
    entry.canonical_csv = (outp / "canonical" / (lc.manifest.clip_id + ".csv")).string();
    entry.eye_csv = (outp / "eye" / (lc.manifest.clip_id + ".csv")).string();
    entry.split = train_subjects.count(lc.manifest.subject_id) ? "train" : "test";

    save_landmark_sequence(lc.landmarks, entry.landmark_csv);
    Eigen::MatrixXd canon(static_cast<long>(canonical.size()), kNumLandmarks * 2);
    for (size_t t = 0; t < canonical.size(); ++t)
      for (int j = 0; j < kNumLandmarks; ++j) {
        canon(static_cast<long>(t), 2 * j) = canonical[t].deltas(j, 0);
        canon(static_cast<long>(t), 2 * j + 1) = canonical[t].deltas(j, 1);
      }
    save_matrix_csv(canon, entry.canonical_csv);
    save_matrix_csv(eye_track_of(canonical), entry.eye_csv);
    result.clips.push_back(std::move(entry));
  }

  json index;
  index["mean_face"] = (outp / "mean_face.csv").string();
  index["clips"] = json::array();
  for (const DatasetClip& c : result.clips)
    index["clips"].push_back({{"clip_id", c.clip_id},
                              {"subject_id", c.subject_id},
                              {"fps", c.fps},
                              {"frame_count", c.frame_count},
                              {"neutral_index", c.neutral_index},
                              {"frames_dir", c.frames_dir},
                              {"feature_file", c.feature_file},
                              {"landmark_csv", c.landmark_csv},
                              {"canonical_csv", c.canonical_csv},
                              {"eye_csv", c.eye_csv},
                              {"split", c.split}});
  std::ofstream f((outp / "dataset.json").string());
  f << index.dump(2) << "\n";
  return result;
}

std::pair<LandmarkSet, std::vector<DatasetClip>> load_dataset_index(
    const std::string& out_dir) {
  std::ifstream f((fs::path(out_dir) / "dataset.json").string());
  if (!f)
    throw std::runtime_error("load_dataset_index: no dataset.json in " + out_dir);
  json doc = json::parse(f);
  std::vector<DatasetClip> clips;
  for (const json& c : doc.at("clips")) {
    DatasetClip entry;
    entry.clip_id = c.at("clip_id").get<std::string>();
    entry.subject_id = c.at("subject_id").get<std::string>();
    entry.fps = c.at("fps").get<double>();
    entry.frame_count = c.at("frame_count").get<long>();
    entry.neutral_index = c.at("neutral_index").get<long>();
    entry.frames_dir = c.at("frames_dir").get<std::string>();
    entry.feature_file = c.at("feature_file").get<std::string>();
    entry.landmark_csv = c.at("landmark_csv").get<std::string>();
    entry.canonical_csv = c.at("canonical_csv").get<std::string>();
    entry.eye_csv = c.at("eye_csv").get<std::string>();
    entry.split = c.at("split").get<std::string>();
    clips.push_back(std::move(entry));
  }
  return {load_landmarks(doc.at("mean_face").get<std::string>()), clips};
}

}  // namespace tfg
