#include <filesystem>
#include <random>

#include "doctest.h"
#include "tfg/data_prep.hpp"
#include "tfg/synth.hpp"

using namespace tfg;
namespace fs = std::filesystem;

TEST_CASE("segmentation mask IO round trip and label validation") {
  SegmentationMask mask(16, 16);
  mask.at(4, 5) = static_cast<uint8_t>(SegClass::kUpperLip);
  mask.at(9, 9) = static_cast<uint8_t>(SegClass::kLowerLip);
  const std::string path = "/tmp/tfg_mask.pgm";
  save_segmentation_mask(mask, path);
  const SegmentationMask back = load_segmentation_mask(path);
  CHECK(back.labels == mask.labels);
  CHECK(back.contains_class(SegClass::kUpperLip));
  CHECK_FALSE(back.contains_class(SegClass::kEyes));
}

namespace {

// Mask with two horizontal lip bands: upper lip rows [top0,top1), lower lip
// rows [bot0,bot1), full width.
SegmentationMask band_mask(int size, int top0, int top1, int bot0, int bot1) {
  SegmentationMask mask(size, size, SegClass::kSkin);
  for (int y = top0; y < top1; ++y)
    for (int x = 0; x < size; ++x) mask.at(y, x) = static_cast<uint8_t>(SegClass::kUpperLip);
  for (int y = bot0; y < bot1; ++y)
    for (int x = 0; x < size; ++x) mask.at(y, x) = static_cast<uint8_t>(SegClass::kLowerLip);
  return mask;
}

}  // namespace

TEST_CASE("lip landmarks on a class boundary stay put") {
  const int size = 128;
  const SegmentationMask mask = band_mask(size, 80, 86, 86, 93);
  LandmarkSet lm = synth::template_face();
  // Put an upper-lip landmark exactly on the upper boundary row.
  lm.set_point(51, Eigen::Vector2d(64, 80));
  const LipCorrectionResult result = correct_lip_landmarks(lm, mask);
  CHECK_FALSE(result.missing_lip_classes);
  CHECK(result.landmarks.point(51) == Eigen::Vector2d(64, 80));
}

TEST_CASE("a lip landmark 3 px above a horizontal boundary snaps down") {
  const int size = 128;
  const SegmentationMask mask = band_mask(size, 80, 86, 86, 93);
  LandmarkSet lm = synth::template_face();
  lm.set_point(51, Eigen::Vector2d(64, 77));  // 3 px above the y=80 boundary
  const LipCorrectionResult result = correct_lip_landmarks(lm, mask);
  CHECK(result.landmarks.point(51) == Eigen::Vector2d(64, 80));
  CHECK(result.moved_count >= 1);
}

TEST_CASE("non-lip landmarks never move and missing classes warn") {
  const int size = 128;
  const SegmentationMask mask = band_mask(size, 80, 86, 86, 93);
  const LandmarkSet lm = synth::template_face();
  const LipCorrectionResult result = correct_lip_landmarks(lm, mask);
  for (int i = 0; i < lm_group::kMouthBegin; ++i)
    CHECK((result.landmarks.point(i) - lm.point(i)).norm() == 0.0);

  SegmentationMask no_lips(size, size, SegClass::kSkin);
  const LipCorrectionResult warned = correct_lip_landmarks(lm, no_lips);
  CHECK(warned.missing_lip_classes);
  CHECK((warned.landmarks.points - lm.points).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("neutral frame selection picks the smallest inner-lip gap") {
  const LandmarkSet base = synth::template_face();
  std::vector<LandmarkSet> seq;
  for (int i = 0; i < 12; ++i)
    seq.push_back(synth::open_mouth(base, i == 7 ? 0.01 : 0.1 + 0.05 * i));
  CHECK(select_neutral_frame(seq) == 7);

  std::vector<LandmarkSet> opening;
  for (int i = 0; i < 6; ++i) opening.push_back(synth::open_mouth(base, i * 0.15));
  CHECK(select_neutral_frame(opening) == 0);
  CHECK_THROWS_AS(select_neutral_frame({}), std::invalid_argument);
}

TEST_CASE("mean face of rigid copies recovers the shared shape") {
  const LandmarkSet face = synth::template_face();
  CHECK((build_mean_face({face}).points - face.points).cwiseAbs().maxCoeff() == 0.0);

  RigidTransform rt;
  const double a = 0.3;
  rt.rotation << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  rt.translation << 12.0, -8.0;
  const LandmarkSet mean = build_mean_face({face, rt.apply(face)});
  CHECK((mean.points - face.points).cwiseAbs().maxCoeff() < 1e-6);

  const LandmarkSet rep = build_mean_face({face, face, face, face});
  CHECK((rep.points - face.points).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("matrix csv round trip") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  Eigen::MatrixXd m(7, 13);
  for (long i = 0; i < m.size(); ++i) m(i / 13, i % 13) = u(rng);
  const std::string path = "/tmp/tfg_matrix.csv";
  save_matrix_csv(m, path);
  const Eigen::MatrixXd back = load_matrix_csv(path);
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_training_sets emits consistent per-module datasets") {
  const std::string root = "/tmp/tfg_corpus_prep";
  fs::remove_all(root);
  synth::CorpusOptions options;
  options.subjects = 2;
  options.clips_per_subject = 1;
  options.frames_per_clip = 24;
  options.frame_size = 64;
  options.seed = 3;
  const auto manifests = synth::write_corpus(root, options);
  REQUIRE(manifests.size() == 2);

  const std::string out = root + "/prep";
  const BuildResult result = build_training_sets(manifests, root, out);
  CHECK(result.skipped.empty());
  REQUIRE(result.clips.size() == 2);

  auto [mean_face, clips] = load_dataset_index(out);
  REQUIRE(clips.size() == 2);

  for (const DatasetClip& clip : clips) {
    // Count conservation across emitted streams.
    const Eigen::MatrixXd canon = load_matrix_csv(clip.canonical_csv);
    const Eigen::MatrixXd eye = load_matrix_csv(clip.eye_csv);
    const auto landmarks = load_landmark_sequence(clip.landmark_csv);
    CHECK(canon.rows() == options.frames_per_clip);
    CHECK(eye.rows() == options.frames_per_clip);
    CHECK(canon.cols() == 136);
    CHECK(eye.cols() == 44);
    CHECK(static_cast<long>(landmarks.size()) == options.frames_per_clip);

    // The neutral frame has (near-)zero canonical displacement.
    CHECK(canon.row(clip.neutral_index).cwiseAbs().maxCoeff() < 1e-6);

    // Motion round trip holds exactly for arbitrary subject shapes: the
    // rebuilt frame-to-neutral motion equals the corrected landmark motion.
    const LandmarkSet neutral = landmarks[static_cast<size_t>(clip.neutral_index)];
    const ScaleFactor scale = compute_scale(neutral, mean_face);
    LandmarkSet rebuilt_neutral;
    {
      CanonicalDisplacement d;
      for (int j = 0; j < kNumLandmarks; ++j) {
        d.deltas(j, 0) = canon(clip.neutral_index, 2 * j);
        d.deltas(j, 1) = canon(clip.neutral_index, 2 * j + 1);
      }
      rebuilt_neutral = retarget(d, scale, neutral, mean_face);
    }
    for (long t = 0; t < canon.rows(); ++t) {
      CanonicalDisplacement d;
      for (int j = 0; j < kNumLandmarks; ++j) {
        d.deltas(j, 0) = canon(t, 2 * j);
        d.deltas(j, 1) = canon(t, 2 * j + 1);
      }
      const LandmarkSet rebuilt = retarget(d, scale, neutral, mean_face);
      const LandmarkMatrix rebuilt_motion = rebuilt.points - rebuilt_neutral.points;
      const LandmarkMatrix true_motion =
          landmarks[static_cast<size_t>(t)].points - neutral.points;
      CHECK((rebuilt_motion - true_motion).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  // Subject-disjoint split.
  std::string s0_split, s1_split;
  for (const DatasetClip& clip : clips) {
    if (clip.subject_id == "s0") s0_split = clip.split;
    if (clip.subject_id == "s1") s1_split = clip.split;
  }
  CHECK(s0_split == "train");
  CHECK(s1_split == "test");
}

TEST_CASE("emitted displacements retarget back exactly on a shape-consistent corpus") {
  // Subjects rigidly identical to the template (translation-only placement):
  // the regime where the absolute round trip through the mean face is exact.
  const std::string root = "/tmp/tfg_corpus_exact";
  fs::remove_all(root);
  synth::CorpusOptions options;
  options.subjects = 2;
  options.clips_per_subject = 1;
  options.frames_per_clip = 20;
  options.frame_size = 64;
  options.shape_jitter = false;
  options.lip_jitter = false;
  options.translation_only_placement = true;
  options.blink_rate = 0.0;    // a blink overlapping the neutral frame would
                               // perturb that clip's neutral eye shape
  options.segmentation = false;  // pixel-snap corrections shift sub-pixel
                                 // alignments differently per clip
  options.seed = 11;
  const auto manifests = synth::write_corpus(root, options);
  const BuildResult result = build_training_sets(manifests, root, root + "/prep");
  REQUIRE(result.skipped.empty());

  auto [mean_face, clips] = load_dataset_index(root + "/prep");
  for (const DatasetClip& clip : clips) {
    const Eigen::MatrixXd canon = load_matrix_csv(clip.canonical_csv);
    const auto landmarks = load_landmark_sequence(clip.landmark_csv);
    const LandmarkSet neutral = landmarks[static_cast<size_t>(clip.neutral_index)];
    const ScaleFactor scale = compute_scale(neutral, mean_face);
    for (long t = 0; t < canon.rows(); ++t) {
      CanonicalDisplacement d;
      for (int j = 0; j < kNumLandmarks; ++j) {
        d.deltas(j, 0) = canon(t, 2 * j);
        d.deltas(j, 1) = canon(t, 2 * j + 1);
      }
      const LandmarkSet rebuilt = retarget(d, scale, neutral, mean_face);
      CHECK((rebuilt.points - landmarks[static_cast<size_t>(t)].points)
                .cwiseAbs()
                .maxCoeff() < 1e-4);
    }
  }
}

TEST_CASE("clips with inconsistent streams are skipped with a reason") {
  const std::string root = "/tmp/tfg_corpus_bad";
  fs::remove_all(root);
  synth::CorpusOptions options;
  options.subjects = 2;
  options.clips_per_subject = 1;
  options.frames_per_clip = 12;
  options.frame_size = 64;
  options.seed = 4;
  auto manifests = synth::write_corpus(root, options);
  manifests[0].frame_count = 999;  // disagrees with the landmark rows

  const BuildResult result =
      build_training_sets(manifests, root, root + "/prep");
  REQUIRE(result.skipped.size() == 1);
  CHECK(result.skipped[0].find(manifests[0].clip_id) != std::string::npos);
  CHECK(result.clips.size() == 1);
}

TEST_CASE("corpus manifest round trip") {
  const std::string root = "/tmp/tfg_corpus_manifest";
  fs::remove_all(root);
  fs::create_directories(root);
  std::vector<ClipManifest> clips(1);
  clips[0].clip_id = "x_1";
  clips[0].subject_id = "x";
  clips[0].fps = 30.0;
  clips[0].frames_dir = "frames/x_1";
  clips[0].frame_count = 42;
  clips[0].landmark_file = "landmarks/x_1.csv";
  clips[0].feature_file = "features/x_1.feat";
  clips[0].neutral_index = 3;
  save_corpus_manifest(clips, root + "/manifest.json");
  const auto back = load_corpus_manifest(root + "/manifest.json");
  REQUIRE(back.size() == 1);
  CHECK(back[0].clip_id == "x_1");
  CHECK(back[0].neutral_index == 3);
  CHECK(back[0].fps == 30.0);
}
