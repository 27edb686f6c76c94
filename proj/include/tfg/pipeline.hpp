#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tfg/audio.hpp"
#include "tfg/config.hpp"
#include "tfg/data_prep.hpp"
#include "tfg/metrics.hpp"

namespace tfg {

struct GenerateRequest {
  std::string identity_image;      // PPM at the texture resolution
  std::string identity_landmarks;  // single-row landmark CSV for that image
  std::string features;            // audio feature file
  std::string mean_face;           // mean-face CSV from preprocessing
  std::string landmark_checkpoint;
  std::string blink_checkpoint;
  std::string texture_checkpoint;
  std::string out_dir;
  long frames = -1;  // -1: derived from the feature track span
  unsigned long long seed = 1;
  bool dump_maps = false;
  bool impose_blinks = true;
};

struct GenerateResult {
  long frames = 0;
  std::string frames_dir;
  std::string canonical_csv;          // stage-1 output
  std::string canonical_blinked_csv;  // stage-2 output
  std::string landmarks_csv;          // stage-3 output: person landmark stream
  std::string provenance_json;
};

// Runs the four stages end to end: audio windows -> canonical displacements,
// blink imposition, retargeting + rasterization, texture generation. Each
// stage boundary is serialized, so any stage can be re-run standalone from
// the previous stage's file.
GenerateResult run_generate(const GenerateRequest& request);

// ---- standalone stages (file-expressible boundaries) ----

// Stage 1: one canonical displacement per video frame.
std::vector<CanonicalDisplacement> stage_displacements(
    const FeatureTrack& track, const class Speech2LandmarkModel& model,
    long n_frames);

// Stage 2: blink displacements added in canonical (mean-face) space.
std::vector<CanonicalDisplacement> stage_add_blinks(
    const std::vector<CanonicalDisplacement>& canonical,
    const LandmarkSet& mean_face, const class BlinkGenerator& gen,
    unsigned long long seed);

// Stage 3: retarget the displacement stream onto the person.
std::vector<LandmarkSet> stage_retarget(
    const std::vector<CanonicalDisplacement>& canonical,
    const LandmarkSet& person_neutral, const LandmarkSet& mean_face);

// Stage 4: rasterize and render one frame per landmark set.
void stage_texture(const std::vector<LandmarkSet>& person_frames,
                   const Image& identity, const LandmarkSet& person_neutral,
                   const class TextureGenerator& gen, const std::string& out_dir,
                   bool dump_maps);

// Displacement-stream CSV (one 136-column row per frame).
void save_displacement_csv(const std::vector<CanonicalDisplacement>& seq,
                           const std::string& path);
std::vector<CanonicalDisplacement> load_displacement_csv(const std::string& path);

struct ClipEvalInput {
  std::string clip_id;
  std::string generated_frames_dir;
  // Either the pipeline's predicted landmark stream or landmarks detected on
  // the generated frames by an external detector; lmd_source labels which.
  std::string generated_landmarks_csv;
  std::string lmd_source = "landmark-stream";
  std::string truth_frames_dir;
  std::string truth_landmarks_csv;
  long frame_count = 0;
  double fps = 25.0;
};

struct CorpusEvalReport {
  std::vector<std::pair<std::string, EvalReport>> per_clip;
  EvalReport aggregate;
  BlinkComparison blink;
  std::string table;  // Table-layout text: PSNR | SSIM | CPBD | LMD
};

CorpusEvalReport run_evaluate(const std::vector<ClipEvalInput>& clips);

void write_eval_report(const CorpusEvalReport& report, const std::string& out_dir);

}  // namespace tfg
