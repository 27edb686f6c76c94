#include "tfg/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "tfg/audio.hpp"
#include "tfg/blink.hpp"
#include "tfg/nn/serialize.hpp"
#include "tfg/speech2landmark.hpp"
#include "tfg/texture.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tfg {

std::vector<CanonicalDisplacement> stage_displacements(
    const FeatureTrack& track, const Speech2LandmarkModel& model, long n_frames) {
  const std::vector<AudioFeatureWindow> windows = window_track(track, n_frames);
  std::vector<CanonicalDisplacement> canonical;
  canonical.reserve(windows.size());
  for (const AudioFeatureWindow& w : windows) canonical.push_back(model.forward(w));
  return canonical;
}

std::vector<CanonicalDisplacement> stage_add_blinks(
    const std::vector<CanonicalDisplacement>& canonical,
    const LandmarkSet& mean_face, const BlinkGenerator& gen,
    unsigned long long seed) {
  std::vector<LandmarkSet> faces(canonical.size());
  for (size_t t = 0; t < canonical.size(); ++t)
    faces[t].points = mean_face.points + canonical[t].deltas;
  const BlinkSequence blinks = gen.generate(static_cast<long>(canonical.size()), seed);
  faces = impose_blinks(faces, blinks);
  std::vector<CanonicalDisplacement> out(canonical.size());
  for (size_t t = 0; t < canonical.size(); ++t)
    out[t].deltas = faces[t].points - mean_face.points;
  return out;
}

std::vector<LandmarkSet> stage_retarget(
    const std::vector<CanonicalDisplacement>& canonical,
    const LandmarkSet& person_neutral, const LandmarkSet& mean_face) {
  const ScaleFactor scale = compute_scale(person_neutral, mean_face);
  std::vector<LandmarkSet> out;
  out.reserve(canonical.size());
  for (const CanonicalDisplacement& d : canonical)
    out.push_back(retarget(d, scale, person_neutral, mean_face));
  return out;
}

void stage_texture(const std::vector<LandmarkSet>& person_frames,
                   const Image& identity, const LandmarkSet& person_neutral,
                   const TextureGenerator& gen, const std::string& out_dir,
                   bool dump_maps) {
  const int res = gen.config().resolution;
  const Image identity_raster = render_landmark_image(person_neutral, res, res);
  fs::create_directories(fs::path(out_dir) / "frames");
  if (dump_maps) fs::create_directories(fs::path(out_dir) / "maps");
  for (size_t t = 0; t < person_frames.size(); ++t) {
    const Image raster = render_landmark_image(person_frames[t], res, res);
    const TextureGenerator::FrameResult frame =
        gen.generate_frame(identity, raster, identity_raster);
    save_image(frame.composed, frame_path((fs::path(out_dir) / "frames").string(),
                                          static_cast<long>(t)));
    if (dump_maps) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "att_%06ld.pgm", static_cast<long>(t));
      save_image(frame.att, (fs::path(out_dir) / "maps" / buf).string());
      std::snprintf(buf, sizeof(buf), "color_%06ld.ppm", static_cast<long>(t));
      save_image(frame.color, (fs::path(out_dir) / "maps" / buf).string());
    }
  }
}

void save_displacement_csv(const std::vector<CanonicalDisplacement>& seq,
                           const std::string& path) {
  Eigen::MatrixXd m(static_cast<long>(seq.size()), kDisplacementDim);
  for (size_t t = 0; t < seq.size(); ++t)
    for (int j = 0; j < kNumLandmarks; ++j) {
      m(static_cast<long>(t), 2 * j) = seq[t].deltas(j, 0);
      m(static_cast<long>(t), 2 * j + 1) = seq[t].deltas(j, 1);
    }
  save_matrix_csv(m, path);
}

std::vector<CanonicalDisplacement> load_displacement_csv(const std::string& path) {
  const Eigen::MatrixXd m = load_matrix_csv(path);
  if (m.cols() != kDisplacementDim)
    throw std::runtime_error("load_displacement_csv: expected 136 columns in " +
                             path);
  std::vector<CanonicalDisplacement> seq(static_cast<size_t>(m.rows()));
  for (long t = 0; t < m.rows(); ++t)
    for (int j = 0; j < kNumLandmarks; ++j) {
      seq[static_cast<size_t>(t)].deltas(j, 0) = m(t, 2 * j);
      seq[static_cast<size_t>(t)].deltas(j, 1) = m(t, 2 * j + 1);
    }
  return seq;
}

GenerateResult run_generate(const GenerateRequest& request) {
  for (const std::string* p :
       {&request.landmark_checkpoint, &request.blink_checkpoint,
        &request.texture_checkpoint})
    if (!fs::exists(*p))
      throw std::runtime_error("run_generate: missing checkpoint " + *p);

  const Speech2LandmarkModel landmark_model =
      Speech2LandmarkModel::load(request.landmark_checkpoint);
  const BlinkGenerator blink_gen = BlinkGenerator::load(request.blink_checkpoint);
  auto [texture_gen, disc] = load_texture_checkpoint(request.texture_checkpoint);
  (void)disc;

  const Image identity = load_image(request.identity_image);
  const int res = texture_gen.config().resolution;
  if (identity.height != res || identity.width != res || identity.channels != 3)
    throw std::runtime_error("run_generate: identity image must be " +
                             std::to_string(res) + "x" + std::to_string(res) +
                             " RGB");
  const LandmarkSet person_neutral = load_landmarks(request.identity_landmarks);
  const LandmarkSet mean_face = load_landmarks(request.mean_face);
  const FeatureTrack track = load_feature_track(request.features);

  long n_frames = request.frames;
  if (n_frames < 0)
    n_frames = std::lround(static_cast<double>(track.num_frames()) /
                           track.audio_frame_rate * track.video_fps);
  if (n_frames < 1) throw std::runtime_error("run_generate: no frames to render");

  fs::create_directories(request.out_dir);
  GenerateResult result;
  result.frames = n_frames;
  result.frames_dir = (fs::path(request.out_dir) / "frames").string();
  result.canonical_csv = (fs::path(request.out_dir) / "canonical.csv").string();
  result.canonical_blinked_csv =
      (fs::path(request.out_dir) / "canonical_blinked.csv").string();
  result.landmarks_csv = (fs::path(request.out_dir) / "landmarks.csv").string();

  std::vector<CanonicalDisplacement> canonical =
      stage_displacements(track, landmark_model, n_frames);
  save_displacement_csv(canonical, result.canonical_csv);

  if (request.impose_blinks)
    canonical = stage_add_blinks(canonical, mean_face, blink_gen, request.seed);
  save_displacement_csv(canonical, result.canonical_blinked_csv);

  const std::vector<LandmarkSet> person_frames =
      stage_retarget(canonical, person_neutral, mean_face);
  save_landmark_sequence(person_frames, result.landmarks_csv);

  stage_texture(person_frames, identity, person_neutral, texture_gen,
                request.out_dir, request.dump_maps);

  auto meta_config_hash = [](const std::string& path) {
    return nn::load_checkpoint(path).meta.value("config_hash", "");
  };
  json provenance = {
      {"frames", n_frames},
      {"seed", request.seed},
      {"landmark_checkpoint", file_hash_hex(request.landmark_checkpoint)},
      {"blink_checkpoint", file_hash_hex(request.blink_checkpoint)},
      {"texture_checkpoint", file_hash_hex(request.texture_checkpoint)},
      {"landmark_config_hash", meta_config_hash(request.landmark_checkpoint)},
      {"blink_config_hash", meta_config_hash(request.blink_checkpoint)},
      {"texture_config_hash", meta_config_hash(request.texture_checkpoint)},
      {"identity_image", file_hash_hex(request.identity_image)},
      {"features", file_hash_hex(request.features)},
      {"blinks_imposed", request.impose_blinks},
  };
  result.provenance_json = (fs::path(request.out_dir) / "provenance.json").string();
  std::ofstream f(result.provenance_json);
  f << provenance.dump(2) << "\n";
  return result;
}

namespace {

constexpr double kInfReplacement = 99.0;  // table display for the PSNR sentinel

double finite_or(double v, double replacement) {
  return std::isfinite(v) ? v : replacement;
}

}  // namespace

CorpusEvalReport run_evaluate(const std::vector<ClipEvalInput>& clips) {
  if (clips.empty()) throw std::invalid_argument("run_evaluate: no clips");
  CorpusEvalReport report;
  double psnr_sum = 0, ssim_sum = 0, cpbd_pred_sum = 0, cpbd_truth_sum = 0,
         lmd_sum = 0;
  long total_frames = 0;
  std::vector<LandmarkSet> all_pred_lm, all_truth_lm;
  double fps = clips.front().fps;

  for (const ClipEvalInput& clip : clips) {
    const auto pred_lm = load_landmark_sequence(clip.generated_landmarks_csv);
    const auto truth_lm = load_landmark_sequence(clip.truth_landmarks_csv);
    if (static_cast<long>(pred_lm.size()) != clip.frame_count ||
        static_cast<long>(truth_lm.size()) != clip.frame_count)
      throw std::runtime_error("run_evaluate: clip " + clip.clip_id +
                               " landmark stream length mismatch");
    EvalReport r;
    r.frames = clip.frame_count;
    r.lmd_source = clip.lmd_source;
    double clip_psnr = 0, clip_ssim = 0, clip_cpbd_p = 0, clip_cpbd_t = 0;
    for (long t = 0; t < clip.frame_count; ++t) {
      const Image pred = load_image(frame_path(clip.generated_frames_dir, t));
      const Image truth = load_image(frame_path(clip.truth_frames_dir, t));
      clip_psnr += finite_or(psnr(pred, truth), kInfReplacement);
      clip_ssim += ssim(pred, truth);
      clip_cpbd_p += cpbd(pred);
      clip_cpbd_t += cpbd(truth);
    }
    r.psnr = clip_psnr / static_cast<double>(clip.frame_count);
    r.ssim = clip_ssim / static_cast<double>(clip.frame_count);
    r.cpbd_pred = clip_cpbd_p / static_cast<double>(clip.frame_count);
    r.cpbd_truth = clip_cpbd_t / static_cast<double>(clip.frame_count);
    r.lmd = lmd(pred_lm, truth_lm);

    psnr_sum += r.psnr * static_cast<double>(r.frames);
    ssim_sum += r.ssim * static_cast<double>(r.frames);
    cpbd_pred_sum += r.cpbd_pred * static_cast<double>(r.frames);
    cpbd_truth_sum += r.cpbd_truth * static_cast<double>(r.frames);
    lmd_sum += r.lmd * static_cast<double>(r.frames);
    total_frames += r.frames;
    all_pred_lm.insert(all_pred_lm.end(), pred_lm.begin(), pred_lm.end());
    all_truth_lm.insert(all_truth_lm.end(), truth_lm.begin(), truth_lm.end());
    report.per_clip.emplace_back(clip.clip_id, r);
  }

  report.aggregate.frames = total_frames;
  report.aggregate.psnr = psnr_sum / static_cast<double>(total_frames);
  report.aggregate.ssim = ssim_sum / static_cast<double>(total_frames);
  report.aggregate.cpbd_pred = cpbd_pred_sum / static_cast<double>(total_frames);
  report.aggregate.cpbd_truth = cpbd_truth_sum / static_cast<double>(total_frames);
  report.aggregate.lmd = lmd_sum / static_cast<double>(total_frames);
  report.aggregate.lmd_source = clips.front().lmd_source;

  report.blink = compare_blink_stats(detect_blinks(all_truth_lm, fps),
                                     detect_blinks(all_pred_lm, fps));

  std::ostringstream table;
  table.precision(4);
  table << "clip        PSNR     SSIM     CPBD     LMD\n";
  for (const auto& [id, r] : report.per_clip)
    table << id << "   " << r.psnr << "   " << r.ssim << "   " << r.cpbd_pred
          << "   " << r.lmd << "\n";
  table << "all         " << report.aggregate.psnr << "   "
        << report.aggregate.ssim << "   " << report.aggregate.cpbd_pred << "   "
        << report.aggregate.lmd << "\n";
  table << "(LMD computed from the " << report.aggregate.lmd_source
        << " path; ground-truth CPBD " << report.aggregate.cpbd_truth << ")\n";
  report.table = table.str();
  return report;
}

void write_eval_report(const CorpusEvalReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream f((fs::path(out_dir) / "report.txt").string());
    f << report.table << "\n" << format_blink_comparison(report.blink);
  }
  json doc;
  doc["aggregate"] = {{"psnr", report.aggregate.psnr},
                      {"ssim", report.aggregate.ssim},
                      {"cpbd", report.aggregate.cpbd_pred},
                      {"cpbd_truth", report.aggregate.cpbd_truth},
                      {"lmd", report.aggregate.lmd},
                      {"lmd_source", report.aggregate.lmd_source},
                      {"frames", report.aggregate.frames}};
  doc["clips"] = json::array();
  for (const auto& [id, r] : report.per_clip)
    doc["clips"].push_back({{"clip_id", id},
                            {"psnr", r.psnr},
                            {"ssim", r.ssim},
                            {"cpbd", r.cpbd_pred},
                            {"lmd", r.lmd},
                            {"frames", r.frames}});
  doc["blink"] = {{"real_rate", report.blink.real.blink_rate},
                  {"generated_rate", report.blink.generated.blink_rate},
                  {"real_duration", report.blink.real.mean_blink_duration},
                  {"generated_duration", report.blink.generated.mean_blink_duration},
                  {"generated_in_human_range", report.blink.generated_in_human_range}};
  std::ofstream f((fs::path(out_dir) / "report.json").string());
  f << doc.dump(2) << "\n";
}

}  // namespace tfg
