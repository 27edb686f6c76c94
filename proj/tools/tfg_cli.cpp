#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "tfg/blink.hpp"
#include "tfg/config.hpp"
#include "tfg/data_prep.hpp"
#include "tfg/pipeline.hpp"
#include "tfg/speech2landmark.hpp"
#include "tfg/synth.hpp"
#include "tfg/texture.hpp"

namespace fs = std::filesystem;
using namespace tfg;

namespace {

PipelineConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return PipelineConfig{};
  return PipelineConfig::load(path);
}

std::vector<DatasetClip> split_clips(const std::vector<DatasetClip>& clips,
                                     const std::string& split) {
  std::vector<DatasetClip> out;
  for (const DatasetClip& c : clips)
    if (split == "all" || c.split == split) out.push_back(c);
  if (out.empty())
    throw std::invalid_argument("no clips in requested split '" + split + "'");
  return out;
}

int cmd_preprocess(const std::string& corpus, std::string manifest,
                   const std::string& out, double lip_radius,
                   double test_fraction) {
  if (manifest.empty()) manifest = (fs::path(corpus) / "manifest.json").string();
  const auto clips = load_corpus_manifest(manifest);
  BuildOptions options;
  options.lip_search_radius = lip_radius;
  options.test_fraction = test_fraction;
  const BuildResult result = build_training_sets(clips, corpus, out, options);
  std::printf("preprocessed %zu clips (mean face written to %s)\n",
              result.clips.size(), (fs::path(out) / "mean_face.csv").c_str());
  for (const std::string& reason : result.skipped)
    std::printf("skipped %s\n", reason.c_str());
  return result.clips.empty() ? 1 : 0;
}

int cmd_train_landmark(const std::string& data, const std::string& out,
                       const PipelineConfig& config) {
  auto [mean_face, clips] = load_dataset_index(data);
  (void)mean_face;
  const auto train = split_clips(clips, "train");

  std::vector<CanonicalDisplacement> all;
  std::vector<LandmarkClip> dataset;
  for (const DatasetClip& c : train) {
    LandmarkClip lc;
    lc.targets = load_displacement_csv(c.canonical_csv);
    lc.windows = window_track(load_feature_track(c.feature_file), c.frame_count);
    all.insert(all.end(), lc.targets.begin(), lc.targets.end());
    dataset.push_back(std::move(lc));
  }
  Speech2LandmarkConfig mc;
  mc.seed = config.seed;
  Speech2LandmarkModel model(pca_fit(all, config.pca_variance), mc);
  std::printf("landmark model: %ld parameters, PCA dim %ld\n",
              model.params().total_params(), model.basis().num_components());

  LandmarkTrainConfig tc;
  tc.steps = config.landmark_steps;
  tc.batch = config.batch;
  tc.lambda_lmark = config.lambda_lmark;
  tc.lambda_temp = config.lambda_temp;
  tc.adam = {config.learning_rate, config.beta1, config.beta2, 1e-8};
  tc.seed = config.seed;
  const TrainHistory history = train_speech2landmark(model, dataset, tc);
  model.save(out);
  std::printf("trained %ld steps; loss %.6f -> %.6f; saved %s\n", tc.steps,
              history.total.front(), history.total.back(), out.c_str());
  return 0;
}

int cmd_train_blink(const std::string& data, const std::string& out,
                    const PipelineConfig& config) {
  auto [mean_face, clips] = load_dataset_index(data);
  (void)mean_face;
  const auto train = split_clips(clips, "train");

  std::vector<BlinkSequence> tracks;
  long min_len = std::numeric_limits<long>::max();
  Eigen::MatrixXd samples(0, kEyeDisplacementDim);
  for (const DatasetClip& c : train) {
    BlinkSequence s;
    s.deltas = load_matrix_csv(c.eye_csv);
    min_len = std::min(min_len, s.length());
    const long old = samples.rows();
    samples.conservativeResize(old + s.deltas.rows(), kEyeDisplacementDim);
    samples.bottomRows(s.deltas.rows()) = s.deltas;
    tracks.push_back(std::move(s));
  }
  BlinkGeneratorConfig gc;
  gc.noise_dim = config.blink_noise_dim;
  gc.hidden = config.blink_hidden;
  gc.seed = config.seed;
  BlinkGenerator gen(pca_fit_matrix(samples, config.pca_variance), gc);

  BlinkTrainConfig tc;
  tc.steps = config.blink_steps;
  tc.batch = config.batch;
  tc.sequence_length = std::min(config.blink_sequence_length, min_len);
  tc.range_weight = config.blink_range_weight;
  tc.adam = {config.blink_learning_rate, config.beta1, config.beta2, 1e-8};
  tc.seed = config.seed;
  const BlinkTrainResult result = train_blink(gen, tracks, tc);
  gen.save(out);
  std::printf("trained %ld steps (T=%ld); loss %.6f -> %.6f; saved %s\n", tc.steps,
              tc.sequence_length, result.loss_history.front(),
              result.loss_history.back(), out.c_str());
  return 0;
}

std::vector<TexturePairSample> build_pair_samples(
    const std::vector<DatasetClip>& clips, int resolution, long stride) {
  std::vector<TexturePairSample> samples;
  for (const DatasetClip& c : clips) {
    const auto landmarks = load_landmark_sequence(c.landmark_csv);
    const Image identity = load_image(frame_path(c.frames_dir, c.neutral_index));
    if (identity.height != resolution || identity.width != resolution)
      throw std::invalid_argument("frames of clip " + c.clip_id +
                                  " do not match the texture resolution");
    const Image id_raster = render_landmark_image(
        landmarks[static_cast<size_t>(c.neutral_index)], resolution, resolution);
    for (long t = 0; t + 1 < c.frame_count; t += stride) {
      TexturePairSample s;
      s.identity_image = identity;
      s.identity_landmarks = id_raster;
      s.target_a = load_image(frame_path(c.frames_dir, t));
      s.target_b = load_image(frame_path(c.frames_dir, t + 1));
      s.landmarks_a = render_landmark_image(landmarks[static_cast<size_t>(t)],
                                            resolution, resolution);
      s.landmarks_b = render_landmark_image(landmarks[static_cast<size_t>(t + 1)],
                                            resolution, resolution);
      s.mask_a = build_spatial_mask(landmarks[static_cast<size_t>(t)], resolution,
                                    resolution);
      s.mask_b = build_spatial_mask(landmarks[static_cast<size_t>(t + 1)],
                                    resolution, resolution);
      samples.push_back(std::move(s));
    }
  }
  if (samples.empty()) throw std::invalid_argument("no texture training pairs");
  return samples;
}

int cmd_train_texture(const std::string& data, const std::string& out,
                      const PipelineConfig& config, long stride) {
  auto [mean_face, clips] = load_dataset_index(data);
  (void)mean_face;
  const auto samples =
      build_pair_samples(split_clips(clips, "train"), config.resolution, stride);

  TextureGeneratorConfig gc;
  gc.resolution = config.resolution;
  gc.base_channels = config.texture_base_channels;
  gc.lm_channels = config.texture_lm_channels;
  gc.residual_blocks = config.texture_residual_blocks;
  gc.seed = config.seed;
  TextureGenerator gen(gc);
  PatchDiscriminatorConfig dc;
  dc.base_channels = config.disc_base_channels;
  dc.strided_layers = config.disc_strided_layers;
  dc.seed = config.seed + 1;
  PatchDiscriminator disc(dc);
  std::printf("texture generator: %ld params, discriminator: %ld params, %zu pairs\n",
              gen.params().total_params(), disc.params().total_params(),
              samples.size());

  TextureTrainConfig tc;
  tc.steps = config.texture_steps;
  tc.batch_pairs = std::max(1L, config.batch / 2);  // two frames per pair
  tc.lambda_pix = config.lambda_pix;
  tc.lambda_adv = config.lambda_adv;
  tc.lambda_reg = config.lambda_reg;
  tc.adam = {config.learning_rate, config.beta1, config.beta2, 1e-8};
  tc.seed = config.seed;
  const TextureTrainHistory history = train_texture(gen, disc, samples, tc);
  save_texture_checkpoint(gen, disc, out);
  std::printf("trained %ld steps; G %.5f -> %.5f, pix %.5f -> %.5f; saved %s\n",
              tc.steps, history.g_total.front(), history.g_total.back(),
              history.pix.front(), history.pix.back(), out.c_str());
  return 0;
}

int cmd_generate(const GenerateRequest& request) {
  const GenerateResult result = run_generate(request);
  std::printf("wrote %ld frames to %s\n", result.frames, result.frames_dir.c_str());
  std::printf("landmark stream: %s\nprovenance: %s\n", result.landmarks_csv.c_str(),
              result.provenance_json.c_str());
  return 0;
}

int cmd_evaluate(const std::string& generated, const std::string& data,
                 const std::string& out, const std::string& split) {
  auto [mean_face, clips] = load_dataset_index(data);
  (void)mean_face;
  std::vector<ClipEvalInput> inputs;
  for (const DatasetClip& c : split_clips(clips, split)) {
    const fs::path gen_dir = fs::path(generated) / c.clip_id;
    if (!fs::exists(gen_dir)) continue;
    ClipEvalInput input;
    input.clip_id = c.clip_id;
    input.generated_frames_dir = (gen_dir / "frames").string();
    input.generated_landmarks_csv = (gen_dir / "landmarks.csv").string();
    input.truth_frames_dir = c.frames_dir;
    input.truth_landmarks_csv = c.landmark_csv;
    input.frame_count = c.frame_count;
    input.fps = c.fps;
    inputs.push_back(std::move(input));
  }
  if (inputs.empty())
    throw std::invalid_argument("no generated clips found under " + generated);
  const CorpusEvalReport report = run_evaluate(inputs);
  write_eval_report(report, out);
  std::printf("%s", report.table.c_str());
  std::printf("%s", format_blink_comparison(report.blink).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"identity-preserving talking-face pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "pipeline config JSON")
      ->envname("TFG_CONFIG");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "ingest a corpus into datasets");
  std::string corpus, manifest, prep_out;
  double lip_radius = 8.0, test_fraction = 0.2;
  prep->add_option("--corpus", corpus, "corpus root directory")->required();
  prep->add_option("--manifest", manifest, "manifest JSON (default corpus/manifest.json)");
  prep->add_option("--out", prep_out, "output dataset directory")->required();
  prep->add_option("--lip-radius", lip_radius, "lip snap search radius, px");
  prep->add_option("--test-fraction", test_fraction, "subject test fraction");

  // train subcommands share --data/--out plus config overrides
  auto* tl = app.add_subcommand("train-landmark", "train the audio-to-landmark model");
  auto* tb = app.add_subcommand("train-blink", "train the blink generator");
  auto* tt = app.add_subcommand("train-texture", "train the texture generator");
  std::string tl_data, tl_out, tb_data, tb_out, tt_data, tt_out;
  long steps_override = -1, texture_stride = 1;
  int resolution_override = -1;
  unsigned long long seed_override = 0;
  bool has_seed = false;
  for (auto* cmd : {tl, tb, tt}) {
    cmd->add_option("--steps", steps_override, "training steps override");
    cmd->add_option_function<unsigned long long>(
        "--seed", [&](unsigned long long s) { seed_override = s; has_seed = true; },
        "seed override");
  }
  tl->add_option("--data", tl_data, "dataset directory")->required();
  tl->add_option("--out", tl_out, "checkpoint path")->required();
  tb->add_option("--data", tb_data, "dataset directory")->required();
  tb->add_option("--out", tb_out, "checkpoint path")->required();
  tt->add_option("--data", tt_data, "dataset directory")->required();
  tt->add_option("--out", tt_out, "checkpoint path")->required();
  tt->add_option("--resolution", resolution_override, "texture resolution");
  tt->add_option("--pair-stride", texture_stride, "frame stride between pairs");

  // generate
  auto* gen = app.add_subcommand("generate", "run the four-stage pipeline");
  GenerateRequest request;
  gen->add_option("--identity-image", request.identity_image)->required();
  gen->add_option("--identity-landmarks", request.identity_landmarks)->required();
  gen->add_option("--features", request.features)->required();
  gen->add_option("--mean-face", request.mean_face)->required();
  gen->add_option("--landmark-ckpt", request.landmark_checkpoint)->required();
  gen->add_option("--blink-ckpt", request.blink_checkpoint)->required();
  gen->add_option("--texture-ckpt", request.texture_checkpoint)->required();
  gen->add_option("--out", request.out_dir)->required();
  gen->add_option("--frames", request.frames, "frame count (-1: from audio)");
  gen->add_option("--seed", request.seed, "blink noise seed");
  gen->add_flag("--dump-maps", request.dump_maps, "write attention/color maps");
  bool no_blinks = false;
  gen->add_flag("--no-blinks", no_blinks, "skip blink imposition");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score generated clips");
  std::string eval_generated, eval_data, eval_out, eval_split = "all";
  eval->add_option("--generated", eval_generated, "root of generated clip dirs")
      ->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--out", eval_out, "report directory")->required();
  eval->add_option("--split", eval_split, "train | test | all");

  // synth-corpus (demo/test data)
  auto* synth_cmd = app.add_subcommand("synth-corpus", "write a synthetic corpus");
  synth::CorpusOptions synth_options;
  std::string synth_out;
  synth_cmd->add_option("--out", synth_out, "corpus root")->required();
  synth_cmd->add_option("--subjects", synth_options.subjects);
  synth_cmd->add_option("--clips-per-subject", synth_options.clips_per_subject);
  synth_cmd->add_option("--frames", synth_options.frames_per_clip);
  synth_cmd->add_option("--size", synth_options.frame_size);
  synth_cmd->add_option("--fps", synth_options.fps);
  synth_cmd->add_option("--blink-rate", synth_options.blink_rate);
  synth_cmd->add_option("--seed", synth_options.seed);

  try {
    app.parse(argc, argv);

    PipelineConfig config = load_config_or_default(config_path);
    if (steps_override >= 0) {
      config.landmark_steps = steps_override;
      config.blink_steps = steps_override;
      config.texture_steps = steps_override;
    }
    if (has_seed) config.seed = seed_override;
    if (resolution_override > 0) config.resolution = resolution_override;

    if (prep->parsed())
      return cmd_preprocess(corpus, manifest, prep_out, lip_radius, test_fraction);
    if (tl->parsed()) return cmd_train_landmark(tl_data, tl_out, config);
    if (tb->parsed()) return cmd_train_blink(tb_data, tb_out, config);
    if (tt->parsed()) return cmd_train_texture(tt_data, tt_out, config, texture_stride);
    if (gen->parsed()) {
      request.impose_blinks = !no_blinks;
      return cmd_generate(request);
    }
    if (eval->parsed()) return cmd_evaluate(eval_generated, eval_data, eval_out, eval_split);
    if (synth_cmd->parsed()) {
      const auto written = synth::write_corpus(synth_out, synth_options);
      std::printf("wrote %zu synthetic clips under %s\n", written.size(),
                  synth_out.c_str());
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // validation errors exit with 2
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
