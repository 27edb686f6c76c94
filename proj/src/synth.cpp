#include "tfg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "tfg/audio.hpp"

namespace fs = std::filesystem;

namespace tfg::synth {

LandmarkSet template_face() {
  LandmarkSet lm;
  auto set = [&lm](int i, double x, double y) { lm.points.row(i) << x, y; };
  // Jaw: half-ellipse from left temple over the chin to the right temple.
  for (int i = 0; i <= 16; ++i) {
    const double theta = M_PI - i * M_PI / 16.0;
    set(i, 64.0 + 40.0 * std::cos(theta), 40.0 + 68.0 * std::sin(theta));
  }
  const double brow_arch[5] = {0, 2, 3, 2, 0};
  for (int i = 0; i < 5; ++i) set(17 + i, 32.0 + 6.0 * i, 38.0 - brow_arch[i]);
  for (int i = 0; i < 5; ++i) set(22 + i, 72.0 + 6.0 * i, 38.0 - brow_arch[i]);
  // Nose bridge and base.
  for (int i = 0; i < 4; ++i) set(27 + i, 64.0, 46.0 + 6.0 * i);
  const double base_x[5] = {56, 60, 64, 68, 72};
  const double base_y[5] = {70, 71, 72, 71, 70};
  for (int i = 0; i < 5; ++i) set(31 + i, base_x[i], base_y[i]);
  // Eyes: open EAR = (6+6)/(2*16) = 0.375.
  set(36, 40, 48); set(37, 45, 45); set(38, 51, 45);
  set(39, 56, 48); set(40, 51, 51); set(41, 45, 51);
  set(42, 72, 48); set(43, 77, 45); set(44, 83, 45);
  set(45, 88, 48); set(46, 83, 51); set(47, 77, 51);
  // Mouth, nearly closed (2 px inner gap).
  set(48, 48, 86); set(49, 54, 83); set(50, 60, 81); set(51, 64, 81);
  set(52, 68, 81); set(53, 74, 83); set(54, 80, 86); set(55, 74, 90);
  set(56, 68, 92); set(57, 64, 93); set(58, 60, 92); set(59, 54, 90);
  set(60, 52, 86); set(61, 60, 85); set(62, 64, 85); set(63, 68, 85);
  set(64, 76, 86); set(65, 68, 87); set(66, 64, 87); set(67, 60, 87);
  return lm;
}

LandmarkSet open_mouth(const LandmarkSet& base, double amount) {
  if (amount < 0.0 || amount > 1.0)
    throw std::invalid_argument("open_mouth: amount must be in [0,1]");
  LandmarkSet lm = base;
  // Face extent controls how far the jaw travels for scaled faces.
  const double h = (base.points.col(1).maxCoeff() - base.points.col(1).minCoeff()) / 88.0;
  const double a = amount * h;
  const double chin[5] = {4, 7, 8, 7, 4};
  for (int i = 0; i < 5; ++i) lm.points(6 + i, 1) += chin[i] * a;
  const double outer_low[5] = {10, 12, 13, 12, 10};
  for (int i = 0; i < 5; ++i) lm.points(55 + i, 1) += outer_low[i] * a;
  const double inner_low[3] = {11, 12, 11};
  for (int i = 0; i < 3; ++i) lm.points(65 + i, 1) += inner_low[i] * a;
  for (int i : {48, 54, 60, 64}) lm.points(i, 1) += 3.0 * a;
  for (int i = 49; i <= 53; ++i) lm.points(i, 1) -= 1.0 * a;
  for (int i = 61; i <= 63; ++i) lm.points(i, 1) -= 1.0 * a;
  return lm;
}

std::vector<double> smooth_motion_profile(long frames, double fps,
                                          std::mt19937_64& rng, double max_amount) {
  if (frames < 1) throw std::invalid_argument("smooth_motion_profile: empty");
  std::uniform_real_distribution<double> freq(0.4, 2.2), phase(0.0, 2.0 * M_PI),
      amp(0.5, 1.0);
  struct Wave { double f, p, a; };
  std::vector<Wave> waves;
  for (int k = 0; k < 3; ++k) waves.push_back({freq(rng), phase(rng), amp(rng)});
  std::vector<double> out(static_cast<size_t>(frames));
  for (long t = 0; t < frames; ++t) {
    double v = 0.0;
    for (const Wave& w : waves)
      v += w.a * std::sin(2.0 * M_PI * w.f * static_cast<double>(t) / fps + w.p);
    out[static_cast<size_t>(t)] = v;
  }
  const auto [lo_it, hi_it] = std::minmax_element(out.begin(), out.end());
  const double lo = *lo_it, span = *hi_it - *lo_it;
  for (double& v : out) v = span > 1e-12 ? (v - lo) / span * max_amount : 0.0;
  return out;
}

namespace {

int eye_region_col(int landmark) {
  const auto& idx = eye_region_indices();
  for (int k = 0; k < kEyeRegionSize; ++k)
    if (idx[static_cast<size_t>(k)] == landmark) return k;
  throw std::logic_error("eye_region_col: not an eye-region landmark");
}

// Full-closure displacement of the eyelid landmarks: the lids meet midway.
void closure_displacement(const LandmarkSet& base, double fraction,
                          Eigen::RowVectorXd& row) {
  auto lid = [&](int top1, int top2, int bot1, int bot2) {
    const double mid =
        0.25 * (base.points(top1, 1) + base.points(top2, 1) +
                base.points(bot1, 1) + base.points(bot2, 1));
    for (int i : {top1, top2, bot1, bot2}) {
      const int col = eye_region_col(i);
      row(2 * col + 1) += fraction * (mid - base.points(i, 1));
    }
  };
  lid(37, 38, 41, 40);
  lid(43, 44, 47, 46);
  // Brows dip slightly with the blink.
  for (int i = lm_group::kBrowBegin; i < lm_group::kBrowEnd; ++i)
    row(2 * eye_region_col(i) + 1) += 1.5 * fraction;
}

}  // namespace

BlinkSequence blink_track(const LandmarkSet& base, long frames,
                          const std::vector<long>& pulse_starts, long pulse_width,
                          double closure) {
  if (frames < 1) throw std::invalid_argument("blink_track: frames must be >= 1");
  if (pulse_width < 1) throw std::invalid_argument("blink_track: bad pulse width");
  BlinkSequence seq;
  seq.deltas = Eigen::MatrixXd::Zero(frames, kEyeDisplacementDim);
  for (long start : pulse_starts)
    for (long k = 0; k < pulse_width; ++k) {
      const long t = start + k;
      if (t < 0 || t >= frames) continue;
      const double tri =
          pulse_width == 1
              ? 1.0
              : 1.0 - std::abs(2.0 * static_cast<double>(k) /
                                   static_cast<double>(pulse_width - 1) -
                               1.0);
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(kEyeDisplacementDim);
      closure_displacement(base, closure * tri, row);
      seq.deltas.row(t) += row;
    }
  return seq;
}

long calibrate_pulse_width(const LandmarkSet& base, long target_below,
                           double closure, const BlinkDetectorConfig& det) {
  long best_width = target_below;
  long best_err = std::numeric_limits<long>::max();
  for (long width = std::max(2L, target_below); width <= 6 * target_below + 4;
       ++width) {
    const long frames = width + 20;
    const BlinkSequence seq = blink_track(base, frames, {10}, width, closure);
    std::vector<LandmarkSet> seq_frames(static_cast<size_t>(frames), base);
    seq_frames = impose_blinks(seq_frames, seq);
    // Replicate the detector's hysteresis run length.
    long run = 0, current = 0;
    bool closed = false;
    for (const LandmarkSet& f : seq_frames) {
      const double ear = eye_aspect_ratio(f);
      if (!closed && ear < det.close_threshold) {
        closed = true;
        current = 1;
      } else if (closed && ear < det.reopen_threshold) {
        ++current;
      } else if (closed) {
        closed = false;
        run = std::max(run, current);
      }
    }
    if (closed) run = std::max(run, current);
    const long err = std::abs(run - target_below);
    if (err < best_err || (err == best_err && run >= target_below)) {
      best_err = err;
      best_width = width;
      if (err == 0) break;
    }
  }
  return best_width;
}

namespace {

struct Style {
  double skin[3], lip[3], iris;
  double stripe_period, stripe_angle, stripe_phase, stripe_amp;
};

Style make_style(unsigned long long identity_seed) {
  std::mt19937_64 rng(identity_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Style s{};
  s.skin[0] = 0.72 + 0.16 * u(rng);
  s.skin[1] = 0.55 + 0.15 * u(rng);
  s.skin[2] = 0.45 + 0.15 * u(rng);
  s.lip[0] = 0.55 + 0.20 * u(rng);
  s.lip[1] = 0.20 + 0.12 * u(rng);
  s.lip[2] = 0.25 + 0.13 * u(rng);
  s.iris = 0.10 + 0.20 * u(rng);
  s.stripe_period = 6.0 + 6.0 * u(rng);
  s.stripe_angle = M_PI * u(rng);
  s.stripe_phase = 2.0 * M_PI * u(rng);
  s.stripe_amp = 0.045;
  return s;
}

std::vector<Eigen::Vector2d> collect(const LandmarkSet& lm, int begin, int end) {
  std::vector<Eigen::Vector2d> pts;
  for (int i = begin; i < end; ++i) pts.push_back(lm.point(i));
  return pts;
}

void fill_hull(Image& img, const std::vector<Eigen::Vector2d>& hull,
               const double rgb[3]) {
  if (hull.size() < 3) return;
  double x0 = img.width, x1 = 0, y0 = img.height, y1 = 0;
  for (const auto& p : hull) {
    x0 = std::min(x0, p.x()); x1 = std::max(x1, p.x());
    y0 = std::min(y0, p.y()); y1 = std::max(y1, p.y());
  }
  for (int y = std::max(0, static_cast<int>(y0)); y <= std::min(img.height - 1, static_cast<int>(y1) + 1); ++y)
    for (int x = std::max(0, static_cast<int>(x0)); x <= std::min(img.width - 1, static_cast<int>(x1) + 1); ++x)
      if (point_in_convex_hull(Eigen::Vector2d(x, y), hull))
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = rgb[c];
}

void draw_thick_segment(Image& img, const Eigen::Vector2d& a,
                        const Eigen::Vector2d& b, double radius,
                        const double rgb[3]) {
  const int x0 = std::max(0, static_cast<int>(std::min(a.x(), b.x()) - radius - 1));
  const int x1 = std::min(img.width - 1,
                          static_cast<int>(std::max(a.x(), b.x()) + radius + 1));
  const int y0 = std::max(0, static_cast<int>(std::min(a.y(), b.y()) - radius - 1));
  const int y1 = std::min(img.height - 1,
                          static_cast<int>(std::max(a.y(), b.y()) + radius + 1));
  const Eigen::Vector2d ab = b - a;
  const double len2 = std::max(ab.squaredNorm(), 1e-12);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const Eigen::Vector2d p(x, y);
      const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
      if ((p - (a + t * ab)).norm() <= radius)
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = rgb[c];
    }
}

void fill_disc(Image& img, const Eigen::Vector2d& center, double radius,
               const double rgb[3]) {
  for (int y = std::max(0, static_cast<int>(center.y() - radius - 1));
       y <= std::min(img.height - 1, static_cast<int>(center.y() + radius + 1)); ++y)
    for (int x = std::max(0, static_cast<int>(center.x() - radius - 1));
         x <= std::min(img.width - 1, static_cast<int>(center.x() + radius + 1)); ++x)
      if ((Eigen::Vector2d(x, y) - center).norm() <= radius)
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = rgb[c];
}

std::vector<Eigen::Vector2d> face_outline(const LandmarkSet& lm) {
  std::vector<Eigen::Vector2d> pts = collect(lm, 0, 17);
  const double face_h =
      lm.points.col(1).maxCoeff() - lm.points.col(1).minCoeff();
  for (int i = lm_group::kBrowBegin; i < lm_group::kBrowEnd; ++i)
    pts.emplace_back(lm.points(i, 0), lm.points(i, 1) - 0.25 * face_h);
  return convex_hull(pts);
}

}  // namespace

Image render_face(const LandmarkSet& lm, int size, unsigned long long identity_seed) {
  lm.validate("render_face");
  const Style style = make_style(identity_seed);
  Image img(size, size, 3);
  for (int y = 0; y < size; ++y) {
    const double t = static_cast<double>(y) / size;
    for (int x = 0; x < size; ++x) {
      img.at(y, x, 0) = 0.18 + 0.12 * t;
      img.at(y, x, 1) = 0.20 + 0.10 * t;
      img.at(y, x, 2) = 0.30 + 0.10 * t;
    }
  }
  // Skin with identity-specific fine stripes.
  const auto face = face_outline(lm);
  const double cosa = std::cos(style.stripe_angle), sina = std::sin(style.stripe_angle);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (point_in_convex_hull(Eigen::Vector2d(x, y), face)) {
        const double stripe =
            style.stripe_amp *
            std::sin(2.0 * M_PI / style.stripe_period * (x * cosa + y * sina) +
                     style.stripe_phase);
        for (int c = 0; c < 3; ++c)
          img.at(y, x, c) = std::clamp(style.skin[c] + stripe, 0.0, 1.0);
      }
  const double brow_rgb[3] = {0.25, 0.18, 0.12};
  for (int i = 17; i < 21; ++i)
    draw_thick_segment(img, lm.point(i), lm.point(i + 1), 1.4, brow_rgb);
  for (int i = 22; i < 26; ++i)
    draw_thick_segment(img, lm.point(i), lm.point(i + 1), 1.4, brow_rgb);
  const double nose_rgb[3] = {style.skin[0] * 0.82, style.skin[1] * 0.82,
                              style.skin[2] * 0.82};
  for (int i = 27; i < 30; ++i)
    draw_thick_segment(img, lm.point(i), lm.point(i + 1), 1.0, nose_rgb);
  for (int i = 31; i < 35; ++i)
    draw_thick_segment(img, lm.point(i), lm.point(i + 1), 1.0, nose_rgb);
  // Eyes: white, iris, pupil, lid outline.
  const double white_rgb[3] = {0.95, 0.95, 0.93};
  const double iris_rgb[3] = {style.iris, style.iris, style.iris + 0.08};
  const double pupil_rgb[3] = {0.05, 0.05, 0.05};
  const double lid_rgb[3] = {0.30, 0.22, 0.18};
  for (int base : {36, 42}) {
    const auto hull = convex_hull(collect(lm, base, base + 6));
    fill_hull(img, hull, white_rgb);
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    for (int i = base; i < base + 6; ++i) center += lm.point(i);
    center /= 6.0;
    const double eye_w = (lm.point(base) - lm.point(base + 3)).norm();
    const double lid_gap = 0.5 * ((lm.point(base + 1) - lm.point(base + 5)).norm() +
                                  (lm.point(base + 2) - lm.point(base + 4)).norm());
    // Iris shows only as far as the lids are open.
    const double iris_r = std::min(0.22 * eye_w, 0.5 * lid_gap);
    if (iris_r > 0.3) {
      fill_disc(img, center, iris_r, iris_rgb);
      fill_disc(img, center, 0.45 * iris_r, pupil_rgb);
    }
    for (int i = 0; i < 6; ++i)
      draw_thick_segment(img, lm.point(base + i), lm.point(base + (i + 1) % 6), 0.7,
                         lid_rgb);
  }
  // Lips and mouth interior.
  fill_hull(img, convex_hull(collect(lm, 48, 60)), style.lip);
  const auto inner = convex_hull(collect(lm, 60, 68));
  const double interior_rgb[3] = {0.08, 0.05, 0.06};
  fill_hull(img, inner, interior_rgb);
  if (inner.size() >= 3) {
    double y_min = size, y_max = 0;
    for (const auto& p : inner) {
      y_min = std::min(y_min, p.y());
      y_max = std::max(y_max, p.y());
    }
    if (y_max - y_min > 2.5) {
      const double teeth_rgb[3] = {0.92, 0.92, 0.88};
      const double y_cut = y_min + 0.35 * (y_max - y_min);
      for (int y = std::max(0, static_cast<int>(y_min));
           y <= std::min(size - 1, static_cast<int>(y_cut)); ++y)
        for (int x = 0; x < size; ++x)
          if (point_in_convex_hull(Eigen::Vector2d(x, y), inner))
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = teeth_rgb[c];
    }
  }
  return img;
}

SegmentationMask render_segmentation(const LandmarkSet& lm, int size) {
  SegmentationMask mask(size, size);
  auto fill_class = [&mask, size](const std::vector<Eigen::Vector2d>& hull,
                                  SegClass cls) {
    if (hull.size() < 3) return;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        if (point_in_convex_hull(Eigen::Vector2d(x, y), hull))
          mask.at(y, x) = static_cast<uint8_t>(cls);
  };
  fill_class(face_outline(lm), SegClass::kSkin);
  std::vector<Eigen::Vector2d> nose = collect(lm, 27, 36);
  fill_class(convex_hull(nose), SegClass::kNose);
  fill_class(convex_hull(collect(lm, 36, 42)), SegClass::kEyes);
  fill_class(convex_hull(collect(lm, 42, 48)), SegClass::kEyes);
  // Upper lip: outer top chain plus inner top chain; lower lip mirrored.
  std::vector<Eigen::Vector2d> upper, lower;
  for (int i = 48; i <= 54; ++i) upper.push_back(lm.point(i));
  for (int i : {60, 61, 62, 63, 64}) upper.push_back(lm.point(i));
  for (int i : {48, 54, 55, 56, 57, 58, 59}) lower.push_back(lm.point(i));
  for (int i : {60, 64, 65, 66, 67}) lower.push_back(lm.point(i));
  fill_class(convex_hull(upper), SegClass::kUpperLip);
  fill_class(convex_hull(lower), SegClass::kLowerLip);
  fill_class(convex_hull(collect(lm, 60, 68)), SegClass::kMouthInterior);
  return mask;
}

FeatureTrack features_from_motion(const std::vector<double>& amounts, double fps,
                                  double audio_rate) {
  if (amounts.empty())
    throw std::invalid_argument("features_from_motion: empty motion");
  Eigen::VectorXd closed(kAudioFeatureDim), open(kAudioFeatureDim);
  for (int k = 0; k < kAudioFeatureDim; ++k) {
    closed(k) = 1.5 * std::sin(0.7 * k + 0.3);
    open(k) = 1.5 * std::cos(0.9 * k + 1.1);
  }
  const long frames = static_cast<long>(amounts.size());
  const long n_audio =
      static_cast<long>(std::ceil(static_cast<double>(frames) / fps * audio_rate)) +
      kAudioWindowFrames;
  FeatureTrack track;
  track.audio_frame_rate = audio_rate;
  track.video_fps = fps;
  track.frames.resize(n_audio, kAudioFeatureDim);
  for (long j = 0; j < n_audio; ++j) {
    const double video_pos = static_cast<double>(j) / audio_rate * fps;
    const long i0 = std::clamp(static_cast<long>(video_pos), 0L, frames - 1);
    const long i1 = std::min(i0 + 1, frames - 1);
    const double frac = std::clamp(video_pos - static_cast<double>(i0), 0.0, 1.0);
    const double a = (1.0 - frac) * amounts[static_cast<size_t>(i0)] +
                     frac * amounts[static_cast<size_t>(i1)];
    track.frames.row(j) = ((1.0 - a) * closed + a * open).transpose();
  }
  return track;
}

std::vector<ClipManifest> write_corpus(const std::string& root,
                                       const CorpusOptions& options) {
  const fs::path rootp(root);
  fs::create_directories(rootp / "frames");
  fs::create_directories(rootp / "landmarks");
  fs::create_directories(rootp / "features");
  if (options.segmentation) fs::create_directories(rootp / "seg");

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double sc = static_cast<double>(options.frame_size) / 128.0;
  std::vector<ClipManifest> manifest;

  for (int s = 0; s < options.subjects; ++s) {
    const unsigned long long identity_seed = options.seed * 1000 + s;
    // Subject shape: small deterministic tweaks of the template.
    LandmarkSet shape = template_face();
    if (options.shape_jitter) {
      const double brow_dy = -2.0 + 4.0 * u(rng);
      for (int i = lm_group::kBrowBegin; i < lm_group::kBrowEnd; ++i)
        shape.points(i, 1) += brow_dy;
      const double mouth_w = 0.94 + 0.12 * u(rng);
      for (int i = lm_group::kMouthBegin; i < lm_group::kMouthEnd; ++i)
        shape.points(i, 0) = 64.0 + (shape.points(i, 0) - 64.0) * mouth_w;
    }
    // Subject placement: scale, slight rotation, shift; all in frame pixels.
    const bool move_only = options.translation_only_placement;
    const double scale = move_only ? sc : (0.85 + 0.25 * u(rng)) * sc;
    const double aniso = move_only ? 1.0 : 0.95 + 0.10 * u(rng);
    const double theta = move_only ? 0.0 : -0.05 + 0.10 * u(rng);
    const double shift_x = (-5.0 + 10.0 * u(rng)) * sc;
    const double shift_y = (-5.0 + 10.0 * u(rng)) * sc;
    auto place = [&](const LandmarkSet& in) {
      LandmarkSet out = in;
      for (int i = 0; i < kNumLandmarks; ++i) {
        const double x = (in.points(i, 0) - 64.0) * scale;
        const double y = (in.points(i, 1) - 64.0) * scale * aniso;
        out.points(i, 0) = 64.0 * sc + x * std::cos(theta) - y * std::sin(theta) + shift_x;
        out.points(i, 1) = 64.0 * sc + x * std::sin(theta) + y * std::cos(theta) + shift_y;
      }
      return out;
    };

    for (int c = 0; c < options.clips_per_subject; ++c) {
      ClipManifest m;
      m.clip_id = "s" + std::to_string(s) + "_c" + std::to_string(c);
      m.subject_id = "s" + std::to_string(s);
      m.fps = options.fps;
      m.frame_count = options.frames_per_clip;
      m.frames_dir = "frames/" + m.clip_id;
      m.landmark_file = "landmarks/" + m.clip_id + ".csv";
      m.feature_file = "features/" + m.clip_id + ".feat";
      if (options.segmentation) m.segmentation_dir = "seg/" + m.clip_id;
      fs::create_directories(rootp / m.frames_dir);
      if (options.segmentation) fs::create_directories(rootp / m.segmentation_dir);

      std::vector<double> amounts =
          smooth_motion_profile(options.frames_per_clip, options.fps, rng, 0.9);
      const LandmarkSet person_neutral = place(shape);
      // Blink schedule at the requested rate.
      const long width =
          calibrate_pulse_width(person_neutral, options.blink_frames);
      std::vector<long> starts;
      const double expected =
          static_cast<double>(options.frames_per_clip) / options.fps *
          options.blink_rate;
      const long blinks = static_cast<long>(expected + u(rng));
      for (long b = 0; b < blinks; ++b) {
        const long lo = b * options.frames_per_clip / std::max(1L, blinks);
        const long hi =
            std::max(lo, (b + 1) * options.frames_per_clip / std::max(1L, blinks) -
                             width - 2);
        starts.push_back(
            lo + static_cast<long>(u(rng) * static_cast<double>(hi - lo + 1)));
      }
      const BlinkSequence blinks_track =
          blink_track(person_neutral, options.frames_per_clip, starts, width);

      std::vector<LandmarkSet> true_frames;
      for (long t = 0; t < options.frames_per_clip; ++t)
        true_frames.push_back(place(open_mouth(shape, amounts[static_cast<size_t>(t)])));
      true_frames = impose_blinks(true_frames, blinks_track);

      std::vector<LandmarkSet> detected = true_frames;
      if (options.lip_jitter) {
        std::uniform_real_distribution<double> jitter(-1.5, 1.5);
        for (LandmarkSet& lm : detected)
          for (int i = lm_group::kMouthBegin; i < lm_group::kMouthEnd; ++i)
            lm.points(i, 1) += jitter(rng) * sc;
      }

      for (long t = 0; t < options.frames_per_clip; ++t) {
        const LandmarkSet& lm = true_frames[static_cast<size_t>(t)];
        save_image(render_face(lm, options.frame_size, identity_seed),
                   frame_path((rootp / m.frames_dir).string(), t));
        if (options.segmentation)
          save_segmentation_mask(
              render_segmentation(lm, options.frame_size),
              mask_path((rootp / m.segmentation_dir).string(), t));
      }
      save_landmark_sequence(detected, (rootp / m.landmark_file).string());
      save_feature_track(features_from_motion(amounts, options.fps, options.audio_rate),
                         (rootp / m.feature_file).string());
      manifest.push_back(std::move(m));
    }
  }
  save_corpus_manifest(manifest, (rootp / "manifest.json").string());
  return manifest;
}

}  // namespace tfg::synth
