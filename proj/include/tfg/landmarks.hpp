#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "tfg/image.hpp"

namespace tfg {

inline constexpr int kNumLandmarks = 68;

// Semantic landmark groups (iBUG-68 indexing).
namespace lm_group {
inline constexpr int kJawBegin = 0, kJawEnd = 17;
inline constexpr int kBrowBegin = 17, kBrowEnd = 27;
inline constexpr int kNoseBegin = 27, kNoseEnd = 36;
inline constexpr int kEyeBegin = 36, kEyeEnd = 48;
inline constexpr int kMouthBegin = 48, kMouthEnd = 68;
inline constexpr int kNoseTip = 30;
}  // namespace lm_group

using LandmarkMatrix = Eigen::Matrix<double, kNumLandmarks, 2>;

// 68 2-D facial landmark points in image pixel coordinates.
struct LandmarkSet {
  LandmarkMatrix points = LandmarkMatrix::Zero();

  Eigen::Vector2d point(int i) const { return points.row(i).transpose(); }
  void set_point(int i, const Eigen::Vector2d& p) { points.row(i) = p.transpose(); }
  bool all_finite() const { return points.allFinite(); }
  void validate(const char* where) const;
};

// Per-frame 68x2 displacement from the neutral mean face, in mean-face pixels.
struct CanonicalDisplacement {
  LandmarkMatrix deltas = LandmarkMatrix::Zero();

  bool all_finite() const { return deltas.allFinite(); }
};

// Rotation (det +1) plus translation.
struct RigidTransform {
  Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const {
    return rotation * p + translation;
  }
  LandmarkSet apply(const LandmarkSet& lm) const;
  RigidTransform inverse() const;
};

// Per-axis ratio of person face extent to mean face extent.
struct ScaleFactor {
  double sx = 1.0;
  double sy = 1.0;
};

// The 22 eye-region landmarks: 10 eyebrow points followed by 12 eye points.
inline constexpr int kEyeRegionSize = 22;
const std::array<int, kEyeRegionSize>& eye_region_indices();

// Best rigid transform (rotation + translation, no scaling) mapping `source`
// onto `reference` in the least-squares sense. Throws std::invalid_argument
// when either set has no spatial spread.
RigidTransform procrustes_align(const LandmarkSet& source,
                                const LandmarkSet& reference);

// Axis-aligned bounding-box width/height ratios of person face to mean face.
ScaleFactor compute_scale(const LandmarkSet& person_neutral,
                          const LandmarkSet& mean_neutral);

// Transfers a canonical displacement onto a person-specific face: the scaled
// displacement is added to the mean neutral face and the result is carried
// into person coordinates by the rigid alignment of the two neutral faces.
// A zero displacement yields exactly the aligned mean face.
LandmarkSet retarget(const CanonicalDisplacement& delta, const ScaleFactor& scale,
                     const LandmarkSet& person_neutral,
                     const LandmarkSet& mean_neutral);

// Inverse of retarget: maps each frame into the mean-face frame via the rigid
// alignment of the neutral faces, takes the displacement from the aligned
// person neutral, and divides per axis by the scale factor.
std::vector<CanonicalDisplacement> extract_canonical(
    const std::vector<LandmarkSet>& person_seq, const LandmarkSet& person_neutral,
    const LandmarkSet& mean_neutral);

// Fixed polyline connectivity of the 68-point face sketch. Each chain is a
// list of landmark indices; closed chains repeat their first index at the end.
const std::vector<std::vector<int>>& landmark_chains();

// 2-D convex hull (counter-clockwise, y-down screen coordinates use the same
// orientation test throughout).
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> points);
bool point_in_convex_hull(const Eigen::Vector2d& p,
                          const std::vector<Eigen::Vector2d>& hull);
// 0 inside; otherwise distance to the hull boundary.
double distance_to_convex_hull(const Eigen::Vector2d& p,
                               const std::vector<Eigen::Vector2d>& hull);

// Deterministic 1-pixel white-on-black polyline raster (no anti-aliasing).
Image render_landmark_image(const LandmarkSet& lm, int height, int width);

// CSV persistence: one row per frame, 136 comma-separated values
// (x0,y0,x1,y1,...). The mean-face file is a single-row file.
void save_landmark_sequence(const std::vector<LandmarkSet>& seq,
                            const std::string& path);
std::vector<LandmarkSet> load_landmark_sequence(const std::string& path);
void save_landmarks(const LandmarkSet& lm, const std::string& path);
LandmarkSet load_landmarks(const std::string& path);

}  // namespace tfg
