#include "tfg/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace tfg {

void LandmarkSet::validate(const char* where) const {
  if (!all_finite())
    throw std::invalid_argument(std::string(where) + ": non-finite landmark");
}

LandmarkSet RigidTransform::apply(const LandmarkSet& lm) const {
  LandmarkSet out;
  out.points = lm.points * rotation.transpose();
  out.points.rowwise() += translation.transpose();
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(rotation.transpose() * translation);
  return inv;
}

const std::array<int, kEyeRegionSize>& eye_region_indices() {
  static const std::array<int, kEyeRegionSize> idx = [] {
    std::array<int, kEyeRegionSize> a{};
    int k = 0;
    for (int i = lm_group::kBrowBegin; i < lm_group::kBrowEnd; ++i) a[k++] = i;
    for (int i = lm_group::kEyeBegin; i < lm_group::kEyeEnd; ++i) a[k++] = i;
    return a;
  }();
  return idx;
}

RigidTransform procrustes_align(const LandmarkSet& source,
                                const LandmarkSet& reference) {
  source.validate("procrustes_align(source)");
  reference.validate("procrustes_align(reference)");

  const Eigen::RowVector2d src_mean = source.points.colwise().mean();
  const Eigen::RowVector2d ref_mean = reference.points.colwise().mean();
  const LandmarkMatrix src_c = source.points.rowwise() - src_mean;
  const LandmarkMatrix ref_c = reference.points.rowwise() - ref_mean;

  if (src_c.norm() < 1e-9 || ref_c.norm() < 1e-9)
    throw std::invalid_argument("procrustes_align: degenerate landmarks (zero spread)");

  // Kabsch: maximize tr(R * src_c^T ref_c).
  const Eigen::Matrix2d cross = src_c.transpose() * ref_c;
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(cross,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(1, 1) = -1;

  RigidTransform rt;
  rt.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  rt.translation = ref_mean.transpose() - rt.rotation * src_mean.transpose();
  return rt;
}

ScaleFactor compute_scale(const LandmarkSet& person_neutral,
                          const LandmarkSet& mean_neutral) {
  person_neutral.validate("compute_scale(person)");
  mean_neutral.validate("compute_scale(mean)");
  auto extent = [](const LandmarkSet& lm) {
    Eigen::RowVector2d lo = lm.points.colwise().minCoeff();
    Eigen::RowVector2d hi = lm.points.colwise().maxCoeff();
    return Eigen::RowVector2d(hi - lo);
  };
  const Eigen::RowVector2d p = extent(person_neutral);
  const Eigen::RowVector2d m = extent(mean_neutral);
  if (p.x() <= 0 || p.y() <= 0 || m.x() <= 0 || m.y() <= 0)
    throw std::invalid_argument("compute_scale: zero-extent bounding box");
  return ScaleFactor{p.x() / m.x(), p.y() / m.y()};
}

LandmarkSet retarget(const CanonicalDisplacement& delta, const ScaleFactor& scale,
                     const LandmarkSet& person_neutral,
                     const LandmarkSet& mean_neutral) {
  if (!delta.all_finite())
    throw std::invalid_argument("retarget: non-finite displacement");
  if (scale.sx <= 0 || scale.sy <= 0)
    throw std::invalid_argument("retarget: non-positive scale");
  const RigidTransform mean_to_person = procrustes_align(mean_neutral, person_neutral);
  LandmarkSet displaced;
  displaced.points = mean_neutral.points;
  displaced.points.col(0) += delta.deltas.col(0) * scale.sx;
  displaced.points.col(1) += delta.deltas.col(1) * scale.sy;
  return mean_to_person.apply(displaced);
}

std::vector<CanonicalDisplacement> extract_canonical(
    const std::vector<LandmarkSet>& person_seq, const LandmarkSet& person_neutral,
    const LandmarkSet& mean_neutral) {
  const RigidTransform person_to_mean = procrustes_align(person_neutral, mean_neutral);
  const ScaleFactor scale = compute_scale(person_neutral, mean_neutral);
  const LandmarkSet neutral_aligned = person_to_mean.apply(person_neutral);

  std::vector<CanonicalDisplacement> out;
  out.reserve(person_seq.size());
  for (const LandmarkSet& frame : person_seq) {
    frame.validate("extract_canonical(frame)");
    const LandmarkSet aligned = person_to_mean.apply(frame);
    CanonicalDisplacement d;
    d.deltas = aligned.points - neutral_aligned.points;
    d.deltas.col(0) /= scale.sx;
    d.deltas.col(1) /= scale.sy;
    out.push_back(d);
  }
  return out;
}

const std::vector<std::vector<int>>& landmark_chains() {
  static const std::vector<std::vector<int>> chains = [] {
    std::vector<std::vector<int>> c;
    auto open_chain = [&c](int begin, int end) {
      std::vector<int> chain;
      for (int i = begin; i < end; ++i) chain.push_back(i);
      c.push_back(chain);
    };
    auto closed_chain = [&c](int begin, int end) {
      std::vector<int> chain;
      for (int i = begin; i < end; ++i) chain.push_back(i);
      chain.push_back(begin);
      c.push_back(chain);
    };
    open_chain(0, 17);    // jaw
    open_chain(17, 22);   // right eyebrow
    open_chain(22, 27);   // left eyebrow
    open_chain(27, 31);   // nose bridge
    open_chain(31, 36);   // nose base
    closed_chain(36, 42); // right eye
    closed_chain(42, 48); // left eye
    closed_chain(48, 60); // outer lip
    closed_chain(60, 68); // inner lip
    return c;
  }();
  return chains;
}

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return a == b; }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                  const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (size_t i = n - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool point_in_convex_hull(const Eigen::Vector2d& p,
                          const std::vector<Eigen::Vector2d>& hull) {
  if (hull.size() < 3) return false;
  for (size_t i = 0; i < hull.size(); ++i) {
    const Eigen::Vector2d& a = hull[i];
    const Eigen::Vector2d& b = hull[(i + 1) % hull.size()];
    if ((b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x()) < 0)
      return false;
  }
  return true;
}

namespace {

double dist_point_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                          const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

double distance_to_convex_hull(const Eigen::Vector2d& p,
                               const std::vector<Eigen::Vector2d>& hull) {
  if (hull.empty()) return std::numeric_limits<double>::max();
  if (point_in_convex_hull(p, hull)) return 0.0;
  if (hull.size() == 1) return (p - hull[0]).norm();
  double best = std::numeric_limits<double>::max();
  for (size_t i = 0; i < hull.size(); ++i)
    best = std::min(best, dist_point_segment(p, hull[i], hull[(i + 1) % hull.size()]));
  return best;
}

namespace {

void draw_line(Image& img, int x0, int y0, int x1, int y1) {
  // Classic octant Bresenham, integer endpoints, no anti-aliasing.
  auto plot = [&img](int x, int y) {
    if (y >= 0 && y < img.height && x >= 0 && x < img.width) img.at(y, x) = 1.0;
  };
  const int dx = std::abs(x1 - x0), dy = std::abs(y1 - y0);
  const int sx = x0 <= x1 ? 1 : -1, sy = y0 <= y1 ? 1 : -1;
  if (dx >= dy) {
    int err = dx / 2, y = y0;
    for (int x = x0;; x += sx) {
      plot(x, y);
      if (x == x1) break;
      err -= dy;
      if (err < 0) {
        y += sy;
        err += dx;
      }
    }
  } else {
    int err = dy / 2, x = x0;
    for (int y = y0;; y += sy) {
      plot(x, y);
      if (y == y1) break;
      err -= dx;
      if (err < 0) {
        x += sx;
        err += dy;
      }
    }
  }
}

}  // namespace

Image render_landmark_image(const LandmarkSet& lm, int height, int width) {
  lm.validate("render_landmark_image");
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("render_landmark_image: non-positive size");
  Image img(height, width, 1);
  for (const auto& chain : landmark_chains()) {
    for (size_t i = 0; i + 1 < chain.size(); ++i) {
      const Eigen::Vector2d a = lm.point(chain[i]);
      const Eigen::Vector2d b = lm.point(chain[i + 1]);
      draw_line(img, static_cast<int>(std::lround(a.x())),
                static_cast<int>(std::lround(a.y())),
                static_cast<int>(std::lround(b.x())),
                static_cast<int>(std::lround(b.y())));
    }
  }
  return img;
}

void save_landmark_sequence(const std::vector<LandmarkSet>& seq,
                            const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_landmark_sequence: cannot open " + path);
  f.precision(17);
  for (const LandmarkSet& lm : seq) {
    for (int i = 0; i < kNumLandmarks; ++i) {
      if (i) f << ",";
      f << lm.points(i, 0) << "," << lm.points(i, 1);
    }
    f << "\n";
  }
}

std::vector<LandmarkSet> load_landmark_sequence(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_landmark_sequence: cannot open " + path);
  std::vector<LandmarkSet> seq;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    LandmarkSet lm;
    std::string cell;
    for (int i = 0; i < kNumLandmarks * 2; ++i) {
      if (!std::getline(ss, cell, ','))
        throw std::runtime_error("load_landmark_sequence: short row in " + path);
      lm.points(i / 2, i % 2) = std::stod(cell);
    }
    lm.validate("load_landmark_sequence");
    seq.push_back(lm);
  }
  return seq;
}

void save_landmarks(const LandmarkSet& lm, const std::string& path) {
  save_landmark_sequence({lm}, path);
}

LandmarkSet load_landmarks(const std::string& path) {
  auto seq = load_landmark_sequence(path);
  if (seq.size() != 1)
    throw std::runtime_error("load_landmarks: expected exactly one row in " + path);
  return seq[0];
}

}  // namespace tfg
