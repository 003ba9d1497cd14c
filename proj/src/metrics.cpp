#include "napa/metrics.hpp"

#include "napa/error.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace napa {

namespace {

Eigen::Matrix3Xd as_matrix(const Pose3D& p) {
  Eigen::Matrix3Xd m(3, p.size());
  for (std::size_t j = 0; j < p.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = p.coords[j];
  return m;
}

}  // namespace

SimilarityTransform procrustes_fit(const Pose3D& pred, const Pose3D& gt, bool with_scale) {
  if (pred.size() != gt.size()) throw ConfigError("procrustes: joint count mismatch");
  const Eigen::Matrix3Xd x = as_matrix(pred);
  const Eigen::Matrix3Xd y = as_matrix(gt);
  const Vec3 mx = x.rowwise().mean();
  const Vec3 my = y.rowwise().mean();
  const Eigen::Matrix3Xd xc = x.colwise() - mx;
  const Eigen::Matrix3Xd yc = y.colwise() - my;

  const Eigen::JacobiSVD<Eigen::Matrix3d> spread(xc * xc.transpose());
  const Vec3 sv = spread.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw DegenerateError("procrustes: prediction joints are coincident or collinear");
  }

  // Umeyama: maximise tr(R^T Y X^T) subject to det(R) = +1.
  const Eigen::Matrix3d cov = yc * xc.transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  SimilarityTransform t;
  t.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  if (with_scale) {
    const double var_x = xc.squaredNorm();
    t.scale = (svd.singularValues().asDiagonal() * d).trace() / var_x;
  }
  t.translation = my - t.scale * (t.rotation * mx);
  return t;
}

Pose3D procrustes_align(const Pose3D& pred, const Pose3D& gt, bool with_scale) {
  const SimilarityTransform t = procrustes_fit(pred, gt, with_scale);
  Pose3D out(pred.size());
  for (std::size_t j = 0; j < pred.size(); ++j) out.coords[j] = t.apply(pred.coords[j]);
  return out;
}

std::vector<double> joint_errors(const Pose3D& pred, const Pose3D& gt) {
  if (pred.size() != gt.size()) throw ConfigError("mpjpe: joint count mismatch");
  std::vector<double> e(pred.size());
  for (std::size_t j = 0; j < pred.size(); ++j) e[j] = (pred.coords[j] - gt.coords[j]).norm();
  return e;
}

double mpjpe(const Pose3D& pred, const Pose3D& gt, bool align, bool with_scale) {
  const std::vector<double> e =
      joint_errors(align ? procrustes_align(pred, gt, with_scale) : pred, gt);
  if (e.empty()) return 0.0;
  double sum = 0.0;
  for (double v : e) sum += v;
  return sum / static_cast<double>(e.size());
}

JointGroup joint_group(const std::string& n) {
  auto has = [&](const char* s) { return n.find(s) != std::string::npos; };
  if (has("ankle")) return JointGroup::ankle;
  if (has("knee")) return JointGroup::knee;
  if (has("wrist")) return JointGroup::wrist;
  if (has("elbow")) return JointGroup::elbow;
  if (has("shoulder") || n == "thorax") return JointGroup::shoulder;
  if (has("head") || n == "neck") return JointGroup::head;
  return JointGroup::hip;
}

double GroupScore::percent() const {
  if (counted == 0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * static_cast<double>(correct) / static_cast<double>(counted);
}

PckhResult pckh(const Pose2D& pred, const Pose2D& gt, double head_size, double threshold_ratio,
                const KinematicChain& chain) {
  if (!(head_size > 0.0)) throw ConfigError("pckh: head size must be positive");
  if (pred.size() != gt.size() || gt.size() != chain.num_joints()) {
    throw ConfigError("pckh: joint count mismatch");
  }
  const double threshold = threshold_ratio * head_size;
  PckhResult r;
  r.distances.assign(gt.size(), std::numeric_limits<double>::quiet_NaN());
  r.correct.assign(gt.size(), false);
  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (!gt.visible[j]) continue;
    const double dist = (pred.coords[j] - gt.coords[j]).norm();
    const bool ok = dist <= threshold;
    r.distances[j] = dist;
    r.correct[j] = ok;
    GroupScore& g = r.groups[static_cast<std::size_t>(joint_group(chain.name(static_cast<int>(j))))];
    ++g.counted;
    ++r.total.counted;
    if (ok) {
      ++g.correct;
      ++r.total.correct;
    }
  }
  return r;
}

void accumulate(PckhResult& into, const PckhResult& sample) {
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    into.groups[g].correct += sample.groups[g].correct;
    into.groups[g].counted += sample.groups[g].counted;
  }
  into.total.correct += sample.total.correct;
  into.total.counted += sample.total.counted;
  into.distances.insert(into.distances.end(), sample.distances.begin(), sample.distances.end());
  into.correct.insert(into.correct.end(), sample.correct.begin(), sample.correct.end());
}

double head_size_from_box(const std::array<double, 4>& box) { return std::hypot(box[2], box[3]); }

}  // namespace napa
