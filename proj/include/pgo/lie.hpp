#pragma once

// SE(2) and SE(3) poses with the exponential/logarithm maps, adjoints and right
// Jacobians needed for relative-pose residuals on the manifold.
//
// Tangent ordering is translation first: (x, y, theta) for SE(2) and
// (rho_x, rho_y, rho_z, phi_x, phi_y, phi_z) for SE(3). This matches the row
// order of g2o information matrices.

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

namespace pgo {

inline double normalize_angle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

inline Eigen::Matrix3d hat3(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// SE(2)

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // normalized into (-pi, pi]

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}

  Eigen::Vector2d translation() const { return {x, y}; }
  Eigen::Matrix2d rotation() const { return Eigen::Rotation2Dd(theta).toRotationMatrix(); }

  bool operator==(const Pose2&) const = default;
};

inline Pose2 se_compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.theta + b.theta};
}

inline Pose2 se_inverse(const Pose2& a) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return {-(c * a.x + s * a.y), s * a.x - c * a.y, -a.theta};
}

namespace detail {

// sin(t)/t and (1 - cos(t))/t with series near zero.
inline void se2_v_coeffs(double t, double& a, double& b) {
  if (std::abs(t) < 1e-6) {
    const double t2 = t * t;
    a = 1.0 - t2 / 6.0;
    b = t / 2.0 - t * t2 / 24.0;
  } else {
    a = std::sin(t) / t;
    b = (1.0 - std::cos(t)) / t;
  }
}

}  // namespace detail

inline Pose2 se_exp(const Eigen::Vector3d& v) {
  double a = 0.0;
  double b = 0.0;
  detail::se2_v_coeffs(v.z(), a, b);
  return {a * v.x() - b * v.y(), b * v.x() + a * v.y(), v.z()};
}

inline Eigen::Vector3d se_log(const Pose2& p) {
  double a = 0.0;
  double b = 0.0;
  detail::se2_v_coeffs(p.theta, a, b);
  const double det = a * a + b * b;
  return {(a * p.x + b * p.y) / det, (-b * p.x + a * p.y) / det, p.theta};
}

inline Pose2 se_retract(const Pose2& a, const Eigen::Vector3d& v) { return se_compose(a, se_exp(v)); }

// Ad(T) with T exp(v) T^-1 = exp(Ad(T) v).
inline Eigen::Matrix3d se_adjoint(const Pose2& p) {
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  Eigen::Matrix3d ad;
  ad << c, -s, p.y,
        s, c, -p.x,
        0.0, 0.0, 1.0;
  return ad;
}

// Jr(v) with exp(v + dv) ~= exp(v) exp(Jr(v) dv).
inline Eigen::Matrix3d se_right_jacobian(const Eigen::Vector3d& v) {
  const double r1 = v.x();
  const double r2 = v.y();
  const double t = v.z();
  Eigen::Matrix3d j = Eigen::Matrix3d::Identity();
  double a = 0.0;
  double b = 0.0;
  detail::se2_v_coeffs(t, a, b);
  double j13 = 0.0;
  double j23 = 0.0;
  if (std::abs(t) < 1e-6) {
    j13 = -r2 / 2.0 + r1 * t / 6.0;
    j23 = r1 / 2.0 + r2 * t / 6.0;
  } else {
    const double c = std::cos(t);
    const double s = std::sin(t);
    j13 = (t * r1 - r2 + r2 * c - r1 * s) / (t * t);
    j23 = (r1 + t * r2 - r1 * c - r2 * s) / (t * t);
  }
  j << a, b, j13,
       -b, a, j23,
       0.0, 0.0, 1.0;
  return j;
}

// ---------------------------------------------------------------------------
// SE(3)

struct Pose3 {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();  // unit, w >= 0

  Pose3() = default;
  Pose3(const Eigen::Vector3d& t_, const Eigen::Quaterniond& q_) : t(t_), q(q_) { canonicalize(); }

  void canonicalize() {
    q.normalize();
    if (q.w() < 0.0) q.coeffs() *= -1.0;
  }

  const Eigen::Vector3d& translation() const { return t; }
  Eigen::Matrix3d rotation() const { return q.toRotationMatrix(); }

  bool operator==(const Pose3& o) const { return t == o.t && q.coeffs() == o.q.coeffs(); }
};

inline Pose3 se_compose(const Pose3& a, const Pose3& b) { return {a.t + a.q * b.t, a.q * b.q}; }

inline Pose3 se_inverse(const Pose3& a) {
  const Eigen::Quaterniond qi = a.q.conjugate();
  return {-(qi * a.t), qi};
}

namespace detail {

inline Eigen::Quaterniond so3_exp(const Eigen::Vector3d& phi) {
  const double th = phi.norm();
  double k = 0.0;
  if (th < 1e-8) {
    k = 0.5 - th * th / 48.0;
  } else {
    k = std::sin(0.5 * th) / th;
  }
  Eigen::Quaterniond q(std::cos(0.5 * th), k * phi.x(), k * phi.y(), k * phi.z());
  q.normalize();
  return q;
}

// Principal branch, angle in [0, pi]. Expects w >= 0.
inline Eigen::Vector3d so3_log(const Eigen::Quaterniond& q) {
  const Eigen::Vector3d v = q.vec();
  const double n = v.norm();
  const double w = q.w();
  if (n < 1e-12) return 2.0 * v / w;
  return 2.0 * std::atan2(n, w) / n * v;
}

// Left Jacobian of SO(3) and its inverse.
inline Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& phi) {
  const double th = phi.norm();
  const Eigen::Matrix3d w = hat3(phi);
  double a = 0.0;
  double b = 0.0;
  if (th < 1e-4) {
    const double t2 = th * th;
    a = 0.5 - t2 / 24.0;
    b = 1.0 / 6.0 - t2 / 120.0;
  } else {
    a = (1.0 - std::cos(th)) / (th * th);
    b = (th - std::sin(th)) / (th * th * th);
  }
  return Eigen::Matrix3d::Identity() + a * w + b * w * w;
}

inline Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& phi) {
  const double th = phi.norm();
  const Eigen::Matrix3d w = hat3(phi);
  double b = 0.0;
  if (th < 1e-4) {
    b = 1.0 / 12.0 + th * th / 720.0;
  } else {
    // 1/th^2 - (1 + cos th) / (2 th sin th), written with cot(th/2) so it stays
    // finite at th = pi.
    b = 1.0 / (th * th) - 1.0 / (2.0 * th * std::tan(0.5 * th));
  }
  return Eigen::Matrix3d::Identity() - 0.5 * w + b * w * w;
}

// Off-diagonal block of the SE(3) left Jacobian.
inline Eigen::Matrix3d se3_q_block(const Eigen::Vector3d& rho, const Eigen::Vector3d& phi) {
  const double th = phi.norm();
  const Eigen::Matrix3d p = hat3(phi);
  const Eigen::Matrix3d r = hat3(rho);
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  if (th < 1e-3) {
    const double t2 = th * th;
    c1 = 1.0 / 6.0 - t2 / 120.0;
    c2 = 1.0 / 24.0 - t2 / 720.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0;
  } else {
    const double s = std::sin(th);
    const double c = std::cos(th);
    const double t2 = th * th;
    c1 = (th - s) / (t2 * th);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * th - 3.0 * s + th * c) / (2.0 * t2 * t2 * th);
  }
  const Eigen::Matrix3d pr = p * r;
  const Eigen::Matrix3d rp = r * p;
  const Eigen::Matrix3d prp = pr * p;
  return 0.5 * r + c1 * (pr + rp + prp) + c2 * (p * pr + rp * p - 3.0 * prp) + c3 * (prp * p + p * prp);
}

}  // namespace detail

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

inline Pose3 se_exp(const Vector6d& v) {
  const Eigen::Vector3d rho = v.head<3>();
  const Eigen::Vector3d phi = v.tail<3>();
  return {detail::so3_left_jacobian(phi) * rho, detail::so3_exp(phi)};
}

inline Vector6d se_log(const Pose3& p) {
  const Eigen::Vector3d phi = detail::so3_log(p.q);
  Vector6d v;
  v.head<3>() = detail::so3_left_jacobian_inverse(phi) * p.t;
  v.tail<3>() = phi;
  return v;
}

inline Pose3 se_retract(const Pose3& a, const Vector6d& v) { return se_compose(a, se_exp(v)); }

inline Matrix6d se_adjoint(const Pose3& p) {
  const Eigen::Matrix3d r = p.rotation();
  Matrix6d ad = Matrix6d::Zero();
  ad.topLeftCorner<3, 3>() = r;
  ad.topRightCorner<3, 3>() = hat3(p.t) * r;
  ad.bottomRightCorner<3, 3>() = r;
  return ad;
}

inline Matrix6d se_right_jacobian(const Vector6d& v) {
  // Jr(v) = Jl(-v)
  const Eigen::Vector3d rho = -v.head<3>();
  const Eigen::Vector3d phi = -v.tail<3>();
  const Eigen::Matrix3d jl = detail::so3_left_jacobian(phi);
  Matrix6d j = Matrix6d::Zero();
  j.topLeftCorner<3, 3>() = jl;
  j.topRightCorner<3, 3>() = detail::se3_q_block(rho, phi);
  j.bottomRightCorner<3, 3>() = jl;
  return j;
}

// ---------------------------------------------------------------------------
// Compile-time description of each group, used by the templated graph code.

template <class P>
struct PoseTraits;

template <>
struct PoseTraits<Pose2> {
  static constexpr int kDim = 3;
  static constexpr int kTranslationDim = 2;
  using Tangent = Eigen::Vector3d;
  using Matrix = Eigen::Matrix3d;
  static constexpr const char* kVertexTag = "VERTEX_SE2";
  static constexpr const char* kEdgeTag = "EDGE_SE2";
};

template <>
struct PoseTraits<Pose3> {
  static constexpr int kDim = 6;
  static constexpr int kTranslationDim = 3;
  using Tangent = Vector6d;
  using Matrix = Matrix6d;
  static constexpr const char* kVertexTag = "VERTEX_SE3:QUAT";
  static constexpr const char* kEdgeTag = "EDGE_SE3:QUAT";
};

inline Eigen::Vector3d position3(const Pose2& p) { return {p.x, p.y, 0.0}; }
inline Eigen::Vector3d position3(const Pose3& p) { return p.t; }

}  // namespace pgo
