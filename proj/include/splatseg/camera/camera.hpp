#pragma once

#include "splatseg/model/gaussian.hpp"

#include <Eigen/Core>

namespace splatseg {

/// Centers at or closer than this camera-space depth are treated as not visible.
inline constexpr double kNearPlane = 0.01;

/// Variance (px^2) added to the projected covariance diagonal for rendering.
inline constexpr double kLowPassFloor = 0.3;

/// Pinhole camera. Camera space looks down +z with +y pointing down the image.
struct Camera {
    int id = 0;
    int width = 0;
    int height = 0;
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();

    Eigen::Matrix3d rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
    Eigen::Vector3d translation() const { return world_to_camera.topRightCorner<3, 1>(); }

    /// Camera center in world coordinates.
    Eigen::Vector3d position() const;

    Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const;

    /// Throws ParameterError unless the rotation is orthonormal with determinant +1
    /// (1e-6), focal lengths are positive and the principal point lies in the image.
    void validate() const;

    /// Camera at `eye` looking at `target`; `up` is the approximate world up.
    static Camera look_at(int id, int width, int height, double focal, const Eigen::Vector3d& eye,
                          const Eigen::Vector3d& target, const Eigen::Vector3d& up);
};

struct CenterProjection {
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
    double depth = 0.0;

    bool in_front() const noexcept { return depth > kNearPlane; }
};

/// pixel = (fx x / z + cx, fy y / z + cy) for camera-space (x, y, z); depth = z.
/// Points at or behind the near plane still return a result; check in_front().
CenterProjection project_center(const Camera& cam, const Eigen::Vector3d& world);

enum class ProjectionModel {
    perspective,
    /// Test hook: J = [[1, 0, 0], [0, 1, 0]] (one pixel per scene unit).
    orthographic,
};

struct CovarianceOptions {
    bool low_pass = true;
    ProjectionModel model = ProjectionModel::perspective;
};

/// The local affine map J W of the EWA projection at a world point: world-space
/// offsets to pixel offsets.
Eigen::Matrix<double, 2, 3> linearized_projection(const Camera& cam, const Eigen::Vector3d& world,
                                                  ProjectionModel model = ProjectionModel::perspective);

/// Screen-space covariance J W Sigma W^T J^T (exactly symmetric), plus the
/// low-pass floor on the diagonal when enabled. Throws NotVisibleError when the
/// center is not in front of the near plane (perspective model only).
Eigen::Matrix2d project_covariance(const Camera& cam, const Gaussian& g, const CovarianceOptions& options = {});

struct AxisEndpoints {
    Eigen::Vector2d a = Eigen::Vector2d::Zero();
    Eigen::Vector2d b = Eigen::Vector2d::Zero();
};

/// Major eigenpair of a symmetric 2x2 matrix. Isotropic input resolves to the x axis.
struct MajorAxis {
    double major = 0.0;
    double minor = 0.0;
    Eigen::Vector2d direction = Eigen::Vector2d::UnitX();
};
MajorAxis major_axis(const Eigen::Matrix2d& cov2d);

/// Endpoints center +- 3 sqrt(lambda_max) v_max. `a` is the lexicographically
/// smaller endpoint.
AxisEndpoints long_axis(const Eigen::Matrix2d& cov2d, const Eigen::Vector2d& center);

struct ProjectedGaussian {
    Eigen::Vector2d center2d = Eigen::Vector2d::Zero();
    double depth = 0.0;
    Eigen::Matrix2d cov2d = Eigen::Matrix2d::Zero();
    AxisEndpoints long_axis_endpoints;
    /// Principal 3D axis whose image is longest, oriented so its image points
    /// toward long_axis_endpoints.a.
    Eigen::Vector3d long_axis_dir3d = Eigen::Vector3d::UnitX();
    double long_axis_halflen3d = 0.0;
    int long_axis_index = 0;
    bool visible = false;
};

/// Full projection of one Gaussian. `visible` is false (and the remaining fields
/// unset) when the center is behind the near plane.
ProjectedGaussian project_gaussian(const Camera& cam, const Gaussian& g, const CovarianceOptions& options = {});

} // namespace splatseg
