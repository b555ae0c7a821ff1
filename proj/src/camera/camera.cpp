#include "splatseg/camera/camera.hpp"

#include "splatseg/common/errors.hpp"

#include <Eigen/LU>

#include <cmath>

namespace splatseg {

Eigen::Vector3d Camera::position() const {
    return -rotation().transpose() * translation();
}

Eigen::Vector3d Camera::to_camera(const Eigen::Vector3d& world) const {
    return rotation() * world + translation();
}

void Camera::validate() const {
    const Eigen::Matrix3d r = rotation();
    if (!world_to_camera.allFinite()) {
        throw ParameterError("camera " + std::to_string(id) + ": non-finite pose");
    }
    if (((r.transpose() * r) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
        throw ParameterError("camera " + std::to_string(id) + ": rotation is not orthonormal");
    }
    if (std::abs(r.determinant() - 1.0) > 1e-6) {
        throw ParameterError("camera " + std::to_string(id) + ": rotation determinant is not +1");
    }
    const Eigen::RowVector4d last = world_to_camera.row(3);
    if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12) {
        throw ParameterError("camera " + std::to_string(id) + ": last row of world_to_camera must be 0 0 0 1");
    }
    if (width <= 0 || height <= 0) {
        throw ParameterError("camera " + std::to_string(id) + ": image size must be positive");
    }
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw ParameterError("camera " + std::to_string(id) + ": focal lengths must be positive");
    }
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
        throw ParameterError("camera " + std::to_string(id) + ": principal point outside the image");
    }
}

Camera Camera::look_at(int id, int width, int height, double focal, const Eigen::Vector3d& eye,
                       const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
    const Eigen::Vector3d forward = (target - eye).normalized();
    Eigen::Vector3d right = forward.cross(up);
    if (right.norm() < 1e-12) {
        throw ParameterError("look_at: up vector is parallel to the viewing direction");
    }
    right.normalize();
    // +y points down the image.
    const Eigen::Vector3d down = forward.cross(right);

    Camera cam;
    cam.id = id;
    cam.width = width;
    cam.height = height;
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    Eigen::Matrix3d r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    cam.world_to_camera.setIdentity();
    cam.world_to_camera.topLeftCorner<3, 3>() = r;
    cam.world_to_camera.topRightCorner<3, 1>() = -r * eye;
    return cam;
}

CenterProjection project_center(const Camera& cam, const Eigen::Vector3d& world) {
    const Eigen::Vector3d p = cam.to_camera(world);
    CenterProjection out;
    out.depth = p.z();
    out.pixel = {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
    return out;
}

Eigen::Matrix<double, 2, 3> linearized_projection(const Camera& cam, const Eigen::Vector3d& world,
                                                  ProjectionModel model) {
    Eigen::Matrix<double, 2, 3> jacobian;
    if (model == ProjectionModel::orthographic) {
        jacobian << 1.0, 0.0, 0.0, 0.0, 1.0, 0.0;
    } else {
        const Eigen::Vector3d p = cam.to_camera(world);
        const double z = p.z();
        const double z2 = z * z;
        jacobian << cam.fx / z, 0.0, -cam.fx * p.x() / z2, 0.0, cam.fy / z, -cam.fy * p.y() / z2;
    }
    return jacobian * cam.rotation();
}

Eigen::Matrix2d project_covariance(const Camera& cam, const Gaussian& g, const CovarianceOptions& options) {
    if (options.model == ProjectionModel::perspective && !(cam.to_camera(g.position).z() > kNearPlane)) {
        throw NotVisibleError("gaussian center is behind the near plane of camera " + std::to_string(cam.id));
    }
    const Eigen::Matrix<double, 2, 3> m = linearized_projection(cam, g.position, options.model);
    Eigen::Matrix2d cov = m * g.covariance() * m.transpose();
    const double off = 0.5 * (cov(0, 1) + cov(1, 0));
    cov(0, 1) = off;
    cov(1, 0) = off;
    if (options.low_pass) {
        cov(0, 0) += kLowPassFloor;
        cov(1, 1) += kLowPassFloor;
    }
    return cov;
}

MajorAxis major_axis(const Eigen::Matrix2d& cov2d) {
    const double a = cov2d(0, 0);
    const double b = 0.5 * (cov2d(0, 1) + cov2d(1, 0));
    const double c = cov2d(1, 1);
    const double mean = 0.5 * (a + c);
    const double radius = std::hypot(0.5 * (a - c), b);
    MajorAxis out;
    out.major = mean + radius;
    out.minor = mean - radius;
    if (b == 0.0) {
        out.direction = a >= c ? Eigen::Vector2d::UnitX() : Eigen::Vector2d::UnitY();
        return out;
    }
    // Two algebraically equal eigenvector forms; use the better-conditioned one.
    const Eigen::Vector2d v1(out.major - c, b);
    const Eigen::Vector2d v2(b, out.major - a);
    out.direction = (v1.squaredNorm() >= v2.squaredNorm() ? v1 : v2).normalized();
    return out;
}

AxisEndpoints long_axis(const Eigen::Matrix2d& cov2d, const Eigen::Vector2d& center) {
    const MajorAxis axis = major_axis(cov2d);
    const Eigen::Vector2d half = 3.0 * std::sqrt(std::max(axis.major, 0.0)) * axis.direction;
    Eigen::Vector2d p = center - half;
    Eigen::Vector2d q = center + half;
    const bool p_first = p.x() < q.x() || (p.x() == q.x() && p.y() <= q.y());
    return p_first ? AxisEndpoints{p, q} : AxisEndpoints{q, p};
}

ProjectedGaussian project_gaussian(const Camera& cam, const Gaussian& g, const CovarianceOptions& options) {
    ProjectedGaussian out;
    const CenterProjection center = project_center(cam, g.position);
    out.depth = center.depth;
    if (options.model == ProjectionModel::perspective && !center.in_front()) {
        out.visible = false;
        return out;
    }
    out.visible = true;
    out.center2d = center.pixel;
    if (options.model == ProjectionModel::orthographic) {
        const Eigen::Vector3d p = cam.to_camera(g.position);
        out.center2d = p.head<2>() + Eigen::Vector2d(cam.cx, cam.cy);
    }
    out.cov2d = project_covariance(cam, g, options);
    out.long_axis_endpoints = long_axis(out.cov2d, out.center2d);

    const Eigen::Matrix<double, 2, 3> m = linearized_projection(cam, g.position, options.model);
    const Eigen::Matrix3d r = g.rotation_matrix();
    double best = -1.0;
    for (int k = 0; k < 3; ++k) {
        const double len = (m * r.col(k)).norm() * g.scale[k];
        if (len > best) {
            best = len;
            out.long_axis_index = k;
        }
    }
    Eigen::Vector3d dir = r.col(out.long_axis_index);
    if ((m * dir).dot(out.long_axis_endpoints.a - out.center2d) < 0.0) {
        dir = -dir;
    }
    out.long_axis_dir3d = dir;
    out.long_axis_halflen3d = 3.0 * g.scale[out.long_axis_index];
    return out;
}

} // namespace splatseg
