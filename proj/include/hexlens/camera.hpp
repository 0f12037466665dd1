#pragma once

#include "hexlens/vec.hpp"

namespace hexlens {

/// Perspective pinhole camera. Screen space has its origin at the top-left
/// image corner with y pointing down; pixel (i, j) is sampled at (i+0.5, j+0.5).
struct Camera {
    Vec3 eye{0, 0, 5};
    Vec3 target{0, 0, 0};
    Vec3 up{0, 1, 0};
    double fov_y_deg = 40.0;

    /// Turntable camera around `target`; z is up. Elevation is clamped to
    /// +-89 degrees so the view basis never degenerates.
    static Camera orbit(const Vec3& target, double azimuth_deg, double elevation_deg, double distance,
                        double fov_y_deg = 40.0);

    bool operator==(const Camera&) const = default;
};

/// Orbit camera looking at the box center from far enough away that the
/// bounding sphere fits the image.
Camera fit_camera(const Aabb& box, int width, int height, double azimuth_deg = 35.0, double elevation_deg = 25.0,
                  double fov_y_deg = 40.0);

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit length

    Vec3 at(double t) const { return origin + dir * t; }
    bool operator==(const Ray&) const = default;
};

/// Camera plus image size, resolved into a view basis and a depth range.
/// Normalized depth is linear in view-space z: (z - near) / (far - near).
class Projection {
public:
    Projection(const Camera& cam, int width, int height, const Aabb& scene);

    int width() const { return width_; }
    int height() const { return height_; }
    double near_z() const { return near_; }
    double far_z() const { return far_; }
    double focal() const { return focal_; }
    const Vec3& eye() const { return eye_; }

    /// View-space coordinates: x right, y up, z along the view direction.
    Vec3 to_view(const Vec3& world) const {
        Vec3 d = world - eye_;
        return {dot(d, right_), dot(d, up_), dot(d, forward_)};
    }
    /// Continuous screen position of a view-space point with z > 0.
    double screen_x(const Vec3& view) const { return 0.5 * width_ + focal_ * view.x / view.z; }
    double screen_y(const Vec3& view) const { return 0.5 * height_ - focal_ * view.y / view.z; }
    double depth(double view_z) const { return (view_z - near_) / (far_ - near_); }

    Ray ray_through(double px, double py) const;

private:
    int width_, height_;
    double focal_;
    Vec3 eye_, right_, up_, forward_;
    double near_, far_;
};

}  // namespace hexlens
