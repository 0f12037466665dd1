#include "hexlens/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hexlens {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

Camera Camera::orbit(const Vec3& target, double azimuth_deg, double elevation_deg, double distance, double fov_y_deg) {
    double az = azimuth_deg * kDeg;
    double el = std::clamp(elevation_deg, -89.0, 89.0) * kDeg;
    Camera cam;
    cam.target = target;
    cam.eye = target + Vec3{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)} * distance;
    cam.up = {0, 0, 1};
    cam.fov_y_deg = fov_y_deg;
    return cam;
}

Camera fit_camera(const Aabb& box, int width, int height, double azimuth_deg, double elevation_deg, double fov_y_deg) {
    Vec3 center = box.empty() ? Vec3{} : box.center();
    double radius = box.empty() ? 1.0 : std::max(0.5 * length(box.extent()), 1e-9);
    double half_y = 0.5 * fov_y_deg * kDeg;
    double half_x = std::atan(std::tan(half_y) * width / std::max(height, 1));
    double distance = radius / std::sin(std::min(half_x, half_y)) * 1.02;
    return Camera::orbit(center, azimuth_deg, elevation_deg, distance, fov_y_deg);
}

Projection::Projection(const Camera& cam, int width, int height, const Aabb& scene)
    : width_(width), height_(height), eye_(cam.eye) {
    focal_ = 0.5 * height / std::tan(0.5 * cam.fov_y_deg * kDeg);
    forward_ = normalize(cam.target - cam.eye);
    right_ = normalize(cross(forward_, cam.up));
    if (length(right_) == 0.0) right_ = normalize(cross(forward_, Vec3{1, 0, 0}));
    up_ = cross(right_, forward_);

    Vec3 center = scene.empty() ? cam.target : scene.center();
    double radius = scene.empty() ? 1.0 : std::max(0.5 * length(scene.extent()), 1e-9);
    double d = dot(center - eye_, forward_);
    far_ = std::max(d + radius * 1.001, radius * 1e-3 * 2);
    near_ = std::max(d - radius * 1.001, radius * 1e-3);
}

Ray Projection::ray_through(double px, double py) const {
    Vec3 dir = forward_ + right_ * ((px - 0.5 * width_) / focal_) + up_ * ((0.5 * height_ - py) / focal_);
    return {eye_, normalize(dir)};
}

}  // namespace hexlens
