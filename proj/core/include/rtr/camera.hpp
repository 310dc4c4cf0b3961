#pragma once

#include "rtr/math.hpp"

namespace rtr {

/// Pinhole camera. World-to-camera is the rigid transform x_c = R x_w + t
/// with the camera looking down +z (+x right, +y down). Pixel centers
/// sit at integer + 0.5 coordinates.
struct Camera {
    int width = 0;
    int height = 0;
    Real fx = 0, fy = 0;
    Real cx = 0, cy = 0;
    Mat3 R = Mat3::identity();
    Vec3 t{0, 0, 0};

    Vec3 world_to_camera(const Vec3& p) const { return R * p + t; }

    /// Rotates a world direction into the camera frame (no translation).
    Vec3 dir_to_camera(const Vec3& d) const { return R * d; }
    Vec3 dir_to_world(const Vec3& d) const { return R.tmul(d); }

    /// Camera center in world coordinates: -R^T t.
    Vec3 position() const { return R.tmul(t) * -1.0; }

    /// Perspective projection of a camera-space point to pixel coords.
    Vec2 project(const Vec3& pc) const {
        return {fx * pc.x / pc.z + cx, fy * pc.y / pc.z + cy};
    }

    /// World-space unit ray direction through the given pixel coords.
    Vec3 ray_dir(Real px, Real py) const {
        const Vec3 dc{(px - cx) / fx, (py - cy) / fy, 1.0};
        return normalize(R.tmul(dc));
    }

    /// Camera placed at `eye`, looking at `target`, with `up` fixing roll.
    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                          int width, int height, Real focal) {
        Camera cam;
        cam.width = width;
        cam.height = height;
        cam.fx = cam.fy = focal;
        cam.cx = width * 0.5;
        cam.cy = height * 0.5;
        const Vec3 fwd = normalize(target - eye);          // camera +z
        const Vec3 right = normalize(cross(fwd, up));      // camera +x
        const Vec3 down = cross(fwd, right);               // camera +y
        cam.R = Mat3::from_rows(right, down, fwd);
        cam.t = (cam.R * eye) * -1.0;
        return cam;
    }
};

}  // namespace rtr
