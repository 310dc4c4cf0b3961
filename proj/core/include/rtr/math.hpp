#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rtr {

using Real = double;

constexpr Real kPi = 3.14159265358979323846;
constexpr Real kTwoPi = 2.0 * kPi;
constexpr Real kFourPi = 4.0 * kPi;
constexpr Real kInvPi = 1.0 / kPi;

/// Thrown on malformed user input (files, CLI arguments, out-of-range
/// fields). The CLI maps it to exit code 2.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

struct Vec2 {
    Real x = 0, y = 0;

    Vec2() = default;
    Vec2(Real x_, Real y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(Real s) const { return {x * s, y * s}; }
};

struct Vec3 {
    Real x = 0, y = 0, z = 0;

    Vec3() = default;
    Vec3(Real x_, Real y_, Real z_) : x(x_), y(y_), z(z_) {}
    explicit Vec3(Real s) : x(s), y(s), z(s) {}

    Real operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    Real& operator[](int i) {
        return i == 0 ? x : (i == 1 ? y : z);
    }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(Real s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(Real s) const { return {x / s, y / s, z / s}; }
    Vec3 operator*(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
    Vec3 operator/(const Vec3& o) const { return {x / o.x, y / o.y, z / o.z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(Real s) { x *= s; y *= s; z *= s; return *this; }

    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(Real s, const Vec3& v) { return v * s; }

inline Real dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline Real dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline Real length_sq(const Vec3& v) { return dot(v, v); }
inline Real length(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalize(const Vec3& v) { return v / length(v); }

inline Vec3 min(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3 max(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

inline Real clamp(Real v, Real lo, Real hi) { return v < lo ? lo : (v > hi ? hi : v); }
inline Vec3 clamp(const Vec3& v, Real lo, Real hi) {
    return {clamp(v.x, lo, hi), clamp(v.y, lo, hi), clamp(v.z, lo, hi)};
}

inline Real sigmoid(Real x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const Real e = std::exp(x);
    return e / (1.0 + e);
}

inline Real logit(Real p) { return std::log(p / (1.0 - p)); }

/// Row-major 3x3 matrix.
struct Mat3 {
    Real m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

    static Mat3 identity() {
        Mat3 r;
        r.m[0][0] = r.m[1][1] = r.m[2][2] = 1;
        return r;
    }
    static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
        Mat3 r;
        for (int j = 0; j < 3; ++j) {
            r.m[0][j] = r0[j];
            r.m[1][j] = r1[j];
            r.m[2][j] = r2[j];
        }
        return r;
    }
    static Mat3 from_cols(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
        Mat3 r;
        for (int i = 0; i < 3; ++i) {
            r.m[i][0] = c0[i];
            r.m[i][1] = c1[i];
            r.m[i][2] = c2[i];
        }
        return r;
    }

    Vec3 row(int i) const { return {m[i][0], m[i][1], m[i][2]}; }
    Vec3 col(int j) const { return {m[0][j], m[1][j], m[2][j]}; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) r.m[i][j] += m[i][k] * o.m[k][j];
        return r;
    }
    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
        return r;
    }
    Mat3 operator*(Real s) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] * s;
        return r;
    }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
        return r;
    }

    /// Transpose-multiply: M^T * v.
    Vec3 tmul(const Vec3& v) const {
        return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
                m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
                m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
    }
};

/// Unit quaternion (w, x, y, z). Stored components may drift off unit
/// norm during optimization; rotation_matrix() normalizes first.
struct Quat {
    Real w = 1, x = 0, y = 0, z = 0;

    Quat() = default;
    Quat(Real w_, Real x_, Real y_, Real z_) : w(w_), x(x_), y(y_), z(z_) {}

    Real norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quat normalized() const {
        const Real n = norm();
        return {w / n, x / n, y / n, z / n};
    }

    bool operator==(const Quat& o) const {
        return w == o.w && x == o.x && y == o.y && z == o.z;
    }
};

/// Rotation matrix of the normalized quaternion.
inline Mat3 rotation_matrix(const Quat& q0) {
    const Quat q = q0.normalized();
    const Real w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 r;
    r.m[0][0] = 1 - 2 * (y * y + z * z);
    r.m[0][1] = 2 * (x * y - w * z);
    r.m[0][2] = 2 * (x * z + w * y);
    r.m[1][0] = 2 * (x * y + w * z);
    r.m[1][1] = 1 - 2 * (x * x + z * z);
    r.m[1][2] = 2 * (y * z - w * x);
    r.m[2][0] = 2 * (x * z - w * y);
    r.m[2][1] = 2 * (y * z + w * x);
    r.m[2][2] = 1 - 2 * (x * x + y * y);
    return r;
}

/// Accumulates d(sum(grad_r .* R(q)))/dq onto grad_q, where R is
/// rotation_matrix (including its normalization of q).
inline void rotation_matrix_backward(const Quat& q0, const Mat3& grad_r,
                                     Quat* grad_q) {
    const Real n = q0.norm();
    const Quat q = q0.normalized();
    const Real w = q.w, x = q.x, y = q.y, z = q.z;
    const Real(&g)[3][3] = grad_r.m;

    // gradients w.r.t. the normalized components
    const Real gw = 2 * (-z * g[0][1] + y * g[0][2] + z * g[1][0] - x * g[1][2] -
                         y * g[2][0] + x * g[2][1]);
    const Real gx = 2 * (y * g[0][1] + z * g[0][2] + y * g[1][0] -
                         2 * x * g[1][1] - w * g[1][2] + z * g[2][0] +
                         w * g[2][1] - 2 * x * g[2][2]);
    const Real gy = 2 * (-2 * y * g[0][0] + x * g[0][1] + w * g[0][2] +
                         x * g[1][0] + z * g[1][2] - w * g[2][0] + z * g[2][1] -
                         2 * y * g[2][2]);
    const Real gz = 2 * (-2 * z * g[0][0] - w * g[0][1] + x * g[0][2] +
                         w * g[1][0] - 2 * z * g[1][1] + y * g[1][2] +
                         x * g[2][0] + y * g[2][1]);

    // chain through normalization: d(q/|q|)/dq = (I - qq^T)/|q|
    const Real d = gw * w + gx * x + gy * y + gz * z;
    grad_q->w += (gw - d * w) / n;
    grad_q->x += (gx - d * x) / n;
    grad_q->y += (gy - d * y) / n;
    grad_q->z += (gz - d * z) / n;
}

/// Quaternion that rotates +z onto the given unit direction.
inline Quat quat_from_z_to(const Vec3& dir) {
    const Vec3 z{0, 0, 1};
    const Real c = dot(z, dir);
    if (c > 1.0 - 1e-12) return Quat{1, 0, 0, 0};
    if (c < -1.0 + 1e-12) return Quat{0, 1, 0, 0};  // 180 deg about x
    const Vec3 axis = cross(z, dir);
    const Real s = std::sqrt((1 + c) * 2);
    return Quat{s * 0.5, axis.x / s, axis.y / s, axis.z / s}.normalized();
}

/// Mirror reflection of v about unit normal n: 2(n.v)n - v.
/// Both vectors point away from the surface.
inline Vec3 reflect(const Vec3& v, const Vec3& n) {
    return n * (2.0 * dot(n, v)) - v;
}

}  // namespace rtr
