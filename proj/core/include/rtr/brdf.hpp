#pragma once

#include <cmath>

#include "rtr/math.hpp"

namespace rtr {

// Cook-Torrance microfacet pieces with the roughness conventions used
// throughout the shading code: distribution width a = roughness^2 and
// geometry constant k = roughness^4 / 2.

inline Real ggx_distribution(Real n_dot_h, Real roughness) {
    Real a = roughness * roughness;
    Real a2 = a * a;
    Real d = n_dot_h * n_dot_h * (a2 - 1) + 1;
    return a2 / (kPi * d * d);
}

inline Vec3 fresnel_schlick(Real h_dot_o, const Vec3& f0) {
    Real f = 1 - h_dot_o;
    Real f2 = f * f;
    Real fc = f2 * f2 * f;
    return f0 + (Vec3(1, 1, 1) - f0) * fc;
}

inline Real smith_g_sub(Real n_dot_v, Real k) {
    return n_dot_v / (n_dot_v * (1 - k) + k);
}

inline Real smith_geometry(Real n_dot_o, Real n_dot_i, Real roughness) {
    Real r2 = roughness * roughness;
    Real k = r2 * r2 / 2;
    return smith_g_sub(n_dot_o, k) * smith_g_sub(n_dot_i, k);
}

/// GGX half-vector importance sample in the tangent frame (+z normal).
/// The returned directions have pdf D(h) n.h over the hemisphere.
inline Vec3 ggx_sample_half(Real u1, Real u2, Real roughness) {
    Real a = roughness * roughness;
    Real a2 = a * a;
    Real cos2 = (1 - u2) / (1 + (a2 - 1) * u2);
    Real cos_t = std::sqrt(clamp(cos2, Real(0), Real(1)));
    Real sin_t = std::sqrt(std::max(Real(0), 1 - cos2));
    Real phi = kTwoPi * u1;
    return {sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t};
}

}  // namespace rtr
