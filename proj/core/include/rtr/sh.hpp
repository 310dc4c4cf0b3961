#pragma once

#include <vector>

#include "rtr/math.hpp"

namespace rtr {

/// Real spherical harmonics, orthonormal over the unit sphere, without
/// the Condon-Shortley phase:
///   Y_{0,0}  =  0.28209479177387814
///   Y_{1,-1} =  0.4886025119029199 * y      (and x, z analogously)
///   Y_{l,m>0} = sqrt(2) K_l^m cos(m phi) P_l^m(cos theta)
///   Y_{l,m<0} = sqrt(2) K_l^m sin(|m| phi) P_l^|m|(cos theta)
/// Coefficients are flattened as j = l*(l+1) + m, so a `bands`-band
/// expansion has bands^2 entries.

inline int sh_index(int l, int m) { return l * (l + 1) + m; }
inline int sh_coeff_count(int bands) { return bands * bands; }

/// Evaluates all bands^2 basis functions at a unit direction.
void sh_eval_basis(const Vec3& dir, int bands, Real* out);
std::vector<Real> sh_eval_basis(const Vec3& dir, int bands);

/// Reconstructs sum_j c_j Y_j(dir).
Real sh_eval(const std::vector<Real>& coeffs, const Vec3& dir);
Vec3 sh_eval(const std::vector<Vec3>& coeffs, const Vec3& dir);

inline Real sh_dot(const std::vector<Real>& a, const std::vector<Real>& b) {
    Real s = 0;
    for (size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}
inline Vec3 sh_dot(const std::vector<Vec3>& a, const std::vector<Real>& b) {
    Vec3 s{0, 0, 0};
    for (size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

/// Zonal expansion coefficient A_l of the clamped cosine lobe, defined
/// so that the lobe about n expands as (cos)_j = A_l Y_j(n):
///   A_0 = pi, A_1 = 2pi/3, A_2 = pi/4, odd l >= 3 vanish.
Real cosine_lobe_zh(int l);

/// SH coefficients of max(0, dot(n, omega)) as a function of omega.
std::vector<Real> sh_clamped_cosine(const Vec3& n, int bands);

/// Monte Carlo projection onto bands^2 coefficients using uniform
/// sphere sampling: c_j = (4pi/N) sum_i f(omega_i) Y_j(omega_i).
/// Deterministic for a fixed seed.
template <typename F>
std::vector<Real> sh_project_sphere(F&& fn, int bands, int n_samples, uint64_t seed);

template <typename F>
std::vector<Vec3> sh_project_sphere_rgb(F&& fn, int bands, int n_samples, uint64_t seed);

}  // namespace rtr

#include "rtr/sh_project.inl"
