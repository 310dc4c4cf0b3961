#pragma once

#include "rtr/rng.hpp"

namespace rtr {

template <typename F>
std::vector<Real> sh_project_sphere(F&& fn, int bands, int n_samples, uint64_t seed) {
    if (n_samples <= 0) throw InputError("sh_project_sphere: empty sample set");
    const int n = sh_coeff_count(bands);
    std::vector<Real> coeffs(n, 0.0);
    std::vector<Real> basis(n);
    const Rng rng(seed, /*stream=*/0);
    for (int i = 0; i < n_samples; ++i) {
        const Vec3 d = rng.sphere(uint64_t(i));
        const Real f = fn(d);
        sh_eval_basis(d, bands, basis.data());
        for (int j = 0; j < n; ++j) coeffs[j] += f * basis[j];
    }
    const Real w = kFourPi / Real(n_samples);
    for (Real& c : coeffs) c *= w;
    return coeffs;
}

template <typename F>
std::vector<Vec3> sh_project_sphere_rgb(F&& fn, int bands, int n_samples, uint64_t seed) {
    if (n_samples <= 0) throw InputError("sh_project_sphere: empty sample set");
    const int n = sh_coeff_count(bands);
    std::vector<Vec3> coeffs(n, Vec3{0, 0, 0});
    std::vector<Real> basis(n);
    const Rng rng(seed, /*stream=*/0);
    for (int i = 0; i < n_samples; ++i) {
        const Vec3 d = rng.sphere(uint64_t(i));
        const Vec3 f = fn(d);
        sh_eval_basis(d, bands, basis.data());
        for (int j = 0; j < n; ++j) coeffs[j] += f * basis[j];
    }
    const Real w = kFourPi / Real(n_samples);
    for (Vec3& c : coeffs) c *= w;
    return coeffs;
}

}  // namespace rtr
