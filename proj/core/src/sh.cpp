#include "rtr/sh.hpp"

namespace rtr {

namespace {

// Normalization K_l^m = sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!), computed
// as a running product to avoid factorial overflow.
Real sh_k(int l, int m) {
    Real k2 = (2.0 * l + 1.0) / kFourPi;
    for (int i = l - m + 1; i <= l + m; ++i) k2 /= Real(i);
    return std::sqrt(k2);
}

}  // namespace

void sh_eval_basis(const Vec3& dir, int bands, Real* out) {
    if (std::abs(length_sq(dir) - 1.0) > 1e-6)
        throw InputError("sh_eval_basis: direction is not unit length");
    const Real x = dir.x, y = dir.y, z = dir.z;

    // p[m][l] holds P_l^m(z) with the sin^m(theta) factor divided out,
    // which keeps everything polynomial in z. The azimuthal factors
    // c_m = cos(m phi) sin^m(theta) and s_m = sin(m phi) sin^m(theta)
    // are rebuilt from (x, y) by angle addition, restoring that factor.
    std::vector<std::vector<Real>> p(bands, std::vector<Real>(bands, 0.0));
    for (int m = 0; m < bands; ++m) {
        // p_m^m = (2m-1)!!
        Real pmm = 1.0;
        for (int i = 1; i <= m; ++i) pmm *= Real(2 * i - 1);
        p[m][m] = pmm;
        if (m + 1 < bands) p[m][m + 1] = z * Real(2 * m + 1) * pmm;
        for (int l = m + 2; l < bands; ++l) {
            p[m][l] = (Real(2 * l - 1) * z * p[m][l - 1] -
                       Real(l + m - 1) * p[m][l - 2]) /
                      Real(l - m);
        }
    }

    for (int l = 0; l < bands; ++l) out[sh_index(l, 0)] = sh_k(l, 0) * p[0][l];

    const Real sqrt2 = std::sqrt(2.0);
    Real cm = 1.0, sm = 0.0;  // cos(m phi) sin^m, sin(m phi) sin^m for m=0
    for (int m = 1; m < bands; ++m) {
        const Real cn = x * cm - y * sm;
        const Real sn = x * sm + y * cm;
        cm = cn;
        sm = sn;
        for (int l = m; l < bands; ++l) {
            const Real k = sqrt2 * sh_k(l, m) * p[m][l];
            out[sh_index(l, m)] = k * cm;
            out[sh_index(l, -m)] = k * sm;
        }
    }
}

std::vector<Real> sh_eval_basis(const Vec3& dir, int bands) {
    std::vector<Real> out(sh_coeff_count(bands));
    sh_eval_basis(dir, bands, out.data());
    return out;
}

Real sh_eval(const std::vector<Real>& coeffs, const Vec3& dir) {
    const int bands = int(std::sqrt(double(coeffs.size())) + 0.5);
    std::vector<Real> basis(coeffs.size());
    sh_eval_basis(dir, bands, basis.data());
    Real s = 0;
    for (size_t j = 0; j < coeffs.size(); ++j) s += coeffs[j] * basis[j];
    return s;
}

Vec3 sh_eval(const std::vector<Vec3>& coeffs, const Vec3& dir) {
    const int bands = int(std::sqrt(double(coeffs.size())) + 0.5);
    std::vector<Real> basis(coeffs.size());
    sh_eval_basis(dir, bands, basis.data());
    Vec3 s{0, 0, 0};
    for (size_t j = 0; j < coeffs.size(); ++j) s += coeffs[j] * basis[j];
    return s;
}

Real cosine_lobe_zh(int l) {
    if (l == 0) return kPi;
    if (l == 1) return 2.0 * kPi / 3.0;
    if (l % 2 == 1) return 0.0;
    // Even l >= 2: 2pi * (-1)^(l/2-1) / ((l+2)(l-1)) * l! / (2^l ((l/2)!)^2).
    const int h = l / 2;
    Real frac = 1.0;  // l! / (2^l (h!)^2), built incrementally
    for (int i = 1; i <= h; ++i) frac *= Real(h + i) / Real(4 * i);
    const Real sign = (h % 2 == 1) ? 1.0 : -1.0;
    return 2.0 * kPi * sign / (Real(l + 2) * Real(l - 1)) * frac;
}

std::vector<Real> sh_clamped_cosine(const Vec3& n, int bands) {
    std::vector<Real> coeffs = sh_eval_basis(n, bands);
    for (int l = 0; l < bands; ++l) {
        const Real a = cosine_lobe_zh(l);
        for (int m = -l; m <= l; ++m) coeffs[sh_index(l, m)] *= a;
    }
    return coeffs;
}

}  // namespace rtr
