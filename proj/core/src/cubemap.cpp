#include "rtr/cubemap.hpp"

#include <cmath>

#include "rtr/sh.hpp"

namespace rtr {

namespace {

// Antiderivative of the face-to-sphere area integrand
// (1 + x^2 + y^2)^(-3/2) over a cube face.
Real area_element(Real x, Real y) {
    return std::atan2(x * y, std::sqrt(x * x + y * y + 1.0));
}

// face, u, v plus the 2x3 jacobian d(u,v)/d(dir). u and v are ratios
// of direction components, so they are invariant to the length of dir.
struct FaceUv {
    int face;
    Real u, v;
    Real du[3];
    Real dv[3];
};

FaceUv dir_to_face_uv_jac(const Vec3& d) {
    const Real ax = std::fabs(d.x), ay = std::fabs(d.y), az = std::fabs(d.z);
    FaceUv r{};
    // nu/nv: coordinate indices feeding u/v; su/sv: their signs;
    // mi: major-axis index; sm: sign of the major component.
    int nu, nv, mi;
    Real su, sv, sm;
    if (ax >= ay && ax >= az) {
        mi = 0;
        sm = d.x > 0 ? 1.0 : -1.0;
        nu = 2; su = d.x > 0 ? -1.0 : 1.0;
        nv = 1; sv = -1.0;
        r.face = d.x > 0 ? 0 : 1;
    } else if (ay >= az) {
        mi = 1;
        sm = d.y > 0 ? 1.0 : -1.0;
        nu = 0; su = 1.0;
        nv = 2; sv = d.y > 0 ? 1.0 : -1.0;
        r.face = d.y > 0 ? 2 : 3;
    } else {
        mi = 2;
        sm = d.z > 0 ? 1.0 : -1.0;
        nu = 0; su = d.z > 0 ? 1.0 : -1.0;
        nv = 1; sv = -1.0;
        r.face = d.z > 0 ? 4 : 5;
    }
    const Real am = sm * d[mi];
    r.u = su * d[nu] / am;
    r.v = sv * d[nv] / am;
    for (int i = 0; i < 3; ++i) {
        r.du[i] = 0;
        r.dv[i] = 0;
    }
    r.du[nu] = su / am;
    r.du[mi] = -r.u * sm / am;
    r.dv[nv] = sv / am;
    r.dv[mi] = -r.v * sm / am;
    return r;
}

}  // namespace

Cubemap::Cubemap(int res, const Vec3& fill) : res_(res) {
    if (res <= 0) throw InputError("cubemap: resolution must be positive");
    texels_.resize(size_t(6) * res * res * 3);
    for (size_t t = 0; t < texel_count(); ++t) set(t, fill);
}

Vec3 cube_face_uv_to_dir(int face, Real u, Real v) {
    Vec3 d;
    switch (face) {
        case 0: d = {1, -v, -u}; break;
        case 1: d = {-1, -v, u}; break;
        case 2: d = {u, 1, v}; break;
        case 3: d = {u, -1, -v}; break;
        case 4: d = {u, -v, 1}; break;
        default: d = {-u, -v, -1}; break;
    }
    return normalize(d);
}

void cube_dir_to_face_uv(const Vec3& dir, int* face, Real* u, Real* v) {
    const FaceUv r = dir_to_face_uv_jac(dir);
    *face = r.face;
    *u = r.u;
    *v = r.v;
}

Real cube_texel_solid_angle(int res, int tx, int ty) {
    const Real x0 = 2.0 * tx / res - 1.0;
    const Real x1 = 2.0 * (tx + 1) / res - 1.0;
    const Real y0 = 2.0 * ty / res - 1.0;
    const Real y1 = 2.0 * (ty + 1) / res - 1.0;
    return area_element(x1, y1) - area_element(x0, y1) - area_element(x1, y0) +
           area_element(x0, y0);
}

Vec3 Cubemap::texel_dir(int face, int x, int y) const {
    const Real u = (2.0 * x + 1.0) / res_ - 1.0;
    const Real v = (2.0 * y + 1.0) / res_ - 1.0;
    return cube_face_uv_to_dir(face, u, v);
}

Vec3 Cubemap::sample_nearest(const Vec3& dir) const {
    int face;
    Real u, v;
    cube_dir_to_face_uv(dir, &face, &u, &v);
    const int x = int(clamp(std::floor((u + 1.0) * 0.5 * res_), 0.0, Real(res_ - 1)));
    const int y = int(clamp(std::floor((v + 1.0) * 0.5 * res_), 0.0, Real(res_ - 1)));
    return get(face, x, y);
}

Vec3 Cubemap::sample_bilinear(const Vec3& dir) const {
    return sample_bilinear_grad(dir, nullptr);
}

Vec3 Cubemap::sample_bilinear_grad(const Vec3& dir, BilinearTaps* taps) const {
    const FaceUv fuv = dir_to_face_uv_jac(dir);

    // Continuous texel coordinates with centers at integers.
    const Real tx = (fuv.u + 1.0) * 0.5 * res_ - 0.5;
    const Real ty = (fuv.v + 1.0) * 0.5 * res_ - 0.5;
    Real fx = tx - std::floor(tx);
    Real fy = ty - std::floor(ty);
    int x0 = int(std::floor(tx)), y0 = int(std::floor(ty));
    int x1 = x0 + 1, y1 = y0 + 1;
    // Clamp-to-edge: collapse out-of-range taps and freeze the frozen
    // coordinate's interpolation weight (its derivative becomes zero).
    bool clamped_x = false, clamped_y = false;
    if (x0 < 0) { x0 = x1 = 0; fx = 0; clamped_x = true; }
    if (x1 > res_ - 1) { x0 = x1 = res_ - 1; fx = 0; clamped_x = true; }
    if (y0 < 0) { y0 = y1 = 0; fy = 0; clamped_y = true; }
    if (y1 > res_ - 1) { y0 = y1 = res_ - 1; fy = 0; clamped_y = true; }

    const Vec3 t00 = get(fuv.face, x0, y0);
    const Vec3 t10 = get(fuv.face, x1, y0);
    const Vec3 t01 = get(fuv.face, x0, y1);
    const Vec3 t11 = get(fuv.face, x1, y1);
    const Vec3 value = t00 * ((1 - fx) * (1 - fy)) + t10 * (fx * (1 - fy)) +
                       t01 * ((1 - fx) * fy) + t11 * (fx * fy);
    if (!taps) return value;

    taps->index = {texel_index(fuv.face, x0, y0), texel_index(fuv.face, x1, y0),
                   texel_index(fuv.face, x0, y1), texel_index(fuv.face, x1, y1)};
    taps->weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};

    const Vec3 dv_dtx = clamped_x ? Vec3{0, 0, 0}
                                  : (t10 - t00) * (1 - fy) + (t11 - t01) * fy;
    const Vec3 dv_dty = clamped_y ? Vec3{0, 0, 0}
                                  : (t01 - t00) * (1 - fx) + (t11 - t10) * fx;
    const Real scale = 0.5 * res_;  // d(tx)/d(u)
    for (int axis = 0; axis < 3; ++axis) {
        const Real dtx = scale * fuv.du[axis];
        const Real dty = scale * fuv.dv[axis];
        taps->dvalue_ddir.m[0][axis] = dv_dtx.x * dtx + dv_dty.x * dty;
        taps->dvalue_ddir.m[1][axis] = dv_dtx.y * dtx + dv_dty.y * dty;
        taps->dvalue_ddir.m[2][axis] = dv_dtx.z * dtx + dv_dty.z * dty;
    }
    return value;
}

std::vector<Vec3> cubemap_to_sh(const Cubemap& cube, int bands) {
    if (cube.empty()) throw InputError("cubemap_to_sh: empty cubemap");
    const int n = sh_coeff_count(bands);
    const int res = cube.resolution();
    std::vector<Vec3> coeffs(n, Vec3{0, 0, 0});
    std::vector<Real> basis(n);
    for (int face = 0; face < 6; ++face) {
        for (int y = 0; y < res; ++y) {
            for (int x = 0; x < res; ++x) {
                const Real w = cube_texel_solid_angle(res, x, y);
                sh_eval_basis(cube.texel_dir(face, x, y), bands, basis.data());
                const Vec3 radiance = cube.get(face, x, y);
                for (int j = 0; j < n; ++j) coeffs[j] += radiance * (w * basis[j]);
            }
        }
    }
    return coeffs;
}

std::vector<Vec3> cubemap_to_sh_backward(int res, int bands,
                                         const std::vector<Vec3>& grad_coeffs) {
    const int n = sh_coeff_count(bands);
    if (int(grad_coeffs.size()) != n)
        throw InputError("cubemap_to_sh_backward: coefficient gradient count mismatch");
    Cubemap geom(res);  // only used for texel directions
    std::vector<Vec3> grad(size_t(6) * res * res, Vec3{0, 0, 0});
    std::vector<Real> basis(n);
    for (int face = 0; face < 6; ++face) {
        for (int y = 0; y < res; ++y) {
            for (int x = 0; x < res; ++x) {
                const Real w = cube_texel_solid_angle(res, x, y);
                sh_eval_basis(geom.texel_dir(face, x, y), bands, basis.data());
                Vec3 g{0, 0, 0};
                for (int j = 0; j < n; ++j) g += grad_coeffs[j] * (w * basis[j]);
                grad[geom.texel_index(face, x, y)] = g;
            }
        }
    }
    return grad;
}

Cubemap cubemap_from_sh(const std::vector<Vec3>& coeffs, int res) {
    Cubemap cube(res);
    const int bands = int(std::sqrt(double(coeffs.size())) + 0.5);
    std::vector<Real> basis(coeffs.size());
    for (int face = 0; face < 6; ++face) {
        for (int y = 0; y < res; ++y) {
            for (int x = 0; x < res; ++x) {
                sh_eval_basis(cube.texel_dir(face, x, y), bands, basis.data());
                Vec3 v{0, 0, 0};
                for (size_t j = 0; j < coeffs.size(); ++j) v += coeffs[j] * basis[j];
                cube.set(face, x, y, v);
            }
        }
    }
    return cube;
}

}  // namespace rtr
