#include "rtr/ibl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "rtr/brdf.hpp"
#include "rtr/parallel.hpp"
#include "rtr/rng.hpp"
#include "rtr/sh.hpp"

namespace rtr {

namespace {

constexpr uint64_t kBrdfLutSeed = 0x5b5e1ab1a5ULL;
constexpr uint64_t kPrefilterSeed = 0x9e3779b97f4a7c15ULL;

// More samples for wider lobes; the coarsest (roughness 1) level gets
// the full budget.
int prefilter_sample_count(Real roughness) {
    return std::max(64, int(std::lround(1024.0 * roughness * roughness)));
}

// Bilinear tap indices/weights into a res x res cubemap for a lookup
// direction, matching Cubemap::sample_bilinear_grad's clamp-to-edge
// footprint (values ignored here, so no texel storage is needed).
void base_taps(int res, const Vec3& dir, int32_t idx[4], Real w[4]) {
    int face;
    Real u, v;
    cube_dir_to_face_uv(dir, &face, &u, &v);
    const Real tx = (u + 1.0) * 0.5 * res - 0.5;
    const Real ty = (v + 1.0) * 0.5 * res - 0.5;
    Real fx = tx - std::floor(tx);
    Real fy = ty - std::floor(ty);
    int x0 = int(std::floor(tx)), y0 = int(std::floor(ty));
    int x1 = x0 + 1, y1 = y0 + 1;
    if (x0 < 0) { x0 = x1 = 0; fx = 0; }
    if (x1 > res - 1) { x0 = x1 = res - 1; fx = 0; }
    if (y0 < 0) { y0 = y1 = 0; fy = 0; }
    if (y1 > res - 1) { y0 = y1 = res - 1; fy = 0; }
    const int32_t base = int32_t(face) * res * res;
    idx[0] = base + y0 * res + x0;
    idx[1] = base + y0 * res + x1;
    idx[2] = base + y1 * res + x0;
    idx[3] = base + y1 * res + x1;
    w[0] = (1 - fx) * (1 - fy);
    w[1] = fx * (1 - fy);
    w[2] = (1 - fx) * fy;
    w[3] = fx * fy;
}

// Normalized base-map taps defining one prefiltered texel at level k:
// GGX importance samples about the texel direction (n = v = r), each
// landing as a 4-tap bilinear footprint, cosine-weighted and merged.
void prefilter_row_taps(int base_res, int levels, int k, int face, int x, int y,
                        std::vector<std::pair<int32_t, Real>>* row) {
    const int res = base_res >> k;
    const Real roughness = Real(k) / (levels - 1);
    const Real u = (2.0 * x + 1.0) / res - 1.0;
    const Real v = (2.0 * y + 1.0) / res - 1.0;
    const Vec3 n = cube_face_uv_to_dir(face, u, v);
    const Mat3 frame = rotation_matrix(quat_from_z_to(n));
    const int n_samples = prefilter_sample_count(roughness);
    const Rng rng(kPrefilterSeed,
                  (uint64_t(k) << 40) | (uint64_t(face) << 32) | uint64_t(y * res + x));

    row->clear();
    Real w_sum = 0;
    int32_t idx[4];
    Real w[4];
    for (int s = 0; s < n_samples; ++s) {
        const Vec3 h = frame * ggx_sample_half(rng.uniform(2 * s), rng.uniform(2 * s + 1),
                                               roughness);
        const Vec3 i = h * (2 * dot(n, h)) - n;
        const Real wi = dot(n, i);
        if (wi <= 0) continue;
        base_taps(base_res, i, idx, w);
        for (int t = 0; t < 4; ++t) row->push_back({idx[t], w[t] * wi});
        w_sum += wi;
    }
    if (row->empty()) {
        base_taps(base_res, n, idx, w);
        for (int t = 0; t < 4; ++t) row->push_back({idx[t], w[t]});
        w_sum = 1;
    }

    // Merge duplicate columns; pair ordering makes the sums order-stable.
    std::sort(row->begin(), row->end());
    size_t out = 0;
    size_t i = 0;
    while (i < row->size()) {
        const int32_t col = (*row)[i].first;
        Real acc = 0;
        while (i < row->size() && (*row)[i].first == col) acc += (*row)[i++].second;
        (*row)[out++] = {col, acc / w_sum};
    }
    row->resize(out);
}

// d(u,v)/d(n) of the octahedral encode at n (valid away from the
// octant creases, where the map is not differentiable).
void octa_encode_jacobian(const Vec3& n, Real du[3], Real dv[3]) {
    const Real sx = n.x >= 0 ? 1.0 : -1.0;
    const Real sy = n.y >= 0 ? 1.0 : -1.0;
    const Real sz = n.z >= 0 ? 1.0 : -1.0;
    const Real l1 = std::fabs(n.x) + std::fabs(n.y) + std::fabs(n.z);
    const Real px = n.x / l1, py = n.y / l1;
    Real dpx[3] = {1 / l1 - px * sx / l1, -px * sy / l1, -px * sz / l1};
    Real dpy[3] = {-py * sx / l1, 1 / l1 - py * sy / l1, -py * sz / l1};
    if (n.z < 0) {
        // Fold: qx = (1-|py|) sgn(px), qy = (1-|px|) sgn(py).
        const Real spx = px >= 0 ? 1.0 : -1.0;
        const Real spy = py >= 0 ? 1.0 : -1.0;
        for (int a = 0; a < 3; ++a) {
            const Real qx = -spx * spy * dpy[a];
            const Real qy = -spy * spx * dpx[a];
            dpx[a] = qx;
            dpy[a] = qy;
        }
    }
    for (int a = 0; a < 3; ++a) {
        du[a] = 0.5 * dpx[a];
        dv[a] = 0.5 * dpy[a];
    }
}

}  // namespace

void brdf_integral(Real n_dot_v, Real roughness, int n_samples, uint64_t seed,
                   Real* out_a, Real* out_b) {
    const Real nv = clamp(n_dot_v, Real(1e-4), Real(1));
    const Vec3 v{std::sqrt(std::max(Real(0), 1 - nv * nv)), 0, nv};
    const Rng rng(seed, 0);
    // Jittered stratification when the count is a perfect square.
    const int side = int(std::lround(std::sqrt(Real(n_samples))));
    const bool strat = side * side == n_samples;
    Real a = 0, b = 0;
    for (int s = 0; s < n_samples; ++s) {
        Real u1 = rng.uniform(2 * s), u2 = rng.uniform(2 * s + 1);
        if (strat) {
            u1 = (s % side + u1) / side;
            u2 = (s / side + u2) / side;
        }
        const Vec3 h = ggx_sample_half(u1, u2, roughness);
        const Real vh = dot(v, h);
        const Vec3 i = h * (2 * vh) - v;
        if (i.z <= 1e-9 || vh <= 1e-9 || h.z <= 1e-9) continue;
        const Real g = smith_geometry(nv, i.z, roughness);
        const Real w = g * vh / (h.z * nv);
        const Real f = 1 - vh;
        const Real f2 = f * f;
        const Real fc = f2 * f2 * f;
        a += (1 - fc) * w;
        b += fc * w;
    }
    *out_a = a / n_samples;
    *out_b = b / n_samples;
}

void BrdfLut::build() {
    a.assign(size_t(kRes) * kRes, 0);
    b.assign(size_t(kRes) * kRes, 0);
    parallel_for(0, kRes * kRes, [&](int lo, int hi, int) {
        for (int idx = lo; idx < hi; ++idx) {
            const Real nv = (idx / kRes + 0.5) / kRes;
            const Real r = (idx % kRes + 0.5) / kRes;
            brdf_integral(nv, r, kSamples, kBrdfLutSeed + idx, &a[idx], &b[idx]);
            // The Schlick-style geometry constant overshoots at grazing
            // incidence; normalize texels into the physical energy bound
            // so scale + bias can never amplify the environment.
            a[idx] = clamp(a[idx], Real(0), Real(1));
            b[idx] = clamp(b[idx], Real(0), 1 - a[idx]);
        }
    });
}

void BrdfLut::sample(Real n_dot_v, Real roughness, Real* out_a, Real* out_b,
                     Real* da_dnv, Real* da_dr, Real* db_dnv, Real* db_dr) const {
    if (empty()) throw InputError("brdf lut: not built");
    const Real fx = clamp(n_dot_v, Real(0), Real(1)) * kRes - 0.5;
    const Real fy = clamp(roughness, Real(0), Real(1)) * kRes - 0.5;
    int x0 = int(std::floor(fx)), y0 = int(std::floor(fy));
    const Real tx = fx - x0, ty = fy - y0;
    const int x1 = std::min(x0 + 1, kRes - 1), y1 = std::min(y0 + 1, kRes - 1);
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    const auto lerp2 = [&](const std::vector<Real>& t, Real* d_dnv, Real* d_dr) {
        const Real t00 = t[size_t(x0) * kRes + y0], t10 = t[size_t(x1) * kRes + y0];
        const Real t01 = t[size_t(x0) * kRes + y1], t11 = t[size_t(x1) * kRes + y1];
        if (d_dnv) *d_dnv = ((t10 - t00) * (1 - ty) + (t11 - t01) * ty) * kRes;
        if (d_dr) *d_dr = ((t01 - t00) * (1 - tx) + (t11 - t10) * tx) * kRes;
        return t00 * (1 - tx) * (1 - ty) + t10 * tx * (1 - ty) + t01 * (1 - tx) * ty +
               t11 * tx * ty;
    };
    *out_a = lerp2(a, da_dnv, da_dr);
    *out_b = lerp2(b, db_dnv, db_dr);
}

int prefilter_levels(int base_res) {
    if (base_res < 4 || (base_res & (base_res - 1)) != 0)
        throw InputError("prefilter: cubemap resolution must be a power of two >= 4");
    int levels = 1;
    for (int r = base_res; r > 4; r >>= 1) ++levels;
    return levels;
}

void PrefilterOperator::build(int base_res_in, int levels_in) {
    if (levels_in < 1) throw InputError("prefilter: need at least one level");
    if (base_res_in < 1 || (base_res_in & (base_res_in - 1)) != 0)
        throw InputError("prefilter: cubemap resolution must be a power of two");
    if ((base_res_in >> (levels_in - 1)) < 1)
        throw InputError("prefilter: too many levels for resolution");
    base_res = base_res_in;
    levels = levels_in;
    level.assign(levels, {});
    for (int k = 1; k < levels; ++k) {
        Level& lv = level[k];
        lv.res = base_res >> k;
        const int n_rows = 6 * lv.res * lv.res;
        std::vector<std::vector<std::pair<int32_t, Real>>> rows(n_rows);
        parallel_for(0, n_rows, [&](int lo, int hi, int) {
            std::vector<std::pair<int32_t, Real>> tmp;
            for (int row = lo; row < hi; ++row) {
                const int face = row / (lv.res * lv.res);
                const int rem = row % (lv.res * lv.res);
                prefilter_row_taps(base_res, levels, k, face, rem % lv.res, rem / lv.res,
                                   &tmp);
                rows[row] = tmp;
            }
        });
        size_t total = 0;
        for (const auto& r : rows) total += r.size();
        lv.row_offset.resize(n_rows + 1);
        lv.col.resize(total);
        lv.w.resize(total);
        size_t at = 0;
        for (int row = 0; row < n_rows; ++row) {
            lv.row_offset[row] = int64_t(at);
            for (const auto& e : rows[row]) {
                lv.col[at] = e.first;
                lv.w[at] = e.second;
                ++at;
            }
        }
        lv.row_offset[n_rows] = int64_t(at);
    }
}

void PrefilterOperator::apply(Cubemap* cube) const {
    if (cube->resolution() != base_res)
        throw InputError("prefilter: operator built for a different resolution");
    auto& mips = cube->mips();
    bool reuse = int(mips.size()) == levels;
    for (int k = 0; reuse && k < levels; ++k)
        reuse = mips[k].resolution() == (base_res >> k);
    if (!reuse) {
        mips.clear();
        mips.resize(levels);
        for (int k = 0; k < levels; ++k) mips[k] = Cubemap(base_res >> k);
    }
    std::memcpy(mips[0].raw(), cube->raw(), sizeof(float) * cube->texel_count() * 3);
    for (int k = 1; k < levels; ++k) {
        const Level& lv = level[k];
        Cubemap& out = mips[k];
        const int n_rows = 6 * lv.res * lv.res;
        parallel_for(0, n_rows, [&](int lo, int hi, int) {
            for (int row = lo; row < hi; ++row) {
                Vec3 acc{0, 0, 0};
                for (int64_t e = lv.row_offset[row]; e < lv.row_offset[row + 1]; ++e)
                    acc += cube->get(size_t(lv.col[e])) * lv.w[e];
                out.set(size_t(row), acc);
            }
        });
    }
}

void PrefilterOperator::backward(const std::vector<std::vector<Vec3>>& grad_mips,
                                 std::vector<Vec3>* grad_base) const {
    const size_t n_base = size_t(6) * base_res * base_res;
    if (grad_base->empty()) grad_base->assign(n_base, Vec3{0, 0, 0});
    if (grad_base->size() != n_base)
        throw InputError("prefilter backward: gradient buffer size mismatch");
    if (int(grad_mips.size()) > levels)
        throw InputError("prefilter backward: more gradient levels than mips");
    for (size_t k = 0; k < grad_mips.size(); ++k) {
        const auto& g = grad_mips[k];
        if (g.empty()) continue;
        if (k == 0) {
            if (g.size() != n_base)
                throw InputError("prefilter backward: level 0 gradient size mismatch");
            for (size_t t = 0; t < n_base; ++t) (*grad_base)[t] += g[t];
            continue;
        }
        const Level& lv = level[k];
        const size_t n_rows = size_t(6) * lv.res * lv.res;
        if (g.size() != n_rows)
            throw InputError("prefilter backward: gradient size mismatch");
        for (size_t row = 0; row < n_rows; ++row) {
            const Vec3& gr = g[row];
            if (gr.x == 0 && gr.y == 0 && gr.z == 0) continue;
            for (int64_t e = lv.row_offset[row]; e < lv.row_offset[row + 1]; ++e)
                (*grad_base)[size_t(lv.col[e])] += gr * lv.w[e];
        }
    }
}

void prefilter_cubemap(Cubemap* cube, int levels) {
    if (cube->empty()) throw InputError("prefilter: empty cubemap");
    PrefilterOperator op;
    op.build(cube->resolution(), levels);
    op.apply(cube);
}

Vec3 sample_prefiltered(const Cubemap& cube, const Vec3& dir, Real roughness,
                        MipTaps* taps) {
    const auto& mips = cube.mips();
    if (mips.empty()) throw InputError("sample_prefiltered: cubemap has no mip chain");
    const int n_levels = int(mips.size());
    const Real lf = clamp(roughness, Real(0), Real(1)) * (n_levels - 1);
    const int k0 = std::min(int(std::floor(lf)), n_levels - 1);
    const int k1 = std::min(k0 + 1, n_levels - 1);
    const Real t = lf - k0;

    Cubemap::BilinearTaps t0, t1;
    const Vec3 v0 = mips[k0].sample_bilinear_grad(dir, &t0);
    Vec3 v1 = v0;
    if (k1 != k0) {
        v1 = mips[k1].sample_bilinear_grad(dir, &t1);
    } else {
        t1 = t0;
    }
    const Vec3 value = v0 * (1 - t) + v1 * t;
    if (taps) {
        taps->level0 = k0;
        taps->level1 = k1;
        taps->t = t;
        taps->taps0 = t0;
        taps->taps1 = t1;
        taps->v0 = v0;
        taps->v1 = v1;
        taps->dvalue_ddir = t0.dvalue_ddir * (1 - t) + t1.dvalue_ddir * t;
        taps->dvalue_droughness = (v1 - v0) * Real(n_levels - 1);
    }
    return value;
}

void IrradianceTexture::octa_encode(const Vec3& n, Real* u, Real* v) {
    const Real l1 = std::fabs(n.x) + std::fabs(n.y) + std::fabs(n.z);
    Real px = n.x / l1, py = n.y / l1;
    if (n.z < 0) {
        const Real qx = (1 - std::fabs(py)) * (px >= 0 ? 1.0 : -1.0);
        const Real qy = (1 - std::fabs(px)) * (py >= 0 ? 1.0 : -1.0);
        px = qx;
        py = qy;
    }
    *u = px * 0.5 + 0.5;
    *v = py * 0.5 + 0.5;
}

Vec3 IrradianceTexture::octa_decode(Real u, Real v) {
    Real fx = u * 2 - 1, fy = v * 2 - 1;
    const Real fz = 1 - std::fabs(fx) - std::fabs(fy);
    if (fz < 0) {
        const Real qx = (1 - std::fabs(fy)) * (fx >= 0 ? 1.0 : -1.0);
        const Real qy = (1 - std::fabs(fx)) * (fy >= 0 ? 1.0 : -1.0);
        fx = qx;
        fy = qy;
    }
    return normalize(Vec3{fx, fy, fz});
}

Vec3 IrradianceTexture::texel_dir(int x, int y) {
    return octa_decode((x + 0.5) / kRes, (y + 0.5) / kRes);
}

void IrradianceTexture::octa_wrap(int* x, int* y) {
    if (*x < 0) {
        *x = -1 - *x;
        *y = kRes - 1 - *y;
    } else if (*x >= kRes) {
        *x = 2 * kRes - 1 - *x;
        *y = kRes - 1 - *y;
    }
    if (*y < 0) {
        *y = -1 - *y;
        *x = kRes - 1 - *x;
    } else if (*y >= kRes) {
        *y = 2 * kRes - 1 - *y;
        *x = kRes - 1 - *x;
    }
}

Vec3 IrradianceTexture::sample(const Vec3& n, Taps* taps) const {
    if (empty()) throw InputError("irradiance: texture not built");
    Real u, v;
    octa_encode(n, &u, &v);
    const Real txc = u * kRes - 0.5, tyc = v * kRes - 0.5;
    const int x0 = int(std::floor(txc)), y0 = int(std::floor(tyc));
    const Real fx = txc - x0, fy = tyc - y0;
    Vec3 t[2][2];
    int flat[2][2];
    for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
            int x = x0 + i, y = y0 + j;
            octa_wrap(&x, &y);
            flat[j][i] = y * kRes + x;
            t[j][i] = {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
        }
    }
    const Vec3 value = t[0][0] * ((1 - fx) * (1 - fy)) + t[0][1] * (fx * (1 - fy)) +
                       t[1][0] * ((1 - fx) * fy) + t[1][1] * (fx * fy);
    if (!taps) return value;

    taps->texel = {flat[0][0], flat[0][1], flat[1][0], flat[1][1]};
    taps->weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const Vec3 dv_du = ((t[0][1] - t[0][0]) * (1 - fy) + (t[1][1] - t[1][0]) * fy) *
                       Real(kRes);
    const Vec3 dv_dv = ((t[1][0] - t[0][0]) * (1 - fx) + (t[1][1] - t[0][1]) * fx) *
                       Real(kRes);
    Real du[3], dv[3];
    octa_encode_jacobian(n, du, dv);
    for (int a = 0; a < 3; ++a) {
        taps->dvalue_dn.m[0][a] = dv_du.x * du[a] + dv_dv.x * dv[a];
        taps->dvalue_dn.m[1][a] = dv_du.y * du[a] + dv_dv.y * dv[a];
        taps->dvalue_dn.m[2][a] = dv_du.z * du[a] + dv_dv.z * dv[a];
    }
    return value;
}

IrradianceTexture build_irradiance(const std::vector<Vec3>& env_sh) {
    if (int(env_sh.size()) < sh_coeff_count(3))
        throw InputError("build_irradiance: need 9 SH coefficients");
    // Clamped-cosine kernel per band: convolving radiance SH with these
    // zonal factors yields irradiance.
    const Real band_a[3] = {kPi, 2 * kPi / 3, kPi / 4};
    IrradianceTexture tex;
    tex.img = Image(IrradianceTexture::kRes, IrradianceTexture::kRes, 3);
    Real basis[9];
    for (int y = 0; y < IrradianceTexture::kRes; ++y) {
        for (int x = 0; x < IrradianceTexture::kRes; ++x) {
            sh_eval_basis(IrradianceTexture::texel_dir(x, y), 3, basis);
            Vec3 val{0, 0, 0};
            for (int j = 0; j < 9; ++j) {
                const int l = j < 1 ? 0 : (j < 4 ? 1 : 2);
                val += env_sh[j] * (band_a[l] * basis[j]);
            }
            for (int c = 0; c < 3; ++c)
                tex.img.at(x, y, c) = std::max(Real(0), val[c]);
        }
    }
    return tex;
}

void build_irradiance_backward(const std::vector<Vec3>& env_sh,
                               const Image& grad_texture,
                               std::vector<Vec3>* grad_env_sh) {
    if (int(env_sh.size()) < sh_coeff_count(3))
        throw InputError("build_irradiance: need 9 SH coefficients");
    if (grad_texture.width() != IrradianceTexture::kRes ||
        grad_texture.height() != IrradianceTexture::kRes ||
        grad_texture.channels() != 3)
        throw InputError("build_irradiance: texel gradient shape mismatch");
    if (int(grad_env_sh->size()) < 9) grad_env_sh->resize(9, Vec3{0, 0, 0});
    const Real band_a[3] = {kPi, 2 * kPi / 3, kPi / 4};
    Real basis[9];
    for (int y = 0; y < IrradianceTexture::kRes; ++y) {
        for (int x = 0; x < IrradianceTexture::kRes; ++x) {
            sh_eval_basis(IrradianceTexture::texel_dir(x, y), 3, basis);
            Vec3 val{0, 0, 0};
            for (int j = 0; j < 9; ++j) {
                const int l = j < 1 ? 0 : (j < 4 ? 1 : 2);
                val += env_sh[j] * (band_a[l] * basis[j]);
            }
            // Texels clamped to zero at build time pass no gradient.
            const Vec3 g = grad_texture.rgb(x, y);
            const Vec3 gated{val.x > 0 ? g.x : 0, val.y > 0 ? g.y : 0,
                             val.z > 0 ? g.z : 0};
            for (int j = 0; j < 9; ++j) {
                const int l = j < 1 ? 0 : (j < 4 ? 1 : 2);
                (*grad_env_sh)[j] += gated * (band_a[l] * basis[j]);
            }
        }
    }
}

Cubemap cubemap_from_equirect(const Image& img, int res) {
    if (img.data_size() == 0) throw InputError("equirect import: empty image");
    if (img.channels() != 3) throw InputError("equirect import: image must have 3 channels");
    const int w = img.width(), h = img.height();
    Cubemap cube(res);
    for (int face = 0; face < 6; ++face) {
        for (int y = 0; y < res; ++y) {
            for (int x = 0; x < res; ++x) {
                const Vec3 d = cube.texel_dir(face, x, y);
                const Real theta = std::acos(clamp(d.y, Real(-1), Real(1)));
                const Real phi = std::atan2(d.x, -d.z);
                const Real fu = (phi / kTwoPi + 0.5) * w - 0.5;
                const Real fv = (theta / kPi) * h - 0.5;
                const int u0 = int(std::floor(fu)), v0 = int(std::floor(fv));
                const Real tu = fu - u0, tv = fv - v0;
                const int ua = ((u0 % w) + w) % w, ub = (ua + 1) % w;
                const int va = std::min(std::max(v0, 0), h - 1);
                const int vb = std::min(std::max(v0 + 1, 0), h - 1);
                Vec3 acc{0, 0, 0};
                const int us[2] = {ua, ub};
                const int vs[2] = {va, vb};
                const Real wu[2] = {1 - tu, tu};
                const Real wv[2] = {1 - tv, tv};
                for (int j = 0; j < 2; ++j)
                    for (int i = 0; i < 2; ++i)
                        acc += img.rgb(us[i], vs[j]) * (wu[i] * wv[j]);
                cube.set(face, x, y, acc);
            }
        }
    }
    return cube;
}

}  // namespace rtr
