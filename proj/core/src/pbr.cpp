#include "rtr/pbr.hpp"

#include <cmath>

#include "rtr/brdf.hpp"
#include "rtr/parallel.hpp"
#include "rtr/raster.hpp"
#include "rtr/sh.hpp"

namespace rtr {

namespace {

constexpr int kFaces = 6;

}  // namespace

VisibilityGrid bake_visibility(const std::vector<GaussianSplat>& splats,
                               const BakeConfig& cfg) {
    if (cfg.grid_res < 1 || cfg.face_res < 4)
        throw InputError("visibility bake: invalid grid or face resolution");
    VisibilityGrid grid;
    grid.res = cfg.grid_res;

    Vec3 lo{-1, -1, -1}, hi{1, 1, 1};
    if (!splats.empty()) {
        lo = hi = splats[0].position;
        for (const GaussianSplat& s : splats) {
            lo = min(lo, s.position);
            hi = max(hi, s.position);
        }
    }
    const Vec3 extent = hi - lo;
    const Vec3 margin{std::max(extent.x * cfg.dilate * 0.5, 1e-3),
                      std::max(extent.y * cfg.dilate * 0.5, 1e-3),
                      std::max(extent.z * cfg.dilate * 0.5, 1e-3)};
    grid.bbox_min = lo - margin;
    grid.bbox_max = hi + margin;
    grid.sh.assign(grid.voxel_count() * VisibilityGrid::kCoeffs, 0.0f);

    // Occupancy faces are rendered by compositing each splat's peak
    // response along the exact texel ray. Tile splatting is unusable
    // here: its planar affine projection saturates whole faces when a
    // splat sits within a few sigma of the camera, and voxels next to
    // surfaces (where shading queries the grid) are exactly that case.
    struct Occluder {
        Vec3 mu;
        Mat3 minv;      // world-space inverse covariance
        Vec3 minv_mu;   // cached minv * (mu - center), filled per voxel
        Real alpha = 0;
        Real q0 = 0;    // cached Mahalanobis form at the voxel center
        Real rsup2 = 0; // squared Euclidean support radius
    };
    const Real alpha_max = RasterConfig{}.alpha_max;
    std::vector<Occluder> occ(splats.size());
    for (size_t i = 0; i < splats.size(); ++i) {
        const GaussianSplat& s = splats[i];
        const Mat3 r = rotation_matrix(s.rotation);
        Mat3 sinv2{};
        Real smax = 0;
        for (int a = 0; a < 3; ++a) {
            const Real sa = std::exp(s.log_scale[a]);
            smax = std::max(smax, sa);
            sinv2.m[a][a] = 1.0 / (sa * sa);
        }
        occ[i].mu = s.position;
        occ[i].minv = r * sinv2 * r.transposed();
        occ[i].alpha = std::min(alpha_max, sigmoid(s.opacity_logit));
        occ[i].rsup2 = (3.5 * smax) * (3.5 * smax);  // alpha tail < 2.2e-3
    }

    // Texel ray directions are shared by every voxel.
    const Cubemap geom(cfg.face_res);
    const int texels_per_face = cfg.face_res * cfg.face_res;
    std::vector<Vec3> dirs(size_t(kFaces) * texels_per_face);
    for (int face = 0; face < kFaces; ++face)
        for (int y = 0; y < cfg.face_res; ++y)
            for (int x = 0; x < cfg.face_res; ++x)
                dirs[size_t(face) * texels_per_face + y * cfg.face_res + x] =
                    geom.texel_dir(face, x, y);
    const Vec3 face_fwd[kFaces] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                   {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
    const Real cos_diag = 1.0 / std::sqrt(3.0);      // face half-diagonal
    const Real sin_diag = std::sqrt(2.0 / 3.0);

    parallel_for(0, int64_t(grid.voxel_count()), [&](int64_t v0, int64_t v1, int) {
        std::vector<Real> ln_t(dirs.size());
        std::vector<Occluder> local = occ;
        for (int64_t v = v0; v < v1; ++v) {
            const int ix = int(v % grid.res);
            const int iy = int((v / grid.res) % grid.res);
            const int iz = int(v / (int64_t(grid.res) * grid.res));
            const Vec3 center = grid.voxel_center(ix, iy, iz);
            std::fill(ln_t.begin(), ln_t.end(), 0.0);
            for (Occluder& o : local) {
                const Vec3 delta = o.mu - center;
                const Real dist2 = dot(delta, delta);
                o.minv_mu = o.minv * delta;
                o.q0 = dot(delta, o.minv_mu);
                const bool inside = dist2 <= o.rsup2;
                Real cos_gate = -2.0;  // keep every face when inside the support
                if (!inside) {
                    // Cap around the splat direction plus the face
                    // half-diagonal: faces outside it cannot be touched.
                    const Real sin_cap = std::sqrt(std::min(1.0, o.rsup2 / dist2));
                    const Real cos_cap = std::sqrt(std::max(0.0, 1.0 - sin_cap * sin_cap));
                    cos_gate = cos_cap * cos_diag - sin_cap * sin_diag;
                }
                const Real inv_dist = inside ? 0.0 : 1.0 / std::sqrt(dist2);
                for (int face = 0; face < kFaces; ++face) {
                    if (!inside && dot(delta, face_fwd[face]) * inv_dist < cos_gate)
                        continue;
                    const size_t base = size_t(face) * texels_per_face;
                    for (int t = 0; t < texels_per_face; ++t) {
                        const Vec3& d = dirs[base + t];
                        const Real along = dot(delta, d);
                        if (!inside) {
                            if (along <= 0) continue;  // behind the ray
                            if (dist2 - along * along > o.rsup2) continue;
                        }
                        // Peak response of the Gaussian along the ray.
                        const Real dmd = dot(d, o.minv * d);
                        const Real t_peak = dot(o.minv_mu, d) / dmd;
                        if (t_peak <= 1e-4) continue;
                        const Real q = std::max(0.0, o.q0 - t_peak * t_peak * dmd);
                        if (q > 25.0) continue;  // alpha below 4e-6
                        const Real a = std::min(alpha_max, o.alpha * std::exp(-0.5 * q));
                        ln_t[base + t] += std::log1p(-a);
                    }
                }
            }
            Cubemap occupancy(cfg.face_res);
            for (int face = 0; face < kFaces; ++face)
                for (int y = 0; y < cfg.face_res; ++y)
                    for (int x = 0; x < cfg.face_res; ++x)
                        occupancy.set(face, x, y,
                                      Vec3(std::exp(ln_t[size_t(face) * texels_per_face +
                                                         y * cfg.face_res + x])));
            const std::vector<Vec3> coeffs =
                cubemap_to_sh(occupancy, VisibilityGrid::kBands);
            float* rec = &grid.sh[size_t(v) * VisibilityGrid::kCoeffs];
            for (int j = 0; j < VisibilityGrid::kCoeffs; ++j) rec[j] = float(coeffs[j].x);
        }
    });
    return grid;
}

Real query_visibility(const VisibilityGrid& grid, const Vec3& x, const Vec3& n) {
    if (grid.empty()) return 1.0;
    for (int a = 0; a < 3; ++a) {
        if (x[a] < grid.bbox_min[a] || x[a] > grid.bbox_max[a]) return 1.0;
    }
    const Vec3 cell = (grid.bbox_max - grid.bbox_min) / Real(grid.res);
    Real record[VisibilityGrid::kCoeffs] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
    int i0[3], i1[3];
    Real fr[3];
    for (int a = 0; a < 3; ++a) {
        const Real f = (x[a] - grid.bbox_min[a]) / cell[a] - 0.5;
        const Real fl = std::floor(f);
        fr[a] = f - fl;
        // Outside the first/last voxel centers both neighbors clamp to
        // the same record, which extrapolates the edge value.
        i0[a] = std::max(0, std::min(grid.res - 1, int(fl)));
        i1[a] = std::max(0, std::min(grid.res - 1, int(fl) + 1));
    }
    for (int dz = 0; dz < 2; ++dz) {
        for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
                const Real w = (dx ? fr[0] : 1 - fr[0]) * (dy ? fr[1] : 1 - fr[1]) *
                               (dz ? fr[2] : 1 - fr[2]);
                if (w == 0) continue;
                const float* rec = &grid.sh[grid.voxel_offset(
                    dx ? i1[0] : i0[0], dy ? i1[1] : i0[1], dz ? i1[2] : i0[2])];
                for (int j = 0; j < VisibilityGrid::kCoeffs; ++j)
                    record[j] += w * Real(rec[j]);
            }
        }
    }
    const std::vector<Real> cosine = sh_clamped_cosine(normalize(n), kShBands);
    Real v = 0;
    for (int j = 0; j < VisibilityGrid::kCoeffs; ++j) v += record[j] * cosine[j];
    return clamp(v / kPi, Real(0), Real(1));
}

Vec3 microfacet_eval(const Vec3& n, const Vec3& v, const Vec3& i, const Vec3& albedo,
                     Real metallic, Real roughness) {
    const Vec3 h = normalize(v + i);
    const Real n_dot_v = std::max(dot(n, v), Real(1e-6));
    const Real n_dot_i = std::max(dot(n, i), Real(1e-6));
    const Real d = ggx_distribution(dot(n, h), roughness);
    const Vec3 f0 = Vec3(0.04 * (1 - metallic)) + albedo * metallic;
    const Vec3 f = fresnel_schlick(std::max(Real(0), dot(h, v)), f0);
    const Real g = smith_geometry(n_dot_v, n_dot_i, roughness);
    return f * (d * g / (4 * n_dot_v * n_dot_i));
}

Vec3 pbr_diffuse(const Vec3& albedo, Real metallic, const Vec3& n, const Vec3& x,
                 const Vec3& indirect, const VisibilityGrid& grid,
                 const IrradianceTexture& irradiance) {
    const Real v = query_visibility(grid, x, n);
    const Vec3 direct = irradiance.sample(normalize(n));
    return albedo * (direct * v + indirect * (1 - v)) * (kInvPi * (1 - metallic));
}

Vec3 pbr_specular(const Vec3& n, const Vec3& v, const Vec3& albedo, Real metallic,
                  Real roughness, const Vec3& x, const Cubemap& env_prefiltered,
                  const BrdfLut& lut, const VisibilityGrid& grid, bool spec_occlusion) {
    const Vec3 nn = normalize(n);
    const Real n_dot_v = dot(nn, v);
    if (n_dot_v <= 1e-6) return {0, 0, 0};
    const Vec3 rdir = reflect(v, nn);
    const Vec3 pref = sample_prefiltered(env_prefiltered, rdir, roughness);
    Real a, b;
    lut.sample(n_dot_v, roughness, &a, &b);
    const Vec3 f0 = Vec3(0.04 * (1 - metallic)) + albedo * metallic;
    Vec3 out = (f0 * a + Vec3(b)) * pref;
    if (spec_occlusion) out *= query_visibility(grid, x, rdir);
    return out;
}

void PbrGBufferGrads::init(int w, int h) {
    normal = Image(w, h, 3);
    albedo = Image(w, h, 3);
    metallic = Image(w, h, 1);
    rough = Image(w, h, 1);
    indirect = Image(w, h, 3);
}

namespace {

void require_pbr_gbuffer(const PbrGBuffer& g) {
    const int w = g.alpha.width(), h = g.alpha.height();
    if (w <= 0 || h <= 0) throw InputError("deferred shading: empty G-buffer");
    const auto bad = [&](const Image& img, int ch) {
        return img.width() != w || img.height() != h || img.channels() != ch;
    };
    if (bad(g.normal, 3) || bad(g.albedo, 3) || bad(g.metallic, 1) ||
        bad(g.rough, 1) || bad(g.indirect, 3) || bad(g.depth, 1) || bad(g.alpha, 1))
        throw InputError("deferred shading: G-buffer plane shapes disagree");
}

void require_pbr_inputs(const Cubemap& env, const BrdfLut& lut,
                        const VisibilityGrid& grid) {
    if (!env.has_mips())
        throw InputError("shading: environment map has no prefiltered mip chain");
    if (lut.empty()) throw InputError("shading: scale/bias table not built");
    if (grid.empty())
        throw InputError(
            "shading: no visibility grid; bake visibility first (rtr bake)");
}

/// World-space surface point of a pixel at the given camera depth.
Vec3 surface_point(const Camera& cam, int x, int y, Real depth) {
    const Vec3 dc{(x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0};
    return cam.position() + cam.R.tmul(dc) * depth;
}

}  // namespace

Image pbr_shade(const PbrGBuffer& g, const Camera& cam, const Cubemap& env_prefiltered,
                const IrradianceTexture& irradiance, const BrdfLut& lut,
                const VisibilityGrid& grid, const PbrShadeConfig& cfg) {
    require_pbr_gbuffer(g);
    require_pbr_inputs(env_prefiltered, lut, grid);
    if (irradiance.empty()) throw InputError("shading: irradiance texture not built");
    const int w = g.alpha.width(), h = g.alpha.height();
    Image out(w, h, 3);
    parallel_for(0, h, [&](int64_t y0, int64_t y1, int) {
        for (int64_t y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                if (g.alpha.at(x, int(y), 0) < 0.5) {
                    out.set_rgb(x, int(y), cfg.background);
                    continue;
                }
                const Vec3 n_raw = g.normal.rgb(x, int(y));
                const Real len = length(n_raw);
                if (len < 1e-9) {
                    out.set_rgb(x, int(y), cfg.background);
                    continue;
                }
                const Vec3 n = n_raw / len;
                const Vec3 v = -cam.ray_dir(x + 0.5, y + 0.5);
                const Vec3 p = surface_point(cam, x, int(y), g.depth.at(x, int(y), 0));
                const Vec3 albedo = g.albedo.rgb(x, int(y));
                const Real m = g.metallic.at(x, int(y), 0);
                const Real r = g.rough.at(x, int(y), 0);
                const Vec3 diffuse = pbr_diffuse(albedo, m, n, p,
                                                 g.indirect.rgb(x, int(y)), grid,
                                                 irradiance);
                const Vec3 specular =
                    pbr_specular(n, v, albedo, m, r, p, env_prefiltered, lut, grid,
                                 cfg.spec_occlusion);
                out.set_rgb(x, int(y), diffuse + specular);
            }
        }
    });
    return out;
}

void pbr_shade_backward(const PbrGBuffer& g, const Camera& cam,
                        const Cubemap& env_prefiltered,
                        const IrradianceTexture& irradiance, const BrdfLut& lut,
                        const VisibilityGrid& grid, const PbrShadeConfig& cfg,
                        const Image& grad_out, PbrGBufferGrads* grads,
                        std::vector<std::vector<Vec3>>* grad_env_mips,
                        Image* grad_irradiance) {
    require_pbr_gbuffer(g);
    require_pbr_inputs(env_prefiltered, lut, grid);
    if (irradiance.empty()) throw InputError("shading: irradiance texture not built");
    const int w = g.alpha.width(), h = g.alpha.height();
    if (grad_out.width() != w || grad_out.height() != h || grad_out.channels() != 3)
        throw InputError("shading: gradient image shape mismatch");

    const std::vector<Cubemap>& mips = env_prefiltered.mips();
    const int n_levels = int(mips.size());
    if (grad_env_mips) {
        grad_env_mips->resize(n_levels);
        for (int k = 0; k < n_levels; ++k) {
            const size_t n = size_t(6) * mips[k].resolution() * mips[k].resolution();
            if ((*grad_env_mips)[k].size() != n)
                (*grad_env_mips)[k].assign(n, Vec3{0, 0, 0});
        }
    }
    if (grad_irradiance && grad_irradiance->data_size() == 0) {
        *grad_irradiance =
            Image(IrradianceTexture::kRes, IrradianceTexture::kRes, 3);
    }

    // Shared-texture gradients (env mips, irradiance texels) gather per
    // chunk and reduce in chunk order; per-pixel planes are disjoint.
    const int n_chunks = thread_count();
    std::vector<std::vector<std::vector<Vec3>>> chunk_mips(
        grad_env_mips ? n_chunks : 0);
    std::vector<Image> chunk_irr(grad_irradiance ? n_chunks : 0);
    parallel_for(0, h, [&](int64_t y0, int64_t y1, int chunk) {
        std::vector<std::vector<Vec3>>* local_mips = nullptr;
        Image* local_irr = nullptr;
        if (grad_env_mips) {
            local_mips = &chunk_mips[chunk];
            local_mips->resize(n_levels);
            for (int k = 0; k < n_levels; ++k)
                (*local_mips)[k].assign(
                    size_t(6) * mips[k].resolution() * mips[k].resolution(),
                    Vec3{0, 0, 0});
        }
        if (grad_irradiance) {
            chunk_irr[chunk] =
                Image(IrradianceTexture::kRes, IrradianceTexture::kRes, 3);
            local_irr = &chunk_irr[chunk];
        }
        for (int64_t y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                if (g.alpha.at(x, int(y), 0) < 0.5) continue;
                const Vec3 n_raw = g.normal.rgb(x, int(y));
                const Real len = length(n_raw);
                if (len < 1e-9) continue;
                const Vec3 n = n_raw / len;
                const Vec3 v = -cam.ray_dir(x + 0.5, y + 0.5);
                const Vec3 p = surface_point(cam, x, int(y), g.depth.at(x, int(y), 0));
                const Vec3 albedo = g.albedo.rgb(x, int(y));
                const Real m = g.metallic.at(x, int(y), 0);
                const Real r = g.rough.at(x, int(y), 0);
                const Vec3 indirect = g.indirect.rgb(x, int(y));
                const Vec3 gout = grad_out.rgb(x, int(y));

                Vec3 g_n{0, 0, 0};
                // Diffuse lobe.
                {
                    const Real vis = query_visibility(grid, p, n);
                    IrradianceTexture::Taps taps;
                    const Vec3 direct = irradiance.sample(n, &taps);
                    const Vec3 base = direct * vis + indirect * (1 - vis);
                    const Real s = kInvPi * (1 - m);
                    if (grads) {
                        grads->albedo.add_rgb(x, int(y), gout * base * s);
                        grads->metallic.at(x, int(y), 0) +=
                            dot(gout, albedo * base) * -kInvPi;
                        grads->indirect.add_rgb(x, int(y),
                                                gout * albedo * (s * (1 - vis)));
                    }
                    const Vec3 g_direct = gout * albedo * (s * vis);
                    if (local_irr) {
                        for (int t = 0; t < 4; ++t) {
                            const int ty = taps.texel[t] / IrradianceTexture::kRes;
                            const int tx = taps.texel[t] % IrradianceTexture::kRes;
                            local_irr->add_rgb(tx, ty, g_direct * taps.weight[t]);
                        }
                    }
                    g_n += taps.dvalue_dn.tmul(g_direct);
                }
                // Specular lobe.
                const Real n_dot_v = dot(n, v);
                if (n_dot_v > 1e-6) {
                    const Vec3 rdir = reflect(v, n);
                    MipTaps taps;
                    const Vec3 pref =
                        sample_prefiltered(env_prefiltered, rdir, r, &taps);
                    Real a, b, da_dnv, da_dr, db_dnv, db_dr;
                    lut.sample(n_dot_v, r, &a, &b, &da_dnv, &da_dr, &db_dnv, &db_dr);
                    const Vec3 f0 = Vec3(0.04 * (1 - m)) + albedo * m;
                    const Vec3 w3 = f0 * a + Vec3(b);
                    const Real vis_s =
                        cfg.spec_occlusion ? query_visibility(grid, p, rdir) : 1.0;
                    const Vec3 gs = gout * vis_s;

                    const Real g_a = dot(gs * pref, f0);
                    const Real g_b = dot(gs, pref);
                    if (grads) {
                        const Vec3 g_f0 = gs * pref * a;
                        grads->albedo.add_rgb(x, int(y), g_f0 * m);
                        grads->metallic.at(x, int(y), 0) +=
                            dot(g_f0, albedo - Vec3(0.04));
                        grads->rough.at(x, int(y), 0) +=
                            g_a * da_dr + g_b * db_dr +
                            dot(gs * w3, taps.dvalue_droughness);
                    }
                    g_n += v * (g_a * da_dnv + g_b * db_dnv);
                    const Vec3 g_pref = gs * w3;
                    if (local_mips) {
                        const Real w0 = 1 - taps.t, w1 = taps.t;
                        for (int t = 0; t < 4; ++t) {
                            (*local_mips)[taps.level0][taps.taps0.index[t]] +=
                                g_pref * (w0 * taps.taps0.weight[t]);
                            (*local_mips)[taps.level1][taps.taps1.index[t]] +=
                                g_pref * (w1 * taps.taps1.weight[t]);
                        }
                    }
                    const Vec3 g_dir = taps.dvalue_ddir.tmul(g_pref);
                    g_n += v * (2 * dot(g_dir, n)) + g_dir * (2 * n_dot_v);
                }
                if (grads) {
                    const Vec3 g_raw = (g_n - n * dot(n, g_n)) / len;
                    grads->normal.add_rgb(x, int(y), g_raw);
                }
            }
        }
    });
    if (grad_env_mips) {
        for (int c = 0; c < n_chunks; ++c) {
            if (chunk_mips[c].empty()) continue;
            for (int k = 0; k < n_levels; ++k) {
                Vec3* dst = (*grad_env_mips)[k].data();
                const std::vector<Vec3>& src = chunk_mips[c][k];
                for (size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
            }
        }
    }
    if (grad_irradiance) {
        for (int c = 0; c < n_chunks; ++c) {
            if (chunk_irr[c].data_size() == 0) continue;
            Real* dst = grad_irradiance->data();
            const Real* src = chunk_irr[c].data();
            for (size_t i = 0; i < grad_irradiance->data_size(); ++i) dst[i] += src[i];
        }
    }
}

}  // namespace rtr
