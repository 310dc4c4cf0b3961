#include "rtr/raster.hpp"

#include <algorithm>
#include <cmath>

#include "rtr/parallel.hpp"

namespace rtr {

namespace {

// Contributions below this alpha are dropped; far below anything a
// finite-difference probe at step 1e-4 can see.
constexpr Real kAlphaSkip = 1e-30;

struct ScreenJacobian {
    Vec3 t;       // camera-space position
    Real j00, j02, j11, j12;  // nonzero perspective Jacobian entries
    Real m[2][3];             // J * camera rotation
};

// Projection pieces shared by the forward and backward passes.
// Returns false when the splat is behind the near plane.
bool screen_jacobian(const GaussianSplat& splat, const Camera& cam,
                     const RasterConfig& cfg, ScreenJacobian* out) {
    const Vec3 t = cam.world_to_camera(splat.position);
    if (t.z < cfg.near_clip) return false;
    out->t = t;
    const Real iz = 1.0 / t.z;
    out->j00 = cam.fx * iz;
    out->j02 = -cam.fx * t.x * iz * iz;
    out->j11 = cam.fy * iz;
    out->j12 = -cam.fy * t.y * iz * iz;
    for (int k = 0; k < 3; ++k) {
        out->m[0][k] = out->j00 * cam.R.m[0][k] + out->j02 * cam.R.m[2][k];
        out->m[1][k] = out->j11 * cam.R.m[1][k] + out->j12 * cam.R.m[2][k];
    }
    return true;
}

// 2d covariance a, b, c (xx, xy, yy) incl. the 0.3 pixel dilation.
void screen_covariance(const ScreenJacobian& sj, const Mat3& cov3d, Real* a,
                       Real* b, Real* c) {
    Real mc[2][3];
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 3; ++k)
            mc[i][k] = sj.m[i][0] * cov3d.m[0][k] + sj.m[i][1] * cov3d.m[1][k] +
                       sj.m[i][2] * cov3d.m[2][k];
    *a = mc[0][0] * sj.m[0][0] + mc[0][1] * sj.m[0][1] + mc[0][2] * sj.m[0][2] + 0.3;
    *b = mc[0][0] * sj.m[1][0] + mc[0][1] * sj.m[1][1] + mc[0][2] * sj.m[1][2];
    *c = mc[1][0] * sj.m[1][0] + mc[1][1] * sj.m[1][1] + mc[1][2] * sj.m[1][2] + 0.3;
}

struct SplatAccum {
    Real conic_a = 0, conic_b = 0, conic_c = 0;
    Real cx = 0, cy = 0;
    Real z = 0;
    Real logit = 0;
};

}  // namespace

void GeomGrads::add(const GeomGrads& o) {
    for (size_t i = 0; i < position.size(); ++i) {
        position[i] += o.position[i];
        log_scale[i] += o.log_scale[i];
        rotation[i].w += o.rotation[i].w;
        rotation[i].x += o.rotation[i].x;
        rotation[i].y += o.rotation[i].y;
        rotation[i].z += o.rotation[i].z;
        opacity_logit[i] += o.opacity_logit[i];
    }
}

ProjectedSplat project_splat(const GaussianSplat& splat, const Camera& cam,
                             const RasterConfig& cfg) {
    ProjectedSplat p;
    ScreenJacobian sj;
    if (!screen_jacobian(splat, cam, cfg, &sj)) return p;

    p.z = sj.t.z;
    p.center = cam.project(sj.t);

    Real a, b, c;
    screen_covariance(sj, splat.covariance(), &a, &b, &c);
    const Real det = a * c - b * b;
    if (det <= 0) return p;
    p.conic_a = c / det;
    p.conic_b = -b / det;
    p.conic_c = a / det;

    const Real mid = 0.5 * (a + c);
    const Real lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    const Real radius = cfg.footprint_sigma * std::sqrt(lam_max);

    // pixel ix has center ix + 0.5; keep pixels within `radius`
    p.x0 = std::max(0, int(std::ceil(p.center.x - radius - 0.5)));
    p.x1 = std::min(cam.width - 1, int(std::floor(p.center.x + radius - 0.5)));
    p.y0 = std::max(0, int(std::ceil(p.center.y - radius - 0.5)));
    p.y1 = std::min(cam.height - 1, int(std::floor(p.center.y + radius - 0.5)));
    if (p.x0 > p.x1 || p.y0 > p.y1) return p;

    p.opacity = splat.opacity();
    p.visible = true;
    return p;
}

RasterForward rasterize(const std::vector<GaussianSplat>& splats,
                        const std::vector<Real>& payload, int payload_channels,
                        const Camera& cam, const RasterConfig& cfg) {
    const int n = int(splats.size());
    const int K = payload_channels;
    if (payload.size() != size_t(n) * K)
        throw InputError("rasterize: payload size does not match splat count");

    RasterForward fwd;
    fwd.payload_channels = K;
    fwd.payload = Image(cam.width, cam.height, K + 1);
    fwd.alpha = Image(cam.width, cam.height, 1);
    fwd.proj.resize(n);

    parallel_for(0, n, [&](int64_t lo, int64_t hi, int) {
        for (int64_t i = lo; i < hi; ++i)
            fwd.proj[i] = project_splat(splats[i], cam, cfg);
    });

    fwd.order.reserve(n);
    for (int i = 0; i < n; ++i)
        if (fwd.proj[i].visible) fwd.order.push_back(i);
    std::sort(fwd.order.begin(), fwd.order.end(), [&](int32_t a, int32_t b) {
        if (fwd.proj[a].z != fwd.proj[b].z) return fwd.proj[a].z < fwd.proj[b].z;
        return a < b;
    });

    const int tile = cfg.tile_size;
    fwd.tiles_x = (cam.width + tile - 1) / tile;
    fwd.tiles_y = (cam.height + tile - 1) / tile;
    fwd.tiles.assign(size_t(fwd.tiles_x) * fwd.tiles_y, {});
    for (const int32_t i : fwd.order) {
        const ProjectedSplat& p = fwd.proj[i];
        for (int ty = p.y0 / tile; ty <= p.y1 / tile; ++ty)
            for (int tx = p.x0 / tile; tx <= p.x1 / tile; ++tx)
                fwd.tiles[size_t(ty) * fwd.tiles_x + tx].push_back(i);
    }

    const int64_t n_tiles = int64_t(fwd.tiles_x) * fwd.tiles_y;
    parallel_for(0, n_tiles, [&](int64_t lo, int64_t hi, int) {
        std::vector<Real> acc(K + 1);
        for (int64_t ti = lo; ti < hi; ++ti) {
            const std::vector<int32_t>& list = fwd.tiles[ti];
            if (list.empty()) continue;
            const int tx0 = int(ti % fwd.tiles_x) * tile;
            const int ty0 = int(ti / fwd.tiles_x) * tile;
            for (int y = ty0; y < std::min(ty0 + tile, cam.height); ++y)
                for (int x = tx0; x < std::min(tx0 + tile, cam.width); ++x) {
                    const Real px = x + 0.5, py = y + 0.5;
                    std::fill(acc.begin(), acc.end(), 0.0);
                    Real opacity_sum = 0, transmit = 1;
                    for (const int32_t i : list) {
                        if (transmit < cfg.transmittance_cutoff) break;
                        const ProjectedSplat& p = fwd.proj[i];
                        if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
                        const Real dx = px - p.center.x, dy = py - p.center.y;
                        const Real q = p.conic_a * dx * dx +
                                       2 * p.conic_b * dx * dy +
                                       p.conic_c * dy * dy;
                        const Real alpha =
                            std::min(cfg.alpha_max, p.opacity * std::exp(-0.5 * q));
                        if (alpha < kAlphaSkip) continue;
                        const Real w = alpha * transmit;
                        const Real* pl = payload.data() + size_t(i) * K;
                        for (int k = 0; k < K; ++k) acc[k] += pl[k] * w;
                        acc[K] += p.z * w;
                        opacity_sum += w;
                        transmit *= 1 - alpha;
                    }
                    for (int k = 0; k <= K; ++k) fwd.payload.at(x, y, k) = acc[k];
                    fwd.alpha.at(x, y, 0) = opacity_sum;
                }
        }
    });
    return fwd;
}

void rasterize_backward(const std::vector<GaussianSplat>& splats,
                        const std::vector<Real>& payload,
                        const RasterForward& fwd, const Camera& cam,
                        const RasterConfig& cfg, const Image& grad_payload_img,
                        const Image& grad_alpha,
                        std::vector<Real>* grad_payload, GeomGrads* grad_geom) {
    const int n = int(splats.size());
    const int K = fwd.payload_channels;
    if (grad_payload_img.channels() != K + 1 || grad_alpha.channels() != 1)
        throw InputError("rasterize_backward: gradient image channels mismatch");
    if (grad_payload->size() != size_t(n) * K)
        grad_payload->assign(size_t(n) * K, 0.0);
    if (grad_geom->position.size() != size_t(n)) grad_geom->resize(n);

    const int tile = cfg.tile_size;
    const int64_t n_tiles = int64_t(fwd.tiles_x) * fwd.tiles_y;
    const int n_chunks = std::max<int>(1, std::min<int64_t>(thread_count(), n_tiles));

    // Per-chunk accumulators, reduced in chunk order afterwards so the
    // result is independent of thread scheduling.
    std::vector<std::vector<SplatAccum>> chunk_acc(
        n_chunks, std::vector<SplatAccum>(n));
    std::vector<std::vector<Real>> chunk_payload(
        n_chunks, std::vector<Real>(size_t(n) * K, 0.0));

    parallel_for(0, n_tiles, [&](int64_t lo, int64_t hi, int chunk) {
        std::vector<SplatAccum>& acc = chunk_acc[chunk];
        std::vector<Real>& pacc = chunk_payload[chunk];
        std::vector<Real> prefix(K + 1);
        std::vector<Real> gp(K + 1);
        for (int64_t ti = lo; ti < hi; ++ti) {
            const std::vector<int32_t>& list = fwd.tiles[ti];
            if (list.empty()) continue;
            const int tx0 = int(ti % fwd.tiles_x) * tile;
            const int ty0 = int(ti / fwd.tiles_x) * tile;
            for (int y = ty0; y < std::min(ty0 + tile, cam.height); ++y)
                for (int x = tx0; x < std::min(tx0 + tile, cam.width); ++x) {
                    bool any = false;
                    for (int k = 0; k <= K; ++k) {
                        gp[k] = grad_payload_img.at(x, y, k);
                        any = any || gp[k] != 0;
                    }
                    const Real ga = grad_alpha.at(x, y, 0);
                    if (!any && ga == 0) continue;

                    const Real px = x + 0.5, py = y + 0.5;
                    std::fill(prefix.begin(), prefix.end(), 0.0);
                    Real prefix_o = 0, transmit = 1;
                    // totals from the forward image give suffix sums
                    const Real total_o = fwd.alpha.at(x, y, 0);
                    for (const int32_t i : list) {
                        if (transmit < cfg.transmittance_cutoff) break;
                        const ProjectedSplat& p = fwd.proj[i];
                        if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
                        const Real dx = px - p.center.x, dy = py - p.center.y;
                        const Real q = p.conic_a * dx * dx +
                                       2 * p.conic_b * dx * dy +
                                       p.conic_c * dy * dy;
                        const Real g_exp = p.opacity * std::exp(-0.5 * q);
                        const Real alpha = std::min(cfg.alpha_max, g_exp);
                        if (alpha < kAlphaSkip) continue;
                        const Real w = alpha * transmit;
                        const Real one_m = 1 - alpha;

                        // d out / d alpha_i = p_i T_i - suffix / (1 - alpha_i)
                        Real dalpha = 0;
                        const Real* pl = payload.data() + size_t(i) * K;
                        Real* pg = pacc.data() + size_t(i) * K;
                        for (int k = 0; k < K; ++k) {
                            if (gp[k] == 0) continue;
                            pg[k] += gp[k] * w;
                            prefix[k] += pl[k] * w;
                            const Real suffix =
                                fwd.payload.at(x, y, k) - prefix[k];
                            dalpha +=
                                gp[k] * (pl[k] * transmit - suffix / one_m);
                        }
                        {
                            // depth-sum channel (payload value = z)
                            prefix[K] += p.z * w;
                            const Real suffix = fwd.payload.at(x, y, K) - prefix[K];
                            if (gp[K] != 0) {
                                acc[i].z += gp[K] * w;
                                dalpha += gp[K] * (p.z * transmit - suffix / one_m);
                            }
                        }
                        prefix_o += w;
                        if (ga != 0)
                            dalpha += ga * (transmit - (total_o - prefix_o) / one_m);

                        if (g_exp < cfg.alpha_max && dalpha != 0) {
                            // alpha = sigmoid(logit) * exp(-q/2), so
                            // d(alpha)/d(logit) = alpha * (1 - opacity)
                            acc[i].logit += dalpha * g_exp * (1 - p.opacity);
                            const Real dq = dalpha * g_exp * -0.5;
                            acc[i].conic_a += dq * dx * dx;
                            acc[i].conic_b += dq * 2 * dx * dy;
                            acc[i].conic_c += dq * dy * dy;
                            acc[i].cx += -dq * (2 * p.conic_a * dx + 2 * p.conic_b * dy);
                            acc[i].cy += -dq * (2 * p.conic_b * dx + 2 * p.conic_c * dy);
                        }
                        transmit *= one_m;
                    }
                }
        }
    });

    // reduce chunks in fixed order
    std::vector<SplatAccum> acc(n);
    for (int c = 0; c < n_chunks; ++c) {
        for (int i = 0; i < n; ++i) {
            acc[i].conic_a += chunk_acc[c][i].conic_a;
            acc[i].conic_b += chunk_acc[c][i].conic_b;
            acc[i].conic_c += chunk_acc[c][i].conic_c;
            acc[i].cx += chunk_acc[c][i].cx;
            acc[i].cy += chunk_acc[c][i].cy;
            acc[i].z += chunk_acc[c][i].z;
            acc[i].logit += chunk_acc[c][i].logit;
        }
        for (size_t j = 0; j < grad_payload->size(); ++j)
            (*grad_payload)[j] += chunk_payload[c][j];
    }

    // chain the per-splat screen gradients back to world parameters
    parallel_for(0, n, [&](int64_t lo, int64_t hi, int) {
        for (int64_t i = lo; i < hi; ++i) {
            const ProjectedSplat& p = fwd.proj[i];
            if (!p.visible) continue;
            const SplatAccum& a = acc[i];

            grad_geom->opacity_logit[i] += a.logit;

            ScreenJacobian sj;
            if (!screen_jacobian(splats[i], cam, cfg, &sj)) continue;
            const Mat3 cov3d = splats[i].covariance();
            Real ca, cb, cc;
            screen_covariance(sj, cov3d, &ca, &cb, &cc);

            // conic = inverse of the 2d covariance: dSigma = -C G C
            const Real C[2][2] = {{p.conic_a, p.conic_b}, {p.conic_b, p.conic_c}};
            const Real G[2][2] = {{a.conic_a, a.conic_b * 0.5},
                                  {a.conic_b * 0.5, a.conic_c}};
            Real CG[2][2], CGC[2][2];
            for (int r = 0; r < 2; ++r)
                for (int s = 0; s < 2; ++s)
                    CG[r][s] = C[r][0] * G[0][s] + C[r][1] * G[1][s];
            for (int r = 0; r < 2; ++r)
                for (int s = 0; s < 2; ++s)
                    CGC[r][s] = CG[r][0] * C[0][s] + CG[r][1] * C[1][s];
            // full symmetric gradient w.r.t. the 2d covariance matrix
            const Real GS[2][2] = {{-CGC[0][0], -CGC[0][1]},
                                   {-CGC[1][0], -CGC[1][1]}};

            // Sigma2d = M Sigma3 M^T: dM = 2 GS M Sigma3, dSigma3 = M^T GS M
            Real msig[2][3];
            for (int r = 0; r < 2; ++r)
                for (int k = 0; k < 3; ++k)
                    msig[r][k] = sj.m[r][0] * cov3d.m[0][k] +
                                 sj.m[r][1] * cov3d.m[1][k] +
                                 sj.m[r][2] * cov3d.m[2][k];
            Real gm[2][3];
            for (int r = 0; r < 2; ++r)
                for (int k = 0; k < 3; ++k)
                    gm[r][k] = 2 * (GS[r][0] * msig[0][k] + GS[r][1] * msig[1][k]);
            Mat3 gsig3;
            for (int r = 0; r < 3; ++r)
                for (int s = 0; s < 3; ++s)
                    gsig3.m[r][s] = sj.m[0][r] * (GS[0][0] * sj.m[0][s] +
                                                  GS[0][1] * sj.m[1][s]) +
                                    sj.m[1][r] * (GS[1][0] * sj.m[0][s] +
                                                  GS[1][1] * sj.m[1][s]);

            Vec3 gls{0, 0, 0};
            Quat gq{0, 0, 0, 0};
            covariance_backward(splats[i], gsig3, &gls, &gq);
            grad_geom->log_scale[i] += gls;
            grad_geom->rotation[i].w += gq.w;
            grad_geom->rotation[i].x += gq.x;
            grad_geom->rotation[i].y += gq.y;
            grad_geom->rotation[i].z += gq.z;

            // M = J R_cam: dJ = dM R_cam^T
            Real gj[2][3];
            for (int r = 0; r < 2; ++r)
                for (int k = 0; k < 3; ++k)
                    gj[r][k] = gm[r][0] * cam.R.m[k][0] + gm[r][1] * cam.R.m[k][1] +
                               gm[r][2] * cam.R.m[k][2];

            // gradients w.r.t. the camera-space position t
            const Real tx = sj.t.x, ty = sj.t.y, tz = sj.t.z;
            const Real iz = 1.0 / tz, iz2 = iz * iz, iz3 = iz2 * iz;
            Vec3 gt{0, 0, 0};
            // through the Jacobian entries
            gt.x += gj[0][2] * (-cam.fx * iz2);
            gt.y += gj[1][2] * (-cam.fy * iz2);
            gt.z += gj[0][0] * (-cam.fx * iz2) + gj[1][1] * (-cam.fy * iz2) +
                    gj[0][2] * (2 * cam.fx * tx * iz3) +
                    gj[1][2] * (2 * cam.fy * ty * iz3);
            // through the projected center
            gt.x += a.cx * cam.fx * iz;
            gt.y += a.cy * cam.fy * iz;
            gt.z += -a.cx * cam.fx * tx * iz2 - a.cy * cam.fy * ty * iz2;
            // through the depth payload value
            gt.z += a.z;

            grad_geom->position[i] += cam.R.tmul(gt);
        }
    });
}

int shortest_axis(const Vec3& log_scale) {
    int k = 0;
    if (log_scale.y < log_scale[k]) k = 1;
    if (log_scale.z < log_scale[k]) k = 2;
    return k;
}

Vec3 compute_normal(const GaussianSplat& splat, const Vec3& view_dir) {
    const Mat3 r = rotation_matrix(splat.rotation);
    const Vec3 axis = r.col(shortest_axis(splat.log_scale));
    return dot(axis, view_dir) > 0 ? -axis : axis;
}

void compute_normal_backward(const GaussianSplat& splat, const Vec3& view_dir,
                             const Vec3& grad_n, Quat* grad_rotation) {
    const Mat3 r = rotation_matrix(splat.rotation);
    const int k = shortest_axis(splat.log_scale);
    const Real sign = dot(r.col(k), view_dir) > 0 ? -1.0 : 1.0;
    Mat3 grad_r;  // zero except column k
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) grad_r.m[i][j] = 0;
    grad_r.m[0][k] = sign * grad_n.x;
    grad_r.m[1][k] = sign * grad_n.y;
    grad_r.m[2][k] = sign * grad_n.z;
    rotation_matrix_backward(splat.rotation, grad_r, grad_rotation);
}

namespace {

// Back-projected surface point for a pixel with camera-space depth z.
// ray has unit length; its camera-forward component rescales z to a
// distance along the ray.
Vec3 backproject(const Camera& cam, int x, int y, Real z, Vec3* ray_over_rz) {
    const Vec3 ray = cam.ray_dir(x + 0.5, y + 0.5);
    const Real rz = cam.dir_to_camera(ray).z;
    *ray_over_rz = ray / rz;
    return cam.position() + *ray_over_rz * z;
}

}  // namespace

void depth_to_pseudo_normals(const Image& depth, const Image& alpha,
                             const Camera& cam, Image* normals, Image* valid) {
    const int w = depth.width(), h = depth.height();
    *normals = Image(w, h, 3);
    *valid = Image(w, h, 1);
    const Vec3 cam_pos = cam.position();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 >= w || y + 1 >= h) continue;
            if (alpha.at(x, y, 0) < 0.5 || alpha.at(x + 1, y, 0) < 0.5 ||
                alpha.at(x, y + 1, 0) < 0.5)
                continue;
            Vec3 rr0, rrx, rry;
            const Vec3 p0 = backproject(cam, x, y, depth.at(x, y, 0), &rr0);
            const Vec3 px = backproject(cam, x + 1, y, depth.at(x + 1, y, 0), &rrx);
            const Vec3 py = backproject(cam, x, y + 1, depth.at(x, y + 1, 0), &rry);
            const Vec3 m = cross(px - p0, py - p0);
            const Real len = length(m);
            if (len < 1e-20) continue;
            Vec3 nrm = m / len;
            if (dot(nrm, p0 - cam_pos) > 0) nrm = -nrm;
            normals->set_rgb(x, y, nrm);
            valid->at(x, y, 0) = 1.0;
        }
}

void depth_to_pseudo_normals_backward(const Image& depth, const Image& alpha,
                                      const Camera& cam,
                                      const Image& grad_normals,
                                      Image* grad_depth) {
    const int w = depth.width(), h = depth.height();
    if (grad_depth->width() != w || grad_depth->height() != h ||
        grad_depth->channels() != 1)
        *grad_depth = Image(w, h, 1);
    const Vec3 cam_pos = cam.position();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 >= w || y + 1 >= h) continue;
            if (alpha.at(x, y, 0) < 0.5 || alpha.at(x + 1, y, 0) < 0.5 ||
                alpha.at(x, y + 1, 0) < 0.5)
                continue;
            const Vec3 g = grad_normals.rgb(x, y);
            if (g.x == 0 && g.y == 0 && g.z == 0) continue;
            Vec3 rr0, rrx, rry;
            const Vec3 p0 = backproject(cam, x, y, depth.at(x, y, 0), &rr0);
            const Vec3 px = backproject(cam, x + 1, y, depth.at(x + 1, y, 0), &rrx);
            const Vec3 py = backproject(cam, x, y + 1, depth.at(x, y + 1, 0), &rry);
            const Vec3 a = px - p0, b = py - p0;
            const Vec3 m = cross(a, b);
            const Real len = length(m);
            if (len < 1e-20) continue;
            Vec3 nrm = m / len;
            Real sign = 1;
            if (dot(nrm, p0 - cam_pos) > 0) {
                nrm = -nrm;
                sign = -1;
            }
            // n = sign * m / |m|
            const Vec3 gm = (g - nrm * dot(nrm, g)) * (sign / len);
            const Vec3 ga = cross(b, gm);
            const Vec3 gb = cross(gm, a);
            grad_depth->at(x + 1, y, 0) += dot(ga, rrx);
            grad_depth->at(x, y + 1, 0) += dot(gb, rry);
            grad_depth->at(x, y, 0) -= dot(ga + gb, rr0);
        }
}

}  // namespace rtr
