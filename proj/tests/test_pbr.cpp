#include <cmath>
#include <vector>

#include <doctest.h>

#include "rtr/oracle.hpp"
#include "rtr/pbr.hpp"
#include "rtr/rng.hpp"
#include "rtr/scene.hpp"
#include "rtr/sh.hpp"
#include "test_util.hpp"

using namespace rtr;
using namespace rtr::test;

namespace {

const BrdfLut& shared_lut() {
    static BrdfLut lut = [] {
        BrdfLut l;
        l.build();
        return l;
    }();
    return lut;
}

/// Single-voxel grid with a uniform omnidirectional visibility value.
VisibilityGrid uniform_grid(Real v) {
    VisibilityGrid g;
    g.res = 1;
    g.bbox_min = {-10, -10, -10};
    g.bbox_max = {10, 10, 10};
    g.sh.assign(VisibilityGrid::kCoeffs, 0.0f);
    g.sh[0] = float(v * std::sqrt(kFourPi));  // DC expansion of a constant
    return g;
}

std::vector<Vec3> smooth_env_sh() {
    return {Vec3{1.2, 1.0, 0.9}, Vec3{0.15, 0.1, 0.05}, Vec3{0.3, 0.25, 0.2},
            Vec3{-0.1, 0.05, 0.1}, Vec3{0.05, 0.0, -0.05}, Vec3{0.1, 0.1, 0.0},
            Vec3{0.0, 0.05, 0.1},  Vec3{-0.05, 0.0, 0.05}, Vec3{0.05, -0.05, 0.0}};
}

}  // namespace

TEST_CASE("microfacet: hand values, reciprocity, grazing safety") {
    const Vec3 n{0, 0, 1};
    // At normal incidence with r = 1: the distribution is 1/pi, the
    // geometry factor is 1, so the value is f0 / (4 pi).
    check_close(microfacet_eval(n, n, n, {0.5, 0.5, 0.5}, 0.0, 1.0),
                Vec3(0.04 / (4 * kPi)), 1e-12);
    // f0 = 0.04 (1 - m) + m c: half-metal gray gives 0.27.
    check_close(microfacet_eval(n, n, n, {0.5, 0.5, 0.5}, 0.5, 1.0),
                Vec3(0.27 / (4 * kPi)), 1e-12);

    // Helmholtz reciprocity: swapping the two directions changes nothing.
    const Rng rng(17, 0);
    for (int trial = 0; trial < 50; ++trial) {
        Vec3 v = rng.sphere(2 * trial);
        Vec3 i = rng.sphere(2 * trial + 1);
        v.z = std::fabs(v.z) + 0.05;
        i.z = std::fabs(i.z) + 0.05;
        v = normalize(v);
        i = normalize(i);
        const Vec3 a = microfacet_eval(n, v, i, {0.8, 0.6, 0.4}, 0.3, 0.5);
        const Vec3 b = microfacet_eval(n, i, v, {0.8, 0.6, 0.4}, 0.3, 0.5);
        check_close(a, b, 1e-12);
        CHECK(a.x >= 0);
    }

    // Grazing viewing directions stay finite through the clamps.
    const Vec3 grazing = normalize(Vec3{1.0, 0.0, 1e-8});
    const Vec3 f = microfacet_eval(n, grazing, n, {1, 1, 1}, 1.0, 0.2);
    CHECK(std::isfinite(f.x));
}

TEST_CASE("microfacet: white furnace bound across roughness") {
    // Hemispherically integrated reflectance of a perfect metal mirror
    // must not exceed one (plus integration slack): checked against
    // the independent sampling estimate.
    McConfig cfg;
    cfg.samples = 4096;
    cfg.seed = 5;
    cfg.kind = McConfig::Kind::microfacet;
    const auto white = [](const Vec3&) { return Vec3{1, 1, 1}; };
    for (Real r : {0.05, 0.3, 0.6, 1.0}) {
        McMaterial mat;
        mat.albedo = {1, 1, 1};
        mat.metallic = 1.0;  // f0 = 1
        mat.roughness = r;
        const McEstimate e = mc_shade({0, 0, 0}, {0, 0, 1},
                                      normalize(Vec3{0.3, 0.1, 0.9}), mat, white,
                                      nullptr, cfg);
        CHECK(e.value.x <= 1.02 + 3 * e.std_error.x);
        // Shadowing eats energy as roughness grows; near-mirrors must
        // stay near one.
        CHECK(e.value.x > (r < 0.1 ? 0.9 : 0.25));
    }
}

TEST_CASE("visibility query: constants, ramp, clamping, outside") {
    const VisibilityGrid white = uniform_grid(1.0);
    const VisibilityGrid black = uniform_grid(0.0);
    check_abs(query_visibility(white, {0, 0, 0}, {0, 0, 1}), 1.0, 1e-12);
    check_abs(query_visibility(white, {3, -2, 1}, normalize(Vec3{1, 1, 1})), 1.0,
              1e-12);
    check_abs(query_visibility(black, {0, 0, 0}, {0, 1, 0}), 0.0, 1e-12);

    // Two-voxel ramp along x: the midpoint averages the endpoints.
    VisibilityGrid ramp;
    ramp.res = 2;
    ramp.bbox_min = {0, 0, 0};
    ramp.bbox_max = {2, 2, 2};
    ramp.sh.assign(ramp.voxel_count() * VisibilityGrid::kCoeffs, 0.0f);
    const float dc = float(std::sqrt(kFourPi));
    for (int iz = 0; iz < 2; ++iz) {
        for (int iy = 0; iy < 2; ++iy) {
            ramp.sh[ramp.voxel_offset(0, iy, iz)] = 0.2f * dc;
            ramp.sh[ramp.voxel_offset(1, iy, iz)] = 0.8f * dc;
        }
    }
    const Real at_lo = query_visibility(ramp, {0.5, 1.0, 1.0}, {0, 0, 1});
    const Real at_hi = query_visibility(ramp, {1.5, 1.0, 1.0}, {0, 0, 1});
    const Real at_mid = query_visibility(ramp, {1.0, 1.0, 1.0}, {0, 0, 1});
    check_abs(at_lo, 0.2, 1e-6);
    check_abs(at_hi, 0.8, 1e-6);
    check_abs(at_mid, 0.5 * (at_lo + at_hi), 1e-9);

    // Reconstruction clamps into [0, 1].
    check_abs(query_visibility(uniform_grid(3.0), {0, 0, 0}, {0, 0, 1}), 1.0, 0.0);
    check_abs(query_visibility(uniform_grid(-2.0), {0, 0, 0}, {0, 0, 1}), 0.0, 0.0);

    // Outside the box and empty grids are fully visible.
    check_abs(query_visibility(white, {11, 0, 0}, {0, 0, 1}), 1.0, 0.0);
    check_abs(query_visibility(VisibilityGrid{}, {0, 0, 0}, {0, 0, 1}), 1.0, 0.0);
}

TEST_CASE("visibility bake: empty scene and closed shell") {
    BakeConfig cfg;
    cfg.grid_res = 2;
    cfg.face_res = 16;
    const VisibilityGrid open = bake_visibility({}, cfg);
    REQUIRE(open.res == 2);
    for (const Vec3 n : {Vec3{0, 0, 1}, Vec3{1, 0, 0}, normalize(Vec3{1, -1, 1})}) {
        check_abs(query_visibility(open, {0.1, -0.2, 0.05}, n), 1.0, 1e-3);
    }

    SyntheticSpec shell;
    shell.primitive = SyntheticSpec::Primitive::kSphere;
    shell.count = 2000;
    shell.seed = 11;
    shell.radius = 1.0;
    shell.scale_fill = 1.2;
    shell.opacity = 0.98;
    const Scene enclosed = init_synthetic(shell);
    BakeConfig shell_cfg;
    shell_cfg.grid_res = 3;
    shell_cfg.face_res = 16;
    const VisibilityGrid baked = bake_visibility(enclosed.splats, shell_cfg);
    CHECK(query_visibility(baked, {0, 0, 0}, {0, 0, 1}) < 0.1);
    CHECK(query_visibility(baked, {0, 0, 0}, normalize(Vec3{1, 1, 0})) < 0.1);
}

TEST_CASE("visibility bake: agrees with ray-cast estimates beside a box") {
    SyntheticSpec box;
    box.primitive = SyntheticSpec::Primitive::kBox;
    box.count = 1536;
    box.seed = 3;
    box.radius = 2.0;
    box.opacity = 0.95;
    box.scale_fill = 0.9;
    const Scene scene = init_synthetic(box);

    BakeConfig cfg;
    cfg.grid_res = 8;
    cfg.face_res = 16;
    cfg.dilate = 0.6;  // widen the box so a voxel center sits above the top face
    const VisibilityGrid baked = bake_visibility(scene.splats, cfg);

    // At the voxel center above the top face, looking along it: the
    // face blocks a chunk of the hemisphere. The baked cosine-lobe
    // average must track the ray-cast oracle.
    const Vec3 probe{0, 0, 2.8};
    for (const Vec3 n : {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}) {
        const Real baked_v = query_visibility(baked, probe, n);
        const Real rayed_v = raycast_visibility(scene.splats, probe, n, 1024, 9);
        check_abs(baked_v, rayed_v, 0.1);
    }
    CHECK(query_visibility(baked, probe, {0, 0, 1}) > 0.85);  // open sky above
}

TEST_CASE("diffuse lobe: visibility routing and metal kill") {
    // Constant environment: the irradiance texture holds pi * L.
    const Vec3 level{1.5, 1.0, 0.5};
    std::vector<Vec3> sh(9, Vec3{0, 0, 0});
    sh[0] = level * std::sqrt(kFourPi);
    const IrradianceTexture irr = build_irradiance(sh);
    const Vec3 albedo{0.9, 0.8, 0.7};
    const Vec3 indirect{0.3, 0.2, 0.1};
    const Vec3 n{0, 0, 1};

    // Fully visible: c * L, the pi cancels.
    check_close(pbr_diffuse(albedo, 0.0, n, {0, 0, 0}, indirect, uniform_grid(1.0), irr),
                albedo * level, 1e-6);
    // Fully occluded: (c / pi) * indirect.
    check_close(pbr_diffuse(albedo, 0.0, n, {0, 0, 0}, indirect, uniform_grid(0.0), irr),
                albedo * indirect * kInvPi, 1e-6);
    // Metals have no diffuse lobe.
    check_close(pbr_diffuse(albedo, 1.0, n, {0, 0, 0}, indirect, uniform_grid(1.0), irr),
                Vec3{0, 0, 0}, 1e-12);
    // Convex in the visibility: monotone between the endpoints.
    const Real lo = pbr_diffuse(albedo, 0.0, n, {0, 0, 0}, indirect, uniform_grid(0.0), irr).x;
    const Real mid = pbr_diffuse(albedo, 0.0, n, {0, 0, 0}, indirect, uniform_grid(0.5), irr).x;
    const Real hi = pbr_diffuse(albedo, 0.0, n, {0, 0, 0}, indirect, uniform_grid(1.0), irr).x;
    CHECK(lo < mid);
    CHECK(mid < hi);
    check_abs(mid, 0.5 * (lo + hi), 1e-6);
}

TEST_CASE("specular lobe: black env, mirror identity, occlusion toggle") {
    Cubemap black(16);
    prefilter_cubemap(&black, prefilter_levels(16));
    const VisibilityGrid open = uniform_grid(1.0);
    const Vec3 n{0, 0, 1};
    const Vec3 v = normalize(Vec3{0.3, -0.2, 1.0});
    check_close(pbr_specular(n, v, {0.5, 0.5, 0.5}, 0.5, 0.4, {0, 0, 0}, black,
                             shared_lut(), open, true),
                Vec3{0, 0, 0}, 1e-12);

    Cubemap env = cubemap_from_sh(smooth_env_sh(), 32);
    prefilter_cubemap(&env, prefilter_levels(32));
    // Perfect metal mirror: the scale/bias weight is exactly one at
    // r = 0, so the lobe returns the environment at the reflection.
    const Vec3 got = pbr_specular(n, v, {1, 1, 1}, 1.0, 0.0, {0, 0, 0}, env,
                                  shared_lut(), open, true);
    check_close(got, env.sample_bilinear(reflect(v, n)), 1e-6);

    // Back-facing pixels produce nothing.
    check_close(pbr_specular(n, {0.3, -0.2, -1.0}, {1, 1, 1}, 1.0, 0.2, {0, 0, 0}, env,
                             shared_lut(), open, true),
                Vec3{0, 0, 0});

    // The occlusion toggle gates the whole lobe.
    const VisibilityGrid closed = uniform_grid(0.0);
    check_close(pbr_specular(n, v, {1, 1, 1}, 1.0, 0.3, {0, 0, 0}, env, shared_lut(),
                             closed, true),
                Vec3{0, 0, 0}, 1e-12);
    CHECK(length(pbr_specular(n, v, {1, 1, 1}, 1.0, 0.3, {0, 0, 0}, env, shared_lut(),
                              closed, false)) > 0.01);
}

TEST_CASE("deferred shading: composition, background, bake-first error") {
    const int w = 3, h = 2;
    PbrGBuffer g;
    g.normal = Image(w, h, 3);
    g.albedo = Image(w, h, 3, 0.6);
    g.metallic = Image(w, h, 1, 0.3);
    g.rough = Image(w, h, 1, 0.42);
    g.indirect = Image(w, h, 3, 0.2);
    g.depth = Image(w, h, 1, 5.0);
    g.alpha = Image(w, h, 1, 1.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            g.normal.set_rgb(x, y, normalize(Vec3{0.1 * x, -0.1 * y, 1.0}) * 0.8);
    g.alpha.at(1, 1, 0) = 0.1;

    Cubemap env = cubemap_from_sh(smooth_env_sh(), 32);
    prefilter_cubemap(&env, prefilter_levels(32));
    const IrradianceTexture irr = build_irradiance(smooth_env_sh());
    const VisibilityGrid grid = uniform_grid(0.7);
    const Camera cam = Camera::look_at({0, 0, 6}, {0, 0, 0}, {0, 1, 0}, w, h, 35.0);
    PbrShadeConfig cfg;
    cfg.background = {0.05, 0.1, 0.15};

    const Image img = pbr_shade(g, cam, env, irr, shared_lut(), grid, cfg);
    check_close(img.rgb(1, 1), cfg.background);
    for (const auto& [px, py] : {std::pair{0, 0}, std::pair{2, 1}}) {
        const Vec3 n = normalize(g.normal.rgb(px, py));
        const Vec3 v = -cam.ray_dir(px + 0.5, py + 0.5);
        const Vec3 dc{(px + 0.5 - cam.cx) / cam.fx, (py + 0.5 - cam.cy) / cam.fy, 1.0};
        const Vec3 p = cam.position() + cam.R.tmul(dc) * g.depth.at(px, py, 0);
        const Vec3 want =
            pbr_diffuse(g.albedo.rgb(px, py), g.metallic.at(px, py, 0), n, p,
                        g.indirect.rgb(px, py), grid, irr) +
            pbr_specular(n, v, g.albedo.rgb(px, py), g.metallic.at(px, py, 0),
                         g.rough.at(px, py, 0), p, env, shared_lut(), grid,
                         cfg.spec_occlusion);
        check_close(img.rgb(px, py), want, 1e-12);
    }

    // A Lambertian white wall under a constant environment lands near
    // albedo * L (the small fresnel lobe is the only deviation).
    const Vec3 level{1.0, 1.0, 1.0};
    std::vector<Vec3> const_sh(9, Vec3{0, 0, 0});
    const_sh[0] = level * std::sqrt(kFourPi);
    Cubemap const_env = cubemap_from_sh(const_sh, 16);
    prefilter_cubemap(&const_env, prefilter_levels(16));
    PbrGBuffer lam = std::move(g);
    lam.albedo = Image(w, h, 3, 0.9);
    lam.metallic = Image(w, h, 1, 0.0);
    lam.alpha = Image(w, h, 1, 1.0);
    const Image white_img = pbr_shade(lam, cam, const_env, build_irradiance(const_sh),
                                      shared_lut(), uniform_grid(1.0), cfg);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::fabs(white_img.at(0, 0, c) - 0.9 * level[c]) < 0.12 * level[c]);
    }

    // All-black materials under a black environment render black.
    PbrGBuffer dark = std::move(lam);
    dark.albedo = Image(w, h, 3, 0.0);
    dark.indirect = Image(w, h, 3, 0.0);
    Cubemap black_env(16);
    prefilter_cubemap(&black_env, prefilter_levels(16));
    std::vector<Vec3> zero_sh(9, Vec3{0, 0, 0});
    const Image black_img = pbr_shade(dark, cam, black_env, build_irradiance(zero_sh),
                                      shared_lut(), grid, cfg);
    check_close(black_img.rgb(0, 0), Vec3{0, 0, 0}, 1e-12);

    // Unbaked scenes must fail loudly and name the fix.
    CHECK_THROWS_WITH_AS(pbr_shade(dark, cam, black_env, irr, shared_lut(),
                                   VisibilityGrid{}, cfg),
                         doctest::Contains("bake"), InputError);
}

TEST_CASE("deferred shading: backward matches finite differences") {
    const int w = 3, h = 2;
    PbrGBuffer g;
    g.normal = Image(w, h, 3);
    g.albedo = Image(w, h, 3);
    g.metallic = Image(w, h, 1);
    g.rough = Image(w, h, 1);
    g.indirect = Image(w, h, 3);
    g.depth = Image(w, h, 1, 4.0);
    g.alpha = Image(w, h, 1, 1.0);
    Image gout(w, h, 3);
    const Real rough_grid[6] = {0.335, 0.385, 0.42, 0.465, 0.51, 0.54};
    const Rng rng(91, 0);
    uint64_t at = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            g.normal.set_rgb(
                x, y,
                normalize(Vec3{rng.uniform(at) - 0.5, rng.uniform(at + 1) - 0.5, 1.2}) *
                    (0.5 + 0.5 * rng.uniform(at + 2)));
            g.albedo.set_rgb(x, y,
                             {0.3 + 0.6 * rng.uniform(at + 3),
                              0.3 + 0.6 * rng.uniform(at + 4),
                              0.3 + 0.6 * rng.uniform(at + 5)});
            g.metallic.at(x, y, 0) = 0.2 + 0.6 * rng.uniform(at + 6);
            g.rough.at(x, y, 0) = rough_grid[(y * w + x) % 6];
            g.indirect.set_rgb(x, y,
                               {0.1 + 0.4 * rng.uniform(at + 7),
                                0.1 + 0.4 * rng.uniform(at + 8),
                                0.1 + 0.4 * rng.uniform(at + 9)});
            gout.set_rgb(x, y,
                         {rng.uniform(at + 10) - 0.5, rng.uniform(at + 11) - 0.5,
                          rng.uniform(at + 12) - 0.5});
            at += 13;
        }
    }
    g.alpha.at(2, 0, 0) = 0.2;

    Cubemap env = cubemap_from_sh(smooth_env_sh(), 16);
    prefilter_cubemap(&env, prefilter_levels(16));
    IrradianceTexture irr = build_irradiance(smooth_env_sh());
    const VisibilityGrid grid = uniform_grid(0.7);
    const Camera cam = Camera::look_at({0.2, -0.3, 5}, {0, 0, 0}, {0, 1, 0}, w, h, 28.0);
    const PbrShadeConfig cfg;

    PbrGBufferGrads grads;
    grads.init(w, h);
    std::vector<std::vector<Vec3>> g_mips;
    Image g_irr;
    pbr_shade_backward(g, cam, env, irr, shared_lut(), grid, cfg, gout, &grads, &g_mips,
                       &g_irr);

    const auto loss = [&](const PbrGBuffer& gb, const Cubemap& e,
                          const IrradianceTexture& ir) {
        const Image out = pbr_shade(gb, cam, e, ir, shared_lut(), grid, cfg);
        Real l = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) l += dot(gout.rgb(x, y), out.rgb(x, y));
        return l;
    };

    for (const auto& [px, py] : {std::pair{0, 0}, std::pair{1, 1}, std::pair{2, 0}}) {
        for (int c = 0; c < 3; ++c) {
            PbrGBuffer g2 = g;
            g2.normal.at(px, py, c) += 1e-5;
            Real hi = loss(g2, env, irr);
            g2.normal.at(px, py, c) = g.normal.at(px, py, c) - 1e-5;
            Real lo = loss(g2, env, irr);
            CHECK(rel_err(grads.normal.at(px, py, c), (hi - lo) / 2e-5, 1e-5) < 2e-3);

            g2 = g;
            g2.albedo.at(px, py, c) += 1e-3;
            hi = loss(g2, env, irr);
            g2.albedo.at(px, py, c) = g.albedo.at(px, py, c) - 1e-3;
            lo = loss(g2, env, irr);
            CHECK(rel_err(grads.albedo.at(px, py, c), (hi - lo) / 2e-3, 1e-8) < 1e-6);

            g2 = g;
            g2.indirect.at(px, py, c) += 1e-3;
            hi = loss(g2, env, irr);
            g2.indirect.at(px, py, c) = g.indirect.at(px, py, c) - 1e-3;
            lo = loss(g2, env, irr);
            CHECK(rel_err(grads.indirect.at(px, py, c), (hi - lo) / 2e-3, 1e-8) < 1e-6);
        }
        PbrGBuffer g2 = g;
        g2.metallic.at(px, py, 0) += 1e-4;
        Real hi = loss(g2, env, irr);
        g2.metallic.at(px, py, 0) = g.metallic.at(px, py, 0) - 1e-4;
        Real lo = loss(g2, env, irr);
        CHECK(rel_err(grads.metallic.at(px, py, 0), (hi - lo) / 2e-4, 1e-8) < 1e-5);

        g2 = g;
        g2.rough.at(px, py, 0) += 1e-4;
        hi = loss(g2, env, irr);
        g2.rough.at(px, py, 0) = g.rough.at(px, py, 0) - 1e-4;
        lo = loss(g2, env, irr);
        CHECK(rel_err(grads.rough.at(px, py, 0), (hi - lo) / 2e-4, 1e-6) < 1e-3);
    }

    // Environment mip texels through the stored chain.
    int checked = 0;
    for (size_t level = 0; level < g_mips.size() && checked < 5; ++level) {
        for (size_t texel = 0; texel < g_mips[level].size() && checked < 5; ++texel) {
            if (std::fabs(g_mips[level][texel].y) < 1e-4) continue;
            Cubemap e2 = env;
            const Vec3 base = e2.mips()[level].get(texel);
            e2.mips()[level].set(texel, base + Vec3{0, 1e-3, 0});
            const Real hi = loss(g, e2, irr);
            e2.mips()[level].set(texel, base - Vec3{0, 1e-3, 0});
            const Real lo = loss(g, e2, irr);
            CHECK(rel_err(g_mips[level][texel].y, (hi - lo) / 2e-3, 1e-6) < 2e-3);
            ++checked;
        }
    }
    CHECK(checked == 5);

    // Irradiance texels through the sampling taps.
    checked = 0;
    for (int ty = 0; ty < IrradianceTexture::kRes && checked < 4; ++ty) {
        for (int tx = 0; tx < IrradianceTexture::kRes && checked < 4; ++tx) {
            if (std::fabs(g_irr.at(tx, ty, 0)) < 1e-4) continue;
            IrradianceTexture ir2 = irr;
            const Real base = ir2.img.at(tx, ty, 0);
            ir2.img.at(tx, ty, 0) = base + 1e-4;
            const Real hi = loss(g, env, ir2);
            ir2.img.at(tx, ty, 0) = base - 1e-4;
            const Real lo = loss(g, env, ir2);
            CHECK(rel_err(g_irr.at(tx, ty, 0), (hi - lo) / 2e-4, 1e-6) < 1e-3);
            ++checked;
        }
    }
    CHECK(checked == 4);

    // The uncovered pixel propagated nothing.
    check_close(grads.normal.rgb(2, 0), Vec3{0, 0, 0});
    check_close(grads.albedo.rgb(2, 0), Vec3{0, 0, 0});
    check_abs(grads.rough.at(2, 0, 0), 0.0, 0.0);
}
