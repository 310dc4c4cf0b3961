#include <cmath>
#include <utility>
#include <vector>

#include <doctest.h>

#include "rtr/cubemap.hpp"
#include "rtr/ibl.hpp"
#include "rtr/rng.hpp"
#include "rtr/sh.hpp"
#include "test_util.hpp"

using namespace rtr;
using namespace rtr::test;

namespace {

const BrdfLut& shared_lut() {
    static const BrdfLut lut = [] {
        BrdfLut l;
        l.build();
        return l;
    }();
    return lut;
}

// Smooth positive low-frequency environment for filtering tests.
Cubemap smooth_env(int res) {
    std::vector<Vec3> coeffs(9, Vec3{0, 0, 0});
    coeffs[0] = {3.0, 2.5, 2.0};
    coeffs[2] = {0.4, 0.3, 0.5};
    coeffs[5] = {0.2, -0.2, 0.1};
    coeffs[7] = {0.15, 0.1, -0.1};
    return cubemap_from_sh(coeffs, res);
}

// Independent estimate of a prefiltered texel: distribution-sampled
// lobe about n with cosine weighting, normalized.
Vec3 ndf_filtered_reference(const Cubemap& base, const Vec3& n, Real roughness,
                            int n_samples, uint64_t seed) {
    const Mat3 frame = rotation_matrix(quat_from_z_to(n));
    const Real alpha = roughness * roughness;
    const Rng rng(seed, 7);
    Vec3 num{0, 0, 0};
    Real den = 0;
    for (int s = 0; s < n_samples; ++s) {
        const Real u1 = rng.uniform(2 * s), u2 = rng.uniform(2 * s + 1);
        const Real c2 = (1 - u2) / (1 + (alpha * alpha - 1) * u2);
        const Real ct = std::sqrt(c2);
        const Real st = std::sqrt(std::max(0.0, 1 - c2));
        const Real ph = kTwoPi * u1;
        const Vec3 h = frame * Vec3{st * std::cos(ph), st * std::sin(ph), ct};
        const Vec3 l = h * (2 * dot(n, h)) - n;
        const Real w = dot(n, l);
        if (w <= 0) continue;
        num += base.sample_bilinear(l) * w;
        den += w;
    }
    return num / den;
}

}  // namespace

TEST_CASE("brdf lut: energy bound and mirror corner") {
    const BrdfLut& lut = shared_lut();
    REQUIRE(!lut.empty());
    for (size_t i = 0; i < lut.a.size(); ++i) {
        CHECK(lut.a[i] >= 0.0);
        CHECK(lut.b[i] >= 0.0);
        CHECK(lut.a[i] + lut.b[i] <= 1.0 + 1e-9);
    }
    Real a, b;
    lut.sample(1.0, 0.0, &a, &b);
    CHECK(a == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::fabs(b) < 1e-3);
}

TEST_CASE("brdf lut: texels match a high-sample reference") {
    const BrdfLut& lut = shared_lut();
    const std::pair<int, int> picks[] = {{5, 9}, {20, 33}, {40, 12}, {58, 50},
                                         {13, 60}, {33, 25}};
    for (const auto& [iv, ir] : picks) {
        const Real nv = (iv + 0.5) / BrdfLut::kRes;
        const Real r = (ir + 0.5) / BrdfLut::kRes;
        Real ra, rb;
        brdf_integral(nv, r, 65536, 0xfeedULL + iv * 97 + ir, &ra, &rb);
        ra = clamp(ra, 0.0, 1.0);  // the table normalizes into the energy bound
        rb = clamp(rb, 0.0, 1.0 - ra);
        CHECK(std::fabs(lut.a[size_t(iv) * BrdfLut::kRes + ir] - ra) < 0.01);
        CHECK(std::fabs(lut.b[size_t(iv) * BrdfLut::kRes + ir] - rb) < 0.01);
    }
}

TEST_CASE("brdf lut: bilinear sample and gradients") {
    const BrdfLut& lut = shared_lut();

    // Texel centers reproduce stored values exactly.
    const Real nv_c = (17 + 0.5) / BrdfLut::kRes;
    const Real r_c = (42 + 0.5) / BrdfLut::kRes;
    Real a, b;
    lut.sample(nv_c, r_c, &a, &b);
    CHECK(a == doctest::Approx(lut.a[17 * BrdfLut::kRes + 42]).epsilon(1e-14));
    CHECK(b == doctest::Approx(lut.b[17 * BrdfLut::kRes + 42]).epsilon(1e-14));

    // Analytic derivatives against central differences at interior points.
    const Real pts[][2] = {{0.3123, 0.4567}, {0.7741, 0.2208}, {0.1309, 0.8866}};
    const Real h = 1e-5;
    for (const auto& p : pts) {
        Real da_dnv, da_dr, db_dnv, db_dr;
        lut.sample(p[0], p[1], &a, &b, &da_dnv, &da_dr, &db_dnv, &db_dr);
        Real ap, bp, am, bm;
        lut.sample(p[0] + h, p[1], &ap, &bp);
        lut.sample(p[0] - h, p[1], &am, &bm);
        check_abs(da_dnv, (ap - am) / (2 * h), 1e-6);
        check_abs(db_dnv, (bp - bm) / (2 * h), 1e-6);
        lut.sample(p[0], p[1] + h, &ap, &bp);
        lut.sample(p[0], p[1] - h, &am, &bm);
        check_abs(da_dr, (ap - am) / (2 * h), 1e-6);
        check_abs(db_dr, (bp - bm) / (2 * h), 1e-6);
    }

    BrdfLut unbuilt;
    CHECK_THROWS_AS(unbuilt.sample(0.5, 0.5, &a, &b), InputError);
}

TEST_CASE("prefilter: level count halves the face down to 4") {
    CHECK(prefilter_levels(128) == 6);
    CHECK(prefilter_levels(64) == 5);
    CHECK(prefilter_levels(4) == 1);
    CHECK_THROWS_AS(prefilter_levels(96), InputError);
    CHECK_THROWS_AS(prefilter_levels(2), InputError);
}

TEST_CASE("prefilter: constant cubemap yields identical mips") {
    Cubemap cube(32, Vec3{0.7, 0.4, 0.9});
    prefilter_cubemap(&cube, prefilter_levels(32));
    REQUIRE(cube.mips().size() == 4);
    int expect_res = 32;
    for (const Cubemap& mip : cube.mips()) {
        CHECK(mip.resolution() == expect_res);
        expect_res /= 2;
        for (size_t t = 0; t < mip.texel_count(); ++t) {
            check_close(mip.get(t), Vec3{0.7, 0.4, 0.9}, 1e-6);
        }
    }
}

TEST_CASE("prefilter: mirror level equals the base map") {
    Cubemap cube = smooth_env(16);
    prefilter_cubemap(&cube, prefilter_levels(16));
    const Cubemap& mip0 = cube.mips()[0];
    for (size_t t = 0; t < cube.texel_count(); ++t) {
        CHECK(mip0.get(t).x == cube.get(t).x);
        CHECK(mip0.get(t).y == cube.get(t).y);
        CHECK(mip0.get(t).z == cube.get(t).z);
    }
}

TEST_CASE("prefilter: mid-roughness texels match Monte Carlo reference") {
    Cubemap cube = smooth_env(64);
    prefilter_cubemap(&cube, 5);  // level 2 targets roughness 0.5
    const Cubemap& mip = cube.mips()[2];
    const int picks[][3] = {{0, 3, 7}, {2, 8, 2}, {5, 12, 11}, {3, 1, 14}};
    for (const auto& p : picks) {
        const Vec3 got = mip.get(p[0], p[1], p[2]);
        const Vec3 want = ndf_filtered_reference(cube, mip.texel_dir(p[0], p[1], p[2]),
                                                 0.5, 20000, 0xabcde);
        for (int c = 0; c < 3; ++c) {
            CHECK(rel_err(got[c], want[c]) < 0.03);
        }
    }
}

TEST_CASE("prefilter: operator matches one-shot filtering and is adjoint-consistent") {
    const int res = 16;
    const int levels = prefilter_levels(res);
    PrefilterOperator op;
    op.build(res, levels);

    Cubemap direct = smooth_env(res);
    Cubemap via_op = smooth_env(res);
    prefilter_cubemap(&direct, levels);
    op.apply(&via_op);
    REQUIRE(via_op.mips().size() == direct.mips().size());
    for (size_t k = 0; k < direct.mips().size(); ++k) {
        for (size_t t = 0; t < direct.mips()[k].texel_count(); ++t) {
            check_close(via_op.mips()[k].get(t), direct.mips()[k].get(t), 1e-12);
        }
    }

    // <A x, g> == <x, A^T g> for random x and g.
    const Rng rng(99, 4);
    Cubemap base(res);
    for (size_t t = 0; t < base.texel_count(); ++t) {
        base.set(t, Vec3{rng.uniform(3 * t), rng.uniform(3 * t + 1), rng.uniform(3 * t + 2)});
    }
    op.apply(&base);
    std::vector<std::vector<Vec3>> g(levels);
    Real lhs = 0;
    size_t at = 0;
    for (int k = 0; k < levels; ++k) {
        g[k].resize(base.mips()[k].texel_count());
        for (size_t t = 0; t < g[k].size(); ++t) {
            g[k][t] = Vec3{rng.uniform(at), rng.uniform(at + 1), rng.uniform(at + 2)} -
                      Vec3(0.5);
            at += 3;
            lhs += dot(base.mips()[k].get(t), g[k][t]);
        }
    }
    std::vector<Vec3> grad_base;
    op.backward(g, &grad_base);
    REQUIRE(grad_base.size() == base.texel_count());
    Real rhs = 0;
    for (size_t t = 0; t < grad_base.size(); ++t) rhs += dot(base.get(t), grad_base[t]);
    CHECK(std::fabs(lhs - rhs) < 1e-3 * (std::fabs(lhs) + 1));
}

TEST_CASE("sample_prefiltered: endpoints, mip lerp, and gradients") {
    Cubemap cube = smooth_env(16);
    CHECK_THROWS_AS(sample_prefiltered(cube, Vec3{0, 0, 1}, 0.5), InputError);
    const int levels = prefilter_levels(16);
    prefilter_cubemap(&cube, levels);

    const Vec3 dir = normalize(Vec3{0.3, -0.4, 0.85});

    // Roughness endpoints hit the base and coarsest levels exactly.
    const Vec3 at0 = sample_prefiltered(cube, dir, 0.0);
    const Vec3 base = cube.mips()[0].sample_bilinear(dir);
    CHECK(at0.x == base.x);
    CHECK(at0.y == base.y);
    CHECK(at0.z == base.z);
    const Vec3 at1 = sample_prefiltered(cube, dir, 1.0);
    const Vec3 coarse = cube.mips()[levels - 1].sample_bilinear(dir);
    CHECK(at1.x == coarse.x);
    CHECK(at1.y == coarse.y);
    CHECK(at1.z == coarse.z);

    // Interior roughness is the linear blend of the bracketing levels.
    const Real r = 0.37;
    MipTaps taps;
    const Vec3 mid = sample_prefiltered(cube, dir, r, &taps);
    const Real lf = r * (levels - 1);
    const Vec3 manual = cube.mips()[taps.level0].sample_bilinear(dir) *
                            (1 - (lf - taps.level0)) +
                        cube.mips()[taps.level1].sample_bilinear(dir) * (lf - taps.level0);
    check_close(mid, manual, 1e-14);

    // Taps reconstruct the value.
    Vec3 recon{0, 0, 0};
    for (int i = 0; i < 4; ++i) {
        recon += cube.mips()[taps.level0].get(taps.taps0.index[i]) *
                 (taps.taps0.weight[i] * (1 - taps.t));
        recon += cube.mips()[taps.level1].get(taps.taps1.index[i]) *
                 (taps.taps1.weight[i] * taps.t);
    }
    check_close(recon, mid, 1e-12);

    // Roughness gradient against central differences.
    const Real h = 1e-4;
    const Vec3 rp = sample_prefiltered(cube, dir, r + h);
    const Vec3 rm = sample_prefiltered(cube, dir, r - h);
    check_close(taps.dvalue_droughness, (rp - rm) / (2 * h), 1e-6);

    // Direction gradient against central differences (raw, unnormalized).
    for (int axis = 0; axis < 3; ++axis) {
        Vec3 dp = dir, dm = dir;
        dp[axis] += 1e-5;
        dm[axis] -= 1e-5;
        const Vec3 fd = (sample_prefiltered(cube, dp, r) - sample_prefiltered(cube, dm, r)) /
                        (2e-5);
        for (int c = 0; c < 3; ++c) {
            check_abs(taps.dvalue_ddir.m[c][axis], fd[c], 2e-5);
        }
    }
}

TEST_CASE("irradiance: octahedral mapping round trip") {
    const Rng rng(31, 0);
    for (int i = 0; i < 200; ++i) {
        const Vec3 n = rng.sphere(i);
        Real u, v;
        IrradianceTexture::octa_encode(n, &u, &v);
        CHECK(u >= 0.0);
        CHECK(u <= 1.0);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        check_close(IrradianceTexture::octa_decode(u, v), n, 1e-12);
    }
}

TEST_CASE("irradiance: texture matches the harmonic expansion it tabulates") {
    std::vector<Vec3> env(9);
    const Rng rng(77, 1);
    env[0] = Vec3{1.0, 0.9, 1.1};
    for (int j = 1; j < 9; ++j) {
        env[j] = Vec3{rng.uniform(3 * j), rng.uniform(3 * j + 1), rng.uniform(3 * j + 2)} *
                     0.24 -
                 Vec3(0.12);
    }
    const IrradianceTexture tex = build_irradiance(env);

    const Real band_a[3] = {kPi, 2 * kPi / 3, kPi / 4};
    Real basis[9];
    Real worst = 0;
    const Rng dir_rng(78, 2);
    for (int i = 0; i < 500; ++i) {
        // Mix uniform directions with near-equator ones to stress the seams.
        Vec3 n = dir_rng.sphere(i);
        if (i % 3 == 0) n = normalize(Vec3{n.x, n.y, n.z * 0.05});
        sh_eval_basis(n, 3, basis);
        Vec3 want{0, 0, 0};
        for (int j = 0; j < 9; ++j) {
            const int l = j < 1 ? 0 : (j < 4 ? 1 : 2);
            want += env[j] * (band_a[l] * basis[j]);
        }
        const Vec3 got = tex.sample(n);
        for (int c = 0; c < 3; ++c) {
            worst = std::max(worst, rel_err(got[c], want[c]));
        }
    }
    CHECK(worst < 0.02);
}

TEST_CASE("irradiance: constant and single-lobe environments") {
    // Constant unit radiance: DC-only SH, irradiance pi everywhere.
    std::vector<Vec3> env(9, Vec3{0, 0, 0});
    env[0] = Vec3(2.0 * std::sqrt(kPi));
    const IrradianceTexture tex = build_irradiance(env);
    const Rng rng(5, 3);
    for (int i = 0; i < 50; ++i) {
        check_close(tex.sample(rng.sphere(i)), Vec3(kPi), 1e-9);
    }

    // A single band-1 lobe passes through with gain 2*pi/3.
    std::vector<Vec3> lobe(9, Vec3{0, 0, 0});
    lobe[2] = Vec3(1.0);  // the z-aligned band-1 basis function
    const IrradianceTexture tz = build_irradiance(lobe);
    Real basis[9];
    sh_eval_basis(Vec3{0, 0, 1}, 3, basis);
    const Real want_peak = 2 * kPi / 3 * basis[2];
    const Vec3 got_peak = tz.sample(Vec3{0, 0, 1});
    CHECK(got_peak.x == doctest::Approx(want_peak).epsilon(0.01));
    // Below the horizon the (clamped) lobe integrates to zero.
    CHECK(std::fabs(tz.sample(Vec3{0, 0, -1}).x) < 1e-9);

    CHECK_THROWS_AS(build_irradiance(std::vector<Vec3>(4)), InputError);
    IrradianceTexture unbuilt;
    CHECK_THROWS_AS(unbuilt.sample(Vec3{0, 0, 1}), InputError);
}

TEST_CASE("irradiance: sample taps and gradients match finite differences") {
    std::vector<Vec3> env(9);
    const Rng rng(123, 9);
    env[0] = Vec3{1.2, 1.0, 0.8};
    for (int j = 1; j < 9; ++j) {
        env[j] = Vec3{rng.uniform(3 * j), rng.uniform(3 * j + 1), rng.uniform(3 * j + 2)} *
                     0.3 -
                 Vec3(0.15);
    }
    const IrradianceTexture tex = build_irradiance(env);

    const Vec3 points[] = {normalize(Vec3{0.3, 0.5, 0.8}), normalize(Vec3{-0.6, 0.2, 0.77}),
                           normalize(Vec3{0.3, 0.5, -0.8}), normalize(Vec3{0.9, -0.1, -0.4})};
    for (const Vec3& n : points) {
        IrradianceTexture::Taps taps;
        const Vec3 value = tex.sample(n, &taps);

        Real wsum = 0;
        Vec3 recon{0, 0, 0};
        for (int i = 0; i < 4; ++i) {
            wsum += taps.weight[i];
            const int x = taps.texel[i] % IrradianceTexture::kRes;
            const int y = taps.texel[i] / IrradianceTexture::kRes;
            recon += Vec3{tex.img.at(x, y, 0), tex.img.at(x, y, 1), tex.img.at(x, y, 2)} *
                     taps.weight[i];
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
        check_close(recon, value, 1e-12);

        const Real h = 1e-5;
        for (int axis = 0; axis < 3; ++axis) {
            Vec3 np = n, nm = n;
            np[axis] += h;
            nm[axis] -= h;
            const Vec3 fd = (tex.sample(np) - tex.sample(nm)) / (2 * h);
            for (int c = 0; c < 3; ++c) {
                check_abs(taps.dvalue_dn.m[c][axis], fd[c], 1e-5);
            }
        }
    }
}

TEST_CASE("equirect import: constants and pole orientation") {
    Image flat(8, 4, 3);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 8; ++x) flat.set_rgb(x, y, Vec3{0.3, 0.6, 0.9});
    const Cubemap cube = cubemap_from_equirect(flat, 8);
    for (size_t t = 0; t < cube.texel_count(); ++t) {
        check_close(cube.get(t), Vec3{0.3, 0.6, 0.9}, 1e-6);  // float texel storage
    }

    // A vertical ramp follows the polar angle: +y near 0, -y near 1.
    const int w = 16, h = 8;
    Image ramp(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) ramp.set_rgb(x, y, Vec3((y + 0.5) / h));
    const Cubemap rc = cubemap_from_equirect(ramp, 8);
    for (int face = 0; face < 6; ++face) {
        for (int t = 0; t < 8; t += 3) {
            const Vec3 d = rc.texel_dir(face, t, t);
            const Real want = std::acos(clamp(d.y, -1.0, 1.0)) / kPi;
            CHECK(std::fabs(rc.get(face, t, t).x - want) <= 1.0 / h);
        }
    }

    Image gray(8, 4, 1);
    CHECK_THROWS_AS(cubemap_from_equirect(gray, 8), InputError);
    CHECK_THROWS_AS(cubemap_from_equirect(Image(), 8), InputError);
}

TEST_CASE("irradiance build backward: finite differences through the clamp") {
    // Environment with a strong negative lobe so some texels clamp to
    // zero and their gradient must be gated off.
    std::vector<Vec3> sh(9, Vec3{0, 0, 0});
    sh[0] = {0.4, 0.5, 0.6};
    sh[2] = {0.9, -0.8, 0.7};   // pushes the -z half negative
    sh[5] = {0.2, 0.1, -0.3};
    const IrradianceTexture irr = build_irradiance(sh);

    // Random linear functional over the texture.
    const Rng rng(33, 0);
    Image weights(IrradianceTexture::kRes, IrradianceTexture::kRes, 3);
    for (size_t i = 0; i < weights.data_size(); ++i)
        weights.data()[i] = rng.uniform(i) - 0.5;
    const auto loss = [&](const std::vector<Vec3>& coeffs) {
        const IrradianceTexture t = build_irradiance(coeffs);
        Real l = 0;
        for (size_t i = 0; i < t.img.data_size(); ++i)
            l += weights.data()[i] * t.img.data()[i];
        return l;
    };

    std::vector<Vec3> grad;
    build_irradiance_backward(sh, weights, &grad);
    REQUIRE(grad.size() == 9);

    int clamped = 0;
    for (size_t i = 0; i < irr.img.data_size(); ++i)
        if (irr.img.data()[i] == 0.0) ++clamped;
    CHECK(clamped > 100);  // the clamp is actually exercised

    for (int j = 0; j < 9; ++j) {
        for (int c = 0; c < 3; ++c) {
            std::vector<Vec3> sh2 = sh;
            sh2[j][c] += 1e-5;
            const Real hi = loss(sh2);
            sh2[j][c] = sh[j][c] - 1e-5;
            const Real lo = loss(sh2);
            CHECK(rel_err(grad[j][c], (hi - lo) / 2e-5, 1e-6) < 1e-5);
        }
    }

    CHECK_THROWS_AS(build_irradiance_backward(sh, Image(4, 4, 3), &grad), InputError);
}

TEST_CASE("cubemap sh projection backward: exact adjoint identity") {
    // <sh(x), g> == <x, sh_backward(g)> for every cube resolution the
    // projection itself allows, since the map is linear in the texels.
    const int res = 8, bands = 3;
    const Rng rng(71, 0);
    Cubemap cube(res);
    for (size_t t = 0; t < cube.texel_count(); ++t) {
        cube.set(t, {rng.uniform(3 * t) - 0.5, rng.uniform(3 * t + 1) - 0.5,
                     rng.uniform(3 * t + 2) - 0.5});
    }
    std::vector<Vec3> g(9);
    for (int j = 0; j < 9; ++j)
        g[j] = {rng.uniform(1000 + 3 * j), rng.uniform(1001 + 3 * j),
                rng.uniform(1002 + 3 * j)};

    const std::vector<Vec3> coeffs = cubemap_to_sh(cube, bands);
    const std::vector<Vec3> back = cubemap_to_sh_backward(res, bands, g);
    REQUIRE(back.size() == cube.texel_count());

    Real lhs = 0, rhs = 0;
    for (int j = 0; j < 9; ++j) lhs += dot(coeffs[j], g[j]);
    for (size_t t = 0; t < cube.texel_count(); ++t) rhs += dot(Vec3(cube.get(t)), back[t]);
    check_abs(lhs, rhs, 1e-9 * (1 + std::fabs(lhs)));

    CHECK_THROWS_AS(cubemap_to_sh_backward(res, 3, std::vector<Vec3>(4)), InputError);
}
