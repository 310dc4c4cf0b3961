#include "rtr/hybrid.hpp"

#include <cmath>

#include "rtr/parallel.hpp"

namespace rtr {

namespace {

void require_light(const std::vector<Vec3>& sh_light) {
    if (int(sh_light.size()) != kShCoeffs)
        throw InputError("radiance-transfer shading expects " +
                         std::to_string(kShCoeffs) + " lighting coefficients");
}

void require_gbuffer(const Image& normal, const Image& tint, const Image& rough,
                     const Image& alpha) {
    const int w = alpha.width(), h = alpha.height();
    if (w <= 0 || h <= 0) throw InputError("deferred shading: empty G-buffer");
    const auto bad = [&](const Image& img, int ch) {
        return img.width() != w || img.height() != h || img.channels() != ch;
    };
    if (bad(normal, 3) || bad(tint, 3) || bad(rough, 1) || bad(alpha, 1))
        throw InputError("deferred shading: G-buffer plane shapes disagree");
}

}  // namespace

Vec3 shade_diffuse_rt(const GaussianSplat& splat, const std::vector<Vec3>& sh_light) {
    require_light(sh_light);
    Vec3 dot_lt{0, 0, 0};
    for (int j = 0; j < kShCoeffs; ++j) dot_lt += sh_light[j] * splat.transfer[j];
    return splat.diffuse_color * max(dot_lt, Vec3{0, 0, 0});
}

void shade_diffuse_rt_backward(const GaussianSplat& splat,
                               const std::vector<Vec3>& sh_light, const Vec3& grad_out,
                               Vec3* grad_diffuse_color,
                               std::array<Real, kShCoeffs>* grad_transfer,
                               std::vector<Vec3>* grad_sh_light) {
    require_light(sh_light);
    Vec3 dot_lt{0, 0, 0};
    for (int j = 0; j < kShCoeffs; ++j) dot_lt += sh_light[j] * splat.transfer[j];
    // The rectifier gates each channel's path.
    Vec3 gate{dot_lt.x > 0 ? Real(1) : Real(0), dot_lt.y > 0 ? Real(1) : Real(0),
              dot_lt.z > 0 ? Real(1) : Real(0)};
    if (grad_diffuse_color) *grad_diffuse_color += grad_out * max(dot_lt, Vec3{0, 0, 0});
    const Vec3 gated = grad_out * splat.diffuse_color * gate;
    for (int j = 0; j < kShCoeffs; ++j) {
        if (grad_transfer) (*grad_transfer)[j] += dot(gated, sh_light[j]);
        if (grad_sh_light) (*grad_sh_light)[j] += gated * splat.transfer[j];
    }
}

std::array<Real, kShCoeffs> decode_transfer(const TransferDecoder& decoder,
                                            const std::array<Real, kFeatureDim>& feature,
                                            const Vec3& out_dir,
                                            TransferDecoder::Eval* eval) {
    TransferDecoder::Eval local;
    TransferDecoder::Eval* e = eval ? eval : &local;
    decoder.forward(feature, out_dir, e);
    return e->out;
}

Vec3 shade_specular_rt(const GaussianSplat& splat, const std::vector<Vec3>& sh_light,
                       const TransferDecoder& decoder, const Vec3& out_dir,
                       SpecularRtEval* eval) {
    require_light(sh_light);
    SpecularRtEval local;
    SpecularRtEval* e = eval ? eval : &local;
    decoder.forward(splat.feature, out_dir, &e->decoder);
    e->dot = {0, 0, 0};
    for (int j = 0; j < kShCoeffs; ++j) e->dot += sh_light[j] * e->decoder.out[j];
    return splat.specular_color * max(e->dot, Vec3{0, 0, 0});
}

void shade_specular_rt_backward(const GaussianSplat& splat,
                                const std::vector<Vec3>& sh_light,
                                const TransferDecoder& decoder,
                                const SpecularRtEval& eval, const Vec3& grad_out,
                                Vec3* grad_specular_color,
                                std::array<Real, kFeatureDim>* grad_feature,
                                Vec3* grad_out_dir, TransferDecoder::Grads* grad_decoder,
                                std::vector<Vec3>* grad_sh_light) {
    require_light(sh_light);
    if (grad_specular_color)
        *grad_specular_color += grad_out * max(eval.dot, Vec3{0, 0, 0});
    const Vec3 gate{eval.dot.x > 0 ? Real(1) : Real(0),
                    eval.dot.y > 0 ? Real(1) : Real(0),
                    eval.dot.z > 0 ? Real(1) : Real(0)};
    const Vec3 gated = grad_out * splat.specular_color * gate;
    std::array<Real, kShCoeffs> grad_decoded{};
    for (int j = 0; j < kShCoeffs; ++j) {
        grad_decoded[j] = dot(gated, sh_light[j]);
        if (grad_sh_light) (*grad_sh_light)[j] += gated * eval.decoder.out[j];
    }
    if (grad_decoder || grad_feature || grad_out_dir) {
        TransferDecoder::Grads local;
        decoder.backward(eval.decoder, grad_decoded,
                         grad_decoder ? grad_decoder : &local, grad_feature,
                         grad_out_dir);
    }
}

Image deferred_reflection(const Image& normal, const Image& tint, const Image& rough,
                          const Image& alpha, const Camera& cam, const Cubemap& refl_map,
                          const BrdfLut& lut, const Vec3& background) {
    require_gbuffer(normal, tint, rough, alpha);
    if (!refl_map.has_mips())
        throw InputError("deferred reflection: reflection map has no mip chain");
    if (lut.empty()) throw InputError("deferred reflection: scale/bias table not built");

    const int w = alpha.width(), h = alpha.height();
    Image out(w, h, 3);
    parallel_for(0, h, [&](int64_t y0, int64_t y1, int) {
        for (int64_t y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                if (alpha.at(x, int(y), 0) < 0.5) {
                    out.set_rgb(x, int(y), background);
                    continue;
                }
                const Vec3 n_raw = normal.rgb(x, int(y));
                const Real len = length(n_raw);
                if (len < 1e-9) {
                    out.set_rgb(x, int(y), background);
                    continue;
                }
                const Vec3 n = n_raw / len;
                const Vec3 v = -cam.ray_dir(x + 0.5, y + 0.5);
                const Real rr = rough.at(x, int(y), 0);
                const Vec3 e = sample_prefiltered(refl_map, reflect(v, n), rr);
                Real a, b;
                lut.sample(dot(n, v), rr, &a, &b);
                out.set_rgb(x, int(y), tint.rgb(x, int(y)) * e * (a + b));
            }
        }
    });
    return out;
}

void deferred_reflection_backward(const Image& normal, const Image& tint,
                                  const Image& rough, const Image& alpha,
                                  const Camera& cam, const Cubemap& refl_map,
                                  const BrdfLut& lut, const Image& grad_out,
                                  Image* grad_normal, Image* grad_tint,
                                  Image* grad_rough,
                                  std::vector<std::vector<Vec3>>* grad_mips) {
    require_gbuffer(normal, tint, rough, alpha);
    if (!refl_map.has_mips())
        throw InputError("deferred reflection: reflection map has no mip chain");
    if (lut.empty()) throw InputError("deferred reflection: scale/bias table not built");
    const int w = alpha.width(), h = alpha.height();
    if (grad_out.width() != w || grad_out.height() != h || grad_out.channels() != 3)
        throw InputError("deferred reflection: gradient image shape mismatch");

    const std::vector<Cubemap>& mips = refl_map.mips();
    const int n_levels = int(mips.size());
    if (grad_mips) {
        grad_mips->resize(n_levels);
        for (int k = 0; k < n_levels; ++k) {
            const size_t n = size_t(6) * mips[k].resolution() * mips[k].resolution();
            if ((*grad_mips)[k].size() != n) (*grad_mips)[k].assign(n, Vec3{0, 0, 0});
        }
    }

    // Per-pixel image gradients land in disjoint rows; mip gradients
    // are gathered per chunk and reduced in chunk order so the scatter
    // stays deterministic under threading.
    const int n_chunks = thread_count();
    std::vector<std::vector<std::vector<Vec3>>> chunk_mips(
        grad_mips ? n_chunks : 0);
    parallel_for(0, h, [&](int64_t y0, int64_t y1, int chunk) {
        std::vector<std::vector<Vec3>>* local = nullptr;
        if (grad_mips) {
            local = &chunk_mips[chunk];
            local->resize(n_levels);
            for (int k = 0; k < n_levels; ++k) {
                (*local)[k].assign(size_t(6) * mips[k].resolution() * mips[k].resolution(),
                                   Vec3{0, 0, 0});
            }
        }
        for (int64_t y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                if (alpha.at(x, int(y), 0) < 0.5) continue;
                const Vec3 n_raw = normal.rgb(x, int(y));
                const Real len = length(n_raw);
                if (len < 1e-9) continue;
                const Vec3 n = n_raw / len;
                const Vec3 v = -cam.ray_dir(x + 0.5, y + 0.5);
                const Real nv = dot(n, v);
                const Real rr = rough.at(x, int(y), 0);
                MipTaps taps;
                const Vec3 e = sample_prefiltered(refl_map, reflect(v, n), rr, &taps);
                Real a, b, da_dnv, da_dr, db_dnv, db_dr;
                lut.sample(nv, rr, &a, &b, &da_dnv, &da_dr, &db_dnv, &db_dr);
                const Real s = a + b;

                const Vec3 g = grad_out.rgb(x, int(y));
                const Vec3 gt = g * tint.rgb(x, int(y));
                if (grad_tint) grad_tint->add_rgb(x, int(y), g * e * s);
                if (local) {
                    const Real w0 = 1 - taps.t, w1 = taps.t;
                    for (int k = 0; k < 4; ++k) {
                        (*local)[taps.level0][taps.taps0.index[k]] +=
                            gt * (s * w0 * taps.taps0.weight[k]);
                        (*local)[taps.level1][taps.taps1.index[k]] +=
                            gt * (s * w1 * taps.taps1.weight[k]);
                    }
                }
                const Real g_scale = dot(gt, e);
                if (grad_rough) {
                    grad_rough->at(x, int(y), 0) +=
                        s * dot(gt, taps.dvalue_droughness) + g_scale * (da_dr + db_dr);
                }
                if (grad_normal) {
                    // Chain: reflection direction, table row, and the
                    // normalization of the blended normal.
                    const Vec3 g_dir = taps.dvalue_ddir.tmul(gt) * s;
                    Vec3 g_n = v * (2 * dot(g_dir, n)) + g_dir * (2 * nv) +
                               v * (g_scale * (da_dnv + db_dnv));
                    g_n = (g_n - n * dot(n, g_n)) / len;
                    grad_normal->add_rgb(x, int(y), g_n);
                }
            }
        }
    });
    if (grad_mips) {
        for (int c = 0; c < n_chunks; ++c) {
            if (chunk_mips[c].empty()) continue;
            for (int k = 0; k < n_levels; ++k) {
                Vec3* dst = (*grad_mips)[k].data();
                const std::vector<Vec3>& src = chunk_mips[c][k];
                for (size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
            }
        }
    }
}

Image blend_hybrid(const Image& radiance, const Image& reflection,
                   const Image& intensity) {
    const int w = radiance.width(), h = radiance.height();
    if (reflection.width() != w || reflection.height() != h ||
        intensity.width() != w || intensity.height() != h || radiance.channels() != 3 ||
        reflection.channels() != 3 || intensity.channels() != 1)
        throw InputError("hybrid blend: image shapes disagree");
    Image out(w, h, 3);
    parallel_for(0, h, [&](int64_t y0, int64_t y1, int) {
        for (int64_t y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                const Real ri = intensity.at(x, int(y), 0);
                out.set_rgb(x, int(y),
                            radiance.rgb(x, int(y)) * (1 - ri) +
                                reflection.rgb(x, int(y)) * ri);
            }
        }
    });
    return out;
}

void blend_hybrid_backward(const Image& radiance, const Image& reflection,
                           const Image& intensity, const Image& grad_out,
                           Image* grad_radiance, Image* grad_reflection,
                           Image* grad_intensity) {
    const int w = radiance.width(), h = radiance.height();
    if (grad_out.width() != w || grad_out.height() != h || grad_out.channels() != 3)
        throw InputError("hybrid blend: gradient image shape mismatch");
    parallel_for(0, h, [&](int64_t y0, int64_t y1, int) {
        for (int64_t y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                const Real ri = intensity.at(x, int(y), 0);
                const Vec3 g = grad_out.rgb(x, int(y));
                if (grad_radiance) grad_radiance->add_rgb(x, int(y), g * (1 - ri));
                if (grad_reflection) grad_reflection->add_rgb(x, int(y), g * ri);
                if (grad_intensity) {
                    grad_intensity->at(x, int(y), 0) +=
                        dot(g, reflection.rgb(x, int(y)) - radiance.rgb(x, int(y)));
                }
            }
        }
    });
}

}  // namespace rtr
