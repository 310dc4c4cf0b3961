#include "rtr/losses.hpp"

#include <array>
#include <cmath>
#include <string>

namespace rtr {

namespace {

constexpr int kWindow = 11;      // SSIM window edge
constexpr Real kSigma = 1.5;     // SSIM window falloff
constexpr Real kC1 = 1e-4;       // (0.01 L)^2 stabilizer, L = 1
constexpr Real kC2 = 9e-4;       // (0.03 L)^2 stabilizer

const std::array<Real, kWindow>& window_1d() {
    static const std::array<Real, kWindow> w = [] {
        std::array<Real, kWindow> v{};
        Real sum = 0;
        for (int i = 0; i < kWindow; ++i) {
            const Real d = i - (kWindow - 1) * 0.5;
            v[i] = std::exp(-0.5 * d * d / (kSigma * kSigma));
            sum += v[i];
        }
        for (Real& x : v) x /= sum;
        return v;
    }();
    return w;
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (a.width() != b.width() || a.height() != b.height() ||
        a.channels() != b.channels())
        throw InputError(std::string(what) + ": image shapes differ");
}

void require_mask(const Image& img, const Image& mask, const char* what) {
    if (mask.channels() != 1 || mask.width() != img.width() ||
        mask.height() != img.height())
        throw InputError(std::string(what) + ": mask must be one-channel, same size");
}

/// Window moments of two images around (cx, cy) for one channel,
/// sampling clamp-to-edge.
struct Moments {
    Real mx = 0, my = 0, exx = 0, eyy = 0, exy = 0;
};

Moments window_moments(const Image& x, const Image& y, int cx, int cy, int c) {
    const auto& w1 = window_1d();
    Moments m;
    const int r = kWindow / 2;
    for (int dy = -r; dy <= r; ++dy) {
        const int py = clamp(cy + dy, 0, y.height() - 1);
        const Real wy = w1[dy + r];
        for (int dx = -r; dx <= r; ++dx) {
            const int px = clamp(cx + dx, 0, x.width() - 1);
            const Real w = wy * w1[dx + r];
            const Real a = x.at(px, py, c);
            const Real b = y.at(px, py, c);
            m.mx += w * a;
            m.my += w * b;
            m.exx += w * a * a;
            m.eyy += w * b * b;
            m.exy += w * a * b;
        }
    }
    return m;
}

struct SsimParts {
    Real value = 0;       // SSIM at this pixel
    Real a1 = 0, a2 = 0;  // numerator factors
    Real b1 = 0, b2 = 0;  // denominator factors
};

SsimParts ssim_at(const Moments& m) {
    SsimParts s;
    const Real vx = m.exx - m.mx * m.mx;
    const Real vy = m.eyy - m.my * m.my;
    const Real cxy = m.exy - m.mx * m.my;
    s.a1 = 2 * m.mx * m.my + kC1;
    s.a2 = 2 * cxy + kC2;
    s.b1 = m.mx * m.mx + m.my * m.my + kC1;
    s.b2 = vx + vy + kC2;
    s.value = (s.a1 * s.a2) / (s.b1 * s.b2);
    return s;
}

}  // namespace

Real total_loss(const LossTerms& t, const LossWeights& w, bool pbr_active) {
    Real total = t.render_hybrid + w.normal * t.normal + w.smooth * t.smooth +
                 w.mask * t.mask;
    if (pbr_active)
        total += t.render_pbr + w.light * t.light + w.metal * t.metal;
    return total;
}

Real loss_render(const Image& pred, const Image& gt, Real dssim_weight) {
    require_same_shape(pred, gt, "rendering loss");
    if (pred.data_size() == 0) throw InputError("rendering loss: empty image");
    const int w = pred.width(), h = pred.height(), ch = pred.channels();
    const Real inv_n = 1.0 / (Real(w) * h * ch);
    Real l1 = 0, ssim = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                l1 += std::fabs(pred.at(x, y, c) - gt.at(x, y, c));
                ssim += ssim_at(window_moments(pred, gt, x, y, c)).value;
            }
        }
    }
    l1 *= inv_n;
    ssim *= inv_n;
    return (1.0 - dssim_weight) * l1 + dssim_weight * 0.5 * (1.0 - ssim);
}

void loss_render_backward(const Image& pred, const Image& gt, Real dssim_weight,
                          Real grad_scale, Image* grad_pred) {
    require_same_shape(pred, gt, "rendering loss");
    require_same_shape(pred, *grad_pred, "rendering loss gradient");
    const int w = pred.width(), h = pred.height(), ch = pred.channels();
    const Real inv_n = 1.0 / (Real(w) * h * ch);
    const Real g_l1 = grad_scale * (1.0 - dssim_weight) * inv_n;
    const Real g_ssim = grad_scale * dssim_weight * -0.5 * inv_n;
    const auto& w1 = window_1d();
    const int r = kWindow / 2;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                const Real d = pred.at(x, y, c) - gt.at(x, y, c);
                if (d != 0) grad_pred->at(x, y, c) += g_l1 * (d > 0 ? 1.0 : -1.0);

                const Moments m = window_moments(pred, gt, x, y, c);
                const SsimParts s = ssim_at(m);
                const Real inv_bb = 1.0 / (s.b1 * s.b2);
                // Window-level partials of the SSIM value.
                const Real d_mx =
                    2 * m.my * s.a2 * inv_bb - 2 * m.mx * s.value / s.b1;
                const Real d_vx = -s.value / s.b2;
                const Real d_cxy = 2 * s.a1 * inv_bb;
                for (int dy = -r; dy <= r; ++dy) {
                    const int py = clamp(y + dy, 0, h - 1);
                    const Real wy = w1[dy + r];
                    for (int dx = -r; dx <= r; ++dx) {
                        const int px = clamp(x + dx, 0, w - 1);
                        const Real wt = wy * w1[dx + r];
                        const Real a = pred.at(px, py, c);
                        const Real b = gt.at(px, py, c);
                        const Real d_tap = d_mx + d_vx * 2 * (a - m.mx) +
                                           d_cxy * (b - m.my);
                        grad_pred->at(px, py, c) += g_ssim * wt * d_tap;
                    }
                }
            }
        }
    }
}

Real loss_normal(const Image& normal, const Image& pseudo, const Image& mask) {
    require_same_shape(normal, pseudo, "normal loss");
    require_mask(normal, mask, "normal loss");
    if (normal.channels() != 3) throw InputError("normal loss: buffers must be rgb");
    int count = 0;
    Real sum = 0;
    for (int y = 0; y < normal.height(); ++y) {
        for (int x = 0; x < normal.width(); ++x) {
            if (mask.at(x, y, 0) <= 0) continue;
            sum += length(normal.rgb(x, y) - pseudo.rgb(x, y));
            ++count;
        }
    }
    return count == 0 ? 0.0 : sum / count;
}

void loss_normal_backward(const Image& normal, const Image& pseudo, const Image& mask,
                          Real grad_scale, Image* grad_normal, Image* grad_pseudo) {
    require_same_shape(normal, pseudo, "normal loss");
    require_mask(normal, mask, "normal loss");
    int count = 0;
    for (int y = 0; y < normal.height(); ++y)
        for (int x = 0; x < normal.width(); ++x)
            if (mask.at(x, y, 0) > 0) ++count;
    if (count == 0) return;
    const Real scale = grad_scale / count;
    for (int y = 0; y < normal.height(); ++y) {
        for (int x = 0; x < normal.width(); ++x) {
            if (mask.at(x, y, 0) <= 0) continue;
            const Vec3 d = normal.rgb(x, y) - pseudo.rgb(x, y);
            const Real len = length(d);
            if (len < 1e-12) continue;
            const Vec3 g = d * (scale / len);
            if (grad_normal) grad_normal->add_rgb(x, y, g);
            if (grad_pseudo) grad_pseudo->add_rgb(x, y, g * -1.0);
        }
    }
}

Real loss_light(const Cubemap& env) {
    if (env.resolution() == 0) throw InputError("light loss: empty cubemap");
    Real sum = 0;
    for (size_t t = 0; t < env.texel_count(); ++t) {
        const Vec3 L = env.get(t);
        const Real mean = (L.x + L.y + L.z) / 3.0;
        sum += std::fabs(L.x - mean) + std::fabs(L.y - mean) + std::fabs(L.z - mean);
    }
    return sum / Real(env.texel_count());
}

void loss_light_backward(const Cubemap& env, Real grad_scale,
                         std::vector<Vec3>* grad_texels) {
    if (env.resolution() == 0) throw InputError("light loss: empty cubemap");
    if (grad_texels->size() != env.texel_count())
        grad_texels->resize(env.texel_count(), Vec3{0, 0, 0});
    const Real scale = grad_scale / Real(env.texel_count());
    for (size_t t = 0; t < env.texel_count(); ++t) {
        const Vec3 L = env.get(t);
        const Real mean = (L.x + L.y + L.z) / 3.0;
        Vec3 sign{0, 0, 0};
        Real sign_sum = 0;
        for (int c = 0; c < 3; ++c) {
            const Real d = L[c] - mean;
            sign[c] = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
            sign_sum += sign[c];
        }
        for (int c = 0; c < 3; ++c)
            (*grad_texels)[t][c] += scale * (sign[c] - sign_sum / 3.0);
    }
}

Real loss_metal(const Image& metallic, const Image& intensity, const Image& mask) {
    require_same_shape(metallic, intensity, "metal loss");
    require_mask(metallic, mask, "metal loss");
    if (metallic.channels() != 1)
        throw InputError("metal loss: buffers must be one-channel");
    int count = 0;
    Real sum = 0;
    for (int y = 0; y < metallic.height(); ++y) {
        for (int x = 0; x < metallic.width(); ++x) {
            if (mask.at(x, y, 0) <= 0) continue;
            sum += std::fabs(metallic.at(x, y, 0) - intensity.at(x, y, 0));
            ++count;
        }
    }
    return count == 0 ? 0.0 : sum / count;
}

void loss_metal_backward(const Image& metallic, const Image& intensity,
                         const Image& mask, Real grad_scale, Image* grad_metallic,
                         Image* grad_intensity) {
    require_same_shape(metallic, intensity, "metal loss");
    require_mask(metallic, mask, "metal loss");
    int count = 0;
    for (int y = 0; y < metallic.height(); ++y)
        for (int x = 0; x < metallic.width(); ++x)
            if (mask.at(x, y, 0) > 0) ++count;
    if (count == 0) return;
    const Real scale = grad_scale / count;
    for (int y = 0; y < metallic.height(); ++y) {
        for (int x = 0; x < metallic.width(); ++x) {
            if (mask.at(x, y, 0) <= 0) continue;
            const Real d = metallic.at(x, y, 0) - intensity.at(x, y, 0);
            if (d == 0) continue;
            const Real s = d > 0 ? scale : -scale;
            if (grad_metallic) grad_metallic->at(x, y, 0) += s;
            if (grad_intensity) grad_intensity->at(x, y, 0) -= s;
        }
    }
}

namespace {

/// Forward-difference gradient magnitude of all channels at (x, y);
/// pixels on the far edges use only the difference that exists.
Real fdiff_norm(const Image& img, int x, int y) {
    Real sq = 0;
    for (int c = 0; c < img.channels(); ++c) {
        if (x + 1 < img.width()) {
            const Real dx = img.at(x + 1, y, c) - img.at(x, y, c);
            sq += dx * dx;
        }
        if (y + 1 < img.height()) {
            const Real dy = img.at(x, y + 1, c) - img.at(x, y, c);
            sq += dy * dy;
        }
    }
    return std::sqrt(sq);
}

}  // namespace

Real loss_smooth(const Image& attr, const Image& gt) {
    if (attr.width() != gt.width() || attr.height() != gt.height())
        throw InputError("smoothness loss: image sizes differ");
    if (attr.data_size() == 0) throw InputError("smoothness loss: empty image");
    Real sum = 0;
    for (int y = 0; y < attr.height(); ++y)
        for (int x = 0; x < attr.width(); ++x)
            sum += fdiff_norm(attr, x, y) * std::exp(-fdiff_norm(gt, x, y));
    return sum / (Real(attr.width()) * attr.height());
}

void loss_smooth_backward(const Image& attr, const Image& gt, Real grad_scale,
                          Image* grad_attr) {
    if (attr.width() != gt.width() || attr.height() != gt.height())
        throw InputError("smoothness loss: image sizes differ");
    require_same_shape(attr, *grad_attr, "smoothness loss gradient");
    const Real scale = grad_scale / (Real(attr.width()) * attr.height());
    for (int y = 0; y < attr.height(); ++y) {
        for (int x = 0; x < attr.width(); ++x) {
            const Real norm = fdiff_norm(attr, x, y);
            if (norm < 1e-12) continue;
            const Real g = scale * std::exp(-fdiff_norm(gt, x, y)) / norm;
            for (int c = 0; c < attr.channels(); ++c) {
                if (x + 1 < attr.width()) {
                    const Real dx = attr.at(x + 1, y, c) - attr.at(x, y, c);
                    grad_attr->at(x + 1, y, c) += g * dx;
                    grad_attr->at(x, y, c) -= g * dx;
                }
                if (y + 1 < attr.height()) {
                    const Real dy = attr.at(x, y + 1, c) - attr.at(x, y, c);
                    grad_attr->at(x, y + 1, c) += g * dy;
                    grad_attr->at(x, y, c) -= g * dy;
                }
            }
        }
    }
}

Real loss_mask(const Image& coverage, const Image& mask) {
    require_same_shape(coverage, mask, "mask loss");
    if (coverage.channels() != 1)
        throw InputError("mask loss: buffers must be one-channel");
    if (coverage.data_size() == 0) throw InputError("mask loss: empty image");
    Real sum = 0;
    for (int y = 0; y < coverage.height(); ++y) {
        for (int x = 0; x < coverage.width(); ++x) {
            const Real o = clamp(coverage.at(x, y, 0), 1e-5, 1.0 - 1e-5);
            const Real m = mask.at(x, y, 0);
            sum += -m * std::log(o) - (1.0 - m) * std::log(1.0 - o);
        }
    }
    return sum / (Real(coverage.width()) * coverage.height());
}

void loss_mask_backward(const Image& coverage, const Image& mask, Real grad_scale,
                        Image* grad_coverage) {
    require_same_shape(coverage, mask, "mask loss");
    require_same_shape(coverage, *grad_coverage, "mask loss gradient");
    const Real scale = grad_scale / (Real(coverage.width()) * coverage.height());
    for (int y = 0; y < coverage.height(); ++y) {
        for (int x = 0; x < coverage.width(); ++x) {
            const Real raw = coverage.at(x, y, 0);
            if (raw <= 1e-5 || raw >= 1.0 - 1e-5) continue;  // clamped flat
            const Real m = mask.at(x, y, 0);
            grad_coverage->at(x, y, 0) +=
                scale * (-m / raw + (1.0 - m) / (1.0 - raw));
        }
    }
}

}  // namespace rtr
