#include "rtr/oracle.hpp"

#include <cmath>
#include <fstream>

#include "rtr/parallel.hpp"
#include "rtr/rng.hpp"

namespace rtr {

namespace {

// Everything below re-derives its math locally (basis functions,
// sampling frames, the microfacet terms, the covariance inverse) so
// the oracle stays independent of the pipeline implementations.

void basis9(const Vec3& d, Real out[9]) {
    out[0] = 0.28209479177387814;
    out[1] = 0.4886025119029199 * d.y;
    out[2] = 0.4886025119029199 * d.z;
    out[3] = 0.4886025119029199 * d.x;
    out[4] = 1.0925484305920792 * d.x * d.y;
    out[5] = 1.0925484305920792 * d.y * d.z;
    out[6] = 0.31539156525252005 * (3 * d.z * d.z - 1);
    out[7] = 1.0925484305920792 * d.x * d.z;
    out[8] = 0.5462742152960396 * (d.x * d.x - d.y * d.y);
}

void tangent_frame(const Vec3& n, Vec3* t1, Vec3* t2) {
    const Vec3 up = std::fabs(n.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    *t1 = normalize(cross(up, n));
    *t2 = cross(n, *t1);
}

Vec3 cosine_dir(const Vec3& n, const Vec3& t1, const Vec3& t2, Real u1, Real u2) {
    const Real r = std::sqrt(u1);
    const Real phi = kTwoPi * u2;
    return t1 * (r * std::cos(phi)) + t2 * (r * std::sin(phi)) +
           n * std::sqrt(std::max(Real(0), 1 - u1));
}

Vec3 half_dir(const Vec3& n, const Vec3& t1, const Vec3& t2, Real u1, Real u2,
              Real roughness) {
    const Real a = roughness * roughness;
    const Real a2 = a * a;
    const Real c2 = (1 - u2) / (1 + (a2 - 1) * u2);
    const Real ct = std::sqrt(clamp(c2, Real(0), Real(1)));
    const Real st = std::sqrt(std::max(Real(0), 1 - c2));
    const Real phi = kTwoPi * u1;
    return t1 * (st * std::cos(phi)) + t2 * (st * std::sin(phi)) + n * ct;
}

Real geometry_term(Real n_dot_o, Real n_dot_i, Real roughness) {
    const Real r2 = roughness * roughness;
    const Real k = r2 * r2 / 2;
    const Real go = n_dot_o / (n_dot_o * (1 - k) + k);
    const Real gi = n_dot_i / (n_dot_i * (1 - k) + k);
    return go * gi;
}

Mat3 sym_inverse(const Mat3& m) {
    const Real a = m.m[0][0], b = m.m[0][1], c = m.m[0][2];
    const Real d = m.m[1][1], e = m.m[1][2], f = m.m[2][2];
    const Real ca = d * f - e * e;
    const Real cb = c * e - b * f;
    const Real cc = b * e - c * d;
    const Real det = a * ca + b * cb + c * cc;
    const Real cd = a * f - c * c;
    const Real ce = b * c - a * e;
    const Real cf = a * d - b * b;
    Mat3 r;
    r.m[0][0] = ca / det;
    r.m[0][1] = cb / det;
    r.m[0][2] = cc / det;
    r.m[1][0] = cb / det;
    r.m[1][1] = cd / det;
    r.m[1][2] = ce / det;
    r.m[2][0] = cc / det;
    r.m[2][1] = ce / det;
    r.m[2][2] = cf / det;
    return r;
}

}  // namespace

McEstimate mc_shade(const Vec3& x, const Vec3& n, const Vec3& v, const McMaterial& mat,
                    const EnvSampler& env, const VisibilitySampler& visible,
                    const McConfig& cfg) {
    if (cfg.samples < 1024)
        throw InputError("mc_shade: sample count must be at least 1024");
    if (!env) throw InputError("mc_shade: environment sampler is required");

    const Vec3 nn = normalize(n);
    const Vec3 vv = normalize(v);
    const Real n_dot_v = std::max(dot(nn, vv), Real(1e-6));
    Vec3 t1, t2;
    tangent_frame(nn, &t1, &t2);
    Vec3 f0 = mat.f0;
    if (f0.x < 0 || f0.y < 0 || f0.z < 0) {
        f0 = Vec3(0.04 * (1 - mat.metallic)) + mat.albedo * mat.metallic;
    }

    const Rng rng(cfg.seed, 0);
    const int side = int(std::lround(std::sqrt(Real(cfg.samples))));
    const bool strat = side * side == cfg.samples;
    const auto incident = [&](const Vec3& dir) {
        if (visible && !visible(x, dir)) return mat.indirect;
        return env(dir);
    };

    const int n_chunks = thread_count();
    std::vector<Vec3> sums(n_chunks, Vec3{0, 0, 0});
    std::vector<Vec3> sq_sums(n_chunks, Vec3{0, 0, 0});
    parallel_for(0, cfg.samples, [&](int64_t lo, int64_t hi, int chunk) {
        Vec3 sum{0, 0, 0}, sq{0, 0, 0};
        for (int64_t s = lo; s < hi; ++s) {
            Real u1 = rng.uniform(4 * s), u2 = rng.uniform(4 * s + 1);
            Real u3 = rng.uniform(4 * s + 2), u4 = rng.uniform(4 * s + 3);
            if (strat) {
                u1 = (s % side + u1) / side;
                u2 = (s / side + u2) / side;
                u3 = (s % side + u3) / side;
                u4 = (s / side + u4) / side;
            }
            Vec3 val{0, 0, 0};
            if (cfg.kind != McConfig::Kind::microfacet) {
                const Vec3 i = cosine_dir(nn, t1, t2, u1, u2);
                const Vec3 li = incident(i);
                if (cfg.kind == McConfig::Kind::irradiance) {
                    val += li * kPi;
                } else {
                    val += li * mat.albedo * (1 - mat.metallic);
                }
            }
            if (cfg.kind != McConfig::Kind::irradiance) {
                const Vec3 h = half_dir(nn, t1, t2, u3, u4, mat.roughness);
                const Real vh = dot(vv, h);
                const Vec3 i = h * (2 * vh) - vv;
                const Real n_dot_i = dot(nn, i);
                const Real n_dot_h = dot(nn, h);
                if (n_dot_i > 1e-9 && vh > 1e-9 && n_dot_h > 1e-9) {
                    const Vec3 li = incident(i);
                    const Real g = geometry_term(n_dot_v, n_dot_i, mat.roughness);
                    const Real fresnel_c = std::pow(1 - vh, Real(5));
                    const Vec3 fresnel = f0 + (Vec3(1) - f0) * fresnel_c;
                    val += li * fresnel * (g * vh / (n_dot_h * n_dot_v));
                }
            }
            sum += val;
            sq += val * val;
        }
        sums[chunk] = sum;
        sq_sums[chunk] = sq;
    });

    Vec3 sum{0, 0, 0}, sq{0, 0, 0};
    for (int c = 0; c < n_chunks; ++c) {
        sum += sums[c];
        sq += sq_sums[c];
    }
    McEstimate est;
    const Real inv_n = Real(1) / cfg.samples;
    est.value = sum * inv_n;
    const Vec3 var = max(sq * inv_n - est.value * est.value, Vec3{0, 0, 0});
    const Real bessel = cfg.samples > 1 ? Real(cfg.samples - 1) : Real(1);
    est.std_error = {std::sqrt(var.x / bessel), std::sqrt(var.y / bessel),
                     std::sqrt(var.z / bessel)};
    return est;
}

SplatOccluder::SplatOccluder(const std::vector<GaussianSplat>& splats) {
    items.reserve(splats.size());
    for (const GaussianSplat& s : splats) {
        items.push_back({s.position, sym_inverse(s.covariance()), s.opacity()});
    }
}

Real SplatOccluder::ray_opacity(const Vec3& origin, const Vec3& dir) const {
    Real transmittance = 1;
    for (const Item& it : items) {
        const Vec3 r = origin - it.mean;
        const Vec3 qd = it.inv_cov * dir;
        const Real a = dot(dir, qd);
        if (a <= 0) continue;
        const Real t_star = -dot(r, qd) / a;
        if (t_star <= 1e-4) continue;
        const Vec3 closest = r + dir * t_star;
        const Real m2 = dot(closest, it.inv_cov * closest);
        if (m2 > 120) continue;
        const Real alpha = std::min(Real(0.99), it.opacity * std::exp(-0.5 * m2));
        transmittance *= 1 - alpha;
    }
    return 1 - transmittance;
}

Real raycast_visibility(const SplatOccluder& occ, const Vec3& x, const Vec3& n,
                        int n_rays, uint64_t seed) {
    if (n_rays < 1) throw InputError("raycast_visibility: need at least one ray");
    const Vec3 nn = normalize(n);
    Vec3 t1, t2;
    tangent_frame(nn, &t1, &t2);
    const Rng rng(seed, 0);
    const int n_chunks = thread_count();
    std::vector<int64_t> counts(n_chunks, 0);
    parallel_for(0, n_rays, [&](int64_t lo, int64_t hi, int chunk) {
        int64_t escaped = 0;
        for (int64_t s = lo; s < hi; ++s) {
            const Vec3 d = cosine_dir(nn, t1, t2, rng.uniform(2 * s), rng.uniform(2 * s + 1));
            if (occ.visible(x, d)) ++escaped;
        }
        counts[chunk] = escaped;
    });
    int64_t total = 0;
    for (int64_t c : counts) total += c;
    return Real(total) / n_rays;
}

Real raycast_visibility(const std::vector<GaussianSplat>& splats, const Vec3& x,
                        const Vec3& n, int n_rays, uint64_t seed) {
    return raycast_visibility(SplatOccluder(splats), x, n, n_rays, seed);
}

void gauss_legendre(int n, std::vector<Real>* nodes, std::vector<Real>* weights) {
    if (n < 1) throw InputError("gauss_legendre: need at least one node");
    nodes->assign(n, 0);
    weights->assign(n, 0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        Real x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        Real deriv = 1;
        for (int iter = 0; iter < 100; ++iter) {
            Real p0 = 1, p1 = 0;
            for (int j = 0; j < n; ++j) {
                const Real p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) * x * p1 - j * p2) / (j + 1);
            }
            deriv = n * (x * p0 - p1) / (x * x - 1);
            const Real dx = p0 / deriv;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        (*nodes)[i] = -x;
        (*nodes)[n - 1 - i] = x;
        (*weights)[i] = (*weights)[n - 1 - i] = 2 / ((1 - x * x) * deriv * deriv);
    }
}

SphereQuad sphere_quadrature(int n_theta, int n_phi) {
    if (n_theta < 1 || n_phi < 1)
        throw InputError("sphere_quadrature: node counts must be positive");
    std::vector<Real> z, wz;
    gauss_legendre(n_theta, &z, &wz);
    SphereQuad q;
    q.dir.reserve(size_t(n_theta) * n_phi);
    q.weight.reserve(size_t(n_theta) * n_phi);
    const Real wp = kTwoPi / n_phi;
    for (int i = 0; i < n_theta; ++i) {
        const Real s = std::sqrt(std::max(Real(0), 1 - z[i] * z[i]));
        for (int j = 0; j < n_phi; ++j) {
            const Real phi = wp * (j + 0.5);
            q.dir.push_back({s * std::cos(phi), s * std::sin(phi), z[i]});
            q.weight.push_back(wz[i] * wp);
        }
    }
    return q;
}

TransferMatrixReport transfer_matrix_reference(
    const std::function<Real(const Vec3&, const Vec3&)>& transfer,
    const std::vector<Real>& light, const Vec3& out_dir, int bands, int quad_theta) {
    if (bands < 1 || bands > 3)
        throw InputError("transfer_matrix_reference: bands must be in [1, 3]");
    const int n = bands * bands;
    if (int(light.size()) != n)
        throw InputError("transfer_matrix_reference: lighting coefficient count mismatch");
    if (!transfer) throw InputError("transfer_matrix_reference: transfer function required");

    const SphereQuad quad = sphere_quadrature(quad_theta, 2 * quad_theta);
    const size_t n_nodes = quad.dir.size();
    Real b9[9];

    // Project the incident dependence at a fixed outgoing direction.
    const auto project_incident = [&](const Vec3& o, std::vector<Real>* cj) {
        cj->assign(n, 0);
        for (size_t w = 0; w < n_nodes; ++w) {
            const Real t = transfer(quad.dir[w], o);
            basis9(quad.dir[w], b9);
            for (int j = 0; j < n; ++j) (*cj)[j] += quad.weight[w] * b9[j] * t;
        }
    };

    TransferMatrixReport rep;
    rep.bands = bands;
    rep.matrix.assign(size_t(n) * n, 0);
    std::vector<Real> cj(n);
    for (size_t w = 0; w < n_nodes; ++w) {
        project_incident(quad.dir[w], &cj);
        basis9(quad.dir[w], b9);
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                rep.matrix[size_t(j) * n + k] += quad.weight[w] * b9[k] * cj[j];
            }
        }
    }

    project_incident(normalize(out_dir), &cj);
    rep.reference = 0;
    for (int j = 0; j < n; ++j) rep.reference += light[j] * cj[j];

    basis9(normalize(out_dir), b9);
    rep.approx = 0;
    for (int j = 0; j < n; ++j) {
        Real recon = 0;
        for (int k = 0; k < n; ++k) recon += rep.matrix[size_t(j) * n + k] * b9[k];
        rep.approx += light[j] * recon;
    }
    return rep;
}

std::vector<Real> finite_diff(const std::function<Real(const std::vector<Real>&)>& fn,
                              const std::vector<Real>& params, Real step) {
    if (!(step > 0)) throw InputError("finite_diff: step must be positive");
    std::vector<Real> grad(params.size());
    std::vector<Real> p = params;
    for (size_t i = 0; i < params.size(); ++i) {
        p[i] = params[i] + step;
        const Real hi = fn(p);
        p[i] = params[i] - step;
        const Real lo = fn(p);
        p[i] = params[i];
        grad[i] = (hi - lo) / (2 * step);
    }
    return grad;
}

void write_oracle_csv(const std::string& path, const std::vector<OracleCase>& rows) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open report file: " + path);
    out << "case,estimate,stderr,pipeline,rel_error\n";
    char line[256];
    for (const OracleCase& r : rows) {
        std::snprintf(line, sizeof(line), ",%.9g,%.9g,%.9g,%.9g\n", r.estimate,
                      r.std_error, r.pipeline, r.rel_error);
        out << r.id << line;
    }
    if (!out) throw InputError("failed writing report file: " + path);
}

}  // namespace rtr
