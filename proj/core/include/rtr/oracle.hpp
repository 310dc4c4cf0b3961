#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rtr/math.hpp"
#include "rtr/scene.hpp"

namespace rtr {

// Brute-force references the fast paths are validated against. This
// translation unit deliberately re-derives all shading math instead of
// calling the pipeline implementations, so agreement between the two
// is evidence rather than tautology.

struct McConfig {
    int samples = 4096;  // at least 1024
    uint64_t seed = 1;
    enum class Kind { irradiance, microfacet, full } kind = Kind::full;
};

struct McEstimate {
    Vec3 value{0, 0, 0};
    Vec3 std_error{0, 0, 0};  // per-channel standard error of the mean
};

struct McMaterial {
    Vec3 albedo{1, 1, 1};
    Real metallic = 0;
    Real roughness = 0.5;
    Vec3 indirect{0, 0, 0};    // incident radiance along occluded rays
    Vec3 f0{-1, -1, -1};       // any negative channel: derive from metallic/albedo
};

using EnvSampler = std::function<Vec3(const Vec3&)>;
/// visible(origin, dir): true when the ray escapes the occluders.
using VisibilitySampler = std::function<bool(const Vec3&, const Vec3&)>;

/// Monte Carlo estimate of the single-bounce rendering equation at a
/// surface point. `v` points from the surface toward the viewer.
/// irradiance: cosine-sampled incident irradiance (material unused);
/// microfacet: specular term only, half-vector importance sampling;
/// full: diffuse + specular. Pass a null `visible` for no occlusion.
McEstimate mc_shade(const Vec3& x, const Vec3& n, const Vec3& v, const McMaterial& mat,
                    const EnvSampler& env, const VisibilitySampler& visible,
                    const McConfig& cfg);

/// Max-response opacity accumulation along a ray through a splat
/// cloud: each Gaussian contributes its activated opacity at the
/// ray's closest approach (in the Mahalanobis metric), composited
/// front-independent as 1 - prod(1 - alpha). A point is considered
/// visible along the ray while this stays below 0.5.
struct SplatOccluder {
    struct Item {
        Vec3 mean;
        Mat3 inv_cov;
        Real opacity;
    };
    std::vector<Item> items;

    SplatOccluder() = default;
    explicit SplatOccluder(const std::vector<GaussianSplat>& splats);

    Real ray_opacity(const Vec3& origin, const Vec3& dir) const;
    bool visible(const Vec3& origin, const Vec3& dir) const {
        return ray_opacity(origin, dir) < 0.5;
    }
};

/// Fraction of cosine-weighted hemisphere rays (about n, from x) that
/// escape the splat cloud.
Real raycast_visibility(const SplatOccluder& occ, const Vec3& x, const Vec3& n,
                        int n_rays, uint64_t seed);
Real raycast_visibility(const std::vector<GaussianSplat>& splats, const Vec3& x,
                        const Vec3& n, int n_rays, uint64_t seed);

/// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, std::vector<Real>* nodes, std::vector<Real>* weights);

/// Product quadrature over the unit sphere: Gauss-Legendre in cos(theta)
/// crossed with a uniform azimuth grid. Exact for band-limited
/// integrands of polynomial degree below the node counts.
struct SphereQuad {
    std::vector<Vec3> dir;
    std::vector<Real> weight;  // sums to 4*pi
};
SphereQuad sphere_quadrature(int n_theta, int n_phi);

/// Double-projection transfer matrix: projects a transfer function
/// T(omega, o) onto the harmonic basis in the incident direction, then
/// again in the outgoing direction, and evaluates the reconstructed
/// radiance against direct quadrature. Quantifies the storage/accuracy
/// trade-off of matrix-based transfer. bands <= 3.
struct TransferMatrixReport {
    int bands = 0;
    std::vector<Real> matrix;  // [j * bands^2 + k], j incident, k outgoing
    Real approx = 0;           // matrix reconstruction at out_dir
    Real reference = 0;        // direct quadrature at out_dir
};
TransferMatrixReport transfer_matrix_reference(
    const std::function<Real(const Vec3&, const Vec3&)>& transfer,
    const std::vector<Real>& light, const Vec3& out_dir, int bands, int quad_theta);

/// Central finite differences of a scalar functional.
std::vector<Real> finite_diff(const std::function<Real(const std::vector<Real>&)>& fn,
                              const std::vector<Real>& params, Real step);

/// One row of a validation report.
struct OracleCase {
    std::string id;
    Real estimate = 0;
    Real std_error = 0;
    Real pipeline = 0;
    Real rel_error = 0;
};
void write_oracle_csv(const std::string& path, const std::vector<OracleCase>& rows);

}  // namespace rtr
