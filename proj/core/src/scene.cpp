#include "rtr/scene.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "rtr/image.hpp"
#include "rtr/rng.hpp"
#include "rtr/sh.hpp"

namespace rtr {

namespace {

// Rng stream ids so the independent draws of one seed never collide.
enum Stream : uint64_t {
    kStreamPosition = 1,
    kStreamFeature = 2,
    kStreamDecoder = 3,
};

const char* const kFaceNames[6] = {"posx", "negx", "posy", "negy", "posz", "negz"};

void append_real(std::string& s, Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    s += buf;
}

void append_reals(std::string& s, const Real* v, int n) {
    for (int i = 0; i < n; ++i) {
        s += ' ';
        append_real(s, v[i]);
    }
}

[[noreturn]] void parse_fail(const std::string& path, int lineno,
                             const std::string& what) {
    throw InputError(path + ":" + std::to_string(lineno) + ": " + what);
}

// Parses exactly `count` whitespace-separated reals from `text`.
void parse_reals(const char* text, Real* out, int count, const std::string& path,
                 int lineno, const char* record) {
    const char* p = text;
    for (int i = 0; i < count; ++i) {
        char* end = nullptr;
        const double v = std::strtod(p, &end);
        if (end == p)
            parse_fail(path, lineno, std::string("expected ") + std::to_string(count) +
                                         " values in " + record);
        if (!std::isfinite(v))
            parse_fail(path, lineno, std::string("non-finite value in ") + record);
        out[i] = v;
        p = end;
    }
    while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
    if (*p != '\0')
        parse_fail(path, lineno, std::string("trailing data in ") + record);
}

void check_unit_range(Real v, const char* field, const std::string& path, int lineno) {
    if (v < 0.0 || v > 1.0)
        parse_fail(path, lineno, std::string("field out of range: ") + field);
}

void check_non_negative(Real v, const char* field, const std::string& path,
                        int lineno) {
    if (v < 0.0)
        parse_fail(path, lineno, std::string("field out of range: ") + field);
}

void write_cubemap_faces(const Cubemap& cube, const std::filesystem::path& dir,
                         const std::string& prefix) {
    const int res = cube.resolution();
    Image face_img(res, res, 3);
    for (int face = 0; face < 6; ++face) {
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) face_img.set_rgb(x, y, cube.get(face, x, y));
        write_pfm((dir / (prefix + "." + kFaceNames[face] + ".pfm")).string(),
                  face_img);
    }
}

Cubemap read_cubemap_faces(int res, const std::filesystem::path& dir,
                           const std::string& prefix) {
    Cubemap cube(res);
    for (int face = 0; face < 6; ++face) {
        const std::string path =
            (dir / (prefix + "." + kFaceNames[face] + ".pfm")).string();
        const Image img = read_pfm(path);
        if (img.width() != res || img.height() != res || img.channels() != 3)
            throw InputError("scene: cubemap face has wrong shape: " + path);
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) cube.set(face, x, y, img.rgb(x, y));
    }
    return cube;
}

}  // namespace

Mat3 GaussianSplat::covariance() const {
    const Mat3 r = rotation_matrix(rotation);
    const Vec3 s2{std::exp(2.0 * log_scale.x), std::exp(2.0 * log_scale.y),
                  std::exp(2.0 * log_scale.z)};
    Mat3 c;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            c.m[i][j] = r.m[i][0] * s2.x * r.m[j][0] + r.m[i][1] * s2.y * r.m[j][1] +
                        r.m[i][2] * s2.z * r.m[j][2];
    return c;
}

void covariance_backward(const GaussianSplat& s, const Mat3& grad_cov,
                         Vec3* grad_log_scale, Quat* grad_rotation) {
    const Mat3 r = rotation_matrix(s.rotation);
    const Vec3 s2{std::exp(2.0 * s.log_scale.x), std::exp(2.0 * s.log_scale.y),
                  std::exp(2.0 * s.log_scale.z)};

    // cov = sum_k s2_k r_k r_k^T with r_k the k-th rotation column:
    // d/d(ls_k) = 2 s2_k (r_k^T G r_k), d/dR = (G + G^T) R diag(s2)
    for (int k = 0; k < 3; ++k) {
        const Vec3 rk = r.col(k);
        (*grad_log_scale)[k] += 2.0 * s2[k] * dot(rk, grad_cov * rk);
    }
    Mat3 grad_r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            Real v = 0;
            for (int a = 0; a < 3; ++a)
                v += (grad_cov.m[i][a] + grad_cov.m[a][i]) * r.m[a][j];
            grad_r.m[i][j] = v * s2[j];
        }
    rotation_matrix_backward(s.rotation, grad_r, grad_rotation);
}

TransferDecoder::TransferDecoder()
    : w1(kDecoderHidden * kIn1, 0.0), b1(kDecoderHidden, 0.0),
      w2(kDecoderHidden * kIn2, 0.0), b2(kDecoderHidden, 0.0),
      w3(kOut * kDecoderHidden, 0.0), b3(kOut, 0.0) {}

TransferDecoder TransferDecoder::random_init(uint64_t seed) {
    TransferDecoder d;
    const Rng rng(seed, kStreamDecoder);
    uint64_t k = 0;
    // Variance-preserving init for the rectified layers; the output
    // layer starts small so view-dependent shading ramps in gently.
    const Real s1 = std::sqrt(2.0 / kIn1);
    const Real s2 = std::sqrt(2.0 / kIn2);
    const Real s3 = 0.1 * std::sqrt(1.0 / kDecoderHidden);
    for (Real& w : d.w1) w = s1 * rng.normal(k++);
    for (Real& w : d.w2) w = s2 * rng.normal(k++);
    for (Real& w : d.w3) w = s3 * rng.normal(k++);
    return d;
}

bool TransferDecoder::zero_weights() const {
    auto all_zero = [](const std::vector<Real>& v) {
        for (Real x : v)
            if (x != 0) return false;
        return true;
    };
    return all_zero(w1) && all_zero(b1) && all_zero(w2) && all_zero(b2) &&
           all_zero(w3) && all_zero(b3);
}

void TransferDecoder::forward(const std::array<Real, kFeatureDim>& feature,
                              const Vec3& dir, Eval* e) const {
    e->dir = dir;
    e->feature = feature;
    for (int j = 0; j < kDecoderHidden; ++j) {
        const Real* w = &w1[j * kIn1];
        const Real z = w[0] * dir.x + w[1] * dir.y + w[2] * dir.z + b1[j];
        e->z1[j] = z;
        e->h1[j] = z > 0 ? z : 0;
    }
    for (int j = 0; j < kDecoderHidden; ++j) {
        const Real* w = &w2[j * kIn2];
        Real z = b2[j];
        for (int i = 0; i < kDecoderHidden; ++i) z += w[i] * e->h1[i];
        for (int i = 0; i < kFeatureDim; ++i) z += w[kDecoderHidden + i] * feature[i];
        e->z2[j] = z;
        e->h2[j] = z > 0 ? z : 0;
    }
    for (int o = 0; o < kOut; ++o) {
        const Real* w = &w3[o * kDecoderHidden];
        Real z = b3[o];
        for (int i = 0; i < kDecoderHidden; ++i) z += w[i] * e->h2[i];
        e->out[o] = z;
    }
}

TransferDecoder::Grads::Grads()
    : w1(kDecoderHidden * kIn1, 0.0), b1(kDecoderHidden, 0.0),
      w2(kDecoderHidden * kIn2, 0.0), b2(kDecoderHidden, 0.0),
      w3(kOut * kDecoderHidden, 0.0), b3(kOut, 0.0) {}

void TransferDecoder::Grads::clear() {
    auto zero = [](std::vector<Real>& v) { std::fill(v.begin(), v.end(), 0.0); };
    zero(w1); zero(b1); zero(w2); zero(b2); zero(w3); zero(b3);
}

void TransferDecoder::Grads::add(const Grads& o) {
    auto axpy = [](std::vector<Real>& a, const std::vector<Real>& b) {
        for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    axpy(w1, o.w1); axpy(b1, o.b1); axpy(w2, o.w2);
    axpy(b2, o.b2); axpy(w3, o.w3); axpy(b3, o.b3);
}

void TransferDecoder::backward(const Eval& e, const std::array<Real, kOut>& grad_out,
                               Grads* g, std::array<Real, kFeatureDim>* grad_feature,
                               Vec3* grad_dir) const {
    std::array<Real, kDecoderHidden> gh2{};
    for (int o = 0; o < kOut; ++o) {
        const Real go = grad_out[o];
        if (go == 0) continue;
        g->b3[o] += go;
        Real* gw = &g->w3[o * kDecoderHidden];
        const Real* w = &w3[o * kDecoderHidden];
        for (int i = 0; i < kDecoderHidden; ++i) {
            gw[i] += go * e.h2[i];
            gh2[i] += go * w[i];
        }
    }

    std::array<Real, kDecoderHidden> gh1{};
    for (int j = 0; j < kDecoderHidden; ++j) {
        if (e.z2[j] <= 0 || gh2[j] == 0) continue;
        const Real gz = gh2[j];
        g->b2[j] += gz;
        Real* gw = &g->w2[j * kIn2];
        const Real* w = &w2[j * kIn2];
        for (int i = 0; i < kDecoderHidden; ++i) {
            gw[i] += gz * e.h1[i];
            gh1[i] += gz * w[i];
        }
        for (int i = 0; i < kFeatureDim; ++i) {
            gw[kDecoderHidden + i] += gz * e.feature[i];
            if (grad_feature) (*grad_feature)[i] += gz * w[kDecoderHidden + i];
        }
    }

    for (int j = 0; j < kDecoderHidden; ++j) {
        if (e.z1[j] <= 0 || gh1[j] == 0) continue;
        const Real gz = gh1[j];
        g->b1[j] += gz;
        Real* gw = &g->w1[j * kIn1];
        const Real* w = &w1[j * kIn1];
        gw[0] += gz * e.dir.x;
        gw[1] += gz * e.dir.y;
        gw[2] += gz * e.dir.z;
        if (grad_dir) {
            grad_dir->x += gz * w[0];
            grad_dir->y += gz * w[1];
            grad_dir->z += gz * w[2];
        }
    }
}

void Scene::bounds(Vec3* lo, Vec3* hi) const {
    if (splats.empty()) {
        *lo = *hi = Vec3{0, 0, 0};
        return;
    }
    *lo = *hi = splats[0].position;
    for (const GaussianSplat& s : splats) {
        *lo = min(*lo, s.position);
        *hi = max(*hi, s.position);
    }
}

void clamp_splat(GaussianSplat* s) {
    const Real n = s->rotation.norm();
    s->rotation = n > 1e-12 ? s->rotation.normalized() : Quat{1, 0, 0, 0};
    s->opacity_logit = clamp(s->opacity_logit, -12.0, 12.0);
    s->diffuse_color = max(s->diffuse_color, Vec3{0, 0, 0});
    s->specular_color = max(s->specular_color, Vec3{0, 0, 0});
    s->reflection_tint = clamp(s->reflection_tint, 0.0, 1.0);
    s->reflection_roughness = clamp(s->reflection_roughness, 0.0, 1.0);
    s->reflection_intensity = clamp(s->reflection_intensity, 0.0, 1.0);
    s->albedo = clamp(s->albedo, 0.0, 1.0);
    s->metallic = clamp(s->metallic, 0.0, 1.0);
    s->roughness = clamp(s->roughness, 0.0, 1.0);
    s->indirect_light = clamp(s->indirect_light, 0.0, 1.0);
}

void scene_save(const Scene& scene, const std::string& path) {
    const std::filesystem::path file(path);
    const std::filesystem::path dir =
        file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
    const std::string stem = file.stem().string();

    std::string out;
    out.reserve(scene.splats.size() * 1400 + (size_t(1) << 17));
    out += "rtr-scene 1\n";
    out += "splats " + std::to_string(scene.splats.size()) + "\n";

    out += "sh_light";
    for (const Vec3& c : scene.sh_light) {
        const Real rgb[3] = {c.x, c.y, c.z};
        append_reals(out, rgb, 3);
    }
    out += '\n';

    const TransferDecoder& d = scene.decoder;
    auto dump_layer = [&out](const char* tag, const std::vector<Real>& v) {
        out += tag;
        append_reals(out, v.data(), int(v.size()));
        out += '\n';
    };
    dump_layer("decoder_w1", d.w1);
    dump_layer("decoder_b1", d.b1);
    dump_layer("decoder_w2", d.w2);
    dump_layer("decoder_b2", d.b2);
    dump_layer("decoder_w3", d.w3);
    dump_layer("decoder_b3", d.b3);

    if (scene.reflection_map.empty()) {
        out += "reflection_map 0 none\n";
    } else {
        const std::string prefix = stem + ".reflection";
        out += "reflection_map " + std::to_string(scene.reflection_map.resolution()) +
               " " + prefix + "\n";
        write_cubemap_faces(scene.reflection_map, dir, prefix);
    }
    if (scene.env_map.empty()) {
        out += "env_map 0 none\n";
    } else {
        const std::string prefix = stem + ".env";
        out += "env_map " + std::to_string(scene.env_map.resolution()) + " " +
               prefix + "\n";
        write_cubemap_faces(scene.env_map, dir, prefix);
    }
    if (scene.visibility.empty()) {
        out += "visibility none\n";
    } else {
        const std::string name = stem + ".visgrid";
        out += "visibility " + name + "\n";
        save_visgrid((dir / name).string(), scene.visibility);
    }

    for (const GaussianSplat& s : scene.splats) {
        Real v[kSplatScalars];
        int k = 0;
        for (int i = 0; i < 3; ++i) v[k++] = s.position[i];
        for (int i = 0; i < 3; ++i) v[k++] = s.log_scale[i];
        v[k++] = s.rotation.w; v[k++] = s.rotation.x;
        v[k++] = s.rotation.y; v[k++] = s.rotation.z;
        v[k++] = s.opacity_logit;
        for (int i = 0; i < 3; ++i) v[k++] = s.diffuse_color[i];
        for (int i = 0; i < kShCoeffs; ++i) v[k++] = s.transfer[i];
        for (int i = 0; i < 3; ++i) v[k++] = s.specular_color[i];
        for (int i = 0; i < kFeatureDim; ++i) v[k++] = s.feature[i];
        for (int i = 0; i < 3; ++i) v[k++] = s.reflection_tint[i];
        v[k++] = s.reflection_roughness;
        v[k++] = s.reflection_intensity;
        for (int i = 0; i < 3; ++i) v[k++] = s.albedo[i];
        v[k++] = s.metallic;
        v[k++] = s.roughness;
        for (int i = 0; i < 3; ++i) v[k++] = s.indirect_light[i];

        out += "splat";
        append_reals(out, v, kSplatScalars);
        out += '\n';
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("scene_save: cannot open " + path);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw InputError("scene_save: write failed for " + path);
}

Scene scene_load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("scene_load: cannot open " + path);
    const std::filesystem::path dir = [&] {
        const std::filesystem::path p(path);
        return p.has_parent_path() ? p.parent_path() : std::filesystem::path(".");
    }();

    Scene scene;
    scene.reflection_map = Cubemap();
    scene.env_map = Cubemap();

    std::string line;
    int lineno = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };

    if (!next_line() || line != "rtr-scene 1")
        parse_fail(path, lineno, "expected header 'rtr-scene 1'");

    if (!next_line() || line.rfind("splats ", 0) != 0)
        parse_fail(path, lineno, "expected splat count");
    const long splat_count = std::strtol(line.c_str() + 7, nullptr, 10);
    if (splat_count < 0) parse_fail(path, lineno, "negative splat count");

    if (!next_line() || line.rfind("sh_light", 0) != 0)
        parse_fail(path, lineno, "expected sh_light");
    Real light[kShCoeffs * 3];
    parse_reals(line.c_str() + 8, light, kShCoeffs * 3, path, lineno, "sh_light");
    for (int j = 0; j < kShCoeffs; ++j)
        scene.sh_light[j] = {light[j * 3], light[j * 3 + 1], light[j * 3 + 2]};

    auto read_layer = [&](const char* tag, std::vector<Real>& v) {
        if (!next_line() || line.rfind(tag, 0) != 0)
            parse_fail(path, lineno, std::string("expected ") + tag);
        parse_reals(line.c_str() + std::strlen(tag), v.data(), int(v.size()), path,
                    lineno, tag);
    };
    read_layer("decoder_w1", scene.decoder.w1);
    read_layer("decoder_b1", scene.decoder.b1);
    read_layer("decoder_w2", scene.decoder.w2);
    read_layer("decoder_b2", scene.decoder.b2);
    read_layer("decoder_w3", scene.decoder.w3);
    read_layer("decoder_b3", scene.decoder.b3);

    auto read_cubemap_line = [&](const char* tag) -> Cubemap {
        if (!next_line() || line.rfind(tag, 0) != 0)
            parse_fail(path, lineno, std::string("expected ") + tag);
        std::istringstream ss(line.substr(std::strlen(tag)));
        int res = -1;
        std::string prefix;
        if (!(ss >> res >> prefix) || res < 0)
            parse_fail(path, lineno, std::string("malformed ") + tag);
        if (res == 0) return Cubemap();
        return read_cubemap_faces(res, dir, prefix);
    };
    scene.reflection_map = read_cubemap_line("reflection_map");
    scene.env_map = read_cubemap_line("env_map");

    if (!next_line() || line.rfind("visibility ", 0) != 0)
        parse_fail(path, lineno, "expected visibility");
    const std::string vis = line.substr(11);
    if (vis != "none") scene.visibility = load_visgrid((dir / vis).string());

    scene.splats.reserve(size_t(splat_count));
    for (long i = 0; i < splat_count; ++i) {
        if (!next_line() || line.rfind("splat", 0) != 0)
            parse_fail(path, lineno, "expected splat record");
        Real v[kSplatScalars];
        parse_reals(line.c_str() + 5, v, kSplatScalars, path, lineno, "splat record");

        GaussianSplat s;
        int k = 0;
        for (int c = 0; c < 3; ++c) s.position[c] = v[k++];
        for (int c = 0; c < 3; ++c) s.log_scale[c] = v[k++];
        s.rotation = {v[k], v[k + 1], v[k + 2], v[k + 3]};
        k += 4;
        s.opacity_logit = v[k++];
        for (int c = 0; c < 3; ++c) s.diffuse_color[c] = v[k++];
        for (int c = 0; c < kShCoeffs; ++c) s.transfer[c] = v[k++];
        for (int c = 0; c < 3; ++c) s.specular_color[c] = v[k++];
        for (int c = 0; c < kFeatureDim; ++c) s.feature[c] = v[k++];
        for (int c = 0; c < 3; ++c) s.reflection_tint[c] = v[k++];
        s.reflection_roughness = v[k++];
        s.reflection_intensity = v[k++];
        for (int c = 0; c < 3; ++c) s.albedo[c] = v[k++];
        s.metallic = v[k++];
        s.roughness = v[k++];
        for (int c = 0; c < 3; ++c) s.indirect_light[c] = v[k++];

        if (s.rotation.norm() < 1e-12)
            parse_fail(path, lineno, "field out of range: rotation");
        for (int c = 0; c < 3; ++c) {
            check_non_negative(s.diffuse_color[c], "diffuse_color", path, lineno);
            check_non_negative(s.specular_color[c], "specular_color", path, lineno);
            check_unit_range(s.reflection_tint[c], "reflection_tint", path, lineno);
            check_unit_range(s.albedo[c], "albedo", path, lineno);
            check_unit_range(s.indirect_light[c], "indirect_light", path, lineno);
        }
        check_unit_range(s.reflection_roughness, "reflection_roughness", path, lineno);
        check_unit_range(s.reflection_intensity, "reflection_intensity", path, lineno);
        check_unit_range(s.metallic, "metallic", path, lineno);
        check_unit_range(s.roughness, "roughness", path, lineno);

        scene.splats.push_back(s);
    }
    return scene;
}

SyntheticSpec::Primitive SyntheticSpec::parse_primitive(const std::string& name) {
    if (name == "sphere") return Primitive::kSphere;
    if (name == "plane") return Primitive::kPlane;
    if (name == "box") return Primitive::kBox;
    throw InputError("init_synthetic: unknown primitive '" + name + "'");
}

Scene init_synthetic(const SyntheticSpec& spec) {
    if (spec.count <= 0) throw InputError("init_synthetic: count must be positive");
    if (spec.radius <= 0) throw InputError("init_synthetic: radius must be positive");

    // Surface points with outward normals, plus the tangent scale from
    // the mean area per splat.
    std::vector<Vec3> positions, normals;
    Real tangent_scale = 0;
    const Rng rng(spec.seed, kStreamPosition);
    const Real r = spec.radius;

    switch (spec.primitive) {
        case SyntheticSpec::Primitive::kSphere: {
            positions.reserve(spec.count);
            for (int i = 0; i < spec.count; ++i) {
                const Vec3 d = rng.sphere(uint64_t(i));
                positions.push_back(d * r);
                normals.push_back(d);
            }
            tangent_scale = spec.scale_fill * std::sqrt(kFourPi * r * r / spec.count);
            break;
        }
        case SyntheticSpec::Primitive::kPlane: {
            // Regular grid on z = 0 spanning [-r, r]^2; the count is
            // rounded to the nearest square.
            const int g = std::max(1, int(std::lround(std::sqrt(double(spec.count)))));
            for (int iy = 0; iy < g; ++iy)
                for (int ix = 0; ix < g; ++ix) {
                    positions.push_back({-r + (ix + 0.5) * 2 * r / g,
                                         -r + (iy + 0.5) * 2 * r / g, 0});
                    normals.push_back({0, 0, 1});
                }
            tangent_scale = spec.scale_fill * 2 * r / g;
            break;
        }
        case SyntheticSpec::Primitive::kBox: {
            // Regular grid on each face of the cube [-r, r]^3; count
            // rounded to 6 equal squares.
            const int g =
                std::max(1, int(std::lround(std::sqrt(double(spec.count) / 6.0))));
            for (int face = 0; face < 6; ++face) {
                const int axis = face / 2;
                const Real sign = (face % 2 == 0) ? 1.0 : -1.0;
                Vec3 n{0, 0, 0};
                n[axis] = sign;
                const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
                for (int iy = 0; iy < g; ++iy)
                    for (int ix = 0; ix < g; ++ix) {
                        Vec3 p{0, 0, 0};
                        p[axis] = sign * r;
                        p[ua] = -r + (ix + 0.5) * 2 * r / g;
                        p[va] = -r + (iy + 0.5) * 2 * r / g;
                        positions.push_back(p);
                        normals.push_back(n);
                    }
            }
            tangent_scale = spec.scale_fill * 2 * r / g;
            break;
        }
    }

    Scene scene;
    const Rng feat_rng(spec.seed, kStreamFeature);
    const Real log_t = std::log(tangent_scale);
    const Real log_n = std::log(tangent_scale * spec.flatten);

    scene.splats.resize(positions.size());
    for (size_t i = 0; i < positions.size(); ++i) {
        GaussianSplat& s = scene.splats[i];
        s.position = positions[i];
        s.log_scale = {log_t, log_t, log_n};  // shortest axis = local z
        s.rotation = quat_from_z_to(normals[i]);
        s.opacity_logit = logit(clamp(spec.opacity, 1e-4, 1.0 - 1e-4));
        s.diffuse_color = spec.diffuse_color;
        const std::vector<Real> lobe = sh_clamped_cosine(normals[i], kShBands);
        for (int j = 0; j < kShCoeffs; ++j) s.transfer[j] = lobe[j];
        s.specular_color = spec.specular_color;
        for (int j = 0; j < kFeatureDim; ++j)
            s.feature[j] = spec.feature_sigma * feat_rng.normal(i * kFeatureDim + j);
        s.reflection_tint = spec.reflection_tint;
        s.reflection_roughness = spec.reflection_roughness;
        s.reflection_intensity = spec.reflection_intensity;
        s.albedo = spec.albedo;
        s.metallic = spec.metallic;
        s.roughness = spec.roughness;
        s.indirect_light = spec.indirect_light;
        clamp_splat(&s);
    }

    // DC-only ambient start for the shared light: a constant radiance
    // L projects to 2*sqrt(pi)*L on the DC basis function.
    scene.sh_light.assign(kShCoeffs, Vec3{0, 0, 0});
    scene.sh_light[0] = Vec3(spec.ambient * 2.0 * std::sqrt(kPi));

    scene.decoder = TransferDecoder::random_init(spec.seed);
    scene.reflection_map = Cubemap(spec.cubemap_res, Vec3(spec.cubemap_value));
    scene.env_map = Cubemap(spec.cubemap_res, Vec3(spec.cubemap_value));
    return scene;
}

}  // namespace rtr
