#include "rtr/image.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rtr {

namespace {

bool host_is_little_endian() {
    const uint16_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

void byte_swap_floats(std::vector<float>& v) {
    for (float& f : v) {
        unsigned char* p = reinterpret_cast<unsigned char*>(&f);
        std::swap(p[0], p[3]);
        std::swap(p[1], p[2]);
    }
}

// Reads one whitespace-delimited token, skipping comments is not part
// of the PFM grammar so none are handled.
std::string next_token(std::istream& in) {
    std::string tok;
    in >> tok;
    return tok;
}

}  // namespace

void write_pfm(const std::string& path, const Image& img) {
    if (img.empty()) throw InputError("write_pfm: empty image");
    if (img.channels() != 1 && img.channels() != 3)
        throw InputError("write_pfm: channel count must be 1 or 3");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("write_pfm: cannot open " + path);

    const bool little = host_is_little_endian();
    out << (img.channels() == 3 ? "PF" : "Pf") << "\n"
        << img.width() << " " << img.height() << "\n"
        << (little ? "-1.0" : "1.0") << "\n";

    // Scanlines run bottom-to-top.
    std::vector<float> row(size_t(img.width()) * img.channels());
    for (int y = img.height() - 1; y >= 0; --y) {
        const Real* src = img.data() + size_t(y) * img.width() * img.channels();
        for (size_t i = 0; i < row.size(); ++i) row[i] = float(src[i]);
        out.write(reinterpret_cast<const char*>(row.data()),
                  std::streamsize(row.size() * sizeof(float)));
    }
    if (!out) throw InputError("write_pfm: write failed for " + path);
}

Image read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("read_pfm: cannot open " + path);

    const std::string magic = next_token(in);
    int channels;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else throw InputError("read_pfm: bad magic in " + path);

    int width = 0, height = 0;
    double scale = 0;
    std::istringstream ws(next_token(in)), hs(next_token(in)), ss(next_token(in));
    if (!(ws >> width) || !(hs >> height) || !(ss >> scale) || width <= 0 ||
        height <= 0 || scale == 0)
        throw InputError("read_pfm: bad header in " + path);

    in.get();  // single whitespace byte after the scale line

    const bool file_little = scale < 0;
    Image img(width, height, channels);
    std::vector<float> row(size_t(width) * channels);
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                std::streamsize(row.size() * sizeof(float)));
        if (!in) throw InputError("read_pfm: truncated data in " + path);
        if (file_little != host_is_little_endian()) byte_swap_floats(row);
        Real* dst = img.data() + size_t(y) * width * channels;
        for (size_t i = 0; i < row.size(); ++i) dst[i] = Real(row[i]);
    }
    return img;
}

void write_ppm(const std::string& path, const Image& img) {
    if (img.empty()) throw InputError("write_ppm: empty image");
    const bool gray = img.channels() == 1;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("write_ppm: cannot open " + path);
    out << (gray ? "P5" : "P6") << "\n" << img.width() << " " << img.height()
        << "\n255\n";

    const size_t n = img.pixel_count() * img.channels();
    std::vector<unsigned char> bytes(n);
    const Real* src = img.data();
    for (size_t i = 0; i < n; ++i) {
        const Real v = clamp(src[i], 0.0, 1.0);
        bytes[i] = (unsigned char)(std::lround(std::pow(v, 1.0 / 2.2) * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(n));
    if (!out) throw InputError("write_ppm: write failed for " + path);
}

}  // namespace rtr
