#include <doctest.h>

#include <fstream>

#include "rtr/image.hpp"
#include "rtr/rng.hpp"
#include "test_util.hpp"

using namespace rtr;

TEST_CASE("pfm round trip is bit exact") {
    const std::string dir = test::temp_dir();
    Image img(7, 5, 3);
    const Rng rng(1, 0);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x)
            for (int c = 0; c < 3; ++c) {
                // values that exercise sign, magnitude, and exact float casts
                const float v = float(rng.normal((y * 7 + x) * 3 + c) * 1e3);
                img.at(x, y, c) = v;
            }
    const std::string path = dir + "/t.pfm";
    write_pfm(path, img);
    const Image back = read_pfm(path);
    REQUIRE(back.width() == 7);
    REQUIRE(back.height() == 5);
    REQUIRE(back.channels() == 3);
    for (int i = 0; i < 7 * 5 * 3; ++i) CHECK(back.data()[i] == img.data()[i]);
}

TEST_CASE("single channel pfm uses the grayscale magic") {
    const std::string dir = test::temp_dir();
    Image img(3, 2, 1);
    for (int i = 0; i < 6; ++i) img.data()[i] = i * 0.25;
    const std::string path = dir + "/g.pfm";
    write_pfm(path, img);
    std::ifstream f(path, std::ios::binary);
    std::string magic;
    f >> magic;
    CHECK(magic == "Pf");
    const Image back = read_pfm(path);
    REQUIRE(back.channels() == 1);
    for (int i = 0; i < 6; ++i) CHECK(back.data()[i] == img.data()[i]);
}

TEST_CASE("malformed pfm files are rejected") {
    const std::string dir = test::temp_dir();
    const std::string path = dir + "/bad.pfm";
    {
        std::ofstream f(path, std::ios::binary);
        f << "P6\n2 2\n255\n";
    }
    CHECK_THROWS_AS(read_pfm(path), InputError);
    {
        std::ofstream f(path, std::ios::binary);
        f << "PF\n4 4\n-1.0\n";  // header promises more data than present
    }
    CHECK_THROWS_AS(read_pfm(path), InputError);
    CHECK_THROWS_AS(read_pfm(dir + "/missing.pfm"), InputError);
}

TEST_CASE("ppm preview applies gamma and clamps") {
    const std::string dir = test::temp_dir();
    Image img(2, 1, 3);
    img.set_rgb(0, 0, {0.0, 1.0, 4.0});   // 4.0 clamps to 1.0
    img.set_rgb(1, 0, {0.5, -1.0, 0.25});  // negative clamps to 0
    const std::string path = dir + "/p.ppm";
    write_ppm(path, img);
    std::ifstream f(path, std::ios::binary);
    std::string magic;
    int w, h, maxval;
    f >> magic >> w >> h >> maxval;
    CHECK(magic == "P6");
    CHECK(w == 2);
    CHECK(h == 1);
    CHECK(maxval == 255);
    f.get();  // single whitespace after header
    unsigned char px[6];
    f.read(reinterpret_cast<char*>(px), 6);
    CHECK(px[0] == 0);
    CHECK(px[1] == 255);
    CHECK(px[2] == 255);
    CHECK(px[3] == int(std::lround(std::pow(0.5, 1.0 / 2.2) * 255)));
    CHECK(px[4] == 0);
    CHECK(px[5] == int(std::lround(std::pow(0.25, 1.0 / 2.2) * 255)));
}
