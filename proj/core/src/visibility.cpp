#include "rtr/visibility.hpp"

#include <cstring>
#include <fstream>

namespace rtr {

namespace {
constexpr char kMagic[8] = {'R', 'T', 'R', 'V', 'I', 'S', 'G', '1'};
}

void save_visgrid(const std::string& path, const VisibilityGrid& grid) {
    if (grid.empty()) throw InputError("save_visgrid: empty grid");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("save_visgrid: cannot open " + path);
    out.write(kMagic, sizeof(kMagic));
    const int32_t res = grid.res;
    out.write(reinterpret_cast<const char*>(&res), sizeof(res));
    const double bbox[6] = {grid.bbox_min.x, grid.bbox_min.y, grid.bbox_min.z,
                            grid.bbox_max.x, grid.bbox_max.y, grid.bbox_max.z};
    out.write(reinterpret_cast<const char*>(bbox), sizeof(bbox));
    out.write(reinterpret_cast<const char*>(grid.sh.data()),
              std::streamsize(grid.sh.size() * sizeof(float)));
    if (!out) throw InputError("save_visgrid: write failed for " + path);
}

VisibilityGrid load_visgrid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("load_visgrid: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw InputError("load_visgrid: bad magic in " + path);

    VisibilityGrid grid;
    int32_t res = 0;
    in.read(reinterpret_cast<char*>(&res), sizeof(res));
    double bbox[6];
    in.read(reinterpret_cast<char*>(bbox), sizeof(bbox));
    if (!in || res <= 0) throw InputError("load_visgrid: bad header in " + path);
    grid.res = res;
    grid.bbox_min = {bbox[0], bbox[1], bbox[2]};
    grid.bbox_max = {bbox[3], bbox[4], bbox[5]};
    grid.sh.resize(grid.voxel_count() * VisibilityGrid::kCoeffs);
    in.read(reinterpret_cast<char*>(grid.sh.data()),
            std::streamsize(grid.sh.size() * sizeof(float)));
    if (!in) throw InputError("load_visgrid: truncated data in " + path);
    return grid;
}

}  // namespace rtr
