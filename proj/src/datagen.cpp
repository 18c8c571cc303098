#include "pixelnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pixelnet/errors.hpp"
#include "pixelnet/io.hpp"
#include "pixelnet/rng.hpp"

namespace fs = std::filesystem;

namespace pixelnet {

namespace {

struct Rgb {
    float r, g, b;
};

// Fixed palette, stable across scenes so color carries class information.
// Class 0 (background) is dark gray; foreground hues step around the wheel.
Rgb class_color(int cls) {
    if (cls == 0) return {0.18f, 0.18f, 0.20f};
    const double hue = std::fmod(0.137 + (cls - 1) * 0.61803398875, 1.0) * 6.0;
    const int i = static_cast<int>(hue);
    const double f = hue - i;
    const double v = 0.85, s = 0.75;
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i % 6) {
        case 0: return {static_cast<float>(v), static_cast<float>(t), static_cast<float>(p)};
        case 1: return {static_cast<float>(q), static_cast<float>(v), static_cast<float>(p)};
        case 2: return {static_cast<float>(p), static_cast<float>(v), static_cast<float>(t)};
        case 3: return {static_cast<float>(p), static_cast<float>(q), static_cast<float>(v)};
        case 4: return {static_cast<float>(t), static_cast<float>(p), static_cast<float>(v)};
        default: return {static_cast<float>(v), static_cast<float>(p), static_cast<float>(q)};
    }
}

enum class ShapeKind { disk, rect, rot_rect, triangle };

struct Shape {
    ShapeKind kind;
    int cls;
    Rgb color;
    double cx, cy, radius, angle;
    double vx[3], vy[3];  // triangle vertices
    double nx, ny, nz;    // slab normal (non-disk shapes)

    bool contains(double x, double y) const {
        switch (kind) {
            case ShapeKind::disk: {
                const double dx = x - cx, dy = y - cy;
                return dx * dx + dy * dy <= radius * radius;
            }
            case ShapeKind::rect:
                return std::abs(x - cx) <= radius && std::abs(y - cy) <= radius * 0.7;
            case ShapeKind::rot_rect: {
                const double dx = x - cx, dy = y - cy;
                const double u = dx * std::cos(angle) + dy * std::sin(angle);
                const double v = -dx * std::sin(angle) + dy * std::cos(angle);
                return std::abs(u) <= radius && std::abs(v) <= radius * 0.6;
            }
            case ShapeKind::triangle: {
                auto side = [&](int i, int j) {
                    return (vx[j] - vx[i]) * (y - vy[i]) - (vy[j] - vy[i]) * (x - vx[i]);
                };
                const double a = side(0, 1), b = side(1, 2), c = side(2, 0);
                return (a >= 0 && b >= 0 && c >= 0) || (a <= 0 && b <= 0 && c <= 0);
            }
        }
        return false;
    }
};

}  // namespace

std::vector<std::uint8_t> boundary_from_class_map(const std::vector<int>& class_map, int h, int w) {
    std::vector<std::uint8_t> edge(static_cast<std::size_t>(h) * w, 0);
    auto cls = [&](int y, int x) { return class_map[static_cast<std::size_t>(y) * w + x]; };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int c = cls(y, x);
            bool b = false;
            if (x + 1 < w && cls(y, x + 1) != c) b = true;
            if (!b && y + 1 < h) {
                if (cls(y + 1, x) != c) b = true;
                if (!b && x + 1 < w && cls(y + 1, x + 1) != c) b = true;
                if (!b && x - 1 >= 0 && cls(y + 1, x - 1) != c) b = true;
            }
            edge[static_cast<std::size_t>(y) * w + x] = b ? 1 : 0;
        }
    }
    return edge;
}

SyntheticScene gen_scene(std::uint64_t seed, int h, int w, int k_classes) {
    if (h < 32 || w < 32) throw ConfigError("gen_scene needs H,W >= 32");
    if (k_classes < 2) throw ConfigError("gen_scene needs K >= 2 (class 0 is background)");

    Rng rng(splitmix64(seed ^ 0x7363656eULL));
    SyntheticScene scene;
    scene.seed = seed;
    scene.h = h;
    scene.w = w;
    scene.class_map.assign(static_cast<std::size_t>(h) * w, 0);
    scene.image = Tensor<float>({3, h, w});
    scene.normal_map = Tensor<float>({3, h, w});

    const int num_shapes = 2 + rng.uniform_int(5);
    std::vector<Shape> shapes;
    for (int s = 0; s < num_shapes; ++s) {
        Shape sh;
        sh.cls = 1 + rng.uniform_int(k_classes - 1);
        // shape kind follows the class, so multi-scale context can resolve
        // color-ambiguous shapes
        sh.kind = static_cast<ShapeKind>((sh.cls - 1) % 4);
        // 0.3 ambiguity rate: the shape wears another class's color
        int color_cls = sh.cls;
        if (k_classes > 2 && rng.uniform() < 0.3) {
            color_cls = 1 + rng.uniform_int(k_classes - 1);
        }
        sh.color = class_color(color_cls);
        const double minr = std::min(h, w) / 10.0, maxr = std::min(h, w) / 5.0;
        sh.radius = minr + rng.uniform() * (maxr - minr);
        sh.cx = sh.radius + rng.uniform() * (w - 2 * sh.radius);
        sh.cy = sh.radius + rng.uniform() * (h - 2 * sh.radius);
        sh.angle = rng.uniform() * 3.14159265358979323846;
        if (sh.kind == ShapeKind::triangle) {
            for (int v = 0; v < 3; ++v) {
                const double a = sh.angle + v * 2.0943951023931953 + rng.uniform() * 0.6;
                const double r = sh.radius * (0.8 + 0.4 * rng.uniform());
                sh.vx[v] = sh.cx + r * std::cos(a);
                sh.vy[v] = sh.cy + r * std::sin(a);
            }
        }
        // slab normal: random tilt up to ~45 degrees, unit length
        const double tilt = rng.uniform() * 0.7853981633974483;
        const double azim = rng.uniform() * 6.283185307179586;
        sh.nx = std::sin(tilt) * std::cos(azim);
        sh.ny = std::sin(tilt) * std::sin(azim);
        sh.nz = std::cos(tilt);
        shapes.push_back(sh);
    }

    // paint order resolves occlusion: later shapes overwrite earlier ones
    std::vector<int> owner(static_cast<std::size_t>(h) * w, -1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int s = 0; s < num_shapes; ++s) {
                if (shapes[static_cast<std::size_t>(s)].contains(x + 0.5, y + 0.5)) {
                    owner[static_cast<std::size_t>(y) * w + x] = s;
                }
            }
        }
    }

    const Rgb bg = class_color(0);
    const double ramp_amp = (rng.uniform() * 2.0 - 1.0) * 0.15;
    const double ramp_dir = rng.uniform() * 6.283185307179586;
    const double diag = std::sqrt(static_cast<double>(h) * h + static_cast<double>(w) * w);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t o = static_cast<std::size_t>(y) * w + x;
            const int s = owner[o];
            Rgb base = bg;
            float nx = 0.0f, ny = 0.0f, nz = 1.0f;
            if (s >= 0) {
                const Shape& sh = shapes[static_cast<std::size_t>(s)];
                scene.class_map[o] = sh.cls;
                base = sh.color;
                if (sh.kind == ShapeKind::disk) {
                    // hemisphere: n = (dx/R, dy/R, sqrt(1 - r^2/R^2))
                    const double dx = (x + 0.5 - sh.cx) / sh.radius;
                    const double dy = (y + 0.5 - sh.cy) / sh.radius;
                    const double z2 = std::max(0.0, 1.0 - dx * dx - dy * dy);
                    nx = static_cast<float>(dx);
                    ny = static_cast<float>(dy);
                    nz = static_cast<float>(std::sqrt(z2));
                    const float nrm = std::sqrt(nx * nx + ny * ny + nz * nz);
                    nx /= nrm;
                    ny /= nrm;
                    nz /= nrm;
                } else {
                    nx = static_cast<float>(sh.nx);
                    ny = static_cast<float>(sh.ny);
                    nz = static_cast<float>(sh.nz);
                }
            }
            scene.normal_map.at(0, y, x) = nx;
            scene.normal_map.at(1, y, x) = ny;
            scene.normal_map.at(2, y, x) = nz;

            const double ramp =
                ramp_amp * ((x * std::cos(ramp_dir) + y * std::sin(ramp_dir)) / diag);
            const float rgb[3] = {base.r, base.g, base.b};
            for (int c = 0; c < 3; ++c) {
                double v = rgb[c] + ramp + rng.normal() * 0.08;
                scene.image.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }

    scene.edge_map = boundary_from_class_map(scene.class_map, h, w);
    return scene;
}

std::vector<std::uint64_t> split_seeds(const SplitSpec& spec, const std::string& split) {
    const std::uint64_t base = splitmix64(spec.seed ^ 0x636f7270ULL);
    std::uint64_t offset;
    int count;
    if (split == "train") {
        offset = 0;
        count = spec.counts.train;
    } else if (split == "val") {
        offset = static_cast<std::uint64_t>(spec.counts.train);
        count = spec.counts.val;
    } else if (split == "test") {
        offset = static_cast<std::uint64_t>(spec.counts.train) + spec.counts.val;
        count = spec.counts.test;
    } else {
        throw ConfigError("unknown split '" + split + "' (train|val|test)");
    }
    if (count <= 0) throw ConfigError("split counts must be positive");
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) seeds[static_cast<std::size_t>(i)] = base + offset + i;
    return seeds;
}

Dataset gen_split(const SplitSpec& spec, const std::string& split) {
    Dataset d;
    d.num_classes = spec.num_classes;
    for (std::uint64_t s : split_seeds(spec, split)) {
        d.scenes.push_back(gen_scene(s, spec.height, spec.width, spec.num_classes));
    }
    return d;
}

namespace {

std::string scene_stem(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%05d", i);
    return buf;
}

}  // namespace

void write_corpus(const std::string& dir, const SplitSpec& spec) {
    fs::create_directories(dir);
    {
        std::ofstream meta(dir + "/corpus.txt");
        if (!meta) throw DataError("cannot write corpus meta in " + dir);
        meta << "seed=" << spec.seed << "\n"
             << "height=" << spec.height << "\n"
             << "width=" << spec.width << "\n"
             << "classes=" << spec.num_classes << "\n"
             << "train=" << spec.counts.train << "\n"
             << "val=" << spec.counts.val << "\n"
             << "test=" << spec.counts.test << "\n";
    }
    for (const std::string split : {"train", "val", "test"}) {
        const fs::path sub = fs::path(dir) / split;
        fs::create_directories(sub);
        std::ofstream manifest(dir + "/" + split + ".manifest");
        if (!manifest) throw DataError("cannot write manifest for " + split);
        Dataset d = gen_split(spec, split);
        for (std::size_t i = 0; i < d.scenes.size(); ++i) {
            const SyntheticScene& s = d.scenes[i];
            const std::string stem = std::string(split) + "/" + scene_stem(static_cast<int>(i));
            write_ppm(dir + "/" + stem + ".ppm", s.image);
            std::vector<std::uint8_t> cls(s.class_map.size());
            for (std::size_t j = 0; j < cls.size(); ++j) {
                cls[j] = static_cast<std::uint8_t>(s.class_map[j]);
            }
            write_pgm(dir + "/" + stem + ".cls.pgm", cls, s.h, s.w);
            std::vector<std::uint8_t> edge(s.edge_map.size());
            for (std::size_t j = 0; j < edge.size(); ++j) edge[j] = s.edge_map[j] ? 255 : 0;
            write_pgm(dir + "/" + stem + ".edge.pgm", edge, s.h, s.w);
            write_pxt(dir + "/" + stem + ".nrm.pxt", s.normal_map);
            manifest << stem << ".ppm " << stem << ".cls.pgm " << stem << ".edge.pgm " << stem
                     << ".nrm.pxt\n";
        }
    }
}

SplitSpec read_corpus_meta(const std::string& dir) {
    std::ifstream meta(dir + "/corpus.txt");
    if (!meta) throw DataError("no corpus at " + dir + " (missing corpus.txt)");
    SplitSpec spec;
    std::string line;
    std::map<std::string, std::string> kv;
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    spec.seed = std::stoull(kv.at("seed"));
    spec.height = std::stoi(kv.at("height"));
    spec.width = std::stoi(kv.at("width"));
    spec.num_classes = std::stoi(kv.at("classes"));
    spec.counts.train = std::stoi(kv.at("train"));
    spec.counts.val = std::stoi(kv.at("val"));
    spec.counts.test = std::stoi(kv.at("test"));
    return spec;
}

Dataset load_split(const std::string& dir, const std::string& split) {
    const SplitSpec spec = read_corpus_meta(dir);
    std::ifstream manifest(dir + "/" + split + ".manifest");
    if (!manifest) throw DataError("missing manifest for split '" + split + "' in " + dir);
    Dataset d;
    d.num_classes = spec.num_classes;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string ppm, cls, edge, nrm;
        if (!(ss >> ppm >> cls >> edge >> nrm)) throw DataError("malformed manifest line: " + line);
        SyntheticScene s;
        s.image = read_ppm(dir + "/" + ppm);
        s.h = s.image.dim(1);
        s.w = s.image.dim(2);
        int h = 0, w = 0;
        auto cls_bytes = read_pgm(dir + "/" + cls, h, w);
        if (h != s.h || w != s.w) throw DataError("class map size mismatch in " + cls);
        s.class_map.assign(cls_bytes.begin(), cls_bytes.end());
        auto edge_bytes = read_pgm(dir + "/" + edge, h, w);
        s.edge_map.resize(edge_bytes.size());
        for (std::size_t i = 0; i < edge_bytes.size(); ++i) s.edge_map[i] = edge_bytes[i] ? 1 : 0;
        s.normal_map = read_pxt<float>(dir + "/" + nrm);
        d.scenes.push_back(std::move(s));
    }
    if (d.scenes.empty()) throw DataError("empty split '" + split + "' in " + dir);
    return d;
}

}  // namespace pixelnet
