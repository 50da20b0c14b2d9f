// Procedural 28x28 digit glyphs written in the IDX container, so the desk-
// scale training targets have a dataset that needs no network access. Each
// sample renders a digit skeleton (polylines and elliptic arcs) with random
// rotation, scale, translation, stroke width, intensity and pixel noise; all
// randomness is derived from (seed, split, index), so the files are
// byte-reproducible.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "llvit/data.hpp"
#include "llvit/errors.hpp"
#include "llvit/rng.hpp"

namespace llvit {

namespace {

constexpr int kSide = 28;

struct Pt {
    double x, y;
};

struct Stroke {
    // polyline through `pts`, or an elliptic arc when `arc` is set:
    // point(theta) = (cx + rx*sin(theta), cy - ry*cos(theta)), theta in
    // [a0, a1] (theta=0 at the top, increasing clockwise)
    bool arc = false;
    std::vector<Pt> pts;
    double cx = 0, cy = 0, rx = 0, ry = 0, a0 = 0, a1 = 0;
};

Stroke line(std::initializer_list<Pt> pts) {
    Stroke s;
    s.pts = pts;
    return s;
}

Stroke arc(double cx, double cy, double rx, double ry, double a0, double a1) {
    Stroke s;
    s.arc = true;
    s.cx = cx;
    s.cy = cy;
    s.rx = rx;
    s.ry = ry;
    s.a0 = a0;
    s.a1 = a1;
    return s;
}

const double kPi = 3.14159265358979323846;

std::vector<Stroke> glyph(int digit) {
    switch (digit) {
        case 0: return {arc(0.5, 0.5, 0.30, 0.40, 0, 2 * kPi)};
        case 1: return {line({{0.34, 0.24}, {0.55, 0.08}, {0.55, 0.92}})};
        case 2:
            return {arc(0.5, 0.33, 0.28, 0.23, -0.5 * kPi, 0.58 * kPi),
                    line({{0.77, 0.40}, {0.22, 0.88}, {0.80, 0.88}})};
        case 3:
            return {arc(0.5, 0.30, 0.26, 0.20, -0.45 * kPi, kPi),
                    arc(0.5, 0.70, 0.28, 0.20, 0, 1.45 * kPi)};
        case 4:
            return {line({{0.58, 0.08}, {0.18, 0.60}, {0.85, 0.60}}),
                    line({{0.62, 0.08}, {0.62, 0.92}})};
        case 5:
            return {line({{0.75, 0.12}, {0.28, 0.12}, {0.25, 0.46}}),
                    arc(0.47, 0.65, 0.27, 0.24, -0.25 * kPi, 1.30 * kPi)};
        case 6:
            return {line({{0.66, 0.08}, {0.45, 0.38}, {0.31, 0.62}}),
                    arc(0.5, 0.68, 0.26, 0.22, 0, 2 * kPi)};
        case 7:
            return {line({{0.20, 0.12}, {0.80, 0.12}, {0.38, 0.90}}),
                    line({{0.35, 0.50}, {0.65, 0.50}})};
        case 8:
            return {arc(0.5, 0.30, 0.22, 0.19, 0, 2 * kPi),
                    arc(0.5, 0.70, 0.26, 0.21, 0, 2 * kPi)};
        case 9:
            return {arc(0.5, 0.32, 0.26, 0.22, 0, 2 * kPi),
                    line({{0.76, 0.32}, {0.72, 0.60}, {0.55, 0.90}})};
        default: throw ConfigError("digit out of range");
    }
}

void render(int digit, Rng& rng, uint8_t* out) {
    const double rot = rng.uniform(-0.22f, 0.22f);
    const double scale = rng.uniform(0.82f, 1.12f);
    const double tx = rng.uniform(-2.2f, 2.2f);
    const double ty = rng.uniform(-2.2f, 2.2f);
    const double sigma = rng.uniform(0.55f, 0.95f);
    const double fg = rng.uniform(0.72f, 1.0f);
    const double cosr = std::cos(rot), sinr = std::sin(rot);

    std::vector<double> acc(kSide * kSide, 0.0);
    const auto splat = [&](double ux, double uy) {
        // unit box -> 20px box centered in the frame, then jittered
        double gx = (ux - 0.5) * scale, gy = (uy - 0.5) * scale;
        const double rx2 = gx * cosr - gy * sinr, ry2 = gx * sinr + gy * cosr;
        const double px = rx2 * 20.0 + kSide / 2.0 + tx;
        const double py = ry2 * 20.0 + kSide / 2.0 + ty;
        const int x0 = static_cast<int>(px), y0 = static_cast<int>(py);
        for (int y = y0 - 2; y <= y0 + 2; ++y) {
            for (int x = x0 - 2; x <= x0 + 2; ++x) {
                if (x < 0 || x >= kSide || y < 0 || y >= kSide) continue;
                const double dx = x + 0.5 - px, dy = y + 0.5 - py;
                acc[y * kSide + x] += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            }
        }
    };

    for (const Stroke& s : glyph(digit)) {
        if (s.arc) {
            const double len = std::abs(s.a1 - s.a0) * std::max(s.rx, s.ry);
            const int steps = std::max(24, static_cast<int>(len * 160));
            for (int i = 0; i <= steps; ++i) {
                const double t = s.a0 + (s.a1 - s.a0) * i / steps;
                splat(s.cx + s.rx * std::sin(t), s.cy - s.ry * std::cos(t));
            }
        } else {
            for (size_t seg = 0; seg + 1 < s.pts.size(); ++seg) {
                const Pt a = s.pts[seg], b = s.pts[seg + 1];
                const double len = std::hypot(b.x - a.x, b.y - a.y);
                const int steps = std::max(12, static_cast<int>(len * 160));
                for (int i = 0; i <= steps; ++i) {
                    const double t = static_cast<double>(i) / steps;
                    splat(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
                }
            }
        }
    }

    for (int i = 0; i < kSide * kSide; ++i) {
        double v = std::min(1.0, acc[i] * 0.8) * fg * 255.0;
        v += rng.normal(0.0f, 10.0f);
        out[i] = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
    }
}

void write_be32(std::ofstream& out, uint32_t v) {
    const uint8_t b[4] = {static_cast<uint8_t>(v >> 24), static_cast<uint8_t>(v >> 16),
                          static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_split(const std::string& img_path, const std::string& lab_path, int64_t count,
                 uint64_t seed, uint64_t split_salt) {
    std::ofstream img(img_path, std::ios::binary);
    std::ofstream lab(lab_path, std::ios::binary);
    if (!img || !lab) throw IoError("cannot write synth-digit files under " + img_path);
    write_be32(img, 0x00000803);
    write_be32(img, static_cast<uint32_t>(count));
    write_be32(img, kSide);
    write_be32(img, kSide);
    write_be32(lab, 0x00000801);
    write_be32(lab, static_cast<uint32_t>(count));

    std::vector<uint8_t> px(kSide * kSide);
    for (int64_t i = 0; i < count; ++i) {
        Rng rng(Rng::derive(seed, split_salt * 1000003ULL + static_cast<uint64_t>(i)));
        const int digit = static_cast<int>(rng.index(10));
        render(digit, rng, px.data());
        img.write(reinterpret_cast<const char*>(px.data()), px.size());
        const uint8_t y = static_cast<uint8_t>(digit);
        lab.write(reinterpret_cast<const char*>(&y), 1);
    }
    if (!img || !lab) throw IoError("short write for synth-digit files under " + img_path);
}

}  // namespace

std::string generate_synth_digits(const std::string& dir, int64_t train_count, int64_t test_count,
                                  uint64_t seed) {
    std::filesystem::create_directories(dir);
    write_split(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte", train_count,
                seed, 1);
    write_split(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte", test_count,
                seed, 2);
    return dir;
}

}  // namespace llvit
