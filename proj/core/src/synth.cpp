#include "vsal/synth.hpp"

#include "vsal/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace vsal {

namespace {

std::uint64_t hash_mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ull;
    x ^= x >> 33;
    return x;
}

double hash01(std::int64_t x, std::int64_t y, std::uint64_t salt) {
    std::uint64_t h = hash_mix(static_cast<std::uint64_t>(x) * 0x9e3779b97f4a7c15ull ^
                               hash_mix(static_cast<std::uint64_t>(y)) ^ salt * 0x2545f4914f6cdd1dull);
    return static_cast<double>(h >> 11) / 9007199254740992.0;
}

// Bilinear value noise with the given cell period.
double value_noise(double x, double y, double period, std::uint64_t salt) {
    double gx = x / period, gy = y / period;
    std::int64_t x0 = static_cast<std::int64_t>(std::floor(gx));
    std::int64_t y0 = static_cast<std::int64_t>(std::floor(gy));
    double fx = gx - x0, fy = gy - y0;
    double sx = fx * fx * (3 - 2 * fx), sy = fy * fy * (3 - 2 * fy);
    double v00 = hash01(x0, y0, salt), v10 = hash01(x0 + 1, y0, salt);
    double v01 = hash01(x0, y0 + 1, salt), v11 = hash01(x0 + 1, y0 + 1, salt);
    return (v00 * (1 - sx) + v10 * sx) * (1 - sy) + (v01 * (1 - sx) + v11 * sx) * sy;
}

// World-coordinate texture in [0,1].
double texture_value(int texture_id, double x, double y) {
    const int family = ((texture_id % 4) + 4) % 4;
    const std::uint64_t salt = static_cast<std::uint64_t>(texture_id / 4) + 101;
    double base;
    switch (family) {
        case 1:  // vertical stripes
            base = 0.5 + 0.35 * std::sin(2.0 * M_PI * x / 4.0);
            break;
        case 2:  // horizontal stripes
            base = 0.5 + 0.35 * std::sin(2.0 * M_PI * y / 4.0);
            break;
        case 3: {  // 4 px checkerboard
            std::int64_t cx = static_cast<std::int64_t>(std::floor(x / 4.0));
            std::int64_t cy = static_cast<std::int64_t>(std::floor(y / 4.0));
            base = ((cx + cy) & 1) ? 0.75 : 0.25;
            break;
        }
        default:  // smooth value noise
            base = 0.25 + 0.5 * value_noise(x, y, 12.0, salt);
            break;
    }
    // High-frequency detail so corner detection finds structure everywhere.
    return std::clamp(base * 0.85 +
                          0.15 * hash01(static_cast<std::int64_t>(std::floor(x)),
                                        static_cast<std::int64_t>(std::floor(y)), salt ^ 7),
                      0.0, 1.0);
}

std::array<int, 2> program_at(const std::vector<std::array<int, 2>>& prog, int t) {
    if (prog.empty()) return {0, 0};
    return prog[std::min<std::size_t>(t, prog.size() - 1)];
}

}  // namespace

SynthVideo generate(const SynthSpec& spec) {
    if (spec.frames < 16) throw SpecError("synth video needs at least 16 frames");
    if (spec.width < 16 || spec.height < 16) throw SpecError("synth frame extent too small");

    // Precompute per-frame foreground positions and cumulative camera offsets.
    std::vector<std::array<int, 2>> fg_pos(spec.frames), cam_off(spec.frames);
    fg_pos[0] = {spec.fg_x, spec.fg_y};
    cam_off[0] = {0, 0};
    for (int t = 1; t < spec.frames; ++t) {
        auto v = program_at(spec.velocity, t - 1);
        auto p = program_at(spec.camera_pan, t - 1);
        fg_pos[t] = {fg_pos[t - 1][0] + v[0], fg_pos[t - 1][1] + v[1]};
        cam_off[t] = {cam_off[t - 1][0] + p[0], cam_off[t - 1][1] + p[1]};
    }
    for (int t = 0; t < spec.frames; ++t) {
        // Foreground must stay in frame relative to the panning camera view.
        int x0 = fg_pos[t][0], y0 = fg_pos[t][1];
        if (x0 < 0 || y0 < 0 || x0 + spec.fg_w > spec.width || y0 + spec.fg_h > spec.height)
            throw SpecError("foreground leaves frame at frame " + std::to_string(t));
    }

    SynthVideo video;
    video.truth.label = spec.class_id;
    std::mt19937_64 noise_rng(hash_mix(spec.seed ^ 0xabcd1234ull));
    std::normal_distribution<double> gauss(0.0, spec.noise_sigma);

    for (int t = 0; t < spec.frames; ++t) {
        Tensor frame = Tensor::zeros({spec.height, spec.width});
        const int fx = fg_pos[t][0], fy = fg_pos[t][1];
        const double cx_disc = fx + spec.fg_w / 2.0, cy_disc = fy + spec.fg_h / 2.0;
        const double rx = spec.fg_w / 2.0, ry = spec.fg_h / 2.0;
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                bool in_fg = x >= fx && x < fx + spec.fg_w && y >= fy && y < fy + spec.fg_h;
                if (in_fg && spec.fg_shape == 1) {
                    double dx = (x + 0.5 - cx_disc) / rx, dy = (y + 0.5 - cy_disc) / ry;
                    in_fg = dx * dx + dy * dy <= 1.0;
                }
                double v;
                if (in_fg) {
                    // Texture rides with the foreground.
                    v = texture_value(spec.fg_texture, x - fx, y - fy);
                } else {
                    // Background is static in world coordinates.
                    v = texture_value(spec.bg_texture, x + cam_off[t][0], y + cam_off[t][1]);
                }
                if (spec.noise_sigma > 0) v += gauss(noise_rng);
                frame.at({y, x}) = std::clamp(v, 0.0, 1.0);
            }
        video.frames.push_back(std::move(frame));
        video.truth.box.push_back({fx, fy, fx + spec.fg_w - 1, fy + spec.fg_h - 1});
    }

    for (int t = 0; t + 1 < spec.frames; ++t) {
        auto vel = program_at(spec.velocity, t);
        auto pan = program_at(spec.camera_pan, t);
        // Background screen motion is -pan (the camera pans by +pan).
        FlowField f = FlowField::zeros(spec.height, spec.width);
        const TruthBox& b = video.truth.box[t];
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                bool in_fg = x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1;
                f.u_at(y, x) = in_fg ? vel[0] : -pan[0];
                f.v_at(y, x) = in_fg ? vel[1] : -pan[1];
            }
        video.truth.flow.push_back(std::move(f));
        Homography h;
        h.m = {1, 0, static_cast<double>(-pan[0]), 0, 1, static_cast<double>(-pan[1]), 0, 0, 1};
        video.truth.camera.push_back(h);
    }
    return video;
}

namespace {

struct ClassPattern {
    int fg_texture, bg_texture;
    int motion;  // 0 horizontal bounce, 1 vertical bounce, 2 diagonal, 3 zigzag
};

// Pairs (0,1) differ only in motion, (2,3) only in foreground texture,
// (4,5) only in background texture.
constexpr ClassPattern kPatterns[6] = {
    {3, 4, 0},   // checker fg, noise bg A
    {3, 4, 1},
    {1, 8, 2},   // stripe fg variants, noise bg B
    {2, 8, 2},
    {12, 5, 3},  // noise fg C, stripe bg variants
    {12, 6, 3},
};

std::vector<std::array<int, 2>> make_motion(int kind, int steps, int span_x, int span_y,
                                            std::mt19937_64& rng) {
    std::vector<std::array<int, 2>> prog;
    int dir = (rng() & 1) ? 1 : -1;
    int px = 0, py = 0;
    for (int t = 0; t < steps; ++t) {
        std::array<int, 2> v{0, 0};
        switch (kind) {
            case 0:
                if (px + 4 * dir < -span_x || px + 4 * dir > span_x) dir = -dir;
                v = {4 * dir, 0};
                break;
            case 1:
                if (py + 4 * dir < -span_y || py + 4 * dir > span_y) dir = -dir;
                v = {0, 4 * dir};
                break;
            case 2:
                if (px + 4 * dir < -span_x || px + 4 * dir > span_x) dir = -dir;
                v = {4 * dir, 4 * dir};
                break;
            case 3:
                v = (t & 1) ? std::array<int, 2>{0, 4 * dir} : std::array<int, 2>{4 * dir, 0};
                if (px + v[0] < -span_x || px + v[0] > span_x || py + v[1] < -span_y ||
                    py + v[1] > span_y) {
                    dir = -dir;
                    v = {-v[0], -v[1]};
                }
                break;
        }
        px += v[0];
        py += v[1];
        prog.push_back(v);
    }
    return prog;
}

}  // namespace

Manifest make_benchmark(int classes, int videos_per_class, std::uint64_t seed) {
    if (classes < 2) throw SpecError("benchmark needs at least 2 classes");
    Manifest manifest;
    const int train_n = (videos_per_class * 3) / 5;
    const int val_n = videos_per_class / 5;
    for (int c = 0; c < classes; ++c) {
        const ClassPattern& pat = kPatterns[c % 6];
        const int salt_bump = 16 * (c / 6);
        for (int v = 0; v < videos_per_class; ++v) {
            std::mt19937_64 rng(hash_mix(seed ^ (static_cast<std::uint64_t>(c) << 32) ^
                                         static_cast<std::uint64_t>(v)));
            SynthSpec spec;
            spec.class_id = c;
            spec.fg_shape = rng() & 1;
            spec.fg_texture = pat.fg_texture + salt_bump;
            spec.bg_texture = pat.bg_texture + salt_bump;
            spec.frames = 16;
            spec.width = 64;
            spec.height = 64;
            spec.fg_w = 28;
            spec.fg_h = 28;
            // Room for +-8 px of travel in each direction.
            spec.fg_x = 10 + static_cast<int>(rng() % 18);
            spec.fg_y = 10 + static_cast<int>(rng() % 18);
            spec.velocity = make_motion(pat.motion, spec.frames - 1, 8, 8, rng);
            // Stripe backgrounds only constrain flow along their gradient, so
            // pan directions are restricted to ones the background can anchor.
            std::array<std::array<int, 2>, 3> pans{{{0, 0}, {1, 0}, {-1, 0}}};
            std::array<std::array<int, 2>, 3> pans_h{{{0, 0}, {0, 1}, {0, -1}}};
            const int bg_family = ((pat.bg_texture % 4) + 4) % 4;
            auto pan = bg_family == 2 ? pans_h[rng() % 3] : pans[rng() % 3];
            spec.camera_pan.assign(spec.frames - 1, pan);
            spec.noise_sigma = 0.0;
            spec.seed = rng();

            ManifestEntry e;
            std::ostringstream id;
            id << "c" << c << "_v";
            id.width(3);
            id.fill('0');
            id << v;
            e.video_id = id.str();
            e.class_id = c;
            e.split = v < train_n ? "train" : (v < train_n + val_n ? "val" : "test");
            e.spec = spec;
            manifest.entries.push_back(std::move(e));
        }
    }
    return manifest;
}

void write_video(const std::filesystem::path& dir, const SynthVideo& video) {
    std::filesystem::create_directories(dir);
    for (std::size_t t = 0; t < video.frames.size(); ++t) {
        std::ostringstream name;
        name.width(6);
        name.fill('0');
        name << t;
        std::ofstream out(dir / (name.str() + ".pgm"), std::ios::binary);
        if (!out) throw std::runtime_error("cannot write frame under " + dir.string());
        write_pgm(video.frames[t], out);
    }
    {
        std::ofstream out(dir / "label");
        out << video.truth.label << "\n";
    }
    std::ofstream truth(dir / "truth.csv");
    truth << "frame,box_x0,box_y0,box_x1,box_y1,pan_x,pan_y\n";
    for (std::size_t t = 0; t < video.frames.size(); ++t) {
        const TruthBox& b = video.truth.box[t];
        int pan_x = 0, pan_y = 0;
        if (t < video.truth.camera.size()) {
            pan_x = static_cast<int>(std::lround(-video.truth.camera[t].m[2]));
            pan_y = static_cast<int>(std::lround(-video.truth.camera[t].m[5]));
        }
        truth << t << ',' << b.x0 << ',' << b.y0 << ',' << b.x1 << ',' << b.y1 << ',' << pan_x
              << ',' << pan_y << "\n";
    }
}

void write_benchmark(const std::filesystem::path& root, const Manifest& manifest) {
    std::filesystem::create_directories(root);
    std::ofstream mf(root / "manifest.csv");
    mf << "video_id,class,split\n";
    for (const ManifestEntry& e : manifest.entries) {
        write_video(root / e.video_id, generate(e.spec));
        mf << e.video_id << ',' << e.class_id << ',' << e.split << "\n";
    }
}

}  // namespace vsal
