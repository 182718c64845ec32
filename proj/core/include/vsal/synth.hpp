#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vsal/egomotion.hpp"
#include "vsal/flow.hpp"
#include "vsal/tensor.hpp"

namespace vsal {

// Texture ids encode family (id % 4: 0 value noise, 1 vertical stripes,
// 2 horizontal stripes, 3 checkerboard) and a hash salt (id / 4).

struct SynthSpec {
    int class_id = 0;
    int fg_shape = 0;    // 0 rectangle, 1 disc
    int fg_texture = 0;
    int bg_texture = 0;
    int fg_x = 8, fg_y = 8, fg_w = 14, fg_h = 14;  // initial box, screen px
    std::vector<std::array<int, 2>> velocity;      // fg screen motion per frame pair
    std::vector<std::array<int, 2>> camera_pan;    // bg screen motion per frame pair
    int frames = 16;
    int width = 64, height = 64;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct TruthBox {
    int x0, y0, x1, y1;  // inclusive
};

struct GroundTruth {
    std::vector<FlowField> flow;       // one per frame pair
    std::vector<TruthBox> box;         // one per frame
    std::vector<Homography> camera;    // one per frame pair
    int label = 0;
};

struct SynthVideo {
    std::vector<Tensor> frames;  // grayscale [H][W] in [0,1]
    GroundTruth truth;
};

struct SpecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic render; throws SpecError if the motion program pushes the
// foreground out of frame.
SynthVideo generate(const SynthSpec& spec);

struct ManifestEntry {
    std::string video_id;
    int class_id;
    std::string split;  // train / val / test
    SynthSpec spec;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
};

// Desk-scale benchmark: classes cycle through six signal patterns, pairs of
// which differ only in motion program, only in foreground texture, or only in
// background texture. Split is 60/20/20 train/val/test per class.
Manifest make_benchmark(int classes, int videos_per_class, std::uint64_t seed);

// Writes numbered PGM frames, a label file, and truth.csv under dir.
void write_video(const std::filesystem::path& dir, const SynthVideo& video);

// Renders every manifest entry under root/<video_id>/ and writes
// root/manifest.csv (video_id,class,split).
void write_benchmark(const std::filesystem::path& root, const Manifest& manifest);

}  // namespace vsal
