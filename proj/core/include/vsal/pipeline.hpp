#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vsal/convnet.hpp"
#include "vsal/egomotion.hpp"
#include "vsal/flow.hpp"
#include "vsal/fusion.hpp"
#include "vsal/saliency.hpp"
#include "vsal/tensor.hpp"

namespace vsal {

struct PipelineConfig {
    // [flow]
    double flow_alpha = 10.0;
    int flow_iterations = 200;
    int flow_pyramid_levels = 3;
    // [egomotion]
    int max_corners = 400;
    int ransac_iters = 500;
    double inlier_thresh = 1.0;
    double min_magnitude = 1.0;
    // [saliency]
    double shot_threshold = 0.35;
    double edge_thresh = 1.0;
    int border_margin = 4;  // residual zeroed within this margin before masking
    // [convnet]
    int input_extent = 32;
    int conv1_channels = 4;
    int conv2_channels = 8;
    int epochs = 30;
    int batch_size = 30;
    double learning_rate = 0.05;
    double flow_clip = 8.0;
    // [fusion]
    double lambda = 5e-3;
    double epsilon = 0.0;
    // [pipeline]
    std::uint64_t seed = 0;
    int jobs = 1;
    int clip_len = 16;
    bool use_saliency = true;
    // [synth]
    int synth_classes = 6;
    int synth_videos_per_class = 20;

    FlowParams flow_params() const {
        return {flow_alpha, flow_iterations, flow_pyramid_levels};
    }
};

struct ConfigParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DependencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Line-oriented "key = value" file with [section] headers; unknown sections
// or keys are errors.
PipelineConfig parse_config(std::istream& in);
PipelineConfig load_config(const std::filesystem::path& path);
std::uint64_t pipeline_config_digest(const PipelineConfig& cfg);

struct VideoRecord {
    std::string id;
    std::filesystem::path dir;
    int label = 0;
    std::string split = "train";
    int frame_count = 0;
    int width = 0, height = 0;
};

// Scans root for per-video directories with contiguous numbered PGM frames
// and a label file; reads root/manifest.csv splits when present.
std::vector<VideoRecord> ingest(const std::filesystem::path& root);

std::vector<Tensor> load_video_frames(const VideoRecord& rec);

// Per-pair camera-compensated residual flow plus the fitted homographies.
struct EgomotionResult {
    std::vector<FlowField> residual;
    std::vector<Homography> camera;
};

std::vector<FlowField> compute_flows(const std::vector<Tensor>& frames,
                                     const PipelineConfig& cfg);
EgomotionResult compensate_camera(const std::vector<Tensor>& frames,
                                  const std::vector<FlowField>& flows, const PipelineConfig& cfg,
                                  std::uint64_t seed);
// Shot segmentation plus one salient rectangle per shot. The residual flow is
// zeroed within border_margin of the frame edge before mask extraction.
std::vector<SalientRegion> salient_regions(const std::vector<Tensor>& frames,
                                           const std::vector<FlowField>& residual,
                                           const PipelineConfig& cfg);

enum class StreamKind { SalientFrames3D, SalientFlow3D, Background2D };

std::string stream_name(StreamKind kind);
NetworkConfig stream_config(StreamKind kind, int classes, const PipelineConfig& cfg);

// Per-stream inputs of one video: non-overlapping clip_len windows per shot,
// trailing remainder padded by repeating the last frame.
struct VideoInputs {
    std::vector<Tensor> salient_clips;   // 1 x T x E x E
    std::vector<Tensor> flow_clips;      // 2 x T x E x E
    std::vector<Tensor> background_frames;  // 1 x E x E, stride-4 subsample
};

VideoInputs clipify(const std::vector<Tensor>& frames, const std::vector<FlowField>& residual,
                    const std::vector<SalientRegion>& regions, const PipelineConfig& cfg);

// Full in-memory preprocessing: flow, camera compensation, saliency, clipify.
// With cfg.use_saliency false the full-frame region is used for every shot.
VideoInputs prepare_video_inputs(const std::vector<Tensor>& frames, const PipelineConfig& cfg,
                                 std::uint64_t seed);

// Staged file-based execution rooted at a work directory.
struct StageContext {
    std::filesystem::path data_root;
    std::filesystem::path work_root;
    PipelineConfig config;
    StreamKind train_stream = StreamKind::SalientFrames3D;  // train stage only
};

// Stage names: flow, egomotion, saliency, train, score, learn-weights,
// predict, evaluate, synth-make. Throws DependencyError when prerequisite
// artifacts are missing or were produced under a different config.
void run_stage(const std::string& name, const StageContext& ctx);

// Atomic write helper: write to a temp file then rename over the target.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

}  // namespace vsal
