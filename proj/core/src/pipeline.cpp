#include "vsal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "vsal/eval.hpp"
#include "vsal/image.hpp"
#include "vsal/synth.hpp"

namespace vsal {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ull;
    x ^= x >> 33;
    return x;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 14695981039346656037ull) {
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

std::string frame_name(int t, const char* ext) {
    std::ostringstream ss;
    ss.width(6);
    ss.fill('0');
    ss << t;
    return ss.str() + ext;
}

void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& body) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (int w = 0; w < jobs; ++w)
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += jobs) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

void atomic_write(const fs::path& path, const std::string& bytes) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

struct KeySetter {
    std::function<void(PipelineConfig&, const std::string&)> set;
};

double to_double(const std::string& v) { return std::stod(v); }
int to_int(const std::string& v) { return std::stoi(v); }
std::uint64_t to_u64(const std::string& v) { return std::stoull(v); }
bool to_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigParseError("boolean value must be true/false: " + v);
}

const std::map<std::string, KeySetter>& config_keys() {
    static const std::map<std::string, KeySetter> keys = {
        {"flow.alpha", {[](PipelineConfig& c, const std::string& v) { c.flow_alpha = to_double(v); }}},
        {"flow.iterations", {[](PipelineConfig& c, const std::string& v) { c.flow_iterations = to_int(v); }}},
        {"flow.pyramid_levels", {[](PipelineConfig& c, const std::string& v) { c.flow_pyramid_levels = to_int(v); }}},
        {"egomotion.max_corners", {[](PipelineConfig& c, const std::string& v) { c.max_corners = to_int(v); }}},
        {"egomotion.ransac_iters", {[](PipelineConfig& c, const std::string& v) { c.ransac_iters = to_int(v); }}},
        {"egomotion.inlier_thresh", {[](PipelineConfig& c, const std::string& v) { c.inlier_thresh = to_double(v); }}},
        {"egomotion.min_magnitude", {[](PipelineConfig& c, const std::string& v) { c.min_magnitude = to_double(v); }}},
        {"saliency.shot_threshold", {[](PipelineConfig& c, const std::string& v) { c.shot_threshold = to_double(v); }}},
        {"saliency.edge_thresh", {[](PipelineConfig& c, const std::string& v) { c.edge_thresh = to_double(v); }}},
        {"saliency.border_margin", {[](PipelineConfig& c, const std::string& v) { c.border_margin = to_int(v); }}},
        {"convnet.input_extent", {[](PipelineConfig& c, const std::string& v) { c.input_extent = to_int(v); }}},
        {"convnet.conv1_channels", {[](PipelineConfig& c, const std::string& v) { c.conv1_channels = to_int(v); }}},
        {"convnet.conv2_channels", {[](PipelineConfig& c, const std::string& v) { c.conv2_channels = to_int(v); }}},
        {"convnet.epochs", {[](PipelineConfig& c, const std::string& v) { c.epochs = to_int(v); }}},
        {"convnet.batch_size", {[](PipelineConfig& c, const std::string& v) { c.batch_size = to_int(v); }}},
        {"convnet.learning_rate", {[](PipelineConfig& c, const std::string& v) { c.learning_rate = to_double(v); }}},
        {"convnet.flow_clip", {[](PipelineConfig& c, const std::string& v) { c.flow_clip = to_double(v); }}},
        {"fusion.lambda", {[](PipelineConfig& c, const std::string& v) { c.lambda = to_double(v); }}},
        {"fusion.epsilon", {[](PipelineConfig& c, const std::string& v) { c.epsilon = to_double(v); }}},
        {"pipeline.seed", {[](PipelineConfig& c, const std::string& v) { c.seed = to_u64(v); }}},
        {"pipeline.jobs", {[](PipelineConfig& c, const std::string& v) { c.jobs = to_int(v); }}},
        {"pipeline.clip_len", {[](PipelineConfig& c, const std::string& v) { c.clip_len = to_int(v); }}},
        {"pipeline.use_saliency", {[](PipelineConfig& c, const std::string& v) { c.use_saliency = to_bool(v); }}},
        {"synth.classes", {[](PipelineConfig& c, const std::string& v) { c.synth_classes = to_int(v); }}},
        {"synth.videos_per_class", {[](PipelineConfig& c, const std::string& v) { c.synth_videos_per_class = to_int(v); }}},
    };
    return keys;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

PipelineConfig parse_config(std::istream& in) {
    PipelineConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigParseError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        std::string full = section.empty() ? key : section + "." + key;
        auto it = config_keys().find(full);
        if (it == config_keys().end())
            throw ConfigParseError("line " + std::to_string(lineno) + ": unknown key " + full);
        try {
            it->second.set(cfg, value);
        } catch (const ConfigParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigParseError("line " + std::to_string(lineno) + ": bad value for " + full);
        }
    }
    if (cfg.clip_len < 2) throw ConfigParseError("pipeline.clip_len must be at least 2");
    if (cfg.lambda <= 0) throw ConfigParseError("fusion.lambda must be positive");
    return cfg;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError("cannot open config: " + path.string());
    return parse_config(in);
}

std::uint64_t pipeline_config_digest(const PipelineConfig& c) {
    std::ostringstream ss;
    ss.precision(17);
    ss << c.flow_alpha << ' ' << c.flow_iterations << ' ' << c.flow_pyramid_levels << ' '
       << c.max_corners << ' ' << c.ransac_iters << ' ' << c.inlier_thresh << ' '
       << c.min_magnitude << ' ' << c.shot_threshold << ' ' << c.edge_thresh << ' '
       << c.border_margin << ' ' << c.input_extent << ' ' << c.conv1_channels << ' '
       << c.conv2_channels << ' ' << c.epochs << ' ' << c.batch_size << ' ' << c.learning_rate
       << ' ' << c.flow_clip << ' ' << c.lambda << ' ' << c.epsilon << ' ' << c.seed << ' '
       << c.clip_len << ' ' << c.use_saliency << ' ' << c.synth_classes << ' '
       << c.synth_videos_per_class;
    return fnv1a(ss.str());
}

// ---------------------------------------------------------------------------
// Ingest

std::vector<VideoRecord> ingest(const fs::path& root) {
    std::vector<VideoRecord> records;
    if (!fs::exists(root)) return records;

    std::map<std::string, std::string> splits;
    fs::path manifest = root / "manifest.csv";
    if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string id, cls, split;
            std::getline(ss, id, ',');
            std::getline(ss, cls, ',');
            std::getline(ss, split, ',');
            splits[id] = split;
        }
    }

    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());

    for (const fs::path& dir : dirs) {
        VideoRecord rec;
        rec.id = dir.filename().string();
        rec.dir = dir;

        fs::path label_file = dir / "label";
        std::ifstream lf(label_file);
        if (!lf || !(lf >> rec.label))
            throw IngestError("video " + rec.id + ": missing or bad label file");

        int count = 0;
        while (fs::exists(dir / frame_name(count, ".pgm"))) ++count;
        if (count == 0) throw IngestError("video " + rec.id + ": no frames");
        // Contiguity: nothing numbered beyond the first gap may exist.
        for (const auto& entry : fs::directory_iterator(dir)) {
            std::string name = entry.path().filename().string();
            if (name.size() == 10 && name.ends_with(".pgm")) {
                int t = std::stoi(name.substr(0, 6));
                if (t >= count)
                    throw IngestError("video " + rec.id + ": missing frame " +
                                      std::to_string(count) + " before frame " + name);
            }
        }
        rec.frame_count = count;

        Tensor first = read_pgm_file(dir / frame_name(0, ".pgm"));
        rec.height = first.shape()[0];
        rec.width = first.shape()[1];
        for (int t = 1; t < count; ++t) {
            Tensor f = read_pgm_file(dir / frame_name(t, ".pgm"));
            if (f.shape() != first.shape())
                throw IngestError("video " + rec.id + ": mixed frame extents");
        }
        auto it = splits.find(rec.id);
        if (it != splits.end()) rec.split = it->second;
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<Tensor> load_video_frames(const VideoRecord& rec) {
    std::vector<Tensor> frames;
    frames.reserve(rec.frame_count);
    for (int t = 0; t < rec.frame_count; ++t)
        frames.push_back(read_pgm_file(rec.dir / frame_name(t, ".pgm")));
    return frames;
}

// ---------------------------------------------------------------------------
// Per-video processing

std::vector<FlowField> compute_flows(const std::vector<Tensor>& frames,
                                     const PipelineConfig& cfg) {
    std::vector<FlowField> flows;
    for (std::size_t t = 0; t + 1 < frames.size(); ++t)
        flows.push_back(estimate_flow(frames[t], frames[t + 1], cfg.flow_params()));
    return flows;
}

EgomotionResult compensate_camera(const std::vector<Tensor>& frames,
                                  const std::vector<FlowField>& flows, const PipelineConfig& cfg,
                                  std::uint64_t seed) {
    EgomotionResult out;
    for (std::size_t t = 0; t < flows.size(); ++t) {
        Homography h = Homography::identity();
        try {
            std::vector<Point2> corners = detect_corners(frames[t], cfg.max_corners);
            std::vector<Correspondence> cs = build_correspondences(corners, flows[t]);
            if (cs.size() >= 8) {
                RansacResult r = ransac_homography(cs, cfg.ransac_iters, cfg.inlier_thresh,
                                                   mix64(seed ^ (t + 1)));
                h = r.model;
            }
        } catch (const NoModelError&) {
            // fall back to identity: treat the pair as camera-static
        } catch (const DegeneracyError&) {
        }
        out.camera.push_back(h);
        out.residual.push_back(residual_flow(flows[t], h, cfg.min_magnitude));
    }
    return out;
}

std::vector<SalientRegion> salient_regions(const std::vector<Tensor>& frames,
                                           const std::vector<FlowField>& residual,
                                           const PipelineConfig& cfg) {
    std::vector<Shot> shots = segment_shots(frames, cfg.shot_threshold);
    std::vector<SalientRegion> regions;
    for (const Shot& shot : shots) {
        std::vector<Tensor> masks;
        for (int t = shot.start_frame; t <= shot.end_frame && t < static_cast<int>(residual.size());
             ++t) {
            FlowField r = residual[t];
            const int m = cfg.border_margin;
            for (int y = 0; y < r.height; ++y)
                for (int x = 0; x < r.width; ++x)
                    if (y < m || y >= r.height - m || x < m || x >= r.width - m) {
                        r.u_at(y, x) = 0;
                        r.v_at(y, x) = 0;
                    }
            masks.push_back(motion_mask(r, cfg.edge_thresh));
        }
        if (masks.empty()) {
            // single-frame shot: no pair flow, fall back to the full frame
            const int h = frames[0].shape()[0], w = frames[0].shape()[1];
            regions.push_back({shot, 0, 0, w - 1, h - 1});
        } else {
            regions.push_back(union_region(masks, shot));
        }
    }
    return regions;
}

std::string stream_name(StreamKind kind) {
    switch (kind) {
        case StreamKind::SalientFrames3D: return "sal3d";
        case StreamKind::SalientFlow3D: return "flow3d";
        case StreamKind::Background2D: return "bg2d";
    }
    throw std::logic_error("unknown stream kind");
}

NetworkConfig stream_config(StreamKind kind, int classes, const PipelineConfig& cfg) {
    const int e = cfg.input_extent;
    NetworkConfig net;
    net.classes = classes;
    if (kind == StreamKind::Background2D) {
        net.input_shape = {1, e, e};
        net.layers = {LayerSpec::conv2d(cfg.conv1_channels, 3, 3), LayerSpec::relu(),
                      LayerSpec::maxpool2d(2, 2, 2, 2),
                      LayerSpec::conv2d(cfg.conv2_channels, 3, 3), LayerSpec::relu(),
                      LayerSpec::maxpool2d(2, 2, 2, 2), LayerSpec::full(classes),
                      LayerSpec::softmax()};
    } else {
        const int channels = kind == StreamKind::SalientFlow3D ? 2 : 1;
        net.input_shape = {channels, cfg.clip_len, e, e};
        net.layers = {LayerSpec::conv3d(cfg.conv1_channels, 3, 3, 3), LayerSpec::relu(),
                      LayerSpec::maxpool3d(2, 2, 2, 2, 2, 2),
                      LayerSpec::conv3d(cfg.conv2_channels, 3, 3, 3), LayerSpec::relu(),
                      LayerSpec::maxpool3d(2, 2, 2, 2, 2, 2), LayerSpec::full(classes),
                      LayerSpec::softmax()};
    }
    return net;
}

namespace {

Tensor crop_resize(const Tensor& frame, const SalientRegion& r, int extent) {
    Tensor crop = frame.slice_crop({{r.y0, r.y1 + 1}, {r.x0, r.x1 + 1}});
    return resize_bilinear(crop, extent, extent);
}

Tensor flow_channel(const FlowField& f, bool vertical) {
    Tensor t = Tensor::zeros({f.height, f.width});
    const std::vector<double>& src = vertical ? f.v : f.u;
    std::copy(src.begin(), src.end(), t.data().begin());
    return t;
}

}  // namespace

VideoInputs clipify(const std::vector<Tensor>& frames, const std::vector<FlowField>& residual,
                    const std::vector<SalientRegion>& regions, const PipelineConfig& cfg) {
    if (frames.empty()) throw std::invalid_argument("clipify: no frames");
    const int e = cfg.input_extent;
    const int L = cfg.clip_len;
    VideoInputs out;
    for (const SalientRegion& region : regions) {
        for (int start = region.shot.start_frame; start <= region.shot.end_frame; start += L) {
            std::vector<int> idx(L);
            for (int k = 0; k < L; ++k)
                idx[k] = std::min(start + k, region.shot.end_frame);  // repeat-last padding

            Tensor sal = Tensor::zeros({1, L, e, e});
            Tensor flo = Tensor::zeros({2, L, e, e});
            const std::size_t plane = static_cast<std::size_t>(e) * e;
            for (int k = 0; k < L; ++k) {
                Tensor fr = crop_resize(frames[idx[k]], region, e);
                std::copy(fr.data().begin(), fr.data().end(), sal.data().begin() + k * plane);
                int ft = std::min<int>(idx[k], static_cast<int>(residual.size()) - 1);
                if (ft >= 0) {
                    for (int ch = 0; ch < 2; ++ch) {
                        Tensor fc = crop_resize(flow_channel(residual[ft], ch == 1), region, e);
                        double* dst = flo.data().data() + (ch * static_cast<std::size_t>(L) + k) * plane;
                        for (std::size_t i = 0; i < plane; ++i)
                            dst[i] = std::clamp(fc[i], -cfg.flow_clip, cfg.flow_clip) /
                                         (2 * cfg.flow_clip) +
                                     0.5;
                    }
                }
            }
            out.salient_clips.push_back(std::move(sal));
            out.flow_clips.push_back(std::move(flo));

            for (int k = 0; k < L; k += 4) {
                auto [crop, bg] = split_frame(frames[idx[k]], region);
                Tensor small = resize_bilinear(bg, e, e);
                Tensor sample = Tensor::zeros({1, e, e});
                std::copy(small.data().begin(), small.data().end(), sample.data().begin());
                out.background_frames.push_back(std::move(sample));
            }
        }
    }
    return out;
}

VideoInputs prepare_video_inputs(const std::vector<Tensor>& frames, const PipelineConfig& cfg,
                                 std::uint64_t seed) {
    std::vector<FlowField> flows = compute_flows(frames, cfg);
    EgomotionResult ego = compensate_camera(frames, flows, cfg, seed);
    std::vector<SalientRegion> regions;
    if (cfg.use_saliency) {
        regions = salient_regions(frames, ego.residual, cfg);
    } else {
        const int h = frames[0].shape()[0], w = frames[0].shape()[1];
        for (const Shot& shot : segment_shots(frames, cfg.shot_threshold))
            regions.push_back({shot, 0, 0, w - 1, h - 1});
    }
    return clipify(frames, ego.residual, regions, cfg);
}

// ---------------------------------------------------------------------------
// Staged execution

namespace {

std::string stamp_contents(const PipelineConfig& cfg, const std::string& stage) {
    std::ostringstream ss;
    ss << std::hex << pipeline_config_digest(cfg) << ' ' << stage << "\n";
    return ss.str();
}

void write_stamp(const fs::path& dir, const PipelineConfig& cfg, const std::string& stage) {
    atomic_write(dir / "STAMP", stamp_contents(cfg, stage));
}

void require_stage(const fs::path& work, const PipelineConfig& cfg, const std::string& stage) {
    fs::path stamp = work / stage / "STAMP";
    if (!fs::exists(stamp))
        throw DependencyError("stage '" + stage + "' has not been run (missing " +
                              stamp.string() + ")");
    std::ifstream in(stamp);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (content != stamp_contents(cfg, stage))
        throw DependencyError("stage '" + stage + "' artifacts were built under a different config");
}

std::string serialize_flo(const FlowField& f) {
    std::ostringstream ss(std::ios::binary);
    write_flo(f, ss);
    return ss.str();
}

FlowField load_flo(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open flow file: " + path.string());
    return read_flo(in);
}

std::vector<FlowField> load_video_flows(const fs::path& dir, int frame_count) {
    std::vector<FlowField> flows;
    for (int t = 0; t + 1 < frame_count; ++t) flows.push_back(load_flo(dir / frame_name(t, ".flo")));
    return flows;
}

std::vector<SalientRegion> load_regions(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open regions file: " + file.string());
    std::vector<SalientRegion> regions;
    SalientRegion r;
    while (in >> r.shot.start_frame >> r.shot.end_frame >> r.x0 >> r.y0 >> r.x1 >> r.y1)
        regions.push_back(r);
    return regions;
}

int class_count(const std::vector<VideoRecord>& records) {
    int c = 0;
    for (const VideoRecord& r : records) c = std::max(c, r.label + 1);
    if (c < 2) throw IngestError("dataset needs at least 2 classes");
    return c;
}

void stage_flow(const StageContext& ctx, const std::vector<VideoRecord>& records) {
    parallel_for(ctx.config.jobs, records.size(), [&](std::size_t i) {
        const VideoRecord& rec = records[i];
        std::vector<Tensor> frames = load_video_frames(rec);
        std::vector<FlowField> flows = compute_flows(frames, ctx.config);
        for (std::size_t t = 0; t < flows.size(); ++t)
            atomic_write(ctx.work_root / "flow" / rec.id / frame_name(static_cast<int>(t), ".flo"),
                         serialize_flo(flows[t]));
    });
    write_stamp(ctx.work_root / "flow", ctx.config, "flow");
}

void stage_egomotion(const StageContext& ctx, const std::vector<VideoRecord>& records) {
    require_stage(ctx.work_root, ctx.config, "flow");
    parallel_for(ctx.config.jobs, records.size(), [&](std::size_t i) {
        const VideoRecord& rec = records[i];
        std::vector<Tensor> frames = load_video_frames(rec);
        std::vector<FlowField> flows = load_video_flows(ctx.work_root / "flow" / rec.id,
                                                        rec.frame_count);
        EgomotionResult ego = compensate_camera(frames, flows, ctx.config,
                                                ctx.config.seed ^ fnv1a(rec.id));
        std::ostringstream hs;
        hs.precision(17);
        for (std::size_t t = 0; t < ego.residual.size(); ++t) {
            atomic_write(ctx.work_root / "egomotion" / rec.id /
                             frame_name(static_cast<int>(t), ".flo"),
                         serialize_flo(ego.residual[t]));
            for (int k = 0; k < 9; ++k) hs << ego.camera[t].m[k] << (k == 8 ? "" : " ");
            hs << "\n";
        }
        atomic_write(ctx.work_root / "egomotion" / rec.id / "homographies.txt", hs.str());
    });
    write_stamp(ctx.work_root / "egomotion", ctx.config, "egomotion");
}

void stage_saliency(const StageContext& ctx, const std::vector<VideoRecord>& records) {
    require_stage(ctx.work_root, ctx.config, "egomotion");
    parallel_for(ctx.config.jobs, records.size(), [&](std::size_t i) {
        const VideoRecord& rec = records[i];
        std::vector<Tensor> frames = load_video_frames(rec);
        std::vector<FlowField> residual = load_video_flows(ctx.work_root / "egomotion" / rec.id,
                                                           rec.frame_count);
        std::vector<SalientRegion> regions = salient_regions(frames, residual, ctx.config);
        std::ostringstream ss;
        for (const SalientRegion& r : regions)
            ss << r.shot.start_frame << ' ' << r.shot.end_frame << ' ' << r.x0 << ' ' << r.y0
               << ' ' << r.x1 << ' ' << r.y1 << "\n";
        atomic_write(ctx.work_root / "saliency" / rec.id / "regions.txt", ss.str());
    });
    write_stamp(ctx.work_root / "saliency", ctx.config, "saliency");
}

VideoInputs stage_inputs(const StageContext& ctx, const VideoRecord& rec) {
    std::vector<Tensor> frames = load_video_frames(rec);
    std::vector<FlowField> residual = load_video_flows(ctx.work_root / "egomotion" / rec.id,
                                                       rec.frame_count);
    std::vector<SalientRegion> regions;
    if (ctx.config.use_saliency) {
        regions = load_regions(ctx.work_root / "saliency" / rec.id / "regions.txt");
    } else {
        for (const Shot& shot : segment_shots(frames, ctx.config.shot_threshold))
            regions.push_back({shot, 0, 0, rec.width - 1, rec.height - 1});
    }
    return clipify(frames, residual, regions, ctx.config);
}

const std::vector<Tensor>& stream_inputs(const VideoInputs& in, StreamKind kind) {
    switch (kind) {
        case StreamKind::SalientFrames3D: return in.salient_clips;
        case StreamKind::SalientFlow3D: return in.flow_clips;
        case StreamKind::Background2D: return in.background_frames;
    }
    throw std::logic_error("unknown stream kind");
}

void stage_train(const StageContext& ctx, const std::vector<VideoRecord>& records) {
    require_stage(ctx.work_root, ctx.config, "saliency");
    const int classes = class_count(records);
    std::vector<std::pair<Tensor, int>> dataset;
    std::vector<VideoInputs> per_video(records.size());
    std::vector<char> selected(records.size(), 0);
    for (std::size_t i = 0; i < records.size(); ++i) selected[i] = records[i].split == "train";
    parallel_for(ctx.config.jobs, records.size(), [&](std::size_t i) {
        if (selected[i]) per_video[i] = stage_inputs(ctx, records[i]);
    });
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!selected[i]) continue;
        for (const Tensor& t : stream_inputs(per_video[i], ctx.train_stream))
            dataset.emplace_back(t, records[i].label);
    }
    if (dataset.empty()) throw IngestError("no training samples for stream");

    Network net = init_network(stream_config(ctx.train_stream, classes, ctx.config),
                               ctx.config.seed ^ static_cast<std::uint64_t>(ctx.train_stream));
    std::vector<double> history =
        sgd_train(net, dataset, ctx.config.batch_size, ctx.config.learning_rate,
                  ctx.config.epochs, ctx.config.seed ^ 0x5eedull);

    std::ostringstream ck(std::ios::binary);
    save_checkpoint(net, ck);
    const std::string name = stream_name(ctx.train_stream);
    atomic_write(ctx.work_root / "streams" / (name + ".ckpt"), ck.str());
    std::ostringstream loss;
    loss.precision(17);
    loss << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < history.size(); ++e) loss << e << ',' << history[e] << "\n";
    atomic_write(ctx.work_root / "streams" / (name + "_loss.csv"), loss.str());
    write_stamp(ctx.work_root / "streams" / name, ctx.config, "train:" + name);
}

void require_trained(const fs::path& work, const PipelineConfig& cfg) {
    for (StreamKind k : {StreamKind::SalientFrames3D, StreamKind::SalientFlow3D,
                         StreamKind::Background2D}) {
        fs::path stamp = work / "streams" / stream_name(k) / "STAMP";
        if (!fs::exists(stamp))
            throw DependencyError("stream '" + stream_name(k) + "' has not been trained");
        std::ifstream in(stamp);
        std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
        if (content != stamp_contents(cfg, "train:" + stream_name(k)))
            throw DependencyError("stream '" + stream_name(k) +
                                  "' was trained under a different config");
    }
}

void stage_score(const StageContext& ctx, const std::vector<VideoRecord>& records) {
    require_stage(ctx.work_root, ctx.config, "saliency");
    require_trained(ctx.work_root, ctx.config);
    const int classes = class_count(records);

    std::vector<Network> nets;
    for (StreamKind k : {StreamKind::SalientFrames3D, StreamKind::SalientFlow3D,
                         StreamKind::Background2D}) {
        std::ifstream in(ctx.work_root / "streams" / (stream_name(k) + ".ckpt"),
                         std::ios::binary);
        if (!in) throw DependencyError("missing checkpoint for stream " + stream_name(k));
        nets.push_back(load_checkpoint(stream_config(k, classes, ctx.config), in));
    }

    std::vector<ScoreStack> stacks(records.size());
    parallel_for(ctx.config.jobs, records.size(), [&](std::size_t i) {
        VideoInputs in = stage_inputs(ctx, records[i]);
        ScoreStack s;
        s.label = records[i].label;
        s.rows.push_back(score_video(nets[0], in.salient_clips));
        s.rows.push_back(score_video(nets[1], in.flow_clips));
        s.rows.push_back(score_video(nets[2], in.background_frames));
        stacks[i] = std::move(s);
    });

    for (const std::string split : {"train", "val", "test"}) {
        std::vector<ScoreStack> subset;
        std::ostringstream ids;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (records[i].split == split) {
                subset.push_back(stacks[i]);
                ids << records[i].id << "\n";
            }
        std::ostringstream csv;
        write_score_table(subset, csv);
        atomic_write(ctx.work_root / "scores" / (split + ".csv"), csv.str());
        atomic_write(ctx.work_root / "scores" / (split + "_ids.txt"), ids.str());
    }
    write_stamp(ctx.work_root / "scores", ctx.config, "scores");
}

void stage_learn_weights(const StageContext& ctx) {
    require_stage(ctx.work_root, ctx.config, "scores");
    std::ifstream in(ctx.work_root / "scores" / "train.csv");
    if (!in) throw DependencyError("missing train score table");
    std::vector<ScoreStack> train = read_score_table(in);
    ClassWeights w = learn_weights(train, {ctx.config.lambda, ctx.config.epsilon});
    std::ostringstream csv;
    write_weights(w, csv);
    atomic_write(ctx.work_root / "weights" / "weights.csv", csv.str());
    write_stamp(ctx.work_root / "weights", ctx.config, "weights");
}

void stage_predict(const StageContext& ctx) {
    require_stage(ctx.work_root, ctx.config, "scores");
    require_stage(ctx.work_root, ctx.config, "weights");
    std::ifstream sin(ctx.work_root / "scores" / "test.csv");
    if (!sin) throw DependencyError("missing test score table");
    std::vector<ScoreStack> test = read_score_table(sin);
    std::ifstream win(ctx.work_root / "weights" / "weights.csv");
    ClassWeights w = read_weights(win);

    std::ostringstream csv;
    csv.precision(17);
    const int c = test.empty() ? 0 : test[0].classes();
    csv << "sample_id,label,predicted";
    for (int i = 0; i < c; ++i) csv << ",fused_" << i;
    csv << "\n";
    for (std::size_t i = 0; i < test.size(); ++i) {
        auto [cls, fused] = predict(test[i], w);
        csv << i << ',' << test[i].label << ',' << cls;
        for (double v : fused) csv << ',' << v;
        csv << "\n";
    }
    atomic_write(ctx.work_root / "predictions" / "predictions.csv", csv.str());
    write_stamp(ctx.work_root / "predictions", ctx.config, "predictions");
}

void stage_evaluate(const StageContext& ctx) {
    require_stage(ctx.work_root, ctx.config, "predictions");
    std::ifstream in(ctx.work_root / "predictions" / "predictions.csv");
    if (!in) throw DependencyError("missing predictions");
    std::string line;
    std::getline(in, line);
    std::vector<int> labels, preds;
    std::vector<std::vector<double>> fused;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ss, field, ',')) f.push_back(field);
        labels.push_back(std::stoi(f[1]));
        preds.push_back(std::stoi(f[2]));
        std::vector<double> row;
        for (std::size_t k = 3; k < f.size(); ++k) row.push_back(std::stod(f[k]));
        fused.push_back(std::move(row));
    }
    if (labels.empty()) throw DependencyError("predictions file is empty");

    double acc = accuracy(preds, labels);
    printf("%.17g\n", acc);

    const int c = static_cast<int>(fused[0].size());
    std::vector<double> aps;
    for (int j = 0; j < c; ++j) {
        RankedPredictions rp;
        bool any = false;
        for (std::size_t i = 0; i < fused.size(); ++i) {
            rp.sample_ids.push_back(static_cast<int>(i));
            rp.confidence.push_back(fused[i][j]);
            rp.relevant.push_back(labels[i] == j ? 1 : 0);
            if (labels[i] == j) any = true;
        }
        if (any) aps.push_back(average_precision(rp));
    }
    std::ostringstream rep;
    write_ap_report(aps, rep);
    atomic_write(ctx.work_root / "eval" / "report.csv", rep.str());
    write_stamp(ctx.work_root / "eval", ctx.config, "evaluate");
}

}  // namespace

void run_stage(const std::string& name, const StageContext& ctx) {
    if (name == "synth-make") {
        Manifest m = make_benchmark(ctx.config.synth_classes, ctx.config.synth_videos_per_class,
                                    ctx.config.seed);
        write_benchmark(ctx.data_root, m);
        return;
    }
    if (name == "learn-weights") return stage_learn_weights(ctx);
    if (name == "predict") return stage_predict(ctx);
    if (name == "evaluate") return stage_evaluate(ctx);

    std::vector<VideoRecord> records = ingest(ctx.data_root);
    if (name == "ingest") {
        fprintf(stderr, "ingested %zu videos\n", records.size());
        return;
    }
    if (records.empty()) throw IngestError("no videos under " + ctx.data_root.string());
    if (name == "flow") return stage_flow(ctx, records);
    if (name == "egomotion") return stage_egomotion(ctx, records);
    if (name == "saliency") return stage_saliency(ctx, records);
    if (name == "train") return stage_train(ctx, records);
    if (name == "score") return stage_score(ctx, records);
    throw std::invalid_argument("unknown stage: " + name);
}

}  // namespace vsal
