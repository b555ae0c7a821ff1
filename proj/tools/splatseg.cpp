#include "splatseg/camera/camera_io.hpp"
#include "splatseg/common/errors.hpp"
#include "splatseg/common/png_io.hpp"
#include "splatseg/model/ply_io.hpp"
#include "splatseg/prompt/mask_provider.hpp"
#include "splatseg/render/rasterizer.hpp"
#include "splatseg/seg/pipeline.hpp"
#include "splatseg/seg/result_io.hpp"
#include "splatseg/service/service.hpp"
#include "splatseg/synth/evaluation.hpp"
#include "splatseg/synth/presets.hpp"
#include "splatseg/synth/scene_generator.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace splatseg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitPipeline = 3;

/// Flag combinations that cannot be acted on.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct ParamFlags {
    double tau = kDefaultTau;
    double epsilon = kDefaultEpsilon;
    std::string gd = "on";
    double views_percent = 100.0;
    int generation_cap = 2;
    double min_axis_px = 1.0;
    bool multi = false;
    bool global_n = false;
    bool discard_cut = false;
    bool no_occlusion_test = false;
    unsigned threads = 1;

    SegmentParams params() const {
        SegmentParams p;
        p.tau = tau;
        p.epsilon = epsilon;
        p.gd = parse_gd_mode(gd);
        p.views_percent = views_percent;
        p.generation_cap = generation_cap;
        p.min_axis_px = min_axis_px;
        p.multi = multi;
        p.global_n = global_n;
        p.discard_cut = discard_cut;
        p.occlusion_test = !no_occlusion_test;
        p.threads = threads;
        p.validate();
        return p;
    }
};

void add_param_flags(CLI::App* app, ParamFlags& f) {
    app->add_option("--tau", f.tau, "Voting threshold in (0, 1)")->capture_default_str();
    app->add_option("--epsilon", f.epsilon, "Click-to-center matching radius in pixels")->capture_default_str();
    app->add_option("--gd", f.gd, "Boundary Gaussian handling")
        ->check(CLI::IsMember({"on", "off", "delete"}))
        ->capture_default_str();
    app->add_option("--views-percent", f.views_percent, "Percentage of views used (evenly spaced)")
        ->capture_default_str();
    app->add_option("--generation-cap", f.generation_cap, "Maximum decomposition depth")->capture_default_str();
    app->add_option("--min-axis-px", f.min_axis_px, "Shortest projected long axis that is split")
        ->capture_default_str();
    app->add_flag("--multi", f.multi, "Multi-object mode: label masks and mode voting");
    app->add_flag("--global-n", f.global_n, "Divide confidence by the number of processed views");
    app->add_flag("--discard-cut", f.discard_cut, "Deactivate the out-of-mask child of a split");
    app->add_flag("--no-occlusion-test", f.no_occlusion_test, "Keep projected prompts behind geometry");
    app->add_option("--threads", f.threads, "Worker threads, 0 = one per core")->capture_default_str();
}

struct SceneFlags {
    std::string scene;
    std::string cameras;
    std::string preset;
    std::string preset_config;
    std::uint64_t seed = 7;
};

void add_scene_flags(CLI::App* app, SceneFlags& f) {
    app->add_option("--scene", f.scene, "Scene PLY");
    app->add_option("--cameras", f.cameras, "Camera list (JSON lines)");
    app->add_option("--preset", f.preset, "Synthetic preset instead of --scene")
        ->check(CLI::IsMember(preset_names()));
    app->add_option("--preset-config", f.preset_config, "TOML overrides for the preset");
    app->add_option("--seed", f.seed, "Seed of the synthetic preset")->capture_default_str();
}

struct LoadedScene {
    GaussianCloud cloud;
    std::vector<Camera> cameras;
    std::optional<SynthScene> synth;
};

LoadedScene load_scene(const SceneFlags& f) {
    LoadedScene s;
    if (!f.preset.empty()) {
        if (!f.scene.empty()) {
            throw ConfigError("--scene and --preset are mutually exclusive");
        }
        s.synth = gen_scene(load_preset(f.preset, f.preset_config), f.seed);
        s.cloud = s.synth->cloud;
        s.cameras = s.synth->cameras;
        return s;
    }
    if (f.scene.empty()) {
        throw ConfigError("--scene is required (or --preset for a synthetic scene)");
    }
    if (f.cameras.empty()) {
        throw ConfigError("--cameras is required with --scene");
    }
    s.cloud = load_ply(f.scene);
    s.cameras = load_cameras(f.cameras);
    if (s.cameras.empty()) {
        throw ConfigError("--cameras: no cameras in " + f.cameras);
    }
    return s;
}

std::vector<PromptPoint> parse_points(const std::string& text, Polarity polarity, const char* flag) {
    std::vector<PromptPoint> points;
    std::stringstream items(text);
    std::string item;
    while (std::getline(items, item, ';')) {
        if (item.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        std::stringstream coords(item);
        double x = 0.0;
        double y = 0.0;
        char comma = 0;
        if (!(coords >> x >> comma >> y) || comma != ',' || !(coords >> std::ws).eof()) {
            throw ConfigError(std::string(flag) + ": expected \"x,y;x,y;...\", got '" + item + "'");
        }
        points.push_back({Eigen::Vector2d(x, y), polarity});
    }
    return points;
}

std::size_t camera_index(const std::vector<Camera>& cams, int id) {
    const auto it = std::find_if(cams.begin(), cams.end(), [&](const Camera& c) { return c.id == id; });
    if (it == cams.end()) {
        throw ConfigError("--view0: no camera with id " + std::to_string(id));
    }
    return static_cast<std::size_t>(it - cams.begin());
}

/// Per-view masks of the segmentation: 0/255 for binary runs, labels for multi.
Image<std::uint8_t> result_mask(const SegmentRun& run, const Camera& cam) {
    const SegmentationResult& r = run.result;
    if (!r.params.multi) {
        return mask_to_gray(render_object_mask(run.state.cloud, r.members(1), cam));
    }
    const RenderOutput out = render_with_labels(run.state.cloud, indices_where(r.active), r.object_ids, cam);
    Image<std::uint8_t> labels(cam.width, cam.height);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels.pixels()[i] = static_cast<std::uint8_t>(std::min<int>(out.id_map->pixels()[i], 255));
    }
    return labels;
}

std::vector<std::size_t> labelled(const SegmentationResult& r) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < r.object_ids.size(); ++i) {
        if (r.active[i] != 0 && r.object_ids[i] != 0) {
            out.push_back(i);
        }
    }
    return out;
}

void write_outputs(const SegmentRun& run, const std::vector<Camera>& cams, const fs::path& out) {
    fs::create_directories(out / "masks");
    save_result(run.result, out / "result.json");
    save_ply(run.state.cloud.subset(labelled(run.result)), out / "segmented.ply");
    if (run.result.params.multi) {
        for (int k = 1; k <= run.result.num_objects; ++k) {
            save_ply(run.state.cloud.subset(run.result.members(k)), out / ("object_" + std::to_string(k) + ".ply"));
        }
    }
    for (const auto& cam : cams) {
        write_file(out / "masks" / ("mask_" + std::to_string(cam.id) + ".png"), encode_png(result_mask(run, cam)));
    }
}

json preset_summary(const SynthScene& scene, const SegmentRun& run, const RunMetrics& metrics) {
    return {{"preset", scene.config.name},
            {"seed", scene.seed},
            {"target", scene.config.target_label},
            {"gaussians", scene.cloud.size()},
            {"views", scene.cameras.size()},
            {"members", run.result.members(1).size()},
            {"decompositions", run.result.decompositions.size()},
            {"params", params_to_json(run.result.params)},
            {"mean", metrics_to_json(metrics.mean)}};
}

// segment ------------------------------------------------------------------

struct SegmentFlags {
    SceneFlags scene;
    ParamFlags params;
    std::optional<int> view0;
    std::string points;
    std::string bg_points;
    std::string masks;
    std::string provider;
    bool no_prompts = false;
    int band = kDefaultBand;
    std::string out = "splatseg_out";
    bool verbose = false;
};

int run_segment(const SegmentFlags& f) {
    const SegmentParams params = f.params.params();
    const LoadedScene scene = load_scene(f.scene);

    std::vector<PromptPoint> points = parse_points(f.points, Polarity::foreground, "--points");
    const auto background = parse_points(f.bg_points, Polarity::background, "--bg-points");
    points.insert(points.end(), background.begin(), background.end());
    const int view0 = f.view0.value_or(scene.cameras.front().id);
    const std::size_t view0_index = camera_index(scene.cameras, view0);

    std::shared_ptr<MaskProvider> provider;
    if (!f.masks.empty()) {
        if (!fs::is_directory(f.masks)) {
            throw ConfigError("--masks: not a directory: " + f.masks);
        }
        provider = std::make_shared<FileProvider>(f.masks, !params.multi);
    } else if (scene.synth) {
        provider = make_oracle_provider(*scene.synth, !params.multi);
    } else if (!f.provider.empty()) {
        if (points.empty()) {
            throw ConfigError("--points is required with an HTTP mask provider");
        }
        HttpProviderOptions options;
        options.binary = !params.multi;
        auto http = std::make_shared<HttpProvider>(f.provider, options);
        std::string reason;
        if (!http->reachable(&reason)) {
            throw ProviderError(reason);
        }
        provider = http;
    } else {
        throw ConfigError("no mask source: pass --masks or --provider (or set SPLATSEG_PROVIDER_URL)");
    }

    std::optional<PromptInput> prompts;
    if (!points.empty()) {
        prompts = PromptInput{view0, points};
    } else if (scene.synth && f.masks.empty() && !f.no_prompts) {
        prompts = auto_prompt(*scene.synth, view0_index);
    }

    ProgressFn progress;
    if (f.verbose) {
        progress = [](SegmentPhase phase, std::size_t done, std::size_t total) {
            std::cerr << to_string(phase) << " " << done << "/" << total << "\n";
        };
    }
    const SegmentRun run = segment(scene.cloud, scene.cameras, *provider, prompts, params, progress);
    for (const auto& [view, reason] : run.unusable_views) {
        std::cerr << "warning: view " << view << " unusable: " << reason << "\n";
    }

    const fs::path out(f.out);
    write_outputs(run, scene.cameras, out);
    std::cout << "segmented " << labelled(run.result).size() << " of " << run.state.active_count()
              << " active Gaussians using " << run.result.views.size() << " views, "
              << run.result.decompositions.size() << " decompositions\n";

    if (scene.synth) {
        const int target = scene.synth->config.target_label;
        const RunMetrics metrics = evaluate_run(*scene.synth, run.state.cloud, run.result, target, f.band,
                                                params.threads, params.multi ? target : 1);
        write_text_file(out / "summary.json", preset_summary(*scene.synth, run, metrics).dump(2) + "\n");
        write_text_file(out / "metrics.csv", metrics_csv(metrics));
        std::cout << std::fixed << std::setprecision(4) << "mean IoU " << metrics.mean.iou << ", accuracy "
                  << metrics.mean.acc << ", boundary IoU " << metrics.mean.boundary_iou << "\n";
    }
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

// eval ---------------------------------------------------------------------

struct EvalFlags {
    std::string preset;
    std::string preset_config;
    std::uint64_t seed = 7;
    int seeds = 5;
    ParamFlags params;
    bool no_prompts = false;
    int band = kDefaultBand;
    std::string out = "splatseg_eval";
};

int run_eval(const EvalFlags& f) {
    if (f.seeds < 1) {
        throw ConfigError("--seeds must be at least 1");
    }
    PresetRunOptions options;
    options.params = f.params.params();
    options.use_prompts = !f.no_prompts;
    options.band = f.band;
    const SceneConfig config = load_preset(f.preset, f.preset_config);

    json runs = json::array();
    std::ostringstream csv;
    MaskMetrics mean;
    for (int k = 0; k < f.seeds; ++k) {
        const std::uint64_t seed = f.seed + static_cast<std::uint64_t>(k);
        const SynthScene scene = gen_scene(config, seed);
        const PresetOutcome outcome = run_on_scene(scene, options);
        runs.push_back(preset_summary(scene, outcome.run, outcome.metrics));

        std::istringstream rows(metrics_csv(outcome.metrics));
        std::string line;
        bool header = true;
        while (std::getline(rows, line)) {
            if (header) {
                if (k == 0) {
                    csv << "seed," << line << "\n";
                }
                header = false;
                continue;
            }
            csv << seed << "," << line << "\n";
        }
        const MaskMetrics& m = outcome.metrics.mean;
        mean.iou += m.iou / f.seeds;
        mean.acc += m.acc / f.seeds;
        mean.boundary_iou += m.boundary_iou / f.seeds;
        mean.boundary_ap += m.boundary_ap / f.seeds;
        mean.boundary_f1 += m.boundary_f1 / f.seeds;
        mean.band_width = m.band_width;
        mean.ap_single_point = mean.ap_single_point || m.ap_single_point;
        std::cout << std::fixed << std::setprecision(4) << "seed " << seed << ": IoU " << m.iou << ", acc "
                  << m.acc << ", boundary IoU " << m.boundary_iou << ", boundary F1 " << m.boundary_f1 << "\n";
    }
    const json summary{{"preset", config.name},
                       {"seeds", f.seeds},
                       {"first_seed", f.seed},
                       {"params", params_to_json(options.params)},
                       {"prompts", options.use_prompts},
                       {"runs", runs},
                       {"mean", metrics_to_json(mean)}};
    const fs::path out(f.out);
    fs::create_directories(out);
    write_text_file(out / "summary.json", summary.dump(2) + "\n");
    write_text_file(out / "metrics.csv", csv.str());
    std::cout << std::fixed << std::setprecision(4) << "mean IoU " << mean.iou << " over " << f.seeds
              << " seeds; wrote " << out.string() << "\n";
    return 0;
}

// render / gen / convert-colmap ---------------------------------------------

struct RenderFlags {
    SceneFlags scene;
    int view = 0;
    std::string mode = "rgb";
    std::string out;
};

int run_render(const RenderFlags& f) {
    const LoadedScene scene = load_scene(f.scene);
    const auto it = std::find_if(scene.cameras.begin(), scene.cameras.end(),
                                 [&](const Camera& c) { return c.id == f.view; });
    if (it == scene.cameras.end()) {
        throw ConfigError("--view: no camera with id " + std::to_string(f.view));
    }
    const RenderMode mode = parse_render_mode(f.mode);
    write_file(f.out, encode_render(render(scene.cloud, *it), mode));
    return 0;
}

struct GenFlags {
    SceneFlags scene;
    std::string out = "splatseg_scene";
};

int run_gen(const GenFlags& f) {
    if (f.scene.preset.empty()) {
        throw ConfigError("--preset is required");
    }
    const LoadedScene scene = load_scene(f.scene);
    const SynthScene& synth = *scene.synth;
    const fs::path out(f.out);
    fs::create_directories(out / "masks");
    fs::create_directories(out / "labels");
    save_ply(synth.cloud, out / "scene.ply");
    save_cameras(synth.cameras, out / "cameras.jsonl");
    const auto target = static_cast<std::uint16_t>(synth.config.target_label);
    for (std::size_t v = 0; v < synth.cameras.size(); ++v) {
        const std::string name = "mask_" + std::to_string(synth.cameras[v].id) + ".png";
        write_file(out / "masks" / name, encode_png(mask_to_gray(select_label(synth.gt_masks[v], target))));
        Image<std::uint8_t> labels(synth.gt_masks[v].width(), synth.gt_masks[v].height());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            labels.pixels()[i] = static_cast<std::uint8_t>(std::min<int>(synth.gt_masks[v].pixels()[i], 255));
        }
        write_file(out / "labels" / name, encode_png(labels));
    }
    const json gt{{"preset", synth.config.name},
                  {"seed", synth.seed},
                  {"target", synth.config.target_label},
                  {"labels", synth.gt_labels}};
    write_text_file(out / "ground_truth.json", gt.dump() + "\n");
    std::cout << "wrote " << synth.cloud.size() << " Gaussians and " << synth.cameras.size() << " views to "
              << out.string() << "\n";
    return 0;
}

struct ColmapFlags {
    std::string cameras_txt;
    std::string images_txt;
    std::string out;
};

int run_convert_colmap(const ColmapFlags& f) {
    const auto cams = convert_colmap_text(f.cameras_txt, f.images_txt);
    save_cameras(cams, f.out);
    std::cout << "wrote " << cams.size() << " cameras to " << f.out << "\n";
    return 0;
}

// serve --------------------------------------------------------------------

struct ServeFlags {
    SceneFlags scene;
    ParamFlags params;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string provider;
    std::string masks;
    unsigned workers = 0;
    bool rotate_sh = false;
};

int run_serve(const ServeFlags& f) {
    LoadedScene scene = load_scene(f.scene);
    std::vector<std::pair<std::string, std::shared_ptr<MaskProvider>>> providers;
    if (scene.synth) {
        providers.emplace_back("oracle", make_oracle_provider(*scene.synth, true));
        providers.emplace_back("oracle-multi", make_oracle_provider(*scene.synth, false));
    }
    if (!f.masks.empty()) {
        providers.emplace_back("files", std::make_shared<FileProvider>(f.masks, true));
    }
    if (!f.provider.empty()) {
        providers.emplace_back("http", std::make_shared<HttpProvider>(f.provider));
    }

    ServiceOptions options;
    options.defaults = f.params.params();
    options.workers = f.workers;
    options.rotate_sh = f.rotate_sh;
    if (!f.provider.empty()) {
        options.default_provider = "http";
    } else if (!f.masks.empty()) {
        options.default_provider = "files";
    } else if (scene.synth) {
        options.default_provider = "oracle";
    } else {
        std::cerr << "warning: no mask provider configured; /segment requests must name a provider URL\n";
    }
    SegmentationService service(std::move(scene.cloud), std::move(scene.cameras), options);
    for (auto& [name, provider] : providers) {
        service.add_provider(name, provider);
    }
    HttpServer server(service);
    const int port = server.bind(f.host, f.port);
    std::cout << "listening on http://" << f.host << ":" << port << std::endl;
    server.listen();
    return 0;
}

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"Interactive segmentation of 3D Gaussian splatting scenes"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML file with one table per command, e.g. [segment] tau = 0.65");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.fallthrough();

    SegmentFlags seg;
    auto* segment_cmd = app.add_subcommand("segment", "Segment an object and write result, PLY and masks");
    add_scene_flags(segment_cmd, seg.scene);
    add_param_flags(segment_cmd, seg.params);
    segment_cmd->add_option("--view0", seg.view0, "Camera id the points refer to (default: first camera)");
    segment_cmd->add_option("--points", seg.points, "Foreground clicks \"x,y;x,y;...\" in view0 pixels");
    segment_cmd->add_option("--bg-points", seg.bg_points, "Background clicks \"x,y;...\" in view0 pixels");
    segment_cmd->add_option("--masks", seg.masks, "Directory of mask_{view}.png files");
    segment_cmd->add_option("--provider", seg.provider, "Mask provider URL")->envname("SPLATSEG_PROVIDER_URL");
    segment_cmd->add_flag("--no-prompts", seg.no_prompts, "Preset runs: request masks without clicks");
    segment_cmd->add_option("--band", seg.band, "Boundary band width in pixels (presets)")->capture_default_str();
    segment_cmd->add_option("--out", seg.out, "Output directory")->capture_default_str();
    segment_cmd->add_flag("--verbose", seg.verbose, "Report progress on standard error");

    EvalFlags ev;
    auto* eval_cmd = app.add_subcommand("eval", "Run a preset over several seeds and report metrics");
    eval_cmd->add_option("--preset", ev.preset, "Synthetic preset")->required()->check(CLI::IsMember(preset_names()));
    eval_cmd->add_option("--preset-config", ev.preset_config, "TOML overrides for the preset");
    eval_cmd->add_option("--seed", ev.seed, "First seed")->capture_default_str();
    eval_cmd->add_option("--seeds", ev.seeds, "Number of seeds")->capture_default_str();
    add_param_flags(eval_cmd, ev.params);
    eval_cmd->add_flag("--no-prompts", ev.no_prompts, "Request masks without clicks");
    eval_cmd->add_option("--band", ev.band, "Boundary band width in pixels")->capture_default_str();
    eval_cmd->add_option("--out", ev.out, "Output directory")->capture_default_str();

    RenderFlags rf;
    auto* render_cmd = app.add_subcommand("render", "Render one view to PNG");
    add_scene_flags(render_cmd, rf.scene);
    render_cmd->add_option("--view", rf.view, "Camera id")->required();
    render_cmd->add_option("--mode", rf.mode, "rgb, depth or alpha")
        ->check(CLI::IsMember({"rgb", "depth", "alpha"}))
        ->capture_default_str();
    render_cmd->add_option("--out", rf.out, "Output PNG")->required();

    GenFlags gf;
    auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic preset as PLY, cameras and masks");
    add_scene_flags(gen_cmd, gf.scene);
    gen_cmd->add_option("--out", gf.out, "Output directory")->capture_default_str();

    ColmapFlags cf;
    auto* colmap_cmd = app.add_subcommand("convert-colmap", "Convert a COLMAP text model to a camera list");
    colmap_cmd->add_option("--cameras-txt", cf.cameras_txt, "COLMAP cameras.txt")->required();
    colmap_cmd->add_option("--images-txt", cf.images_txt, "COLMAP images.txt")->required();
    colmap_cmd->add_option("--out", cf.out, "Output camera list (JSON lines)")->required();

    ServeFlags sf;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    add_scene_flags(serve_cmd, sf.scene);
    add_param_flags(serve_cmd, sf.params);
    serve_cmd->add_option("--host", sf.host, "Bind address")->capture_default_str();
    serve_cmd->add_option("--port", sf.port, "Port, 0 = any free port")->capture_default_str();
    serve_cmd->add_option("--provider", sf.provider, "Mask provider URL")->envname("SPLATSEG_PROVIDER_URL");
    serve_cmd->add_option("--masks", sf.masks, "Directory of mask_{view}.png files");
    serve_cmd->add_option("--workers", sf.workers, "Segmentation workers, 0 = one per core")->capture_default_str();
    serve_cmd->add_flag("--rotate-sh", sf.rotate_sh, "Rotate higher-degree SH coefficients in rotate edits");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*segment_cmd) {
            return run_segment(seg);
        }
        if (*eval_cmd) {
            return run_eval(ev);
        }
        if (*render_cmd) {
            return run_render(rf);
        }
        if (*gen_cmd) {
            return run_gen(gf);
        }
        if (*colmap_cmd) {
            return run_convert_colmap(cf);
        }
        if (*serve_cmd) {
            return run_serve(sf);
        }
    } catch (const PipelineError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPipeline;
    } catch (const ProviderError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPipeline;
    } catch (const NotVisibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPipeline;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPipeline;
    }
    return kExitConfig;
}

} // namespace splatseg::cli

int main(int argc, char** argv) { return splatseg::cli::run(argc, argv); }
