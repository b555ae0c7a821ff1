#include "splatseg/seg/result_io.hpp"

#include "splatseg/common/errors.hpp"
#include "splatseg/common/png_io.hpp"

namespace splatseg {

using nlohmann::json;

json params_to_json(const SegmentParams& params) {
    return {
        {"tau", params.tau},
        {"epsilon", params.epsilon},
        {"gd", std::string(to_string(params.gd))},
        {"generation_cap", params.generation_cap},
        {"lambda_min", kLambdaMin},
        {"min_axis_px", params.min_axis_px},
        {"discard_cut", params.discard_cut},
        {"global_n", params.global_n},
        {"views_percent", params.views_percent},
        {"occlusion_test", params.occlusion_test},
        {"multi", params.multi},
    };
}

json result_to_json(const SegmentationResult& result) {
    json params = params_to_json(result.params);
    params["num_objects"] = result.num_objects;
    params["views"] = result.views;
    params["provider"] = result.provider;

    json records = json::array();
    for (const auto& r : result.decompositions) {
        records.push_back({
            {"parent", r.parent},
            {"kept", r.kept},
            {"discarded", r.discarded},
            {"view", r.view},
            {"lambda", r.lambda},
            {"axis_dir", {r.axis_dir.x(), r.axis_dir.y(), r.axis_dir.z()}},
            {"generation", r.generation},
        });
    }
    json active = json::array();
    for (const auto a : result.active) {
        active.push_back(a != 0);
    }
    return {
        {"params", params},
        {"object_id", result.object_ids},
        {"confidence", result.confidence},
        {"active", active},
        {"decompositions", records},
    };
}

SegmentationResult result_from_json(const json& doc) {
    try {
        SegmentationResult result;
        const json& params = doc.at("params");
        result.params.tau = params.at("tau").get<double>();
        result.params.epsilon = params.at("epsilon").get<double>();
        result.params.gd = parse_gd_mode(params.at("gd").get<std::string>());
        result.params.generation_cap = params.at("generation_cap").get<int>();
        result.params.min_axis_px = params.at("min_axis_px").get<double>();
        result.params.discard_cut = params.at("discard_cut").get<bool>();
        result.params.global_n = params.at("global_n").get<bool>();
        result.params.views_percent = params.at("views_percent").get<double>();
        result.params.occlusion_test = params.at("occlusion_test").get<bool>();
        result.params.multi = params.at("multi").get<bool>();
        result.num_objects = params.at("num_objects").get<int>();
        result.views = params.at("views").get<std::vector<int>>();
        result.provider = params.at("provider").get<std::string>();
        result.object_ids = doc.at("object_id").get<std::vector<int>>();
        result.confidence = doc.at("confidence").get<std::vector<double>>();
        for (const auto& a : doc.at("active")) {
            result.active.push_back(a.get<bool>() ? 1 : 0);
        }
        for (const auto& r : doc.at("decompositions")) {
            DecompositionRecord rec;
            rec.parent = r.at("parent").get<std::size_t>();
            rec.kept = r.at("kept").get<std::size_t>();
            rec.discarded = r.at("discarded").get<std::size_t>();
            rec.view = r.at("view").get<int>();
            rec.lambda = r.at("lambda").get<double>();
            const auto dir = r.at("axis_dir").get<std::vector<double>>();
            if (dir.size() != 3) {
                throw SchemaError("result: axis_dir must have 3 components");
            }
            rec.axis_dir = Eigen::Vector3d(dir[0], dir[1], dir[2]);
            rec.generation = r.at("generation").get<int>();
            result.decompositions.push_back(rec);
        }
        if (result.confidence.size() != result.object_ids.size() || result.active.size() != result.object_ids.size()) {
            throw SchemaError("result: per-gaussian arrays differ in length");
        }
        return result;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("result: ") + e.what());
    }
}

std::string format_result(const SegmentationResult& result) {
    return result_to_json(result).dump(2) + "\n";
}

void save_result(const SegmentationResult& result, const std::filesystem::path& path) {
    write_text_file(path, format_result(result));
}

} // namespace splatseg
