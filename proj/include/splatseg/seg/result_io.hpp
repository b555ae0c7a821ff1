#pragma once

#include "splatseg/seg/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace splatseg {

/// {params, object_id[], confidence[], active[], decompositions[]}.
nlohmann::json result_to_json(const SegmentationResult& result);

/// Inverse of result_to_json. Throws SchemaError on missing or mistyped fields.
SegmentationResult result_from_json(const nlohmann::json& doc);

nlohmann::json params_to_json(const SegmentParams& params);

/// Pretty-printed JSON text with a trailing newline.
std::string format_result(const SegmentationResult& result);

void save_result(const SegmentationResult& result, const std::filesystem::path& path);

} // namespace splatseg
