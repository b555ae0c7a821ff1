#pragma once

#include "splatseg/camera/camera.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace splatseg {

/// {"id", "width", "height", "fx", "fy", "cx", "cy", "world_to_camera": 16 reals row-major}.
nlohmann::json camera_to_json(const Camera& cam);

/// One camera per line in the camera_to_json layout. Blank lines are skipped.
/// Cameras are validated and returned sorted by id; duplicate ids are rejected.
std::vector<Camera> load_cameras(const std::filesystem::path& path);
std::vector<Camera> parse_cameras(const std::string& jsonl);

void save_cameras(const std::vector<Camera>& cameras, const std::filesystem::path& path);
std::string format_cameras(const std::vector<Camera>& cameras);

/// Converts a COLMAP text model (cameras.txt + images.txt) into cameras ordered by
/// image name, with ids 0..n-1. Only PINHOLE and SIMPLE_PINHOLE intrinsics are
/// accepted.
std::vector<Camera> convert_colmap_text(const std::filesystem::path& cameras_txt,
                                        const std::filesystem::path& images_txt);

} // namespace splatseg
