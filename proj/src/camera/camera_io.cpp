#include "splatseg/camera/camera_io.hpp"

#include "splatseg/common/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace splatseg {
namespace {

using nlohmann::json;

Camera camera_from_json(const json& j, std::size_t line_no) {
    auto field = [&](const char* name) -> const json& {
        if (!j.contains(name)) {
            throw SchemaError("cameras line " + std::to_string(line_no) + ": missing field '" + name + "'");
        }
        return j.at(name);
    };
    try {
        Camera cam;
        cam.id = field("id").get<int>();
        cam.width = field("width").get<int>();
        cam.height = field("height").get<int>();
        cam.fx = field("fx").get<double>();
        cam.fy = field("fy").get<double>();
        cam.cx = field("cx").get<double>();
        cam.cy = field("cy").get<double>();
        const auto values = field("world_to_camera").get<std::vector<double>>();
        if (values.size() != 16) {
            throw SchemaError("cameras line " + std::to_string(line_no) + ": world_to_camera needs 16 values");
        }
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                cam.world_to_camera(r, c) = values[static_cast<std::size_t>(4 * r + c)];
            }
        }
        return cam;
    } catch (const json::exception& e) {
        throw SchemaError("cameras line " + std::to_string(line_no) + ": " + e.what());
    }
}

} // namespace

json camera_to_json(const Camera& cam) {
    std::vector<double> values;
    values.reserve(16);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            values.push_back(cam.world_to_camera(r, c));
        }
    }
    return json{{"id", cam.id}, {"width", cam.width}, {"height", cam.height}, {"fx", cam.fx},
                {"fy", cam.fy}, {"cx", cam.cx},       {"cy", cam.cy},         {"world_to_camera", values}};
}

namespace {

std::vector<std::string> data_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(line);
    }
    return lines;
}

} // namespace

std::vector<Camera> parse_cameras(const std::string& jsonl) {
    std::vector<Camera> cameras;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError("cameras line " + std::to_string(line_no) + ": " + e.what());
        }
        Camera cam = camera_from_json(j, line_no);
        cam.validate();
        cameras.push_back(cam);
    }
    std::sort(cameras.begin(), cameras.end(), [](const Camera& a, const Camera& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < cameras.size(); ++i) {
        if (cameras[i].id == cameras[i - 1].id) {
            throw SchemaError("cameras: duplicate id " + std::to_string(cameras[i].id));
        }
    }
    return cameras;
}

std::vector<Camera> load_cameras(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_cameras(buffer.str());
}

std::string format_cameras(const std::vector<Camera>& cameras) {
    std::string out;
    for (const auto& cam : cameras) {
        out += camera_to_json(cam).dump();
        out += '\n';
    }
    return out;
}

void save_cameras(const std::vector<Camera>& cameras, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << format_cameras(cameras);
}

std::vector<Camera> convert_colmap_text(const std::filesystem::path& cameras_txt,
                                        const std::filesystem::path& images_txt) {
    struct Intrinsics {
        int width, height;
        double fx, fy, cx, cy;
    };
    std::map<int, Intrinsics> intrinsics;
    for (const auto& line : data_lines(cameras_txt)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::istringstream ls(line);
        int id = 0;
        std::string model;
        Intrinsics in{};
        ls >> id >> model >> in.width >> in.height;
        if (model == "PINHOLE") {
            ls >> in.fx >> in.fy >> in.cx >> in.cy;
        } else if (model == "SIMPLE_PINHOLE") {
            ls >> in.fx >> in.cx >> in.cy;
            in.fy = in.fx;
        } else {
            throw SchemaError("colmap: camera model '" + model + "' is not supported (pinhole only)");
        }
        if (!ls) {
            throw SchemaError("colmap: malformed camera line: " + line);
        }
        intrinsics[id] = in;
    }

    struct Entry {
        std::string name;
        Camera cam;
    };
    std::vector<Entry> entries;
    const auto lines = data_lines(images_txt);
    bool expect_points = false;
    for (const auto& line : lines) {
        if (!line.empty() && line[0] == '#') {
            continue;
        }
        if (expect_points) {
            expect_points = false;
            continue;
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        std::istringstream ls(line);
        int image_id = 0;
        int camera_id = 0;
        double qw, qx, qy, qz, tx, ty, tz;
        std::string name;
        ls >> image_id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> camera_id >> name;
        if (!ls) {
            throw SchemaError("colmap: malformed image line: " + line);
        }
        const auto it = intrinsics.find(camera_id);
        if (it == intrinsics.end()) {
            throw SchemaError("colmap: image '" + name + "' references unknown camera " + std::to_string(camera_id));
        }
        Camera cam;
        cam.width = it->second.width;
        cam.height = it->second.height;
        cam.fx = it->second.fx;
        cam.fy = it->second.fy;
        cam.cx = it->second.cx;
        cam.cy = it->second.cy;
        cam.world_to_camera.setIdentity();
        cam.world_to_camera.topLeftCorner<3, 3>() = Eigen::Quaterniond(qw, qx, qy, qz).normalized().toRotationMatrix();
        cam.world_to_camera.topRightCorner<3, 1>() = Eigen::Vector3d(tx, ty, tz);
        entries.push_back({name, cam});
        expect_points = true;
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.name < b.name; });
    std::vector<Camera> cameras;
    cameras.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        entries[i].cam.id = static_cast<int>(i);
        entries[i].cam.validate();
        cameras.push_back(entries[i].cam);
    }
    return cameras;
}

} // namespace splatseg
