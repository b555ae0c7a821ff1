#include "splatseg/synth/presets.hpp"

#include "splatseg/common/errors.hpp"

#include <toml.hpp>

#include <set>
#include <sstream>

namespace splatseg {
namespace {

constexpr std::string_view kBuiltinPresets = R"toml(
[two_boxes_touching]
target_label = 1

[two_boxes_touching.ring]
count = 24
radius = 6.0
elevation_deg = 32.0
target = [0.0, 0.0, 0.8]
width = 128
height = 128
focal = 190.0

[[two_boxes_touching.objects]]
label = 1
shape = "box"
center = [0.0, 0.0, 1.1]
size = [1.0, 1.0, 1.0]
count = 2000
color = [0.85, 0.3, 0.2]
omit_faces = ["-z"]
contact_band = 0.3
contact_sigma = 0.12
contact_fraction = 0.25

[[two_boxes_touching.objects]]
label = 2
shape = "box"
center = [0.0, 0.0, 0.3]
size = [3.0, 3.0, 0.6]
count = 2000
color = [0.3, 0.45, 0.8]
omit_faces = ["-z"]
cutouts = [1]

[sphere_on_plane]
target_label = 1

[sphere_on_plane.ring]
count = 24
radius = 5.0
elevation_deg = 30.0
target = [0.0, 0.0, 0.4]
width = 128
height = 128
focal = 170.0

[[sphere_on_plane.objects]]
label = 1
shape = "sphere"
center = [0.0, 0.0, 0.6]
size = [0.6, 0.6, 0.6]
count = 2000
color = [0.9, 0.75, 0.2]

[[sphere_on_plane.objects]]
label = 2
shape = "box"
center = [0.0, 0.0, -0.02]
size = [3.0, 3.0, 0.04]
count = 2000
color = [0.35, 0.7, 0.4]
omit_faces = ["-z"]
cutouts = [1]

[ring_occlusion]
target_label = 1

[ring_occlusion.ring]
count = 24
radius = 6.0
elevation_deg = 15.0
azimuth_offset_deg = 10.0
target = [0.0, 0.0, 0.6]
width = 128
height = 128
focal = 160.0

[[ring_occlusion.objects]]
label = 1
shape = "sphere"
center = [0.0, 0.0, 0.6]
size = [0.55, 0.55, 0.55]
count = 1500
color = [0.8, 0.2, 0.6]

[[ring_occlusion.objects]]
label = 2
shape = "box"
center = [1.3, 0.0, 0.8]
size = [0.3, 0.3, 1.6]
count = 400
color = [0.6, 0.6, 0.6]
omit_faces = ["-z"]

[[ring_occlusion.objects]]
label = 3
shape = "box"
center = [-1.3, 0.0, 0.8]
size = [0.3, 0.3, 1.6]
count = 400
color = [0.55, 0.6, 0.5]
omit_faces = ["-z"]

[[ring_occlusion.objects]]
label = 4
shape = "box"
center = [0.0, 1.3, 0.8]
size = [0.3, 0.3, 1.6]
count = 400
color = [0.5, 0.55, 0.65]
omit_faces = ["-z"]

[[ring_occlusion.objects]]
label = 5
shape = "box"
center = [0.0, -1.3, 0.8]
size = [0.3, 0.3, 1.6]
count = 400
color = [0.65, 0.5, 0.5]
omit_faces = ["-z"]

[[ring_occlusion.objects]]
label = 6
shape = "box"
center = [0.0, 0.0, -0.02]
size = [3.4, 3.4, 0.04]
count = 1500
color = [0.35, 0.45, 0.35]
omit_faces = ["-z"]
cutouts = [1, 2, 3, 4, 5]
)toml";

Eigen::Vector3d vec3(const toml::node& node, std::string_view key) {
    const auto* arr = node.as_array();
    if (arr == nullptr || arr->size() != 3) {
        throw ParameterError("scene config: '" + std::string(key) + "' must be an array of 3 numbers");
    }
    Eigen::Vector3d v;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto value = (*arr)[i].value<double>();
        if (!value) {
            throw ParameterError("scene config: '" + std::string(key) + "' must contain numbers");
        }
        v[static_cast<Eigen::Index>(i)] = *value;
    }
    return v;
}

template <class T>
void read(const toml::table& table, std::string_view key, T& out) {
    const toml::node* node = table.get(key);
    if (node == nullptr) {
        return;
    }
    if constexpr (std::is_same_v<T, Eigen::Vector3d>) {
        out = vec3(*node, key);
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
        const auto* arr = node->as_array();
        if (arr == nullptr) {
            throw ParameterError("scene config: '" + std::string(key) + "' must be an array of strings");
        }
        out.clear();
        for (const auto& item : *arr) {
            const auto s = item.value<std::string>();
            if (!s) {
                throw ParameterError("scene config: '" + std::string(key) + "' must be an array of strings");
            }
            out.push_back(*s);
        }
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
        const auto* arr = node->as_array();
        if (arr == nullptr) {
            throw ParameterError("scene config: '" + std::string(key) + "' must be an array of integers");
        }
        out.clear();
        for (const auto& item : *arr) {
            const auto v = item.value<std::int64_t>();
            if (!v) {
                throw ParameterError("scene config: '" + std::string(key) + "' must be an array of integers");
            }
            out.push_back(static_cast<int>(*v));
        }
    } else if constexpr (std::is_same_v<T, int>) {
        const auto v = node->value<std::int64_t>();
        if (!v) {
            throw ParameterError("scene config: '" + std::string(key) + "' must be an integer");
        }
        out = static_cast<int>(*v);
    } else if constexpr (std::is_same_v<T, double>) {
        const auto v = node->value<double>();
        if (!v) {
            throw ParameterError("scene config: '" + std::string(key) + "' must be a number");
        }
        out = *v;
    }
}

ObjectConfig parse_object(const toml::table& t) {
    ObjectConfig o;
    read(t, "label", o.label);
    std::string shape = "box";
    if (const auto s = t["shape"].value<std::string>()) {
        shape = *s;
    }
    if (shape == "box") {
        o.shape = Shape::box;
    } else if (shape == "sphere") {
        o.shape = Shape::sphere;
    } else {
        throw ParameterError("scene config: unknown shape '" + shape + "'");
    }
    read(t, "center", o.center);
    read(t, "size", o.size);
    read(t, "count", o.count);
    read(t, "color", o.color);
    read(t, "color_jitter", o.color_jitter);
    read(t, "opacity_min", o.opacity_min);
    read(t, "opacity_max", o.opacity_max);
    read(t, "aspect", o.aspect);
    read(t, "coverage", o.coverage);
    read(t, "thickness", o.thickness);
    read(t, "omit_faces", o.omit_faces);
    read(t, "cutouts", o.cutouts);
    read(t, "contact_band", o.contact_band);
    read(t, "contact_sigma", o.contact_sigma);
    read(t, "contact_fraction", o.contact_fraction);
    return o;
}

SceneConfig parse_scene(std::string name, const toml::table& t) {
    SceneConfig c;
    c.name = std::move(name);
    read(t, "target_label", c.target_label);
    if (const auto* ring = t["ring"].as_table()) {
        RingConfig& r = c.ring;
        read(*ring, "count", r.count);
        read(*ring, "radius", r.radius);
        read(*ring, "elevation_deg", r.elevation_deg);
        read(*ring, "elevation_jitter_deg", r.elevation_jitter_deg);
        read(*ring, "azimuth_offset_deg", r.azimuth_offset_deg);
        read(*ring, "target", r.target);
        read(*ring, "width", r.width);
        read(*ring, "height", r.height);
        read(*ring, "focal", r.focal);
    }
    if (const auto* objects = t["objects"].as_array()) {
        for (const auto& item : *objects) {
            const auto* table = item.as_table();
            if (table == nullptr) {
                throw ParameterError("scene config: 'objects' entries must be tables");
            }
            c.objects.push_back(parse_object(*table));
        }
    }
    return c;
}

toml::table parse_toml(std::string_view text, std::string_view source) {
    try {
        return toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "scene config: " << e.description() << " (" << e.source().begin << ")";
        throw ParameterError(msg.str());
    }
}

} // namespace

void SceneConfig::validate() const {
    if (objects.empty()) {
        throw ParameterError("scene config '" + name + "': no objects");
    }
    std::set<int> labels;
    for (const auto& o : objects) {
        if (o.count <= 0) {
            throw ParameterError("scene config '" + name + "': object " + std::to_string(o.label) +
                                 " has a zero gaussian count");
        }
        if (o.label <= 0) {
            throw ParameterError("scene config '" + name + "': object labels must be positive");
        }
        if (!labels.insert(o.label).second) {
            throw ParameterError("scene config '" + name + "': duplicate label " + std::to_string(o.label));
        }
        if ((o.size.array() <= 0.0).any()) {
            throw ParameterError("scene config '" + name + "': object sizes must be positive");
        }
        if (!(o.opacity_min > 0.0 && o.opacity_min <= o.opacity_max && o.opacity_max <= 1.0)) {
            throw ParameterError("scene config '" + name + "': opacity range must satisfy 0 < min <= max <= 1");
        }
        if (!(o.contact_fraction >= 0.0 && o.contact_fraction < 1.0)) {
            throw ParameterError("scene config '" + name + "': contact_fraction must lie in [0, 1)");
        }
        if (o.contact_band > 0.0 && !(o.contact_sigma > 0.0)) {
            throw ParameterError("scene config '" + name + "': contact_sigma must be positive with a contact band");
        }
    }
    if (labels.count(target_label) == 0) {
        throw ParameterError("scene config '" + name + "': target label " + std::to_string(target_label) +
                             " is not an object");
    }
    if (ring.count < 2 || ring.width <= 0 || ring.height <= 0 || !(ring.focal > 0.0) || !(ring.radius > 0.0)) {
        throw ParameterError("scene config '" + name + "': camera ring needs >= 2 cameras and positive sizes");
    }
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    const toml::table table = parse_toml(kBuiltinPresets, "presets");
    for (const auto& [key, value] : table) {
        names.emplace_back(key.str());
    }
    return names;
}

std::vector<SceneConfig> parse_scene_configs(std::string_view toml_text) {
    const toml::table table = parse_toml(toml_text, "config");
    std::vector<SceneConfig> out;
    for (const auto& [key, value] : table) {
        if (const auto* t = value.as_table()) {
            out.push_back(parse_scene(std::string(key.str()), *t));
        }
    }
    return out;
}

SceneConfig load_preset(std::string_view name, const std::filesystem::path& overrides) {
    toml::table builtin = parse_toml(kBuiltinPresets, "presets");
    toml::table* base = builtin[name].as_table();
    toml::table merged;
    if (base != nullptr) {
        merged = *base;
    }
    bool found = base != nullptr;
    if (!overrides.empty()) {
        toml::table user;
        try {
            user = toml::parse_file(overrides.string());
        } catch (const toml::parse_error& e) {
            std::ostringstream msg;
            msg << "scene config " << overrides.string() << ": " << e.description() << " (" << e.source().begin
                << ")";
            throw ParameterError(msg.str());
        }
        if (const auto* table = user[name].as_table()) {
            found = true;
            for (const auto& [key, value] : *table) {
                merged.insert_or_assign(key, value);
            }
        }
    }
    if (!found) {
        std::string known;
        for (const auto& n : preset_names()) {
            known += (known.empty() ? "" : ", ") + n;
        }
        throw ParameterError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
    }
    SceneConfig config = parse_scene(std::string(name), merged);
    config.validate();
    return config;
}

} // namespace splatseg
