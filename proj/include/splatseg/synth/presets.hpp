#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace splatseg {

enum class Shape { box, sphere };

/// One object of a synthetic scene. Boxes are axis aligned with full extents
/// `size`; spheres use size.x() as the radius. World up is +z.
struct ObjectConfig {
    int label = 1;
    Shape shape = Shape::box;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d size = Eigen::Vector3d::Ones();
    int count = 1000;
    Eigen::Vector3d color = Eigen::Vector3d::Constant(0.5);
    double color_jitter = 0.05;
    double opacity_min = 0.85;
    double opacity_max = 0.99;
    /// Largest ratio between the two tangent standard deviations.
    double aspect = 2.5;
    /// Tangent standard deviation as a multiple of the mean sample spacing.
    double coverage = 0.8;
    /// Standard deviation along the surface normal.
    double thickness = 0.01;
    /// Box faces that are not sampled, e.g. "-z" for a face resting on a support.
    std::vector<std::string> omit_faces;
    /// Labels of objects whose footprint is cut out of this box's top face.
    std::vector<int> cutouts;
    /// Side-face band above the base covered by vertically elongated Gaussians that
    /// reach below the base into whatever supports the object. Zero disables it.
    double contact_band = 0.0;
    /// Vertical standard deviation of the band Gaussians.
    double contact_sigma = 0.0;
    /// Fraction of the object's Gaussians spent on the band.
    double contact_fraction = 0.0;
};

struct RingConfig {
    int count = 24;
    double radius = 6.0;
    double elevation_deg = 30.0;
    /// Per-camera uniform jitter of the elevation, drawn from the scene seed.
    double elevation_jitter_deg = 0.0;
    double azimuth_offset_deg = 0.0;
    Eigen::Vector3d target = Eigen::Vector3d::Zero();
    int width = 128;
    int height = 128;
    double focal = 160.0;
};

struct SceneConfig {
    std::string name;
    RingConfig ring;
    std::vector<ObjectConfig> objects;
    /// Object segmented by preset runs.
    int target_label = 1;

    /// Throws ParameterError for zero-count objects, duplicate or non-positive
    /// labels, an unknown target label or a degenerate camera ring.
    void validate() const;
};

/// Names of the built-in presets.
std::vector<std::string> preset_names();

/// Built-in preset, optionally overridden by the table of the same name in
/// `overrides` (a TOML file). Top-level keys of the override replace the
/// preset's; `objects` is replaced as a whole. Throws ParameterError for an
/// unknown name.
SceneConfig load_preset(std::string_view name, const std::filesystem::path& overrides = {});

/// Parses every top-level table of a TOML document as a scene configuration.
std::vector<SceneConfig> parse_scene_configs(std::string_view toml_text);

} // namespace splatseg
