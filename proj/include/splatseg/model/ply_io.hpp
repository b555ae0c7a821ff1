#pragma once

#include "splatseg/model/gaussian.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace splatseg {

/// Reads a 3D-GS scene PLY (binary little-endian or ASCII). Stored opacity is a
/// logit and stored scale a logarithm; both are activated on load and the
/// quaternion (rot_0 = w) is renormalized.
///
/// Throws SchemaError naming a missing property and DataError with the element
/// index for non-finite values.
GaussianCloud load_ply(const std::filesystem::path& path);
GaussianCloud read_ply(std::istream& in, const std::string& source = "stream");

/// Writes binary little-endian float32 properties in the order
/// x y z f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3. Lineage is dropped.
void save_ply(const GaussianCloud& cloud, const std::filesystem::path& path);
void write_ply(const GaussianCloud& cloud, std::ostream& out);
std::string ply_bytes(const GaussianCloud& cloud);

} // namespace splatseg
