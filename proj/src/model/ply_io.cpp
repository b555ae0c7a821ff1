#include "splatseg/model/ply_io.hpp"

#include "splatseg/common/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace splatseg {
namespace {

static_assert(std::endian::native == std::endian::little, "PLY codec assumes a little-endian host");

enum class ScalarType { int8, uint8, int16, uint16, int32, uint32, float32, float64 };

struct Property {
    std::string name;
    ScalarType type;
};

std::size_t type_size(ScalarType t) {
    switch (t) {
    case ScalarType::int8:
    case ScalarType::uint8: return 1;
    case ScalarType::int16:
    case ScalarType::uint16: return 2;
    case ScalarType::int32:
    case ScalarType::uint32:
    case ScalarType::float32: return 4;
    case ScalarType::float64: return 8;
    }
    return 0;
}

ScalarType parse_type(const std::string& name) {
    static const std::unordered_map<std::string, ScalarType> types = {
        {"char", ScalarType::int8},     {"int8", ScalarType::int8},       {"uchar", ScalarType::uint8},
        {"uint8", ScalarType::uint8},   {"short", ScalarType::int16},     {"int16", ScalarType::int16},
        {"ushort", ScalarType::uint16}, {"uint16", ScalarType::uint16},   {"int", ScalarType::int32},
        {"int32", ScalarType::int32},   {"uint", ScalarType::uint32},     {"uint32", ScalarType::uint32},
        {"float", ScalarType::float32}, {"float32", ScalarType::float32}, {"double", ScalarType::float64},
        {"float64", ScalarType::float64},
    };
    const auto it = types.find(name);
    if (it == types.end()) {
        throw SchemaError("ply: unsupported property type '" + name + "'");
    }
    return it->second;
}

template <class T>
double load_scalar(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
}

double decode_binary(const char* p, ScalarType t) {
    switch (t) {
    case ScalarType::int8: return load_scalar<std::int8_t>(p);
    case ScalarType::uint8: return load_scalar<std::uint8_t>(p);
    case ScalarType::int16: return load_scalar<std::int16_t>(p);
    case ScalarType::uint16: return load_scalar<std::uint16_t>(p);
    case ScalarType::int32: return load_scalar<std::int32_t>(p);
    case ScalarType::uint32: return load_scalar<std::uint32_t>(p);
    case ScalarType::float32: return load_scalar<float>(p);
    case ScalarType::float64: return load_scalar<double>(p);
    }
    return 0.0;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
    constexpr double eps = 1e-7;
    const double c = std::clamp(p, eps, 1.0 - eps);
    return std::log(c / (1.0 - c));
}

int degree_from_rest_count(std::size_t rest) {
    for (int d = 0; d <= kMaxShDegree; ++d) {
        if (rest == static_cast<std::size_t>(3 * (sh_coefficient_count(d) - 1))) {
            return d;
        }
    }
    throw SchemaError("ply: f_rest property count " + std::to_string(rest) +
                      " does not match an SH degree in [0, 3]");
}

struct Header {
    bool binary = true;
    std::size_t vertex_count = 0;
    std::vector<Property> properties;
};

Header read_header(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
        throw SchemaError("ply: missing magic 'ply'");
    }
    Header header;
    bool in_vertex = false;
    bool seen_vertex = false;
    bool seen_format = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::istringstream ls(line);
        std::string keyword;
        ls >> keyword;
        if (keyword == "end_header") {
            if (!seen_format) {
                throw SchemaError("ply: missing format line");
            }
            if (!seen_vertex) {
                throw SchemaError("ply: missing element 'vertex'");
            }
            return header;
        }
        if (keyword == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") {
                header.binary = true;
            } else if (fmt == "ascii") {
                header.binary = false;
            } else {
                throw SchemaError("ply: unsupported format '" + fmt + "'");
            }
            seen_format = true;
        } else if (keyword == "element") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            in_vertex = name == "vertex";
            if (in_vertex) {
                if (seen_vertex) {
                    throw SchemaError("ply: duplicate element 'vertex'");
                }
                if (!header.properties.empty()) {
                    throw SchemaError("ply: element 'vertex' must be the first element");
                }
                seen_vertex = true;
                header.vertex_count = count;
            }
        } else if (keyword == "property") {
            std::string type;
            ls >> type;
            if (type == "list") {
                if (in_vertex) {
                    throw SchemaError("ply: list properties are not supported on 'vertex'");
                }
                continue;
            }
            std::string name;
            ls >> name;
            if (in_vertex) {
                header.properties.push_back({name, parse_type(type)});
            }
        }
        // comment / obj_info lines are ignored
    }
    throw SchemaError("ply: missing end_header");
}

} // namespace

GaussianCloud read_ply(std::istream& in, const std::string& source) {
    const Header header = read_header(in);

    std::unordered_map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.properties.size(); ++i) {
        column[header.properties[i].name] = i;
    }
    auto require = [&](const std::string& name) {
        const auto it = column.find(name);
        if (it == column.end()) {
            throw SchemaError("ply: missing required property '" + name + "'");
        }
        return it->second;
    };

    const std::size_t px = require("x"), py = require("y"), pz = require("z");
    const std::array<std::size_t, 3> dc = {require("f_dc_0"), require("f_dc_1"), require("f_dc_2")};
    const std::size_t op = require("opacity");
    const std::array<std::size_t, 3> sc = {require("scale_0"), require("scale_1"), require("scale_2")};
    const std::array<std::size_t, 4> rot = {require("rot_0"), require("rot_1"), require("rot_2"), require("rot_3")};

    std::size_t rest_count = 0;
    while (column.count("f_rest_" + std::to_string(rest_count)) != 0) {
        ++rest_count;
    }
    const int degree = degree_from_rest_count(rest_count);
    std::vector<std::size_t> rest(rest_count);
    for (std::size_t i = 0; i < rest_count; ++i) {
        rest[i] = column.at("f_rest_" + std::to_string(i));
    }
    const std::size_t per_channel = rest_count / 3;

    std::vector<std::size_t> offsets(header.properties.size());
    std::size_t stride = 0;
    for (std::size_t i = 0; i < header.properties.size(); ++i) {
        offsets[i] = stride;
        stride += type_size(header.properties[i].type);
    }

    std::vector<Gaussian> gaussians;
    gaussians.reserve(header.vertex_count);
    std::vector<char> record(stride);
    std::vector<double> values(header.properties.size());
    for (std::size_t e = 0; e < header.vertex_count; ++e) {
        if (header.binary) {
            if (!in.read(record.data(), static_cast<std::streamsize>(stride))) {
                throw DataError("ply: truncated data at element " + std::to_string(e));
            }
            for (std::size_t i = 0; i < values.size(); ++i) {
                values[i] = decode_binary(record.data() + offsets[i], header.properties[i].type);
            }
        } else {
            for (auto& v : values) {
                std::string token;
                if (!(in >> token)) {
                    throw DataError("ply: truncated data at element " + std::to_string(e));
                }
                try {
                    v = std::stod(token);
                } catch (const std::exception&) {
                    throw DataError("ply: unparsable value '" + token + "' at element " + std::to_string(e));
                }
            }
        }
        for (const double v : values) {
            if (!std::isfinite(v)) {
                throw DataError("ply: non-finite value at element " + std::to_string(e));
            }
        }

        Gaussian g;
        g.position = {values[px], values[py], values[pz]};
        g.scale = {std::exp(values[sc[0]]), std::exp(values[sc[1]]), std::exp(values[sc[2]])};
        g.opacity = logistic(values[op]);
        Eigen::Quaterniond q(values[rot[0]], values[rot[1]], values[rot[2]], values[rot[3]]);
        if (q.norm() == 0.0) {
            throw DataError("ply: zero quaternion at element " + std::to_string(e));
        }
        g.rotation = q.normalized();
        g.sh_degree = degree;
        for (int c = 0; c < 3; ++c) {
            g.sh[0][c] = values[dc[static_cast<std::size_t>(c)]];
            for (std::size_t k = 0; k < per_channel; ++k) {
                g.sh[1 + k][c] = values[rest[static_cast<std::size_t>(c) * per_channel + k]];
            }
        }
        if ((g.scale.array() <= 0.0).any() || !g.scale.allFinite()) {
            throw DataError("ply: scale underflow/overflow at element " + std::to_string(e));
        }
        gaussians.push_back(std::move(g));
    }
    return GaussianCloud(std::move(gaussians), source);
}

GaussianCloud load_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("ply: cannot open " + path.string());
    }
    return read_ply(in, path.string());
}

void write_ply(const GaussianCloud& cloud, std::ostream& out) {
    if (cloud.empty()) {
        throw ParameterError("empty cloud");
    }
    const int degree = cloud.sh_degree();
    const std::size_t per_channel = static_cast<std::size_t>(sh_coefficient_count(degree) - 1);

    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n";
    header << "element vertex " << cloud.size() << "\n";
    for (const char* name : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        header << "property float " << name << "\n";
    }
    for (std::size_t i = 0; i < 3 * per_channel; ++i) {
        header << "property float f_rest_" << i << "\n";
    }
    for (const char* name : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        header << "property float " << name << "\n";
    }
    header << "end_header\n";
    out << header.str();

    std::vector<float> row;
    row.reserve(14 + 3 * per_channel);
    for (const auto& g : cloud) {
        row.clear();
        row.push_back(static_cast<float>(g.position.x()));
        row.push_back(static_cast<float>(g.position.y()));
        row.push_back(static_cast<float>(g.position.z()));
        for (int c = 0; c < 3; ++c) {
            row.push_back(static_cast<float>(g.sh[0][c]));
        }
        for (int c = 0; c < 3; ++c) {
            for (std::size_t k = 0; k < per_channel; ++k) {
                const bool present = static_cast<int>(k + 1) < sh_coefficient_count(g.sh_degree);
                row.push_back(present ? static_cast<float>(g.sh[1 + k][c]) : 0.0f);
            }
        }
        row.push_back(static_cast<float>(logit(g.opacity)));
        for (int a = 0; a < 3; ++a) {
            row.push_back(static_cast<float>(std::log(g.scale[a])));
        }
        const Eigen::Quaterniond q = g.rotation.normalized();
        row.push_back(static_cast<float>(q.w()));
        row.push_back(static_cast<float>(q.x()));
        row.push_back(static_cast<float>(q.y()));
        row.push_back(static_cast<float>(q.z()));
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) {
        throw IoError("ply: write failed");
    }
}

std::string ply_bytes(const GaussianCloud& cloud) {
    std::ostringstream out(std::ios::binary);
    write_ply(cloud, out);
    return out.str();
}

void save_ply(const GaussianCloud& cloud, const std::filesystem::path& path) {
    if (cloud.empty()) {
        throw ParameterError("empty cloud");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("ply: cannot write " + path.string());
    }
    write_ply(cloud, out);
}

} // namespace splatseg
