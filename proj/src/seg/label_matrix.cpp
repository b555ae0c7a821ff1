#include "splatseg/seg/label_matrix.hpp"

#include "splatseg/common/errors.hpp"

#include <algorithm>
#include <string>

namespace splatseg {

LabelMatrix::LabelMatrix(std::size_t gaussians, int num_objects) : rows_(gaussians) {
    set_num_objects(num_objects);
}

void LabelMatrix::set_num_objects(int num_objects) {
    if (num_objects < 1) {
        throw ParameterError("label matrix: number of objects must be at least 1");
    }
    num_objects_ = num_objects;
}

void LabelMatrix::resize(std::size_t gaussians) {
    if (gaussians > rows_.size()) {
        rows_.resize(gaussians);
    }
}

bool LabelMatrix::observed(std::size_t i, int view) const {
    const auto& r = rows_[i];
    return std::any_of(r.begin(), r.end(), [view](const Observation& o) { return o.view == view; });
}

void LabelMatrix::observe(std::size_t i, int view, std::uint16_t label) {
    if (i >= rows_.size()) {
        throw ParameterError("label matrix: gaussian " + std::to_string(i) + " out of range");
    }
    if (label > num_objects_) {
        throw ParameterError("label matrix: label " + std::to_string(label) + " exceeds object count " +
                             std::to_string(num_objects_));
    }
    if (observed(i, view)) {
        throw ParameterError("label matrix: gaussian " + std::to_string(i) + " already observed in view " +
                             std::to_string(view));
    }
    rows_[i].push_back({view, label});
}

std::size_t LabelMatrix::append_child(std::size_t parent) {
    if (parent >= rows_.size()) {
        throw ParameterError("label matrix: parent " + std::to_string(parent) + " out of range");
    }
    std::vector<Observation> copy = rows_[parent];
    rows_.push_back(std::move(copy));
    return rows_.size() - 1;
}

} // namespace splatseg
