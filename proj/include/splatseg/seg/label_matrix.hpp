#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace splatseg {

struct Observation {
    int view = 0;
    std::uint16_t label = 0;

    bool operator==(const Observation&) const = default;
};

/// Per-Gaussian record of the label seen at the projected center in each view.
/// Row i lists the observations of Gaussian i in the order they were made.
class LabelMatrix {
public:
    LabelMatrix() = default;
    explicit LabelMatrix(std::size_t gaussians, int num_objects = 1);

    std::size_t size() const noexcept { return rows_.size(); }
    int num_objects() const noexcept { return num_objects_; }
    /// Throws ParameterError unless num_objects >= 1.
    void set_num_objects(int num_objects);

    /// Grows to `gaussians` rows; new rows start empty. Never shrinks.
    void resize(std::size_t gaussians);

    /// Throws ParameterError when Gaussian i already has an observation for
    /// `view` or the label exceeds num_objects().
    void observe(std::size_t i, int view, std::uint16_t label);

    /// Appends a row that copies the observations of `parent`; returns its index.
    std::size_t append_child(std::size_t parent);

    std::span<const Observation> row(std::size_t i) const { return rows_[i]; }
    /// N_i: number of views that observed Gaussian i.
    std::size_t observed_views(std::size_t i) const { return rows_[i].size(); }
    bool observed(std::size_t i, int view) const;

    bool operator==(const LabelMatrix&) const = default;

private:
    std::vector<std::vector<Observation>> rows_;
    int num_objects_ = 1;
};

} // namespace splatseg
