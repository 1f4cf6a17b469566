#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ipseg::volio {

using Dims3 = std::array<std::int64_t, 3>;
using Spacing3 = std::array<double, 3>;
// Row-major 4x4 voxel-to-world transform; column j is voxel axis j in world space.
using Affine = std::array<double, 16>;

Affine identity_affine();

/// Dense scalar volume, x-fastest (index = x + nx*(y + ny*z)), the NIfTI on-disk order.
class Volume3D {
public:
    Volume3D() = default;
    explicit Volume3D(Dims3 dims, Spacing3 spacing = {1.0, 1.0, 1.0});
    Volume3D(Dims3 dims, std::vector<float> data, Spacing3 spacing = {1.0, 1.0, 1.0});

    const Dims3& dims() const { return dims_; }
    const Spacing3& spacing() const { return spacing_; }
    std::int64_t size() const { return dims_[0] * dims_[1] * dims_[2]; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    std::int64_t index(std::int64_t x, std::int64_t y, std::int64_t z) const { return x + dims_[0] * (y + dims_[1] * z); }
    float& at(std::int64_t x, std::int64_t y, std::int64_t z) { return data_[static_cast<std::size_t>(index(x, y, z))]; }
    float at(std::int64_t x, std::int64_t y, std::int64_t z) const { return data_[static_cast<std::size_t>(index(x, y, z))]; }

    const std::optional<Affine>& affine() const { return affine_; }
    void set_affine(std::optional<Affine> a) { affine_ = a; }

    // Scaling that was folded into data at load time (informational).
    double intensity_slope = 1.0;
    double intensity_intercept = 0.0;

    // Throws InvalidArgument if dims/spacing/data violate the container invariants.
    void validate() const;

private:
    Dims3 dims_{0, 0, 0};
    Spacing3 spacing_{1.0, 1.0, 1.0};
    std::vector<float> data_;
    std::optional<Affine> affine_;
};

class MaskVolume {
public:
    MaskVolume() = default;
    MaskVolume(Dims3 dims, int num_classes);
    MaskVolume(Dims3 dims, std::vector<std::uint8_t> labels, int num_classes);

    const Dims3& dims() const { return dims_; }
    int num_classes() const { return num_classes_; }
    std::int64_t size() const { return dims_[0] * dims_[1] * dims_[2]; }

    std::span<std::uint8_t> labels() { return labels_; }
    std::span<const std::uint8_t> labels() const { return labels_; }

    std::int64_t index(std::int64_t x, std::int64_t y, std::int64_t z) const { return x + dims_[0] * (y + dims_[1] * z); }
    std::uint8_t& at(std::int64_t x, std::int64_t y, std::int64_t z) { return labels_[static_cast<std::size_t>(index(x, y, z))]; }
    std::uint8_t at(std::int64_t x, std::int64_t y, std::int64_t z) const { return labels_[static_cast<std::size_t>(index(x, y, z))]; }

    void validate() const;

private:
    Dims3 dims_{0, 0, 0};
    std::vector<std::uint8_t> labels_;
    int num_classes_ = 2;
};

/// 2D plane. dims[0] is the faster-varying extent (the lower of the two
/// volume axes that remain after removing one), dims[1] the slower one.
/// As an NCHW tensor this is H = dims[1], W = dims[0].
struct Image2D {
    std::array<std::int64_t, 2> dims{0, 0};
    std::vector<float> data;

    Image2D() = default;
    explicit Image2D(std::array<std::int64_t, 2> d) : dims(d), data(static_cast<std::size_t>(d[0] * d[1]), 0.0f) {}

    float at(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i + dims[0] * j)]; }
    float& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i + dims[0] * j)]; }
    std::int64_t height() const { return dims[1]; }
    std::int64_t width() const { return dims[0]; }
};

struct Mask2D {
    std::array<std::int64_t, 2> dims{0, 0};
    std::vector<std::uint8_t> labels;
    int num_classes = 2;

    Mask2D() = default;
    Mask2D(std::array<std::int64_t, 2> d, int k) : dims(d), labels(static_cast<std::size_t>(d[0] * d[1]), 0), num_classes(k) {}

    std::uint8_t at(std::int64_t i, std::int64_t j) const { return labels[static_cast<std::size_t>(i + dims[0] * j)]; }
};

enum class NamedAxis { Sagittal, Coronal, Axial };

/// Either an explicit voxel axis index or an anatomical name.
struct AxisSpec {
    std::variant<int, NamedAxis> value = NamedAxis::Sagittal;

    static AxisSpec index(int i) { return AxisSpec{i}; }
    static AxisSpec named(NamedAxis a) { return AxisSpec{a}; }
    // Accepts "0", "1", "2", "sagittal", "coronal", "axial" (case-insensitive).
    static AxisSpec parse(const std::string& text);
    std::string to_string() const;
};

int resolve_axis(const Volume3D& vol, const AxisSpec& spec);
int resolve_axis(const std::optional<Affine>& affine, const AxisSpec& spec);

// The two axes left after removing `axis`, in increasing order.
std::array<int, 2> remaining_axes(int axis);
void check_axis(int axis);

std::vector<Image2D> extract_slices(const Volume3D& vol, int axis);
Volume3D stack_slices(std::span<const Image2D> slices, int axis, Spacing3 spacing = {1.0, 1.0, 1.0});

std::vector<Mask2D> extract_mask_slices(const MaskVolume& mask, int axis);
MaskVolume stack_mask_slices(std::span<const Mask2D> slices, int axis);

}  // namespace ipseg::volio
