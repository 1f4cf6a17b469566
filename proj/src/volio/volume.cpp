#include "volio/volume.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <type_traits>

#include "common/error.hpp"

namespace ipseg::volio {

Affine identity_affine()
{
    Affine a{};
    a[0] = a[5] = a[10] = a[15] = 1.0;
    return a;
}

Volume3D::Volume3D(Dims3 dims, Spacing3 spacing) : dims_(dims), spacing_(spacing)
{
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
        throw Error(ErrorCode::InvalidArgument, "volume dims must be >= 1");
    data_.assign(static_cast<std::size_t>(size()), 0.0f);
    validate();
}

Volume3D::Volume3D(Dims3 dims, std::vector<float> data, Spacing3 spacing)
    : dims_(dims), spacing_(spacing), data_(std::move(data))
{
    validate();
}

void Volume3D::validate() const
{
    for (auto d : dims_)
        if (d < 1)
            throw Error(ErrorCode::InvalidArgument, "volume dims must be >= 1");
    for (auto s : spacing_)
        if (!(s > 0.0) || !std::isfinite(s))
            throw Error(ErrorCode::InvalidArgument, "volume spacing must be positive");
    if (static_cast<std::int64_t>(data_.size()) != size())
        throw Error(ErrorCode::InvalidArgument, "volume data length does not match dims");
    for (float v : data_)
        if (!std::isfinite(v))
            throw Error(ErrorCode::NonFiniteData, "volume contains NaN or Inf");
}

MaskVolume::MaskVolume(Dims3 dims, int num_classes) : dims_(dims), num_classes_(num_classes)
{
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
        throw Error(ErrorCode::InvalidArgument, "mask dims must be >= 1");
    labels_.assign(static_cast<std::size_t>(size()), 0);
    validate();
}

MaskVolume::MaskVolume(Dims3 dims, std::vector<std::uint8_t> labels, int num_classes)
    : dims_(dims), labels_(std::move(labels)), num_classes_(num_classes)
{
    validate();
}

void MaskVolume::validate() const
{
    if (num_classes_ < 2 || num_classes_ > 255)
        throw Error(ErrorCode::InvalidArgument, "num_classes must be in [2, 255]");
    for (auto d : dims_)
        if (d < 1)
            throw Error(ErrorCode::InvalidArgument, "mask dims must be >= 1");
    if (static_cast<std::int64_t>(labels_.size()) != size())
        throw Error(ErrorCode::InvalidArgument, "mask label count does not match dims");
    for (auto l : labels_)
        if (l >= num_classes_)
            throw Error(ErrorCode::InvalidLabel, "label " + std::to_string(l) + " >= num_classes");
}

AxisSpec AxisSpec::parse(const std::string& text)
{
    std::string t;
    for (char c : text)
        t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "sagittal")
        return named(NamedAxis::Sagittal);
    if (t == "coronal")
        return named(NamedAxis::Coronal);
    if (t == "axial")
        return named(NamedAxis::Axial);
    try {
        std::size_t used = 0;
        int i = std::stoi(t, &used);
        if (used == t.size())
            return index(i);
    } catch (...) {
    }
    throw Error(ErrorCode::AxisOutOfRange, "unrecognised axis '" + text + "'");
}

std::string AxisSpec::to_string() const
{
    if (const int* i = std::get_if<int>(&value))
        return std::to_string(*i);
    switch (std::get<NamedAxis>(value)) {
    case NamedAxis::Sagittal: return "sagittal";
    case NamedAxis::Coronal: return "coronal";
    case NamedAxis::Axial: return "axial";
    }
    return "sagittal";
}

void check_axis(int axis)
{
    if (axis < 0 || axis > 2)
        throw Error(ErrorCode::AxisOutOfRange, "axis " + std::to_string(axis) + " not in {0,1,2}");
}

int resolve_axis(const std::optional<Affine>& affine, const AxisSpec& spec)
{
    if (const int* i = std::get_if<int>(&spec.value)) {
        check_axis(*i);
        return *i;
    }
    const int world = static_cast<int>(std::get<NamedAxis>(spec.value));
    const Affine a = affine.value_or(identity_affine());

    // Dominant world component of each voxel-axis column.
    std::array<int, 3> dominant{};
    for (int col = 0; col < 3; ++col) {
        int best = 0;
        double best_mag = -1.0;
        bool tie = false;
        for (int row = 0; row < 3; ++row) {
            const double mag = std::abs(a[static_cast<std::size_t>(row * 4 + col)]);
            if (mag > best_mag) {
                best_mag = mag;
                best = row;
                tie = false;
            } else if (mag == best_mag) {
                tie = true;
            }
        }
        if (tie || best_mag <= 0.0)
            throw Error(ErrorCode::AmbiguousOrientation, "voxel axis " + std::to_string(col) + " has no dominant world direction");
        dominant[static_cast<std::size_t>(col)] = best;
    }
    int found = -1;
    for (int col = 0; col < 3; ++col) {
        if (dominant[static_cast<std::size_t>(col)] != world)
            continue;
        if (found >= 0)
            throw Error(ErrorCode::AmbiguousOrientation, "two voxel axes map to the same world axis");
        found = col;
    }
    if (found < 0)
        throw Error(ErrorCode::AmbiguousOrientation, "no voxel axis maps to " + spec.to_string());
    return found;
}

int resolve_axis(const Volume3D& vol, const AxisSpec& spec) { return resolve_axis(vol.affine(), spec); }

std::array<int, 2> remaining_axes(int axis)
{
    check_axis(axis);
    switch (axis) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
    }
}

namespace {

template <class Src, class Dst, class Make>
std::vector<Dst> slice_all(const Dims3& dims, std::span<const Src> values, int axis, Make make)
{
    const auto [u, v] = remaining_axes(axis);
    const std::array<std::int64_t, 3> stride{1, dims[0], dims[0] * dims[1]};
    const auto nu = dims[static_cast<std::size_t>(u)];
    const auto nv = dims[static_cast<std::size_t>(v)];
    std::vector<Dst> out;
    out.reserve(static_cast<std::size_t>(dims[static_cast<std::size_t>(axis)]));
    for (std::int64_t s = 0; s < dims[static_cast<std::size_t>(axis)]; ++s) {
        Dst plane = make(std::array<std::int64_t, 2>{nu, nv});
        auto& dst = [&]() -> auto& {
            if constexpr (std::is_same_v<Dst, Image2D>)
                return plane.data;
            else
                return plane.labels;
        }();
        for (std::int64_t j = 0; j < nv; ++j)
            for (std::int64_t i = 0; i < nu; ++i)
                dst[static_cast<std::size_t>(i + nu * j)] =
                    values[static_cast<std::size_t>(s * stride[static_cast<std::size_t>(axis)] + i * stride[static_cast<std::size_t>(u)] + j * stride[static_cast<std::size_t>(v)])];
        out.push_back(std::move(plane));
    }
    return out;
}

template <class Plane, class T>
Dims3 stack_into(std::span<const Plane> slices, int axis, std::vector<T>& out, const std::vector<T>& (*payload)(const Plane&))
{
    if (slices.empty())
        throw Error(ErrorCode::ShapeMismatch, "cannot stack zero slices");
    const auto [u, v] = remaining_axes(axis);
    Dims3 dims{};
    dims[static_cast<std::size_t>(axis)] = static_cast<std::int64_t>(slices.size());
    dims[static_cast<std::size_t>(u)] = slices.front().dims[0];
    dims[static_cast<std::size_t>(v)] = slices.front().dims[1];
    const std::array<std::int64_t, 3> stride{1, dims[0], dims[0] * dims[1]};
    out.assign(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]), T{});
    for (std::size_t s = 0; s < slices.size(); ++s) {
        if (slices[s].dims != slices.front().dims)
            throw Error(ErrorCode::ShapeMismatch, "slices have differing dims");
        const auto& src = payload(slices[s]);
        for (std::int64_t j = 0; j < dims[static_cast<std::size_t>(v)]; ++j)
            for (std::int64_t i = 0; i < dims[static_cast<std::size_t>(u)]; ++i)
                out[static_cast<std::size_t>(static_cast<std::int64_t>(s) * stride[static_cast<std::size_t>(axis)] + i * stride[static_cast<std::size_t>(u)] +
                                             j * stride[static_cast<std::size_t>(v)])] = src[static_cast<std::size_t>(i + dims[static_cast<std::size_t>(u)] * j)];
    }
    return dims;
}

const std::vector<float>& image_payload(const Image2D& p) { return p.data; }
const std::vector<std::uint8_t>& mask_payload(const Mask2D& p) { return p.labels; }

}  // namespace

std::vector<Image2D> extract_slices(const Volume3D& vol, int axis)
{
    check_axis(axis);
    return slice_all<float, Image2D>(vol.dims(), vol.data(), axis, [](auto d) { return Image2D(d); });
}

Volume3D stack_slices(std::span<const Image2D> slices, int axis, Spacing3 spacing)
{
    std::vector<float> data;
    const Dims3 dims = stack_into<Image2D, float>(slices, axis, data, &image_payload);
    return Volume3D(dims, std::move(data), spacing);
}

std::vector<Mask2D> extract_mask_slices(const MaskVolume& mask, int axis)
{
    check_axis(axis);
    const int k = mask.num_classes();
    return slice_all<std::uint8_t, Mask2D>(mask.dims(), mask.labels(), axis, [k](auto d) { return Mask2D(d, k); });
}

MaskVolume stack_mask_slices(std::span<const Mask2D> slices, int axis)
{
    std::vector<std::uint8_t> labels;
    const Dims3 dims = stack_into<Mask2D, std::uint8_t>(slices, axis, labels, &mask_payload);
    return MaskVolume(dims, std::move(labels), slices.front().num_classes);
}

}  // namespace ipseg::volio
