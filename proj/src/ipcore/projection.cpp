#include "ipcore/projection.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "common/error.hpp"
#include "common/parallel.hpp"
#include "volio/nifti.hpp"

namespace ipseg::ipcore {
namespace {

struct RayGeometry {
    std::array<std::int64_t, 2> out_dims;
    std::int64_t length;
    std::int64_t ray_stride;
    std::int64_t stride_u;
    std::int64_t stride_v;
};

RayGeometry geometry(const volio::Dims3& dims, int axis)
{
    const auto [u, v] = volio::remaining_axes(axis);
    const std::array<std::int64_t, 3> stride{1, dims[0], dims[0] * dims[1]};
    const auto a = static_cast<std::size_t>(axis);
    return {{dims[static_cast<std::size_t>(u)], dims[static_cast<std::size_t>(v)]},
            dims[a],
            stride[a],
            stride[static_cast<std::size_t>(u)],
            stride[static_cast<std::size_t>(v)]};
}

// Applies reduce(ray_ptr, length, stride) per output pixel. Each pixel reduces
// sequentially in ray order; parallelism is across output rows only.
template <class Src, class Dst, class Reduce>
void project(std::span<const Src> values, const RayGeometry& g, std::vector<Dst>& out, Reduce reduce)
{
    out.resize(static_cast<std::size_t>(g.out_dims[0] * g.out_dims[1]));
    parallel_for(0, static_cast<std::size_t>(g.out_dims[1]), 8, [&](std::size_t lo, std::size_t hi) {
        for (auto j = static_cast<std::int64_t>(lo); j < static_cast<std::int64_t>(hi); ++j)
            for (std::int64_t i = 0; i < g.out_dims[0]; ++i) {
                const Src* ray = values.data() + i * g.stride_u + j * g.stride_v;
                out[static_cast<std::size_t>(i + g.out_dims[0] * j)] = reduce(ray, g.length, g.ray_stride);
            }
    });
}

template <class Reduce>
Image2D project_volume(const Volume3D& vol, int axis, Reduce reduce)
{
    volio::check_axis(axis);
    const RayGeometry g = geometry(vol.dims(), axis);
    Image2D img(g.out_dims);
    project<float, float>(vol.data(), g, img.data, reduce);
    return img;
}

float ray_max(const float* p, std::int64_t n, std::int64_t s)
{
    float m = p[0];
    for (std::int64_t k = 1; k < n; ++k)
        m = std::max(m, p[k * s]);
    return m;
}

}  // namespace

std::string to_string(CvpMode mode) { return mode == CvpMode::Eq1Literal ? "eq1-literal" : "prose-lmip"; }

CvpMode parse_cvp_mode(const std::string& text)
{
    if (text == "eq1-literal" || text == "eq1" || text == "literal")
        return CvpMode::Eq1Literal;
    if (text == "prose-lmip" || text == "lmip")
        return CvpMode::ProseLmip;
    throw Error(ErrorCode::InvalidArgument, "unknown CVP mode '" + text + "' (expected eq1-literal or prose-lmip)");
}

void IPImage::validate() const
{
    if (channels.empty())
        throw Error(ErrorCode::ShapeMismatch, "IPImage needs at least one channel");
    if (channel_names.size() != channels.size())
        throw Error(ErrorCode::ShapeMismatch, "IPImage channel name count differs from channel count");
    for (const auto& c : channels)
        if (c.dims != channels.front().dims)
            throw Error(ErrorCode::ShapeMismatch, "IPImage channels differ in dims");
}

Image2D mip(const Volume3D& vol, int axis) { return project_volume(vol, axis, ray_max); }

Image2D min_ip(const Volume3D& vol, int axis)
{
    return project_volume(vol, axis, [](const float* p, std::int64_t n, std::int64_t s) {
        float m = p[0];
        for (std::int64_t k = 1; k < n; ++k)
            m = std::min(m, p[k * s]);
        return m;
    });
}

Image2D avg_ip(const Volume3D& vol, int axis)
{
    return project_volume(vol, axis, [](const float* p, std::int64_t n, std::int64_t s) {
        double sum = 0.0;
        for (std::int64_t k = 0; k < n; ++k)
            sum += p[k * s];
        return static_cast<float>(sum / static_cast<double>(n));
    });
}

Image2D cvp(const Volume3D& vol, int axis, const CvpConfig& cfg)
{
    if (!std::isfinite(cfg.threshold))
        throw Error(ErrorCode::InvalidArgument, "CVP threshold must be finite");
    const double x = cfg.threshold;
    if (cfg.mode == CvpMode::Eq1Literal) {
        return project_volume(vol, axis, [x](const float* p, std::int64_t n, std::int64_t s) {
            const float m = ray_max(p, n, s);
            return static_cast<double>(m) <= x ? m : 0.0f;
        });
    }
    return project_volume(vol, axis, [x](const float* p, std::int64_t n, std::int64_t s) {
        for (std::int64_t k = 0; k < n; ++k) {
            const float v = p[k * s];
            const bool ge_prev = k == 0 || v >= p[(k - 1) * s];
            const bool ge_next = k == n - 1 || v >= p[(k + 1) * s];
            if (ge_prev && ge_next && static_cast<double>(v) > x)
                return v;
        }
        return 0.0f;
    });
}

IPImage compose_ip(const Volume3D& vol, int axis, const CvpConfig& cfg)
{
    IPImage img;
    img.channels.push_back(cvp(vol, axis, cfg));
    img.channels.push_back(avg_ip(vol, axis));
    img.channels.push_back(mip(vol, axis));
    img.channel_names = ip_channel_names();
    return img;
}

Mask2D project_mask(const MaskVolume& mask, int axis)
{
    volio::check_axis(axis);
    const RayGeometry g = geometry(mask.dims(), axis);
    Mask2D out(g.out_dims, mask.num_classes());
    project<std::uint8_t, std::uint8_t>(mask.labels(), g, out.labels, [](const std::uint8_t* p, std::int64_t n, std::int64_t s) {
        std::uint8_t m = p[0];
        for (std::int64_t k = 1; k < n; ++k)
            m = std::max(m, p[k * s]);
        return m;
    });
    return out;
}

std::vector<std::filesystem::path> write_ip_nifti(const IPImage& img, const std::filesystem::path& prefix)
{
    img.validate();
    std::vector<std::filesystem::path> written;
    for (std::size_t c = 0; c < img.channels.size(); ++c) {
        const auto& ch = img.channels[c];
        std::filesystem::path out = prefix;
        out += "_" + img.channel_names[c] + ".nii";
        volio::write_nifti(Volume3D({ch.dims[0], ch.dims[1], 1}, ch.data), out);
        written.push_back(out);
    }
    return written;
}

void write_ip_bin(const IPImage& img, const std::filesystem::path& bin_path)
{
    img.validate();
    std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoFailure, "cannot open " + bin_path.string());
    for (const auto& ch : img.channels)
        out.write(reinterpret_cast<const char*>(ch.data.data()), static_cast<std::streamsize>(ch.data.size() * sizeof(float)));
    if (!out)
        throw Error(ErrorCode::IoFailure, "write failed for " + bin_path.string());

    nlohmann::json side{{"h", img.dims()[1]},
                        {"w", img.dims()[0]},
                        {"channels", img.channels.size()},
                        {"channel_names", img.channel_names},
                        {"dtype", "float32-le"}};
    std::ofstream js(bin_path.string() + ".json", std::ios::trunc);
    if (!js)
        throw Error(ErrorCode::IoFailure, "cannot write sidecar for " + bin_path.string());
    js << side.dump(2) << '\n';
}

IPImage read_ip_bin(const std::filesystem::path& bin_path)
{
    std::ifstream js(bin_path.string() + ".json");
    if (!js)
        throw Error(ErrorCode::IoFailure, "missing sidecar " + bin_path.string() + ".json");
    nlohmann::json side;
    try {
        js >> side;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Corrupt, std::string("bad sidecar: ") + e.what());
    }
    const std::int64_t h = side.at("h").get<std::int64_t>();
    const std::int64_t w = side.at("w").get<std::int64_t>();
    const auto names = side.at("channel_names").get<std::vector<std::string>>();
    std::ifstream in(bin_path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoFailure, "cannot open " + bin_path.string());
    IPImage img;
    for (const auto& name : names) {
        Image2D ch({w, h});
        in.read(reinterpret_cast<char*>(ch.data.data()), static_cast<std::streamsize>(ch.data.size() * sizeof(float)));
        if (!in)
            throw Error(ErrorCode::Truncated, bin_path.string() + " shorter than its sidecar promises");
        img.channels.push_back(std::move(ch));
        img.channel_names.push_back(name);
    }
    img.validate();
    return img;
}

}  // namespace ipseg::ipcore
