#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "volio/volume.hpp"

namespace ipseg::ipcore {

using volio::Image2D;
using volio::Mask2D;
using volio::MaskVolume;
using volio::Volume3D;

enum class CvpMode {
    // keep max(ray) when it is <= threshold, 0 otherwise
    Eq1Literal,
    // first local maximum along the ray strictly above threshold, 0 if none
    ProseLmip,
};

struct CvpConfig {
    double threshold = 130.0;
    CvpMode mode = CvpMode::Eq1Literal;
};

std::string to_string(CvpMode mode);
CvpMode parse_cvp_mode(const std::string& text);

/// Canonical channel order of a composed projection image.
inline const std::vector<std::string>& ip_channel_names()
{
    static const std::vector<std::string> names{"cvp", "avgip", "mip"};
    return names;
}

struct IPImage {
    std::vector<Image2D> channels;
    std::vector<std::string> channel_names;

    const std::array<std::int64_t, 2>& dims() const { return channels.front().dims; }
    void validate() const;
};

Image2D mip(const Volume3D& vol, int axis);
Image2D min_ip(const Volume3D& vol, int axis);
// Mean accumulated in double, rounded once to float.
Image2D avg_ip(const Volume3D& vol, int axis);
Image2D cvp(const Volume3D& vol, int axis, const CvpConfig& cfg);

IPImage compose_ip(const Volume3D& vol, int axis, const CvpConfig& cfg);

// Largest class index along each ray.
Mask2D project_mask(const MaskVolume& mask, int axis);

// One single-slice NIfTI per channel: <prefix>_<name>.nii. Returns written paths.
std::vector<std::filesystem::path> write_ip_nifti(const IPImage& img, const std::filesystem::path& prefix);
// Raw little-endian float32, channel-major, plus <path>.json sidecar {h, w, channels, channel_names}.
void write_ip_bin(const IPImage& img, const std::filesystem::path& bin_path);
IPImage read_ip_bin(const std::filesystem::path& bin_path);

}  // namespace ipseg::ipcore
