#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "volio/volume.hpp"

namespace ipseg::volio {

// NIfTI-1 single-file header fields this reader understands.
struct NiftiHeader {
    bool big_endian = false;
    std::array<std::int16_t, 8> dim{};
    std::int16_t datatype = 0;
    std::int16_t bitpix = 0;
    std::array<float, 8> pixdim{};
    float vox_offset = 352.0f;
    float scl_slope = 0.0f;
    float scl_inter = 0.0f;
    std::int16_t qform_code = 0;
    std::int16_t sform_code = 0;
    std::array<float, 12> srow{};  // srow_x, srow_y, srow_z
    std::string magic;
};

// Accepts plain .nii and gzip-compressed .nii.gz (detected from content).
NiftiHeader read_nifti_header(const std::filesystem::path& path);
Volume3D read_nifti(const std::filesystem::path& path);

// Little-endian float32, magic "n+1", vox_offset 352. Never compressed.
void write_nifti(const Volume3D& vol, const std::filesystem::path& path);

// Masks travel as float32 volumes holding integral class indices.
void write_mask_nifti(const MaskVolume& mask, const std::filesystem::path& path);
MaskVolume read_mask_nifti(const std::filesystem::path& path, int num_classes);

}  // namespace ipseg::volio
