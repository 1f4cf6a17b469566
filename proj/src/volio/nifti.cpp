#include "volio/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "common/error.hpp"

namespace ipseg::volio {
namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;

// Header byte offsets (NIfTI-1).
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;
constexpr std::int16_t kDtUint16 = 512;

std::vector<std::uint8_t> slurp(const std::filesystem::path& path)
{
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (f == nullptr)
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes;
    std::vector<std::uint8_t> chunk(1 << 16);
    for (;;) {
        const int n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
        if (n < 0) {
            int errnum = 0;
            std::string msg = gzerror(f, &errnum);
            gzclose(f);
            throw Error(ErrorCode::Truncated, path.string() + ": " + msg);
        }
        if (n == 0)
            break;
        bytes.insert(bytes.end(), chunk.begin(), chunk.begin() + n);
    }
    gzclose(f);
    return bytes;
}

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <class T>
    T get(std::size_t offset) const
    {
        std::array<std::uint8_t, sizeof(T)> raw{};
        std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
        if (swap_)
            std::reverse(raw.begin(), raw.end());
        T value;
        std::memcpy(&value, raw.data(), sizeof(T));
        return value;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    bool swap_;
};

constexpr bool host_is_big_endian() { return std::endian::native == std::endian::big; }

NiftiHeader parse_header(const std::vector<std::uint8_t>& bytes, const std::string& where)
{
    if (bytes.size() < 4)
        throw Error(ErrorCode::BadMagic, where + ": too short for a NIfTI-1 header");
    bool swap = false;
    if (Reader(bytes, false).get<std::int32_t>(0) != static_cast<std::int32_t>(kHeaderSize)) {
        if (Reader(bytes, true).get<std::int32_t>(0) != static_cast<std::int32_t>(kHeaderSize))
            throw Error(ErrorCode::BadMagic, where + ": sizeof_hdr is not 348 in either byte order");
        swap = true;
    }
    if (bytes.size() < kHeaderSize)
        throw Error(ErrorCode::Truncated, where + ": header shorter than 348 bytes");
    if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0)
        throw Error(ErrorCode::BadMagic, where + ": magic is not \"n+1\"");

    const Reader r(bytes, swap);
    NiftiHeader h;
    h.big_endian = swap != host_is_big_endian();
    for (std::size_t i = 0; i < 8; ++i) {
        h.dim[i] = r.get<std::int16_t>(kOffDim + 2 * i);
        h.pixdim[i] = r.get<float>(kOffPixdim + 4 * i);
    }
    h.datatype = r.get<std::int16_t>(kOffDatatype);
    h.bitpix = r.get<std::int16_t>(kOffBitpix);
    h.vox_offset = r.get<float>(kOffVoxOffset);
    h.scl_slope = r.get<float>(kOffSclSlope);
    h.scl_inter = r.get<float>(kOffSclInter);
    h.qform_code = r.get<std::int16_t>(kOffQformCode);
    h.sform_code = r.get<std::int16_t>(kOffSformCode);
    for (std::size_t i = 0; i < 12; ++i)
        h.srow[i] = r.get<float>(kOffSrow + 4 * i);
    h.magic = "n+1";
    return h;
}

std::optional<Affine> header_affine(const std::vector<std::uint8_t>& bytes, const NiftiHeader& h)
{
    Affine a = identity_affine();
    if (h.sform_code > 0) {
        for (std::size_t i = 0; i < 12; ++i)
            a[i] = h.srow[i];
        return a;
    }
    if (h.qform_code > 0) {
        const Reader r(bytes, h.big_endian != host_is_big_endian());
        const double b = r.get<float>(kOffQuatern), c = r.get<float>(kOffQuatern + 4), d = r.get<float>(kOffQuatern + 8);
        const double aa = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
        const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
        const double R[3][3] = {{aa * aa + b * b - c * c - d * d, 2 * (b * c - aa * d), 2 * (b * d + aa * c)},
                                {2 * (b * c + aa * d), aa * aa + c * c - b * b - d * d, 2 * (c * d - aa * b)},
                                {2 * (b * d - aa * c), 2 * (c * d + aa * b), aa * aa + d * d - c * c - b * b}};
        const double scale[3] = {h.pixdim[1], h.pixdim[2], qfac * h.pixdim[3]};
        for (int row = 0; row < 3; ++row) {
            for (int col = 0; col < 3; ++col)
                a[static_cast<std::size_t>(row * 4 + col)] = R[row][col] * scale[col];
            a[static_cast<std::size_t>(row * 4 + 3)] = r.get<float>(kOffQoffset + 4 * static_cast<std::size_t>(row));
        }
        return a;
    }
    return std::nullopt;
}

std::size_t datatype_bytes(std::int16_t dt)
{
    switch (dt) {
    case kDtUint8: return 1;
    case kDtInt16:
    case kDtUint16: return 2;
    case kDtFloat32: return 4;
    case kDtFloat64: return 8;
    default: return 0;
    }
}

Dims3 squeezed_dims(const NiftiHeader& h, const std::string& where)
{
    int ndim = h.dim[0];
    if (ndim < 1 || ndim > 7)
        throw Error(ErrorCode::DimUnsupported, where + ": dim[0] = " + std::to_string(ndim));
    while (ndim > 3 && h.dim[static_cast<std::size_t>(ndim)] == 1)
        --ndim;
    if (ndim != 3)
        throw Error(ErrorCode::DimUnsupported, where + ": " + std::to_string(ndim) + "-D data after squeezing, need 3-D");
    Dims3 dims{h.dim[1], h.dim[2], h.dim[3]};
    for (auto d : dims)
        if (d < 1)
            throw Error(ErrorCode::DimUnsupported, where + ": non-positive extent");
    return dims;
}

template <class T>
void put(std::vector<std::uint8_t>& buf, std::size_t offset, T value)
{
    static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
    std::memcpy(buf.data() + offset, &value, sizeof(T));
}

}  // namespace

NiftiHeader read_nifti_header(const std::filesystem::path& path)
{
    return parse_header(slurp(path), path.string());
}

Volume3D read_nifti(const std::filesystem::path& path)
{
    const std::string where = path.string();
    const std::vector<std::uint8_t> bytes = slurp(path);
    const NiftiHeader h = parse_header(bytes, where);
    const Dims3 dims = squeezed_dims(h, where);

    const std::size_t width = datatype_bytes(h.datatype);
    if (width == 0)
        throw Error(ErrorCode::UnsupportedDatatype, where + ": datatype " + std::to_string(h.datatype));

    const auto count = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
    const auto offset = static_cast<std::size_t>(h.vox_offset);
    if (!(h.vox_offset >= static_cast<float>(kHeaderSize)) || bytes.size() < offset || bytes.size() - offset < count * width)
        throw Error(ErrorCode::Truncated, where + ": voxel data shorter than the header promises");

    const bool swap = h.big_endian != host_is_big_endian();
    const double slope = (h.scl_slope == 0.0f || !std::isfinite(h.scl_slope)) ? 1.0 : h.scl_slope;
    const double inter = std::isfinite(h.scl_inter) ? h.scl_inter : 0.0;
    const bool identity_scaling = slope == 1.0 && inter == 0.0;

    std::vector<float> data(count);
    const Reader r(bytes, swap);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = offset + i * width;
        double raw = 0.0;
        switch (h.datatype) {
        case kDtUint8: raw = bytes[at]; break;
        case kDtInt16: raw = r.get<std::int16_t>(at); break;
        case kDtUint16: raw = r.get<std::uint16_t>(at); break;
        case kDtFloat32:
            if (identity_scaling) {
                data[i] = r.get<float>(at);
                continue;
            }
            raw = r.get<float>(at);
            break;
        case kDtFloat64: raw = r.get<double>(at); break;
        }
        data[i] = static_cast<float>(identity_scaling ? raw : raw * slope + inter);
    }

    Spacing3 spacing{};
    for (std::size_t i = 0; i < 3; ++i) {
        const double s = std::abs(static_cast<double>(h.pixdim[i + 1]));
        spacing[i] = (s > 0.0 && std::isfinite(s)) ? s : 1.0;
    }
    Volume3D vol(dims, std::move(data), spacing);
    vol.set_affine(header_affine(bytes, h));
    vol.intensity_slope = slope;
    vol.intensity_intercept = inter;
    return vol;
}

void write_nifti(const Volume3D& vol, const std::filesystem::path& path)
{
    vol.validate();
    std::vector<std::uint8_t> buf(kVoxOffset + static_cast<std::size_t>(vol.size()) * sizeof(float), 0);
    put<std::int32_t>(buf, 0, static_cast<std::int32_t>(kHeaderSize));
    const auto& d = vol.dims();
    put<std::int16_t>(buf, kOffDim, 3);
    for (std::size_t i = 0; i < 3; ++i)
        put<std::int16_t>(buf, kOffDim + 2 * (i + 1), static_cast<std::int16_t>(d[i]));
    for (std::size_t i = 4; i < 8; ++i)
        put<std::int16_t>(buf, kOffDim + 2 * i, 1);
    put<std::int16_t>(buf, kOffDatatype, kDtFloat32);
    put<std::int16_t>(buf, kOffBitpix, 32);
    put<float>(buf, kOffPixdim, 1.0f);
    for (std::size_t i = 0; i < 3; ++i)
        put<float>(buf, kOffPixdim + 4 * (i + 1), static_cast<float>(vol.spacing()[i]));
    put<float>(buf, kOffVoxOffset, static_cast<float>(kVoxOffset));
    put<float>(buf, kOffSclSlope, 1.0f);
    put<float>(buf, kOffSclInter, 0.0f);
    buf[kOffXyztUnits] = 2;  // millimetres
    if (vol.affine()) {
        put<std::int16_t>(buf, kOffSformCode, 1);
        for (std::size_t i = 0; i < 12; ++i)
            put<float>(buf, kOffSrow + 4 * i, static_cast<float>((*vol.affine())[i]));
    }
    std::memcpy(buf.data() + kOffMagic, "n+1\0", 4);
    std::memcpy(buf.data() + kVoxOffset, vol.data().data(), static_cast<std::size_t>(vol.size()) * sizeof(float));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

void write_mask_nifti(const MaskVolume& mask, const std::filesystem::path& path)
{
    std::vector<float> values(mask.labels().begin(), mask.labels().end());
    write_nifti(Volume3D(mask.dims(), std::move(values)), path);
}

MaskVolume read_mask_nifti(const std::filesystem::path& path, int num_classes)
{
    const Volume3D vol = read_nifti(path);
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(vol.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const float v = vol.data()[i];
        if (v < 0.0f || v != std::floor(v) || v >= static_cast<float>(num_classes))
            throw Error(ErrorCode::InvalidLabel, path.string() + ": voxel value " + std::to_string(v) + " is not a class index < " + std::to_string(num_classes));
        labels[i] = static_cast<std::uint8_t>(v);
    }
    return MaskVolume(vol.dims(), std::move(labels), num_classes);
}

}  // namespace ipseg::volio
