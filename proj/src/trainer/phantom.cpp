#include "trainer/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace ipseg::train {

void PhantomSpec::validate() const
{
    auto fail = [](const std::string& why) { throw Error(ErrorCode::SpecInvalid, why); };
    for (auto d : dims)
        if (d < 1)
            fail("dims must be positive");
    if (num_lesions < 0)
        fail("num_lesions must be >= 0");
    if (!(radius_min > 0.0) || !(radius_max >= radius_min))
        fail("need 0 < radius_min <= radius_max");
    for (auto d : dims)
        if (2.0 * std::ceil(radius_max) + 1.0 > static_cast<double>(d))
            fail("lesion radius does not fit inside dims");
    if (!(lesion_max >= lesion_min))
        fail("lesion intensity range is not ordered");
    if (!(tissue_max >= tissue_min))
        fail("tissue intensity range is not ordered");
    if (!(lesion_min > tissue_max))
        fail("lesion intensities must exceed the tissue range");
    if (!(noise_sigma >= 0.0))
        fail("noise_sigma must be >= 0");
    if (num_classes < 2 || num_classes > 255)
        fail("num_classes must be in [2, 255]");
}

void to_json(nlohmann::json& j, const PhantomSpec& s)
{
    j = {{"dims", s.dims},
         {"num_lesions", s.num_lesions},
         {"radius_range", {s.radius_min, s.radius_max}},
         {"lesion_intensity_range", {s.lesion_min, s.lesion_max}},
         {"tissue_range", {s.tissue_min, s.tissue_max}},
         {"noise_sigma", s.noise_sigma},
         {"num_classes", s.num_classes},
         {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, PhantomSpec& s)
{
    PhantomSpec d;
    s.dims = j.value("dims", d.dims);
    s.num_lesions = j.value("num_lesions", d.num_lesions);
    const auto pair = [&](const char* key, double lo, double hi) {
        const auto v = j.value(key, std::vector<double>{lo, hi});
        if (v.size() != 2)
            throw Error(ErrorCode::SpecInvalid, std::string(key) + " must have two entries");
        return std::pair{v[0], v[1]};
    };
    std::tie(s.radius_min, s.radius_max) = pair("radius_range", d.radius_min, d.radius_max);
    std::tie(s.lesion_min, s.lesion_max) = pair("lesion_intensity_range", d.lesion_min, d.lesion_max);
    std::tie(s.tissue_min, s.tissue_max) = pair("tissue_range", d.tissue_min, d.tissue_max);
    s.noise_sigma = j.value("noise_sigma", d.noise_sigma);
    s.num_classes = j.value("num_classes", d.num_classes);
    s.seed = j.value("seed", d.seed);
}

std::pair<volio::Volume3D, volio::MaskVolume> synth_phantom(const PhantomSpec& spec)
{
    spec.validate();
    Rng rng(spec.seed);
    const auto [nx, ny, nz] = spec.dims;
    volio::Volume3D vol(spec.dims);
    volio::MaskVolume mask(spec.dims, spec.num_classes);

    const double span = spec.tissue_max - spec.tissue_min;
    const double cx = 0.5 * static_cast<double>(nx - 1), cy = 0.5 * static_cast<double>(ny - 1), cz = 0.5 * static_cast<double>(nz - 1);
    const double ax = 0.45 * static_cast<double>(nx), ay = 0.45 * static_cast<double>(ny), az = 0.45 * static_cast<double>(nz);
    for (std::int64_t z = 0; z < nz; ++z)
        for (std::int64_t y = 0; y < ny; ++y)
            for (std::int64_t x = 0; x < nx; ++x) {
                const double dx = (static_cast<double>(x) - cx) / ax, dy = (static_cast<double>(y) - cy) / ay,
                             dz = (static_cast<double>(z) - cz) / az;
                const double r2 = dx * dx + dy * dy + dz * dz;
                double v = spec.tissue_min;
                if (r2 < 1.0)
                    v += span * (0.2 + 0.6 * (1.0 - r2));
                v += spec.noise_sigma * rng.normal();
                vol.at(x, y, z) = static_cast<float>(std::clamp(v, spec.tissue_min, spec.tissue_max));
            }

    const int fg = spec.num_classes - 1;
    const double band = (spec.lesion_max - spec.lesion_min) / fg;
    for (int i = 0; i < spec.num_lesions; ++i) {
        const int cls = 1 + i % fg;
        const double lo = spec.lesion_min + band * (cls - 1);
        const float intensity = static_cast<float>(std::clamp(rng.uniform(lo, lo + band), spec.lesion_min, spec.lesion_max));
        std::array<double, 3> r{}, c{};
        for (int a = 0; a < 3; ++a) {
            r[static_cast<std::size_t>(a)] = rng.uniform(spec.radius_min, spec.radius_max);
            const double m = std::ceil(spec.radius_max);
            c[static_cast<std::size_t>(a)] = rng.uniform(m, static_cast<double>(spec.dims[static_cast<std::size_t>(a)] - 1) - m);
        }
        for (std::int64_t z = 0; z < nz; ++z)
            for (std::int64_t y = 0; y < ny; ++y)
                for (std::int64_t x = 0; x < nx; ++x) {
                    const double dx = (static_cast<double>(x) - c[0]) / r[0], dy = (static_cast<double>(y) - c[1]) / r[1],
                                 dz = (static_cast<double>(z) - c[2]) / r[2];
                    if (dx * dx + dy * dy + dz * dz <= 1.0) {
                        vol.at(x, y, z) = intensity;
                        mask.at(x, y, z) = static_cast<std::uint8_t>(cls);
                    }
                }
    }
    return {std::move(vol), std::move(mask)};
}

}  // namespace ipseg::train
