#pragma once

#include <cstdint>
#include <utility>

#include <json.hpp>

#include "volio/volume.hpp"

namespace ipseg::train {

/// Synthetic calcification phantom: a smooth ellipsoidal tissue body with
/// noise, and bright ellipsoidal lesions labelled 1..K-1 round-robin.
struct PhantomSpec {
    volio::Dims3 dims{64, 64, 32};
    int num_lesions = 3;
    double radius_min = 2.0;
    double radius_max = 5.0;
    double lesion_min = 200.0;
    double lesion_max = 400.0;
    double tissue_min = 0.0;
    double tissue_max = 100.0;
    double noise_sigma = 5.0;
    int num_classes = 3;
    std::uint64_t seed = 1;

    void validate() const;
};

void to_json(nlohmann::json& j, const PhantomSpec& s);
void from_json(const nlohmann::json& j, PhantomSpec& s);

// Lesion intensities are drawn from the class's slice of [lesion_min, lesion_max]:
// class c of K-1 foreground classes gets the c-th equal-width band.
std::pair<volio::Volume3D, volio::MaskVolume> synth_phantom(const PhantomSpec& spec);

}  // namespace ipseg::train
