#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "trainer/phantom.hpp"
#include "volio/volume.hpp"

namespace ipseg::train {

struct Sample {
    std::string name;
    volio::Volume3D image;
    volio::MaskVolume mask;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::size_t> train;  // indices into samples
    std::vector<std::size_t> test;
    nlohmann::json provenance;

    std::vector<const Sample*> split(bool training) const;
    int num_classes() const;
};

// `count` phantoms with seeds spec.seed, spec.seed + 1, ...; train gets
// round(ratio * count) of them after a shuffle seeded by `split_seed`.
Dataset make_synthetic_dataset(const PhantomSpec& spec, int count, double split_ratio, std::uint64_t split_seed);

// Pairs X.nii[.gz] with X_mask.nii[.gz] in `dir`.
Dataset make_nifti_dataset(const std::filesystem::path& dir, int num_classes, double split_ratio, std::uint64_t split_seed);

// Builds a dataset from {"source": "synthetic"|"nifti", ...}.
Dataset make_dataset(const nlohmann::json& cfg);

}  // namespace ipseg::train
