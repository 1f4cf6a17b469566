#include "trainer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "volio/nifti.hpp"

namespace ipseg::train {

namespace fs = std::filesystem;

std::vector<const Sample*> Dataset::split(bool training) const
{
    std::vector<const Sample*> out;
    for (auto i : training ? train : test)
        out.push_back(&samples.at(i));
    return out;
}

int Dataset::num_classes() const
{
    int k = 2;
    for (const auto& s : samples)
        k = std::max(k, s.mask.num_classes());
    return k;
}

namespace {

void assign_split(Dataset& ds, double ratio, std::uint64_t seed)
{
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "split ratio must be in [0, 1]");
    std::vector<std::size_t> order(ds.samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(order.size())));
    ds.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    ds.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(ds.train.begin(), ds.train.end());
    std::sort(ds.test.begin(), ds.test.end());
    ds.provenance["split_ratio"] = ratio;
    ds.provenance["split_seed"] = seed;
}

// "X.nii" / "X.nii.gz" -> "X"; empty for other files.
std::string nifti_stem(const fs::path& p)
{
    const std::string name = p.filename().string();
    for (const char* ext : {".nii.gz", ".nii"}) {
        const std::string e = ext;
        if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0)
            return name.substr(0, name.size() - e.size());
    }
    return {};
}

}  // namespace

Dataset make_synthetic_dataset(const PhantomSpec& spec, int count, double split_ratio, std::uint64_t split_seed)
{
    if (count < 0)
        throw Error(ErrorCode::SpecInvalid, "phantom count must be >= 0");
    Dataset ds;
    for (int i = 0; i < count; ++i) {
        PhantomSpec s = spec;
        s.seed = spec.seed + static_cast<std::uint64_t>(i);
        auto [vol, mask] = synth_phantom(s);
        ds.samples.push_back({"phantom_" + std::to_string(i), std::move(vol), std::move(mask)});
    }
    ds.provenance = {{"source", "synthetic"}, {"phantom", spec}, {"count", count}};
    assign_split(ds, split_ratio, split_seed);
    return ds;
}

Dataset make_nifti_dataset(const fs::path& dir, int num_classes, double split_ratio, std::uint64_t split_seed)
{
    if (!fs::is_directory(dir))
        throw Error(ErrorCode::IoFailure, "not a directory: " + dir.string());
    std::map<std::string, fs::path> images, masks;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file())
            continue;
        const std::string stem = nifti_stem(entry.path());
        if (stem.empty())
            continue;
        if (stem.size() > 5 && stem.ends_with("_mask"))
            masks[stem.substr(0, stem.size() - 5)] = entry.path();
        else
            images[stem] = entry.path();
    }
    for (const auto& [stem, path] : images)
        if (!masks.count(stem))
            throw Error(ErrorCode::PairMissing, "no mask for image '" + stem + "'");
    for (const auto& [stem, path] : masks)
        if (!images.count(stem))
            throw Error(ErrorCode::PairMissing, "no image for mask '" + stem + "_mask'");

    Dataset ds;
    for (const auto& [stem, path] : images) {
        volio::Volume3D vol = volio::read_nifti(path);
        volio::MaskVolume mask = volio::read_mask_nifti(masks.at(stem), num_classes);
        if (vol.dims() != mask.dims())
            throw Error(ErrorCode::DimsMismatch, "image and mask dims differ for '" + stem + "'");
        ds.samples.push_back({stem, std::move(vol), std::move(mask)});
    }
    ds.provenance = {{"source", "nifti"}, {"dir", dir.string()}, {"num_classes", num_classes}};
    assign_split(ds, split_ratio, split_seed);
    return ds;
}

Dataset make_dataset(const nlohmann::json& cfg)
{
    const std::string source = cfg.value("source", std::string("synthetic"));
    const double ratio = cfg.value("split_ratio", 0.8);
    const std::uint64_t seed = cfg.value("split_seed", std::uint64_t{0});
    if (source == "synthetic") {
        const PhantomSpec spec = cfg.value("phantom", PhantomSpec{});
        return make_synthetic_dataset(spec, cfg.value("count", 50), ratio, seed);
    }
    if (source == "nifti") {
        if (!cfg.contains("dir"))
            throw Error(ErrorCode::ConfigInvalid, "nifti dataset needs \"dir\"");
        return make_nifti_dataset(cfg.at("dir").get<std::string>(), cfg.value("num_classes", 3), ratio, seed);
    }
    throw Error(ErrorCode::ConfigInvalid, "unknown dataset source '" + source + "'");
}

}  // namespace ipseg::train
