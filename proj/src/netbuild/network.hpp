#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "autonn/layer_spec.hpp"

namespace ipseg::net {

using nn::LayerKind;
using nn::LayerSpec;

enum class Dimensionality { Two, Three };

struct NetConfig {
    std::int64_t in_channels = 3;  // CVP, AvgIP, MIP
    int num_classes = 3;
    std::int64_t base_width = 64;
    double width_factor = 1.0;
    int depth = 4;
    Dimensionality dimensionality = Dimensionality::Two;
    double activation_slope = 0.01;
    bool batchnorm = true;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.1;

    void validate() const;
    // Feature channels at encoder level `level` (level == depth is the bottleneck):
    // ceil(base_width * width_factor * 2^level), at least 1.
    std::int64_t channels(int level) const;
    int spatial_rank() const { return dimensionality == Dimensionality::Two ? 2 : 3; }
};

void to_json(nlohmann::json& j, const NetConfig& c);
void from_json(const nlohmann::json& j, NetConfig& c);

enum class Phase { Encode, Decode };

struct NetLayer {
    std::string name;
    LayerSpec spec;
    Phase phase = Phase::Encode;
    int level = 0;
    int saves_skip = -1;   // pooling layers: input is kept as skip source for this level
    int concat_skip = -1;  // concat layers: consumes the skip saved for this level
};

/// Layer graph of a UNet: encoder levels, bottleneck, decoder levels wired to
/// their encoder peers, 1x1 head and channel softmax. Holds no parameters.
class Network {
public:
    Network(std::string kind, NetConfig cfg, std::vector<NetLayer> layers);

    const std::string& kind() const { return kind_; }
    const NetConfig& config() const { return cfg_; }
    const std::vector<NetLayer>& layers() const { return layers_; }

private:
    std::string kind_;
    NetConfig cfg_;
    std::vector<NetLayer> layers_;
};

Network build_ipunet(const NetConfig& cfg);
// Same topology fed one slice at a time: in_channels = 1.
Network build_unet2d_slice(const NetConfig& cfg);
// 3D mirror of the 2D topology: conv3d / maxpool3d / deconv3d, in_channels = 1.
Network build_unet3d(const NetConfig& cfg);

struct PlanRow {
    int no = 0;
    std::string name;
    Phase phase = Phase::Encode;
    std::string type;  // conv, max, deconv, concat
    nn::Shape input;   // spatial extents then channels
    std::int64_t filters = 0;
    std::int64_t stride = 0;
    std::int64_t kernel = 0;
    int kernel_rank = 2;
    nn::Shape output;
    std::int64_t params = 0;  // includes the batchnorm that follows a conv
};

struct ShapePlan {
    std::vector<PlanRow> rows;

    std::int64_t total_params() const;
    std::string to_text() const;
    nlohmann::json to_json() const;
};

// "512X512X64" style shape label.
std::string shape_label(const nn::Shape& spatial_then_channels);

// Symbolic forward over the layer list; allocates no tensors. `spatial` is
// (H, W) for 2D networks and (D, H, W) for 3D ones.
ShapePlan shape_plan(const Network& net, const std::vector<std::int64_t>& spatial);

std::int64_t param_count(const Network& net);

}  // namespace ipseg::net
