#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "autonn/optim.hpp"
#include "ipcore/projection.hpp"
#include "netbuild/network.hpp"
#include "volio/volume.hpp"

namespace ipseg::train {

enum class Pipeline { Ip, Slice2d, Vol3d };

const char* pipeline_name(Pipeline p);
Pipeline parse_pipeline(const std::string& name);

enum class LossKind { Tversky, Dice };

struct HyperParams {
    int epochs = 1000;
    nn::OptimizerConfig optimizer;
    int batch_size = 2;
    LossKind loss = LossKind::Tversky;
    double alpha = 0.3;  // false-positive weight
    double beta = 0.7;   // false-negative weight
    ipcore::CvpConfig cvp;
    volio::AxisSpec axis;
    double intensity_scale = 100.0;  // inputs are divided by this
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const HyperParams& h);
void from_json(const nlohmann::json& j, HyperParams& h);

struct Blob {
    std::string name;
    nn::Shape shape;
    std::vector<float> data;

    bool operator==(const Blob&) const = default;
};

struct OptimizerState {
    nn::OptimizerKind kind = nn::OptimizerKind::Adam;
    std::int64_t steps = 0;
    std::vector<Blob> m;
    std::vector<Blob> v;

    bool operator==(const OptimizerState&) const = default;
};

struct Checkpoint {
    Pipeline pipeline = Pipeline::Ip;
    net::NetConfig net;
    HyperParams hp;
    std::int64_t epoch = 0;
    std::string rng_state;
    std::vector<Blob> tensors;  // parameters, then batchnorm running statistics
    OptimizerState optimizer;

    nlohmann::json config_json() const;
};

}  // namespace ipseg::train
