#include "trainer/config.hpp"

#include <cmath>

#include "common/error.hpp"

namespace ipseg::train {

const char* pipeline_name(Pipeline p)
{
    switch (p) {
    case Pipeline::Ip: return "ip";
    case Pipeline::Slice2d: return "slice2d";
    case Pipeline::Vol3d: return "vol3d";
    }
    return "unknown";
}

Pipeline parse_pipeline(const std::string& name)
{
    if (name == "ip")
        return Pipeline::Ip;
    if (name == "slice2d")
        return Pipeline::Slice2d;
    if (name == "vol3d")
        return Pipeline::Vol3d;
    throw Error(ErrorCode::ConfigInvalid, "unknown pipeline '" + name + "' (expected ip, slice2d or vol3d)");
}

void HyperParams::validate() const
{
    auto fail = [](const std::string& why) { throw Error(ErrorCode::BadHyperparameters, why); };
    if (epochs < 0)
        fail("epochs must be >= 0");
    if (batch_size < 1)
        fail("batch_size must be >= 1");
    optimizer.validate();
    if (!(alpha >= 0.0) || !(beta >= 0.0) || std::abs(alpha + beta - 1.0) > 1e-9)
        fail("tversky alpha and beta must be >= 0 and sum to 1");
    if (!(intensity_scale > 0.0) || !std::isfinite(intensity_scale))
        fail("intensity_scale must be positive");
    if (!std::isfinite(cvp.threshold))
        fail("cvp threshold must be finite");
}

void to_json(nlohmann::json& j, const HyperParams& h)
{
    j = {{"epochs", h.epochs},
         {"learning_rate", h.optimizer.learning_rate},
         {"optimizer", nn::optimizer_name(h.optimizer.kind)},
         {"adam_beta1", h.optimizer.beta1},
         {"adam_beta2", h.optimizer.beta2},
         {"adam_epsilon", h.optimizer.epsilon},
         {"batch_size", h.batch_size},
         {"loss", h.loss == LossKind::Tversky ? "tversky" : "dice"},
         {"alpha", h.alpha},
         {"beta", h.beta},
         {"cvp_threshold", h.cvp.threshold},
         {"cvp_mode", ipcore::to_string(h.cvp.mode)},
         {"axis", h.axis.to_string()},
         {"intensity_scale", h.intensity_scale},
         {"seed", h.seed}};
}

void from_json(const nlohmann::json& j, HyperParams& h)
{
    HyperParams d;
    h.epochs = j.value("epochs", d.epochs);
    h.optimizer.learning_rate = j.value("learning_rate", d.optimizer.learning_rate);
    h.optimizer.kind = nn::parse_optimizer(j.value("optimizer", std::string(nn::optimizer_name(d.optimizer.kind))));
    h.optimizer.beta1 = j.value("adam_beta1", d.optimizer.beta1);
    h.optimizer.beta2 = j.value("adam_beta2", d.optimizer.beta2);
    h.optimizer.epsilon = j.value("adam_epsilon", d.optimizer.epsilon);
    h.batch_size = j.value("batch_size", d.batch_size);
    const std::string loss = j.value("loss", std::string("tversky"));
    if (loss != "tversky" && loss != "dice")
        throw Error(ErrorCode::BadHyperparameters, "loss must be \"tversky\" or \"dice\"");
    h.loss = loss == "tversky" ? LossKind::Tversky : LossKind::Dice;
    h.alpha = j.value("alpha", d.alpha);
    h.beta = j.value("beta", d.beta);
    h.cvp.threshold = j.value("cvp_threshold", d.cvp.threshold);
    h.cvp.mode = ipcore::parse_cvp_mode(j.value("cvp_mode", ipcore::to_string(d.cvp.mode)));
    h.axis = volio::AxisSpec::parse(j.value("axis", d.axis.to_string()));
    h.intensity_scale = j.value("intensity_scale", d.intensity_scale);
    h.seed = j.value("seed", d.seed);
}

nlohmann::json Checkpoint::config_json() const { return {{"pipeline", pipeline_name(pipeline)}, {"net", net}, {"hyper", hp}}; }

}  // namespace ipseg::train
