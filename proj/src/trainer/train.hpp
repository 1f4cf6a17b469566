#pragma once

#include <functional>
#include <string>
#include <vector>

#include "netbuild/model.hpp"
#include "segloss/metrics.hpp"
#include "trainer/config.hpp"
#include "trainer/dataset.hpp"

namespace ipseg::train {

struct EpochRecord {
    int epoch = 0;  // 1-based
    double loss = 0.0;
    double seconds = 0.0;
};

std::string history_csv(const std::vector<EpochRecord>& history);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains epochs [resume->epoch, hp.epochs). With `resume`, model, optimizer
// and shuffle RNG continue from the checkpoint; its pipeline and network must match.
TrainResult train(Pipeline pipeline, const net::NetConfig& cfg, const Dataset& data, const HyperParams& hp, const Checkpoint* resume = nullptr,
                  const EpochCallback& on_epoch = {});

// Hard per-pixel argmax predictions on the test split, scored against the
// pipeline's ground truth (project_mask for ip, the volume mask otherwise).
loss::MetricReport evaluate(const Checkpoint& ck, const Dataset& data);

// Rebuilds the network a checkpoint was taken from and loads its tensors.
net::Model<float> restore_model(const Checkpoint& ck);
net::Network build_network(Pipeline pipeline, const net::NetConfig& cfg);

}  // namespace ipseg::train
