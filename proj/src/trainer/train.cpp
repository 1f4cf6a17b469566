#include "trainer/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include "autonn/optim.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"
#include "ipcore/projection.hpp"
#include "segloss/losses.hpp"

namespace ipseg::train {

using nn::Tensor;

std::string history_csv(const std::vector<EpochRecord>& history)
{
    std::string out = "epoch,loss,seconds\n";
    char buf[96];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.6f\n", r.epoch, r.loss, r.seconds);
        out += buf;
    }
    return out;
}

net::Network build_network(Pipeline pipeline, const net::NetConfig& cfg)
{
    switch (pipeline) {
    case Pipeline::Ip: return net::build_ipunet(cfg);
    case Pipeline::Slice2d: return net::build_unet2d_slice(cfg);
    case Pipeline::Vol3d: return net::build_unet3d(cfg);
    }
    throw Error(ErrorCode::ConfigInvalid, "unknown pipeline");
}

namespace {

// One network input: shape (C, spatial...) plus its label map.
struct Item {
    nn::Shape shape;
    std::vector<float> input;
    std::vector<std::uint8_t> labels;
};

// Items of one volume; for slice2d also what is needed to restack predictions.
struct Prepared {
    std::vector<Item> items;
    int axis = 0;
};

Prepared prepare(Pipeline pipeline, const Sample& s, const HyperParams& hp)
{
    Prepared p;
    const float inv = static_cast<float>(1.0 / hp.intensity_scale);
    auto scaled = [inv](std::span<const float> src, std::vector<float>& dst) {
        for (float v : src)
            dst.push_back(v * inv);
    };
    if (pipeline == Pipeline::Vol3d) {
        const auto& d = s.image.dims();
        Item it{{1, d[2], d[1], d[0]}, {}, {}};
        scaled(s.image.data(), it.input);
        it.labels.assign(s.mask.labels().begin(), s.mask.labels().end());
        p.items.push_back(std::move(it));
        return p;
    }
    p.axis = volio::resolve_axis(s.image, hp.axis);
    if (pipeline == Pipeline::Ip) {
        const ipcore::IPImage img = ipcore::compose_ip(s.image, p.axis, hp.cvp);
        const volio::Mask2D m = ipcore::project_mask(s.mask, p.axis);
        Item it;
        it.shape = {static_cast<std::int64_t>(img.channels.size()), m.dims[1], m.dims[0]};
        for (const auto& ch : img.channels)
            scaled(ch.data, it.input);
        it.labels = m.labels;
        p.items.push_back(std::move(it));
        return p;
    }
    const auto slices = volio::extract_slices(s.image, p.axis);
    const auto masks = volio::extract_mask_slices(s.mask, p.axis);
    for (std::size_t i = 0; i < slices.size(); ++i) {
        Item it;
        it.shape = {1, slices[i].dims[1], slices[i].dims[0]};
        scaled(slices[i].data, it.input);
        it.labels = masks[i].labels;
        p.items.push_back(std::move(it));
    }
    return p;
}

void check_compatible(const net::Network& net, const std::vector<Prepared>& prepared, int data_classes)
{
    const auto& cfg = net.config();
    if (data_classes > cfg.num_classes)
        throw Error(ErrorCode::ConfigMismatch, "data has " + std::to_string(data_classes) + " classes, network predicts " + std::to_string(cfg.num_classes));
    const std::int64_t div = std::int64_t{1} << cfg.depth;
    for (const auto& p : prepared)
        for (const auto& it : p.items) {
            if (it.shape[0] != cfg.in_channels)
                throw Error(ErrorCode::ConfigMismatch, "pipeline produces " + std::to_string(it.shape[0]) + " input channels, network expects " +
                                                           std::to_string(cfg.in_channels));
            if (it.shape.size() != static_cast<std::size_t>(cfg.spatial_rank()) + 1)
                throw Error(ErrorCode::ConfigMismatch, "input rank does not match network dimensionality");
            for (std::size_t d = 1; d < it.shape.size(); ++d)
                if (it.shape[d] % div != 0)
                    throw Error(ErrorCode::ConfigMismatch, "input " + nn::shape_string(it.shape) + " not divisible by 2^depth = " + std::to_string(div));
        }
}

Tensor<float> batch_input(const std::vector<const Item*>& batch, std::vector<std::uint8_t>& labels)
{
    nn::Shape shape{static_cast<std::int64_t>(batch.size())};
    shape.insert(shape.end(), batch[0]->shape.begin(), batch[0]->shape.end());
    Tensor<float> x = Tensor<float>::zeros(shape);
    auto dst = x.data();
    std::size_t off = 0;
    labels.clear();
    for (const Item* it : batch) {
        if (it->shape != batch[0]->shape)
            throw Error(ErrorCode::ShapeMismatch, "batch mixes input shapes " + nn::shape_string(it->shape) + " and " + nn::shape_string(batch[0]->shape));
        std::copy(it->input.begin(), it->input.end(), dst.begin() + static_cast<std::ptrdiff_t>(off));
        off += it->input.size();
        labels.insert(labels.end(), it->labels.begin(), it->labels.end());
    }
    return x;
}

Blob to_blob(const std::string& name, const Tensor<float>& t)
{
    return {name, t.shape(), std::vector<float>(t.data().begin(), t.data().end())};
}

void copy_blob(const Blob& b, std::span<float> dst, const nn::Shape& shape)
{
    if (b.shape != shape || b.data.size() != dst.size())
        throw Error(ErrorCode::ConfigMismatch, "tensor '" + b.name + "' has shape " + nn::shape_string(b.shape) + ", expected " + nn::shape_string(shape));
    std::copy(b.data.begin(), b.data.end(), dst.begin());
}

void load_tensors(net::Model<float>& model, const std::vector<Blob>& blobs)
{
    std::map<std::string, const Blob*> by_name;
    for (const auto& b : blobs)
        by_name[b.name] = &b;
    for (auto& nt : model.state()) {
        auto it = by_name.find(nt.name);
        if (it == by_name.end())
            throw Error(ErrorCode::ConfigMismatch, "checkpoint lacks tensor '" + nt.name + "'");
        copy_blob(*it->second, nt.tensor.data(), nt.tensor.shape());
    }
    if (by_name.size() != model.state().size())
        throw Error(ErrorCode::ConfigMismatch, "checkpoint holds tensors the network does not have");
}

std::vector<std::uint8_t> argmax_channels(const Tensor<float>& probs)
{
    const std::int64_t n = probs.dim(0), k = probs.dim(1);
    const std::int64_t sp = static_cast<std::int64_t>(probs.numel()) / (n * k);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(n * sp));
    const auto p = probs.data();
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t i = 0; i < sp; ++i) {
            std::int64_t best = 0;
            float bv = p[static_cast<std::size_t>(b * k * sp + i)];
            for (std::int64_t c = 1; c < k; ++c) {
                const float v = p[static_cast<std::size_t>((b * k + c) * sp + i)];
                if (v > bv) {
                    bv = v;
                    best = c;
                }
            }
            out[static_cast<std::size_t>(b * sp + i)] = static_cast<std::uint8_t>(best);
        }
    return out;
}

Checkpoint snapshot(Pipeline pipeline, net::Model<float>& model, nn::Optimizer<float>& opt, const HyperParams& hp, std::int64_t epoch, const Rng& rng)
{
    Checkpoint ck;
    ck.pipeline = pipeline;
    ck.net = model.network().config();
    ck.hp = hp;
    ck.epoch = epoch;
    ck.rng_state = rng.state();
    const auto state = model.state();
    for (const auto& nt : state)
        ck.tensors.push_back(to_blob(nt.name, nt.tensor));
    ck.optimizer.kind = opt.config().kind;
    ck.optimizer.steps = opt.steps();
    if (opt.config().kind == nn::OptimizerKind::Adam) {
        for (std::size_t i = 0; i < model.parameters().size(); ++i) {
            const auto& p = model.parameters()[i];
            ck.optimizer.m.push_back({state[i].name, p.shape(), {opt.first_moments()[i].begin(), opt.first_moments()[i].end()}});
            ck.optimizer.v.push_back({state[i].name, p.shape(), {opt.second_moments()[i].begin(), opt.second_moments()[i].end()}});
        }
    }
    return ck;
}

std::uint64_t shuffle_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

}  // namespace

net::Model<float> restore_model(const Checkpoint& ck)
{
    net::Network net = build_network(ck.pipeline, ck.net);
    net::Model<float> model(net, ck.hp.seed);
    load_tensors(model, ck.tensors);
    return model;
}

TrainResult train(Pipeline pipeline, const net::NetConfig& cfg, const Dataset& data, const HyperParams& hp, const Checkpoint* resume,
                  const EpochCallback& on_epoch)
{
    hp.validate();
    net::Network net = build_network(pipeline, cfg);
    if (resume) {
        if (resume->pipeline != pipeline)
            throw Error(ErrorCode::ConfigMismatch, std::string("checkpoint is for pipeline ") + pipeline_name(resume->pipeline));
        if (nlohmann::json(resume->net) != nlohmann::json(net.config()))
            throw Error(ErrorCode::ConfigMismatch, "checkpoint network config differs from the requested one");
        if (resume->optimizer.kind != hp.optimizer.kind)
            throw Error(ErrorCode::ConfigMismatch, "checkpoint optimizer differs from the requested one");
    }
    const auto samples = data.split(true);
    if (samples.empty())
        throw Error(ErrorCode::EmptyDataset, "training split is empty");

    std::vector<Prepared> prepared;
    for (const Sample* s : samples)
        prepared.push_back(prepare(pipeline, *s, hp));
    check_compatible(net, prepared, data.num_classes());
    std::vector<const Item*> items;
    for (const auto& p : prepared)
        for (const auto& it : p.items)
            items.push_back(&it);

    net::Model<float> model(net, hp.seed);
    nn::Optimizer<float> opt(hp.optimizer, model.parameters());
    Rng rng(shuffle_seed(hp.seed));
    std::int64_t start = 0;
    if (resume) {
        load_tensors(model, resume->tensors);
        opt.set_steps(resume->optimizer.steps);
        if (hp.optimizer.kind == nn::OptimizerKind::Adam) {
            if (resume->optimizer.m.size() != model.parameters().size() || resume->optimizer.v.size() != model.parameters().size())
                throw Error(ErrorCode::ConfigMismatch, "checkpoint optimizer state does not match the network");
            for (std::size_t i = 0; i < model.parameters().size(); ++i) {
                const nn::Shape& shape = model.parameters()[i].shape();
                copy_blob(resume->optimizer.m[i], opt.first_moments()[i], shape);
                copy_blob(resume->optimizer.v[i], opt.second_moments()[i], shape);
            }
        }
        rng.set_state(resume->rng_state);
        start = resume->epoch;
    }

    TrainResult result;
    auto& params = model.parameters();
    std::vector<std::size_t> order(items.size());
    std::vector<std::uint8_t> labels;
    for (std::int64_t epoch = start; epoch < hp.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);

        double total = 0.0;
        int batches = 0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(hp.batch_size)) {
            std::vector<const Item*> batch;
            for (std::size_t i = b; i < std::min(order.size(), b + static_cast<std::size_t>(hp.batch_size)); ++i)
                batch.push_back(items[order[i]]);
            Tensor<float> x = batch_input(batch, labels);
            Tensor<float> probs = model.forward(x, true);
            x = Tensor<float>();
            Tensor<float> loss = hp.loss == LossKind::Tversky ? loss::tversky_loss(probs, labels, hp.alpha, hp.beta)
                                                              : loss::dice_loss(probs, labels);
            probs = Tensor<float>();
            const double value = loss.item();
            if (!std::isfinite(value))
                throw Error(ErrorCode::NonFiniteLoss, "loss became " + std::to_string(value) + " at epoch " + std::to_string(epoch + 1));
            nn::backward(loss, std::span<Tensor<float>>(params));
            loss = Tensor<float>();
            opt.step(params);
            for (auto& p : params)
                p.zero_grad();
            total += value;
            ++batches;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        EpochRecord rec{static_cast<int>(epoch + 1), total / batches, secs};
        result.history.push_back(rec);
        if (on_epoch)
            on_epoch(rec);
    }
    result.checkpoint = snapshot(pipeline, model, opt, hp, std::max<std::int64_t>(start, hp.epochs), rng);
    return result;
}

loss::MetricReport evaluate(const Checkpoint& ck, const Dataset& data)
{
    const auto samples = data.split(false);
    if (samples.empty())
        throw Error(ErrorCode::EmptyDataset, "test split is empty");
    net::Model<float> model = restore_model(ck);
    std::vector<Prepared> prepared;
    for (const Sample* s : samples)
        prepared.push_back(prepare(ck.pipeline, *s, ck.hp));
    check_compatible(model.network(), prepared, data.num_classes());

    loss::MetricAccumulator acc(loss::resolve_classes(std::nullopt, ck.net.num_classes));
    nn::NoGradGuard guard;
    std::vector<std::uint8_t> labels;
    for (std::size_t si = 0; si < samples.size(); ++si) {
        const Prepared& p = prepared[si];
        std::vector<std::vector<std::uint8_t>> preds;
        for (const auto& it : p.items) {
            Tensor<float> x = batch_input({&it}, labels);
            preds.push_back(argmax_channels(model.forward(x, false)));
        }
        if (ck.pipeline == Pipeline::Slice2d) {
            std::vector<volio::Mask2D> slices;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                volio::Mask2D m({p.items[i].shape[2], p.items[i].shape[1]}, ck.net.num_classes);
                m.labels = std::move(preds[i]);
                slices.push_back(std::move(m));
            }
            const volio::MaskVolume stacked = volio::stack_mask_slices(slices, p.axis);
            acc.add(stacked.labels(), samples[si]->mask.labels());
        } else {
            acc.add(preds[0], p.items[0].labels);
        }
    }
    return acc.report();
}

}  // namespace ipseg::train
