#include "netbuild/network.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "common/error.hpp"

namespace ipseg::net {

void NetConfig::validate() const
{
    auto fail = [](const std::string& why) { throw Error(ErrorCode::ConfigInvalid, why); };
    if (in_channels < 1)
        fail("in_channels must be >= 1");
    if (num_classes < 2 || num_classes > 255)
        fail("num_classes must be in [2, 255]");
    if (!(width_factor > 0.0 && width_factor <= 1.0))
        fail("width_factor must be in (0, 1]");
    if (base_width < 1 || static_cast<double>(base_width) * width_factor < 1.0 - 1e-12)
        fail("base_width * width_factor must be >= 1");
    if (depth < 1 || depth > 8)
        fail("depth must be in [1, 8]");
    if (!(activation_slope >= 0.0 && activation_slope < 1.0))
        fail("activation slope must be in [0, 1)");
    if (!(bn_epsilon > 0.0))
        fail("batchnorm epsilon must be > 0");
    if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0))
        fail("batchnorm momentum must be in [0, 1]");
}

std::int64_t NetConfig::channels(int level) const
{
    const double exact = static_cast<double>(base_width) * width_factor * std::ldexp(1.0, level);
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(exact - 1e-9)));
}

void to_json(nlohmann::json& j, const NetConfig& c)
{
    j = nlohmann::json{{"in_channels", c.in_channels},
                       {"num_classes", c.num_classes},
                       {"base_width", c.base_width},
                       {"width_factor", c.width_factor},
                       {"depth", c.depth},
                       {"dimensionality", c.dimensionality == Dimensionality::Two ? "2d" : "3d"},
                       {"activation_slope", c.activation_slope},
                       {"batchnorm", c.batchnorm},
                       {"bn_epsilon", c.bn_epsilon},
                       {"bn_momentum", c.bn_momentum}};
}

void from_json(const nlohmann::json& j, NetConfig& c)
{
    NetConfig d;
    c.in_channels = j.value("in_channels", d.in_channels);
    c.num_classes = j.value("num_classes", d.num_classes);
    c.base_width = j.value("base_width", d.base_width);
    c.width_factor = j.value("width_factor", d.width_factor);
    c.depth = j.value("depth", d.depth);
    const std::string dim = j.value("dimensionality", std::string("2d"));
    if (dim != "2d" && dim != "3d")
        throw Error(ErrorCode::ConfigInvalid, "dimensionality must be \"2d\" or \"3d\"");
    c.dimensionality = dim == "2d" ? Dimensionality::Two : Dimensionality::Three;
    c.activation_slope = j.value("activation_slope", d.activation_slope);
    c.batchnorm = j.value("batchnorm", d.batchnorm);
    c.bn_epsilon = j.value("bn_epsilon", d.bn_epsilon);
    c.bn_momentum = j.value("bn_momentum", d.bn_momentum);
}

Network::Network(std::string kind, NetConfig cfg, std::vector<NetLayer> layers)
    : kind_(std::move(kind)), cfg_(cfg), layers_(std::move(layers))
{
    cfg_.validate();
    std::vector<int> saved;
    for (const auto& l : layers_) {
        l.spec.validate();
        if (l.saves_skip >= 0)
            saved.push_back(l.saves_skip);
        if (l.spec.kind == LayerKind::Concat) {
            if (l.concat_skip < 0 || std::find(saved.begin(), saved.end(), l.concat_skip) == saved.end())
                throw Error(ErrorCode::ConfigInvalid, "concat " + l.name + " has no matching encoder source");
        }
    }
}

namespace {

Network build_unet(const std::string& kind, const NetConfig& cfg)
{
    cfg.validate();
    const bool three = cfg.dimensionality == Dimensionality::Three;
    const LayerKind conv_kind = three ? LayerKind::Conv3d : LayerKind::Conv2d;
    const LayerKind pool_kind = three ? LayerKind::MaxPool3d : LayerKind::MaxPool2d;
    const LayerKind deconv_kind = three ? LayerKind::Deconv3d : LayerKind::Deconv2d;

    std::vector<NetLayer> layers;
    auto push = [&](std::string name, LayerSpec spec, Phase phase, int level) {
        NetLayer l;
        l.name = std::move(name);
        l.spec = spec;
        l.phase = phase;
        l.level = level;
        layers.push_back(std::move(l));
        return layers.size() - 1;
    };
    auto conv_block = [&](const std::string& prefix, std::int64_t cin, std::int64_t cout, Phase phase, int level) {
        std::int64_t c = cin;
        for (int i = 1; i <= 2; ++i) {
            const std::string n = std::to_string(i);
            LayerSpec conv{conv_kind, c, cout, 3, 1, 1};
            push(prefix + ".conv" + n, conv, phase, level);
            if (cfg.batchnorm) {
                LayerSpec bn{LayerKind::BatchNorm, cout, cout};
                bn.epsilon = cfg.bn_epsilon;
                bn.momentum = cfg.bn_momentum;
                push(prefix + ".bn" + n, bn, phase, level);
            }
            LayerSpec act{LayerKind::LeakyRelu, cout, cout};
            act.slope = cfg.activation_slope;
            push(prefix + ".act" + n, act, phase, level);
            c = cout;
        }
    };

    for (int l = 0; l < cfg.depth; ++l) {
        const std::int64_t cin = l == 0 ? cfg.in_channels : cfg.channels(l - 1);
        const std::string prefix = "enc" + std::to_string(l);
        conv_block(prefix, cin, cfg.channels(l), Phase::Encode, l);
        LayerSpec pool{pool_kind, cfg.channels(l), cfg.channels(l), 2, 2, 0};
        layers[push(prefix + ".pool", pool, Phase::Encode, l)].saves_skip = l;
    }
    conv_block("bottleneck", cfg.channels(cfg.depth - 1), cfg.channels(cfg.depth), Phase::Encode, cfg.depth);
    for (int l = cfg.depth - 1; l >= 0; --l) {
        const std::string prefix = "dec" + std::to_string(l);
        LayerSpec up{deconv_kind, cfg.channels(l + 1), cfg.channels(l), 3, 2, 1, 1};
        push(prefix + ".up", up, Phase::Decode, l);
        LayerSpec cat{LayerKind::Concat, cfg.channels(l), 2 * cfg.channels(l)};
        layers[push(prefix + ".concat", cat, Phase::Decode, l)].concat_skip = l;
        conv_block(prefix, 2 * cfg.channels(l), cfg.channels(l), Phase::Decode, l);
    }
    LayerSpec head{conv_kind, cfg.channels(0), cfg.num_classes, 1, 1, 0};
    push("head.conv", head, Phase::Decode, 0);
    push("head.softmax", LayerSpec{LayerKind::Softmax, cfg.num_classes, cfg.num_classes}, Phase::Decode, 0);
    return Network(kind, cfg, std::move(layers));
}

}  // namespace

Network build_ipunet(const NetConfig& cfg)
{
    NetConfig c = cfg;
    c.dimensionality = Dimensionality::Two;
    return build_unet("ipunet", c);
}

Network build_unet2d_slice(const NetConfig& cfg)
{
    NetConfig c = cfg;
    c.dimensionality = Dimensionality::Two;
    c.in_channels = 1;
    return build_unet("unet2d_slice", c);
}

Network build_unet3d(const NetConfig& cfg)
{
    NetConfig c = cfg;
    c.dimensionality = Dimensionality::Three;
    c.in_channels = 1;
    return build_unet("unet3d", c);
}

std::string shape_label(const nn::Shape& s)
{
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i)
            out += "X";
        out += std::to_string(s[i]);
    }
    return out;
}

std::int64_t ShapePlan::total_params() const
{
    std::int64_t total = 0;
    for (const auto& r : rows)
        total += r.params;
    return total;
}

namespace {

const char* phase_name(Phase p) { return p == Phase::Encode ? "Encode" : "Decode"; }

std::string stride_size(const PlanRow& r)
{
    if (r.type == "concat")
        return "";
    std::string k = std::to_string(r.kernel);
    for (int i = 1; i < r.kernel_rank; ++i)
        k += "X" + std::to_string(r.kernel);
    return std::to_string(r.stride) + "/" + k;
}

}  // namespace

std::string ShapePlan::to_text() const
{
    const std::vector<std::string> header{"No", "Phase", "Type", "Input", "Filter", "Stride/Size", "Output"};
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows)
        cells.push_back({std::to_string(r.no), phase_name(r.phase), r.type, shape_label(r.input), r.filters > 0 ? std::to_string(r.filters) : "",
                         stride_size(r), shape_label(r.output)});
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : cells)
            width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& row) {
        out << "|";
        for (std::size_t c = 0; c < row.size(); ++c)
            out << " " << std::left << std::setw(static_cast<int>(width[c])) << row[c] << " |";
        out << "\n";
    };
    line(header);
    out << "|";
    for (auto w : width)
        out << std::string(w + 2, '-') << "|";
    out << "\n";
    for (const auto& row : cells)
        line(row);
    out << "Total parameters: " << total_params() << "\n";
    return out.str();
}

nlohmann::json ShapePlan::to_json() const
{
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows)
        rows_json.push_back({{"no", r.no},
                             {"name", r.name},
                             {"phase", phase_name(r.phase)},
                             {"type", r.type},
                             {"input", r.input},
                             {"filter", r.filters},
                             {"stride", r.stride},
                             {"kernel", r.kernel},
                             {"stride_size", stride_size(r)},
                             {"output", r.output},
                             {"params", r.params}});
    return {{"rows", rows_json}, {"total_params", total_params()}};
}

ShapePlan shape_plan(const Network& net, const std::vector<std::int64_t>& spatial)
{
    const NetConfig& cfg = net.config();
    const auto rank = static_cast<std::size_t>(cfg.spatial_rank());
    if (spatial.size() != rank)
        throw Error(ErrorCode::ShapeMismatch, "shape_plan: expected " + std::to_string(rank) + " spatial extents");
    const std::int64_t div = std::int64_t{1} << cfg.depth;
    for (auto e : spatial)
        if (e < 1 || e % div != 0)
            throw Error(ErrorCode::IndivisibleInput, "spatial extent " + std::to_string(e) + " is not divisible by 2^depth = " + std::to_string(div));

    auto display = [](const nn::Shape& nchw) {
        nn::Shape s(nchw.begin() + 2, nchw.end());
        s.push_back(nchw[1]);
        return s;
    };

    nn::Shape h{1, cfg.in_channels};
    h.insert(h.end(), spatial.begin(), spatial.end());
    std::vector<nn::Shape> skips(static_cast<std::size_t>(cfg.depth));
    ShapePlan plan;
    for (const auto& layer : net.layers()) {
        const auto& spec = layer.spec;
        nn::Shape out;
        std::string type;
        switch (spec.kind) {
        case LayerKind::Conv2d:
        case LayerKind::Conv3d: type = "conv"; break;
        case LayerKind::MaxPool2d:
        case LayerKind::MaxPool3d: type = "max"; break;
        case LayerKind::Deconv2d:
        case LayerKind::Deconv3d: type = "deconv"; break;
        case LayerKind::Concat: type = "concat"; break;
        default: break;
        }
        if (layer.saves_skip >= 0)
            skips[static_cast<std::size_t>(layer.saves_skip)] = h;
        if (spec.kind == LayerKind::Concat) {
            const nn::Shape& skip = skips[static_cast<std::size_t>(layer.concat_skip)];
            if (!std::equal(skip.begin() + 2, skip.end(), h.begin() + 2, h.end()))
                throw Error(ErrorCode::ShapeMismatch, layer.name + ": skip source " + shape_label(skip) + " does not match " + shape_label(h));
            out = spec.output_shape(h, skip[1]);
        } else {
            out = spec.output_shape(h);
        }
        if (!type.empty()) {
            PlanRow row;
            row.no = static_cast<int>(plan.rows.size()) + 1;
            row.name = layer.name;
            row.phase = layer.phase;
            row.type = type;
            row.input = display(h);
            row.output = display(out);
            row.filters = (type == "conv" || type == "deconv") ? spec.out_channels : 0;
            row.stride = spec.stride;
            row.kernel = spec.kernel;
            row.kernel_rank = static_cast<int>(rank);
            row.params = spec.param_count();
            plan.rows.push_back(std::move(row));
        } else if (!plan.rows.empty()) {
            plan.rows.back().params += spec.param_count();
        }
        h = std::move(out);
    }
    return plan;
}

std::int64_t param_count(const Network& net)
{
    std::int64_t total = 0;
    for (const auto& l : net.layers())
        total += l.spec.param_count();
    return total;
}

}  // namespace ipseg::net
