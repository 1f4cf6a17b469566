#include <doctest.h>

#include <cmath>

#include "../oracles/golden_plan.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"
#include "netbuild/model.hpp"
#include "netbuild/network.hpp"

using namespace ipseg;
using namespace ipseg::net;

namespace {

NetConfig table_config()
{
    NetConfig c;
    c.in_channels = 2;
    c.num_classes = 3;
    c.width_factor = 1.0;
    return c;
}

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an ipseg::Error");
    return ErrorCode::InvalidArgument;
}

// Independent tally: k^r * cin * cout + cout per conv/deconv, 2 * cout per batchnorm.
std::int64_t tally(std::int64_t cin, int k_classes, int depth, std::int64_t base, int r)
{
    auto conv = [r](std::int64_t ci, std::int64_t co, std::int64_t k) {
        std::int64_t kk = 1;
        for (int i = 0; i < r; ++i)
            kk *= k;
        return kk * ci * co + co;
    };
    std::int64_t total = 0, prev = cin;
    for (int l = 0; l <= depth; ++l) {
        const std::int64_t ch = base << l;
        total += conv(prev, ch, 3) + 2 * ch + conv(ch, ch, 3) + 2 * ch;
        prev = ch;
    }
    for (int l = depth - 1; l >= 0; --l) {
        const std::int64_t ch = base << l;
        total += conv(prev, ch, 3);                                  // deconv
        total += conv(2 * ch, ch, 3) + 2 * ch + conv(ch, ch, 3) + 2 * ch;
        prev = ch;
    }
    return total + conv(prev, k_classes, 1);
}

}  // namespace

TEST_CASE("canonical plan agrees with the published table on its consistent rows")
{
    auto plan = shape_plan(build_ipunet(table_config()), {512, 512});
    REQUIRE(plan.rows.size() == 31);
    for (const auto& g : golden::ipunet_rows()) {
        const auto& r = plan.rows[static_cast<std::size_t>(g.no - 1)];
        INFO("row " << g.no);
        CHECK(r.no == g.no);
        CHECK(r.type == g.type);
        CHECK(shape_label(r.output) == g.output);
        CHECK((r.filters > 0 ? std::to_string(r.filters) : std::string()) == g.filter);
        if (golden::self_consistent_rows().count(g.no))
            CHECK(shape_label(r.input) == g.input);
    }
    // reconstructed inputs of the rows that do not chain in the table
    CHECK(shape_label(plan.rows[8].input) == "128X128X256");
    CHECK(shape_label(plan.rows[9].input) == "64X64X256");
    CHECK(shape_label(plan.rows[11].input) == "64X64X512");
    CHECK(shape_label(plan.rows[12].input) == "32X32X512");
    CHECK(shape_label(plan.rows[19].input) == "128X128X256");

    const std::string text = plan.to_text();
    CHECK(text.find("| 1  | Encode | conv   | 512X512X2 ") != std::string::npos);
    CHECK(text.find("1/1X1") != std::string::npos);
    CHECK(plan.to_json()["rows"][2]["stride_size"] == "2/2X2");
}

TEST_CASE("parameter counts")
{
    nn::LayerSpec conv{nn::LayerKind::Conv2d, 2, 64, 3, 1, 1};
    CHECK(conv.param_count() == 1216);

    NetConfig cfg = table_config();
    auto ip = build_ipunet(cfg);
    CHECK(param_count(ip) == tally(2, 3, 4, 64, 2));
    CHECK(param_count(ip) == 34524675);
    CHECK(shape_plan(ip, {512, 512}).total_params() == param_count(ip));

    cfg.in_channels = 3;
    auto ip3 = build_ipunet(cfg);
    auto slice = build_unet2d_slice(cfg);
    CHECK(param_count(ip3) - param_count(slice) == 1152);
    CHECK(shape_plan(slice, {512, 512}).rows[0].params == 3 * 3 * 1 * 64 + 64 + 128);

    auto vol = build_unet3d(cfg);
    CHECK(vol.layers()[0].spec.param_count() == 1792);
    CHECK(param_count(vol) == tally(1, 3, 4, 64, 3));

    NetConfig half = cfg;
    half.width_factor = 0.5;
    CHECK(param_count(build_ipunet(half)) < param_count(ip3));
}

TEST_CASE("width factor rounds up with a floor of one")
{
    NetConfig c;
    c.width_factor = 1.0 / 8;
    CHECK(c.channels(0) == 8);
    CHECK(c.channels(4) == 128);
    c.width_factor = 0.001;
    CHECK(c.channels(0) == 1);
    c.width_factor = 0.3;
    CHECK(c.channels(0) == 20);  // ceil(19.2)
}

TEST_CASE("plan chains for random legal configs")
{
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Rng rng(seed);
        NetConfig c;
        c.depth = 1 + static_cast<int>(rng.below(4));
        c.width_factor = rng.uniform(0.02, 1.0);
        c.in_channels = 1 + static_cast<std::int64_t>(rng.below(4));
        c.num_classes = 2 + static_cast<int>(rng.below(4));
        const std::int64_t unit = std::int64_t{1} << c.depth;
        const bool three = rng.below(2) == 1;
        std::vector<std::int64_t> spatial;
        for (int d = 0; d < (three ? 3 : 2); ++d)
            spatial.push_back(unit * (1 + static_cast<std::int64_t>(rng.below(4))));
        auto net = three ? build_unet3d(c) : build_ipunet(c);
        auto plan = shape_plan(net, spatial);
        INFO("seed " << seed);
        REQUIRE(plan.rows.size() == static_cast<std::size_t>(7 * c.depth + 3));
        for (std::size_t i = 0; i + 1 < plan.rows.size(); ++i) {
            const auto& a = plan.rows[i];
            const auto& b = plan.rows[i + 1];
            if (a.type == "concat") {
                CHECK(a.output.back() == 2 * a.input.back());
            }
            CHECK(a.output == b.input);
        }
        auto last = plan.rows.back().output;
        CHECK(last.back() == c.num_classes);
        last.pop_back();
        CHECK(last == spatial);
        CHECK(plan.total_params() == param_count(net));

        // halving the input halves every spatial extent
        if (spatial[0] % (2 * unit) == 0 && spatial[1] % (2 * unit) == 0 && (!three || spatial[2] % (2 * unit) == 0)) {
            std::vector<std::int64_t> half = spatial;
            for (auto& s : half)
                s /= 2;
            auto hp = shape_plan(net, half);
            for (std::size_t i = 0; i < hp.rows.size(); ++i)
                for (std::size_t d = 0; d + 1 < hp.rows[i].output.size(); ++d)
                    CHECK(2 * hp.rows[i].output[d] == plan.rows[i].output[d]);
        }
    }
}

TEST_CASE("plan errors")
{
    auto net = build_ipunet(table_config());
    CHECK(code_of([&] { shape_plan(net, {100, 512}); }) == ErrorCode::IndivisibleInput);
    CHECK(code_of([&] { shape_plan(net, {64, 64, 64}); }) == ErrorCode::ShapeMismatch);
    NetConfig bad;
    bad.depth = 0;
    CHECK(code_of([&] { build_ipunet(bad); }) == ErrorCode::ConfigInvalid);
    bad = NetConfig{};
    bad.num_classes = 1;
    CHECK(code_of([&] { build_ipunet(bad); }) == ErrorCode::ConfigInvalid);
    bad = NetConfig{};
    bad.width_factor = -1;
    CHECK(code_of([&] { build_ipunet(bad); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("config json round trip")
{
    NetConfig c;
    c.width_factor = 0.125;
    c.dimensionality = Dimensionality::Three;
    c.depth = 3;
    nlohmann::json j = c;
    NetConfig back = j.get<NetConfig>();
    CHECK(back.width_factor == 0.125);
    CHECK(back.dimensionality == Dimensionality::Three);
    CHECK(back.depth == 3);
    CHECK(nlohmann::json(back) == j);
}

TEST_CASE("3D forward keeps the input extent and yields class probabilities")
{
    NetConfig c;
    c.width_factor = 1.0 / 16;
    c.depth = 3;
    Model<float> m(build_unet3d(c), 3);
    Rng rng(1);
    std::vector<float> v(2 * 8 * 8 * 8);
    for (auto& x : v)
        x = static_cast<float>(rng.normal());
    auto y = m.forward(nn::Tensor<float>::from({2, 1, 8, 8, 8}, v), true);
    CHECK(y.shape() == nn::Shape{2, 3, 8, 8, 8});
    for (std::int64_t p = 0; p < 512; ++p) {
        double s = 0;
        for (std::int64_t k = 0; k < 3; ++k)
            s += y.data()[static_cast<std::size_t>(k * 512 + p)];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
    }
    CHECK(code_of([&] { m.forward(nn::Tensor<float>::zeros({1, 1, 8, 8, 6}), false); }) == ErrorCode::IndivisibleInput);
    CHECK(code_of([&] { m.forward(nn::Tensor<float>::zeros({1, 2, 8, 8, 8}), false); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("model state and initialisation")
{
    NetConfig c;
    c.width_factor = 1.0 / 8;
    Model<double> a(build_ipunet(c), 5), b(build_ipunet(c), 5), other(build_ipunet(c), 6);
    CHECK(a.parameter_count() == param_count(a.network()));
    auto sa = a.state(), sb = b.state(), so = other.state();
    REQUIRE(sa.size() == sb.size());
    CHECK(sa.front().name == "enc0.conv1.weight");
    bool differs = false;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        CHECK(sa[i].name == sb[i].name);
        CHECK(std::equal(sa[i].tensor.data().begin(), sa[i].tensor.data().end(), sb[i].tensor.data().begin()));
        differs |= !std::equal(sa[i].tensor.data().begin(), sa[i].tensor.data().end(), so[i].tensor.data().begin());
    }
    CHECK(differs);

    // He-normal spread of the first conv: std = sqrt(2 / (cin * 9))
    auto w = sa.front().tensor.data();
    double s2 = 0;
    for (double x : w)
        s2 += x * x;
    const double sd = std::sqrt(s2 / static_cast<double>(w.size()));
    CHECK(sd == doctest::Approx(std::sqrt(2.0 / 27.0)).epsilon(0.2));
    CHECK(sa[1].name == "enc0.conv1.bias");
    CHECK(sa[1].tensor.data()[0] == 0.0);
}
