#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "common/error.hpp"
#include "common/parallel.hpp"
#include "test_support.hpp"
#include "trainer/checkpoint.hpp"
#include "trainer/dataset.hpp"
#include "trainer/phantom.hpp"
#include "trainer/train.hpp"
#include "volio/nifti.hpp"

using namespace ipseg;
using namespace ipseg::train;

namespace {

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

PhantomSpec small_spec()
{
    PhantomSpec s;
    s.dims = {16, 16, 8};
    s.num_lesions = 2;
    s.radius_min = 1.5;
    s.radius_max = 2.5;
    return s;
}

net::NetConfig small_net(int depth = 2)
{
    net::NetConfig c;
    c.width_factor = 1.0 / 16;
    c.depth = depth;
    return c;
}

HyperParams quick_hp(int epochs)
{
    HyperParams hp;
    hp.epochs = epochs;
    hp.optimizer.learning_rate = 1e-2;
    hp.seed = 4;
    return hp;
}

struct SingleThread {
    std::size_t saved = thread_count();
    SingleThread() { set_thread_count(1); }
    ~SingleThread() { set_thread_count(saved); }
};

}  // namespace

TEST_CASE("phantom determinism and labelling")
{
    PhantomSpec s;
    s.dims = {32, 32, 32};
    s.num_lesions = 6;
    auto [v1, m1] = synth_phantom(s);
    auto [v2, m2] = synth_phantom(s);
    CHECK(std::equal(v1.data().begin(), v1.data().end(), v2.data().begin()));
    CHECK(std::equal(m1.labels().begin(), m1.labels().end(), m2.labels().begin()));

    // exhaustive: lesion voxels sit in the lesion band, above every background voxel
    float lesion_lo = 1e30f, background_hi = -1e30f;
    std::set<int> seen;
    for (std::int64_t i = 0; i < v1.size(); ++i) {
        const float x = v1.data()[static_cast<std::size_t>(i)];
        const int l = m1.labels()[static_cast<std::size_t>(i)];
        if (l > 0) {
            lesion_lo = std::min(lesion_lo, x);
            CHECK(x <= s.lesion_max);
            seen.insert(l);
        } else {
            background_hi = std::max(background_hi, x);
        }
    }
    CHECK(lesion_lo >= s.lesion_min);
    CHECK(lesion_lo > background_hi);
    CHECK(seen == std::set<int>{1, 2});

    s.seed = 2;
    auto [v3, m3] = synth_phantom(s);
    CHECK_FALSE(std::equal(v1.data().begin(), v1.data().end(), v3.data().begin()));

    s.num_lesions = 0;
    auto [v4, m4] = synth_phantom(s);
    CHECK(std::all_of(m4.labels().begin(), m4.labels().end(), [](auto l) { return l == 0; }));

    PhantomSpec bad;
    bad.lesion_min = 50;
    CHECK(code_of([&] { synth_phantom(bad); }) == ErrorCode::SpecInvalid);
    bad = PhantomSpec{};
    bad.num_classes = 1;
    CHECK(code_of([&] { synth_phantom(bad); }) == ErrorCode::SpecInvalid);

    nlohmann::json j = small_spec();
    PhantomSpec back = j.get<PhantomSpec>();
    CHECK(nlohmann::json(back) == j);
}

TEST_CASE("synthetic dataset split")
{
    auto spec = small_spec();
    auto a = make_synthetic_dataset(spec, 10, 0.8, 3);
    auto b = make_synthetic_dataset(spec, 10, 0.8, 3);
    auto c = make_synthetic_dataset(spec, 10, 0.8, 4);
    CHECK(a.train.size() == 8);
    CHECK(a.test.size() == 2);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK((a.train != c.train || a.test != c.test));
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.test.begin(), a.test.end());
    CHECK(all.size() == 10);
    CHECK(a.num_classes() == 3);
    CHECK(a.split(false).size() == 2);
}

TEST_CASE("nifti dataset pairing")
{
    auto dir = testsupport::temp_dir("trainer_pairs");
    auto spec = small_spec();
    for (int i = 0; i < 3; ++i) {
        spec.seed = static_cast<std::uint64_t>(i + 1);
        auto [v, m] = synth_phantom(spec);
        volio::write_nifti(v, dir / ("case" + std::to_string(i) + ".nii"));
        volio::write_mask_nifti(m, dir / ("case" + std::to_string(i) + "_mask.nii"));
    }
    auto ds = make_nifti_dataset(dir, 3, 2.0 / 3, 0);
    CHECK(ds.samples.size() == 3);
    CHECK(ds.train.size() == 2);

    volio::write_nifti(volio::Volume3D(volio::Dims3{16, 16, 8}), dir / "orphan.nii");
    try {
        make_nifti_dataset(dir, 3, 0.5, 0);
        FAIL("expected PairMissing");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::PairMissing);
        CHECK(std::string(e.what()).find("orphan") != std::string::npos);
    }
    std::filesystem::remove(dir / "orphan.nii");

    volio::write_mask_nifti(volio::MaskVolume(volio::Dims3{4, 4, 4}, 3), dir / "odd_mask.nii");
    volio::write_nifti(volio::Volume3D(volio::Dims3{16, 16, 8}), dir / "odd.nii");
    CHECK(code_of([&] { make_nifti_dataset(dir, 3, 0.5, 0); }) == ErrorCode::DimsMismatch);
}

TEST_CASE("checkpoint encoding")
{
    auto ds = make_synthetic_dataset(small_spec(), 3, 2.0 / 3, 0);
    auto res = train::train(Pipeline::Ip, small_net(), ds, quick_hp(1));
    const auto& ck = res.checkpoint;
    CHECK(ck.epoch == 1);
    CHECK(ck.optimizer.steps == 1);

    auto dir = testsupport::temp_dir("trainer_ck");
    save_checkpoint(ck, dir / "a.ipun");
    auto back = load_checkpoint(dir / "a.ipun");
    CHECK(back.tensors == ck.tensors);
    CHECK(back.optimizer == ck.optimizer);
    CHECK(back.rng_state == ck.rng_state);
    CHECK(back.config_json() == ck.config_json());
    CHECK(encode_checkpoint(back) == encode_checkpoint(ck));

    std::string bytes = encode_checkpoint(ck);
    CHECK(bytes.substr(0, 4) == "IPUN");

    std::string flipped = bytes;
    flipped[flipped.size() / 2] ^= 0x01;
    CHECK(code_of([&] { decode_checkpoint(flipped); }) == ErrorCode::Corrupt);

    CHECK(code_of([&] { decode_checkpoint(bytes.substr(0, bytes.size() - 9)); }) == ErrorCode::Corrupt);

    std::string magic = bytes;
    magic[0] = 'X';
    CHECK(code_of([&] { decode_checkpoint(magic); }) == ErrorCode::BadMagic);

    std::string newer = bytes;
    newer[4] = static_cast<char>(kCheckpointVersion + 1);
    CHECK(code_of([&] { decode_checkpoint(newer); }) == ErrorCode::VersionUnsupported);
}

TEST_CASE("smoke training on every pipeline")
{
    auto ds = make_synthetic_dataset(small_spec(), 2, 0.5, 0);
    for (auto p : {Pipeline::Ip, Pipeline::Slice2d, Pipeline::Vol3d}) {
        std::vector<int> seen;
        auto res = train::train(p, small_net(), ds, quick_hp(1), nullptr, [&](const EpochRecord& r) { seen.push_back(r.epoch); });
        REQUIRE(res.history.size() == 1);
        CHECK(std::isfinite(res.history[0].loss));
        CHECK(seen == std::vector<int>{1});
        auto report = evaluate(res.checkpoint, ds);
        CHECK(report.per_class.size() == 2);
        CHECK(report.macro.dsc >= 0.0);
        CHECK(report.macro.dsc <= 1.0);
    }
    auto csv = history_csv({{1, 0.5, 0.25}});
    CHECK(csv == "epoch,loss,seconds\n1,0.5,0.250000\n");
}

TEST_CASE("resuming matches an uninterrupted run")
{
    SingleThread st;
    auto ds = make_synthetic_dataset(small_spec(), 4, 0.75, 0);
    auto straight = train::train(Pipeline::Ip, small_net(), ds, quick_hp(4));
    auto first = train::train(Pipeline::Ip, small_net(), ds, quick_hp(2));
    auto dir = testsupport::temp_dir("trainer_resume");
    save_checkpoint(first.checkpoint, dir / "half.ipun");
    auto half = load_checkpoint(dir / "half.ipun");
    auto rest = train::train(Pipeline::Ip, small_net(), ds, quick_hp(4), &half);
    REQUIRE(rest.history.size() == 2);
    CHECK(rest.history[0].epoch == 3);
    CHECK(rest.history[0].loss == straight.history[2].loss);
    CHECK(rest.history[1].loss == straight.history[3].loss);
    CHECK(encode_checkpoint(rest.checkpoint) == encode_checkpoint(straight.checkpoint));

    CHECK(code_of([&] { train::train(Pipeline::Slice2d, small_net(), ds, quick_hp(4), &half); }) == ErrorCode::ConfigMismatch);
    auto other = small_net();
    other.width_factor = 1.0 / 8;
    CHECK(code_of([&] { train::train(Pipeline::Ip, other, ds, quick_hp(4), &half); }) == ErrorCode::ConfigMismatch);
}

TEST_CASE("overfitting one phantom")
{
    auto ds = make_synthetic_dataset(small_spec(), 1, 1.0, 0);
    ds.test = ds.train;
    auto hp = quick_hp(60);
    hp.batch_size = 1;
    auto res = train::train(Pipeline::Ip, small_net(), ds, hp);
    CHECK(res.history.back().loss < res.history.front().loss);
    CHECK(evaluate(res.checkpoint, ds).macro.dsc > 0.9);
}

TEST_CASE("training errors")
{
    auto ds = make_synthetic_dataset(small_spec(), 2, 0.5, 0);
    Dataset empty = ds;
    empty.train.clear();
    CHECK(code_of([&] { train::train(Pipeline::Ip, small_net(), empty, quick_hp(1)); }) == ErrorCode::EmptyDataset);

    auto res = train::train(Pipeline::Ip, small_net(), ds, quick_hp(1));
    Dataset no_test = ds;
    no_test.test.clear();
    CHECK(code_of([&] { evaluate(res.checkpoint, no_test); }) == ErrorCode::EmptyDataset);

    auto two = small_net();
    two.num_classes = 2;
    CHECK(code_of([&] { train::train(Pipeline::Ip, two, ds, quick_hp(1)); }) == ErrorCode::ConfigMismatch);
    auto deep = small_net(4);
    CHECK(code_of([&] { train::train(Pipeline::Vol3d, deep, ds, quick_hp(1)); }) == ErrorCode::ConfigMismatch);

    auto hp = quick_hp(3);
    hp.optimizer.learning_rate = 1e30;
    try {
        train::train(Pipeline::Ip, small_net(), ds, hp);
        FAIL("expected NonFiniteLoss");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFiniteLoss);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }

    HyperParams bad;
    bad.alpha = 0.9;
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::BadHyperparameters);
    CHECK(code_of([] { parse_pipeline("4d"); }) == ErrorCode::ConfigInvalid);

    nlohmann::json j = quick_hp(7);
    CHECK(j.get<HyperParams>().epochs == 7);
    CHECK(nlohmann::json(j.get<HyperParams>()) == j);
}
