#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "../oracles/projection_oracle.hpp"
#include "common/error.hpp"
#include "common/parallel.hpp"
#include "ipcore/projection.hpp"
#include "test_support.hpp"
#include "volio/nifti.hpp"

using namespace ipseg;
using namespace ipseg::ipcore;
using volio::Dims3;

namespace {

Volume3D ray_volume(std::vector<float> ray)
{
    const auto n = static_cast<std::int64_t>(ray.size());
    return Volume3D(Dims3{1, 1, n}, std::move(ray));
}

bool same(const Image2D& img, const oracle::Plane& p)
{
    if (img.dims[0] != p.w || img.dims[1] != p.h)
        return false;
    for (std::int64_t j = 0; j < p.h; ++j)
        for (std::int64_t i = 0; i < p.w; ++i)
            if (static_cast<double>(img.at(i, j)) != p.at(i, j))
                return false;
    return true;
}

}  // namespace

TEST_CASE("worked CVP examples")
{
    CvpConfig literal{4.0, CvpMode::Eq1Literal};
    CHECK(cvp(ray_volume({1, 5, 3}), 2, literal).data[0] == 0.0f);
    CHECK(cvp(ray_volume({1, 3, 2}), 2, literal).data[0] == 3.0f);
    CHECK(cvp(ray_volume({4, 4}), 2, literal).data[0] == 4.0f);

    CvpConfig lmip{4.0, CvpMode::ProseLmip};
    CHECK(cvp(ray_volume({1, 5, 3, 7, 2}), 2, lmip).data[0] == 5.0f);
    CHECK(cvp(ray_volume({1, 3, 2}), 2, lmip).data[0] == 0.0f);
    CHECK(cvp(ray_volume({9, 1, 1}), 2, lmip).data[0] == 9.0f);

    CHECK(mip(ray_volume({1, 5, 3}), 2).data[0] == 5.0f);
    CHECK(min_ip(ray_volume({1, 5, 3}), 2).data[0] == 1.0f);
    CHECK(avg_ip(ray_volume({1, 5, 3}), 2).data[0] == 3.0f);
}

TEST_CASE("projections match the coordinate-loop oracle")
{
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        Rng rng(seed);
        auto dims = testsupport::random_dims(rng, 9);
        auto vol = testsupport::random_volume(rng, dims, 0.0, 300.0);
        double thr = rng.uniform(50.0, 250.0);
        for (int axis = 0; axis < 3; ++axis) {
            CHECK(same(mip(vol, axis), oracle::project(vol, axis, oracle::Reduce::Max)));
            CHECK(same(min_ip(vol, axis), oracle::project(vol, axis, oracle::Reduce::Min)));
            CHECK(same(avg_ip(vol, axis), oracle::project(vol, axis, oracle::Reduce::Mean)));
            CHECK(same(cvp(vol, axis, {thr, CvpMode::Eq1Literal}), oracle::project(vol, axis, oracle::Reduce::CvpLiteral, thr)));
            CHECK(same(cvp(vol, axis, {thr, CvpMode::ProseLmip}), oracle::project(vol, axis, oracle::Reduce::CvpLocalMax, thr)));
        }
    }
}

TEST_CASE("min <= avg <= max and cvp is bounded by mip")
{
    for (std::uint64_t seed = 100; seed < 130; ++seed) {
        Rng rng(seed);
        auto vol = testsupport::random_volume(rng, testsupport::random_dims(rng, 8), -50.0, 400.0);
        for (int axis = 0; axis < 3; ++axis) {
            auto lo = min_ip(vol, axis), av = avg_ip(vol, axis), hi = mip(vol, axis);
            auto c = cvp(vol, axis, {130.0, CvpMode::Eq1Literal});
            for (std::size_t p = 0; p < hi.data.size(); ++p) {
                CHECK(lo.data[p] <= av.data[p]);
                CHECK(av.data[p] <= hi.data[p]);
                CHECK((c.data[p] == 0.0f || c.data[p] == hi.data[p]));
            }
        }
    }
}

TEST_CASE("max and min are invariant to ray permutation; mean up to rounding")
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        auto n = 2 + static_cast<std::int64_t>(rng.below(20));
        Dims3 dims{3, 2, n};
        auto vol = testsupport::random_volume(rng, dims);
        std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
        for (std::int64_t k = 0; k < n; ++k)
            perm[static_cast<std::size_t>(k)] = k;
        for (std::size_t k = perm.size() - 1; k > 0; --k)
            std::swap(perm[k], perm[rng.below(k + 1)]);
        Volume3D shuffled(dims);
        for (std::int64_t z = 0; z < n; ++z)
            for (std::int64_t y = 0; y < 2; ++y)
                for (std::int64_t x = 0; x < 3; ++x)
                    shuffled.at(x, y, z) = vol.at(x, y, perm[static_cast<std::size_t>(z)]);
        CHECK(mip(vol, 2).data == mip(shuffled, 2).data);
        CHECK(min_ip(vol, 2).data == min_ip(shuffled, 2).data);
        auto a = avg_ip(vol, 2), b = avg_ip(shuffled, 2);
        for (std::size_t p = 0; p < a.data.size(); ++p)
            CHECK(a.data[p] == doctest::Approx(b.data[p]).epsilon(1e-6));
    }
}

TEST_CASE("doubling the volume along the ray leaves mip, avg and min unchanged")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        auto dims = testsupport::random_dims(rng, 6);
        auto vol = testsupport::random_volume(rng, dims);
        Dims3 twice{dims[0], dims[1], 2 * dims[2]};
        Volume3D big(twice);
        for (std::int64_t z = 0; z < twice[2]; ++z)
            for (std::int64_t y = 0; y < dims[1]; ++y)
                for (std::int64_t x = 0; x < dims[0]; ++x)
                    big.at(x, y, z) = vol.at(x, y, z % dims[2]);
        CHECK(mip(vol, 2).data == mip(big, 2).data);
        CHECK(min_ip(vol, 2).data == min_ip(big, 2).data);
        auto a = avg_ip(vol, 2), b = avg_ip(big, 2);
        for (std::size_t p = 0; p < a.data.size(); ++p)
            CHECK(a.data[p] == doctest::Approx(b.data[p]).epsilon(1e-6));
    }
}

TEST_CASE("output does not depend on the worker count")
{
    Rng rng(3);
    auto vol = testsupport::random_volume(rng, {40, 33, 17});
    auto saved = thread_count();
    set_thread_count(1);
    auto one = compose_ip(vol, 0, {});
    set_thread_count(4);
    auto four = compose_ip(vol, 0, {});
    set_thread_count(saved);
    for (std::size_t c = 0; c < 3; ++c)
        CHECK(one.channels[c].data == four.channels[c].data);
}

TEST_CASE("composed image layout")
{
    Rng rng(1);
    auto vol = testsupport::random_volume(rng, {64, 64, 32}, 0.0, 400.0);
    auto img = compose_ip(vol, 0, {});
    CHECK(img.channel_names == std::vector<std::string>{"cvp", "avgip", "mip"});
    CHECK(img.dims()[0] == 64);
    CHECK(img.dims()[1] == 32);
    CHECK(img.channels[2].data == mip(vol, 0).data);
}

TEST_CASE("mask projection keeps the largest class on each ray")
{
    Rng rng(8);
    auto m = testsupport::random_mask(rng, {5, 4, 6}, 4);
    for (int axis = 0; axis < 3; ++axis) {
        auto p = project_mask(m, axis);
        auto rem = volio::remaining_axes(axis);
        for (std::int64_t j = 0; j < p.dims[1]; ++j)
            for (std::int64_t i = 0; i < p.dims[0]; ++i) {
                std::uint8_t best = 0;
                for (std::int64_t k = 0; k < m.dims()[static_cast<std::size_t>(axis)]; ++k) {
                    std::array<std::int64_t, 3> c{};
                    c[static_cast<std::size_t>(axis)] = k;
                    c[static_cast<std::size_t>(rem[0])] = i;
                    c[static_cast<std::size_t>(rem[1])] = j;
                    best = std::max(best, m.at(c[0], c[1], c[2]));
                }
                CHECK(p.at(i, j) == best);
            }
    }
}

TEST_CASE("writers")
{
    auto dir = testsupport::temp_dir("ipcore_io");
    Rng rng(2);
    auto vol = testsupport::random_volume(rng, {6, 7, 5});
    auto img = compose_ip(vol, 1, {});
    auto paths = write_ip_nifti(img, dir / "case");
    REQUIRE(paths.size() == 3);
    CHECK(paths[0].filename() == "case_cvp.nii");
    CHECK(paths[1].filename() == "case_avgip.nii");
    CHECK(paths[2].filename() == "case_mip.nii");
    auto mipvol = volio::read_nifti(paths[2]);
    CHECK(mipvol.dims() == Dims3{6, 5, 1});
    CHECK(std::equal(mipvol.data().begin(), mipvol.data().end(), img.channels[2].data.begin()));

    write_ip_bin(img, dir / "case.bin");
    auto back = read_ip_bin(dir / "case.bin");
    CHECK(back.channel_names == img.channel_names);
    for (std::size_t c = 0; c < 3; ++c)
        CHECK(back.channels[c].data == img.channels[c].data);
    CHECK(std::filesystem::file_size(dir / "case.bin") == 3 * 6 * 5 * sizeof(float));

    std::filesystem::resize_file(dir / "case.bin", 10);
    try {
        read_ip_bin(dir / "case.bin");
        FAIL("expected Truncated");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Truncated);
    }
}

TEST_CASE("argument errors")
{
    Volume3D vol(Dims3{2, 2, 2});
    CHECK_THROWS_AS(mip(vol, 3), Error);
    CHECK_THROWS_AS(cvp(vol, 0, {NAN, CvpMode::Eq1Literal}), Error);
    CHECK(parse_cvp_mode("prose-lmip") == CvpMode::ProseLmip);
    CHECK_THROWS_AS(parse_cvp_mode("nope"), Error);
}
