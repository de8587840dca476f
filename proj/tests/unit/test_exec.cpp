#include <amt/exec.hpp>
#include <amt/task.hpp>

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

using amt::exec::execution_space;
using amt::exec::grid_view;
using amt::exec::md_extents;
using amt::exec::md_index;

TEST_CASE("parallel_for_md writes row-major indices")
{
    amt::runtime rt(2);
    for (auto space : {execution_space::serial(), execution_space::task_pool(3)})
    {
        grid_view v(md_extents{2, 2});
        amt::exec::parallel_for_md(space, v.extents(), [&](md_index const& i) {
            v[i] = static_cast<double>(i[0] * 2 + i[1]);
        }).get();
        CHECK(v(0, 0) == 0.0);
        CHECK(v(0, 1) == 1.0);
        CHECK(v(1, 0) == 2.0);
        CHECK(v(1, 1) == 3.0);
    }
}

TEST_CASE("serial and task_pool(4) fill an 8x8x8 view identically")
{
    amt::runtime rt(4);
    md_extents ext{8, 8, 8};
    auto kernel_for = [](grid_view& v) {
        return [&v](md_index const& i) {
            v[i] = std::sin(0.1 * i[0]) * std::cos(0.2 * i[1]) + std::sqrt(1.0 + i[2]);
        };
    };
    grid_view a(ext), b(ext);
    auto ka = kernel_for(a);
    auto kb = kernel_for(b);
    amt::exec::parallel_for_md(execution_space::serial(), ext, ka).get();
    amt::exec::parallel_for_md(execution_space::task_pool(4), ext, kb).get();
    CHECK(a == b);
}

TEST_CASE("an empty extent dimension invokes nothing")
{
    amt::runtime rt(2);
    std::atomic<int> calls{0};
    auto k = [&](md_index const&) { calls.fetch_add(1); };
    amt::exec::parallel_for_md(execution_space::serial(), md_extents{3, 0, 4}, k).get();
    amt::exec::parallel_for_md(execution_space::task_pool(4), md_extents{3, 0, 4}, k).get();
    CHECK(calls.load() == 0);
}

TEST_CASE("task_pool invokes each multi-index exactly once")
{
    amt::runtime rt(3);
    md_extents ext{5, 6, 7, 3};
    std::vector<std::atomic<int>> hits(ext.size());
    auto k = [&](md_index const& i) { hits[ext.ravel(i)].fetch_add(1); };
    amt::exec::parallel_for_md(execution_space::task_pool(7), ext, k).get();
    for (auto const& h : hits)
        REQUIRE(h.load() == 1);
}

TEST_CASE("kernel faults settle the completion with aggregate_error")
{
    amt::runtime rt(2);
    auto bad = [](md_index const& i) {
        if (i[0] == 3)
            throw std::runtime_error("cell 3");
    };
    for (auto space : {execution_space::serial(), execution_space::task_pool(4)})
    {
        auto f = amt::exec::parallel_for_md(space, md_extents{8}, bad);
        CHECK_THROWS_AS(f.get(), amt::aggregate_error);
    }
}

TEST_CASE("parallel_reduce sums")
{
    amt::runtime rt(2);
    auto plus = [](double a, double b) { return a + b; };
    auto sp = execution_space::task_pool(2);
    CHECK(amt::exec::parallel_reduce(sp, md_extents{4},
              [](md_index const& i) { return double(i[0]); }, plus, 0.0)
              .get() == 6.0);
    CHECK(amt::exec::parallel_reduce(execution_space::serial(), md_extents{8, 8, 8},
              [](md_index const&) { return 1.0; }, plus, 0.0)
              .get() == 512.0);
}

TEST_CASE("parallel_reduce is bit-identical across spaces for a fixed plan")
{
    amt::runtime rt(4);
    auto plus = [](double a, double b) { return a + b; };
    auto map = [](md_index const& i) {
        return std::exp(-0.01 * double(i[0] * 64 + i[1] * 8 + i[2])) / (1.0 + i[1]);
    };
    md_extents ext{8, 8, 8};
    for (std::size_t chunks : {1u, 5u, 16u, 64u})
    {
        amt::exec::reduce_plan plan{chunks};
        double s = amt::exec::parallel_reduce(execution_space::serial(), ext, map, plus, 0.0, plan).get();
        double t2 = amt::exec::parallel_reduce(execution_space::task_pool(2), ext, map, plus, 0.0, plan).get();
        double t8 = amt::exec::parallel_reduce(execution_space::task_pool(8), ext, map, plus, 0.0, plan).get();
        CHECK(std::memcmp(&s, &t2, sizeof s) == 0);
        CHECK(std::memcmp(&s, &t8, sizeof s) == 0);
    }
}

TEST_CASE("grid_view round-trip and checked access")
{
    grid_view v(md_extents{3, 4, 5});
    std::mt19937_64 rng(3);
    std::vector<double> written;
    for (std::size_t f = 0; f != v.size(); ++f)
    {
        double x = std::uniform_real_distribution<double>(-1, 1)(rng);
        v.at(v.extents().unravel(f)) = x;
        written.push_back(x);
    }
    for (std::size_t f = 0; f != v.size(); ++f)
        REQUIRE(v.at(v.extents().unravel(f)) == written[f]);
    CHECK_THROWS_AS(v.at(md_index{3, 0, 0, 0}), std::out_of_range);
    CHECK_THROWS_AS(v.at(md_index{0, 4, 0, 0}), std::out_of_range);
    CHECK_THROWS_AS(md_extents({1, 2, 3, 4, 5}), amt::configuration_error);
}

TEST_CASE("simd_fma scalar and lane-wise")
{
    using amt::exec::simd_pack;
    CHECK(amt::exec::simd_fma(simd_pack{2.0}, simd_pack{3.0}, simd_pack{4.0}) == simd_pack{10.0});
    simd_pack a{1, 2, 3, 4}, b{5, 6, 7, 8}, c{0.5, 0.25, -1, 2};
    auto wide = amt::exec::simd_fma(a, b, c);
    for (std::size_t i = 0; i != 4; ++i)
        CHECK(wide[i] == amt::exec::simd_fma(simd_pack{a[i]}, simd_pack{b[i]}, simd_pack{c[i]})[0]);
    CHECK_THROWS_AS(amt::exec::simd_fma(simd_pack(4), simd_pack(2), simd_pack(4)), amt::usage_error);
}

TEST_CASE("simd_fma matches the per-lane oracle on random packs")
{
    using amt::exec::simd_pack;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-1e3, 1e3);
    for (int trial = 0; trial != 100000; ++trial)
    {
        std::size_t const w = 1 + rng() % 8;
        simd_pack a(w), b(w), c(w);
        for (std::size_t i = 0; i != w; ++i)
        {
            a[i] = d(rng);
            b[i] = d(rng);
            c[i] = d(rng);
        }
        auto r = amt::exec::simd_fma(a, b, c);
        for (std::size_t i = 0; i != w; ++i)
            REQUIRE(r[i] == std::fma(a[i], b[i], c[i]));
    }
}
