#include <amt/task.hpp>

#include <doctest.h>

#include "../support/random_dag.hpp"

#include <atomic>
#include <chrono>
#include <thread>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

std::uint64_t spawn_tree(int depth)
{
    if (depth == 0)
        return 1;
    auto left = amt::spawn([depth] { return spawn_tree(depth - 1); });
    auto right = amt::spawn([depth] { return spawn_tree(depth - 1); });
    return left.get() + right.get();
}

}    // namespace

TEST_CASE("spawn returns the task result")
{
    amt::runtime rt(2);
    CHECK(rt.spawn([] { return 42; }).get() == 42);
}

TEST_CASE("spawn propagates a task error into the future")
{
    amt::runtime rt(2);
    auto f = rt.spawn([]() -> int { throw std::runtime_error("x"); });
    CHECK_THROWS_WITH_AS(f.get(), "x", std::runtime_error);
}

TEST_CASE("10000 spawns each increment a shared counter once")
{
    amt::runtime rt(4);
    std::atomic<int> counter{0};
    std::vector<amt::future<void>> fs;
    fs.reserve(10000);
    for (int i = 0; i != 10000; ++i)
        fs.push_back(rt.spawn([&] { counter.fetch_add(1); }));
    amt::when_all(std::move(fs)).get();
    CHECK(counter.load() == 10000);
}

TEST_CASE("spawn after shutdown is rejected")
{
    amt::runtime rt(1);
    rt.shutdown();
    CHECK_THROWS_AS(rt.spawn([] { return 1; }), amt::rejected_error);
}

TEST_CASE("then chains a continuation")
{
    amt::runtime rt(2);
    CHECK(amt::make_ready_future(2).then([](int x) { return x + 3; }).get() ==
        5);
}

TEST_CASE("then bypasses the continuation on fault")
{
    amt::runtime rt(2);
    bool called = false;
    auto f = amt::make_exceptional_future<int>(
        std::make_exception_ptr(std::runtime_error("e")));
    auto g = f.then([&](int x) {
        called = true;
        return x;
    });
    CHECK_THROWS_WITH(g.get(), "e");
    CHECK_FALSE(called);
}

TEST_CASE("1000 chained then(+1) on ready(0)")
{
    amt::runtime rt(2);
    auto f = amt::make_ready_future(0);
    for (int i = 0; i != 1000; ++i)
        f = f.then([](int x) { return x + 1; });
    int expected = 0;
    for (int i = 0; i != 1000; ++i)
        expected += 1;
    CHECK(f.get() == expected);
}

TEST_CASE("consuming a future twice is a usage error")
{
    amt::runtime rt(1);
    auto f = amt::make_ready_future(1);
    CHECK(f.get() == 1);
    CHECK_THROWS_AS(f.get(), amt::usage_error);
    auto g = amt::make_ready_future(2);
    auto h = g.then([](int x) { return x; });
    CHECK_THROWS_AS(g.then([](int x) { return x; }), amt::usage_error);
    CHECK(h.get() == 2);
}

TEST_CASE("when_all of nothing is immediately ready")
{
    auto f = amt::when_all(std::vector<amt::future<int>>{});
    CHECK(f.is_ready());
    CHECK(f.get().empty());
}

TEST_CASE("when_all keeps input order")
{
    std::vector<amt::future<int>> fs;
    fs.push_back(amt::make_ready_future(1));
    fs.push_back(amt::make_ready_future(2));
    CHECK(amt::when_all(std::move(fs)).get() == std::vector<int>{1, 2});
}

TEST_CASE("when_all over 64 partial sums of 1..6400")
{
    // arithmetic-series oracle
    std::int64_t const oracle = 6400LL * 6401LL / 2;
    REQUIRE(oracle == 20483200);

    amt::runtime rt(4);
    std::vector<amt::future<std::int64_t>> parts;
    for (int c = 0; c != 64; ++c)
    {
        parts.push_back(rt.spawn([c] {
            std::int64_t s = 0;
            for (int i = c * 100 + 1; i <= (c + 1) * 100; ++i)
                s += i;
            return s;
        }));
    }
    auto all = amt::when_all(std::move(parts)).get();
    CHECK(std::accumulate(all.begin(), all.end(), std::int64_t{0}) == oracle);
}

TEST_CASE("when_all faults if any input faults")
{
    amt::runtime rt(2);
    std::vector<amt::future<int>> fs;
    fs.push_back(rt.spawn([] { return 1; }));
    fs.push_back(rt.spawn([]() -> int { throw std::runtime_error("bad"); }));
    CHECK_THROWS_WITH(amt::when_all(std::move(fs)).get(), "bad");
}

TEST_CASE("get on ready and faulted futures")
{
    CHECK(amt::make_ready_future(7).get() == 7);
    auto f = amt::make_exceptional_future<int>(
        std::make_exception_ptr(std::logic_error("e")));
    CHECK_THROWS_AS(f.get(), std::logic_error);
}

TEST_CASE("get inside a task suspends instead of blocking the only worker")
{
    auto status = amt::run_with_workers(1, [] {
        amt::promise<int> p;
        auto f = p.get_future();
        auto consumer = amt::spawn([f = std::move(f)]() mutable {
            return f.get() * 2;
        });
        auto producer = amt::spawn([p = std::move(p)]() mutable {
            p.set_value(21);
        });
        producer.get();
        if (consumer.get() != 42)
            throw std::runtime_error("wrong value");
    });
    CHECK(status.ok());
}

TEST_CASE("run_with_workers terminates a depth-10 spawn tree on one worker")
{
    std::uint64_t leaves = 0;
    auto status =
        amt::run_with_workers(1, [&] { leaves = spawn_tree(10); });
    CHECK(status.ok());
    CHECK(leaves == 1024);
}

TEST_CASE("run_with_workers basics")
{
    CHECK(amt::run_with_workers(4, [] {}).ok());
    CHECK_THROWS_AS(amt::run_with_workers(0, [] {}), amt::configuration_error);
    auto bad =
        amt::run_with_workers(2, [] { throw std::runtime_error("root"); });
    CHECK(bad.code != 0);
    CHECK(bad.message == "root");
}

TEST_CASE("run_with_workers drains detached tasks")
{
    std::atomic<int> done{0};
    auto status = amt::run_with_workers(2, [&] {
        for (int i = 0; i != 100; ++i)
            amt::spawn([&] {
                amt::this_task::yield();
                done.fetch_add(1);
            });
    });
    CHECK(status.ok());
    CHECK(done.load() == 100);
}

TEST_CASE("mutex: holder waiting on a child that contends, single worker")
{
    auto status = amt::run_with_workers(1, [] {
        amt::mutex m;
        int shared = 0;
        m.lock();
        auto contender = amt::spawn([&] {
            std::lock_guard lk(m);
            shared += 10;
        });
        auto helper = amt::spawn([] { return 5; });
        shared += helper.get();
        m.unlock();
        contender.get();
        if (shared != 15)
            throw std::runtime_error("mutual exclusion broken");
    });
    CHECK(status.ok());
}

TEST_CASE("mutex serializes many tasks that suspend inside the section")
{
    for (std::size_t workers : {1u, 2u, 4u})
    {
        amt::mutex m;
        int inside = 0;
        int max_inside = 0;
        long total = 0;
        auto status = amt::run_with_workers(workers, [&] {
            std::vector<amt::future<void>> fs;
            for (int i = 0; i != 200; ++i)
            {
                fs.push_back(amt::spawn([&, i] {
                    std::lock_guard lk(m);
                    ++inside;
                    max_inside = std::max(max_inside, inside);
                    total += amt::spawn([i] { return i; }).get();
                    amt::this_task::yield();
                    --inside;
                }));
            }
            amt::when_all(std::move(fs)).get();
        });
        CHECK(status.ok());
        CHECK(max_inside == 1);
        CHECK(total == 199 * 200 / 2);
    }
}

TEST_CASE("mutex hands ownership to waiters in FIFO order")
{
    amt::runtime rt(1);
    amt::mutex m;
    std::vector<int> order;
    m.lock();
    std::vector<amt::future<void>> fs;
    for (int i = 0; i != 5; ++i)
        fs.push_back(rt.spawn([&, i] {
            std::lock_guard lk(m);
            order.push_back(i);
        }));
    // Let every contender reach the wait queue.
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    m.unlock();
    amt::when_all(std::move(fs)).get();
    // Tasks were spawned from outside, so they start in submission order.
    CHECK(order == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("unlocking an unlocked mutex is a usage error")
{
    amt::mutex m;
    CHECK_THROWS_AS(m.unlock(), amt::usage_error);
    CHECK(m.try_lock());
    CHECK_FALSE(m.try_lock());
    m.unlock();
}

using amt::testing::build_dag;
using amt::testing::evaluate_serial;
using amt::testing::random_dag;


TEST_CASE("random then/when_all DAGs match serial evaluation")
{
    std::mt19937_64 rng(20231114);
    for (std::size_t workers : {1u, 2u, 4u})
    {
        amt::runtime rt(workers);
        for (int trial = 0; trial != 60; ++trial)
        {
            auto dag = random_dag(rng, 6);
            std::uint64_t const expected = evaluate_serial(*dag);
            auto got = rt.spawn([&] { return build_dag(*dag).get(); }).get();
            CHECK(got == expected);
        }
    }
}

TEST_CASE("instrumented tasks execute exactly once")
{
    std::mt19937 rng(7);
    for (int run = 0; run != 1000; ++run)
    {
        std::size_t const workers = 1 + rng() % 4;
        std::size_t const n = 1 + rng() % 40;
        std::vector<std::atomic<int>> hits(n);
        auto status = amt::run_with_workers(workers, [&] {
            std::vector<amt::future<void>> fs;
            for (std::size_t i = 0; i != n; ++i)
                fs.push_back(amt::spawn([&, i] {
                    if (i % 3 == 0)
                        amt::this_task::yield();
                    hits[i].fetch_add(1);
                }));
            amt::when_all(std::move(fs)).get();
        });
        REQUIRE(status.ok());
        for (auto const& h : hits)
            REQUIRE(h.load() == 1);
    }
}

TEST_CASE("continuation observes writes made before completion")
{
    amt::runtime rt(4);
    for (int i = 0; i != 200; ++i)
    {
        auto data = std::make_shared<std::vector<int>>();
        auto f = rt.spawn([data] {
            data->assign(100, 7);
            return 3;
        });
        auto g = f.then([data](int x) {
            return x + std::accumulate(data->begin(), data->end(), 0);
        });
        REQUIRE(g.get() == 703);
    }
}
