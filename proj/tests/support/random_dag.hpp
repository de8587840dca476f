#pragma once

// Random then/when_all expression DAGs and their serial evaluation.

#include <amt/task.hpp>

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

namespace amt::testing {

// Random expression tree over then/when_all with wrap-around arithmetic.
// Futures are single-consumer, so every node feeds exactly one parent.
struct dag_node
{
    enum kind_t
    {
        ready,
        spawned,
        then,
        join
    } kind;
    std::uint64_t a = 0, b = 0;
    std::vector<std::unique_ptr<dag_node>> kids;
};

inline std::unique_ptr<dag_node> random_dag(std::mt19937_64& rng, int depth)
{
    auto n = std::make_unique<dag_node>();
    int const pick = depth == 0 ? static_cast<int>(rng() % 2)
                                : static_cast<int>(rng() % 4);
    n->kind = static_cast<dag_node::kind_t>(pick);
    n->a = rng() | 1;
    n->b = rng();
    if (n->kind == dag_node::then)
        n->kids.push_back(random_dag(rng, depth - 1));
    if (n->kind == dag_node::join)
    {
        std::size_t const k = rng() % 5;
        for (std::size_t i = 0; i != k; ++i)
            n->kids.push_back(random_dag(rng, depth - 1));
    }
    return n;
}

inline std::uint64_t evaluate_serial(dag_node const& n)
{
    switch (n.kind)
    {
    case dag_node::ready:
    case dag_node::spawned:
        return n.b;
    case dag_node::then:
        return evaluate_serial(*n.kids[0]) * n.a + n.b;
    case dag_node::join:
    {
        std::uint64_t acc = n.b;
        for (auto const& k : n.kids)
            acc = acc * 31 + evaluate_serial(*k);
        return acc;
    }
    }
    return 0;
}

inline amt::future<std::uint64_t> build_dag(dag_node const& n)
{
    switch (n.kind)
    {
    case dag_node::ready:
        return amt::make_ready_future(n.b);
    case dag_node::spawned:
        return amt::spawn([b = n.b] { return b; });
    case dag_node::then:
        return build_dag(*n.kids[0]).then(
            [a = n.a, b = n.b](std::uint64_t x) { return x * a + b; });
    case dag_node::join:
    default:
    {
        std::vector<amt::future<std::uint64_t>> in;
        for (auto const& k : n.kids)
            in.push_back(build_dag(*k));
        return amt::when_all(std::move(in))
            .then([b = n.b](std::vector<std::uint64_t> v) {
                std::uint64_t acc = b;
                for (auto x : v)
                    acc = acc * 31 + x;
                return acc;
            });
    }
    }
}


/// Runs `trials` random DAGs of depth 6 on a runtime of `workers` workers;
/// returns the number whose value differs from serial evaluation.
inline int dag_mismatches(std::size_t workers, int trials, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    amt::runtime rt(workers);
    int bad = 0;
    for (int trial = 0; trial != trials; ++trial)
    {
        auto dag = random_dag(rng, 6);
        std::uint64_t const expected = evaluate_serial(*dag);
        auto got = rt.spawn([&] { return build_dag(*dag).get(); }).get();
        if (got != expected)
            ++bad;
    }
    return bad;
}

}    // namespace amt::testing
