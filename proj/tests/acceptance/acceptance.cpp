// Acceptance checks: one PASS / FAIL / SKIP line per criterion.
// Exit status is 0 when no criterion fails.

#include <amt/amr.hpp>
#include <amt/bench.hpp>
#include <amt/distrib.hpp>
#include <amt/exec.hpp>
#include <amt/task.hpp>

#include "../support/parcel_fuzz.hpp"
#include "../support/random_dag.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#ifndef AMT_CLI_PATH
#error "AMT_CLI_PATH must name the amt executable"
#endif

namespace {

enum class verdict
{
    pass,
    fail,
    skip
};

struct outcome
{
    verdict v = verdict::fail;
    std::string detail;
};

struct criterion
{
    int id;
    char const* name;
    double budget_seconds;
    std::function<outcome()> check;
};

std::string fmt(char const* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(char const* f, ...)
{
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

bool same_bits(double a, double b)
{
    return std::memcmp(&a, &b, sizeof a) == 0;
}

outcome result(bool ok, std::string detail)
{
    return {ok ? verdict::pass : verdict::fail, std::move(detail)};
}

// ------------------------------------------------------------------ 1

outcome peak_table()
{
    using namespace amt::bench;
    struct row
    {
        char const* name;
        cpu_spec spec;
        double expected;
    };
    row const rows[] = {{"A64FX", cpus::a64fx, 2764.8}, {"AMD", cpus::amd_epyc, 2867.2},
        {"Intel", cpus::intel_xeon, 1324.8}, {"U74-MC", cpus::u74_mc, 9.6}};
    bool ok = true;
    std::string d;
    for (auto const& r : rows)
    {
        double got = peak_performance(r.spec, r.spec.cores);
        ok = ok && got == r.expected;
        d += fmt("%s %.1f%s ", r.name, got, got == r.expected ? "" : "(!)");
    }
    return result(ok, d + "GFLOP/s");
}

// ------------------------------------------------------------------ 2

outcome maclaurin_accuracy()
{
    using namespace amt::bench;
    amt::runtime rt(2);
    std::mt19937_64 rng(1000);
    std::uniform_real_distribution<double> dx(-0.9, 0.9);
    std::uniform_int_distribution<std::int64_t> dn(1, 100000);
    int over_bound_pos = 0, over_bound_neg = 0, over_tail_bound = 0, divergent = 0;
    for (int i = 0; i != 1000; ++i)
    {
        maclaurin_params p{dx(rng), dn(rng)};
        double s = maclaurin_ln1p(p, paradigm::futures);
        for (paradigm how : {paradigm::for_each, paradigm::sender})
            if (!same_bits(maclaurin_ln1p(p, how), s))
                ++divergent;
        double exact = static_cast<double>(std::log1p(static_cast<long double>(p.x)));
        double ax = std::abs(p.x);
        double err = std::abs(s - exact);
        double first_omitted =
            std::pow(ax, static_cast<double>(p.n + 1)) / static_cast<double>(p.n + 1);
        if (err > first_omitted + 1e-12)
            ++(p.x >= 0 ? over_bound_pos : over_bound_neg);
        // true remainder bound for negative x (all terms share one sign)
        if (err > first_omitted / (1.0 - ax) + 1e-12)
            ++over_tail_bound;
    }
    bool ok = over_bound_pos == 0 && over_bound_neg == 0 && divergent == 0;
    return result(ok,
        fmt("1000 samples: over x^(n+1)/(n+1)+1e-12: %d (x>=0) %d (x<0); over the geometric "
            "tail bound: %d; cross-paradigm bit mismatches: %d",
            over_bound_pos, over_bound_neg, over_tail_bound, divergent));
}

// ------------------------------------------------------------------ 3

outcome scaling_shape()
{
    using namespace amt::bench;
    unsigned hw = std::thread::hardware_concurrency();
    suite_options o;
    o.params = {0.999999, 100000000};
    o.paradigms = {paradigm::futures};
    o.repeats = 3;
    if (hw < 4)
    {
        o.cores = {1};
        o.repeats = 1;
        auto r = run_suite(o);
        return {verdict::skip,
            fmt("host has %u hardware thread(s), criterion needs >= 4; 1-core futures "
                "n=1e8: %.3e FLOP/s",
                hw, r[0].flops())};
    }
    o.cores = {1, 4};
    auto r = run_suite(o);
    double ratio = r[1].flops() / r[0].flops();
    return result(ratio >= 2.5,
        fmt("1 core %.3e, 4 cores %.3e FLOP/s, speedup %.2f (need >= 2.5)", r[0].flops(),
            r[1].flops(), ratio));
}

// ------------------------------------------------------------------ 4

struct process_output
{
    int status = -1;
    std::string text;
};

FILE* start(std::string const& cmd)
{
    return ::popen((cmd + " 2>&1").c_str(), "r");
}

process_output finish(FILE* p)
{
    process_output out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0)
        out.text.append(buf, n);
    int st = ::pclose(p);
    out.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return out;
}

std::string value_of(std::string const& text, std::string const& key)
{
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(key + "=", 0) == 0)
            return line.substr(key.size() + 1);
    return "";
}

outcome distributed_equivalence()
{
    std::string const cli = AMT_CLI_PATH;
    std::string const run = cli + " amr --max-level 2 --stop-step 5 --threads 2";
    auto one = finish(start(run + " --localities 1 --parcelport loopback"));
    auto two = finish(start(run + " --localities 2 --parcelport loopback"));

    auto port = amt::distrib::find_free_tcp_port();
    std::string agas = " --agas 127.0.0.1:" + std::to_string(port);
    FILE* worker =
        start(cli + " serve --worker --parcelport tcp --localities 2 --threads 2" + agas);
    auto sup = finish(start(run + " --localities 2 --parcelport tcp" + agas));
    auto wrk = finish(worker);

    std::string h1 = value_of(one.text, "state_hash");
    std::string h2 = value_of(two.text, "state_hash");
    std::string h3 = value_of(sup.text, "state_hash");
    std::string hw = value_of(wrk.text, "farewell");
    bool ok = one.status == 0 && two.status == 0 && sup.status == 0 && wrk.status == 0 &&
        !h1.empty() && h1 == h2 && h1 == h3 && h1 == hw;
    return result(ok,
        fmt("1 loopback %s, 2 loopback %s, 2 tcp %s (worker saw %s); exit %d/%d/%d/%d",
            h1.c_str(), h2.c_str(), h3.c_str(), hw.c_str(), one.status, two.status, sup.status,
            wrk.status));
}

// ------------------------------------------------------------------ 5

outcome gravity_oracle()
{
    using namespace amt::amr;
    auto tree = octree::uniform(domain_geometry{}, 2);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> rho(1e-3, 1.0);
    double h = tree.geometry().cell_width(2);
    std::vector<double> masses(tree.leaves().size() * sub_cells);
    for (auto& m : masses)
        m = rho(rng) * h * h * h;
    auto g = gravity_tree::build(tree, masses);
    auto points = cell_point_masses(tree, masses);

    std::vector<double> direct(points.size());
    for (std::size_t i = 0; i != points.size(); ++i)
        direct[i] = direct_potential(points, points[i].x);

    double const thetas[] = {0.5, 0.25, 0.1, 0.0};
    double err[4];
    for (int t = 0; t != 4; ++t)
    {
        double worst = 0;
        for (std::size_t i = 0; i != points.size(); ++i)
            worst = std::max(worst,
                std::abs(g.potential(points[i].x, thetas[t]) - direct[i]) / std::abs(direct[i]));
        err[t] = worst;
    }
    bool ok = err[0] <= 0.01 && err[0] > err[1] && err[1] > err[2] && err[2] > err[3];
    return result(ok,
        fmt("%zu leaves, %zu cells; max rel. error theta=0.5: %.2e, 0.25: %.2e, 0.1: %.2e, 0: "
            "%.2e",
            tree.leaves().size(), points.size(), err[0], err[1], err[2], err[3]));
}

// ------------------------------------------------------------------ 6

outcome conservation()
{
    using namespace amt::amr;
    amr_config cfg;
    cfg.max_level = 2;
    run_metrics m;
    std::size_t leaves = 0;
    amt::runtime rt(2);
    amt::distrib::locality_config lc;
    lc.agas_endpoint = "127.0.0.1:29001";
    {
        auto loc = amt::distrib::bootstrap(lc, rt, install);
        simulation sim(*loc, cfg);
        sim.build();
        leaves = sim.tree().leaves().size();
        m = sim.advance(5);
        loc->close();
    }
    return result(m.max_step_mass_drift <= 1e-10,
        fmt("level 2, %zu leaves, 5 steps, reflecting walls: max per-step drift %.2e (need <= "
            "1e-10)",
            leaves, m.max_step_mass_drift));
}

// ------------------------------------------------------------------ 7

outcome wire_robustness()
{
    using namespace amt::distrib;
    std::mt19937_64 rng(77);
    int mismatches = 0;
    for (int i = 0; i != 100000; ++i)
    {
        auto p = amt::testing::random_parcel(rng);
        if (decode_frame(encode_frame(p)) != p)
            ++mismatches;
    }
    int accepted = 0, misnamed = 0;
    for (int i = 0; i != 1000; ++i)
    {
        auto m = amt::testing::mutate(amt::testing::random_parcel(rng), i, rng);
        auto field = amt::testing::rejected_field(m);
        if (field.empty())
            ++accepted;
        else if (!m.expected.empty() && field != m.expected)
            ++misnamed;
    }
    return result(mismatches == 0 && accepted == 0 && misnamed == 0,
        fmt("100000 round trips, %d mismatches; 1000 mutated frames over %d classes: %d "
            "accepted, %d naming the wrong field",
            mismatches, amt::testing::mutation_classes, accepted, misnamed));
}

// ------------------------------------------------------------------ 8

std::uint64_t spawn_tree(int depth)
{
    if (depth == 0)
        return 1;
    auto l = amt::spawn([depth] { return spawn_tree(depth - 1); });
    auto r = amt::spawn([depth] { return spawn_tree(depth - 1); });
    return l.get() + r.get();
}

outcome runtime_semantics()
{
    std::string d;
    bool ok = true;
    for (std::size_t w : {1u, 2u, 4u})
    {
        int bad = amt::testing::dag_mismatches(w, 60, 20231114 + w);
        ok = ok && bad == 0;
        d += fmt("%zu worker(s): %d/60 DAG mismatches; ", w, bad);
    }
    std::uint64_t leaves = 0;
    auto status = amt::run_with_workers(1, [&] { leaves = spawn_tree(10); });
    ok = ok && status.ok() && leaves == 1024;
    d += fmt("single-worker depth-10 spawn tree: %s, %llu leaves", status.ok() ? "ok" : "faulted",
        static_cast<unsigned long long>(leaves));
    return result(ok, d);
}

// ------------------------------------------------------------------ 9

outcome metric_arithmetic()
{
    double cps = amt::amr::cells_per_second(1, 1, 1.0);
    double wh = amt::bench::energy_wh({3.22, 1332});
    double figure = 71.3 / 60;
    double rel = std::abs(wh - figure) / figure;
    return result(cps == 512.0 && std::abs(wh - 1.191) < 5e-4 && rel <= 0.005,
        fmt("cells_per_second(1 leaf, 1 step, 1 s) = %.1f; 3.22 W x 1332 s = %.4f Wh vs "
            "71.3/60 = %.4f Wh (%.2f%%)",
            cps, wh, figure, 100 * rel));
}

// ------------------------------------------------------------------ 10

outcome cross_space()
{
    using namespace amt::exec;
    amt::runtime rt(4);
    int kernels = 0, mismatches = 0;
    std::vector<execution_space> pools{
        execution_space::task_pool(2), execution_space::task_pool(4), execution_space::task_pool(8)};

    for (md_extents ext : {md_extents{8, 8, 8}, md_extents{5, 6, 7, 3}, md_extents{1000}})
    {
        auto fill = [](grid_view& v) {
            return [&v](md_index const& i) {
                double s = 0;
                for (std::size_t a = 0; a != 4; ++a)
                    s = s * 1.7 + std::sin(0.3 * double(i[a]) + a);
                v[i] = s;
            };
        };
        grid_view ref(ext);
        auto k = fill(ref);
        parallel_for_md(execution_space::serial(), ext, k).get();
        for (auto const& sp : pools)
        {
            grid_view got(ext);
            auto kg = fill(got);
            parallel_for_md(sp, ext, kg).get();
            ++kernels;
            if (!(got == ref))
                ++mismatches;
        }

        auto plus = [](double a, double b) { return a + b; };
        auto map = [](md_index const& i) {
            return std::exp(-0.01 * double(i[0] + 3 * i[1] + 7 * i[2] + 11 * i[3])) / (1.0 + i[0]);
        };
        for (std::size_t chunks : {1u, 3u, 16u, 64u})
        {
            reduce_plan plan{chunks};
            double s = parallel_reduce(execution_space::serial(), ext, map, plus, 0.0, plan).get();
            for (auto const& sp : pools)
            {
                double t = parallel_reduce(sp, ext, map, plus, 0.0, plan).get();
                ++kernels;
                if (!same_bits(s, t))
                    ++mismatches;
            }
        }
    }

    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> d(-10, 10);
    for (int i = 0; i != 1000; ++i)
    {
        simd_pack a(4), b(4), c(4);
        for (std::size_t l = 0; l != 4; ++l)
        {
            a[l] = d(rng);
            b[l] = d(rng);
            c[l] = d(rng);
        }
        auto wide = simd_fma(a, b, c);
        for (std::size_t l = 0; l != 4; ++l)
            if (!same_bits(wide[l], simd_fma(simd_pack{a[l]}, simd_pack{b[l]}, simd_pack{c[l]})[0]))
                ++mismatches;
    }
    ++kernels;
    return result(mismatches == 0,
        fmt("%d serial-vs-task_pool kernel comparisons plus 1000 simd_fma lane checks: %d "
            "mismatches",
            kernels, mismatches));
}

}    // namespace

int main()
{
    std::vector<criterion> const criteria{
        {1, "peak performance table", 1, peak_table},
        {2, "Maclaurin correctness", 30, maclaurin_accuracy},
        {3, "node-level scaling shape", 120, scaling_shape},
        {4, "distributed equivalence", 300, distributed_equivalence},
        {5, "gravity oracle", 120, gravity_oracle},
        {6, "mass conservation", 60, conservation},
        {7, "wire robustness", 60, wire_robustness},
        {8, "runtime semantics", 120, runtime_semantics},
        {9, "metric and energy arithmetic", 1, metric_arithmetic},
        {10, "cross-space equivalence", 60, cross_space},
    };

    int failed = 0;
    for (auto const& c : criteria)
    {
        auto t0 = std::chrono::steady_clock::now();
        outcome o;
        try
        {
            o = c.check();
        }
        catch (std::exception const& e)
        {
            o = {verdict::fail, std::string("threw: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.v == verdict::pass && secs > c.budget_seconds)
            o = {verdict::fail, o.detail + fmt("; over the %.0f s budget", c.budget_seconds)};
        char const* tag = o.v == verdict::pass ? "PASS" : (o.v == verdict::skip ? "SKIP" : "FAIL");
        if (o.v == verdict::fail)
            ++failed;
        std::printf("[%s] %2d %s (%.2f s): %s\n", tag, c.id, c.name, secs, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
