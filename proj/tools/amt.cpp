// Command-line driver: Maclaurin benchmark suite, octree AMR runs and the
// worker (delegate) mode of a distributed job.
//
// Exit status: 0 ok, 1 usage or configuration error, 2 runtime fault,
// 3 startup failure or timeout.

#include <amt/amr.hpp>
#include <amt/bench.hpp>
#include <amt/distrib.hpp>
#include <amt/errors.hpp>
#include <amt/task.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

enum exit_code : int
{
    exit_ok = 0,
    exit_usage = 1,
    exit_fault = 2,
    exit_startup = 3
};

std::size_t default_threads()
{
    auto n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

struct distributed_options
{
    std::string agas = "127.0.0.1:7910";
    std::string listen = "127.0.0.1:0";
    std::uint32_t localities = 1;
    std::size_t threads = default_threads();
    bool worker = false;
    std::string parcelport = "loopback";
    long startup_timeout_ms = 30000;

    void add_to(CLI::App& app)
    {
        app.add_option("--agas", agas, "Supervisor endpoint HOST:PORT")->capture_default_str();
        app.add_option("--listen", listen, "Worker listen endpoint HOST:PORT (port 0: any)")
            ->capture_default_str();
        app.add_option("--localities", localities, "Number of localities in the job")
            ->capture_default_str();
        app.add_option("--threads", threads, "Worker threads per locality")->capture_default_str();
        app.add_flag("--worker", worker, "Join a job as a worker instead of supervising it");
        app.add_option("--parcelport", parcelport, "tcp or loopback")->capture_default_str();
        app.add_option("--startup-timeout", startup_timeout_ms,
               "Milliseconds to wait for the job to assemble")
            ->capture_default_str();
    }

    amt::distrib::locality_config config() const
    {
        amt::distrib::locality_config c;
        c.agas_endpoint = agas;
        c.own_endpoint = listen;
        c.locality_count = localities;
        c.is_worker = worker;
        c.parcelport = amt::distrib::parse_parcelport(parcelport);
        if (startup_timeout_ms <= 0)
            throw amt::configuration_error("--startup-timeout must be positive");
        c.startup_timeout = std::chrono::milliseconds(startup_timeout_ms);
        if (threads == 0)
            throw amt::configuration_error("--threads must be at least 1");
        c.validate();
        return c;
    }
};

std::string text(amt::distrib::byte_buffer const& b)
{
    return std::string(b.begin(), b.end());
}

amt::distrib::byte_view bytes(std::string const& s)
{
    return {reinterpret_cast<std::uint8_t const*>(s.data()), s.size()};
}

// ---------------------------------------------------------------- serve

int run_worker(distributed_options const& d)
{
    auto cfg = d.config();
    cfg.is_worker = true;
    if (cfg.parcelport == amt::distrib::parcelport_kind::loopback)
        throw amt::configuration_error(
            "the loopback parcelport only connects localities of one process; use --parcelport tcp");
    amt::runtime rt(d.threads);
    auto loc = amt::distrib::bootstrap(cfg, rt, amt::amr::install);
    std::cout << "locality=" << loc->id() << " of " << loc->count() << std::endl;
    auto farewell = text(loc->serve());
    loc->close();
    std::cout << "farewell=" << farewell << std::endl;
    return exit_ok;
}

// ---------------------------------------------------------------- amr

struct amr_options
{
    std::string config_file;
    std::optional<int> max_level;
    std::optional<int> stop_step;
    std::optional<double> theta;
    std::optional<std::string> kernel;
    double power_watts = 3.22;
};

amt::amr::amr_config load_amr_config(amr_options const& o)
{
    amt::amr::amr_config cfg;
    if (!o.config_file.empty())
        cfg = amt::amr::amr_config::load_ini(o.config_file);
    if (o.max_level)
        cfg.max_level = *o.max_level;
    if (o.stop_step)
        cfg.steps = *o.stop_step;
    if (o.theta)
        cfg.theta = *o.theta;
    if (o.kernel)
        cfg.kernel = amt::amr::parse_kernel(*o.kernel);
    cfg.validate();
    return cfg;
}

void print_metrics(amt::amr::simulation& sim, amt::amr::run_metrics const& m, double watts,
    std::string const& hash)
{
    auto c = sim.tree().census();
    std::ostringstream levels;
    for (std::size_t l = 0; l != c.leaves_per_level.size(); ++l)
        levels << (l ? "," : "") << c.leaves_per_level[l];
    std::printf("leaves=%zu\n", m.leaf_count);
    std::printf("leaves_per_level=%s\n", levels.str().c_str());
    std::printf("cells=%zu\n", c.cell_count);
    std::printf("steps=%d\n", m.steps);
    std::printf("wall_seconds=%.6f\n", m.wall_seconds);
    std::printf("cells_per_second=%.3f\n", m.cells_per_second);
    std::printf("cells_per_second_per_step=%.3f\n", m.cells_per_second_per_step);
    std::printf("simulated_time=%.9g\n", m.simulated_time);
    std::printf("mass_initial=%.17g\n", m.mass_initial);
    std::printf("mass_final=%.17g\n", m.mass_final);
    std::printf("max_step_mass_drift=%.3e\n", m.max_step_mass_drift);
    std::printf("energy_wh=%.6f (model: %.3f W x wall time)\n",
        amt::bench::energy_wh({watts, m.wall_seconds}), watts);
    std::printf("state_hash=%s\n", hash.c_str());
    std::fflush(stdout);
}

int run_amr(amr_options const& o, distributed_options const& d)
{
    if (d.worker)
        return run_worker(d);
    auto cfg = load_amr_config(o);
    auto lc = d.config();
    if (!(o.power_watts > 0))
        throw amt::configuration_error("--power-watts must be positive");
    bool in_process = lc.parcelport == amt::distrib::parcelport_kind::loopback;

    // Loopback jobs run every worker locality as threads of this process.
    std::vector<std::unique_ptr<amt::runtime>> worker_rts;
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> worker_errors(in_process ? lc.locality_count - 1 : 0);
    if (in_process)
    {
        for (std::uint32_t w = 1; w < lc.locality_count; ++w)
        {
            worker_rts.push_back(std::make_unique<amt::runtime>(d.threads));
            workers.emplace_back([&, w] {
                try
                {
                    auto wc = lc;
                    wc.is_worker = true;
                    auto loc = amt::distrib::bootstrap(wc, *worker_rts[w - 1], amt::amr::install);
                    loc->serve();
                    loc->close();
                }
                catch (...)
                {
                    worker_errors[w - 1] = std::current_exception();
                }
            });
        }
    }
    auto join_workers = [&] {
        for (auto& t : workers)
            t.join();
        workers.clear();
    };

    int status = exit_ok;
    std::exception_ptr failure;
    {
        amt::runtime rt(d.threads);
        std::unique_ptr<amt::distrib::locality> loc;
        try
        {
            loc = amt::distrib::bootstrap(lc, rt, amt::amr::install);
        }
        catch (...)
        {
            join_workers();
            throw;
        }
        std::string farewell = "abort";
        try
        {
            amt::amr::simulation sim(*loc, cfg);
            sim.build();
            auto metrics = sim.advance(cfg.steps);
            auto hash = amt::amr::format_hash(sim.state_hash());
            print_metrics(sim, metrics, o.power_watts, hash);
            farewell = hash;
        }
        catch (...)
        {
            failure = std::current_exception();
        }
        loc->shutdown_workers(bytes(farewell));
        loc->close();
    }
    join_workers();
    if (failure)
        std::rethrow_exception(failure);
    for (auto const& e : worker_errors)
        if (e)
            std::rethrow_exception(e);
    return status;
}

// ---------------------------------------------------------------- bench

struct bench_options
{
    std::int64_t n = 1000000000;
    double x = 0.999999;
    std::string cores = "1";
    std::string paradigms = "futures";
    std::size_t repeats = 10;
    std::size_t chunks = amt::bench::default_chunks;
    std::string out = ".";
    double power_watts = 3.22;
    std::string cpu;
};

std::vector<std::size_t> parse_cores(std::string const& list)
{
    std::vector<std::size_t> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        std::size_t pos = 0;
        long long v = 0;
        try
        {
            v = std::stoll(item, &pos);
        }
        catch (std::exception const&)
        {
            pos = 0;
        }
        if (pos != item.size() || item.empty() || v < 1)
            throw amt::configuration_error("--cores expects positive integers, got '" + item + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty())
        throw amt::configuration_error("--cores is empty");
    return out;
}

int run_bench(bench_options const& o)
{
    using namespace amt::bench;
    static std::map<std::string, cpu_spec> const known{{"a64fx", cpus::a64fx},
        {"amd", cpus::amd_epyc}, {"intel", cpus::intel_xeon}, {"u74", cpus::u74_mc}};
    std::optional<cpu_spec> cpu;
    if (!o.cpu.empty())
    {
        auto it = known.find(o.cpu);
        if (it == known.end())
            throw amt::configuration_error("unknown --cpu '" + o.cpu + "' (a64fx, amd, intel, u74)");
        cpu = it->second;
    }
    if (!(o.power_watts > 0))
        throw amt::configuration_error("--power-watts must be positive");

    suite_options s;
    s.params = {o.x, o.n};
    s.params.validate();
    s.paradigms = parse_paradigm_list(o.paradigms);
    s.cores = parse_cores(o.cores);
    s.repeats = o.repeats;
    s.chunks = o.chunks;
    if (s.chunks == 0)
        throw amt::configuration_error("--chunks must be at least 1");
    if (cpu)
        for (auto c : s.cores)
            if (c > static_cast<std::size_t>(cpu->cores))
                throw amt::configuration_error("--cores exceeds the core count of --cpu");

    auto results = run_suite(s);
    std::printf("paradigm,cores,time_min_s,time_median_s,time_max_s,flops,energy_wh%s,value\n",
        cpu ? ",normalized" : "");
    for (auto const& r : results)
    {
        std::printf("%s,%zu,%.6f,%.6f,%.6f,%.6e,%.6f", std::string(to_string(r.how)).c_str(),
            r.cores, r.time_min, r.time_median, r.time_max, r.flops(),
            energy_wh({o.power_watts, r.time_median}));
        if (cpu)
            std::printf(",%.6f", normalized_performance(r.flops(), *cpu, static_cast<int>(r.cores)));
        std::printf(",%.17g\n", r.value);
    }
    std::filesystem::create_directories(o.out);
    for (auto const& path : emit_csv(results, o.out, "maclaurin"))
        std::printf("wrote %s\n", path.string().c_str());
    return exit_ok;
}

int guarded(std::function<int()> const& body)
{
    try
    {
        return body();
    }
    catch (amt::configuration_error const& e)
    {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_usage;
    }
    catch (amt::domain_error const& e)
    {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_usage;
    }
    catch (amt::distrib::startup_error const& e)
    {
        std::cerr << "startup error: " << e.what() << "\n";
        return exit_startup;
    }
    catch (std::exception const& e)
    {
        std::cerr << "runtime fault: " << e.what() << "\n";
        return exit_fault;
    }
}

}    // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Asynchronous many-task runtime: benchmarks and octree AMR proxy"};
    app.require_subcommand(1);

    bench_options bo;
    auto* bench = app.add_subcommand("bench", "Maclaurin ln(1+x) suite across paradigms and cores");
    bench->add_option("--n", bo.n, "Series terms")->capture_default_str();
    bench->add_option("--x", bo.x, "Series argument, |x| < 1")->capture_default_str();
    bench->add_option("--cores", bo.cores, "Comma-separated worker counts")->capture_default_str();
    bench->add_option("--paradigms", bo.paradigms, "Comma-separated: futures,for_each,sender")
        ->capture_default_str();
    bench->add_option("--repeats", bo.repeats, "Timed runs per configuration")->capture_default_str();
    bench->add_option("--chunks", bo.chunks, "Fixed chunk count")->capture_default_str();
    bench->add_option("--out", bo.out, "Directory for the CSV files")->capture_default_str();
    bench->add_option("--power-watts", bo.power_watts, "Average power for the energy model")
        ->capture_default_str();
    bench->add_option("--cpu", bo.cpu, "Report normalized performance for a64fx|amd|intel|u74");

    amr_options ao;
    distributed_options ad;
    auto* amr = app.add_subcommand("amr", "Octree AMR rotating-star run");
    amr->add_option("--config", ao.config_file, "INI file (key = value)");
    amr->add_option("--max-level", ao.max_level, "Maximum refinement level");
    amr->add_option("--stop-step", ao.stop_step, "Number of time steps");
    amr->add_option("--theta", ao.theta, "Gravity opening angle (>= 0)");
    amr->add_option("--kernel", ao.kernel, "native or execspace");
    amr->add_option("--power-watts", ao.power_watts, "Average power for the energy model")
        ->capture_default_str();
    ad.add_to(*amr);

    distributed_options sd;
    auto* serve = app.add_subcommand("serve", "Join a distributed job as a worker locality");
    sd.add_to(*serve);

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::CallForHelp const& e)
    {
        return app.exit(e);
    }
    catch (CLI::CallForAllHelp const& e)
    {
        return app.exit(e);
    }
    catch (CLI::ParseError const& e)
    {
        app.exit(e);
        return exit_usage;
    }

    if (bench->parsed())
        return guarded([&] { return run_bench(bo); });
    if (amr->parsed())
        return guarded([&] { return run_amr(ao, ad); });
    return guarded([&] { return run_worker(sd); });
}
