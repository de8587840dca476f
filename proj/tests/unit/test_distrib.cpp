#include <amt/distrib.hpp>
#include <amt/task.hpp>

#include <doctest.h>

#include "../support/inprocess_job.hpp"
#include "../support/parcel_fuzz.hpp"

#include <atomic>
#include <chrono>
#include <map>
#include <random>
#include <string>
#include <thread>

using namespace amt::distrib;
using amt::testing::job_config;
using amt::testing::random_parcel;
using amt::testing::unique_loopback_endpoint;

namespace {

std::string field_of(byte_view frame)
{
    try
    {
        decode_frame(frame);
    }
    catch (decode_error const& e)
    {
        return e.field();
    }
    return "";
}

byte_buffer bytes(std::string const& s)
{
    return byte_buffer(s.begin(), s.end());
}

std::string text(byte_buffer const& b)
{
    return std::string(b.begin(), b.end());
}

constexpr std::uint32_t echo_type = 7;
constexpr std::uint32_t counter_type = 8;
constexpr std::uint32_t act_echo = 1;
constexpr std::uint32_t act_fail = 2;
constexpr std::uint32_t act_slow = 3;
constexpr std::uint32_t act_add = 1;
constexpr std::uint32_t act_read = 2;

gid make_echo(locality& here, byte_view)
{
    component_actions acts;
    acts.add(act_echo, [](byte_view a) { return byte_buffer(a.begin(), a.end()); });
    acts.add(act_fail, [](byte_view) -> byte_buffer { throw std::runtime_error("boom"); });
    acts.add(act_slow, [](byte_view a) {
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        return byte_buffer(a.begin(), a.end());
    });
    return here.register_component(nullptr, std::move(acts));
}

// Non-atomic accumulator: correctness relies on per-component serialization.
gid make_counter(locality& here, byte_view)
{
    auto value = std::make_shared<std::int64_t>(0);
    component_actions acts;
    acts.add(act_add, [value](byte_view a) {
        byte_reader r(a);
        auto v = *value;
        amt::this_task::yield();
        *value = v + r.get<std::int64_t>("delta");
        return byte_buffer{};
    });
    acts.add(act_read, [value](byte_view) {
        byte_writer w;
        w.put(*value);
        return w.take();
    });
    return here.register_component(value, std::move(acts));
}

void install(locality& l)
{
    l.register_factory(echo_type, make_echo);
    l.register_factory(counter_type, make_counter);
}

std::vector<std::string> run_job(parcelport_kind kind, std::uint32_t count,
    std::function<void(locality&)> const& body)
{
    return amt::testing::run_job(kind, count, install, body);
}

}    // namespace

TEST_CASE("handshake parcel with empty payload is a 34-byte body")
{
    parcel p{parcel_kind::handshake, 0, system_gid(0), locality::hs_register, {}};
    CHECK(encode_parcel_body(p).size() == 34);
    auto frame = encode_frame(p);
    REQUIRE(frame.size() == 38);
    CHECK(frame[0] == 34);
    CHECK(frame[1] == 0);
    CHECK(frame[4] == 'M');
    CHECK(frame[7] == '1');
    CHECK(frame[8] == parcel_version);
    CHECK(frame[9] == 2);
}

TEST_CASE("frames are little-endian")
{
    parcel p{parcel_kind::invoke, 0x0102030405060708ull, gid{0x0a0b0c0d, 0x1112131415161718ull},
        0x21222324, {0xee}};
    auto f = encode_frame(p);
    byte_buffer expect{35, 0, 0, 0, 'M', 'T', 'P', '1', 1, 0,
        0x08, 0x07, 0x06, 0x05, 0x04, 0x03, 0x02, 0x01,
        0x0d, 0x0c, 0x0b, 0x0a,
        0x18, 0x17, 0x16, 0x15, 0x14, 0x13, 0x12, 0x11,
        0x24, 0x23, 0x22, 0x21,
        1, 0, 0, 0, 0xee};
    CHECK(f == expect);
}

TEST_CASE("decode(encode(p)) == p over 100000 random parcels")
{
    std::mt19937_64 rng(42);
    int mismatches = 0;
    for (int i = 0; i != 100000; ++i)
    {
        auto p = random_parcel(rng);
        if (decode_frame(encode_frame(p)) != p)
            ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("structurally mutated frames are rejected naming the field")
{
    std::mt19937_64 rng(7);
    std::map<int, int> matched;
    for (int i = 0; i != 1000; ++i)
    {
        auto m = amt::testing::mutate(random_parcel(rng), i, rng);
        auto got = amt::testing::rejected_field(m);
        REQUIRE_MESSAGE(!got.empty(), "mutation class " << i % 8 << " accepted");
        if (m.expected.empty() || got == m.expected)
            ++matched[i % 8];
        else
            CHECK_MESSAGE(got == m.expected, "mutation class " << i % 8);
    }
    for (int c = 0; c != amt::testing::mutation_classes; ++c)
        CHECK(matched[c] == 125);
}

TEST_CASE("truncated frame is a decode error")
{
    auto f = encode_frame(parcel{parcel_kind::invoke, 1, gid{0, 1}, 1, bytes("hello")});
    f.pop_back();
    CHECK_THROWS_AS(decode_frame(f), decode_error);
    CHECK(field_of(byte_view(f).first(2)) == "length");
}

TEST_CASE("oversized payload refused at encode")
{
    parcel p;
    p.payload.resize(17);
    CHECK_THROWS_AS(encode_frame(p, 16), decode_error);
}

TEST_CASE("argument codec round-trips")
{
    byte_writer w;
    w.put<std::int32_t>(-5);
    w.put_f64(0.1);
    w.put_string("xyz");
    std::vector<double> v{1.5, -2.25};
    w.put_f64s(v);
    auto b = w.take();
    byte_reader r(b);
    CHECK(r.get<std::int32_t>("a") == -5);
    CHECK(r.get_f64("b") == 0.1);
    CHECK(r.get_string("c") == "xyz");
    CHECK(r.get_f64s("d") == v);
    CHECK_NOTHROW(r.expect_end("end"));
    try
    {
        r.get<std::uint8_t>("missing");
        FAIL("read past end");
    }
    catch (decode_error const& e)
    {
        CHECK(e.field() == "missing");
    }
}

TEST_CASE("endpoint parsing")
{
    auto e = endpoint::parse("10.0.0.1:7910");
    CHECK(e.host == "10.0.0.1");
    CHECK(e.port == 7910);
    CHECK_THROWS_AS(endpoint::parse("nohost"), amt::configuration_error);
    CHECK_THROWS_AS(endpoint::parse("h:99999"), amt::configuration_error);
    CHECK(parse_parcelport("tcp") == parcelport_kind::tcp);
    CHECK_THROWS_AS(parse_parcelport("mpi"), amt::configuration_error);
}

TEST_CASE("duplicate endpoint is a bind error")
{
    for (auto kind : {parcelport_kind::loopback, parcelport_kind::tcp})
    {
        auto port = make_parcelport(kind, 1 << 20);
        auto first = port->listen(endpoint{"127.0.0.1", 0});
        CHECK_THROWS_AS(port->listen(first->local_endpoint()), bind_error);

        amt::runtime rt(1);
        locality_config cfg;
        cfg.parcelport = kind;
        cfg.locality_count = 2;
        cfg.agas_endpoint = first->local_endpoint().to_string();
        locality sup(cfg, rt);
        CHECK_THROWS_AS(sup.start(), bind_error);
    }
}

TEST_CASE("standalone locality: local echo, resolve, error replies")
{
    amt::runtime rt(2);
    locality_config cfg;
    auto loc = bootstrap(cfg, rt, install);
    CHECK(loc->id() == 0);
    CHECK(loc->count() == 1);
    auto g = make_echo(*loc, {});
    CHECK(g.locality == 0);
    CHECK(g.local_index != 0);
    CHECK(text(loc->invoke(g, act_echo, bytes("hello")).get()) == "hello");
    CHECK(loc->resolve(g).get() == 0);

    try
    {
        loc->invoke(gid{0, 999}, act_echo, {}).get();
        FAIL("unknown component accepted");
    }
    catch (remote_error const& e)
    {
        CHECK(e.status() == reply_status::unknown_component);
    }
    try
    {
        loc->invoke(g, 77, {}).get();
        FAIL("unknown action accepted");
    }
    catch (remote_error const& e)
    {
        CHECK(e.status() == reply_status::unknown_action);
    }
    try
    {
        loc->invoke(g, act_fail, {}).get();
        FAIL("fault lost");
    }
    catch (remote_error const& e)
    {
        CHECK(e.status() == reply_status::action_fault);
        CHECK(std::string(e.what()) == "boom");
    }
    CHECK_THROWS_AS(loc->resolve(gid{0, 999}).get(), remote_error);
    auto created = loc->create_component(0, echo_type, {}).get();
    CHECK(text(loc->invoke(created, act_echo, bytes("x")).get()) == "x");
}

TEST_CASE("per-component actions are serialized")
{
    amt::runtime rt(4);
    auto loc = bootstrap(locality_config{}, rt, install);
    auto g = make_counter(*loc, {});
    std::vector<amt::future<byte_buffer>> fs;
    for (int i = 1; i <= 200; ++i)
    {
        byte_writer w;
        w.put<std::int64_t>(i);
        fs.push_back(loc->invoke(g, act_add, w.take()));
    }
    for (auto& f : fs)
        f.get();
    auto out = loc->invoke(g, act_read, {}).get();
    byte_reader r(out);
    CHECK(r.get<std::int64_t>("v") == 200 * 201 / 2);
}

TEST_CASE("worker with unreachable agas endpoint fails after the timeout")
{
    for (auto kind : {parcelport_kind::loopback, parcelport_kind::tcp})
    {
        amt::runtime rt(1);
        locality_config cfg;
        cfg.parcelport = kind;
        cfg.is_worker = true;
        cfg.locality_count = 2;
        cfg.agas_endpoint = kind == parcelport_kind::tcp ?
            "127.0.0.1:" + std::to_string(find_free_tcp_port()) :
            unique_loopback_endpoint();
        cfg.startup_timeout = std::chrono::milliseconds(300);
        auto t0 = std::chrono::steady_clock::now();
        CHECK_THROWS_AS(bootstrap(cfg, rt), startup_error);
        CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(300));
    }
}

TEST_CASE("supervisor times out when workers never register")
{
    amt::runtime rt(1);
    auto cfg = job_config(parcelport_kind::loopback, 3);
    cfg.startup_timeout = std::chrono::milliseconds(200);
    CHECK_THROWS_AS(bootstrap(cfg, rt), startup_error);
}

TEST_CASE("two localities: ids, remote create, resolve, echo, errors")
{
    for (auto kind : {parcelport_kind::loopback, parcelport_kind::tcp})
    {
        CAPTURE(to_string(kind));
        auto farewells = run_job(kind, 2, [](locality& sup) {
            CHECK(sup.id() == 0);
            CHECK(sup.count() == 2);
            auto g = sup.create_component(1, echo_type, {}).get();
            CHECK(g.locality == 1);
            CHECK(sup.resolve(g).get() == 1);
            CHECK(text(sup.invoke(g, act_echo, bytes("across")).get()) == "across");
            CHECK(sup.invoke(system_gid(1), locality::sys_ping, {}).get().empty());

            try
            {
                sup.invoke(gid{1, 12345}, act_echo, {}).get();
                FAIL("unknown remote component accepted");
            }
            catch (remote_error const& e)
            {
                CHECK(e.status() == reply_status::unknown_component);
            }
            try
            {
                sup.invoke(g, 99, {}).get();
                FAIL("unknown remote action accepted");
            }
            catch (remote_error const& e)
            {
                CHECK(e.status() == reply_status::unknown_action);
            }
            CHECK_THROWS_AS(sup.invoke(g, act_fail, {}).get(), remote_error);
            CHECK_THROWS_AS(sup.invoke(gid{5, 1}, act_echo, {}).get(), remote_error);
            CHECK(sup.pending_requests() == 0);
        });
        REQUIRE(farewells.size() == 1);
        CHECK(farewells[0] == "bye");
    }
}

TEST_CASE("1000 concurrent invokes are matched to their own replies")
{
    for (auto kind : {parcelport_kind::loopback, parcelport_kind::tcp})
    {
        CAPTURE(to_string(kind));
        run_job(kind, 2, [](locality& sup) {
            auto g = sup.create_component(1, echo_type, {}).get();
            std::vector<amt::future<byte_buffer>> fs;
            for (int i = 0; i != 1000; ++i)
                fs.push_back(sup.invoke(g, act_echo, bytes("req-" + std::to_string(i))));
            int wrong = 0;
            for (int i = 0; i != 1000; ++i)
                if (text(fs[i].get()) != "req-" + std::to_string(i))
                    ++wrong;
            CHECK(wrong == 0);
            CHECK(sup.pending_requests() == 0);
        });
    }
}

TEST_CASE("three localities: worker-to-worker traffic connects lazily")
{
    run_job(parcelport_kind::tcp, 3, [](locality& sup) {
        CHECK(sup.count() == 3);
        auto g1 = sup.create_component(1, echo_type, {}).get();
        auto g2 = sup.create_component(2, echo_type, {}).get();
        CHECK(g1.locality == 1);
        CHECK(g2.locality == 2);
        CHECK(text(sup.invoke(g2, act_echo, bytes("two")).get()) == "two");
    });
}

TEST_CASE("connection loss faults outstanding requests")
{
    auto cfg = job_config(parcelport_kind::loopback, 2);
    amt::runtime rt0(2), rt1(2);
    std::string worker_outcome;
    std::thread worker([&] {
        auto wc = cfg;
        wc.is_worker = true;
        wc.own_endpoint = unique_loopback_endpoint();
        auto loc = bootstrap(wc, rt1, install);
        try
        {
            loc->serve();
            worker_outcome = "served";
        }
        catch (connection_error const&)
        {
            worker_outcome = "lost";
        }
    });
    auto sup = bootstrap(cfg, rt0, install);
    auto g = sup->create_component(1, echo_type, {}).get();
    auto slow = sup->invoke(g, act_slow, bytes("late"));
    sup->close();
    CHECK_THROWS_AS(slow.get(), connection_error);
    worker.join();
    CHECK(worker_outcome == "lost");
}

TEST_CASE("location transparency: same results for 1/2 loopback and 2 tcp")
{
    auto program = [](locality& sup) {
        std::vector<gid> counters;
        for (std::uint32_t i = 0; i != 6; ++i)
            counters.push_back(sup.create_component(i % sup.count(), counter_type, {}).get());
        std::vector<amt::future<byte_buffer>> fs;
        for (int k = 0; k != 120; ++k)
        {
            byte_writer w;
            w.put<std::int64_t>(k * k - 3 * k);
            fs.push_back(sup.invoke(counters[k % 6], act_add, w.take()));
        }
        for (auto& f : fs)
            f.get();
        std::uint64_t h = 1469598103934665603ull;
        for (auto g : counters)
        {
            auto out = sup.invoke(g, act_read, {}).get();
            for (auto b : out)
                h = (h ^ b) * 1099511628211ull;
        }
        return h;
    };
    std::uint64_t h1 = 0, h2 = 0, h3 = 0;
    run_job(parcelport_kind::loopback, 1, [&](locality& s) { h1 = program(s); });
    run_job(parcelport_kind::loopback, 2, [&](locality& s) { h2 = program(s); });
    run_job(parcelport_kind::tcp, 2, [&](locality& s) { h3 = program(s); });
    CHECK(h1 == h2);
    CHECK(h1 == h3);
}
