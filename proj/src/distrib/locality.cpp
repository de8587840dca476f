#include <amt/distrib/locality.hpp>
#include <amt/errors.hpp>
#include <amt/task/detail/hooks.hpp>
#include <amt/task/mutex.hpp>

#include <atomic>
#include <condition_variable>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace amt::distrib {

void locality_config::validate() const
{
    if (locality_count == 0)
        throw configuration_error("locality_count must be positive");
    if (startup_timeout.count() <= 0)
        throw configuration_error("startup_timeout must be positive");
    if (max_payload > std::numeric_limits<std::uint32_t>::max() - parcel_header_size)
        throw configuration_error("max_payload does not fit a frame");
    endpoint::parse(agas_endpoint);
    if (is_worker)
        endpoint::parse(own_endpoint);
}

struct locality::link
{
    std::shared_ptr<connection> conn;
};

struct locality::entry
{
    std::shared_ptr<void> object;
    component_actions actions;
    amt::mutex serial;
};

namespace {
    struct pending_request
    {
        promise<byte_buffer> result;
        void const* via;
    };

    std::string as_string(byte_view b)
    {
        return std::string(reinterpret_cast<char const*>(b.data()), b.size());
    }

    byte_buffer as_bytes(std::string const& s)
    {
        return byte_buffer(s.begin(), s.end());
    }
}    // namespace

struct locality::impl
{
    std::unique_ptr<parcelport> port;
    std::unique_ptr<listener> lst;
    std::thread acceptor;
    bool started = false;

    mutable std::mutex m;
    std::condition_variable cv;
    std::vector<std::shared_ptr<link>> links;
    std::vector<std::shared_ptr<link>> peers;    // by locality id
    std::vector<std::string> endpoints;
    std::unordered_map<std::uint64_t, pending_request> pending;

    // Bootstrap.
    std::vector<std::pair<std::shared_ptr<link>, std::string>> registrations;
    std::shared_ptr<link> bootstrap_link;
    bool assigned = false;
    std::string bootstrap_failure;

    // Serve / teardown.
    bool shutdown_requested = false;
    byte_buffer farewell;
    bool supervisor_lost = false;
    bool closing = false;
    bool closed = false;
    std::size_t jobs = 0;

    std::mutex connect_m;
    std::mutex reg_m;
    std::unordered_map<std::uint64_t, std::shared_ptr<entry>> components;
    std::unordered_map<std::uint32_t, component_factory> factories;
    std::atomic<std::uint64_t> next_index{1};
    std::atomic<std::uint64_t> next_request{1};
};

locality::locality(locality_config config, amt::runtime& rt)
  : config_(std::move(config))
  , rt_(rt)
  , impl_(std::make_unique<impl>())
{
    config_.validate();
    count_ = config_.is_worker ? 0 : config_.locality_count;
}

locality::~locality()
{
    close();
}

void locality::register_factory(std::uint32_t type_id, component_factory factory)
{
    std::lock_guard lk(impl_->reg_m);
    impl_->factories[type_id] = std::move(factory);
}

void locality::start()
{
    if (impl_->started)
        throw usage_error("locality already started");
    impl_->started = true;
    impl_->port = make_parcelport(config_.parcelport, config_.max_payload + parcel_header_size);
    if (config_.is_worker)
        bootstrap_worker();
    else
        bootstrap_supervisor();
}

void locality::bootstrap_supervisor()
{
    id_ = 0;
    count_ = config_.locality_count;
    auto& s = *impl_;
    {
        std::lock_guard lk(s.m);
        s.peers.resize(count_);
        s.endpoints.assign(count_, std::string());
        s.endpoints[0] = config_.agas_endpoint;
    }
    if (count_ == 1)
        return;

    s.lst = s.port->listen(endpoint::parse(config_.agas_endpoint));
    s.endpoints[0] = s.lst->local_endpoint().to_string();
    s.acceptor = std::thread([this] { accept_loop(); });

    auto deadline = std::chrono::steady_clock::now() + config_.startup_timeout;
    std::vector<std::shared_ptr<link>> workers;
    byte_writer table;
    {
        std::unique_lock lk(s.m);
        bool all = s.cv.wait_until(lk, deadline, [&] {
            return s.registrations.size() + 1 == count_;
        });
        if (!all)
            throw startup_error("timed out after " +
                std::to_string(config_.startup_timeout.count()) +
                " ms waiting for localities: " +
                std::to_string(s.registrations.size() + 1) + " of " +
                std::to_string(count_) + " registered");
        for (std::size_t i = 0; i != s.registrations.size(); ++i)
        {
            s.peers[i + 1] = s.registrations[i].first;
            s.endpoints[i + 1] = s.registrations[i].second;
            workers.push_back(s.registrations[i].first);
        }
        s.assigned = true;
        table.put(count_);
        for (auto const& ep : s.endpoints)
            table.put_string(ep);
    }
    auto payload = table.take();
    for (std::size_t i = 0; i != workers.size(); ++i)
    {
        parcel p{parcel_kind::handshake, 0,
            system_gid(static_cast<locality_id>(i + 1)), hs_assign, payload};
        try
        {
            send_parcel(*workers[i], p);
        }
        catch (std::exception const& e)
        {
            throw startup_error("releasing locality " + std::to_string(i + 1) +
                " failed: " + e.what());
        }
    }
}

void locality::bootstrap_worker()
{
    auto& s = *impl_;
    s.lst = s.port->listen(endpoint::parse(config_.own_endpoint));
    auto mine = s.lst->local_endpoint().to_string();
    s.acceptor = std::thread([this] { accept_loop(); });

    auto deadline = std::chrono::steady_clock::now() + config_.startup_timeout;
    auto agas = endpoint::parse(config_.agas_endpoint);
    std::shared_ptr<connection> conn;
    std::string last_error;
    for (;;)
    {
        try
        {
            conn = s.port->connect(agas);
            break;
        }
        catch (connection_error const& e)
        {
            last_error = e.what();
        }
        auto now = std::chrono::steady_clock::now();
        if (now >= deadline)
            throw startup_error("agas endpoint " + config_.agas_endpoint +
                " unreachable after " + std::to_string(config_.startup_timeout.count()) +
                " ms: " + last_error);
        std::this_thread::sleep_for(
            std::min<std::chrono::steady_clock::duration>(std::chrono::milliseconds(50),
                deadline - now));
    }

    auto l = std::make_shared<link>();
    l->conn = conn;
    {
        std::lock_guard lk(s.m);
        s.links.push_back(l);
        s.bootstrap_link = l;
    }
    attach(l);
    byte_writer w;
    w.put_string(mine);
    try
    {
        send_parcel(*l, parcel{parcel_kind::handshake, 0, system_gid(0), hs_register, w.take()});
    }
    catch (connection_error const& e)
    {
        throw startup_error(std::string("registration failed: ") + e.what());
    }

    std::unique_lock lk(s.m);
    s.cv.wait_until(lk, deadline, [&] { return s.assigned || !s.bootstrap_failure.empty(); });
    if (!s.assigned)
        throw startup_error(s.bootstrap_failure.empty() ?
                "timed out after " + std::to_string(config_.startup_timeout.count()) +
                    " ms waiting for the supervisor to release this locality" :
                "supervisor connection lost during bootstrap: " + s.bootstrap_failure);
}

void locality::accept_loop()
{
    auto& s = *impl_;
    while (auto c = s.lst->accept())
    {
        auto l = std::make_shared<link>();
        l->conn = std::move(c);
        {
            std::lock_guard lk(s.m);
            if (s.closing)
            {
                l->conn->close();
                continue;
            }
            s.links.push_back(l);
        }
        attach(l);
    }
}

void locality::attach(std::shared_ptr<link> l)
{
    auto* conn = l->conn.get();
    conn->start([this, l](byte_buffer frame) { on_frame(l, std::move(frame)); },
        [this, l](std::string const& reason) { on_closed(l, reason); });
}

void locality::send_parcel(link& l, parcel const& p)
{
    auto frame = encode_frame(p, config_.max_payload);
    l.conn->send(frame);
}

void locality::on_frame(std::shared_ptr<link> const& l, byte_buffer frame)
{
    parcel p;
    try
    {
        p = decode_frame(frame, config_.max_payload);
    }
    catch (decode_error const& e)
    {
        std::cerr << "locality " << id_ << ": dropping " << l->conn->describe() << ": "
                  << e.what() << "\n";
        l->conn->close();
        return;
    }
    switch (p.kind)
    {
    case parcel_kind::invoke:
        on_invoke(l, std::move(p));
        break;
    case parcel_kind::reply:
        on_reply(std::move(p));
        break;
    case parcel_kind::handshake:
        on_handshake(l, std::move(p));
        break;
    }
}

void locality::on_handshake(std::shared_ptr<link> const& l, parcel p)
{
    auto& s = *impl_;
    switch (p.action_id)
    {
    case hs_register: {
        std::string ep;
        try
        {
            byte_reader r(p.payload);
            ep = r.get_string("endpoint");
        }
        catch (decode_error const&)
        {
            l->conn->close();
            return;
        }
        std::unique_lock lk(s.m);
        if (is_supervisor() && !s.assigned && s.registrations.size() + 1 < count_)
        {
            s.registrations.emplace_back(l, std::move(ep));
            s.cv.notify_all();
            return;
        }
        lk.unlock();
        l->conn->close();    // surplus or late registration
        return;
    }
    case hs_assign: {
        std::vector<std::string> eps;
        std::uint32_t n = 0;
        try
        {
            byte_reader r(p.payload);
            n = r.get<std::uint32_t>("count");
            for (std::uint32_t i = 0; i != n; ++i)
                eps.push_back(r.get_string("endpoint"));
        }
        catch (decode_error const& e)
        {
            std::lock_guard lk(s.m);
            s.bootstrap_failure = e.what();
            s.cv.notify_all();
            return;
        }
        std::lock_guard lk(s.m);
        if (s.assigned || l != s.bootstrap_link || p.target.locality >= n)
            return;
        id_ = p.target.locality;
        count_ = n;
        s.endpoints = std::move(eps);
        s.peers.assign(n, nullptr);
        s.peers[0] = l;
        s.assigned = true;
        s.cv.notify_all();
        return;
    }
    case hs_peer: {
        std::lock_guard lk(s.m);
        auto from = p.target.locality;
        if (from < s.peers.size() && !s.peers[from])
            s.peers[from] = l;
        return;
    }
    default:
        return;
    }
}

void locality::begin_job()
{
    std::lock_guard lk(impl_->m);
    ++impl_->jobs;
}

void locality::end_job()
{
    std::lock_guard lk(impl_->m);
    if (--impl_->jobs == 0)
        impl_->cv.notify_all();
}

void locality::on_invoke(std::shared_ptr<link> const& l, parcel p)
{
    auto refuse = [&](std::string const& why) {
        try
        {
            send_parcel(*l, parcel{parcel_kind::reply, p.request_id, p.target,
                static_cast<std::uint32_t>(reply_status::shutting_down), as_bytes(why)});
        }
        catch (std::exception const&)
        {
        }
    };
    {
        std::lock_guard lk(impl_->m);
        if (impl_->closing)
        {
            refuse("locality " + std::to_string(id_) + " is shutting down");
            return;
        }
        ++impl_->jobs;
    }
    try
    {
        rt_.post([this, l, p = std::move(p)]() mutable {
            auto r = dispatch(p.target, p.action_id, p.payload);
            parcel reply{parcel_kind::reply, p.request_id, p.target,
                static_cast<std::uint32_t>(r.status), std::move(r.payload)};
            try
            {
                send_parcel(*l, reply);
            }
            catch (decode_error const& e)
            {
                reply.action_id = static_cast<std::uint32_t>(reply_status::action_fault);
                reply.payload = as_bytes(std::string("reply not encodable: ") + e.what());
                try
                {
                    send_parcel(*l, reply);
                }
                catch (std::exception const&)
                {
                }
            }
            catch (connection_error const&)
            {
                // The requester faults the call when it sees the link drop.
            }
            end_job();
        });
    }
    catch (rejected_error const&)
    {
        end_job();
        refuse("runtime of locality " + std::to_string(id_) + " is shut down");
    }
}

void locality::on_reply(parcel p)
{
    auto& s = *impl_;
    promise<byte_buffer> result;
    {
        std::lock_guard lk(s.m);
        auto it = s.pending.find(p.request_id);
        if (it == s.pending.end())
            return;    // stray reply (caller already faulted)
        result = std::move(it->second.result);
        s.pending.erase(it);
    }
    auto status = static_cast<reply_status>(p.action_id);
    if (status == reply_status::ok)
    {
        result.set_value(std::move(p.payload));
        return;
    }
    if (p.action_id > static_cast<std::uint32_t>(reply_status::shutting_down))
        status = reply_status::action_fault;
    result.set_exception(std::make_exception_ptr(remote_error(status, as_string(p.payload))));
}

void locality::on_closed(std::shared_ptr<link> const& l, std::string const& reason)
{
    auto& s = *impl_;
    std::vector<promise<byte_buffer>> orphans;
    {
        std::lock_guard lk(s.m);
        for (auto& peer : s.peers)
            if (peer == l)
                peer = nullptr;
        for (auto it = s.pending.begin(); it != s.pending.end();)
        {
            if (it->second.via == l.get())
            {
                orphans.push_back(std::move(it->second.result));
                it = s.pending.erase(it);
            }
            else
                ++it;
        }
        if (l == s.bootstrap_link)
        {
            if (!s.assigned)
                s.bootstrap_failure = reason;
            else if (!s.shutdown_requested)
                s.supervisor_lost = true;
            s.cv.notify_all();
        }
    }
    auto what = "connection " + l->conn->describe() + " lost: " + reason;
    for (auto& o : orphans)
        o.set_exception(std::make_exception_ptr(connection_error(what)));
}

locality::dispatch_result locality::dispatch(gid target, std::uint32_t action_id, byte_view args)
{
    if (target.locality != id_)
        return {reply_status::unknown_component,
            as_bytes("gid " + target.to_string() + " does not live on locality " +
                std::to_string(id_))};
    if (target.local_index == 0)
        return dispatch_system(action_id, args);

    std::shared_ptr<entry> e;
    {
        std::lock_guard lk(impl_->reg_m);
        auto it = impl_->components.find(target.local_index);
        if (it != impl_->components.end())
            e = it->second;
    }
    if (!e)
        return {reply_status::unknown_component,
            as_bytes("no component registered at gid " + target.to_string())};
    auto const* fn = e->actions.find(action_id);
    if (!fn)
        return {reply_status::unknown_action,
            as_bytes("component " + target.to_string() + " has no action " +
                std::to_string(action_id))};
    try
    {
        std::lock_guard guard(e->serial);
        return {reply_status::ok, (*fn)(args)};
    }
    catch (std::exception const& ex)
    {
        return {reply_status::action_fault, as_bytes(ex.what())};
    }
    catch (...)
    {
        detail::rethrow_if_unwind();
        return {reply_status::action_fault, as_bytes("unknown exception")};
    }
}

locality::dispatch_result locality::dispatch_system(std::uint32_t action_id, byte_view args)
{
    try
    {
        switch (action_id)
        {
        case sys_ping:
            return {reply_status::ok, {}};
        case sys_resolve: {
            byte_reader r(args);
            gid g{r.get<std::uint32_t>("gid.locality"), r.get<std::uint64_t>("gid.local_index")};
            bool known = g.locality == id_;
            if (known && g.local_index != 0)
            {
                std::lock_guard lk(impl_->reg_m);
                known = impl_->components.count(g.local_index) != 0;
            }
            if (!known)
                return {reply_status::unknown_component,
                    as_bytes("gid " + g.to_string() + " is not registered")};
            byte_writer w;
            w.put(id_);
            return {reply_status::ok, w.take()};
        }
        case sys_create: {
            byte_reader r(args);
            auto type = r.get<std::uint32_t>("type_id");
            auto ctor_args = r.get_bytes("args");
            component_factory f;
            {
                std::lock_guard lk(impl_->reg_m);
                auto it = impl_->factories.find(type);
                if (it != impl_->factories.end())
                    f = it->second;
            }
            if (!f)
                return {reply_status::action_fault,
                    as_bytes("no factory for component type " + std::to_string(type))};
            gid g = f(*this, ctor_args);
            byte_writer w;
            w.put(g.locality);
            w.put(g.local_index);
            return {reply_status::ok, w.take()};
        }
        case sys_shutdown: {
            std::lock_guard lk(impl_->m);
            impl_->shutdown_requested = true;
            impl_->farewell.assign(args.begin(), args.end());
            impl_->cv.notify_all();
            return {reply_status::ok, {}};
        }
        default:
            return {reply_status::unknown_action,
                as_bytes("system component has no action " + std::to_string(action_id))};
        }
    }
    catch (std::exception const& ex)
    {
        return {reply_status::action_fault, as_bytes(ex.what())};
    }
}

gid locality::register_component(std::shared_ptr<void> object, component_actions actions)
{
    auto e = std::make_shared<entry>();
    e->object = std::move(object);
    e->actions = std::move(actions);
    auto index = impl_->next_index.fetch_add(1);
    std::lock_guard lk(impl_->reg_m);
    impl_->components.emplace(index, std::move(e));
    return gid{id_, index};
}

std::shared_ptr<locality::link> locality::peer_link(locality_id peer)
{
    auto& s = *impl_;
    auto lookup = [&]() -> std::shared_ptr<link> {
        std::lock_guard lk(s.m);
        if (s.closing)
            throw connection_error("locality " + std::to_string(id_) + " is closing");
        return peer < s.peers.size() ? s.peers[peer] : nullptr;
    };
    if (auto l = lookup())
        return l;
    std::lock_guard connecting(s.connect_m);
    if (auto l = lookup())
        return l;
    std::string ep;
    {
        std::lock_guard lk(s.m);
        ep = s.endpoints.at(peer);
    }
    auto l = std::make_shared<link>();
    l->conn = s.port->connect(endpoint::parse(ep));
    {
        std::lock_guard lk(s.m);
        s.links.push_back(l);
        if (!s.peers[peer])
            s.peers[peer] = l;
    }
    attach(l);
    send_parcel(*l, parcel{parcel_kind::handshake, 0, system_gid(id_), hs_peer, {}});
    return l;
}

future<byte_buffer> locality::invoke(gid target, std::uint32_t action_id, byte_buffer args)
{
    if (target.locality == id_)
    {
        begin_job();
        try
        {
            return rt_.spawn([this, target, action_id, args = std::move(args)]() -> byte_buffer {
                struct finish
                {
                    locality* self;
                    ~finish()
                    {
                        self->end_job();
                    }
                } done{this};
                auto r = dispatch(target, action_id, args);
                if (r.status != reply_status::ok)
                    throw remote_error(r.status, as_string(r.payload));
                return std::move(r.payload);
            });
        }
        catch (...)
        {
            end_job();
            throw;
        }
    }
    if (target.locality >= count_)
        return make_exceptional_future<byte_buffer>(std::make_exception_ptr(remote_error(
            reply_status::unknown_component,
            "gid " + target.to_string() + " names no locality of this job")));

    std::shared_ptr<link> l;
    try
    {
        l = peer_link(target.locality);
    }
    catch (std::exception const&)
    {
        return make_exceptional_future<byte_buffer>(std::current_exception());
    }

    auto& s = *impl_;
    auto rid = s.next_request.fetch_add(1);
    promise<byte_buffer> p;
    auto f = p.get_future();
    {
        std::lock_guard lk(s.m);
        s.pending.emplace(rid, pending_request{std::move(p), l.get()});
    }
    try
    {
        send_parcel(*l, parcel{parcel_kind::invoke, rid, target, action_id, std::move(args)});
    }
    catch (std::exception const&)
    {
        promise<byte_buffer> orphan;
        bool mine = false;
        {
            std::lock_guard lk(s.m);
            auto it = s.pending.find(rid);
            if (it != s.pending.end())
            {
                orphan = std::move(it->second.result);
                s.pending.erase(it);
                mine = true;
            }
        }
        if (mine)
            orphan.set_exception(std::current_exception());
    }
    return f;
}

future<locality_id> locality::resolve(gid target)
{
    byte_writer w;
    w.put(target.locality);
    w.put(target.local_index);
    if (target.locality >= count_)
        return make_exceptional_future<locality_id>(std::make_exception_ptr(remote_error(
            reply_status::unknown_component, "gid " + target.to_string() + " is not registered")));
    auto reply = invoke(system_gid(target.locality), sys_resolve, w.take());
    return rt_.spawn([reply = std::move(reply)]() mutable {
        auto bytes = reply.get();
        byte_reader r(bytes);
        return r.get<locality_id>("locality");
    });
}

future<gid> locality::create_component(
    locality_id where, std::uint32_t type_id, byte_buffer args)
{
    byte_writer w;
    w.put(type_id);
    w.put_bytes(args);
    auto reply = invoke(system_gid(where), sys_create, w.take());
    return rt_.spawn([reply = std::move(reply)]() mutable {
        auto bytes = reply.get();
        byte_reader r(bytes);
        gid g;
        g.locality = r.get<std::uint32_t>("gid.locality");
        g.local_index = r.get<std::uint64_t>("gid.local_index");
        return g;
    });
}

byte_buffer locality::serve()
{
    if (is_supervisor())
        throw usage_error("serve() is for worker localities");
    auto& s = *impl_;
    std::unique_lock lk(s.m);
    s.cv.wait(lk, [&] { return s.shutdown_requested || s.supervisor_lost; });
    if (!s.shutdown_requested)
        throw connection_error("supervisor connection lost before shutdown");
    return s.farewell;
}

void locality::shutdown_workers(byte_view farewell)
{
    if (!is_supervisor())
        throw usage_error("shutdown_workers() is for the supervisor");
    std::vector<future<byte_buffer>> acks;
    for (locality_id w = 1; w < count_; ++w)
        acks.push_back(invoke(system_gid(w), sys_shutdown, byte_buffer(farewell.begin(), farewell.end())));
    std::exception_ptr first;
    for (auto& a : acks)
    {
        try
        {
            a.get();
        }
        catch (...)
        {
            if (!first)
                first = std::current_exception();
        }
    }
    if (first)
        std::rethrow_exception(first);
}

void locality::close()
{
    auto& s = *impl_;
    {
        std::lock_guard lk(s.m);
        if (s.closed || s.closing)
            return;
        s.closing = true;
    }
    if (s.lst)
        s.lst->close();
    if (s.acceptor.joinable())
        s.acceptor.join();
    std::vector<std::shared_ptr<link>> links;
    {
        std::unique_lock lk(s.m);
        s.cv.wait(lk, [&] { return s.jobs == 0; });
        links = s.links;
    }
    for (auto& l : links)
        l->conn->close();
    std::lock_guard lk(s.m);
    s.links.clear();
    s.peers.clear();
    s.closed = true;
}

std::size_t locality::pending_requests() const
{
    std::lock_guard lk(impl_->m);
    return impl_->pending.size();
}

std::unique_ptr<locality> bootstrap(
    locality_config config, amt::runtime& rt, std::function<void(locality&)> const& setup)
{
    auto loc = std::make_unique<locality>(std::move(config), rt);
    if (setup)
        setup(*loc);
    loc->start();
    return loc;
}

}    // namespace amt::distrib
