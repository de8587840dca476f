#pragma once

#include <amt/distrib/codec.hpp>
#include <amt/distrib/errors.hpp>
#include <amt/distrib/gid.hpp>
#include <amt/distrib/parcel.hpp>
#include <amt/distrib/transport.hpp>
#include <amt/task/future.hpp>
#include <amt/task/runtime.hpp>

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>

namespace amt::distrib {

struct locality_config
{
    /// Supervisor's endpoint; the supervisor listens here, workers dial it.
    std::string agas_endpoint = "127.0.0.1:7910";
    /// Worker listen endpoint (port 0 picks a free one). Ignored by the
    /// supervisor, which listens on agas_endpoint.
    std::string own_endpoint = "127.0.0.1:0";
    std::uint32_t locality_count = 1;
    bool is_worker = false;
    parcelport_kind parcelport = parcelport_kind::loopback;
    std::chrono::milliseconds startup_timeout{30000};
    std::size_t max_payload = default_max_payload;

    /// Throws configuration_error.
    void validate() const;
};

using action_fn = std::function<byte_buffer(byte_view args)>;

/// Action table of one component: action_id -> handler.
class component_actions
{
  public:
    component_actions& add(std::uint32_t action_id, action_fn fn)
    {
        table_[action_id] = std::move(fn);
        return *this;
    }

    action_fn const* find(std::uint32_t action_id) const
    {
        auto it = table_.find(action_id);
        return it == table_.end() ? nullptr : &it->second;
    }

  private:
    std::unordered_map<std::uint32_t, action_fn> table_;
};

class locality;

/// Builds a component on the locality it is asked to live on and returns its
/// gid (normally by calling register_component).
using component_factory = std::function<gid(locality& here, byte_view args)>;

/// One runtime process (or in-process instance) of a distributed job.
///
/// Locality 0 is the supervisor: it owns the AGAS endpoint, waits for all
/// workers to register, assigns dense ids in arrival order and broadcasts the
/// endpoint table. Each connection has one receive thread; action bodies run
/// as tasks on the supplied runtime, one at a time per component.
class locality
{
  public:
    /// System component actions (gid index 0).
    enum system_action : std::uint32_t
    {
        sys_resolve = 1,
        sys_create = 2,
        sys_shutdown = 3,
        sys_ping = 4
    };

    /// Handshake steps (handshake parcels carry these in action_id).
    enum handshake_step : std::uint32_t
    {
        hs_register = 1,
        hs_assign = 2,
        hs_peer = 3
    };

    locality(locality_config config, amt::runtime& rt);
    ~locality();

    locality(locality const&) = delete;
    locality& operator=(locality const&) = delete;

    /// Must precede start() so remote creation requests find it.
    void register_factory(std::uint32_t type_id, component_factory factory);

    /// Bootstrap handshake; blocks the calling thread until released.
    /// Throws bind_error, startup_error.
    void start();

    locality_id id() const noexcept
    {
        return id_;
    }

    std::uint32_t count() const noexcept
    {
        return count_;
    }

    bool is_supervisor() const noexcept
    {
        return !config_.is_worker;
    }

    locality_config const& config() const noexcept
    {
        return config_;
    }

    amt::runtime& runtime() noexcept
    {
        return rt_;
    }

    /// `object` is kept alive for the locality's lifetime.
    gid register_component(std::shared_ptr<void> object, component_actions actions);

    /// Location-transparent call. Local targets skip frame encoding but run
    /// through the same dispatch (serialization, error statuses). Errors:
    /// remote_error (unknown component/action, action fault),
    /// connection_error (peer lost).
    future<byte_buffer> invoke(gid target, std::uint32_t action_id, byte_buffer args);

    future<locality_id> resolve(gid target);

    future<gid> create_component(locality_id where, std::uint32_t type_id, byte_buffer args);

    /// Worker: block until the supervisor's shutdown arrives; returns its
    /// payload. Throws connection_error if the supervisor vanishes first.
    byte_buffer serve();

    /// Supervisor: send `farewell` to every worker and wait for all acks.
    void shutdown_workers(byte_view farewell);

    /// Stop accepting, finish in-flight actions, close every connection.
    /// Idempotent; also run by the destructor.
    void close();

    /// Requests sent and not yet answered or faulted.
    std::size_t pending_requests() const;

  private:
    struct link;
    struct entry;
    struct dispatch_result
    {
        reply_status status = reply_status::ok;
        byte_buffer payload;
    };

    dispatch_result dispatch(gid target, std::uint32_t action_id, byte_view args);
    dispatch_result dispatch_system(std::uint32_t action_id, byte_view args);

    void attach(std::shared_ptr<link> l);
    void on_frame(std::shared_ptr<link> const& l, byte_buffer frame);
    void on_closed(std::shared_ptr<link> const& l, std::string const& reason);
    void on_handshake(std::shared_ptr<link> const& l, parcel p);
    void on_invoke(std::shared_ptr<link> const& l, parcel p);
    void on_reply(parcel p);
    void send_parcel(link& l, parcel const& p);
    std::shared_ptr<link> peer_link(locality_id peer);
    void accept_loop();
    void bootstrap_supervisor();
    void bootstrap_worker();
    void begin_job();
    void end_job();

    struct impl;
    locality_config config_;
    amt::runtime& rt_;
    locality_id id_ = 0;
    std::uint32_t count_ = 1;
    std::unique_ptr<impl> impl_;
};

/// Constructs a locality, lets `setup` register factories, then runs the
/// bootstrap handshake.
std::unique_ptr<locality> bootstrap(locality_config config, amt::runtime& rt,
    std::function<void(locality&)> const& setup = {});

}    // namespace amt::distrib
