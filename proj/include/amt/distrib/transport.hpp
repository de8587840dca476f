#pragma once

#include <amt/distrib/codec.hpp>
#include <amt/distrib/errors.hpp>

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

namespace amt::distrib {

enum class parcelport_kind
{
    tcp,
    loopback
};

parcelport_kind parse_parcelport(std::string_view name);
std::string_view to_string(parcelport_kind kind) noexcept;

/// host:port split; throws configuration_error on malformed input.
struct endpoint
{
    std::string host;
    std::uint16_t port = 0;

    static endpoint parse(std::string_view text);
    std::string to_string() const;
};

/// One bidirectional, ordered frame stream. Frames are whole length-prefixed
/// parcels. A connection owns exactly one receive loop once started.
class connection
{
  public:
    using frame_handler = std::function<void(byte_buffer frame)>;
    using close_handler = std::function<void(std::string const& reason)>;

    virtual ~connection() = default;

    /// Thread-safe; frames from concurrent senders never interleave.
    /// Throws connection_error if the stream is closed.
    virtual void send(byte_view frame) = 0;

    /// Starts the receive loop. on_close fires exactly once, after the last
    /// frame, when the stream ends for any reason.
    virtual void start(frame_handler on_frame, close_handler on_close) = 0;

    /// Idempotent. Stops the receive loop and joins it unless called from it.
    virtual void close() = 0;

    virtual std::string describe() const = 0;
};

class listener
{
  public:
    virtual ~listener() = default;

    /// Blocks for the next inbound connection; nullptr once closed.
    virtual std::shared_ptr<connection> accept() = 0;

    /// Unblocks accept(); idempotent.
    virtual void close() = 0;

    /// Actual bound endpoint (ephemeral port resolved).
    virtual endpoint local_endpoint() const = 0;
};

class parcelport
{
  public:
    virtual ~parcelport() = default;

    /// Throws bind_error if the endpoint is taken or invalid.
    virtual std::unique_ptr<listener> listen(endpoint const& where) = 0;

    /// Single attempt; throws connection_error if nothing listens there.
    virtual std::shared_ptr<connection> connect(endpoint const& where) = 0;

    virtual parcelport_kind kind() const noexcept = 0;
};

/// Asks the OS for a currently unused TCP port on `host` (for tests and
/// launchers that must hand the same port to several processes).
std::uint16_t find_free_tcp_port(std::string const& host = "127.0.0.1");

/// max_frame bounds accepted inbound frame bodies.
std::unique_ptr<parcelport> make_parcelport(parcelport_kind kind, std::size_t max_frame);

}    // namespace amt::distrib
