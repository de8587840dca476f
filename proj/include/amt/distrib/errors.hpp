#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace amt::distrib {

/// Malformed frame or argument buffer; field() names the offending field.
class decode_error : public std::runtime_error
{
  public:
    decode_error(std::string field, std::string const& what)
      : std::runtime_error("decode error in field '" + field + "': " + what)
      , field_(std::move(field))
    {
    }

    std::string const& field() const noexcept
    {
        return field_;
    }

  private:
    std::string field_;
};

/// Bootstrap did not complete (peer unreachable, registration timeout).
class startup_error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Listening endpoint already taken or not bindable.
class bind_error : public startup_error
{
  public:
    using startup_error::startup_error;
};

/// Transport failure: peer gone, write failed, connection closed.
class connection_error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Status carried in the action_id field of a reply parcel.
enum class reply_status : std::uint32_t
{
    ok = 0,
    unknown_component = 1,
    unknown_action = 2,
    action_fault = 3,
    shutting_down = 4
};

/// Error reply received for an invoke.
class remote_error : public std::runtime_error
{
  public:
    remote_error(reply_status s, std::string const& msg)
      : std::runtime_error(msg)
      , status_(s)
    {
    }

    reply_status status() const noexcept
    {
        return status_;
    }

  private:
    reply_status status_;
};

}    // namespace amt::distrib
