#pragma once

#include <amt/distrib/codec.hpp>
#include <amt/distrib/gid.hpp>

#include <array>
#include <cstddef>
#include <cstdint>

namespace amt::distrib {

enum class parcel_kind : std::uint8_t
{
    invoke = 0,
    reply = 1,
    handshake = 2
};

/// Wire layout (all integers little-endian):
///
///   u32  frame length (bytes after this field)
///   [4]  magic "MTP1"
///   u8   version
///   u8   kind
///   u64  request_id
///   u32  target.locality
///   u64  target.local_index
///   u32  action_id        (reply: reply_status; handshake: step)
///   u32  payload length
///   [n]  payload
struct parcel
{
    parcel_kind kind = parcel_kind::invoke;
    std::uint64_t request_id = 0;
    gid target;
    std::uint32_t action_id = 0;
    byte_buffer payload;

    friend bool operator==(parcel const&, parcel const&) = default;
};

inline constexpr std::array<std::uint8_t, 4> parcel_magic{'M', 'T', 'P', '1'};
inline constexpr std::uint8_t parcel_version = 1;
inline constexpr std::size_t parcel_header_size = 4 + 1 + 1 + 8 + 12 + 4 + 4;
inline constexpr std::size_t frame_prefix_size = 4;
inline constexpr std::size_t default_max_payload = 16u << 20;

/// Frame body without the length prefix.
byte_buffer encode_parcel_body(parcel const& p);

/// Length prefix + body. Throws decode_error("payload_length") if the payload
/// exceeds max_payload.
byte_buffer encode_frame(parcel const& p, std::size_t max_payload = default_max_payload);

/// Decodes exactly one body; trailing bytes are an error.
parcel decode_parcel_body(byte_view body, std::size_t max_payload = default_max_payload);

/// Decodes exactly one length-prefixed frame.
parcel decode_frame(byte_view frame, std::size_t max_payload = default_max_payload);

}    // namespace amt::distrib
