#include <amt/distrib/parcel.hpp>

#include <algorithm>
#include <string>

namespace amt::distrib {

byte_buffer encode_parcel_body(parcel const& p)
{
    byte_writer w(parcel_header_size + p.payload.size());
    w.put_raw(parcel_magic);
    w.put(parcel_version);
    w.put(static_cast<std::uint8_t>(p.kind));
    w.put(p.request_id);
    w.put(p.target.locality);
    w.put(p.target.local_index);
    w.put(p.action_id);
    w.put_bytes(p.payload);
    return w.take();
}

byte_buffer encode_frame(parcel const& p, std::size_t max_payload)
{
    if (p.payload.size() > max_payload)
        throw decode_error("payload_length",
            "payload of " + std::to_string(p.payload.size()) + " bytes exceeds limit");
    byte_writer w(frame_prefix_size + parcel_header_size + p.payload.size());
    w.put(static_cast<std::uint32_t>(parcel_header_size + p.payload.size()));
    w.put_raw(encode_parcel_body(p));
    return w.take();
}

parcel decode_parcel_body(byte_view body, std::size_t max_payload)
{
    byte_reader r(body);
    auto magic = r.get_raw(4, "magic");
    if (!std::equal(magic.begin(), magic.end(), parcel_magic.begin()))
        throw decode_error("magic", "expected \"MTP1\"");
    auto version = r.get<std::uint8_t>("version");
    if (version != parcel_version)
        throw decode_error("version", "unsupported version " + std::to_string(version));
    auto kind = r.get<std::uint8_t>("kind");
    if (kind > static_cast<std::uint8_t>(parcel_kind::handshake))
        throw decode_error("kind", "unknown parcel kind " + std::to_string(kind));

    parcel p;
    p.kind = static_cast<parcel_kind>(kind);
    p.request_id = r.get<std::uint64_t>("request_id");
    p.target.locality = r.get<std::uint32_t>("target.locality");
    p.target.local_index = r.get<std::uint64_t>("target.local_index");
    p.action_id = r.get<std::uint32_t>("action_id");
    auto len = r.get<std::uint32_t>("payload_length");
    if (len > max_payload)
        throw decode_error("payload_length",
            "payload of " + std::to_string(len) + " bytes exceeds limit");
    if (len > r.remaining())
        throw decode_error("payload", "truncated: need " + std::to_string(len) +
                " bytes, have " + std::to_string(r.remaining()));
    auto bytes = r.get_raw(len, "payload");
    p.payload.assign(bytes.begin(), bytes.end());
    r.expect_end("payload_length");
    return p;
}

parcel decode_frame(byte_view frame, std::size_t max_payload)
{
    byte_reader r(frame);
    auto length = r.get<std::uint32_t>("length");
    if (length != r.remaining())
        throw decode_error("length", "prefix says " + std::to_string(length) +
                " bytes, frame carries " + std::to_string(r.remaining()));
    return decode_parcel_body(frame.subspan(frame_prefix_size), max_payload);
}

}    // namespace amt::distrib
