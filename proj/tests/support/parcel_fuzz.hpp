#pragma once

// Random parcels and structurally corrupted frames for the wire-format tests.

#include <amt/distrib/errors.hpp>
#include <amt/distrib/parcel.hpp>

#include <cstdint>
#include <random>
#include <string>

namespace amt::testing {

inline distrib::parcel random_parcel(std::mt19937_64& rng)
{
    distrib::parcel p;
    p.kind = static_cast<distrib::parcel_kind>(rng() % 3);
    p.request_id = rng();
    p.target.locality = static_cast<std::uint32_t>(rng());
    p.target.local_index = rng();
    p.action_id = static_cast<std::uint32_t>(rng());
    p.payload.resize(rng() % 97);
    for (auto& b : p.payload)
        b = static_cast<std::uint8_t>(rng());
    return p;
}

inline constexpr int mutation_classes = 8;

struct mutated_frame
{
    distrib::byte_buffer bytes;
    bool body_only = false;    // bytes hold a parcel body without the prefix
    std::string expected;      // field the decoder must name; empty: any field
};

/// Corrupts an encoding of `p` with mutation class `cls`:
/// 0 magic, 1 version, 2 kind, 3 truncated frame, 4 body cut inside the
/// header, 5 payload length beyond the body, 6 payload length over the
/// limit, 7 trailing bytes after the payload.
inline mutated_frame mutate(distrib::parcel const& p, int cls, std::mt19937_64& rng)
{
    auto put_u32 = [](distrib::byte_buffer& f, std::size_t at, std::uint32_t v) {
        for (int k = 0; k != 4; ++k)
            f[at + k] = static_cast<std::uint8_t>(v >> (8 * k));
    };
    mutated_frame m;
    auto f = distrib::encode_frame(p);
    switch (cls % mutation_classes)
    {
    case 0:
        f[4 + rng() % 4] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        m.expected = "magic";
        break;
    case 1:
        f[8] = static_cast<std::uint8_t>(2 + rng() % 250);
        m.expected = "version";
        break;
    case 2:
        f[9] = static_cast<std::uint8_t>(3 + rng() % 250);
        m.expected = "kind";
        break;
    case 3:
        f.resize(rng() % f.size());
        m.expected = "length";
        break;
    case 4: {
        auto cut = 4 + rng() % 30;
        f = distrib::byte_buffer(f.begin() + 4, f.begin() + static_cast<std::ptrdiff_t>(cut));
        m.body_only = true;
        break;
    }
    case 5:
        put_u32(f, 34, static_cast<std::uint32_t>(p.payload.size() + 1 + rng() % 100));
        m.expected = "payload";
        break;
    case 6:
        put_u32(f, 34, static_cast<std::uint32_t>(distrib::default_max_payload + 1 + rng() % 1000));
        m.expected = "payload_length";
        break;
    case 7:
        f.resize(f.size() + 1 + rng() % 8, 0);
        put_u32(f, 0, static_cast<std::uint32_t>(f.size() - 4));
        m.expected = "payload_length";
        break;
    }
    m.bytes = std::move(f);
    return m;
}

/// Field named by the decode_error for `m`; empty if it decoded.
inline std::string rejected_field(mutated_frame const& m)
{
    try
    {
        if (m.body_only)
            distrib::decode_parcel_body(m.bytes);
        else
            distrib::decode_frame(m.bytes);
    }
    catch (distrib::decode_error const& e)
    {
        return e.field();
    }
    return "";
}

}    // namespace amt::testing
