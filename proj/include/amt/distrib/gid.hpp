#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

namespace amt::distrib {

using locality_id = std::uint32_t;

/// Global component id. The locality part is the component's home, fixed
/// for its lifetime (components do not migrate). Index 0 on every locality is
/// the runtime's own system component.
struct gid
{
    locality_id locality = 0;
    std::uint64_t local_index = 0;

    friend auto operator<=>(gid const&, gid const&) = default;

    std::string to_string() const
    {
        return "{" + std::to_string(locality) + ":" + std::to_string(local_index) + "}";
    }
};

inline constexpr gid system_gid(locality_id loc) noexcept
{
    return gid{loc, 0};
}

}    // namespace amt::distrib

template <>
struct std::hash<amt::distrib::gid>
{
    std::size_t operator()(amt::distrib::gid const& g) const noexcept
    {
        return std::hash<std::uint64_t>{}(g.local_index * 0x9e3779b97f4a7c15ull ^ g.locality);
    }
};
