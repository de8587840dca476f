#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>

namespace amt::amr {

inline constexpr int sub_n = 8;                         // cells per edge
inline constexpr int sub_cells = sub_n * sub_n * sub_n;  // 512
inline constexpr int pad_n = sub_n + 2;                 // with 1-cell ghost shell
inline constexpr int pad_cells = pad_n * pad_n * pad_n;
inline constexpr int face_cells = sub_n * sub_n;        // 64
inline constexpr int n_faces = 6;

/// Conserved hydro variables stored per cell.
enum field : int
{
    f_rho = 0,
    f_mx,
    f_my,
    f_mz,
    f_e,
    n_fields
};

using vec3 = std::array<double, 3>;
using conserved = std::array<double, n_fields>;

/// Octree node address: level and integer octant coordinates at that level.
struct node_key
{
    int level = 0;
    std::array<std::int64_t, 3> x{0, 0, 0};

    friend auto operator<=>(node_key const&, node_key const&) = default;

    node_key child(int octant) const noexcept
    {
        node_key c;
        c.level = level + 1;
        for (int a = 0; a != 3; ++a)
            c.x[a] = 2 * x[a] + ((octant >> a) & 1);
        return c;
    }

    node_key parent() const noexcept
    {
        node_key p;
        p.level = level - 1;
        for (int a = 0; a != 3; ++a)
            p.x[a] = x[a] >> 1;
        return p;
    }

    std::int64_t extent() const noexcept
    {
        return std::int64_t{1} << level;
    }

    bool in_domain() const noexcept
    {
        for (auto v : x)
            if (v < 0 || v >= extent())
                return false;
        return true;
    }

    /// Index of the level-1 subtree containing this node (0 for the root).
    int subtree() const noexcept
    {
        if (level == 0)
            return 0;
        int o = 0;
        for (int a = 0; a != 3; ++a)
            o |= static_cast<int>((x[a] >> (level - 1)) & 1) << a;
        return o;
    }
};

/// Face numbering: face = 2*axis + (side > 0).
inline constexpr int face_axis(int face) noexcept
{
    return face / 2;
}
inline constexpr int face_side(int face) noexcept
{
    return face % 2 == 0 ? -1 : +1;
}
inline constexpr int opposite_face(int face) noexcept
{
    return face ^ 1;
}

/// Tangential axes of a face, in increasing order.
inline constexpr std::array<int, 2> face_tangents(int face) noexcept
{
    int a = face_axis(face);
    return a == 0 ? std::array<int, 2>{1, 2} :
                    (a == 1 ? std::array<int, 2>{0, 2} : std::array<int, 2>{0, 1});
}

/// Geometry of the cubic domain [-L/2, L/2]^3. Every position is derived from
/// integer indices through the same expressions, so coincident points are
/// bit-identical no matter which leaf computes them.
struct domain_geometry
{
    double size = 2.0;

    double cell_width(int level) const noexcept
    {
        return size / static_cast<double>(std::int64_t{sub_n} << level);
    }

    double node_width(int level) const noexcept
    {
        return size / static_cast<double>(std::int64_t{1} << level);
    }

    /// Centre of the cell with global index g (may lie in the ghost shell
    /// or outside the domain) at `level`.
    double cell_center(int level, std::int64_t g) const noexcept
    {
        return -0.5 * size + (static_cast<double>(g) + 0.5) * cell_width(level);
    }

    vec3 cell_center(int level, std::array<std::int64_t, 3> const& g) const noexcept
    {
        return {cell_center(level, g[0]), cell_center(level, g[1]), cell_center(level, g[2])};
    }

    double node_origin(int level, std::int64_t x) const noexcept
    {
        return -0.5 * size + static_cast<double>(x) * node_width(level);
    }
};

/// Row-major padded index with x fastest; i, j, k in [-1, sub_n].
inline constexpr int pad_index(int i, int j, int k) noexcept
{
    return ((k + 1) * pad_n + (j + 1)) * pad_n + (i + 1);
}

inline constexpr int cell_index(int i, int j, int k) noexcept
{
    return (k * sub_n + j) * sub_n + i;
}

}    // namespace amt::amr
