#pragma once

#include <amt/amr/geometry.hpp>
#include <amt/amr/octree.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace amt::amr {

/// Monopole moment of a tree node.
struct moment
{
    double mass = 0;
    vec3 com{0, 0, 0};
};

/// Hierarchy of monopole moments over the whole mesh: octree nodes on top,
/// then inside every leaf blocks of 4^3, 2^3 and finally single cells
/// (point masses at cell centres). G = 1.
class gravity_tree
{
  public:
    struct node
    {
        moment m;
        vec3 lo{0, 0, 0};      // box corner
        double size = 0;       // box edge
        std::int32_t first_child = -1;
        std::int32_t level = 0;    // octree level of the box (cells: leaf level)
        bool is_cell = false;
    };

    /// `masses[leaf * 512 + cell_index]` in the tree's leaf order.
    static gravity_tree build(octree const& tree, std::span<double const> masses);

    /// Potential at x. A box is accepted as a point mass when
    /// size / |x - com| < theta and it does not contain x; otherwise its
    /// children are visited. Cells are always summed directly; a cell at
    /// exactly x (self) is skipped. theta = 0 gives the full direct sum.
    double potential(vec3 const& x, double theta) const;

    std::vector<node> const& nodes() const noexcept
    {
        return nodes_;
    }

    /// Root is nodes()[0].
    moment const& root() const noexcept
    {
        return nodes_.front().m;
    }

  private:
    std::vector<node> nodes_;
};

struct point_mass
{
    vec3 x;
    double m;
};

/// All cell point masses, leaf order then cell order.
std::vector<point_mass> cell_point_masses(octree const& tree, std::span<double const> masses);

/// Direct O(N) sum at one point: -sum m_j / |x - x_j|, skipping x_j == x.
double direct_potential(std::span<point_mass const> points, vec3 const& x);

/// Evaluation points of a leaf: the 512 interior cell centres (cell order)
/// followed by the 6 x 64 face-ghost centres (face layer order).
std::vector<vec3> leaf_potential_points(node_key const& key, domain_geometry const& geom);

}    // namespace amt::amr
