#pragma once

#include <amt/amr/geometry.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace amt::amr {

/// Tree construction failed (memory budget exceeded at a level).
class build_error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct refinement_criterion
{
    int max_level = 0;
    double threshold = 0.0;    // refine where sampled density exceeds this
};

/// How a leaf face sees its neighbourhood.
enum class neighbor_kind
{
    boundary,    // domain wall (reflecting)
    same,        // one leaf at the same level
    coarser,     // one leaf one level up
    finer        // four leaves one level down
};

struct face_neighbors
{
    neighbor_kind kind = neighbor_kind::boundary;
    std::vector<std::size_t> leaves;    // indices into octree::leaves()
};

struct census
{
    std::size_t leaf_count = 0;
    std::size_t node_count = 0;
    std::size_t cell_count = 0;                // leaf_count * 512
    std::vector<std::size_t> leaves_per_level;
};

/// Geometric octree topology: which nodes exist, which are leaves, and the
/// face-neighbour relation between leaves. Leaves are kept in depth-first
/// order (child octant = x | y<<1 | z<<2), the canonical order used for
/// placement, gravity and state hashing. Face-neighbour levels differ by at
/// most one (2:1 balance is enforced after refinement).
class octree
{
  public:
    using density_fn = std::function<double(vec3 const&)>;

    /// Refines top-down wherever the density sampled at the node's 8^3
    /// would-be cell centres exceeds the threshold, then balances.
    /// `memory_budget` bounds the estimated bytes of live leaf data.
    static octree build(domain_geometry geom, refinement_criterion crit,
        density_fn const& density, std::size_t memory_budget = 0);

    /// Rebuilds a topology from its leaf set (e.g. received over the wire).
    /// Throws build_error if the leaves do not tile the domain.
    static octree from_leaves(domain_geometry geom, std::vector<node_key> const& leaves);

    /// Uniform tree refined to `level` everywhere.
    static octree uniform(domain_geometry geom, int level);

    domain_geometry const& geometry() const noexcept
    {
        return geom_;
    }

    std::vector<node_key> const& leaves() const noexcept
    {
        return leaves_;
    }

    /// Every node (interior and leaf), depth-first.
    std::vector<node_key> const& nodes() const noexcept
    {
        return nodes_;
    }

    bool is_leaf(node_key const& k) const;
    bool exists(node_key const& k) const;
    std::size_t leaf_index(node_key const& k) const;

    face_neighbors neighbors(std::size_t leaf, int face) const;

    struct census census() const;

    /// Estimated bytes of per-leaf runtime data.
    static std::size_t bytes_per_leaf() noexcept;

  private:
    void finalize();

    domain_geometry geom_;
    std::map<node_key, bool> nodes_map_;    // key -> is_leaf
    std::vector<node_key> nodes_;
    std::vector<node_key> leaves_;
    std::map<node_key, std::size_t> leaf_pos_;
};

}    // namespace amt::amr
