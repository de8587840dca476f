#include <amt/amr/octree.hpp>

#include <algorithm>
#include <limits>
#include <new>

#include <unistd.h>

namespace amt::amr {

namespace {

    std::size_t physical_memory_budget()
    {
        long pages = ::sysconf(_SC_PHYS_PAGES);
        long page = ::sysconf(_SC_PAGESIZE);
        if (pages <= 0 || page <= 0)
            return std::numeric_limits<std::size_t>::max();
        // Leave headroom for the runtime, stacks and transport buffers.
        return static_cast<std::size_t>(pages) * static_cast<std::size_t>(page) / 10 * 7;
    }

}    // namespace

std::size_t octree::bytes_per_leaf() noexcept
{
    // Padded state + potential, three face-flux arrays, the driver's export
    // cache, ghost buffers, and one gravity tree copy per locality.
    constexpr std::size_t doubles = pad_cells * (n_fields + 1) +
        3 * (sub_n + 1) * face_cells * n_fields + sub_cells * n_fields * 2 +
        n_faces * face_cells * n_fields + sub_cells * 2;
    constexpr std::size_t tree_bytes = sub_cells * 9 / 8 * 64;
    return doubles * sizeof(double) + tree_bytes;
}

octree octree::uniform(domain_geometry geom, int level)
{
    return build(geom, refinement_criterion{level, -std::numeric_limits<double>::infinity()},
        [](vec3 const&) { return 0.0; });
}

octree octree::build(domain_geometry geom, refinement_criterion crit,
    density_fn const& density, std::size_t memory_budget)
{
    if (crit.max_level < 0)
        throw build_error("max_level must be non-negative");
    if (memory_budget == 0)
        memory_budget = physical_memory_budget();

    octree t;
    t.geom_ = geom;
    node_key root;
    t.nodes_map_[root] = true;
    std::size_t leaf_count = 1;

    auto check_budget = [&](int level) {
        if (leaf_count > memory_budget / bytes_per_leaf())
            throw build_error("cannot build the tree at level " + std::to_string(level) + ": " +
                std::to_string(leaf_count) + " leaves need about " +
                std::to_string(leaf_count * (bytes_per_leaf() >> 10) >> 10) +
                " MiB, over the " + std::to_string(memory_budget >> 20) + " MiB budget");
    };

    auto refine = [&](node_key const& k) {
        t.nodes_map_[k] = false;
        for (int o = 0; o != 8; ++o)
            t.nodes_map_[k.child(o)] = true;
        leaf_count += 7;
    };

    auto wants_refinement = [&](node_key const& k) {
        for (int kk = 0; kk != sub_n; ++kk)
            for (int j = 0; j != sub_n; ++j)
                for (int i = 0; i != sub_n; ++i)
                {
                    vec3 p = geom.cell_center(k.level,
                        {k.x[0] * sub_n + i, k.x[1] * sub_n + j, k.x[2] * sub_n + kk});
                    if (density(p) > crit.threshold)
                        return true;
                }
        return false;
    };

    try
    {
        std::vector<node_key> frontier{root};
        for (int level = 0; level < crit.max_level; ++level)
        {
            std::vector<node_key> next;
            for (auto const& k : frontier)
            {
                if (!wants_refinement(k))
                    continue;
                refine(k);
                for (int o = 0; o != 8; ++o)
                    next.push_back(k.child(o));
                check_budget(level + 1);
            }
            frontier = std::move(next);
        }

        // 2:1 face balance: a leaf whose face neighbour region is two or more
        // levels coarser forces that coarser leaf to refine.
        for (bool changed = true; changed;)
        {
            changed = false;
            std::vector<node_key> leaves;
            for (auto const& [k, leaf] : t.nodes_map_)
                if (leaf)
                    leaves.push_back(k);
            for (auto const& l : leaves)
            {
                for (int face = 0; face != n_faces; ++face)
                {
                    node_key nk = l;
                    nk.x[face_axis(face)] += face_side(face);
                    if (!nk.in_domain() || t.exists(nk) || nk.level == 0 || t.exists(nk.parent()))
                        continue;
                    node_key a = nk.parent().parent();
                    while (!t.exists(a))
                        a = a.parent();
                    if (t.is_leaf(a))
                    {
                        refine(a);
                        check_budget(a.level + 1);
                        changed = true;
                    }
                }
            }
        }
    }
    catch (std::bad_alloc const&)
    {
        throw build_error("cannot build the tree at level " + std::to_string(crit.max_level) +
            ": out of memory");
    }

    t.finalize();
    return t;
}

octree octree::from_leaves(domain_geometry geom, std::vector<node_key> const& leaves)
{
    octree t;
    t.geom_ = geom;
    // Exact volume check in units of the finest level's octants.
    int finest = 0;
    for (auto const& k : leaves)
        finest = std::max(finest, k.level);
    unsigned __int128 covered = 0;
    for (auto const& k : leaves)
    {
        if (!k.in_domain() || !t.nodes_map_.emplace(k, true).second)
            throw build_error("leaf set repeats or leaves the domain");
        covered += static_cast<unsigned __int128>(1) << (3 * (finest - k.level));
        for (node_key a = k; a.level > 0;)
        {
            a = a.parent();
            auto [it, fresh] = t.nodes_map_.emplace(a, false);
            if (it->second)
                throw build_error("leaf set nests a leaf inside another");
            if (!fresh)
                break;
        }
    }
    if (covered != static_cast<unsigned __int128>(1) << (3 * finest))
        throw build_error("leaf set does not tile the domain");
    t.finalize();
    return t;
}

void octree::finalize()
{
    nodes_.clear();
    leaves_.clear();
    leaf_pos_.clear();
    std::vector<node_key> stack{node_key{}};
    while (!stack.empty())
    {
        auto k = stack.back();
        stack.pop_back();
        nodes_.push_back(k);
        if (nodes_map_.at(k))
        {
            leaf_pos_[k] = leaves_.size();
            leaves_.push_back(k);
            continue;
        }
        for (int o = 7; o >= 0; --o)
            stack.push_back(k.child(o));
    }
}

bool octree::exists(node_key const& k) const
{
    return nodes_map_.count(k) != 0;
}

bool octree::is_leaf(node_key const& k) const
{
    auto it = nodes_map_.find(k);
    return it != nodes_map_.end() && it->second;
}

std::size_t octree::leaf_index(node_key const& k) const
{
    auto it = leaf_pos_.find(k);
    if (it == leaf_pos_.end())
        throw std::out_of_range("node is not a leaf");
    return it->second;
}

face_neighbors octree::neighbors(std::size_t leaf, int face) const
{
    node_key const& l = leaves_.at(leaf);
    int a = face_axis(face);
    int s = face_side(face);
    node_key nk = l;
    nk.x[a] += s;
    face_neighbors out;
    if (!nk.in_domain())
        return out;
    auto it = nodes_map_.find(nk);
    if (it != nodes_map_.end())
    {
        if (it->second)
        {
            out.kind = neighbor_kind::same;
            out.leaves.push_back(leaf_pos_.at(nk));
            return out;
        }
        out.kind = neighbor_kind::finer;
        int want = s > 0 ? 0 : 1;
        for (int o = 0; o != 8; ++o)
            if (((o >> a) & 1) == want)
                out.leaves.push_back(leaf_pos_.at(nk.child(o)));
        return out;
    }
    out.kind = neighbor_kind::coarser;
    out.leaves.push_back(leaf_pos_.at(nk.parent()));
    return out;
}

census octree::census() const
{
    struct census c;
    c.leaf_count = leaves_.size();
    c.node_count = nodes_.size();
    c.cell_count = c.leaf_count * sub_cells;
    for (auto const& k : leaves_)
    {
        if (static_cast<std::size_t>(k.level) >= c.leaves_per_level.size())
            c.leaves_per_level.resize(k.level + 1, 0);
        ++c.leaves_per_level[k.level];
    }
    return c;
}

}    // namespace amt::amr
