#include <amt/amr/gravity.hpp>
#include <amt/amr/subgrid.hpp>

#include <cmath>
#include <stdexcept>

namespace amt::amr {

namespace {

    struct builder
    {
        octree const& tree;
        std::span<double const> masses;
        domain_geometry geom;
        std::vector<gravity_tree::node>& out;

        void finish(std::size_t self, std::size_t first)
        {
            auto& n = out[self];
            n.first_child = static_cast<std::int32_t>(first);
            double m = 0, cx = 0, cy = 0, cz = 0;
            for (std::size_t c = first; c != first + 8; ++c)
            {
                auto const& cm = out[c].m;
                m += cm.mass;
                cx += cm.mass * cm.com[0];
                cy += cm.mass * cm.com[1];
                cz += cm.mass * cm.com[2];
            }
            n.m.mass = m;
            if (m > 0)
                n.m.com = {cx / m, cy / m, cz / m};
            else
                n.m.com = {n.lo[0] + 0.5 * n.size, n.lo[1] + 0.5 * n.size, n.lo[2] + 0.5 * n.size};
        }

        // Block of `w` cells per edge at local offset o inside leaf `leaf`.
        void block(std::size_t self, std::size_t leaf, int w, std::array<int, 3> o)
        {
            node_key const& k = tree.leaves()[leaf];
            double h = geom.cell_width(k.level);
            auto& n = out[self];
            n.level = k.level;
            if (w == 1)
            {
                n.is_cell = true;
                n.size = h;
                auto g = std::array<std::int64_t, 3>{
                    k.x[0] * sub_n + o[0], k.x[1] * sub_n + o[1], k.x[2] * sub_n + o[2]};
                n.m.com = geom.cell_center(k.level, g);
                n.m.mass = masses[leaf * sub_cells + cell_index(o[0], o[1], o[2])];
                for (int a = 0; a != 3; ++a)
                    n.lo[a] = n.m.com[a] - 0.5 * h;
                return;
            }
            n.size = w * h;
            for (int a = 0; a != 3; ++a)
                n.lo[a] = geom.node_origin(k.level, k.x[a]) + o[a] * h;
            std::size_t first = out.size();
            out.resize(first + 8);
            int half = w / 2;
            for (int c = 0; c != 8; ++c)
                block(first + c, leaf, half,
                    {o[0] + half * (c & 1), o[1] + half * ((c >> 1) & 1),
                        o[2] + half * ((c >> 2) & 1)});
            finish(self, first);
        }

        void node(std::size_t self, node_key const& k)
        {
            if (tree.is_leaf(k))
            {
                block(self, tree.leaf_index(k), sub_n, {0, 0, 0});
                return;
            }
            auto& n = out[self];
            n.level = k.level;
            n.size = geom.node_width(k.level);
            for (int a = 0; a != 3; ++a)
                n.lo[a] = geom.node_origin(k.level, k.x[a]);
            std::size_t first = out.size();
            out.resize(first + 8);
            for (int c = 0; c != 8; ++c)
                node(first + c, k.child(c));
            finish(self, first);
        }
    };

    double distance(vec3 const& a, vec3 const& b) noexcept
    {
        double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
        return std::sqrt(dx * dx + dy * dy + dz * dz);
    }

}    // namespace

gravity_tree gravity_tree::build(octree const& tree, std::span<double const> masses)
{
    if (masses.size() != tree.leaves().size() * sub_cells)
        throw std::invalid_argument("gravity_tree: need 512 masses per leaf");
    gravity_tree g;
    g.nodes_.reserve(tree.nodes().size() + tree.leaves().size() * (1 + 8 + 64 + 512));
    g.nodes_.resize(1);
    builder b{tree, masses, tree.geometry(), g.nodes_};
    b.node(0, node_key{});
    return g;
}

double gravity_tree::potential(vec3 const& x, double theta) const
{
    if (!(theta >= 0))
        throw std::invalid_argument("theta must be non-negative");
    double phi = 0;
    std::int32_t stack[512];
    int top = 0;
    stack[top++] = 0;
    while (top > 0)
    {
        auto const& n = nodes_[stack[--top]];
        if (n.m.mass == 0)
            continue;
        double d = distance(x, n.m.com);
        if (n.is_cell)
        {
            if (d > 0)
                phi -= n.m.mass / d;
            continue;
        }
        bool inside = x[0] >= n.lo[0] && x[0] <= n.lo[0] + n.size && x[1] >= n.lo[1] &&
            x[1] <= n.lo[1] + n.size && x[2] >= n.lo[2] && x[2] <= n.lo[2] + n.size;
        if (!inside && n.size < theta * d)
        {
            phi -= n.m.mass / d;
            continue;
        }
        for (int c = 7; c >= 0; --c)
            stack[top++] = n.first_child + c;
    }
    return phi;
}

std::vector<point_mass> cell_point_masses(octree const& tree, std::span<double const> masses)
{
    std::vector<point_mass> out;
    out.reserve(masses.size());
    auto const& geom = tree.geometry();
    for (std::size_t l = 0; l != tree.leaves().size(); ++l)
    {
        auto const& k = tree.leaves()[l];
        for (int kk = 0; kk != sub_n; ++kk)
            for (int j = 0; j != sub_n; ++j)
                for (int i = 0; i != sub_n; ++i)
                    out.push_back({geom.cell_center(k.level,
                                       {k.x[0] * sub_n + i, k.x[1] * sub_n + j, k.x[2] * sub_n + kk}),
                        masses[l * sub_cells + cell_index(i, j, kk)]});
    }
    return out;
}

double direct_potential(std::span<point_mass const> points, vec3 const& x)
{
    double phi = 0;
    for (auto const& p : points)
    {
        double d = distance(x, p.x);
        if (d > 0)
            phi -= p.m / d;
    }
    return phi;
}

std::vector<vec3> leaf_potential_points(node_key const& key, domain_geometry const& geom)
{
    std::vector<vec3> pts;
    pts.reserve(sub_cells + n_faces * face_cells);
    for (int k = 0; k != sub_n; ++k)
        for (int j = 0; j != sub_n; ++j)
            for (int i = 0; i != sub_n; ++i)
                pts.push_back(geom.cell_center(key.level,
                    {key.x[0] * sub_n + i, key.x[1] * sub_n + j, key.x[2] * sub_n + k}));
    for (int face = 0; face != n_faces; ++face)
        for (int v = 0; v != sub_n; ++v)
            for (int u = 0; u != sub_n; ++u)
            {
                auto c = face_cell(face, u, v, -1);
                pts.push_back(geom.cell_center(key.level,
                    {key.x[0] * sub_n + c[0], key.x[1] * sub_n + c[1], key.x[2] * sub_n + c[2]}));
            }
    return pts;
}

}    // namespace amt::amr
