#include <amt/amr/subgrid.hpp>
#include <amt/exec.hpp>
#include <amt/task.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace amt::amr {

subgrid::subgrid(node_key k, domain_geometry const& geom)
  : key(k)
  , h(geom.cell_width(k.level))
  , phi(pad_cells, 0.0)
{
    for (auto& f : u)
        f.assign(pad_cells, 0.0);
    for (auto& f : flux)
        f.assign((sub_n + 1) * face_cells * n_fields, 0.0);
}

leaf_state subgrid::export_state() const
{
    leaf_state s(n_fields * sub_cells);
    for (int var = 0; var != n_fields; ++var)
        for (int k = 0; k != sub_n; ++k)
            for (int j = 0; j != sub_n; ++j)
                for (int i = 0; i != sub_n; ++i)
                    s[var * sub_cells + cell_index(i, j, k)] = at(var, i, j, k);
    return s;
}

void subgrid::import_state(leaf_state const& s)
{
    if (s.size() != static_cast<std::size_t>(n_fields * sub_cells))
        throw std::invalid_argument("leaf state must hold 5 x 512 values");
    for (int var = 0; var != n_fields; ++var)
        for (int k = 0; k != sub_n; ++k)
            for (int j = 0; j != sub_n; ++j)
                for (int i = 0; i != sub_n; ++i)
                    at(var, i, j, k) = s[var * sub_cells + cell_index(i, j, k)];
}

std::array<int, 3> face_cell(int face, int u, int v, int depth) noexcept
{
    int a = face_axis(face);
    auto t = face_tangents(face);
    std::array<int, 3> c{};
    c[a] = face_side(face) < 0 ? depth : sub_n - 1 - depth;
    c[t[0]] = u;
    c[t[1]] = v;
    return c;
}

double pressure(conserved const& q, double gamma) noexcept
{
    double kinetic = 0.5 * (q[f_mx] * q[f_mx] + q[f_my] * q[f_my] + q[f_mz] * q[f_mz]) / q[f_rho];
    return (gamma - 1.0) * (q[f_e] - kinetic);
}

namespace {

    conserved physical_flux(conserved const& q, double p, int axis) noexcept
    {
        double un = q[f_mx + axis] / q[f_rho];
        conserved f;
        f[f_rho] = q[f_mx + axis];
        f[f_mx] = q[f_mx] * un;
        f[f_my] = q[f_my] * un;
        f[f_mz] = q[f_mz] * un;
        f[f_mx + axis] += p;
        f[f_e] = (q[f_e] + p) * un;
        return f;
    }

    double sound_speed(double rho, double p, double gamma) noexcept
    {
        return std::sqrt(gamma * std::max(p, 0.0) / rho);
    }

    conserved load(subgrid const& g, int i, int j, int k) noexcept
    {
        conserved q;
        for (int var = 0; var != n_fields; ++var)
            q[var] = g.at(var, i, j, k);
        return q;
    }

    std::string describe(node_key const& key, int i, int j, int k)
    {
        std::ostringstream os;
        os << "leaf (level " << key.level << ", " << key.x[0] << "," << key.x[1] << ","
           << key.x[2] << ") cell (" << i << "," << j << "," << k << ")";
        return os.str();
    }

}    // namespace

conserved rusanov_flux(conserved const& left, conserved const& right, int axis, double gamma) noexcept
{
    double pl = pressure(left, gamma);
    double pr = pressure(right, gamma);
    auto fl = physical_flux(left, pl, axis);
    auto fr = physical_flux(right, pr, axis);
    double sl = std::abs(left[f_mx + axis] / left[f_rho]) + sound_speed(left[f_rho], pl, gamma);
    double sr = std::abs(right[f_mx + axis] / right[f_rho]) + sound_speed(right[f_rho], pr, gamma);
    double s = std::max(sl, sr);
    conserved f;
    for (int var = 0; var != n_fields; ++var)
        f[var] = 0.5 * (fl[var] + fr[var]) - 0.5 * s * (right[var] - left[var]);
    return f;
}

leaf_state sample_state(node_key const& key, domain_geometry const& geom,
    std::function<conserved(vec3 const&)> const& init)
{
    leaf_state s(n_fields * sub_cells);
    for (int k = 0; k != sub_n; ++k)
        for (int j = 0; j != sub_n; ++j)
            for (int i = 0; i != sub_n; ++i)
            {
                auto q = init(geom.cell_center(key.level,
                    {key.x[0] * sub_n + i, key.x[1] * sub_n + j, key.x[2] * sub_n + k}));
                for (int var = 0; var != n_fields; ++var)
                    s[var * sub_cells + cell_index(i, j, k)] = q[var];
            }
    return s;
}

std::vector<double> assemble_ghosts(octree const& tree, std::size_t leaf,
    std::function<leaf_state const&(std::size_t)> const& state_of)
{
    auto const& leaves = tree.leaves();
    node_key const& me = leaves[leaf];
    std::vector<double> out(n_faces * face_cells * n_fields);
    auto value = [](leaf_state const& s, int var, std::array<int, 3> const& c) {
        return s[var * sub_cells + cell_index(c[0], c[1], c[2])];
    };

    for (int face = 0; face != n_faces; ++face)
    {
        int a = face_axis(face);
        auto t = face_tangents(face);
        auto nb = tree.neighbors(leaf, face);
        double* dst = out.data() + face * face_cells * n_fields;
        for (int v = 0; v != sub_n; ++v)
            for (int u = 0; u != sub_n; ++u)
            {
                double* q = dst + (v * sub_n + u) * n_fields;
                switch (nb.kind)
                {
                case neighbor_kind::boundary: {
                    auto const& s = state_of(leaf);
                    auto c = face_cell(face, u, v, 0);
                    for (int var = 0; var != n_fields; ++var)
                        q[var] = value(s, var, c);
                    q[f_mx + a] = -q[f_mx + a];
                    break;
                }
                case neighbor_kind::same: {
                    auto const& s = state_of(nb.leaves[0]);
                    auto c = face_cell(opposite_face(face), u, v, 0);
                    for (int var = 0; var != n_fields; ++var)
                        q[var] = value(s, var, c);
                    break;
                }
                case neighbor_kind::coarser: {
                    node_key const& ck = leaves[nb.leaves[0]];
                    auto const& s = state_of(nb.leaves[0]);
                    std::int64_t gu = (me.x[t[0]] * sub_n + u) >> 1;
                    std::int64_t gv = (me.x[t[1]] * sub_n + v) >> 1;
                    auto c = face_cell(opposite_face(face),
                        static_cast<int>(gu - ck.x[t[0]] * sub_n),
                        static_cast<int>(gv - ck.x[t[1]] * sub_n), 0);
                    for (int var = 0; var != n_fields; ++var)
                        q[var] = value(s, var, c);
                    break;
                }
                case neighbor_kind::finer: {
                    std::int64_t fu = 2 * (me.x[t[0]] * sub_n + u);
                    std::int64_t fv = 2 * (me.x[t[1]] * sub_n + v);
                    std::size_t fine = nb.leaves[0];
                    for (auto idx : nb.leaves)
                    {
                        node_key const& fk = leaves[idx];
                        if (fu >= fk.x[t[0]] * sub_n && fu < (fk.x[t[0]] + 1) * sub_n &&
                            fv >= fk.x[t[1]] * sub_n && fv < (fk.x[t[1]] + 1) * sub_n)
                            fine = idx;
                    }
                    node_key const& fk = leaves[fine];
                    auto const& s = state_of(fine);
                    int lu = static_cast<int>(fu - fk.x[t[0]] * sub_n);
                    int lv = static_cast<int>(fv - fk.x[t[1]] * sub_n);
                    for (int var = 0; var != n_fields; ++var)
                    {
                        double sum = 0;
                        for (int d = 0; d != 2; ++d)
                            for (int dv = 0; dv != 2; ++dv)
                                for (int du = 0; du != 2; ++du)
                                    sum += value(s, var,
                                        face_cell(opposite_face(face), lu + du, lv + dv, d));
                        q[var] = 0.125 * sum;
                    }
                    break;
                }
                }
            }
    }
    return out;
}

void apply_ghosts(subgrid& g, std::vector<double> const& ghosts)
{
    if (ghosts.size() != static_cast<std::size_t>(n_faces * face_cells * n_fields))
        throw std::invalid_argument("ghost shell must hold 6 x 64 x 5 values");
    for (int face = 0; face != n_faces; ++face)
        for (int v = 0; v != sub_n; ++v)
            for (int u = 0; u != sub_n; ++u)
            {
                auto c = face_cell(face, u, v, -1);
                double const* q = ghosts.data() + (face * face_cells + v * sub_n + u) * n_fields;
                for (int var = 0; var != n_fields; ++var)
                    g.at(var, c[0], c[1], c[2]) = q[var];
            }
}

void for_each_index(kernel_kind kernel, std::array<int, 4> extents,
    std::function<void(int, int, int, int)> const& fn)
{
    if (kernel == kernel_kind::native)
    {
        for (int a = 0; a != extents[0]; ++a)
            for (int b = 0; b != extents[1]; ++b)
                for (int c = 0; c != extents[2]; ++c)
                    for (int d = 0; d != extents[3]; ++d)
                        fn(a, b, c, d);
        return;
    }
    auto* rt = amt::runtime::current();
    std::size_t tasks = rt ? rt->worker_count() : 1;
    auto space = exec::execution_space::task_pool(tasks);
    exec::md_extents ext{static_cast<std::size_t>(extents[0]), static_cast<std::size_t>(extents[1]),
        static_cast<std::size_t>(extents[2]), static_cast<std::size_t>(extents[3])};
    auto body = [&fn](exec::md_index const& i) {
        fn(static_cast<int>(i[0]), static_cast<int>(i[1]), static_cast<int>(i[2]),
            static_cast<int>(i[3]));
    };
    exec::parallel_for_md(space, ext, body).get();
}

void compute_fluxes(subgrid& g, double gamma, kernel_kind kernel)
{
    for_each_index(kernel, {3, sub_n + 1, sub_n, sub_n}, [&](int a, int p, int v, int u) {
        auto t = face_tangents(2 * a);
        std::array<int, 3> r{};
        r[a] = p;
        r[t[0]] = u;
        r[t[1]] = v;
        std::array<int, 3> l = r;
        l[a] = p - 1;
        auto f = rusanov_flux(load(g, l[0], l[1], l[2]), load(g, r[0], r[1], r[2]), a, gamma);
        for (int var = 0; var != n_fields; ++var)
            g.flux[a][flux_index(p, u, v, var)] = f[var];
    });
}

face_layer boundary_fluxes(subgrid const& g, int face)
{
    int a = face_axis(face);
    int p = face_side(face) < 0 ? 0 : sub_n;
    face_layer out(face_cells * n_fields);
    for (int v = 0; v != sub_n; ++v)
        for (int u = 0; u != sub_n; ++u)
            for (int var = 0; var != n_fields; ++var)
                out[(v * sub_n + u) * n_fields + var] = g.flux[a][flux_index(p, u, v, var)];
    return out;
}

void set_boundary_fluxes(subgrid& g, int face, face_layer const& f)
{
    if (f.size() != static_cast<std::size_t>(face_cells * n_fields))
        throw std::invalid_argument("face flux layer must hold 64 x 5 values");
    int a = face_axis(face);
    int p = face_side(face) < 0 ? 0 : sub_n;
    for (int v = 0; v != sub_n; ++v)
        for (int u = 0; u != sub_n; ++u)
            for (int var = 0; var != n_fields; ++var)
                g.flux[a][flux_index(p, u, v, var)] = f[(v * sub_n + u) * n_fields + var];
}

face_layer restrict_fine_fluxes(octree const& tree, std::size_t coarse_leaf, int face,
    std::function<face_layer const&(std::size_t)> const& fine_flux)
{
    auto const& leaves = tree.leaves();
    node_key const& me = leaves[coarse_leaf];
    auto nb = tree.neighbors(coarse_leaf, face);
    if (nb.kind != neighbor_kind::finer)
        throw std::logic_error("flux restriction needs finer neighbours");
    auto t = face_tangents(face);
    face_layer out(face_cells * n_fields);
    for (auto idx : nb.leaves)
    {
        node_key const& fk = leaves[idx];
        auto const& ff = fine_flux(idx);
        for (int v = 0; v != sub_n; ++v)
            for (int u = 0; u != sub_n; ++u)
            {
                std::int64_t fu = 2 * (me.x[t[0]] * sub_n + u) - fk.x[t[0]] * sub_n;
                std::int64_t fv = 2 * (me.x[t[1]] * sub_n + v) - fk.x[t[1]] * sub_n;
                if (fu < 0 || fu >= sub_n || fv < 0 || fv >= sub_n)
                    continue;
                for (int var = 0; var != n_fields; ++var)
                {
                    double sum = 0;
                    for (int dv = 0; dv != 2; ++dv)
                        for (int du = 0; du != 2; ++du)
                            sum += ff[((fv + dv) * sub_n + (fu + du)) * n_fields + var];
                    out[(v * sub_n + u) * n_fields + var] = 0.25 * sum;
                }
            }
    }
    return out;
}

double update(subgrid& g, double dt, double gamma, bool gravity, kernel_kind kernel)
{
    double const c = dt / g.h;
    for_each_index(kernel, {1, sub_n, sub_n, sub_n}, [&](int, int k, int j, int i) {
        std::array<int, 3> x{i, j, k};
        conserved q = load(g, i, j, k);
        conserved next = q;
        for (int a = 0; a != 3; ++a)
        {
            auto t = face_tangents(2 * a);
            int p = x[a];
            int u = x[t[0]];
            int v = x[t[1]];
            for (int var = 0; var != n_fields; ++var)
                next[var] -= c *
                    (g.flux[a][flux_index(p + 1, u, v, var)] - g.flux[a][flux_index(p, u, v, var)]);
        }
        if (gravity)
        {
            for (int a = 0; a != 3; ++a)
            {
                std::array<int, 3> hi = x, lo = x;
                ++hi[a];
                --lo[a];
                double ga = -(g.phi[pad_index(hi[0], hi[1], hi[2])] -
                               g.phi[pad_index(lo[0], lo[1], lo[2])]) /
                    (2.0 * g.h);
                next[f_mx + a] += dt * q[f_rho] * ga;
                next[f_e] += dt * q[f_mx + a] * ga;
            }
        }
        for (int var = 0; var != n_fields; ++var)
            g.at(var, i, j, k) = next[var];
    });

    for (int k = 0; k != sub_n; ++k)
        for (int j = 0; j != sub_n; ++j)
            for (int i = 0; i != sub_n; ++i)
            {
                auto q = load(g, i, j, k);
                if (!(q[f_rho] > 0))
                    throw step_fault("non-positive density " + std::to_string(q[f_rho]) + " at " +
                        describe(g.key, i, j, k));
                double p = pressure(q, gamma);
                if (!(p >= 0))
                    throw step_fault("negative pressure " + std::to_string(p) + " at " +
                        describe(g.key, i, j, k));
            }
    return leaf_mass(g);
}

double dt_limit(subgrid const& g, double gamma)
{
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k != sub_n; ++k)
        for (int j = 0; j != sub_n; ++j)
            for (int i = 0; i != sub_n; ++i)
            {
                auto q = load(g, i, j, k);
                double cs = sound_speed(q[f_rho], pressure(q, gamma), gamma);
                double s = 0;
                for (int a = 0; a != 3; ++a)
                    s += std::abs(q[f_mx + a] / q[f_rho]) + cs;
                if (s > 0)
                    best = std::min(best, g.h / s);
            }
    return best;
}

double leaf_mass(subgrid const& g)
{
    double sum = 0;
    for (int k = 0; k != sub_n; ++k)
        for (int j = 0; j != sub_n; ++j)
            for (int i = 0; i != sub_n; ++i)
                sum += g.at(f_rho, i, j, k);
    return sum * g.h * g.h * g.h;
}

}    // namespace amt::amr
