#pragma once

#include <amt/amr/config.hpp>
#include <amt/amr/geometry.hpp>
#include <amt/amr/octree.hpp>

#include <array>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace amt::amr {

/// Negative density or pressure produced by an update.
class step_fault : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Interior state of one leaf, field-major: values[var * 512 + cell_index].
using leaf_state = std::vector<double>;

/// One face's 8x8 layer of a quantity with n_fields components:
/// values[(v * 8 + u) * n_fields + var], u/v along the face's tangents.
using face_layer = std::vector<double>;

/// The 512-cell block of a leaf plus its 1-cell ghost shell, the potential
/// (interior and face ghosts) and the face fluxes of the current step.
struct subgrid
{
    node_key key;
    double h = 0;
    std::array<std::vector<double>, n_fields> u;    // pad_cells each
    std::vector<double> phi;                         // pad_cells
    std::array<std::vector<double>, 3> flux;        // per axis: 9*64*n_fields

    subgrid() = default;
    subgrid(node_key k, domain_geometry const& geom);

    double& at(int var, int i, int j, int k)
    {
        return u[var][pad_index(i, j, k)];
    }
    double at(int var, int i, int j, int k) const
    {
        return u[var][pad_index(i, j, k)];
    }

    leaf_state export_state() const;
    void import_state(leaf_state const& s);

    /// Global cell index of local (i, j, k) along each axis.
    std::array<std::int64_t, 3> global_index(int i, int j, int k) const noexcept
    {
        return {key.x[0] * sub_n + i, key.x[1] * sub_n + j, key.x[2] * sub_n + k};
    }
};

/// Padded coordinates of cell (u, v) of the layer at depth `d` inside the
/// face (d = 0 interior boundary layer, d = -1 ghost layer).
std::array<int, 3> face_cell(int face, int u, int v, int depth) noexcept;

inline std::size_t flux_index(int p, int u, int v, int var) noexcept
{
    return static_cast<std::size_t>(((p * sub_n + v) * sub_n + u) * n_fields + var);
}

double pressure(conserved const& q, double gamma) noexcept;

/// Rusanov (local Lax-Friedrichs) flux through a face normal to `axis`.
conserved rusanov_flux(conserved const& left, conserved const& right, int axis, double gamma) noexcept;

/// Conservative initial state from a closure evaluated at cell centres.
leaf_state sample_state(node_key const& key, domain_geometry const& geom,
    std::function<conserved(vec3 const&)> const& init);

/// Ghost shell of leaf `leaf` from the interior states of all leaves:
/// same level copies, coarser neighbours give piecewise-constant values,
/// finer neighbours the volume average of the covering 2x2x2 fine cells,
/// domain walls mirror the interior with the normal momentum negated.
/// Result: n_faces face layers, concatenated.
std::vector<double> assemble_ghosts(octree const& tree, std::size_t leaf,
    std::function<leaf_state const&(std::size_t)> const& state_of);

void apply_ghosts(subgrid& g, std::vector<double> const& ghosts);

/// Fills g.flux from the current interior and ghost values.
void compute_fluxes(subgrid& g, double gamma, kernel_kind kernel);

/// Fluxes on one face of the block (faces normal to the axis at p = 0 or 8).
face_layer boundary_fluxes(subgrid const& g, int face);

/// Replace a face's fluxes with the area-average of the finer neighbours'
/// fluxes through the same surface (refluxing; keeps mass exact).
face_layer restrict_fine_fluxes(octree const& tree, std::size_t coarse_leaf, int face,
    std::function<face_layer const&(std::size_t fine_leaf)> const& fine_flux);

void set_boundary_fluxes(subgrid& g, int face, face_layer const& f);

/// Explicit update with the stored fluxes and, if `gravity`, the source
/// terms rho*g and m.g with g = -grad(phi) from central differences.
/// Returns the leaf mass sum(rho) h^3. Throws step_fault naming the cell.
double update(subgrid& g, double dt, double gamma, bool gravity, kernel_kind kernel);

/// Largest stable dt for the leaf: min over cells h / sum_axes(|u_a| + c).
double dt_limit(subgrid const& g, double gamma);

/// Sum of rho h^3 over the interior, in cell order.
double leaf_mass(subgrid const& g);

/// Runs fn(i, j, k, l) over extents natively or on an exec-spaces
/// task_pool of the current runtime. Results must not depend on order.
void for_each_index(kernel_kind kernel, std::array<int, 4> extents,
    std::function<void(int, int, int, int)> const& fn);

}    // namespace amt::amr
