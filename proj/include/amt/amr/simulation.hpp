#pragma once

#include <amt/amr/config.hpp>
#include <amt/amr/geometry.hpp>
#include <amt/amr/octree.hpp>
#include <amt/amr/subgrid.hpp>
#include <amt/distrib/locality.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace amt::amr {

using init_fn = std::function<conserved(vec3 const&)>;

/// Gaussian density rho = exp(-r^2/r0^2) + floor, rigid rotation omega
/// about z, polytropic pressure p = K rho^gamma.
init_fn rotating_star(amr_config const& cfg);

/// leaf_count * 512 * steps / wall_seconds. Throws configuration_error for
/// wall_seconds <= 0 or steps <= 0.
double cells_per_second(std::size_t leaf_count, int steps, double wall_seconds);

struct run_metrics
{
    double wall_seconds = 0;
    std::size_t leaf_count = 0;
    int steps = 0;
    double cells_per_second = 0;             // leaf_count * 512 * steps / wall
    double cells_per_second_per_step = 0;    // leaf_count * 512 / wall
    double simulated_time = 0;
    double mass_initial = 0;
    double mass_final = 0;
    double max_step_mass_drift = 0;          // max |dM| / M over the steps
};

struct step_report
{
    double dt = 0;
    double mass_before = 0;
    double mass_after = 0;
};

/// Any sub-operation of a step failed; what() starts with the step index.
class run_error : public std::runtime_error
{
  public:
    run_error(int step, std::string const& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what)
      , step_(step)
    {
    }
    int step() const noexcept
    {
        return step_;
    }

  private:
    int step_;
};

/// Registers the AMR component factories on a locality. Must run on every
/// locality of the job before bootstrap completes.
void install(distrib::locality& loc);

/// Driver of an octree run. Lives on the supervisor; every leaf sub-grid is
/// a component placed by level-1 subtree round-robin over the localities and
/// driven only through invoke_action. One solver component per locality
/// holds the topology and the gravity tree shared by that locality's leaves.
class simulation
{
  public:
    simulation(distrib::locality& loc, amr_config cfg);

    /// Rotating star refined with the configured criterion.
    void build();
    void build(octree topology, init_fn const& init);

    octree const& tree() const noexcept
    {
        return tree_;
    }
    amr_config const& config() const noexcept
    {
        return cfg_;
    }
    distrib::locality_id owner(std::size_t leaf) const;

    void exchange_ghosts();
    void gravity_solve();
    double stable_dt();
    void hydro_step(double dt);

    /// exchange_ghosts -> gravity_solve -> hydro_step(stable_dt()).
    step_report step();
    run_metrics advance(int steps);

    std::vector<leaf_state> gather_state();
    std::vector<std::vector<double>> gather_potential();    // 512 per leaf
    std::vector<std::vector<double>> gather_ghosts();       // 6*64*5 per leaf
    double total_mass();

    /// FNV-1a over leaf keys and interior states in canonical leaf order.
    std::uint64_t state_hash();

  private:
    void refresh_states();

    distrib::locality& loc_;
    amr_config cfg_;
    octree tree_;
    std::vector<distrib::gid> solvers_;
    std::vector<distrib::gid> leaves_;
    std::vector<leaf_state> states_;
    std::vector<double> dt_limits_;
    int step_index_ = 0;
};

std::string format_hash(std::uint64_t h);

}    // namespace amt::amr
