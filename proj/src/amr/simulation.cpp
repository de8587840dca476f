#include <amt/amr/gravity.hpp>
#include <amt/amr/simulation.hpp>
#include <amt/errors.hpp>
#include <amt/task.hpp>
#include <amt/timebase.hpp>

#include <bit>
#include <cmath>
#include <limits>
#include <cstdio>
#include <mutex>
#include <unordered_map>

namespace amt::amr {

using distrib::byte_buffer;
using distrib::byte_reader;
using distrib::byte_view;
using distrib::byte_writer;
using distrib::gid;
using distrib::locality;

init_fn rotating_star(amr_config const& cfg)
{
    return [r0 = cfg.r0, floor = cfg.density_floor, omega = cfg.omega, k = cfg.polytropic_k,
               gamma = cfg.gamma](vec3 const& x) {
        double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        double rho = std::exp(-r2 / (r0 * r0)) + floor;
        double ux = -omega * x[1];
        double uy = omega * x[0];
        double p = k * std::pow(rho, gamma);
        conserved q;
        q[f_rho] = rho;
        q[f_mx] = rho * ux;
        q[f_my] = rho * uy;
        q[f_mz] = 0.0;
        q[f_e] = p / (gamma - 1.0) + 0.5 * rho * (ux * ux + uy * uy);
        return q;
    };
}

double cells_per_second(std::size_t leaf_count, int steps, double wall_seconds)
{
    if (!(wall_seconds > 0))
        throw configuration_error("wall_seconds must be positive");
    if (steps <= 0)
        throw configuration_error("steps must be positive");
    return static_cast<double>(leaf_count) * sub_cells * steps / wall_seconds;
}

std::string format_hash(std::uint64_t h)
{
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

    constexpr std::uint32_t solver_type = 0x414d5201;
    constexpr std::uint32_t leaf_type = 0x414d5202;

    enum solver_action : std::uint32_t
    {
        sa_set_masses = 1
    };

    enum leaf_action : std::uint32_t
    {
        la_set_state = 1,
        la_export,
        la_set_ghosts,
        la_potential,
        la_flux,
        la_update,
        la_get_potential,
        la_get_ghosts
    };

    struct solver_state
    {
        amr_config cfg;
        octree tree;
        std::mutex m;
        std::shared_ptr<gravity_tree const> gtree;

        std::shared_ptr<gravity_tree const> current_tree()
        {
            std::lock_guard lk(m);
            return gtree;
        }
    };

    struct registry
    {
        std::mutex m;
        std::unordered_map<std::uint64_t, std::shared_ptr<solver_state>> solvers;
    };

    void put_key(byte_writer& w, node_key const& k)
    {
        w.put<std::int32_t>(k.level);
        for (auto v : k.x)
            w.put<std::int64_t>(v);
    }

    node_key get_key(byte_reader& r)
    {
        node_key k;
        k.level = r.get<std::int32_t>("key.level");
        for (auto& v : k.x)
            v = r.get<std::int64_t>("key.x");
        return k;
    }

    byte_buffer f64s(std::span<double const> v)
    {
        byte_writer w(4 + 8 * v.size());
        w.put_f64s(v);
        return w.take();
    }

    std::vector<byte_buffer> wait_all(std::vector<future<byte_buffer>> fs)
    {
        return when_all(std::move(fs)).get();
    }

    gid make_solver(locality& here, std::shared_ptr<registry> const& reg, byte_view args)
    {
        byte_reader r(args);
        auto st = std::make_shared<solver_state>();
        st->cfg = amr_config::parse_ini(r.get_string("config"));
        auto n = r.get<std::uint32_t>("leaf_count");
        std::vector<node_key> keys;
        keys.reserve(n);
        for (std::uint32_t i = 0; i != n; ++i)
            keys.push_back(get_key(r));
        st->tree = octree::from_leaves(domain_geometry{st->cfg.domain_size}, keys);

        distrib::component_actions acts;
        acts.add(sa_set_masses, [st](byte_view a) {
            byte_reader rr(a);
            auto masses = rr.get_f64s("masses");
            auto g = std::make_shared<gravity_tree const>(gravity_tree::build(st->tree, masses));
            std::lock_guard lk(st->m);
            st->gtree = std::move(g);
            return byte_buffer{};
        });
        auto g = here.register_component(st, std::move(acts));
        std::lock_guard lk(reg->m);
        reg->solvers[g.local_index] = st;
        return g;
    }

    struct leaf_component
    {
        std::shared_ptr<solver_state> solver;
        subgrid g;
    };

    gid make_leaf(locality& here, std::shared_ptr<registry> const& reg, byte_view args)
    {
        byte_reader r(args);
        auto solver_index = r.get<std::uint64_t>("solver");
        auto key = get_key(r);
        auto leaf = std::make_shared<leaf_component>();
        {
            std::lock_guard lk(reg->m);
            auto it = reg->solvers.find(solver_index);
            if (it == reg->solvers.end())
                throw std::runtime_error("leaf created before its solver");
            leaf->solver = it->second;
        }
        auto const& cfg = leaf->solver->cfg;
        leaf->g = subgrid(key, domain_geometry{cfg.domain_size});
        auto* self = leaf.get();

        distrib::component_actions acts;
        acts.add(la_set_state, [self](byte_view a) {
            byte_reader rr(a);
            self->g.import_state(rr.get_f64s("state"));
            return byte_buffer{};
        });
        acts.add(la_export, [self](byte_view) {
            byte_writer w(8 + 4 + 8 * n_fields * sub_cells);
            w.put_f64(dt_limit(self->g, self->solver->cfg.gamma));
            w.put_f64s(self->g.export_state());
            return w.take();
        });
        acts.add(la_set_ghosts, [self](byte_view a) {
            byte_reader rr(a);
            apply_ghosts(self->g, rr.get_f64s("ghosts"));
            return byte_buffer{};
        });
        acts.add(la_potential, [self](byte_view) {
            auto gt = self->solver->current_tree();
            if (!gt)
                throw std::runtime_error("potential requested before masses were set");
            auto const& cfg = self->solver->cfg;
            auto pts = leaf_potential_points(self->g.key, domain_geometry{cfg.domain_size});
            std::vector<double> phi(pts.size());
            for_each_index(cfg.kernel, {1, 1, 1, static_cast<int>(pts.size())},
                [&](int, int, int, int p) { phi[p] = gt->potential(pts[p], cfg.theta); });
            std::size_t n = 0;
            for (int k = 0; k != sub_n; ++k)
                for (int j = 0; j != sub_n; ++j)
                    for (int i = 0; i != sub_n; ++i)
                        self->g.phi[pad_index(i, j, k)] = phi[n++];
            for (int face = 0; face != n_faces; ++face)
                for (int v = 0; v != sub_n; ++v)
                    for (int u = 0; u != sub_n; ++u)
                    {
                        auto c = face_cell(face, u, v, -1);
                        self->g.phi[pad_index(c[0], c[1], c[2])] = phi[n++];
                    }
            return byte_buffer{};
        });
        acts.add(la_flux, [self](byte_view a) {
            byte_reader rr(a);
            auto mask = rr.get<std::uint8_t>("face_mask");
            auto const& cfg = self->solver->cfg;
            compute_fluxes(self->g, cfg.gamma, cfg.kernel);
            byte_writer w;
            for (int face = 0; face != n_faces; ++face)
                if (mask & (1u << face))
                    w.put_f64s(boundary_fluxes(self->g, face));
            return w.take();
        });
        acts.add(la_update, [self](byte_view a) {
            byte_reader rr(a);
            double dt = rr.get_f64("dt");
            auto mask = rr.get<std::uint8_t>("face_mask");
            for (int face = 0; face != n_faces; ++face)
                if (mask & (1u << face))
                    set_boundary_fluxes(self->g, face, rr.get_f64s("fluxes"));
            auto const& cfg = self->solver->cfg;
            double mass = update(self->g, dt, cfg.gamma, cfg.gravity, cfg.kernel);
            byte_writer w;
            w.put_f64(mass);
            return w.take();
        });
        acts.add(la_get_potential, [self](byte_view) {
            std::vector<double> phi(sub_cells);
            for (int k = 0; k != sub_n; ++k)
                for (int j = 0; j != sub_n; ++j)
                    for (int i = 0; i != sub_n; ++i)
                        phi[cell_index(i, j, k)] = self->g.phi[pad_index(i, j, k)];
            return f64s(phi);
        });
        acts.add(la_get_ghosts, [self](byte_view) {
            std::vector<double> out(n_faces * face_cells * n_fields);
            for (int face = 0; face != n_faces; ++face)
                for (int v = 0; v != sub_n; ++v)
                    for (int u = 0; u != sub_n; ++u)
                    {
                        auto c = face_cell(face, u, v, -1);
                        for (int var = 0; var != n_fields; ++var)
                            out[(face * face_cells + v * sub_n + u) * n_fields + var] =
                                self->g.at(var, c[0], c[1], c[2]);
                    }
            return f64s(out);
        });
        return here.register_component(leaf, std::move(acts));
    }

}    // namespace

void install(locality& loc)
{
    auto reg = std::make_shared<registry>();
    loc.register_factory(
        solver_type, [reg](locality& here, byte_view args) { return make_solver(here, reg, args); });
    loc.register_factory(
        leaf_type, [reg](locality& here, byte_view args) { return make_leaf(here, reg, args); });
}

simulation::simulation(locality& loc, amr_config cfg)
  : loc_(loc)
  , cfg_(std::move(cfg))
{
    cfg_.validate();
}

distrib::locality_id simulation::owner(std::size_t leaf) const
{
    return static_cast<distrib::locality_id>(tree_.leaves().at(leaf).subtree()) % loc_.count();
}

void simulation::build()
{
    domain_geometry geom{cfg_.domain_size};
    auto init = rotating_star(cfg_);
    auto topo = octree::build(geom, refinement_criterion{cfg_.max_level, cfg_.threshold},
        [&init](vec3 const& x) { return init(x)[f_rho]; });
    build(std::move(topo), init);
}

void simulation::build(octree topology, init_fn const& init)
{
    tree_ = std::move(topology);
    cfg_.domain_size = tree_.geometry().size;
    auto const& keys = tree_.leaves();

    byte_writer sa;
    sa.put_string(cfg_.to_ini());
    sa.put(static_cast<std::uint32_t>(keys.size()));
    for (auto const& k : keys)
        put_key(sa, k);
    auto solver_args = sa.take();
    std::vector<future<gid>> made;
    for (distrib::locality_id l = 0; l != loc_.count(); ++l)
        made.push_back(loc_.create_component(l, solver_type, solver_args));
    solvers_ = when_all(std::move(made)).get();

    made.clear();
    for (std::size_t i = 0; i != keys.size(); ++i)
    {
        byte_writer w;
        w.put(solvers_[owner(i)].local_index);
        put_key(w, keys[i]);
        made.push_back(loc_.create_component(owner(i), leaf_type, w.take()));
    }
    leaves_ = when_all(std::move(made)).get();

    std::vector<future<byte_buffer>> done;
    for (std::size_t i = 0; i != keys.size(); ++i)
        done.push_back(
            loc_.invoke(leaves_[i], la_set_state, f64s(sample_state(keys[i], tree_.geometry(), init))));
    wait_all(std::move(done));
    states_.clear();
    step_index_ = 0;
}

void simulation::refresh_states()
{
    std::vector<future<byte_buffer>> fs;
    for (auto const& g : leaves_)
        fs.push_back(loc_.invoke(g, la_export, {}));
    auto replies = wait_all(std::move(fs));
    states_.resize(leaves_.size());
    dt_limits_.resize(leaves_.size());
    for (std::size_t i = 0; i != replies.size(); ++i)
    {
        byte_reader r(replies[i]);
        dt_limits_[i] = r.get_f64("dt_limit");
        states_[i] = r.get_f64s("state");
    }
}

void simulation::exchange_ghosts()
{
    refresh_states();
    std::vector<future<byte_buffer>> fs;
    for (std::size_t i = 0; i != leaves_.size(); ++i)
    {
        auto ghosts = assemble_ghosts(
            tree_, i, [this](std::size_t j) -> leaf_state const& { return states_[j]; });
        fs.push_back(loc_.invoke(leaves_[i], la_set_ghosts, f64s(ghosts)));
    }
    wait_all(std::move(fs));
}

void simulation::gravity_solve()
{
    if (!(cfg_.theta >= 0))
        throw configuration_error("theta must be non-negative");
    if (!cfg_.gravity)
        return;
    if (states_.size() != leaves_.size())
        refresh_states();
    std::vector<double> masses(leaves_.size() * sub_cells);
    for (std::size_t i = 0; i != leaves_.size(); ++i)
    {
        double h = tree_.geometry().cell_width(tree_.leaves()[i].level);
        double vol = h * h * h;
        for (int c = 0; c != sub_cells; ++c)
            masses[i * sub_cells + c] = states_[i][f_rho * sub_cells + c] * vol;
    }
    auto payload = f64s(masses);
    std::vector<future<byte_buffer>> fs;
    for (auto const& s : solvers_)
        fs.push_back(loc_.invoke(s, sa_set_masses, payload));
    wait_all(std::move(fs));

    fs.clear();
    for (auto const& g : leaves_)
        fs.push_back(loc_.invoke(g, la_potential, {}));
    wait_all(std::move(fs));
}

double simulation::stable_dt()
{
    if (dt_limits_.size() != leaves_.size())
        refresh_states();
    double m = std::numeric_limits<double>::infinity();
    for (double d : dt_limits_)
        m = std::min(m, d);
    return cfg_.dt_safety * m;
}

void simulation::hydro_step(double dt)
{
    std::size_t n = leaves_.size();
    std::vector<std::uint8_t> fine_mask(n, 0), coarse_mask(n, 0);
    for (std::size_t i = 0; i != n; ++i)
        for (int face = 0; face != n_faces; ++face)
        {
            auto kind = tree_.neighbors(i, face).kind;
            if (kind == neighbor_kind::coarser)
                fine_mask[i] |= static_cast<std::uint8_t>(1u << face);
            else if (kind == neighbor_kind::finer)
                coarse_mask[i] |= static_cast<std::uint8_t>(1u << face);
        }

    std::vector<future<byte_buffer>> fs;
    for (std::size_t i = 0; i != n; ++i)
    {
        byte_writer w;
        w.put(fine_mask[i]);
        fs.push_back(loc_.invoke(leaves_[i], la_flux, w.take()));
    }
    auto replies = wait_all(std::move(fs));

    // Boundary fluxes of fine leaves, per face.
    std::vector<std::array<face_layer, n_faces>> fine(n);
    for (std::size_t i = 0; i != n; ++i)
    {
        byte_reader r(replies[i]);
        for (int face = 0; face != n_faces; ++face)
            if (fine_mask[i] & (1u << face))
                fine[i][face] = r.get_f64s("fluxes");
    }

    fs.clear();
    for (std::size_t i = 0; i != n; ++i)
    {
        byte_writer w;
        w.put_f64(dt);
        w.put(coarse_mask[i]);
        for (int face = 0; face != n_faces; ++face)
            if (coarse_mask[i] & (1u << face))
                w.put_f64s(restrict_fine_fluxes(tree_, i, face,
                    [&](std::size_t j) -> face_layer const& { return fine[j][opposite_face(face)]; }));
        fs.push_back(loc_.invoke(leaves_[i], la_update, w.take()));
    }
    wait_all(std::move(fs));
    states_.clear();
    dt_limits_.clear();
}

step_report simulation::step()
{
    step_report rep;
    try
    {
        exchange_ghosts();
        rep.mass_before = 0;
        for (std::size_t i = 0; i != states_.size(); ++i)
        {
            double h = tree_.geometry().cell_width(tree_.leaves()[i].level);
            double sum = 0;
            for (int c = 0; c != sub_cells; ++c)
                sum += states_[i][f_rho * sub_cells + c];
            rep.mass_before += sum * h * h * h;
        }
        gravity_solve();
        rep.dt = stable_dt();
        hydro_step(rep.dt);
        rep.mass_after = total_mass();
    }
    catch (std::exception const& e)
    {
        throw run_error(step_index_, e.what());
    }
    ++step_index_;
    return rep;
}

run_metrics simulation::advance(int steps)
{
    if (steps <= 0)
        throw configuration_error("steps must be positive");
    run_metrics m;
    m.leaf_count = leaves_.size();
    m.steps = steps;
    auto t0 = timebase::timestamp();
    for (int s = 0; s != steps; ++s)
    {
        auto rep = step();
        if (s == 0)
            m.mass_initial = rep.mass_before;
        m.mass_final = rep.mass_after;
        m.simulated_time += rep.dt;
        m.max_step_mass_drift = std::max(
            m.max_step_mass_drift, std::abs(rep.mass_after - rep.mass_before) / rep.mass_before);
    }
    m.wall_seconds =
        timebase::elapsed_seconds(t0, timebase::timestamp(), timebase::default_calibration());
    m.cells_per_second = cells_per_second(m.leaf_count, steps, m.wall_seconds);
    m.cells_per_second_per_step = cells_per_second(m.leaf_count, 1, m.wall_seconds);
    return m;
}

std::vector<leaf_state> simulation::gather_state()
{
    refresh_states();
    return states_;
}

std::vector<std::vector<double>> simulation::gather_potential()
{
    std::vector<future<byte_buffer>> fs;
    for (auto const& g : leaves_)
        fs.push_back(loc_.invoke(g, la_get_potential, {}));
    std::vector<std::vector<double>> out;
    for (auto& b : wait_all(std::move(fs)))
    {
        byte_reader r(b);
        out.push_back(r.get_f64s("potential"));
    }
    return out;
}

std::vector<std::vector<double>> simulation::gather_ghosts()
{
    std::vector<future<byte_buffer>> fs;
    for (auto const& g : leaves_)
        fs.push_back(loc_.invoke(g, la_get_ghosts, {}));
    std::vector<std::vector<double>> out;
    for (auto& b : wait_all(std::move(fs)))
    {
        byte_reader r(b);
        out.push_back(r.get_f64s("ghosts"));
    }
    return out;
}

double simulation::total_mass()
{
    refresh_states();
    double total = 0;
    for (std::size_t i = 0; i != states_.size(); ++i)
    {
        double h = tree_.geometry().cell_width(tree_.leaves()[i].level);
        double sum = 0;
        for (int c = 0; c != sub_cells; ++c)
            sum += states_[i][f_rho * sub_cells + c];
        total += sum * h * h * h;
    }
    return total;
}

std::uint64_t simulation::state_hash()
{
    refresh_states();
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b != 8; ++b)
        {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    for (std::size_t i = 0; i != states_.size(); ++i)
    {
        auto const& k = tree_.leaves()[i];
        mix(static_cast<std::uint64_t>(k.level));
        for (auto v : k.x)
            mix(static_cast<std::uint64_t>(v));
        for (double v : states_[i])
            mix(std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

}    // namespace amt::amr
