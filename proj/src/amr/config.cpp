#include <amt/amr/config.hpp>
#include <amt/errors.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace amt::amr {

kernel_kind parse_kernel(std::string_view name)
{
    if (name == "native")
        return kernel_kind::native;
    if (name == "execspace")
        return kernel_kind::execspace;
    throw configuration_error(
        "kernel must be native or execspace, got '" + std::string(name) + "'");
}

std::string_view to_string(kernel_kind k) noexcept
{
    return k == kernel_kind::native ? "native" : "execspace";
}

namespace {

    std::string_view trim(std::string_view s)
    {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos)
            return {};
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    double to_double(std::string_view key, std::string_view v)
    {
        // from_chars for double is available in GCC 11's libstdc++.
        double out = 0;
        auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || end != v.data() + v.size())
            throw configuration_error(
                "config key '" + std::string(key) + "': '" + std::string(v) + "' is not a number");
        return out;
    }

    int to_int(std::string_view key, std::string_view v)
    {
        int out = 0;
        auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || end != v.data() + v.size())
            throw configuration_error(
                "config key '" + std::string(key) + "': '" + std::string(v) + "' is not an integer");
        return out;
    }

    bool to_bool(std::string_view key, std::string_view v)
    {
        if (v == "1" || v == "true" || v == "yes" || v == "on")
            return true;
        if (v == "0" || v == "false" || v == "no" || v == "off")
            return false;
        throw configuration_error(
            "config key '" + std::string(key) + "': '" + std::string(v) + "' is not a boolean");
    }

    void require(bool ok, char const* key, std::string const& why)
    {
        if (!ok)
            throw configuration_error(std::string("config key '") + key + "': " + why);
    }

}    // namespace

void amr_config::set(std::string_view key, std::string_view value)
{
    value = trim(value);
    if (key == "domain_size")
        domain_size = to_double(key, value);
    else if (key == "max_level")
        max_level = to_int(key, value);
    else if (key == "threshold")
        threshold = to_double(key, value);
    else if (key == "theta")
        theta = to_double(key, value);
    else if (key == "gamma")
        gamma = to_double(key, value);
    else if (key == "omega")
        omega = to_double(key, value);
    else if (key == "r0")
        r0 = to_double(key, value);
    else if (key == "density_floor")
        density_floor = to_double(key, value);
    else if (key == "polytropic_k")
        polytropic_k = to_double(key, value);
    else if (key == "steps")
        steps = to_int(key, value);
    else if (key == "dt_safety")
        dt_safety = to_double(key, value);
    else if (key == "gravity")
        gravity = to_bool(key, value);
    else if (key == "kernel")
        kernel = parse_kernel(value);
    else
        throw configuration_error("unknown config key '" + std::string(key) + "'");
}

void amr_config::validate() const
{
    require(std::isfinite(domain_size) && domain_size > 0, "domain_size", "must be positive");
    require(max_level >= 0 && max_level <= 12, "max_level", "must be in [0, 12]");
    require(std::isfinite(threshold), "threshold", "must be finite");
    // theta == 0 is the degenerate "always descend" walk (exact direct sum).
    require(std::isfinite(theta) && theta >= 0, "theta", "must be non-negative");
    require(std::isfinite(gamma) && gamma > 1, "gamma", "must exceed 1");
    require(std::isfinite(omega), "omega", "must be finite");
    require(std::isfinite(r0) && r0 > 0, "r0", "must be positive");
    require(std::isfinite(density_floor) && density_floor >= 0, "density_floor",
        "must be non-negative");
    require(std::isfinite(polytropic_k) && polytropic_k > 0, "polytropic_k", "must be positive");
    require(steps > 0, "steps", "must be positive");
    require(std::isfinite(dt_safety) && dt_safety > 0 && dt_safety <= 1, "dt_safety",
        "must be in (0, 1]");
}

amr_config amr_config::parse_ini(std::string_view text, amr_config base)
{
    std::size_t line_no = 0;
    while (!text.empty())
    {
        ++line_no;
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        auto hash = line.find_first_of("#;");
        if (hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty() || line.front() == '[')
            continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw configuration_error(
                "config line " + std::to_string(line_no) + ": expected key=value");
        base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    base.validate();
    return base;
}

amr_config amr_config::load_ini(std::string const& path, amr_config base)
{
    std::ifstream in(path);
    if (!in)
        throw configuration_error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_ini(ss.str(), base);
}

amr_config amr_config::parse_ini(std::string_view text)
{
    return parse_ini(text, amr_config{});
}

amr_config amr_config::load_ini(std::string const& path)
{
    return load_ini(path, amr_config{});
}

std::string amr_config::to_ini() const
{
    std::ostringstream os;
    os.precision(17);
    os << "domain_size = " << domain_size << "\n"
       << "max_level = " << max_level << "\n"
       << "threshold = " << threshold << "\n"
       << "theta = " << theta << "\n"
       << "gamma = " << gamma << "\n"
       << "omega = " << omega << "\n"
       << "r0 = " << r0 << "\n"
       << "density_floor = " << density_floor << "\n"
       << "polytropic_k = " << polytropic_k << "\n"
       << "steps = " << steps << "\n"
       << "dt_safety = " << dt_safety << "\n"
       << "gravity = " << (gravity ? "true" : "false") << "\n"
       << "kernel = " << to_string(kernel) << "\n";
    return os.str();
}

}    // namespace amt::amr
