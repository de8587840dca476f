#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace amt::amr {

/// Which code path runs the per-leaf kernels. Both produce bit-identical
/// results; they differ only in how the loops are scheduled.
enum class kernel_kind
{
    native,       // plain loops inside the leaf's task
    execspace     // exec-spaces parallel_for_md on a task_pool space
};

kernel_kind parse_kernel(std::string_view name);
std::string_view to_string(kernel_kind k) noexcept;

/// Run parameters. INI keys are the field names.
struct amr_config
{
    double domain_size = 2.0;       // cube edge, centred on the origin
    int max_level = 2;
    double threshold = 0.05;        // refine where sampled density exceeds this
    double theta = 0.5;             // opening angle
    double gamma = 5.0 / 3.0;
    double omega = 0.5;             // rigid rotation rate about z
    double r0 = 0.25;               // Gaussian radius of the star
    double density_floor = 1e-3;
    double polytropic_k = 0.1;      // p = K rho^gamma
    int steps = 5;
    double dt_safety = 0.4;
    bool gravity = true;
    kernel_kind kernel = kernel_kind::native;

    /// Throws configuration_error naming the offending key.
    void validate() const;

    /// key=value lines, '#' or ';' comments, [section] headers ignored.
    /// Unknown keys and unparsable values are configuration errors.
    static amr_config parse_ini(std::string_view text, amr_config base);
    static amr_config parse_ini(std::string_view text);
    static amr_config load_ini(std::string const& path, amr_config base);
    static amr_config load_ini(std::string const& path);

    /// Sets one key from its textual value (same rules as the INI parser).
    void set(std::string_view key, std::string_view value);

    std::string to_ini() const;
};

}    // namespace amt::amr
