#include <amt/bench/performance.hpp>
#include <amt/errors.hpp>

#include <cmath>
#include <string>

namespace amt::bench {

void cpu_spec::validate() const
{
    if (!(std::isfinite(clock_ghz) && clock_ghz > 0))
        throw configuration_error("clock speed must be positive");
    if (vector_length < 1 || fpu_units < 1 || cores < 1)
        throw configuration_error("vector length, FPU units and cores must be positive");
}

double peak_performance(cpu_spec const& spec, int cores_used)
{
    spec.validate();
    if (cores_used < 1 || cores_used > spec.cores)
        throw configuration_error("cores_used must be in [1, " + std::to_string(spec.cores) + "]");
    return 2.0 * spec.clock_ghz * spec.vector_length * spec.fpu_units * cores_used;
}

double normalized_performance(double flops, cpu_spec const& spec, int cores_used)
{
    if (!(flops >= 0))
        throw configuration_error("flops must be non-negative");
    double peak = peak_performance(spec, cores_used) * 1e9;
    if (!(peak > 0))
        throw configuration_error("peak performance is zero");
    return flops / peak;
}

double energy_wh(energy_model const& m)
{
    if (!(std::isfinite(m.average_power_w) && m.average_power_w > 0))
        throw configuration_error("average power must be positive");
    if (!(std::isfinite(m.duration_s) && m.duration_s >= 0))
        throw configuration_error("duration must be non-negative");
    return m.average_power_w * m.duration_s / 3600.0;
}

}    // namespace amt::bench
