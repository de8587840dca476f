#pragma once

#include <cstddef>

namespace amt::bench {

/// Per-core floating-point resources of a processor.
struct cpu_spec
{
    double clock_ghz = 0;
    int vector_length = 1;    // double lanes; 1 when there is no vector unit
    int fpu_units = 1;        // per core
    bool fma = false;
    int cores = 1;

    /// Throws configuration_error unless every quantity is positive.
    void validate() const;
};

namespace cpus {
    inline constexpr cpu_spec a64fx{1.8, 8, 2, true, 48};
    inline constexpr cpu_spec amd_epyc{2.8, 4, 2, true, 64};
    inline constexpr cpu_spec intel_xeon{2.3, 8, 2, true, 18};
    inline constexpr cpu_spec u74_mc{1.2, 1, 1, true, 4};
}    // namespace cpus

/// 2 x clock x vector length x FPUs x cores, in GFLOP/s. The factor two is
/// applied unconditionally. Throws configuration_error when cores_used is
/// not in [1, spec.cores].
double peak_performance(cpu_spec const& spec, int cores_used);

/// flops (FLOP/s) divided by the peak (converted to FLOP/s).
double normalized_performance(double flops, cpu_spec const& spec, int cores_used);

/// Average power times wall time.
struct energy_model
{
    double average_power_w = 0;
    double duration_s = 0;
};

/// Watt-hours; throws configuration_error for non-positive power or a
/// negative duration.
double energy_wh(energy_model const& m);

}    // namespace amt::bench
