#pragma once

#include <cstdint>
#include <string_view>

namespace amt::timebase {

enum class source
{
    hardware_cycle_counter,    // rdtime (RISC-V), cntvct_el0 (AArch64), rdtsc (x86-64)
    os_monotonic               // CLOCK_MONOTONIC in nanoseconds
};

std::string_view to_string(source s) noexcept;

using ticks = std::uint64_t;

/// Raw counter reads. Wraparound is handled by unsigned subtraction.
class timestamp_counter
{
  public:
    explicit timestamp_counter(source s) noexcept;

    /// Hardware counter when the build target has one, unless the
    /// environment sets TIMEBASE_FORCE_FALLBACK=1.
    static timestamp_counter from_environment() noexcept;

    source kind() const noexcept
    {
        return source_;
    }

    ticks read() const noexcept;

  private:
    source source_;
};

struct calibration
{
    double ticks_per_second = 0.0;
};

/// Process-wide counter selected once by from_environment().
timestamp_counter const& default_counter() noexcept;

/// Current value of the default counter.
ticks timestamp() noexcept;

constexpr ticks elapsed(ticks start, ticks stop) noexcept
{
    return stop - start;
}

/// Estimates the counter frequency against the OS monotonic clock over
/// `window_seconds` (>= 0.01). Throws configuration_error for a short window
/// and std::runtime_error if the counter does not advance.
calibration calibrate(timestamp_counter const& counter, double window_seconds);
calibration calibrate(double window_seconds);

/// Calibration of the default counter, measured once (0.05 s) and cached.
calibration const& default_calibration();

double elapsed_seconds(ticks start, ticks stop, calibration const& cal) noexcept;

}    // namespace amt::timebase
