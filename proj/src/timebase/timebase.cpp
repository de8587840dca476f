#include <amt/timebase.hpp>

#include <amt/errors.hpp>

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#if defined(__x86_64__) || defined(__i386__)
#include <x86intrin.h>
#endif

namespace amt::timebase {

namespace {

    constexpr bool has_hardware_counter =
#if defined(__riscv) || defined(__aarch64__) || defined(__x86_64__) || \
    defined(__i386__)
        true;
#else
        false;
#endif

    inline ticks read_hardware() noexcept
    {
#if defined(__riscv)
        std::uint64_t val = 0;
        __asm__ __volatile__("rdtime %0" : "=r"(val)::);
        return val;
#elif defined(__aarch64__)
        std::uint64_t val = 0;
        __asm__ __volatile__("mrs %0, cntvct_el0" : "=r"(val)::);
        return val;
#elif defined(__x86_64__) || defined(__i386__)
        return __rdtsc();
#else
        return 0;
#endif
    }

    inline ticks read_monotonic() noexcept
    {
        return static_cast<ticks>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(
                std::chrono::steady_clock::now().time_since_epoch())
                .count());
    }

}    // namespace

std::string_view to_string(source s) noexcept
{
    return s == source::hardware_cycle_counter ? "hardware" : "os-monotonic";
}

timestamp_counter::timestamp_counter(source s) noexcept
  : source_(has_hardware_counter ? s : source::os_monotonic)
{
}

timestamp_counter timestamp_counter::from_environment() noexcept
{
    char const* force = std::getenv("TIMEBASE_FORCE_FALLBACK");
    if (force != nullptr && std::strcmp(force, "1") == 0)
        return timestamp_counter(source::os_monotonic);
    return timestamp_counter(source::hardware_cycle_counter);
}

ticks timestamp_counter::read() const noexcept
{
    return source_ == source::hardware_cycle_counter ? read_hardware()
                                                     : read_monotonic();
}

timestamp_counter const& default_counter() noexcept
{
    static timestamp_counter const counter =
        timestamp_counter::from_environment();
    return counter;
}

ticks timestamp() noexcept
{
    return default_counter().read();
}

calibration calibrate(timestamp_counter const& counter, double window_seconds)
{
    if (!(window_seconds >= 0.01))
        throw configuration_error(
            "calibration window must be at least 0.01 s");

    using clock = std::chrono::steady_clock;
    auto const window = std::chrono::duration<double>(window_seconds);
    auto const t0 = clock::now();
    ticks const c0 = counter.read();
    clock::time_point t1;
    do
    {
        t1 = clock::now();
    } while (t1 - t0 < window);
    ticks const c1 = counter.read();

    ticks const delta = elapsed(c0, c1);
    if (delta == 0)
        throw std::runtime_error("timestamp counter is not advancing");
    double const seconds = std::chrono::duration<double>(t1 - t0).count();
    return calibration{static_cast<double>(delta) / seconds};
}

calibration calibrate(double window_seconds)
{
    return calibrate(default_counter(), window_seconds);
}

calibration const& default_calibration()
{
    static calibration const cal = calibrate(default_counter(), 0.05);
    return cal;
}

double elapsed_seconds(ticks start, ticks stop, calibration const& cal) noexcept
{
    return static_cast<double>(elapsed(start, stop)) / cal.ticks_per_second;
}

}    // namespace amt::timebase
