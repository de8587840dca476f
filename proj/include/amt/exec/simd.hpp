#pragma once

#include <amt/errors.hpp>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

namespace amt::exec {

/// Runtime-width lane pack with a portable scalar implementation; width 1 is
/// the scalar fallback. Lane-wise ops at width w equal w applications at width 1.
class simd_pack
{
  public:
    explicit simd_pack(std::size_t width, double fill = 0.0)
      : lanes_(width, fill)
    {
        if (width == 0)
            throw usage_error("simd_pack width must be positive");
    }

    simd_pack(std::initializer_list<double> lanes)
      : lanes_(lanes)
    {
        if (lanes_.empty())
            throw usage_error("simd_pack width must be positive");
    }

    std::size_t width() const noexcept
    {
        return lanes_.size();
    }
    double& operator[](std::size_t i) noexcept
    {
        return lanes_[i];
    }
    double operator[](std::size_t i) const noexcept
    {
        return lanes_[i];
    }

    friend bool operator==(simd_pack const&, simd_pack const&) = default;

  private:
    std::vector<double> lanes_;
};

/// Lane-wise fused a*b + c (single rounding); usage_error on width mismatch.
inline simd_pack simd_fma(simd_pack const& a, simd_pack const& b, simd_pack const& c)
{
    if (a.width() != b.width() || a.width() != c.width())
        throw usage_error("simd_fma: pack widths differ");
    simd_pack out(a.width());
    for (std::size_t i = 0; i != a.width(); ++i)
        out[i] = std::fma(a[i], b[i], c[i]);
    return out;
}

}    // namespace amt::exec
