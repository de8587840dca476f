#pragma once

#include <amt/distrib/errors.hpp>

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace amt::distrib {

using byte_buffer = std::vector<std::uint8_t>;
using byte_view = std::span<std::uint8_t const>;

/// Little-endian writer shared by parcels and action arguments.
class byte_writer
{
  public:
    byte_writer() = default;
    explicit byte_writer(std::size_t reserve)
    {
        buf_.reserve(reserve);
    }

    template <typename T>
        requires std::is_integral_v<T>
    void put(T v)
    {
        using U = std::make_unsigned_t<T>;
        auto u = static_cast<U>(v);
        for (std::size_t i = 0; i != sizeof(U); ++i)
            buf_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
    }

    void put_f64(double v)
    {
        put(std::bit_cast<std::uint64_t>(v));
    }

    void put_raw(byte_view bytes)
    {
        buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    }

    /// u32 length followed by the bytes.
    void put_bytes(byte_view bytes)
    {
        put(static_cast<std::uint32_t>(bytes.size()));
        put_raw(bytes);
    }

    void put_string(std::string_view s)
    {
        put_bytes(byte_view(reinterpret_cast<std::uint8_t const*>(s.data()), s.size()));
    }

    void put_f64s(std::span<double const> values)
    {
        put(static_cast<std::uint32_t>(values.size()));
        for (double v : values)
            put_f64(v);
    }

    std::size_t size() const noexcept
    {
        return buf_.size();
    }

    /// Overwrite a previously written u32 at `offset`.
    void patch_u32(std::size_t offset, std::uint32_t v)
    {
        for (std::size_t i = 0; i != 4; ++i)
            buf_[offset + i] = static_cast<std::uint8_t>(v >> (8 * i));
    }

    byte_buffer take() noexcept
    {
        return std::move(buf_);
    }

  private:
    byte_buffer buf_;
};

/// Little-endian reader; every read names its field so truncation errors
/// point at what was missing.
class byte_reader
{
  public:
    explicit byte_reader(byte_view data) noexcept
      : data_(data)
    {
    }

    template <typename T>
        requires std::is_integral_v<T>
    T get(char const* field)
    {
        need(sizeof(T), field);
        using U = std::make_unsigned_t<T>;
        U u = 0;
        for (std::size_t i = 0; i != sizeof(U); ++i)
            u |= static_cast<U>(static_cast<U>(data_[pos_ + i]) << (8 * i));
        pos_ += sizeof(U);
        return static_cast<T>(u);
    }

    double get_f64(char const* field)
    {
        return std::bit_cast<double>(get<std::uint64_t>(field));
    }

    byte_view get_raw(std::size_t n, char const* field)
    {
        need(n, field);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    byte_buffer get_bytes(char const* field)
    {
        auto n = get<std::uint32_t>(field);
        auto v = get_raw(n, field);
        return byte_buffer(v.begin(), v.end());
    }

    std::string get_string(char const* field)
    {
        auto n = get<std::uint32_t>(field);
        auto v = get_raw(n, field);
        return std::string(reinterpret_cast<char const*>(v.data()), v.size());
    }

    std::vector<double> get_f64s(char const* field)
    {
        auto n = get<std::uint32_t>(field);
        need(std::size_t{n} * 8, field);
        std::vector<double> out(n);
        for (auto& v : out)
            v = get_f64(field);
        return out;
    }

    std::size_t remaining() const noexcept
    {
        return data_.size() - pos_;
    }

    void expect_end(char const* field) const
    {
        if (remaining() != 0)
            throw decode_error(field, std::to_string(remaining()) + " trailing bytes");
    }

  private:
    void need(std::size_t n, char const* field) const
    {
        if (data_.size() - pos_ < n)
            throw decode_error(field, "truncated: need " + std::to_string(n) +
                    " bytes, have " + std::to_string(data_.size() - pos_));
    }

    byte_view data_;
    std::size_t pos_ = 0;
};

}    // namespace amt::distrib
