#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace phasefrac {

using index_t = std::int32_t;

template <int Dim>
using Point = std::array<double, Dim>;

/// Broad failure classes; the CLI maps each to a distinct exit code.
enum class ErrorCategory { invalid_argument, mesh, config, solver, io };

inline const char *to_string(ErrorCategory c)
{
    switch (c) {
    case ErrorCategory::invalid_argument: return "invalid-argument";
    case ErrorCategory::mesh: return "mesh";
    case ErrorCategory::config: return "config";
    case ErrorCategory::solver: return "solver";
    case ErrorCategory::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorCategory category, const std::string &what)
        : std::runtime_error(what), category_(category)
    {
    }

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

namespace detail {

template <int Dim>
inline Point<Dim> sub(const Point<Dim> &a, const Point<Dim> &b)
{
    Point<Dim> r;
    for (int i = 0; i < Dim; ++i)
        r[i] = a[i] - b[i];
    return r;
}

template <int Dim>
inline double dot(const Point<Dim> &a, const Point<Dim> &b)
{
    double s = 0.0;
    for (int i = 0; i < Dim; ++i)
        s += a[i] * b[i];
    return s;
}

template <int Dim>
inline double norm(const Point<Dim> &a)
{
    return std::sqrt(dot<Dim>(a, a));
}

template <int Dim>
inline Point<Dim> midpoint(const Point<Dim> &a, const Point<Dim> &b)
{
    Point<Dim> r;
    for (int i = 0; i < Dim; ++i)
        r[i] = 0.5 * (a[i] + b[i]);
    return r;
}

inline std::uint64_t edge_key(index_t a, index_t b)
{
    if (a > b)
        std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

} // namespace detail
} // namespace phasefrac
