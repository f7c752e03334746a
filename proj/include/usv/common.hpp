#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace usv {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration rejected during validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Wrap to (-pi, pi].
inline double wrap_angle(double a)
{
    if (a > -kPi && a <= kPi) return a;
    double w = std::remainder(a, 2.0 * kPi);
    if (w <= -kPi) w += 2.0 * kPi;
    return w;
}

inline double clamp_val(double x, double lo, double hi)
{
    return x < lo ? lo : (x > hi ? hi : x);
}

inline void require_finite(double x, const char* what)
{
    if (!std::isfinite(x)) throw Error(std::string("non-finite ") + what);
}

} // namespace usv
