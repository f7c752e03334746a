#include "usv/disturbances.hpp"

#include <cmath>

#include "usv/common.hpp"

namespace usv {

void FaultConfig::validate() const
{
    for (double q : {rudder_factor, rudder_bias, thrust_factor_L, thrust_factor_R, thrust_bias_L, thrust_bias_R})
        if (!std::isfinite(q)) throw ConfigError("fault parameters must be finite");
    if (rudder_factor < 0.0 || thrust_factor_L < 0.0 || thrust_factor_R < 0.0)
        throw ConfigError("fault factors must be non-negative");
}

void BankEffectConfig::validate() const
{
    if (!(deadzone_width > 0.0 && deadzone_width < canal_width))
        throw ConfigError("bank effect needs 0 < deadzone_width < canal_width");
    if (!(F_min <= F_max)) throw ConfigError("bank effect needs F_min <= F_max");
}

std::pair<double, double> apply_fault(double uL, double uR, const FaultConfig& c)
{
    const double rb_L = (c.rudder_factor - 1.0) / 2.0 * (uL - uR);
    const double rb_R = (c.rudder_factor - 1.0) / 2.0 * (uR - uL);
    return {uL * c.thrust_factor_L + c.thrust_bias_L + rb_L, uR * c.thrust_factor_R + c.thrust_bias_R + rb_R};
}

double hull_wash(double sep_x, double sep_y, int delta, const HullWashConfig& cfg)
{
    if (sep_x > cfg.range || sep_y > cfg.range) return 0.0;
    return delta * cfg.F_max * (1.0 - sep_x / cfg.range) * (1.0 - sep_y / cfg.range);
}

int hull_wash_direction(double own_heading, double other_heading)
{
    // z of [sin a, cos a, 0] x [sin b, cos b, 0]
    const double z = std::sin(own_heading) * std::cos(other_heading) - std::cos(own_heading) * std::sin(other_heading);
    return z < 0.0 ? -1 : 1;
}

BankEffect bank_effect(double dy, int delta, const BankEffectConfig& c)
{
    const double half_d = c.deadzone_width / 2.0, half_c = c.canal_width / 2.0;
    if (dy < half_d) return {false, 0.0};
    if (dy >= half_c) return {true, c.halt_bias};
    const double ramp = 1.0 - (half_c - dy) / ((c.canal_width - c.deadzone_width) / 2.0);
    return {false, delta * ((c.F_max - c.F_min) * ramp + c.F_min)};
}

std::pair<double, double> drag_device_bias(const DragDeviceConfig& cfg, bool active)
{
    if (!active) return {0.0, 0.0};
    return {cfg.surge_bias, cfg.yaw_bias};
}

} // namespace usv
