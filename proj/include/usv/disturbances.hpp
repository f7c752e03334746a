#pragma once

#include <utility>

namespace usv {

struct FaultConfig {
    double rudder_factor = 1.0;
    double rudder_bias = 0.0; // unused by the mixer, kept for config round-trip
    double thrust_factor_L = 1.0;
    double thrust_factor_R = 1.0;
    double thrust_bias_L = 0.0;
    double thrust_bias_R = 0.0;

    void validate() const;
};

struct HullWashConfig {
    double F_max = 20.0;
    double range = 15.0;
};

struct BankEffectConfig {
    double canal_width = 8.0;
    double deadzone_width = 1.0;
    double F_min = 3.0;
    double F_max = 20.0;
    double halt_bias = -99.0;

    void validate() const;
};

struct DragDeviceConfig {
    double surge_bias = 0.0; // <= 0
    double yaw_bias = 0.0;
};

struct BankEffect {
    bool halt = false;
    double bias = 0.0; // rotational bias (+L, -R) or, on halt, applied to both thrusters
};

// Faulty thruster commands sent in place of the intended (uL, uR).
std::pair<double, double> apply_fault(double uL, double uR, const FaultConfig& cfg);

double hull_wash(double sep_x, double sep_y, int delta, const HullWashConfig& cfg = {});

int hull_wash_direction(double own_heading, double other_heading);

BankEffect bank_effect(double dy_centerline, int delta, const BankEffectConfig& cfg = {});

std::pair<double, double> drag_device_bias(const DragDeviceConfig& cfg, bool active);

} // namespace usv
