#include "usv/closed_loop.hpp"

namespace usv {

Vec6 closed_loop_unwrapped(const Vec6& s, const Policy& policy, const VehicleModel& m, double dt)
{
    if (!(dt > 0.0)) throw Error("closed_loop_step: dt must be positive");
    State6<double> a;
    for (int i = 0; i < 6; ++i) a[i] = s[i];
    const State6<double> b = closed_loop_map(a, policy, m, dt);
    Vec6 out;
    for (int i = 0; i < 6; ++i) out[i] = b[i];
    return out;
}

Vec6 closed_loop_step(const Vec6& state, const Policy& policy, const DisturbanceVector& w, const VehicleModel& m,
                      double dt)
{
    for (int i = 0; i < 6; ++i) require_finite(state[i], "state");
    Vec6 out = closed_loop_unwrapped(state, policy, m, dt);
    for (int i = 0; i < 6; ++i) out[i] += w[i];
    out[kTheta] = wrap_angle(out[kTheta]);
    return out;
}

VehicleState closed_loop_step(const VehicleState& state, const Policy& policy, const DisturbanceVector& w,
                              const VehicleModel& m, double dt)
{
    return VehicleState::from_vec(closed_loop_step(state.to_vec(), policy, w, m, dt));
}

} // namespace usv
