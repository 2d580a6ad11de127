use super::{AccelCommand, TruckParams, TruckState};

/// Advances a truck by one step.
///
/// The actuator is a first-order lag, integrated exactly under a command held
/// over the step, so realized acceleration and speed match the continuous
/// solution at every sample. Position uses the updated speed (semi-implicit).
/// Speed never goes below zero; a truck held at standstill reports zero
/// acceleration.
pub fn step_dynamics(state: &TruckState, params: &TruckParams, cmd: AccelCommand, dt: f64) -> TruckState {
    debug_assert!(dt > 0.0);
    let tau = params.actuator_time_constant;
    let target = cmd.a_cmd.clamp(-params.max_decel, params.max_accel);
    let decay = (-dt / tau).exp();
    let mut a = (target + (state.a - target) * decay).clamp(-params.max_decel, params.max_accel);
    let dv = target * dt + (state.a - target) * tau * (1.0 - decay);
    let mut v = state.v + dv;
    if v <= 0.0 {
        v = 0.0;
        if a < 0.0 {
            a = 0.0;
        }
    }
    TruckState { x_front: state.x_front + v * dt, v, a, ..state.clone() }
}
