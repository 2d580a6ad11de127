use super::{JoinReason, JoinRequest, JoinResponse, PlatoonConfig, TruckId};
use thiserror::Error;

/// Candidate is accepted if its max deceleration is at least the platoon's
/// least-performing deceleration minus this margin (m/s²).
pub const DEFAULT_DECEL_TOLERANCE: f64 = 1.0;

/// What the trailing truck knows when it decides on a join request.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinView<'a> {
    pub config: &'a PlatoonConfig,
    pub protocol_version: u16,
    pub situation_safe: bool,
}

/// Decides a join request. Checks run in a fixed order (full, protocol,
/// deceleration, situation) and the first failing check names the reason.
pub fn handle_join_request(view: &JoinView<'_>, req: &JoinRequest, decel_tolerance: f64) -> JoinResponse {
    let cfg = view.config;
    if cfg.members.len() >= cfg.max_size {
        return JoinResponse::rejected(JoinReason::PlatoonFull);
    }
    if req.protocol_version != view.protocol_version {
        return JoinResponse::rejected(JoinReason::IncompatibleProtocol);
    }
    if req.max_decel_capability < cfg.least_performing_decel - decel_tolerance {
        return JoinResponse::rejected(JoinReason::DecelMismatch);
    }
    if !view.situation_safe {
        return JoinResponse::rejected(JoinReason::UnsafeSituation);
    }
    let mut next = cfg.clone();
    next.members.push(req.candidate);
    next.least_performing_decel = cfg.least_performing_decel.min(req.max_decel_capability);
    JoinResponse::accepted(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum UpdateError {
    #[error("update for platoon {got} does not match platoon {expected}")]
    UnknownPlatoon { expected: u32, got: u32 },
    #[error("{0} is not a member of the updated platoon")]
    NotAMember(TruckId),
}

/// Adopts a configuration update on behalf of `me`. The caller derives its
/// new role from its index in the returned member list.
pub fn apply_platoon_update(
    old: &PlatoonConfig,
    update: &PlatoonConfig,
    me: TruckId,
) -> Result<PlatoonConfig, UpdateError> {
    if update.platoon_id != old.platoon_id {
        return Err(UpdateError::UnknownPlatoon { expected: old.platoon_id, got: update.platoon_id });
    }
    if update.index_of(me).is_none() {
        return Err(UpdateError::NotAMember(me));
    }
    Ok(update.clone())
}
