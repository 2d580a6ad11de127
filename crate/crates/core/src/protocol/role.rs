use super::Role;
use thiserror::Error;

/// Role of the member at `index` in a platoon of `len` trucks.
///
/// A two-truck platoon is Leader + Trailing; the Trailing truck also carries
/// the follower control duties.
pub fn role_for_index(index: usize, len: usize) -> Role {
    if index == 0 {
        Role::Leader
    } else if index + 1 >= len {
        Role::Trailing
    } else {
        Role::Follower
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleEvent {
    JoinAccepted,
    NewMemberBehind,
    MemberAheadLeft,
    SelfLeave,
    PlatoonDissolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("illegal role transition: {event:?} while {current}")]
pub struct TransitionError {
    pub current: Role,
    pub event: RoleEvent,
}

pub fn role_transition(current: Role, event: RoleEvent) -> Result<Role, TransitionError> {
    use Role::*;
    use RoleEvent::*;
    let next = match (current, event) {
        (Candidate, JoinAccepted) => Trailing,
        (Trailing, NewMemberBehind) => Follower,
        (Follower, MemberAheadLeft) => Follower,
        (Trailing, MemberAheadLeft) => Trailing,
        (Leader | Follower | Trailing, SelfLeave | PlatoonDissolved) => Candidate,
        _ => return Err(TransitionError { current, event }),
    };
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_join_becomes_trailing() {
        assert_eq!(role_transition(Role::Candidate, RoleEvent::JoinAccepted), Ok(Role::Trailing));
    }

    #[test]
    fn trailing_with_new_member_behind_becomes_follower() {
        assert_eq!(role_transition(Role::Trailing, RoleEvent::NewMemberBehind), Ok(Role::Follower));
        // cross-check against the index function after an append
        assert_eq!(role_for_index(2, 3), Role::Trailing);
        assert_eq!(role_for_index(2, 4), Role::Follower);
    }

    #[test]
    fn leader_cannot_accept_join() {
        let err = role_transition(Role::Leader, RoleEvent::JoinAccepted).unwrap_err();
        assert_eq!(err.current, Role::Leader);
    }

    #[test]
    fn members_leave_to_candidate() {
        for r in [Role::Leader, Role::Follower, Role::Trailing] {
            assert_eq!(role_transition(r, RoleEvent::SelfLeave), Ok(Role::Candidate));
            assert_eq!(role_transition(r, RoleEvent::PlatoonDissolved), Ok(Role::Candidate));
        }
        assert!(role_transition(Role::Candidate, RoleEvent::SelfLeave).is_err());
        assert!(role_transition(Role::Leader, RoleEvent::MemberAheadLeft).is_err());
    }

    #[test]
    fn index_roles_have_one_leader_one_trailing() {
        for n in 2..=7 {
            let roles: Vec<Role> = (0..n).map(|i| role_for_index(i, n)).collect();
            assert_eq!(roles.iter().filter(|r| **r == Role::Leader).count(), 1);
            assert_eq!(roles.iter().filter(|r| **r == Role::Trailing).count(), 1);
            assert_eq!(roles[0], Role::Leader);
            assert_eq!(roles[n - 1], Role::Trailing);
        }
    }
}
