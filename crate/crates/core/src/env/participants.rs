use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::{Designation, Meeting, SlotMask};

/// How simulated participants answer a meeting request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub uncomfortable: SlotMask,
    /// Accept anything a Senior initiator asks for.
    pub senior_override: bool,
    /// Chance that a request is refused for no particular reason. Off by default.
    #[serde(default)]
    pub random_reject: f64,
}

impl Default for ParticipantProfile {
    fn default() -> Self {
        ParticipantProfile {
            uncomfortable: SlotMask::empty(),
            senior_override: false,
            random_reject: 0.0,
        }
    }
}

impl ParticipantProfile {
    pub fn with_uncomfortable(uncomfortable: SlotMask) -> ParticipantProfile {
        ParticipantProfile {
            uncomfortable,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Response {
    Accept,
    Reject,
}

/// Answer of the participants of `meeting` when asked for the run starting at `slot`.
pub fn participant_respond<R: Rng + ?Sized>(
    meeting: &Meeting,
    slot: usize,
    profile: &ParticipantProfile,
    rng: &mut R,
) -> Response {
    let overridden = profile.senior_override && meeting.designation == Designation::Senior;
    let touches_uncomfortable = (slot..slot + meeting.duration).any(|s| profile.uncomfortable.contains(s));
    if touches_uncomfortable && !overridden {
        return Response::Reject;
    }
    if profile.random_reject > 0.0 && rng.gen::<f64>() < profile.random_reject {
        return Response::Reject;
    }
    Response::Accept
}
