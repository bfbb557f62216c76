//! Text dialogue that turns an initiator's request into a booking.
//!
//! The slot mapper reads the preferred days and times, the directory gives
//! the participants, and the first free run inside the preferred slots is
//! proposed. A trained policy, when present, may push the meeting back
//! instead of asking. Participants answer yes or no, either typed or
//! simulated from a [`ParticipantProfile`].

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calendar::{slot_label, Designation, Meeting, MeetingId, SlotGrid, SlotMask, UserId, DURATIONS};
use crate::env::{participant_respond, Action, ParticipantProfile, Response, UserDirectory};
use crate::error::Result;
use crate::policy::PolicyParams;
use crate::slotmap::{parse_participants, tokenize, MapperModel};
use crate::trainer::encode_state;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reply {
    Yes,
    No,
}

/// Keyword match on a participant's answer; `None` when it says neither.
pub fn parse_reply(text: &str) -> Option<Reply> {
    let tokens = tokenize(text);
    let yes = tokens
        .iter()
        .any(|t| matches!(t.as_str(), "yes" | "y" | "ok" | "okay" | "sure" | "accept" | "fine"));
    let no = tokens
        .iter()
        .any(|t| matches!(t.as_str(), "no" | "n" | "nope" | "decline" | "reject" | "busy"));
    match (yes, no) {
        (true, false) => Some(Reply::Yes),
        (false, true) => Some(Reply::No),
        _ => None,
    }
}

fn number_word(t: &str) -> Option<usize> {
    match t {
        "one" | "an" | "a" => Some(1),
        "two" => Some(2),
        "three" => Some(3),
        "four" => Some(4),
        "five" => Some(5),
        "six" => Some(6),
        _ => t.parse().ok(),
    }
}

/// A length such as "2 hours" or "four slots"; `None` when none is given.
pub fn parse_duration(text: &str) -> Option<usize> {
    let tokens = tokenize(text);
    tokens.windows(2).find_map(|w| match w[1].as_str() {
        "hour" | "hours" | "hr" | "hrs" | "slot" | "slots" => number_word(&w[0]),
        _ => None,
    })
}

/// A proposal waiting for the participants' answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendingRequest {
    pub meeting: Meeting,
    pub slot: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Turn {
    /// Nothing changed; the initiator is asked to rephrase.
    Clarify(String),
    /// The policy chose to push the meeting back without asking.
    PushedBack(String),
    Request(PendingRequest),
}

pub struct Session {
    mapper: MapperModel,
    policy: Option<PolicyParams>,
    directory: UserDirectory,
    grid: SlotGrid,
    backlog: Vec<Meeting>,
    pub profile: ParticipantProfile,
    pub initiator: UserId,
    pub designation: Designation,
    rng: ChaCha8Rng,
    next_id: u64,
}

impl Session {
    pub fn new(mapper: MapperModel, policy: Option<PolicyParams>, directory: UserDirectory) -> Session {
        Session {
            mapper,
            policy,
            directory,
            grid: SlotGrid::new(),
            backlog: Vec::new(),
            profile: ParticipantProfile::default(),
            initiator: UserId(0),
            designation: Designation::Junior,
            rng: ChaCha8Rng::seed_from_u64(0),
            next_id: 0,
        }
    }

    pub fn grid(&self) -> &SlotGrid {
        &self.grid
    }

    pub fn backlog(&self) -> &[Meeting] {
        &self.backlog
    }

    fn names(&self, ids: &[UserId]) -> String {
        let names: Vec<&str> = ids.iter().filter_map(|id| self.directory.name(*id)).collect();
        names.join(", ")
    }

    /// Reads one utterance and either proposes a slot or asks for more detail.
    pub fn propose(&mut self, utterance: &str) -> Turn {
        let mut participants = parse_participants(&self.directory, utterance);
        participants.retain(|p| *p != self.initiator);
        if participants.is_empty() {
            let known: Vec<&str> = self.directory.iter().map(|(_, n)| n).collect();
            return Turn::Clarify(format!(
                "Who should attend? I know {}.",
                known.join(", ")
            ));
        }
        let duration = parse_duration(utterance).unwrap_or(1);
        if !DURATIONS.contains(&duration) {
            return Turn::Clarify(format!("Meetings can last 1, 2, 4 or 6 hours, not {duration}."));
        }
        let preferred = self.mapper.predict_slots(utterance);
        if preferred.is_empty() {
            return Turn::Clarify("Which day and time would suit you?".into());
        }
        let allowed = preferred.intersect(self.grid.free_mask());
        let Some(slot) = self.grid.find_first_fit_within(duration, allowed) else {
            return Turn::Clarify(format!(
                "Nothing free fits {duration} hour(s) in {}. Could you suggest another time?",
                describe(preferred)
            ));
        };
        let meeting = Meeting::new(
            MeetingId(self.next_id),
            duration,
            participants,
            self.initiator,
            self.designation,
            0,
        )
        .expect("duration and participants were checked");
        self.next_id += 1;
        if self.decide(&meeting, slot) == Action::Defer {
            let text = format!(
                "The scheduler pushed the meeting with {} back to the backlog instead of asking for {}.",
                self.names(&meeting.participants),
                span_label(slot, duration)
            );
            self.backlog.push(meeting);
            return Turn::PushedBack(text);
        }
        Turn::Request(PendingRequest { meeting, slot })
    }

    fn decide(&self, meeting: &Meeting, slot: usize) -> Action {
        let Some(policy) = &self.policy else {
            return Action::Schedule;
        };
        let state = encode_state(&self.grid, [meeting], self.backlog.len(), Some(slot), meeting.designation);
        match policy.forward(&state) {
            Ok(p) if p[0] < p[1] => Action::Defer,
            _ => Action::Schedule,
        }
    }

    pub fn request_text(&self, req: &PendingRequest) -> String {
        format!(
            "Asking {}: can you meet on {}?",
            self.names(&req.meeting.participants),
            span_label(req.slot, req.meeting.duration)
        )
    }

    /// How the simulated participants answer.
    pub fn simulated_reply(&mut self, req: &PendingRequest) -> Reply {
        match participant_respond(&req.meeting, req.slot, &self.profile, &mut self.rng) {
            Response::Accept => Reply::Yes,
            Response::Reject => Reply::No,
        }
    }

    /// Books the meeting on yes, pushes it to the backlog on no.
    pub fn resolve(&mut self, req: PendingRequest, reply: Reply) -> Result<String> {
        let when = span_label(req.slot, req.meeting.duration);
        let who = self.names(&req.meeting.participants);
        match reply {
            Reply::Yes => {
                self.grid.occupy(req.slot, &req.meeting)?;
                Ok(format!("Booked with {who} on {when} (slot {}).", req.slot))
            }
            Reply::No => {
                self.backlog.push(req.meeting);
                Ok(format!("{who} declined {when}; the meeting was pushed back to the backlog."))
            }
        }
    }
}

fn span_label(slot: usize, duration: usize) -> String {
    let end = 9 + slot % crate::calendar::SLOTS_PER_DAY + duration;
    format!("{}-{end:02}:00", slot_label(slot))
}

fn describe(mask: SlotMask) -> String {
    let slots: Vec<String> = mask.iter().map(|s| s.to_string()).collect();
    format!("slots {}", slots.join(" "))
}

/// Line-oriented front end. `simulate` answers requests from the session's
/// participant profile; otherwise the answer is read from `input`.
/// Returns at end of input or on `quit`.
pub fn run_repl<R: BufRead, W: Write>(session: &mut Session, mut input: R, out: &mut W, simulate: bool) -> Result<()> {
    let mut line = String::new();
    loop {
        write!(out, "> ")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            writeln!(out)?;
            return Ok(());
        }
        let text = line.trim();
        match text {
            "" => continue,
            "quit" | "exit" => return Ok(()),
            "calendar" => {
                let bookings = session.grid().bookings();
                if bookings.is_empty() {
                    writeln!(out, "The calendar is empty.")?;
                }
                for (id, start, len) in bookings {
                    writeln!(out, "meeting {id}: {}", span_label(start, len))?;
                }
                continue;
            }
            "backlog" => {
                writeln!(out, "{} meeting(s) in the backlog.", session.backlog().len())?;
                continue;
            }
            _ => {}
        }
        match session.propose(text) {
            Turn::Clarify(q) | Turn::PushedBack(q) => writeln!(out, "{q}")?,
            Turn::Request(req) => {
                writeln!(out, "{}", session.request_text(&req))?;
                let reply = if simulate {
                    let r = session.simulated_reply(&req);
                    writeln!(out, "participants: {}", if r == Reply::Yes { "yes" } else { "no" })?;
                    r
                } else {
                    loop {
                        write!(out, "reply (yes/no)> ")?;
                        out.flush()?;
                        line.clear();
                        if input.read_line(&mut line)? == 0 {
                            writeln!(out)?;
                            return Ok(());
                        }
                        match parse_reply(&line) {
                            Some(r) => break r,
                            None => writeln!(out, "Please answer yes or no.")?,
                        }
                    }
                };
                writeln!(out, "{}", session.resolve(req, reply)?)?;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slotmap::{LabeledSample, MapperConfig, PhraseTable, Vocab};

    /// A mapper that memorised one sentence, enough to drive the dialogue.
    fn tiny_mapper() -> MapperModel {
        let table = PhraseTable::default();
        let sentence = "schedule a meeting with Gautam for Wednesday afternoon";
        let label = crate::slotmap::rule_map(&table, sentence);
        let sample = LabeledSample {
            sentence: sentence.to_string(),
            label,
        };
        let vocab = Vocab::build(["schedule a meeting with gautam for wednesday afternoon"]);
        let config = MapperConfig {
            hidden: 8,
            dense: 8,
            ..MapperConfig::default()
        };
        let mut model = MapperModel::init(vocab, config, 3);
        let mut adam = crate::nn::Adam::new(model.parameters().len());
        for _ in 0..400 {
            model.train_step(&mut adam, std::slice::from_ref(&sample)).unwrap();
        }
        assert_eq!(model.predict_slots(sentence), label);
        model
    }

    fn session() -> Session {
        let mut s = Session::new(tiny_mapper(), None, UserDirectory::default());
        s.initiator = UserId(1);
        s
    }

    #[test]
    fn replies_are_keyword_matched() {
        assert_eq!(parse_reply("Yes, that works"), Some(Reply::Yes));
        assert_eq!(parse_reply("no sorry"), Some(Reply::No));
        assert_eq!(parse_reply("maybe"), None);
        assert_eq!(parse_reply("yes no"), None);
    }

    #[test]
    fn durations_are_read_from_the_request() {
        assert_eq!(parse_duration("a 2 hour sync"), Some(2));
        assert_eq!(parse_duration("four hours with Asha"), Some(4));
        assert_eq!(parse_duration("with Asha on Monday"), None);
    }

    #[test]
    fn wednesday_afternoon_is_proposed_inside_its_slots() {
        let mut s = session();
        let Turn::Request(req) = s.propose("schedule a meeting with Gautam for Wednesday afternoon") else {
            panic!("expected a request");
        };
        assert!((20..24).contains(&req.slot));
        assert_eq!(req.meeting.participants, vec![UserId(0)]);
        let text = s.resolve(req, Reply::Yes).unwrap();
        assert!(text.contains("Wednesday 13:00-14:00"), "{text}");
        // The next request takes the following free afternoon slot.
        let Turn::Request(req) = s.propose("schedule a meeting with Gautam for Wednesday afternoon") else {
            panic!("expected a request");
        };
        assert_eq!(req.slot, 21);
    }

    #[test]
    fn a_refusal_pushes_the_meeting_back() {
        let mut s = session();
        let Turn::Request(req) = s.propose("schedule a meeting with Gautam for Wednesday afternoon") else {
            panic!("expected a request");
        };
        let text = s.resolve(req, Reply::No).unwrap();
        assert!(text.contains("pushed back"));
        assert_eq!(s.backlog().len(), 1);
        assert!(s.grid().bookings().is_empty());
    }

    #[test]
    fn unknown_participants_need_clarification() {
        let mut s = session();
        let turn = s.propose("schedule a meeting with Zed for Wednesday afternoon");
        assert!(matches!(turn, Turn::Clarify(_)));
        assert!(s.backlog().is_empty());
        assert!(s.grid().bookings().is_empty());
    }

    #[test]
    fn a_full_preference_asks_for_another_time() {
        let mut s = session();
        for _ in 0..4 {
            let Turn::Request(req) = s.propose("schedule a meeting with Gautam for Wednesday afternoon") else {
                panic!("expected a request");
            };
            s.resolve(req, Reply::Yes).unwrap();
        }
        let turn = s.propose("schedule a meeting with Gautam for Wednesday afternoon");
        assert!(matches!(turn, Turn::Clarify(q) if q.contains("another time")));
    }

    #[test]
    fn simulated_participants_refuse_uncomfortable_slots() {
        let mut s = session();
        s.profile = ParticipantProfile::with_uncomfortable(SlotMask::from_slots([20]).unwrap());
        let Turn::Request(req) = s.propose("schedule a meeting with Gautam for Wednesday afternoon") else {
            panic!("expected a request");
        };
        assert_eq!(req.slot, 20);
        assert_eq!(s.simulated_reply(&req), Reply::No);
    }

    #[test]
    fn repl_reprompts_and_exits_on_eof() {
        let mut s = session();
        let input = "schedule a meeting with Gautam for Wednesday afternoon\nperhaps\nyes\ncalendar\n";
        let mut out = Vec::new();
        run_repl(&mut s, input.as_bytes(), &mut out, false).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("Please answer yes or no."));
        assert!(text.contains("Booked with Gautam on Wednesday 13:00-14:00 (slot 20)."));
        assert!(text.contains("meeting 0: Wednesday 13:00-14:00"));
    }
}
