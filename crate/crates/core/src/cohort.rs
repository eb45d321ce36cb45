//! Observed (left-truncated, window-censored) person records.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{State, TransitionKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub age: f64,
    pub to: State,
}

/// A stretch `(start, stop]` spent in one living state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Episode {
    pub start: f64,
    pub stop: f64,
    pub state: State,
}

/// One person as seen through the observation window: entry at age `u` in a
/// living state, followed over `(u, exit_age]`. A death event ends the record,
/// so `exit_age` equals the death age when death is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedRecord {
    id: String,
    entry_age: f64,
    entry_state: State,
    exit_age: f64,
    events: Vec<Event>,
}

impl ObservedRecord {
    pub fn new(
        id: impl Into<String>,
        entry_age: f64,
        entry_state: State,
        exit_age: f64,
        events: Vec<Event>,
    ) -> Result<Self> {
        let record = ObservedRecord {
            id: id.into(),
            entry_age,
            entry_state,
            exit_age,
            events,
        };
        record.check().map_err(Error::domain)?;
        Ok(record)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !(self.entry_age.is_finite() && self.entry_age >= 0.0) {
            return Err(format!("entry age {} must be finite and >= 0", self.entry_age));
        }
        if !(self.exit_age.is_finite() && self.exit_age > self.entry_age) {
            return Err(format!(
                "exit age {} must exceed entry age {}",
                self.exit_age, self.entry_age
            ));
        }
        if self.entry_state.is_absorbing() {
            return Err("entry state must not be d".into());
        }
        let mut state = self.entry_state;
        let mut last = self.entry_age;
        for ev in &self.events {
            if state.is_absorbing() {
                return Err(format!("event at {} after death", ev.age));
            }
            if !(ev.age > last) {
                return Err(format!("event ages must increase strictly ({} after {last})", ev.age));
            }
            if ev.age > self.exit_age {
                return Err(format!("event at {} after exit age {}", ev.age, self.exit_age));
            }
            if !TransitionKind::is_admissible(state, ev.to) {
                return Err(format!("transition {state}->{} is not admissible", ev.to));
            }
            state = ev.to;
            last = ev.age;
        }
        if state.is_absorbing() && last != self.exit_age {
            return Err(format!("death at {last} but exit age {}", self.exit_age));
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn set_id(&mut self, id: impl Into<String>) {
        self.id = id.into();
    }

    pub fn entry_age(&self) -> f64 {
        self.entry_age
    }

    pub fn entry_state(&self) -> State {
        self.entry_state
    }

    pub fn exit_age(&self) -> f64 {
        self.exit_age
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn died(&self) -> bool {
        self.events.last().is_some_and(|e| e.to.is_absorbing())
    }

    /// Observed jumps as `(age, transition)`.
    pub fn transitions(&self) -> impl Iterator<Item = (f64, TransitionKind)> + '_ {
        let mut state = self.entry_state;
        self.events.iter().map(move |ev| {
            let hj = TransitionKind::new(state, ev.to).expect("validated on construction");
            state = ev.to;
            (ev.age, hj)
        })
    }

    /// Living-state episodes tiling `(entry_age, exit_age]`; zero-length
    /// stretches (an event exactly at exit) are omitted.
    pub fn episodes(&self) -> Vec<Episode> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let mut start = self.entry_age;
        let mut state = self.entry_state;
        for ev in &self.events {
            out.push(Episode {
                start,
                stop: ev.age,
                state,
            });
            start = ev.age;
            state = ev.to;
        }
        if !state.is_absorbing() && self.exit_age > start {
            out.push(Episode {
                start,
                stop: self.exit_age,
                state,
            });
        }
        out
    }

    /// The same person with `H`, `S1` and `D` merged into one living state,
    /// represented as state `H` with death as the `H → d` transition.
    pub fn collapse_alive(&self) -> ObservedRecord {
        let events = if self.died() {
            vec![Event {
                age: self.exit_age,
                to: State::Dead,
            }]
        } else {
            Vec::new()
        };
        ObservedRecord {
            id: self.id.clone(),
            entry_age: self.entry_age,
            entry_state: State::Healthy,
            exit_age: self.exit_age,
            events,
        }
    }

    pub fn to_survival(&self) -> SurvivalRecord {
        SurvivalRecord {
            entry_age: self.entry_age,
            exit_age: self.exit_age,
            died: self.died(),
        }
    }
}

/// Two-state (alive/dead) view of a person used by the mortality model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalRecord {
    pub entry_age: f64,
    /// Death age if `died`, otherwise the censoring age.
    pub exit_age: f64,
    pub died: bool,
}

impl SurvivalRecord {
    pub fn new(entry_age: f64, exit_age: f64, died: bool) -> Result<Self> {
        if !(entry_age >= 0.0 && exit_age > entry_age && exit_age.is_finite()) {
            return Err(Error::domain(format!(
                "survival record needs 0 <= entry < exit, got ({entry_age}, {exit_age})"
            )));
        }
        Ok(SurvivalRecord {
            entry_age,
            exit_age,
            died,
        })
    }
}

/// Latent versus observed sample sizes of one simulated cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CohortSummary {
    pub n_all: usize,
    pub n: usize,
    pub truncated: usize,
}

impl CohortSummary {
    /// `β̂ = n / n_all`, undefined for an empty latent sample.
    pub fn beta_hat(&self) -> Option<f64> {
        (self.n_all > 0).then(|| self.n as f64 / self.n_all as f64)
    }
}
