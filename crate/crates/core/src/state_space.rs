//! Augmented state space of a `-1/+h/pen` system and its transition rules.
//!
//! Levels `0..h` carry no counter; levels `h..=z` are split into
//! `(l)_0 ..= (l)_pen`, where the counter is the number of extra claim-free
//! years still owed before the next level decrease.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// The `(z, h, pen)` triple plus the entry level of a new policyholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BmsRule {
    max_level: u32,
    jump: u32,
    penalty: u32,
    initial_level: u32,
}

impl BmsRule {
    /// `max_level` is `z`, `jump` is `h` (levels per claim), `penalty` is
    /// `pen` and `initial_level` is `l0`.
    pub fn new(max_level: u32, jump: u32, penalty: u32, initial_level: u32) -> Result<Self> {
        if max_level < 1 {
            return Err(Error::config("rule.z", "must be at least 1"));
        }
        if jump < 1 || jump > max_level {
            return Err(Error::config("rule.h", "must satisfy 1 <= h <= z"));
        }
        if initial_level > max_level {
            return Err(Error::config("rule.l0", "must satisfy 0 <= l0 <= z"));
        }
        Ok(BmsRule {
            max_level,
            jump,
            penalty,
            initial_level,
        })
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn jump(&self) -> u32 {
        self.jump
    }

    pub fn penalty(&self) -> u32 {
        self.penalty
    }

    pub fn initial_level(&self) -> u32 {
        self.initial_level
    }

    /// Same system with a different penalty period.
    pub fn with_penalty(self, penalty: u32) -> Self {
        BmsRule { penalty, ..self }
    }

    pub fn with_initial_level(self, initial_level: u32) -> Result<Self> {
        BmsRule::new(self.max_level, self.jump, self.penalty, initial_level)
    }

    /// Number of levels `z + 1`.
    pub fn level_count(&self) -> usize {
        self.max_level as usize + 1
    }

    /// `h + (z - h + 1)(pen + 1)`.
    pub fn state_count(&self) -> usize {
        let h = self.jump as usize;
        let z = self.max_level as usize;
        h + (z - h + 1) * (self.penalty as usize + 1)
    }

    /// `(l0)_0`, the state of a policyholder without history.
    pub fn entry_state(&self) -> AugmentedState {
        AugmentedState {
            level: self.initial_level,
            counter: 0,
        }
    }

    pub fn contains(&self, state: AugmentedState) -> bool {
        if state.level > self.max_level {
            return false;
        }
        if state.level < self.jump {
            state.counter == 0
        } else {
            state.counter <= self.penalty
        }
    }

    /// Level reached from `level` after reporting `claims > 0` claims.
    fn level_after_claims(&self, level: u32, claims: u32) -> u32 {
        let climb = u64::from(self.jump) * u64::from(claims);
        let target = u64::from(level) + climb;
        target.min(u64::from(self.max_level)) as u32
    }

    /// One year of the Markovian rule on augmented states.
    pub fn step(&self, state: AugmentedState, claims: u32) -> AugmentedState {
        debug_assert!(self.contains(state), "{state} is not a state of {self}");
        if claims == 0 {
            if state.counter == 0 {
                AugmentedState {
                    level: state.level.saturating_sub(1),
                    counter: 0,
                }
            } else {
                AugmentedState {
                    level: state.level,
                    counter: state.counter - 1,
                }
            }
        } else {
            let level = self.level_after_claims(state.level, claims);
            // Unreachable for claims >= 1 since l + h*n >= h; kept so the
            // map stays closed on the state space.
            let counter = if level < self.jump { 0 } else { self.penalty };
            AugmentedState { level, counter }
        }
    }
}

impl fmt::Display for BmsRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "-1/+{}/{} (z={}, l0={})",
            self.jump, self.penalty, self.max_level, self.initial_level
        )
    }
}

/// `(level)_counter`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AugmentedState {
    pub level: u32,
    pub counter: u32,
}

impl AugmentedState {
    pub fn new(level: u32, counter: u32) -> Self {
        AugmentedState { level, counter }
    }
}

impl fmt::Display for AugmentedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})_{}", self.level, self.counter)
    }
}

/// The ordered augmented state space: ascending level, then ascending
/// counter. Every matrix and vector in the crate uses this ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    rule: BmsRule,
    states: Vec<AugmentedState>,
}

impl StateSpace {
    pub fn new(rule: BmsRule) -> Self {
        let mut states = Vec::with_capacity(rule.state_count());
        for level in 0..=rule.max_level {
            let top = if level < rule.jump { 0 } else { rule.penalty };
            for counter in 0..=top {
                states.push(AugmentedState { level, counter });
            }
        }
        debug_assert_eq!(states.len(), rule.state_count());
        StateSpace { rule, states }
    }

    pub fn rule(&self) -> &BmsRule {
        &self.rule
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[AugmentedState] {
        &self.states
    }

    pub fn state(&self, index: usize) -> AugmentedState {
        self.states[index]
    }

    /// Position of `state` in the ordering, `None` if it is not a state.
    pub fn index_of(&self, state: AugmentedState) -> Option<usize> {
        if !self.rule.contains(state) {
            return None;
        }
        let h = self.rule.jump as usize;
        let level = state.level as usize;
        if level < h {
            Some(level)
        } else {
            let width = self.rule.penalty as usize + 1;
            Some(h + (level - h) * width + state.counter as usize)
        }
    }

    /// Index of `(z)_pen`, the state every large claim count lands on.
    pub fn top_index(&self) -> usize {
        self.states.len() - 1
    }

    /// Indices of `(level)_0 ..= (level)_a` for one level.
    pub fn indices_of_level(&self, level: u32) -> core::ops::Range<usize> {
        let first = self
            .index_of(AugmentedState { level, counter: 0 })
            .expect("level within 0..=z");
        let width = if level < self.rule.jump {
            1
        } else {
            self.rule.penalty as usize + 1
        };
        first..first + width
    }
}

/// `min(pen, t)`: extra claim-free years required at time `t`.
pub fn penalty_at(t: u64, pen: u32) -> u32 {
    t.min(u64::from(pen)) as u32
}

/// Non-Markovian bookkeeping for the raw level rule: the level, the
/// length of the current claim-free run and the time index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawHistoryState {
    pub level: u32,
    pub consecutive_claim_free: u64,
    pub time: u64,
}

impl RawHistoryState {
    pub fn new(rule: &BmsRule) -> Self {
        RawHistoryState {
            level: rule.initial_level,
            consecutive_claim_free: 0,
            time: 0,
        }
    }

    /// Advances from `L_{t-1}` to `L_t` given `N_t`.
    ///
    /// A claim-free year lowers the level only when
    /// `N_t = ... = N_{max(t - pen*_{t-1}, 1)} = 0`.
    pub fn advance(&mut self, claims: u32, rule: &BmsRule) {
        let t = self.time + 1;
        if claims > 0 {
            self.level = rule.level_after_claims(self.level, claims);
            self.consecutive_claim_free = 0;
        } else {
            self.consecutive_claim_free += 1;
            let pen_prev = u64::from(penalty_at(t - 1, rule.penalty));
            let window_start = t.saturating_sub(pen_prev).max(1);
            let window = t - window_start + 1;
            if self.consecutive_claim_free >= window {
                self.level = self.level.saturating_sub(1);
            }
        }
        self.time = t;
    }
}

/// Level path of a claim history under both rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    /// `L_0 ..= L_T` from the raw rule.
    pub levels: Vec<u32>,
    /// `pen*_0 ..= pen*_T`.
    pub penalties: Vec<u32>,
    /// `L*_0 ..= L*_T` from the augmented rule.
    pub states: Vec<AugmentedState>,
}

impl Trajectory {
    /// Whether the raw levels equal the level projection of the augmented
    /// path at every time.
    pub fn is_consistent(&self) -> bool {
        self.levels.len() == self.states.len()
            && self.levels.iter().zip(&self.states).all(|(l, s)| *l == s.level)
    }
}

/// Replays a claim history `N_1, ..., N_T` from `L_0 = l0`.
pub fn replay_raw(claims: &[u32], rule: &BmsRule) -> Trajectory {
    let mut raw = RawHistoryState::new(rule);
    let mut state = rule.entry_state();
    let mut levels = Vec::with_capacity(claims.len() + 1);
    let mut penalties = Vec::with_capacity(claims.len() + 1);
    let mut states = Vec::with_capacity(claims.len() + 1);
    levels.push(raw.level);
    penalties.push(penalty_at(0, rule.penalty));
    states.push(state);
    for &n in claims {
        raw.advance(n, rule);
        state = rule.step(state, n);
        levels.push(raw.level);
        penalties.push(penalty_at(raw.time, rule.penalty));
        states.push(state);
    }
    Trajectory {
        levels,
        penalties,
        states,
    }
}
