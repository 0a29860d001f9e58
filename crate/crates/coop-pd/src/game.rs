//! Normalized prisoner's-dilemma payoffs, actions, memory states and the
//! grim-trigger normal form.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("temptation must exceed punishment (T > P), got T={t}, P={p}")]
    BadNormalization { t: f64, p: f64 },
    #[error("invalid game parameters: {0}")]
    InvalidParams(String),
}

/// Stage-game actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Coop,
    Defect,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Coop, Action::Defect];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Action::Coop => 0,
            Action::Defect => 1,
        }
    }
}

/// One-period memory state from the focal player's perspective:
/// (own last action, opponent last action).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum State {
    CC,
    CD,
    DC,
    DD,
}

impl State {
    pub const ALL: [State; 4] = [State::CC, State::CD, State::DC, State::DD];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            State::CC => 0,
            State::CD => 1,
            State::DC => 2,
            State::DD => 3,
        }
    }

    #[inline]
    pub fn from_index(i: usize) -> State {
        Self::ALL[i]
    }

    #[inline]
    pub fn from_actions(own: Action, opp: Action) -> State {
        match (own, opp) {
            (Action::Coop, Action::Coop) => State::CC,
            (Action::Coop, Action::Defect) => State::CD,
            (Action::Defect, Action::Coop) => State::DC,
            (Action::Defect, Action::Defect) => State::DD,
        }
    }

    /// The same joint history seen from the other player's perspective.
    #[inline]
    pub fn mirror(self) -> State {
        match self {
            State::CC => State::CC,
            State::CD => State::DC,
            State::DC => State::CD,
            State::DD => State::DD,
        }
    }
}

/// Payoffs of a prisoner's dilemma in arbitrary units, prior to normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPayoffs {
    pub reward: f64,
    pub sucker: f64,
    pub temptation: f64,
    pub punishment: f64,
}

impl RawPayoffs {
    /// Normalizes to temptation 1 and punishment 0, returning (r, s) where the
    /// normalized sucker payoff is -s.
    pub fn normalize(&self) -> Result<(f64, f64), GameError> {
        let span = self.temptation - self.punishment;
        if !(span > 0.0) {
            return Err(GameError::BadNormalization {
                t: self.temptation,
                p: self.punishment,
            });
        }
        let r = (self.reward - self.punishment) / span;
        let s = -(self.sucker - self.punishment) / span;
        Ok((r, s))
    }
}

/// Normalized game: cooperation reward `r`, sucker magnitude `s` (stage payoff
/// is -s) and discount factor `delta`. Temptation is 1, punishment is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    pub r: f64,
    pub s: f64,
    pub delta: f64,
}

impl GameParams {
    /// Strictly validated constructor; rejects instead of clamping.
    pub fn new(r: f64, s: f64, delta: f64) -> Result<GameParams, GameError> {
        let g = GameParams { r, s, delta };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if !self.r.is_finite() || !(0.0..=1.0).contains(&self.r) {
            return Err(GameError::InvalidParams(format!(
                "r must satisfy 0 <= r <= 1, got {}",
                self.r
            )));
        }
        if !self.s.is_finite() || self.s < 0.0 {
            return Err(GameError::InvalidParams(format!(
                "s must satisfy s >= 0, got {}",
                self.s
            )));
        }
        if !self.delta.is_finite() || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(GameError::InvalidParams(format!(
                "delta must satisfy 0 < delta < 1, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// Focal player's stage payoff given both actions.
    #[inline]
    pub fn stage_payoff(&self, own: Action, opp: Action) -> f64 {
        match (own, opp) {
            (Action::Coop, Action::Coop) => self.r,
            (Action::Coop, Action::Defect) => -self.s,
            (Action::Defect, Action::Coop) => 1.0,
            (Action::Defect, Action::Defect) => 0.0,
        }
    }
}

/// True iff the normalized payoffs constitute a prisoner's dilemma
/// (1 >= r >= 0 and s >= 0).
pub fn is_prisoners_dilemma(g: &GameParams) -> bool {
    g.r <= 1.0 && g.r >= 0.0 && g.s >= 0.0
}

/// Row player's average discounted payoff matrix under grim trigger,
/// rows/columns indexed (coop, defect).
pub fn gt_payoff_matrix(g: &GameParams) -> [[f64; 2]; 2] {
    let one_minus_delta = 1.0 - g.delta;
    [[g.r, -one_minus_delta * g.s], [one_minus_delta, 0.0]]
}
