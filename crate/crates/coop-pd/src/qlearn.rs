//! Simultaneous two-agent epsilon-greedy tabular Q-learning with one-period
//! memory. Matches are fully deterministic given their seed: each agent owns
//! an independent ChaCha8 stream derived from (seed, stream index), and every
//! step consumes draws in a fixed order (exploration coin, then either the
//! exploration action or a tie-break draw).

use crate::game::{Action, GameParams, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QLearnError {
    #[error("invalid learner config: {0}")]
    InvalidConfig(String),
}

/// Q-value initialization mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Every entry starts at the discounted sum of perpetual cooperation,
    /// r / (1 - delta).
    Optimistic,
    /// Every entry starts at the stage-game Nash payoff of zero.
    Pessimistic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub init_mode: InitMode,
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), QLearnError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(QLearnError::InvalidConfig(format!(
                "alpha must satisfy 0 < alpha <= 1, got {}",
                self.alpha
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(QLearnError::InvalidConfig(format!(
                "epsilon must satisfy 0 <= epsilon < 1, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(QLearnError::InvalidConfig(format!(
                "delta must satisfy 0 < delta < 1, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Action values over the four memory states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QTable {
    values: [[f64; 2]; 4],
}

impl QTable {
    pub fn filled(value: f64) -> QTable {
        QTable {
            values: [[value; 2]; 4],
        }
    }

    pub fn from_values(values: [[f64; 2]; 4]) -> QTable {
        QTable { values }
    }

    #[inline]
    pub fn get(&self, state: State, action: Action) -> f64 {
        self.values[state.index()][action.index()]
    }

    #[inline]
    pub fn set(&mut self, state: State, action: Action, value: f64) {
        self.values[state.index()][action.index()] = value;
    }

    /// Highest action value at `state`.
    #[inline]
    pub fn max_at(&self, state: State) -> f64 {
        let row = self.values[state.index()];
        if row[0] >= row[1] {
            row[0]
        } else {
            row[1]
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    pub fn values(&self) -> &[[f64; 2]; 4] {
        &self.values
    }
}

/// Initial table per the configured mode.
pub fn init_qtable(cfg: &LearnerConfig, g: &GameParams) -> QTable {
    match cfg.init_mode {
        InitMode::Optimistic => QTable::filled(g.r / (1.0 - cfg.delta)),
        InitMode::Pessimistic => QTable::filled(0.0),
    }
}

/// Epsilon-greedy action selection. Consumes one coin draw per call, plus one
/// draw for the exploration action or for a greedy tie-break.
#[inline]
pub fn select_action<R: Rng>(q: &QTable, state: State, epsilon: f64, rng: &mut R) -> Action {
    if rng.gen::<f64>() < epsilon {
        return Action::ALL[(rng.gen::<u32>() & 1) as usize];
    }
    let c = q.get(state, Action::Coop);
    let d = q.get(state, Action::Defect);
    if c > d {
        Action::Coop
    } else if d > c {
        Action::Defect
    } else {
        Action::ALL[(rng.gen::<u32>() & 1) as usize]
    }
}

/// One-step update; the bootstrap max reads the pre-update table and only the
/// (state, action) entry changes.
#[inline]
pub fn q_update(
    mut q: QTable,
    state: State,
    action: Action,
    payoff: f64,
    next_state: State,
    alpha: f64,
    delta: f64,
) -> QTable {
    let old = q.get(state, action);
    let target = payoff + delta * q.max_at(next_state);
    q.set(state, action, old + alpha * (target - old));
    q
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub periods: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub q_row: QTable,
    pub q_col: QTable,
    /// Fraction of all individual actions that were Coop; diagnostic only.
    pub coop_frequency: f64,
}

/// splitmix64 finalizer; the basis of the counter-splitting seed scheme.
#[inline]
pub fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `stream` from a parent seed. Streams used
/// by a match: 0 = row agent, 1 = column agent, 2 = initial-state draw.
#[inline]
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(parent ^ splitmix64(stream))
}

/// Runs one seeded match; both agents are configured identically.
pub fn run_match(g: &GameParams, cfg: &LearnerConfig, mc: &MatchConfig) -> MatchResult {
    let mut rng_row = ChaCha8Rng::seed_from_u64(derive_seed(mc.seed, 0));
    let mut rng_col = ChaCha8Rng::seed_from_u64(derive_seed(mc.seed, 1));
    let mut rng_init = ChaCha8Rng::seed_from_u64(derive_seed(mc.seed, 2));
    let initial = State::from_index(rng_init.gen_range(0..4));
    run_match_from(g, cfg, mc.periods, initial, &mut rng_row, &mut rng_col)
}

/// Match body with explicit streams and initial joint state (row perspective).
pub fn run_match_from<R: Rng>(
    g: &GameParams,
    cfg: &LearnerConfig,
    periods: u64,
    initial_state: State,
    rng_row: &mut R,
    rng_col: &mut R,
) -> MatchResult {
    let mut q_row = init_qtable(cfg, g);
    let mut q_col = init_qtable(cfg, g);
    let mut state_row = initial_state;
    let mut state_col = initial_state.mirror();
    let mut coop_actions: u64 = 0;

    for _ in 0..periods {
        let a_row = select_action(&q_row, state_row, cfg.epsilon, rng_row);
        let a_col = select_action(&q_col, state_col, cfg.epsilon, rng_col);
        let u_row = g.stage_payoff(a_row, a_col);
        let u_col = g.stage_payoff(a_col, a_row);
        let next_row = State::from_actions(a_row, a_col);
        let next_col = next_row.mirror();
        q_row = q_update(q_row, state_row, a_row, u_row, next_row, cfg.alpha, cfg.delta);
        q_col = q_update(q_col, state_col, a_col, u_col, next_col, cfg.alpha, cfg.delta);
        state_row = next_row;
        state_col = next_col;
        coop_actions += (a_row == Action::Coop) as u64 + (a_col == Action::Coop) as u64;
    }

    MatchResult {
        q_row,
        q_col,
        coop_frequency: if periods == 0 {
            0.0
        } else {
            coop_actions as f64 / (2 * periods) as f64
        },
    }
}
