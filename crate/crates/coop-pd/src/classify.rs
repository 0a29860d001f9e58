//! Greedy-policy extraction, exact joint dynamics over the four memory
//! states, the cooperative-profile criterion and strategy-profile labels.
//!
//! Greedy policies make the state transition matrix deterministic, so limit
//! cycles are computed exactly by following the successor map instead of
//! sampling action sequences.

use crate::game::{Action, State};
use crate::qlearn::QTable;

/// Greedy choice per state; exact ties resolve to Defect and are flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Policy {
    actions: [Action; 4],
    ties: [bool; 4],
}

impl Policy {
    pub fn from_actions(actions: [Action; 4]) -> Policy {
        Policy {
            actions,
            ties: [false; 4],
        }
    }

    #[inline]
    pub fn action(&self, state: State) -> Action {
        self.actions[state.index()]
    }

    #[inline]
    pub fn tie(&self, state: State) -> bool {
        self.ties[state.index()]
    }

    pub fn has_tie(&self) -> bool {
        self.ties.iter().any(|&t| t)
    }

    pub fn actions(&self) -> [Action; 4] {
        self.actions
    }

    fn plays(&self, action: Action) -> bool {
        self.actions.iter().all(|&a| a == action)
    }

    fn is_grim_trigger(&self) -> bool {
        self.actions == [Action::Coop, Action::Defect, Action::Defect, Action::Defect]
    }

    fn is_wsls(&self) -> bool {
        self.actions == [Action::Coop, Action::Defect, Action::Defect, Action::Coop]
    }

    /// Oscillation is matched on the two on-cycle states only.
    fn is_osc(&self) -> bool {
        self.action(State::CC) == Action::Defect && self.action(State::DD) == Action::Coop
    }
}

pub fn greedy_policy(q: &QTable) -> Policy {
    let mut actions = [Action::Defect; 4];
    let mut ties = [false; 4];
    for state in State::ALL {
        let c = q.get(state, Action::Coop);
        let d = q.get(state, Action::Defect);
        if c > d {
            actions[state.index()] = Action::Coop;
        } else {
            actions[state.index()] = Action::Defect;
            ties[state.index()] = c == d;
        }
    }
    Policy { actions, ties }
}

/// Limit behavior reachable from one start state.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleStats {
    pub cycle: Vec<State>,
    /// Fraction of cycle periods in which the row player is exploited
    /// (plays Coop against Defect).
    pub sucker_row: f64,
    /// Same for the column player.
    pub sucker_col: f64,
}

/// Deterministic joint dynamics of a policy pair. Joint states are stored in
/// the row player's perspective.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDynamics {
    pub successor: [State; 4],
    pub per_start: [CycleStats; 4],
}

pub fn joint_dynamics(row: &Policy, col: &Policy) -> JointDynamics {
    let mut successor = [State::DD; 4];
    for state in State::ALL {
        let a_row = row.action(state);
        let a_col = col.action(state.mirror());
        successor[state.index()] = State::from_actions(a_row, a_col);
    }

    let per_start = State::ALL.map(|start| {
        // Four states: every path enters its cycle within four steps.
        let mut path = Vec::with_capacity(5);
        let mut current = start;
        let cycle = loop {
            if let Some(pos) = path.iter().position(|&s| s == current) {
                break path[pos..].to_vec();
            }
            path.push(current);
            current = successor[current.index()];
        };
        let len = cycle.len() as f64;
        let sucker_row = cycle.iter().filter(|&&s| s == State::CD).count() as f64 / len;
        let sucker_col = cycle.iter().filter(|&&s| s == State::DC).count() as f64 / len;
        CycleStats {
            cycle,
            sucker_row,
            sucker_col,
        }
    });

    JointDynamics {
        successor,
        per_start,
    }
}

/// Cooperative-profile criterion: mutual defection must not be absorbing and
/// no limit cycle may exploit either player half the time or more.
pub fn is_cooperative(d: &JointDynamics) -> bool {
    if d.successor[State::DD.index()] == State::DD {
        return false;
    }
    d.per_start
        .iter()
        .all(|c| c.sucker_row < 0.5 && c.sucker_col < 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyLabel {
    MutualAllC,
    MutualWsls,
    MutualOsc,
    OtherCooperative,
    MutualAllD,
    MutualGt,
    Expl,
    OtherNonCooperative,
}

impl StrategyLabel {
    pub const ALL: [StrategyLabel; 8] = [
        StrategyLabel::MutualAllC,
        StrategyLabel::MutualWsls,
        StrategyLabel::MutualOsc,
        StrategyLabel::OtherCooperative,
        StrategyLabel::MutualAllD,
        StrategyLabel::MutualGt,
        StrategyLabel::Expl,
        StrategyLabel::OtherNonCooperative,
    ];

    pub fn cooperative(self) -> bool {
        matches!(
            self,
            StrategyLabel::MutualAllC
                | StrategyLabel::MutualWsls
                | StrategyLabel::MutualOsc
                | StrategyLabel::OtherCooperative
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyLabel::MutualAllC => "mutual_allc",
            StrategyLabel::MutualWsls => "mutual_wsls",
            StrategyLabel::MutualOsc => "mutual_osc",
            StrategyLabel::OtherCooperative => "other_cooperative",
            StrategyLabel::MutualAllD => "mutual_alld",
            StrategyLabel::MutualGt => "mutual_gt",
            StrategyLabel::Expl => "expl",
            StrategyLabel::OtherNonCooperative => "other_noncooperative",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&l| l == self).unwrap()
    }
}

/// Assigns the strategy-profile label; the precedence order is total.
pub fn label(row: &Policy, col: &Policy, d: &JointDynamics) -> StrategyLabel {
    if row.plays(Action::Coop) && col.plays(Action::Coop) {
        return StrategyLabel::MutualAllC;
    }
    if row.plays(Action::Defect) && col.plays(Action::Defect) {
        return StrategyLabel::MutualAllD;
    }
    if row.is_grim_trigger() && col.is_grim_trigger() {
        return StrategyLabel::MutualGt;
    }
    if row.is_wsls() && col.is_wsls() {
        return StrategyLabel::MutualWsls;
    }
    if row.is_osc() && col.is_osc() {
        return StrategyLabel::MutualOsc;
    }
    if d.per_start
        .iter()
        .any(|c| c.sucker_row >= 0.5 || c.sucker_col >= 0.5)
    {
        return StrategyLabel::Expl;
    }
    if is_cooperative(d) {
        StrategyLabel::OtherCooperative
    } else {
        StrategyLabel::OtherNonCooperative
    }
}

/// Convenience: classify a pair of final Q-tables.
pub fn classify_tables(q_row: &QTable, q_col: &QTable) -> (Policy, Policy, JointDynamics, StrategyLabel) {
    let row = greedy_policy(q_row);
    let col = greedy_policy(q_col);
    let d = joint_dynamics(&row, &col);
    let l = label(&row, &col, &d);
    (row, col, d, l)
}

pub mod canon {
    //! Canonical policies used by tests and fixtures.
    use super::Policy;
    use crate::game::Action::{Coop as C, Defect as D};

    pub fn allc() -> Policy {
        Policy::from_actions([C, C, C, C])
    }

    pub fn alld() -> Policy {
        Policy::from_actions([D, D, D, D])
    }

    pub fn grim_trigger() -> Policy {
        Policy::from_actions([C, D, D, D])
    }

    pub fn wsls() -> Policy {
        Policy::from_actions([C, D, D, C])
    }

    pub fn osc() -> Policy {
        Policy::from_actions([D, D, D, C])
    }
}
