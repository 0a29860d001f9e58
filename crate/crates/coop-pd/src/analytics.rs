//! Closed-form replicator-potential analytics for the grim-trigger normal
//! form: the potential function, its interior maximum, basin kinetic
//! energies, the kinetic log-ratio and the sizeBAD/sizeGOOD measures.

use crate::game::GameParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("p must lie in [0, 1], got {0}")]
    OutOfDomain(f64),
    #[error("no interior maximum: requires r > 1 - delta and s > 0")]
    NoInteriorMaximum,
    #[error("degenerate basin: requires r > 1 - delta and s > 0")]
    DegenerateBasin,
    #[error("kinetic log-ratio undefined: nonpositive kinetic energy")]
    UndefinedKlr,
    #[error("no s in (1e-12, 1e6) brackets the target kinetic log-ratio")]
    InfeasibleTarget,
}

/// Drift coefficient of the cooperation term: a = r - (1 - delta).
#[inline]
fn coeff_a(g: &GameParams) -> f64 {
    g.r - (1.0 - g.delta)
}

/// Drift coefficient of the sucker term: b = (1 - delta) * s.
#[inline]
fn coeff_b(g: &GameParams) -> f64 {
    (1.0 - g.delta) * g.s
}

/// Signed distance from (delta, r) to the binding incentive-compatibility
/// hyperplane r + delta - 1 = 0. Negative when the constraint is violated.
pub fn d_ic(delta: f64, r: f64) -> f64 {
    (delta + r - 1.0) / std::f64::consts::SQRT_2
}

/// Potential function U(p) of the replicator dynamics under grim trigger,
/// evaluated from its exact antiderivative with U(0) = 0.
pub fn potential(g: &GameParams, p: f64) -> Result<f64, AnalyticsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AnalyticsError::OutOfDomain(p));
    }
    let a = coeff_a(g);
    let b = coeff_b(g);
    let p2 = p * p;
    let p3 = p2 * p;
    let p4 = p3 * p;
    Ok(-((a + b) * (p3 / 3.0 - p4 / 4.0) - b * (p2 / 2.0 - p3 / 3.0)))
}

/// dU/dp = -p * ((r - (1-delta)) (1-p) p - (1-delta) s (1-p)^2).
pub fn potential_derivative(g: &GameParams, p: f64) -> f64 {
    let q = 1.0 - p;
    -p * (coeff_a(g) * q * p - coeff_b(g) * q * q)
}

/// Interior maximizer of U on (0, 1); equals sizeBAD.
pub fn p_star(g: &GameParams) -> Result<f64, AnalyticsError> {
    let a = coeff_a(g);
    let b = coeff_b(g);
    if !(a > 0.0 && b > 0.0) {
        return Err(AnalyticsError::NoInteriorMaximum);
    }
    Ok(b / (a + b))
}

/// sizeBAD: the basin of attraction to defection, identical to `p_star`.
pub fn size_bad(g: &GameParams) -> Result<f64, AnalyticsError> {
    p_star(g)
}

/// Kinetic energies of the cooperation and defection basins:
/// (U(p*) - U(1), U(p*) - U(0)).
pub fn kinetic_energies(g: &GameParams) -> Result<(f64, f64), AnalyticsError> {
    let ps = p_star(g).map_err(|_| AnalyticsError::DegenerateBasin)?;
    let a = coeff_a(g);
    let b = coeff_b(g);
    // Expanded antiderivatives of the drift on each side of p*; equal to
    // U(p*) - U(1) and U(p*) - U(0) but free of the catastrophic
    // cancellation the direct differences suffer when p* sits near 0 or 1.
    let q = 1.0 - ps; // = a / (a + b)
    let ke_c = a * q * q / 2.0 - (2.0 * a + b) * q * q * q / 3.0 + (a + b) * q * q * q * q / 4.0;
    let p = ps;
    let ke_d = b * p * p / 2.0 - (a + 2.0 * b) * p * p * p / 3.0 + (a + b) * p * p * p * p / 4.0;
    Ok((ke_c, ke_d))
}

/// Kinetic log-ratio ln((1-delta) KE^c) - ln(delta KE^d), natural log.
pub fn klr(g: &GameParams) -> Result<f64, AnalyticsError> {
    let (ke_c, ke_d) = kinetic_energies(g)?;
    if !(ke_c > 0.0 && ke_d > 0.0) {
        return Err(AnalyticsError::UndefinedKlr);
    }
    Ok(((1.0 - g.delta) * ke_c).ln() - (g.delta * ke_d).ln())
}

/// Distance of a kinetic log-ratio from the cooperation frontier ln(K * eps);
/// zero on the frontier, positive on the cooperative side.
pub fn frontier_offset(klr_value: f64, k: f64, epsilon: f64) -> f64 {
    klr_value - (k * epsilon).ln()
}

const S_BRACKET_MIN: f64 = 1e-12;
const S_BRACKET_MAX: f64 = 1e6;
const S_SOLVE_TOL: f64 = 1e-9;

/// Inverts the strictly decreasing map s -> KLR(delta, r, s) by bisection.
pub fn solve_s_for_klr(delta: f64, r: f64, target_klr: f64) -> Result<f64, AnalyticsError> {
    if !(r > 1.0 - delta) || !target_klr.is_finite() {
        return Err(AnalyticsError::InfeasibleTarget);
    }
    let f = |s: f64| klr(&GameParams { r, s, delta });

    // KLR -> +inf as s -> 0+ and -> -inf as s -> inf, so expand a bracket
    // [lo, hi] with f(lo) >= target >= f(hi).
    let mut lo = 1.0;
    while f(lo)? < target_klr {
        lo /= 2.0;
        if lo < S_BRACKET_MIN {
            return Err(AnalyticsError::InfeasibleTarget);
        }
    }
    let mut hi = lo;
    while f(hi)? > target_klr {
        hi *= 2.0;
        if hi > S_BRACKET_MAX {
            return Err(AnalyticsError::InfeasibleTarget);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if (v - target_klr).abs() <= S_SOLVE_TOL {
            return Ok(mid);
        }
        if v > target_klr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(AnalyticsError::InfeasibleTarget)
}

/// All potential-derived quantities for one game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialStats {
    pub a: f64,
    pub b: f64,
    pub p_star: f64,
    pub ke_c: f64,
    pub ke_d: f64,
    pub klr: f64,
    pub size_bad: f64,
    pub size_good: f64,
    pub d_ic: f64,
}

impl PotentialStats {
    pub fn compute(g: &GameParams) -> Result<PotentialStats, AnalyticsError> {
        let ps = p_star(g)?;
        let (ke_c, ke_d) = kinetic_energies(g)?;
        let klr = klr(g)?;
        Ok(PotentialStats {
            a: coeff_a(g),
            b: coeff_b(g),
            p_star: ps,
            ke_c,
            ke_d,
            klr,
            size_bad: ps,
            size_good: 1.0 - ps,
            d_ic: d_ic(g.delta, g.r),
        })
    }
}

/// A game for which KLR >= 0 but sizeGOOD < 0.5 would contradict the
/// subset relation between the two frontier criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropositionSample {
    pub game: GameParams,
    pub klr: f64,
    pub size_good: f64,
}

/// Samples random games with delta > 0.5, r > 1 - delta, s > 0 and returns
/// every sample violating the subset relation (expected: none).
pub fn check_proposition1(sample_count: usize, seed: u64) -> Vec<PropositionSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counterexamples = Vec::new();
    for _ in 0..sample_count {
        let delta = rng.gen_range(0.5..1.0f64).max(0.5 + 1e-12);
        let r = rng.gen_range((1.0 - delta)..1.0f64).max(1.0 - delta + 1e-12);
        let s = rng.gen_range(0.0..5.0f64).max(1e-12);
        let g = GameParams { r, s, delta };
        let stats = PotentialStats::compute(&g).expect("sampled game has an interior maximum");
        if stats.klr >= 0.0 && stats.size_good < 0.5 {
            counterexamples.push(PropositionSample {
                game: g,
                klr: stats.klr,
                size_good: stats.size_good,
            });
        }
    }
    counterexamples
}

/// Draws a random valid game with an interior maximum; shared by the
/// property suites.
pub fn random_interior_game<R: Rng>(rng: &mut R) -> GameParams {
    let delta = rng.gen_range(0.05..0.99f64);
    let r = rng.gen_range((1.0 - delta).min(1.0 - 1e-6)..1.0f64).max(1.0 - delta + 1e-9);
    let s = rng.gen_range(1e-6..5.0f64);
    GameParams { r, s, delta }
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Replicator drift integrand of the potential integral, written
    /// directly from the normal form rather than the antiderivative.
    fn drift_integrand(g: &GameParams, x: f64) -> f64 {
        let p = [x, 1.0 - x];
        let m = crate::game::gt_payoff_matrix(g);
        let ap0 = m[0][0] * p[0] + m[0][1] * p[1];
        let ap1 = m[1][0] * p[0] + m[1][1] * p[1];
        let pap = p[0] * ap0 + p[1] * ap1;
        -(x * (ap0 - pap))
    }

    fn simpson(g: &GameParams, lo: f64, hi: f64) -> f64 {
        let mid = 0.5 * (lo + hi);
        (hi - lo) / 6.0
            * (drift_integrand(g, lo) + 4.0 * drift_integrand(g, mid) + drift_integrand(g, hi))
    }

    fn adaptive(g: &GameParams, lo: f64, hi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (lo + hi);
        let left = simpson(g, lo, mid);
        let right = simpson(g, mid, hi);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        adaptive(g, lo, mid, left, tol / 2.0, depth - 1)
            + adaptive(g, mid, hi, right, tol / 2.0, depth - 1)
    }

    /// Adaptive Simpson quadrature of the potential integral.
    pub fn quad_potential(g: &GameParams, p: f64) -> f64 {
        if p == 0.0 {
            return 0.0;
        }
        adaptive(g, 0.0, p, simpson(g, 0.0, p), 1e-12, 40)
    }
}
