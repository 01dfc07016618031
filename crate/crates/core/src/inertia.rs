//! Inertia depth of a status-quo equilibrium and the transfer bounds that
//! decide whether it survives.
//!
//! `deviation_gain` is the literal unilateral gain (best response minus the
//! profile's value). At an equilibrium it is never positive and, because the
//! best response may simply repeat the status quo, it is zero wherever the
//! status quo is itself optimal. The depth `Θ` therefore uses
//! `departure_gain`: the best a player can do when, from the evaluation
//! stage on, it may not play its status-quo control while the state is the
//! status-quo state. That is the "leave the status quo" deviation the
//! survival and converse bounds reason about.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::intervene::TransferTable;
use crate::scalar::Scalar;
use crate::solve::{constrained_best_response, joint_value, verify_mpe, EquilibriumReport, PolicyProfile, SolveError};
use crate::uniformize::{UniformizeError, UniformizedGame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InertiaError {
    #[error("profile is not an MPE (max deviation gain {gain} > tol {tol})")]
    NotEquilibrium { gain: f64, tol: f64 },
    #[error("stage {stage} leaves no remaining time (horizon has {stages} stages)")]
    NoRemainingTime { stage: usize, stages: usize },
    #[error("state {state} out of range ({states} states)")]
    State { state: usize, states: usize },
    #[error("epsilon must be positive")]
    Epsilon,
    #[error("no player has a control other than its status-quo control at the evaluation point")]
    NoDeparture,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Uniformize(#[from] UniformizeError),
}

fn check_point<S: Scalar>(ug: &UniformizedGame<S>, k: usize, s: usize) -> Result<(), InertiaError> {
    if k >= ug.stages {
        return Err(InertiaError::NoRemainingTime { stage: k, stages: ug.stages });
    }
    if s >= ug.states() {
        return Err(InertiaError::State { state: s, states: ug.states() });
    }
    Ok(())
}

/// `D_i(k, s) = BR_i(k, s) - V_i(k, s)`.
pub fn deviation_gain<S: Scalar>(
    ug: &UniformizedGame<S>,
    profile: &PolicyProfile,
    i: usize,
    k: usize,
    s: usize,
) -> Result<S, InertiaError> {
    check_point(ug, k, s)?;
    let v = joint_value(ug, profile)?;
    let (_, br) = crate::solve::best_response(ug, profile, i)?;
    Ok(br[k * ug.states() + s].clone() - v.get(i, k, s).clone())
}

/// Best value for `i` among deviations that never play the status-quo
/// control at state `s` from stage `k` on, minus the status-quo value.
/// `None` when `i` has no other control.
pub fn departure_gain<S: Scalar>(
    ug: &UniformizedGame<S>,
    profile: &PolicyProfile,
    i: usize,
    k: usize,
    s: usize,
) -> Result<Option<S>, InertiaError> {
    check_point(ug, k, s)?;
    if i >= ug.players() {
        return Err(SolveError::UnknownPlayer(i).into());
    }
    if ug.controls().count(i) < 2 {
        return Ok(None);
    }
    profile.check(ug)?;
    let v = joint_value(ug, profile)?;
    let (_, values) = departure_response(ug, profile, i, k, s);
    Ok(Some(values[k * ug.states() + s].clone() - v.get(i, k, s).clone()))
}

fn departure_response<S: Scalar>(
    ug: &UniformizedGame<S>,
    profile: &PolicyProfile,
    i: usize,
    k0: usize,
    s0: usize,
) -> (crate::solve::PlayerPolicy, Vec<S>) {
    constrained_best_response(ug, profile, i, |k, s, c| !(k >= k0 && s == s0 && c == profile.control(i, k, s)))
}

/// Same quantity as [`departure_gain`], obtained by materializing the
/// departing policy and evaluating the resulting profile from scratch.
pub fn departure_gain_by_evaluation<S: Scalar>(
    ug: &UniformizedGame<S>,
    profile: &PolicyProfile,
    i: usize,
    k: usize,
    s: usize,
) -> Result<Option<S>, InertiaError> {
    check_point(ug, k, s)?;
    if ug.controls().count(i) < 2 {
        return Ok(None);
    }
    let (policy, _) = departure_response(ug, profile, i, k, s);
    let deviated = joint_value(ug, &profile.with_player(i, policy))?;
    let base = joint_value(ug, profile)?;
    Ok(Some(deviated.get(i, k, s).clone() - base.get(i, k, s).clone()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InertiaReport<S> {
    /// Per-player departure gain at the evaluation point (`None`: no
    /// alternative control).
    pub d: Vec<Option<S>>,
    /// Per-player literal best-response gain at the evaluation point.
    pub literal: Vec<S>,
    pub theta: S,
    pub stage: usize,
    pub state: usize,
    /// `T - t` in uniformized time.
    pub remaining: S,
    pub survival_delta: S,
    pub converse_delta: S,
    pub epsilon: S,
}

/// `Θ = min_i (-D_i)`, `Θ / (2(T-t))` and `Θ/(T-t) + ε`.
///
/// With `epsilon = None` the default `max(1e-3·Θ, 1e-6)` is used.
pub fn inertia_depth<S: Scalar>(
    ug: &UniformizedGame<S>,
    profile: &PolicyProfile,
    k: usize,
    s: usize,
    tol: S,
    epsilon: Option<S>,
) -> Result<InertiaReport<S>, InertiaError> {
    check_point(ug, k, s)?;
    let report = verify_mpe(ug, profile, tol.clone())?;
    if !report.is_mpe {
        return Err(InertiaError::NotEquilibrium { gain: report.max_gain().to_f64(), tol: tol.to_f64() });
    }
    let mut d = Vec::new();
    let mut literal = Vec::new();
    for i in 0..ug.players() {
        d.push(departure_gain(ug, profile, i, k, s)?);
        literal.push(deviation_gain(ug, profile, i, k, s)?);
    }
    let theta = d
        .iter()
        .flatten()
        .map(|g| -g.clone())
        .reduce(S::min_of)
        .ok_or(InertiaError::NoDeparture)?;
    let epsilon = match epsilon {
        Some(e) if e > S::zero() => e,
        Some(_) => return Err(InertiaError::Epsilon),
        None => default_epsilon(&theta),
    };
    let remaining = ug.remaining(k);
    let two = S::from_i64(2);
    Ok(InertiaReport {
        survival_delta: theta.clone() / (two * remaining.clone()),
        converse_delta: theta.clone() / remaining.clone() + epsilon.clone(),
        d,
        literal,
        theta,
        stage: k,
        state: s,
        remaining,
        epsilon,
    })
}

pub fn default_epsilon<S: Scalar>(theta: &S) -> S {
    let floor = S::from_i64(1) / S::from_i64(1_000_000);
    S::max_of(theta.clone() / S::from_i64(1000), floor)
}

/// `t_i(k, s, u) = -(Θ/(T-t) + ε)·1{s = s_sq}` for every player, stage and
/// control profile.
pub fn converse_transfer<S: Scalar>(
    ug: &UniformizedGame<S>,
    theta: &S,
    k: usize,
    epsilon: &S,
    s_sq: usize,
) -> Result<TransferTable<S>, InertiaError> {
    check_point(ug, k, s_sq)?;
    if *epsilon <= S::zero() {
        return Err(InertiaError::Epsilon);
    }
    let penalty = -(theta.clone() / ug.remaining(k) + epsilon.clone());
    Ok(TransferTable::from_fn(ug, |_, s, _, _| if s == s_sq { penalty.clone() } else { S::zero() }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalOutcome<S> {
    /// No player gains more than `tol` by deviating at the evaluation point.
    pub survives: bool,
    /// `max_i [BR_i - V_i](k, s_sq)` in the induced game.
    pub gain_at_point: S,
    /// Full subgame-perfection check of the induced game.
    pub report: EquilibriumReport<S>,
}

/// Whether the status quo survives `transfers`, judged at `(k, s_sq)`.
pub fn test_survival<S: Scalar>(
    ug: &UniformizedGame<S>,
    profile: &PolicyProfile,
    transfers: &TransferTable<S>,
    k: usize,
    s_sq: usize,
    tol: S,
) -> Result<SurvivalOutcome<S>, InertiaError> {
    check_point(ug, k, s_sq)?;
    let induced = ug.with_transfers(transfers.clone())?;
    let gain = (0..ug.players())
        .map(|i| deviation_gain(&induced, profile, i, k, s_sq))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .reduce(S::max_of)
        .unwrap_or_else(S::zero);
    let report = verify_mpe(&induced, profile, tol.clone())?;
    Ok(SurvivalOutcome { survives: gain <= tol, gain_at_point: gain, report })
}

/// Transfer table with entries uniform on `(-bound, bound)`. Scheme `j` of a
/// batch uses `ChaCha8(seed)` stream `j`.
pub fn random_transfers(ug: &UniformizedGame<f64>, bound: f64, seed: u64, stream: u64) -> TransferTable<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    // open interval: gen_range excludes the upper end, reject the lower one
    TransferTable::from_fn(ug, |_, _, _, _| loop {
        let x: f64 = rng.gen_range(-1.0..1.0);
        if x > -1.0 {
            break x * bound;
        }
    })
}

/// Structured worst cases at level `delta`: a penalty on `s_sq`, a reward
/// off `s_sq`, and both together.
pub fn structured_transfers<S: Scalar>(
    ug: &UniformizedGame<S>,
    delta: &S,
    s_sq: usize,
) -> Vec<(&'static str, TransferTable<S>)> {
    let on = |s: usize| s == s_sq;
    let d = delta.clone();
    vec![
        ("penalty-on-status-quo", TransferTable::from_fn(ug, |_, s, _, _| if on(s) { -d.clone() } else { S::zero() })),
        ("reward-off-status-quo", TransferTable::from_fn(ug, |_, s, _, _| if on(s) { S::zero() } else { d.clone() })),
        ("penalty-on-reward-off", TransferTable::from_fn(ug, |_, s, _, _| if on(s) { -d.clone() } else { d.clone() })),
    ]
}

/// `E∫t_i` from `(k, s)` when `i` deviates to `deviation` minus the same
/// integral under `profile`.
pub fn transfer_integral_gap<S: Scalar>(
    ug: &UniformizedGame<S>,
    profile: &PolicyProfile,
    deviation: &crate::solve::PlayerPolicy,
    transfers: &TransferTable<S>,
    i: usize,
    k: usize,
    s: usize,
) -> Result<S, InertiaError> {
    let only = ug.transfers_only(transfers.clone())?;
    let dev = joint_value(&only, &profile.with_player(i, deviation.clone()))?;
    let conf = joint_value(&only, profile)?;
    Ok(dev.get(i, k, s).clone() - conf.get(i, k, s).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervene::{dominance_family, stay_profile};
    use crate::model::{JointState, PlayerState};
    use crate::uniformize::uniformize;

    fn family(gamma: f64) -> (UniformizedGame<f64>, usize) {
        let (c, _) = dominance_family::<f64>(10.0, 1.0, gamma).unwrap();
        let ug = uniformize(&c, gamma).unwrap();
        let s = ug.lift(ug.space().index(&JointState(vec![PlayerState::Sleep; 2])).unwrap());
        (ug, s)
    }

    #[test]
    fn bounds_from_theta() {
        // theta = 2 at t = 0 with T = 1
        let (ug, s) = family(20.0);
        let t = converse_transfer(&ug, &2.0, 0, &0.1, s).unwrap();
        assert!((t.norm() - 2.1).abs() < 1e-12);
        assert_eq!(*t.get(3, s, 1, 0), -2.1);
        let zero = converse_transfer(&ug, &0.0, 0, &0.1, s).unwrap();
        assert_eq!(*zero.norm(), 0.1);
        assert!(matches!(converse_transfer(&ug, &2.0, ug.stages, &0.1, s), Err(InertiaError::NoRemainingTime { .. })));
    }

    #[test]
    fn survival_delta_shrinks_with_remaining_time() {
        let (ug, s) = family(20.0);
        let sq = stay_profile(&ug);
        let a = inertia_depth(&ug, &sq, 10, s, 1e-9, None).unwrap();
        let b = inertia_depth(&ug, &sq, 0, s, 1e-9, None).unwrap();
        assert!(b.remaining > a.remaining);
        let fixed = 3.0;
        assert!(fixed / (2.0 * b.remaining) < fixed / (2.0 * a.remaining));
    }

    #[test]
    fn literal_gain_is_zero_at_equilibrium() {
        let (ug, s) = family(20.0);
        let sq = stay_profile(&ug);
        for i in 0..2 {
            assert_eq!(deviation_gain(&ug, &sq, i, 0, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn departure_costs_at_least_switching_minus_benefit() {
        let (ug, s) = family(20.0);
        let sq = stay_profile(&ug);
        let d = departure_gain(&ug, &sq, 0, 0, s).unwrap().unwrap();
        assert!(d <= -10.0, "{d}");
    }

    #[test]
    fn theta_two_ways_agree_exactly() {
        let (ug, s) = family(20.0);
        let sq = stay_profile(&ug);
        for k in [0, 7, 19] {
            for i in 0..2 {
                assert_eq!(
                    departure_gain(&ug, &sq, i, k, s).unwrap(),
                    departure_gain_by_evaluation(&ug, &sq, i, k, s).unwrap()
                );
            }
        }
    }

    #[test]
    fn non_equilibrium_rejected() {
        let (ug, s) = family(20.0);
        // always switching pays κ for nothing
        let p = PolicyProfile::constant(&[1, 1], ug.stages, ug.states());
        assert!(matches!(inertia_depth(&ug, &p, 0, s, 1e-9, None), Err(InertiaError::NotEquilibrium { .. })));
    }

    #[test]
    fn zero_transfers_match_baseline() {
        let (ug, s) = family(20.0);
        let sq = stay_profile(&ug);
        let out = test_survival(&ug, &sq, &TransferTable::zeros_for(&ug), 0, s, 1e-9).unwrap();
        assert!(out.survives);
        assert_eq!(out.report.is_mpe, verify_mpe(&ug, &sq, 1e-9).unwrap().is_mpe);
    }

    #[test]
    fn random_transfers_are_bounded_and_reproducible() {
        let (ug, _) = family(20.0);
        let a = random_transfers(&ug, 0.5, 9, 3);
        assert!(*a.norm() < 0.5);
        assert_eq!(a, random_transfers(&ug, 0.5, 9, 3));
        assert_ne!(a, random_transfers(&ug, 0.5, 9, 4));
    }

    #[test]
    fn transfer_gap_within_twice_delta_remaining() {
        let (ug, s) = family(20.0);
        let sq = stay_profile(&ug);
        let t = random_transfers(&ug, 0.7, 1, 0);
        let dev = crate::solve::PlayerPolicy::stationary(vec![1; ug.states()]);
        for k in [0, 5, 15] {
            let gap = transfer_integral_gap(&ug, &sq, &dev, &t, 0, k, s).unwrap();
            assert!(gap.abs() <= 2.0 * 0.7 * ug.remaining(k) + 1e-12);
        }
    }

    #[test]
    fn rate_bounded_budget_can_flip_status_quo() {
        // ‖t‖∞ = B = 10 for the whole horizon outweighs κ = B + 1
        let (ug, s) = family(20.0);
        let sq = stay_profile(&ug);
        let (_, t) = structured_transfers(&ug, &10.0, s).pop().unwrap();
        let out = test_survival(&ug, &sq, &t, 0, s, 1e-9).unwrap();
        assert!(!out.survives);
        assert!(out.gain_at_point > 5.0);
    }
}
