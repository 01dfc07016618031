//! Two-player activation with private switching costs, viewed as bilateral
//! trade: "trade" is joint activation, valuations come from the DP.

use num_traits::{One, Zero};

use super::lp::{self, FeasibilityCertificate, LinearSystem, RowKind, Status};
use super::{
    check_budget, check_epic, game_with_types, BudgetReport, EpicReport, EpicScope, MechError, MechTransfers,
    MechanismSpec, TypeOverride, TypeSpace,
};
use crate::intervene::{DominanceFamily, TransferTable};
use crate::model::{validate_game, GameSpec, PlayerState};
use crate::scalar::{Rational, Scalar};
use crate::solve::{joint_value, social_optimum, PlayerPolicy, PolicyProfile};
use crate::uniformize::{uniformize, UniformizedGame};

/// Two players on `{Active, Sleep}` starting asleep, benefit 1 per unit
/// time each while both are Active, `T = 1`, switching rate `gamma / 2`,
/// and types `L`/`H` setting the Sleep→Active cost to `kappa_l`/`kappa_h`
/// with uniform priors.
pub fn bilateral_preset(
    kappa_l: Rational,
    kappa_h: Rational,
    gamma: &Rational,
) -> Result<(GameSpec<Rational>, TypeSpace<Rational>), MechError> {
    if !(Rational::zero() < kappa_l && kappa_l < kappa_h) {
        return Err(MechError::KappaOrder);
    }
    let family = DominanceFamily::new(1.0, 1.0, gamma.to_f64());
    let (game, _) = family.build::<Rational>().map_err(|e| MechError::OutsideClass(e.to_string()))?;
    let ty = |label: &str, k: &Rational| TypeOverride {
        label: label.into(),
        switch_cost: vec![(PlayerState::Sleep, PlayerState::Active, k.clone())],
        control_cost: Vec::new(),
    };
    let types = (0..2).map(|_| vec![ty("L", &kappa_l), ty("H", &kappa_h)]).collect();
    Ok((game, TypeSpace::uniform(types)?))
}

/// Per type profile: the activation benefit, its switching-cost sum, and
/// whether activation is efficient.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeRow {
    pub profile: Vec<usize>,
    /// Gross benefit (switching costs excluded) of activating at time zero
    /// rather than waiting a stage, both followed by the optimal
    /// continuation.
    pub social_benefit: Rational,
    /// Extra expected switching costs of activating at time zero.
    pub cost_sum: Rational,
    /// `social_benefit > cost_sum`.
    pub efficient: bool,
    /// `W*(0, s0)` of the social optimum.
    pub welfare: Rational,
    /// Whether the social optimum leaves the initial state at time zero;
    /// `None` for instances built from static numbers.
    pub optimum_activates: Option<bool>,
}

/// The reduced instance the impossibility LP is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct BilateralInstance {
    pub labels: Vec<Vec<String>>,
    pub prior: Vec<Vec<Rational>>,
    pub rows: Vec<TradeRow>,
    /// `payoff[i][a][m]`: player `i` with true type `a` under the
    /// allocation chosen for report profile `m`.
    pub payoff: Vec<Vec<Vec<Rational>>>,
    /// `outside[i][a]`: payoff under the status quo (nobody switches).
    pub outside: Vec<Vec<Rational>>,
    /// `occupancy[m][s]`: expected time in state `s` under allocation `m`.
    pub occupancy: Vec<Vec<Rational>>,
    /// Efficient allocation per report profile (empty for static instances).
    pub allocation: Vec<PolicyProfile>,
}

impl BilateralInstance {
    fn types(&self, i: usize) -> usize {
        self.labels[i].len()
    }

    fn profiles(&self) -> usize {
        self.labels.iter().map(Vec::len).product()
    }

    fn decode(&self, code: usize) -> [usize; 2] {
        [code / self.types(1), code % self.types(1)]
    }

    fn encode(&self, p: [usize; 2]) -> usize {
        p[0] * self.types(1) + p[1]
    }

    /// Static bilateral trade: trading pays each player `benefit / 2` minus
    /// its own cost, not trading pays zero. Efficient iff `benefit` exceeds
    /// the cost sum.
    pub fn from_static(benefit: Rational, costs: [Vec<Rational>; 2], prior: [Vec<Rational>; 2]) -> Self {
        let labels: Vec<Vec<String>> = costs.iter().map(|c| (0..c.len()).map(|t| format!("k{t}")).collect()).collect();
        let half = &benefit / Rational::from_integer(2.into());
        let mut inst = BilateralInstance {
            labels,
            prior: prior.to_vec(),
            rows: Vec::new(),
            payoff: Vec::new(),
            outside: costs.iter().map(|c| vec![Rational::zero(); c.len()]).collect(),
            occupancy: Vec::new(),
            allocation: Vec::new(),
        };
        for code in 0..inst.profiles() {
            let p = inst.decode(code);
            let cost_sum = &costs[0][p[0]] + &costs[1][p[1]];
            let efficient = benefit > cost_sum;
            let welfare = if efficient { &benefit - &cost_sum } else { Rational::zero() };
            inst.rows.push(TradeRow {
                profile: p.to_vec(),
                social_benefit: benefit.clone(),
                cost_sum,
                efficient,
                welfare,
                optimum_activates: None,
            });
            inst.occupancy.push(vec![Rational::one()]);
        }
        inst.payoff = (0..2)
            .map(|i| {
                (0..costs[i].len())
                    .map(|a| {
                        (0..inst.profiles())
                            .map(|m| if inst.rows[m].efficient { &half - &costs[i][a] } else { Rational::zero() })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        inst
    }
}

fn check_class(base: &GameSpec<Rational>, ts: &TypeSpace<Rational>) -> Result<(), MechError> {
    if base.players() != 2 || ts.players() != 2 {
        return Err(MechError::OutsideClass(format!("{} players", base.players())));
    }
    for i in 0..2 {
        let mut allowed = base.space.allowed(i).to_vec();
        allowed.sort();
        if allowed != [PlayerState::Active, PlayerState::Sleep] {
            return Err(MechError::OutsideClass(format!("player {i} states {allowed:?}")));
        }
    }
    Ok(())
}

fn typed(base: &GameSpec<Rational>, ts: &TypeSpace<Rational>, code: usize, gamma: &Rational) -> Result<UniformizedGame<Rational>, MechError> {
    let game = validate_game(game_with_types(base, ts, &ts.decode(code))?)?;
    Ok(uniformize(&game, gamma.clone())?)
}

/// `sigma` with its stage-0 controls at the initial state replaced by `u`.
fn first_move(ug: &UniformizedGame<Rational>, sigma: &PolicyProfile, u: usize) -> PolicyProfile {
    let (stages, states, s0) = (ug.stages, ug.states(), ug.initial());
    let players = (0..ug.players())
        .map(|i| {
            let choice = (0..stages)
                .flat_map(|k| (0..states).map(move |s| (k, s)))
                .map(|(k, s)| if k == 0 && s == s0 { ug.controls().control(u, i) } else { sigma.control(i, k, s) })
                .collect();
            PlayerPolicy::staged(choice)
        })
        .collect();
    PolicyProfile::new(stages, states, players)
}

/// The first decision at `(0, s0)` as a trade: the best joint control that
/// leaves the null profile against the null profile itself, both followed
/// by the optimal continuation `welfare[1 * states + t]`. Ties go to no
/// trade, as in the planner.
fn first_decision(ug: &UniformizedGame<Rational>, sigma: &PolicyProfile, welfare: &[Rational]) -> (PolicyProfile, PolicyProfile) {
    let s0 = ug.initial();
    let states = ug.states();
    let q = |u: usize| {
        let mut v = Rational::zero();
        for i in 0..ug.players() {
            v += ug.reward(0, s0, u, i) - ug.jump_cost(s0, u, i);
        }
        for (t, p) in ug.row(s0, u) {
            v += p * &welfare[states + *t];
        }
        v
    };
    let mut best: Option<(usize, Rational)> = None;
    for u in 1..ug.profiles() {
        let v = q(u);
        if best.as_ref().map_or(true, |(_, b)| v > *b) {
            best = Some((u, v));
        }
    }
    let trade = best.map_or(0, |(u, _)| u);
    (first_move(ug, sigma, trade), first_move(ug, sigma, 0))
}

/// Reduces the first activation decision to bilateral trade. Valuations are
/// exact DP values; the allocation for each report profile is the social
/// optimum under those reports.
pub fn ms_embedding(base: &GameSpec<Rational>, ts: &TypeSpace<Rational>, gamma: &Rational) -> Result<BilateralInstance, MechError> {
    check_class(base, ts)?;
    let p = ts.profiles();
    let mut games = Vec::with_capacity(p);
    let mut allocation = Vec::with_capacity(p);
    let mut rows = Vec::with_capacity(p);
    for code in 0..p {
        let ug = typed(base, ts, code, gamma)?;
        let (sigma, welfare) = social_optimum(&ug);
        let s0 = ug.initial();
        let game = game_with_types(base, ts, &ts.decode(code))?;
        let (trade, no_trade) = first_decision(&ug, &sigma, &welfare);
        let mut free = game.clone();
        for i in 0..2 {
            for from in [PlayerState::Active, PlayerState::Sleep] {
                for to in [PlayerState::Active, PlayerState::Sleep] {
                    if from != to {
                        free.set_switch_cost(i, from, to, Rational::zero())?;
                    }
                }
            }
        }
        let ug_free = uniformize(&validate_game(free)?, gamma.clone())?;
        let net = |plan: &PolicyProfile| joint_value(&ug, plan).map(|v| v.total(0, s0));
        let gross = |plan: &PolicyProfile| joint_value(&ug_free, plan).map(|v| v.total(0, s0));
        let social_benefit = gross(&trade)? - gross(&no_trade)?;
        let cost_sum = &social_benefit - (net(&trade)? - net(&no_trade)?);
        let leaves = sigma.joint(ug.controls(), 0, s0) != 0;
        rows.push(TradeRow {
            profile: ts.decode(code),
            efficient: social_benefit > cost_sum,
            social_benefit,
            cost_sum,
            welfare: welfare[s0].clone(),
            optimum_activates: Some(leaves),
        });
        allocation.push(sigma);
        games.push(ug);
    }
    // vals[truth][m][i] at (0, s0)
    let mut vals = Vec::with_capacity(p);
    for ug in &games {
        let s0 = ug.initial();
        let row = allocation
            .iter()
            .map(|a| joint_value(ug, a).map(|v| [v.get(0, 0, s0).clone(), v.get(1, 0, s0).clone()]))
            .collect::<Result<Vec<_>, _>>()?;
        vals.push(row);
    }
    let payoff = (0..2)
        .map(|i| (0..ts.count(i)).map(|a| (0..p).map(|m| vals[ts.replace(m, i, a)][m][i].clone()).collect()).collect())
        .collect();
    let mut outside = Vec::new();
    for i in 0..2 {
        let mut row = Vec::new();
        for a in 0..ts.count(i) {
            let ug = &games[ts.replace(0, i, a)];
            let null = PolicyProfile::constant(&[0, 0], ug.stages, ug.states());
            row.push(joint_value(ug, &null)?.get(i, 0, ug.initial()).clone());
        }
        outside.push(row);
    }
    let mut occupancy = Vec::with_capacity(p);
    for (m, a) in allocation.iter().enumerate() {
        let ug = &games[m];
        let mut row = Vec::with_capacity(ug.states());
        for s in 0..ug.states() {
            let indicator = TransferTable::from_fn(ug, |_, x, _, i| if x == s && i == 0 { Rational::one() } else { Rational::zero() });
            let only = ug.transfers_only(indicator)?;
            row.push(joint_value(&only, a)?.get(0, 0, ug.initial()).clone());
        }
        occupancy.push(row);
    }
    Ok(BilateralInstance {
        labels: (0..2).map(|i| ts.types(i).iter().map(|t| t.label.clone()).collect()).collect(),
        prior: (0..2).map(|i| ts.prior(i).to_vec()).collect(),
        rows,
        payoff,
        outside,
        occupancy,
        allocation,
    })
}

/// Which transfer variables the LP may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKeys {
    /// One time-zero lump per player and report profile.
    Initial,
    /// A flow rate per player, report profile and state; its value is the
    /// occupancy-weighted sum.
    StateFlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpOptions {
    /// Interim individual rationality against the status quo.
    pub participation: bool,
    pub keys: TransferKeys,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { participation: true, keys: TransferKeys::Initial }
    }
}

/// Efficiency (allocation fixed to the efficient rule), EPIC and ex post
/// budget balance, plus optional interim participation, as an exact
/// feasibility problem over history-private transfers.
pub fn impossibility_lp(inst: &BilateralInstance, opts: LpOptions) -> FeasibilityCertificate {
    let p = inst.profiles();
    let states = inst.occupancy.first().map_or(1, Vec::len);
    let per = match opts.keys {
        TransferKeys::Initial => 1,
        TransferKeys::StateFlow => states,
    };
    let var = |i: usize, m: usize, s: usize| (i * p + m) * per + s;
    let mut names = Vec::with_capacity(2 * p * per);
    for i in 0..2 {
        for m in 0..p {
            let [a, b] = inst.decode(m);
            let tag = format!("{},{}", inst.labels[0][a], inst.labels[1][b]);
            for s in 0..per {
                names.push(match opts.keys {
                    TransferKeys::Initial => format!("t{i}({tag})"),
                    TransferKeys::StateFlow => format!("t{i}({tag};s{s})"),
                });
            }
        }
    }
    let width = names.len();
    let mut sys = LinearSystem::new(names);
    // linear form of the transfer value to i under report m
    let pay = |coeffs: &mut Vec<Rational>, i: usize, m: usize, scale: &Rational| {
        for s in 0..per {
            let w = match opts.keys {
                TransferKeys::Initial => Rational::one(),
                TransferKeys::StateFlow => inst.occupancy[m][s].clone(),
            };
            coeffs[var(i, m, s)] += scale * w;
        }
    };
    let one = Rational::one();
    for i in 0..2 {
        for truth in 0..p {
            let own = inst.decode(truth)[i];
            for alt in (0..inst.types(i)).filter(|&a| a != own) {
                let mut rep = inst.decode(truth);
                rep[i] = alt;
                let m = inst.encode(rep);
                // J(θ_i, m) + pay(m) <= J(θ_i, θ) + pay(θ)
                let mut coeffs = vec![Rational::zero(); width];
                pay(&mut coeffs, i, m, &one);
                pay(&mut coeffs, i, truth, &-one.clone());
                let rhs = &inst.payoff[i][own][truth] - &inst.payoff[i][own][m];
                let label = format!("EPIC p{i} truth {} report {}", inst.labels[i][own], inst.labels[i][alt]);
                sys.push_le(format!("{label} at {}", profile_tag(inst, truth)), RowKind::Epic, coeffs, rhs);
            }
        }
    }
    for m in 0..p {
        for s in 0..per {
            let mut coeffs = vec![Rational::zero(); width];
            for i in 0..2 {
                coeffs[var(i, m, s)] = one.clone();
            }
            let label = match opts.keys {
                TransferKeys::Initial => format!("BB {}", profile_tag(inst, m)),
                TransferKeys::StateFlow => format!("BB {} s{s}", profile_tag(inst, m)),
            };
            sys.push_eq(label, RowKind::Budget, coeffs, Rational::zero());
        }
    }
    if opts.participation {
        for i in 0..2 {
            let j = 1 - i;
            for a in 0..inst.types(i) {
                // -Σ p(θ_j) pay_i(θ) <= Σ p(θ_j) J_i(a, θ) - outside
                let mut coeffs = vec![Rational::zero(); width];
                let mut rhs = -inst.outside[i][a].clone();
                for b in 0..inst.types(j) {
                    let mut prof = [0; 2];
                    prof[i] = a;
                    prof[j] = b;
                    let m = inst.encode(prof);
                    let w = inst.prior[j][b].clone();
                    pay(&mut coeffs, i, m, &-w.clone());
                    rhs += &w * &inst.payoff[i][a][m];
                }
                sys.push_le(format!("IR p{i} type {}", inst.labels[i][a]), RowKind::Participation, coeffs, rhs);
            }
        }
    }
    lp::solve(sys)
}

fn profile_tag(inst: &BilateralInstance, code: usize) -> String {
    let [a, b] = inst.decode(code);
    format!("({},{})", inst.labels[0][a], inst.labels[1][b])
}

/// Turns a feasible LP point into a mechanism (time-zero lumps equal to
/// each player's transfer value) and audits it with the full DP.
pub fn verify_feasible(
    base: &GameSpec<Rational>,
    ts: &TypeSpace<Rational>,
    gamma: &Rational,
    inst: &BilateralInstance,
    cert: &FeasibilityCertificate,
) -> Result<Option<(EpicReport<Rational>, BudgetReport<Rational>)>, MechError> {
    let Status::Feasible(x) = &cert.status else { return Ok(None) };
    let p = inst.profiles();
    let per = x.len() / (2 * p);
    let lumps = (0..p)
        .map(|m| {
            (0..2)
                .map(|i| {
                    (0..per).fold(Rational::zero(), |acc, s| {
                        let w = if per == 1 { Rational::one() } else { inst.occupancy[m][s].clone() };
                        acc + w * &x[(i * p + m) * per + s]
                    })
                })
                .collect()
        })
        .collect();
    let mech = MechanismSpec::new(ts, inst.allocation.clone(), MechTransfers::Initial(lumps))?;
    let epic = check_epic(base, ts, &mech, gamma, EpicScope::Initial, &Rational::zero())?;
    Ok(Some((epic, check_budget(&mech))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn static_predicate_arithmetic() {
        // benefit 2T with T = 1
        let inst = BilateralInstance::from_static(
            rat(2, 1),
            [vec![rat(1, 5), rat(3, 2)], vec![rat(1, 5), rat(3, 2)]],
            [vec![rat(1, 2), rat(1, 2)], vec![rat(1, 2), rat(1, 2)]],
        );
        let eff: Vec<bool> = inst.rows.iter().map(|r| r.efficient).collect();
        assert_eq!(eff, vec![true, true, true, false]);
        assert_eq!(inst.rows[3].cost_sum, rat(3, 1));
    }

    #[test]
    fn always_efficient_static_instance_is_feasible_at_zero() {
        let inst = BilateralInstance::from_static(
            rat(2, 1),
            [vec![rat(1, 10), rat(1, 5)], vec![rat(1, 10), rat(1, 5)]],
            [vec![rat(1, 2), rat(1, 2)], vec![rat(1, 2), rat(1, 2)]],
        );
        let c = impossibility_lp(&inst, LpOptions::default());
        assert!(c.verify());
        match &c.status {
            Status::Feasible(x) => assert!(x.iter().all(Zero::is_zero)),
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn classic_conflict_is_infeasible_with_participation() {
        // trade efficient unless both costs are high; the low type's gain
        // from mimicking cannot be financed under budget balance and IR
        let inst = BilateralInstance::from_static(
            rat(2, 1),
            [vec![rat(1, 5), rat(3, 2)], vec![rat(1, 5), rat(3, 2)]],
            [vec![rat(1, 2), rat(1, 2)], vec![rat(1, 2), rat(1, 2)]],
        );
        let c = impossibility_lp(&inst, LpOptions::default());
        assert!(c.verify());
        assert!(!c.is_feasible());
    }

    #[test]
    fn embedding_matches_optimum_on_preset() {
        let gamma = rat(8, 1);
        let (g, ts) = bilateral_preset(rat(1, 5), rat(3, 2), &gamma).unwrap();
        let inst = ms_embedding(&g, &ts, &gamma).unwrap();
        for r in &inst.rows {
            assert_eq!(Some(r.efficient), r.optimum_activates, "{r:?}");
        }
        assert!(inst.rows[0].efficient);
        assert!(!inst.rows[3].efficient);
        assert_eq!(inst.outside, vec![vec![rat(0, 1); 2]; 2]);
    }

    #[test]
    fn kappa_order_enforced() {
        assert_eq!(bilateral_preset(rat(2, 1), rat(1, 1), &rat(8, 1)).unwrap_err(), MechError::KappaOrder);
    }
}
