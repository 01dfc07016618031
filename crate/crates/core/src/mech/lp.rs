//! Exact feasibility of `G x <= h` over free rational `x`, with a
//! certificate either way.
//!
//! Feasibility is decided by a phase-one simplex (Bland's rule, so it
//! terminates) on `[G, -G, I] z = h, z >= 0`. When that fails, a second
//! phase-one run finds `y >= 0` with `Gᵀy = 0` and `hᵀy = -1`, which by
//! Farkas' lemma must exist; summing the rows with weights `y` gives the
//! contradiction `0 <= -1`.

use num_traits::{One, Signed, Zero};

use crate::scalar::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Epic,
    Budget,
    Participation,
}

impl RowKind {
    pub fn tag(self) -> &'static str {
        match self {
            RowKind::Epic => "EPIC",
            RowKind::Budget => "BB",
            RowKind::Participation => "IR",
        }
    }
}

/// `coeffs · x <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub kind: RowKind,
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearSystem {
    pub variables: Vec<String>,
    pub rows: Vec<Constraint>,
}

impl LinearSystem {
    pub fn new(variables: Vec<String>) -> Self {
        LinearSystem { variables, rows: Vec::new() }
    }

    pub fn push_le(&mut self, label: String, kind: RowKind, coeffs: Vec<Rational>, rhs: Rational) {
        debug_assert_eq!(coeffs.len(), self.variables.len());
        self.rows.push(Constraint { label, kind, coeffs, rhs });
    }

    /// Adds `coeffs · x = rhs` as a pair of `<=` rows.
    pub fn push_eq(&mut self, label: String, kind: RowKind, coeffs: Vec<Rational>, rhs: Rational) {
        let neg: Vec<Rational> = coeffs.iter().map(|c| -c).collect();
        self.push_le(format!("{label} (<=)"), kind, coeffs, rhs.clone());
        self.push_le(format!("{label} (>=)"), kind, neg, -rhs);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    /// A point satisfying every row.
    Feasible(Vec<Rational>),
    /// Nonnegative row multipliers `y` with `Gᵀy = 0`, `hᵀy = -1`.
    Infeasible(Vec<Rational>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCertificate {
    pub system: LinearSystem,
    pub status: Status,
}

impl FeasibilityCertificate {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, Status::Feasible(_))
    }

    /// Re-checks the certificate against the system in exact arithmetic.
    pub fn verify(&self) -> bool {
        let sys = &self.system;
        match &self.status {
            Status::Feasible(x) => {
                x.len() == sys.variables.len()
                    && sys.rows.iter().all(|r| dot(&r.coeffs, x) <= r.rhs)
            }
            Status::Infeasible(y) => {
                if y.len() != sys.rows.len() || y.iter().any(Signed::is_negative) {
                    return false;
                }
                let combined_rhs = sys.rows.iter().zip(y).fold(Rational::zero(), |a, (r, w)| a + &r.rhs * w);
                let columns_vanish = (0..sys.variables.len())
                    .all(|j| sys.rows.iter().zip(y).fold(Rational::zero(), |a, (r, w)| a + &r.coeffs[j] * w).is_zero());
                columns_vanish && combined_rhs == -Rational::one()
            }
        }
    }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

/// Decides feasibility of `system` and returns the matching certificate.
pub fn solve(system: LinearSystem) -> FeasibilityCertificate {
    let n = system.variables.len();
    let m = system.rows.len();
    // primal: columns x+ (n), x- (n), slack (m)
    let matrix: Vec<Vec<Rational>> = system
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut v = Vec::with_capacity(2 * n + m);
            v.extend(row.coeffs.iter().cloned());
            v.extend(row.coeffs.iter().map(|c| -c));
            v.extend((0..m).map(|k| if k == r { Rational::one() } else { Rational::zero() }));
            v
        })
        .collect();
    let rhs: Vec<Rational> = system.rows.iter().map(|r| r.rhs.clone()).collect();
    let units: Vec<Option<usize>> = (0..m).map(|r| Some(2 * n + r)).collect();
    if let Some(z) = phase_one(&matrix, &rhs, &units) {
        let x = (0..n).map(|j| &z[j] - &z[n + j]).collect();
        return FeasibilityCertificate { system, status: Status::Feasible(x) };
    }
    // Farkas system over y (m): one equation per variable, plus hᵀy = -1
    let mut dual: Vec<Vec<Rational>> = (0..n).map(|j| system.rows.iter().map(|r| r.coeffs[j].clone()).collect()).collect();
    dual.push(rhs);
    let mut dual_rhs = vec![Rational::zero(); n];
    dual_rhs.push(-Rational::one());
    let y = phase_one(&dual, &dual_rhs, &vec![None; n + 1])
        .expect("Farkas alternative must be feasible when the primal is not");
    FeasibilityCertificate { system, status: Status::Infeasible(y) }
}

/// Finds `z >= 0` with `M z = r`, or `None`. `units[i] = Some(j)` when
/// column `j` is the unit vector `e_i`, letting row `i` start without an
/// artificial variable if `r_i >= 0`.
pub fn phase_one(matrix: &[Vec<Rational>], rhs: &[Rational], units: &[Option<usize>]) -> Option<Vec<Rational>> {
    let m = matrix.len();
    let n = matrix.first().map_or(0, Vec::len);
    let mut basis = vec![0usize; m];
    let mut artificial = Vec::new();
    for i in 0..m {
        match units[i] {
            Some(j) if !rhs[i].is_negative() => basis[i] = j,
            _ => {
                basis[i] = n + artificial.len();
                artificial.push(i);
            }
        }
    }
    let width = n + artificial.len();
    // tableau rows: [columns..., rhs]
    let mut tab: Vec<Vec<Rational>> = (0..m)
        .map(|i| {
            // rows with a unit basis column already have r_i >= 0
            let sign = if rhs[i].is_negative() { -Rational::one() } else { Rational::one() };
            let mut row: Vec<Rational> = matrix[i].iter().map(|v| v * &sign).collect();
            row.extend((0..artificial.len()).map(|a| if artificial[a] == i { Rational::one() } else { Rational::zero() }));
            row.push(&rhs[i] * &sign);
            row
        })
        .collect();
    // cost row for minimizing the sum of artificials, reduced against the basis
    let mut cost = vec![Rational::zero(); width + 1];
    for &i in &artificial {
        for j in 0..=width {
            if j < n || j == width {
                cost[j] -= &tab[i][j];
            }
        }
    }
    loop {
        let Some(enter) = (0..width).find(|&j| cost[j].is_negative()) else { break };
        let mut leave: Option<(usize, Rational)> = None;
        for i in 0..m {
            if tab[i][enter].is_positive() {
                let ratio = &tab[i][width] / &tab[i][enter];
                let better = match &leave {
                    None => true,
                    Some((l, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // the phase-one objective is bounded below by zero
        let (row, _) = leave.expect("phase one cannot be unbounded");
        pivot(&mut tab, &mut cost, row, enter);
        basis[row] = enter;
    }
    if !cost[width].is_zero() {
        return None;
    }
    let mut z = vec![Rational::zero(); n];
    for i in 0..m {
        if basis[i] < n {
            z[basis[i]] = tab[i][width].clone();
        }
    }
    Some(z)
}

fn pivot(tab: &mut [Vec<Rational>], cost: &mut [Rational], row: usize, col: usize) {
    let p = tab[row][col].clone();
    for v in tab[row].iter_mut() {
        *v /= &p;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row || r[col].is_zero() {
            continue;
        }
        let f = r[col].clone();
        for (v, pv) in r.iter_mut().zip(&pivot_row) {
            *v -= &f * pv;
        }
    }
    if !cost[col].is_zero() {
        let f = cost[col].clone();
        for (v, pv) in cost.iter_mut().zip(&pivot_row) {
            *v -= &f * pv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn system(rows: &[(&[i64], i64)]) -> LinearSystem {
        let n = rows[0].0.len();
        let mut s = LinearSystem::new((0..n).map(|j| format!("x{j}")).collect());
        for (k, (a, b)) in rows.iter().enumerate() {
            s.push_le(format!("r{k}"), RowKind::Epic, a.iter().map(|&v| rat(v, 1)).collect(), rat(*b, 1));
        }
        s
    }

    #[test]
    fn origin_feasible_when_rhs_nonnegative() {
        let c = solve(system(&[(&[1, 1], 3), (&[-1, 2], 0)]));
        assert_eq!(c.status, Status::Feasible(vec![rat(0, 1), rat(0, 1)]));
        assert!(c.verify());
    }

    #[test]
    fn needs_pivots_to_find_point() {
        // x >= 2, y >= 1, x + y <= 4
        let c = solve(system(&[(&[-1, 0], -2), (&[0, -1], -1), (&[1, 1], 4)]));
        assert!(c.is_feasible());
        assert!(c.verify());
    }

    #[test]
    fn contradiction_yields_farkas_witness() {
        // x <= 1 and x >= 2
        let c = solve(system(&[(&[1], 1), (&[-1], -2)]));
        match &c.status {
            Status::Infeasible(y) => assert_eq!(y, &vec![rat(1, 1), rat(1, 1)]),
            s => panic!("{s:?}"),
        }
        assert!(c.verify());
    }

    #[test]
    fn equality_pairs_and_fractional_witness() {
        // x + y = 1, x - y = 3, y >= 0 is infeasible (y = -1)
        let mut s = LinearSystem::new(vec!["x".into(), "y".into()]);
        s.push_eq("a".into(), RowKind::Budget, vec![rat(1, 1), rat(1, 1)], rat(1, 1));
        s.push_eq("b".into(), RowKind::Budget, vec![rat(1, 1), rat(-1, 1)], rat(3, 1));
        s.push_le("c".into(), RowKind::Participation, vec![rat(0, 1), rat(-1, 1)], rat(0, 1));
        let c = solve(s);
        assert!(!c.is_feasible());
        assert!(c.verify());
    }

    #[test]
    fn tampered_certificates_fail_verification() {
        let mut c = solve(system(&[(&[1], 1), (&[-1], -2)]));
        c.status = Status::Infeasible(vec![rat(1, 1), rat(2, 1)]);
        assert!(!c.verify());
        c.status = Status::Feasible(vec![rat(5, 1)]);
        assert!(!c.verify());
    }
}
