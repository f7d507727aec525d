//! Theta ghosts: weight-17/2 almost cusp forms for `(Z/2mZ, x²/4m)` whose
//! windowed coefficients are nonnegative integers, symmetric, even on the
//! 2-torsion classes and normalised by `Ψ(0, 0) = 1`. Every theta series of
//! a lattice in the genus of `2E8 ⊕ ⟨2m⟩` is one, which turns the minimum of
//! a boundary coefficient over ghosts into a lower bound over all cusps.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{big, fmt_rat, hermite_normal_form, int, rat, IntMatrix, Rational};
use crate::heegner::DivisorClass;
use crate::jacobi::{stabilized_functional_basis, Flavor, Functional, FunctionalBasis, JacobiError, Target};
use crate::lattice::{cusp_strata, CuspStratum};
use crate::optimize::{ilp_enumerate, ilp_minimize, lp_solve_verified, IlpOptions, LpProblem, OptError, Relation, Sense, Status};
use crate::par;

#[derive(Debug, thiserror::Error)]
pub enum GhostError {
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error("ghost polytope is unbounded at window {0}; enlarge the window")]
    Unbounded(String),
    #[error("ghost count did not stabilise up to window {0}")]
    NoStability(String),
    #[error("ghost polytope is empty")]
    Empty,
    #[error("relation needs coefficient {0} beyond the ghost window")]
    Window(String),
}

/// Parametrisation of the ambient weight-17/2 space by the values at its free
/// functionals, restricted to the integral coordinate lattice.
#[derive(Clone, Debug)]
pub struct GhostSpace {
    pub m: u64,
    pub basis: FunctionalBasis,
    /// Rows span `{x ∈ Z^r : every windowed coefficient (halved on the 2-torsion
    /// classes at positive exponent) is an integer}`.
    pub lattice: IntMatrix,
    /// Windowed functionals carrying the nonnegativity constraints.
    pub constraints: Vec<Functional>,
}

fn is_two_torsion(m: u64, gamma: u64) -> bool {
    gamma == 0 || gamma == m
}

/// Rows that must take integral values: each windowed coefficient, and half of
/// it on the 2-torsion classes at positive exponent.
fn integrality_rows(basis: &FunctionalBasis) -> Vec<Vec<Rational>> {
    let mut rows = Vec::new();
    for (f, dep) in &basis.dependencies {
        let v: Vec<Rational> = dep.iter().map(|x| x.0.clone()).collect();
        if is_two_torsion(basis.m, f.gamma) && f.exponent.is_positive() {
            rows.push(v.iter().map(|x| x * rat(1, 2)).collect());
        } else {
            rows.push(v);
        }
    }
    rows
}

/// Basis of `{x ∈ Z^r : a·x ∈ Z for every row a}`, refined one row at a time:
/// with current basis `b_i` and `a·b_i = n_i/L`, the admissible combinations are
/// the `c` with `Σ c_i n_i ≡ 0 (mod L)`, read off the Hermite form of
/// `[(n_i, e_i); (L, 0)]`.
pub fn integral_lattice(rows: &[Vec<Rational>], r: usize) -> IntMatrix {
    let mut basis: IntMatrix =
        (0..r).map(|i| (0..r).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect();
    for a in rows {
        let vals: Vec<Rational> =
            basis.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * big(y)).sum::<Rational>()).collect();
        if vals.iter().all(|v| v.is_integer()) {
            continue;
        }
        let l = vals.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let mut m: IntMatrix = vals
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut row = vec![(v * big(&l)).to_integer().mod_floor(&l)];
                row.extend((0..r).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
                row
            })
            .collect();
        let mut last = vec![l.clone()];
        last.extend((0..r).map(|_| BigInt::zero()));
        m.push(last);
        let h = hermite_normal_form(&m);
        let c: IntMatrix = h[1..].iter().map(|row| row[1..].to_vec()).collect();
        basis = c
            .iter()
            .map(|ci| (0..r).map(|j| ci.iter().zip(&basis).map(|(x, b)| x * &b[j]).sum()).collect())
            .collect();
    }
    hermite_normal_form(&basis)
}

pub fn ghost_space(m: u64, window: &Rational, max_pole_order: u32) -> Result<GhostSpace, GhostError> {
    let basis = stabilized_functional_basis(Target::Theta, m, Flavor::SingZeroBar, window, max_pole_order)?;
    let lattice = integral_lattice(&integrality_rows(&basis), basis.dim());
    let constraints = basis.functionals().cloned().collect();
    Ok(GhostSpace { m, basis, lattice, constraints })
}

impl GhostSpace {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Row vector of functional `f` in lattice coordinates `y`.
    pub fn functional_in_y(&self, f: &Functional) -> Result<Vec<Rational>, GhostError> {
        let dep = self.basis.coordinates(f)?;
        Ok(self.lattice.iter().map(|b| dep.iter().zip(b).map(|(x, y)| x * big(y)).sum()).collect())
    }

    /// Value of functional `f`, treating the dropped isotropic constant terms as 0.
    fn value_row(&self, gamma: u64, e: &Rational) -> Result<Option<Vec<Rational>>, GhostError> {
        let f = Functional::new(gamma, e.clone());
        if e.is_zero() && gamma != 0 && (gamma * gamma) % (4 * self.m) == 0 {
            return Ok(None);
        }
        if e > &self.basis.window {
            return Err(GhostError::Window(f.to_string()));
        }
        Ok(Some(self.functional_in_y(&f)?))
    }

    /// Ghost polytope over integer `y`: windowed nonnegativity and `Ψ(0, 0) = 1`.
    pub fn polytope(&self, sense: Sense, objective: Vec<Rational>) -> Result<LpProblem, GhostError> {
        let n = self.lattice.len();
        let mut p = LpProblem::new(sense, objective);
        for j in 0..n {
            p.set_bounds(j, None, None);
        }
        for f in &self.constraints {
            let row = self.functional_in_y(f)?;
            if f.gamma == 0 && f.exponent.is_zero() {
                p.add(row, Relation::Eq, Rational::one());
            } else {
                p.add(row, Relation::Ge, Rational::zero());
            }
        }
        Ok(p.all_integer())
    }

    /// Lattice coordinates of the form with the given coefficients, if it lies on the integral lattice.
    pub fn coordinates_of(&self, value: impl Fn(&Functional) -> Rational) -> Option<Vec<Rational>> {
        let x: Vec<Rational> = self.basis.free.iter().map(value).collect();
        // solve yᵀ·B = x with B in row Hermite form (upper triangular, full rank)
        let n = self.lattice.len();
        let mut y = vec![Rational::zero(); n];
        let mut rest = x;
        let mut col = 0;
        for i in 0..n {
            while self.lattice[i][col].is_zero() {
                col += 1;
            }
            y[i] = &rest[col] / big(&self.lattice[i][col]);
            for j in col..rest.len() {
                let s = &y[i] * big(&self.lattice[i][j]);
                rest[j] -= s;
            }
        }
        (rest.iter().all(|v| v.is_zero()) && y.iter().all(|v| v.is_integer())).then_some(y)
    }

    /// Windowed coefficient table of the ghost with lattice coordinates `y`.
    pub fn coefficients(&self, y: &[Rational]) -> Result<BTreeMap<Functional, Rational>, GhostError> {
        self.constraints
            .iter()
            .map(|f| Ok((f.clone(), self.functional_in_y(f)?.iter().zip(y).map(|(a, b)| a * b).sum())))
            .collect()
    }

    /// Conditions (ii)–(v) on the window for a coefficient table.
    pub fn is_ghost(&self, table: &BTreeMap<Functional, Rational>) -> bool {
        table.iter().all(|(f, v)| {
            let nat = v.is_integer() && !v.is_negative();
            let even = !is_two_torsion(self.m, f.gamma) || f.exponent.is_zero() || (v / int(2)).is_integer();
            let norm = !(f.gamma == 0 && f.exponent.is_zero()) || v.is_one();
            nat && even && norm
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GhostCount {
    pub m: u64,
    #[serde(with = "crate::exact::rat_str")]
    pub window: Rational,
    pub dim: usize,
    pub count: usize,
    /// Counts at each window tried, in order.
    pub history: Vec<(String, usize)>,
}

/// Counts integer points of the ghost polytope at a fixed window.
pub fn ghost_count_at(space: &GhostSpace, cap: usize) -> Result<usize, GhostError> {
    let p = space.polytope(Sense::Min, vec![Rational::zero(); space.lattice.len()])?;
    match ilp_enumerate(&p, cap) {
        Ok(pts) => Ok(pts.len()),
        Err(OptError::Unbounded) => Err(GhostError::Unbounded(fmt_rat(&space.basis.window))),
        Err(e) => Err(e.into()),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GhostOptions {
    pub start_window: u32,
    pub max_window: u32,
    /// Escalations without change required before a count is accepted.
    pub stable_steps: usize,
    pub cap: usize,
    pub max_pole_order: u32,
    pub node_budget: usize,
}

impl Default for GhostOptions {
    fn default() -> Self {
        GhostOptions { start_window: 1, max_window: 8, stable_steps: 2, cap: 1_000_000, max_pole_order: 14, node_budget: 20_000 }
    }
}

/// Escalates the window by 1 until the count is unchanged for `stable_steps` escalations.
/// Windows where the polytope is still unbounded are skipped.
pub fn ghost_count(m: u64, opts: GhostOptions) -> Result<GhostCount, GhostError> {
    let mut history: Vec<(String, usize)> = Vec::new();
    let mut same = 0;
    for w in opts.start_window..=opts.max_window {
        let window = int(w as i64);
        let space = ghost_space(m, &window, opts.max_pole_order)?;
        let c = match ghost_count_at(&space, opts.cap) {
            Ok(c) => c,
            Err(GhostError::Unbounded(_)) => continue,
            Err(e) => return Err(e),
        };
        if history.last().is_some_and(|(_, prev)| *prev == c) {
            same += 1;
        } else {
            same = 0;
        }
        history.push((fmt_rat(&window), c));
        if same >= opts.stable_steps {
            return Ok(GhostCount { m, window, dim: space.dim(), count: c, history });
        }
    }
    Err(GhostError::NoStability(opts.max_window.to_string()))
}

/// Objective of the boundary coefficient in lattice coordinates:
/// `Σ a·(N/24)·Σ_k e2_k·Ψ(p(γ), |n| − k)`.
pub fn boundary_objective(rel: &DivisorClass, stratum: &CuspStratum, space: &GhostSpace) -> Result<Vec<Rational>, GhostError> {
    let n = space.lattice.len();
    let mut obj = vec![Rational::zero(); n];
    let two_m = 2 * space.m as i64;
    let maxe = rel.terms.keys().map(|k| k.n.abs()).max().unwrap_or_else(Rational::zero);
    let e2 = crate::classical::e2(maxe.floor().to_integer().to_usize().unwrap_or(0) + 1);
    for (idx, a) in &rel.terms {
        let Some(x) = stratum.p(idx.gamma as i64) else { continue };
        let x = x as i64;
        let rep = x.min(two_m - x) as u64;
        let e = idx.n.abs();
        for (k, c) in e2.terms() {
            let ek = &e - int(k);
            if ek.is_negative() {
                break;
            }
            if let Some(row) = space.value_row(rep, &ek)? {
                for (o, r) in obj.iter_mut().zip(row) {
                    *o += a * c * r;
                }
            }
        }
    }
    let scale = rat(stratum.n as i64, 24);
    Ok(obj.into_iter().map(|o| o * &scale).collect())
}

/// Lower bound for a boundary coefficient over all ghosts of one stratum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GhostBound {
    pub n: u64,
    pub m: u64,
    #[serde(with = "crate::exact::rat_str")]
    pub window: Rational,
    /// Minimum of the LP relaxation (always a valid lower bound).
    #[serde(with = "crate::exact::rat_str")]
    pub relaxation: Rational,
    /// Exact integer minimum, when branch and bound finished within budget.
    #[serde(with = "crate::exact::rat_str::opt")]
    pub integer_min: Option<Rational>,
    /// Best proven bound: the integer minimum, else the best node bound.
    #[serde(with = "crate::exact::rat_str")]
    pub bound: Rational,
    pub budget_exhausted: bool,
}

pub fn ghost_min_order(rel: &DivisorClass, stratum: &CuspStratum, space: &GhostSpace, node_budget: usize) -> Result<GhostBound, GhostError> {
    let obj = boundary_objective(rel, stratum, space)?;
    let p = space.polytope(Sense::Min, obj)?;
    let mut relaxed = p.clone();
    relaxed.integer = vec![false; relaxed.num_vars()];
    let lp = lp_solve_verified(&relaxed)?;
    let relaxation = match lp.status {
        Status::Optimal => lp.value.clone().unwrap(),
        Status::Unbounded => return Err(GhostError::Unbounded(fmt_rat(&space.basis.window))),
        Status::Infeasible => return Err(GhostError::Empty),
    };
    if node_budget == 0 {
        return Ok(GhostBound {
            n: stratum.n,
            m: stratum.m,
            window: space.basis.window.clone(),
            bound: relaxation.clone(),
            relaxation,
            integer_min: None,
            budget_exhausted: false,
        });
    }
    let (integer_min, bound, exhausted) = match ilp_minimize(&p, IlpOptions { node_budget }) {
        Ok(r) if r.status == Status::Optimal => {
            let v = r.value.unwrap();
            (Some(v.clone()), v, false)
        }
        Ok(_) => (None, relaxation.clone(), false),
        Err(OptError::NodeBudget { best_bound, .. }) => {
            let b = best_bound.map(|b| b.0).unwrap_or_else(|| relaxation.clone());
            (None, b.max(relaxation.clone()), true)
        }
        Err(e) => return Err(e.into()),
    };
    Ok(GhostBound { n: stratum.n, m: stratum.m, window: space.basis.window.clone(), relaxation, integer_min, bound, budget_exhausted: exhausted })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cuspidality {
    CuspFormProved,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuspidalityVerdict {
    pub d: u64,
    pub verdict: Cuspidality,
    #[serde(with = "crate::exact::rat_str")]
    pub global_bound: Rational,
    pub per_stratum: Vec<GhostBound>,
}

/// Default window for a relation: 2 more than its largest `|n|`, rounded up.
pub fn default_window(rel: &DivisorClass) -> Rational {
    let maxe = rel.terms.keys().map(|k| k.n.abs()).max().unwrap_or_else(Rational::zero);
    maxe.ceil() + int(2)
}

/// Minimum over all strata of the ghost lower bounds; positive means every
/// 1-cusp has vanishing order at least that bound. Never a negative verdict.
/// Branch and bound runs only on strata whose LP relaxation bound is not positive.
pub fn cuspidality_verdict(rel: &DivisorClass, d: u64, window: &Rational, opts: GhostOptions) -> Result<CuspidalityVerdict, GhostError> {
    let strata = cusp_strata(d);
    let results: Vec<Result<GhostBound, GhostError>> = par::map(&strata, |s| {
        let space = ghost_space(s.m, window, opts.max_pole_order)?;
        let relaxed = ghost_min_order(rel, s, &space, 0)?;
        if relaxed.bound.is_positive() {
            return Ok(relaxed);
        }
        ghost_min_order(rel, s, &space, opts.node_budget)
    });
    let per: Vec<GhostBound> = results.into_iter().collect::<Result<_, _>>()?;
    let global = per.iter().map(|b| b.bound.clone()).min().unwrap_or_else(Rational::zero);
    let verdict = if global.is_positive() { Cuspidality::CuspFormProved } else { Cuspidality::Inconclusive };
    Ok(CuspidalityVerdict { d, verdict, global_bound: global, per_stratum: per })
}

/// Pairings of the theta series of `g` with every weight-17/2 relation at pole
/// order `pole_order`; all zero when the Jacobi engine and the enumerator agree.
pub fn theta_oracle(g: &crate::lattice::GramLattice, m: u64, pole_order: u32, flavor: Flavor) -> Result<Vec<Rational>, GhostError> {
    let th = crate::lattice::theta_series(g, &int(pole_order as i64 + 1))?;
    let rs = crate::jacobi::obstruction_space(Target::Theta, m, pole_order, flavor)?;
    Ok(rs.pairings(|f| th.coeff(f.gamma as i64, &f.exponent)))
}

/// Ghost conditions on the window for an actual theta series, plus membership
/// of its coordinates in the integral lattice.
pub fn theta_is_ghost(space: &GhostSpace, g: &crate::lattice::GramLattice) -> Result<bool, GhostError> {
    let th = crate::lattice::theta_series(g, &(space.basis.window.floor() + int(1)))?;
    let Some(y) = space.coordinates_of(|f| th.coeff(f.gamma as i64, &f.exponent)) else { return Ok(false) };
    let table = space.coefficients(&y)?;
    let agrees = table.iter().all(|(f, v)| *v == th.coeff(f.gamma as i64, &f.exponent));
    Ok(agrees && space.is_ghost(&table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_refinement() {
        // x/2 + y/3 ∈ Z and x ∈ Z, y ∈ Z
        let rows = vec![vec![rat(1, 2), rat(1, 3)]];
        let b = integral_lattice(&rows, 2);
        for row in &b {
            let v = rat(1, 2) * big(&row[0]) + rat(1, 3) * big(&row[1]);
            assert!(v.is_integer());
        }
        // index 6 in Z²
        let det = &b[0][0] * &b[1][1] - &b[0][1] * &b[1][0];
        assert_eq!(det.abs(), BigInt::from(6));
    }

    #[test]
    fn m1_space_contains_the_e8e8a1_theta() {
        let space = ghost_space(1, &int(2), 10).unwrap();
        let k = crate::lattice::standard_cusp_lattice(1);
        let th = crate::lattice::theta_series(&k, &int(3)).unwrap();
        let y = space.coordinates_of(|f| th.coeff(f.gamma as i64, &f.exponent)).expect("on the lattice");
        let table = space.coefficients(&y).unwrap();
        assert!(space.is_ghost(&table));
        for (f, v) in &table {
            assert_eq!(*v, th.coeff(f.gamma as i64, &f.exponent), "{f}");
        }
    }

    fn hodge_d1() -> DivisorClass {
        use crate::heegner::HeegnerIndex;
        let mut r = DivisorClass::new();
        r.add(HeegnerIndex::zero(), int(150));
        r.add(HeegnerIndex::new(1, 0, int(-1)).unwrap(), int(1));
        r.add(HeegnerIndex::new(1, 1, rat(-1, 4)).unwrap(), int(56));
        r
    }

    #[test]
    fn d1_hodge_bound_is_positive_and_below_the_true_minimum() {
        let v = cuspidality_verdict(&hodge_d1(), 1, &int(3), GhostOptions::default()).unwrap();
        assert_eq!(v.verdict, Cuspidality::CuspFormProved);
        assert!(v.global_bound.is_positive() && v.global_bound <= int(18), "{}", v.global_bound);
    }

    #[test]
    fn trivial_relations() {
        let s = cusp_strata(1).remove(0);
        let space = ghost_space(1, &int(2), 10).unwrap();
        let zero = ghost_min_order(&DivisorClass::new(), &s, &space, 100).unwrap();
        assert_eq!(zero.bound, int(0));
        let r = DivisorClass::single(crate::heegner::HeegnerIndex::zero(), int(24));
        assert_eq!(ghost_min_order(&r, &s, &space, 100).unwrap().bound, int(1));
        let v = cuspidality_verdict(&DivisorClass::new(), 1, &int(2), GhostOptions::default()).unwrap();
        assert_eq!(v.verdict, Cuspidality::Inconclusive);
    }
}
