//! Exact rational linear programming (two-phase dense simplex, Bland's rule)
//! with checkable certificates, branch-and-bound integer minimisation, and
//! exhaustive enumeration of integer points in bounded polytopes.
//!
//! Certificates refer to the *inequality form* of a problem: every user row
//! rewritten as `a·x ≥ b` (or `=`), followed by one row `x_j ≥ l_j` for each
//! finite lower bound and one row `−x_j ≥ −u_j` for each finite upper bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{fmt_rat, Rational};
use crate::par;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OptError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("branch-and-bound node budget {budget} exhausted; best proven lower bound {bound}")]
    NodeBudget { budget: usize, bound: String, best_bound: Option<RatBox> },
    #[error("more than {0} integer points")]
    CapExceeded(usize),
    #[error("relaxation is unbounded")]
    Unbounded,
    #[error("certificate failed verification")]
    Certificate,
}

/// Rational carried inside errors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatBox(pub Rational);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    #[serde(with = "crate::exact::rat_str::vec")]
    pub coeffs: Vec<Rational>,
    pub rel: Relation,
    #[serde(with = "crate::exact::rat_str")]
    pub rhs: Rational,
}

/// Linear (or integer) program over `n` variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpProblem {
    pub sense: Sense,
    #[serde(with = "crate::exact::rat_str::vec")]
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<OptRat>,
    pub upper: Vec<OptRat>,
    pub integer: Vec<bool>,
}

/// Optional rational bound, serialised as `"p/q"` or `null`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OptRat(#[serde(with = "crate::exact::rat_str::opt")] pub Option<Rational>);

impl LpProblem {
    /// Problem with `n` nonnegative continuous variables and no rows.
    pub fn new(sense: Sense, objective: Vec<Rational>) -> Self {
        let n = objective.len();
        LpProblem {
            sense,
            objective,
            constraints: vec![],
            lower: vec![OptRat(Some(Rational::zero())); n],
            upper: vec![OptRat(None); n],
            integer: vec![false; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<Rational>, rel: Relation, rhs: Rational) {
        self.constraints.push(Constraint { coeffs, rel, rhs });
    }

    pub fn set_bounds(&mut self, j: usize, lo: Option<Rational>, hi: Option<Rational>) {
        self.lower[j] = OptRat(lo);
        self.upper[j] = OptRat(hi);
    }

    pub fn all_integer(mut self) -> Self {
        self.integer = vec![true; self.num_vars()];
        self
    }

    fn check(&self) -> Result<(), OptError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.integer.len() != n {
            return Err(OptError::Dimension("bounds or integrality mask".into()));
        }
        if let Some(i) = self.constraints.iter().position(|c| c.coeffs.len() != n) {
            return Err(OptError::Dimension(format!("row {i}")));
        }
        Ok(())
    }

    /// Rows of the inequality form `(a, is_equality, b)`.
    pub fn inequality_form(&self) -> Vec<(Vec<Rational>, bool, Rational)> {
        let n = self.num_vars();
        let mut rows = Vec::new();
        for c in &self.constraints {
            match c.rel {
                Relation::Ge => rows.push((c.coeffs.clone(), false, c.rhs.clone())),
                Relation::Eq => rows.push((c.coeffs.clone(), true, c.rhs.clone())),
                Relation::Le => rows.push((c.coeffs.iter().map(|x| -x).collect(), false, -c.rhs.clone())),
            }
        }
        let unit = |j: usize, s: i64| -> Vec<Rational> {
            (0..n).map(|k| if k == j { Rational::from_integer(s.into()) } else { Rational::zero() }).collect()
        };
        for j in 0..n {
            if let Some(l) = &self.lower[j].0 {
                rows.push((unit(j, 1), false, l.clone()));
            }
        }
        for j in 0..n {
            if let Some(u) = &self.upper[j].0 {
                rows.push((unit(j, -1), false, -u.clone()));
            }
        }
        rows
    }

    /// Objective as a minimisation vector.
    fn min_objective(&self) -> Vec<Rational> {
        match self.sense {
            Sense::Min => self.objective.clone(),
            Sense::Max => self.objective.iter().map(|x| -x).collect(),
        }
    }

    pub fn is_feasible_point(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars()
            && self.inequality_form().iter().all(|(a, eq, b)| {
                let v = dot(a, x);
                if *eq {
                    v == *b
                } else {
                    v >= *b
                }
            })
    }

    pub fn value_at(&self, x: &[Rational]) -> Rational {
        dot(&self.objective, x)
    }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).filter(|(x, y)| !x.is_zero() && !y.is_zero()).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    /// Multipliers on the inequality form reproducing the (minimisation) objective.
    Dual(#[serde(with = "crate::exact::rat_str::vec")] Vec<Rational>),
    /// Nonnegative multipliers combining the rows into `0 ≥ positive`.
    Farkas(#[serde(with = "crate::exact::rat_str::vec")] Vec<Rational>),
    /// Recession direction improving the objective.
    Ray(#[serde(with = "crate::exact::rat_str::vec")] Vec<Rational>),
    /// Integer optimum proven by branch and bound over this many nodes.
    BranchAndBound { nodes: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpResult {
    pub status: Status,
    #[serde(with = "crate::exact::rat_str::opt")]
    pub value: Option<Rational>,
    #[serde(with = "crate::exact::rat_str::vec")]
    pub point: Vec<Rational>,
    pub certificate: Certificate,
}

impl LpResult {
    /// Exact check of the certificate against `p`.
    pub fn verify(&self, p: &LpProblem) -> bool {
        let rows = p.inequality_form();
        let n = p.num_vars();
        let c = p.min_objective();
        let combo = |y: &[Rational]| -> Option<(Vec<Rational>, Rational)> {
            if y.len() != rows.len() {
                return None;
            }
            let mut a = vec![Rational::zero(); n];
            let mut b = Rational::zero();
            for ((row, eq, rhs), yi) in rows.iter().zip(y) {
                if !eq && yi.is_negative() {
                    return None;
                }
                if yi.is_zero() {
                    continue;
                }
                for (aj, rj) in a.iter_mut().zip(row) {
                    *aj += yi * rj;
                }
                b += yi * rhs;
            }
            Some((a, b))
        };
        match (&self.status, &self.certificate) {
            (Status::Optimal, Certificate::Dual(y)) => {
                let Some((a, b)) = combo(y) else { return false };
                let Some(v) = &self.value else { return false };
                let vmin = if p.sense == Sense::Max { -v.clone() } else { v.clone() };
                p.is_feasible_point(&self.point) && a == c && b == vmin && dot(&c, &self.point) == vmin
            }
            (Status::Infeasible, Certificate::Farkas(y)) => {
                let Some((a, b)) = combo(y) else { return false };
                a.iter().all(|x| x.is_zero()) && b.is_positive()
            }
            (Status::Unbounded, Certificate::Ray(r)) => {
                r.len() == n
                    && p.is_feasible_point(&self.point)
                    && rows.iter().all(|(a, eq, _)| {
                        let v = dot(a, r);
                        if *eq {
                            v.is_zero()
                        } else {
                            !v.is_negative()
                        }
                    })
                    && dot(&c, r).is_negative()
            }
            (Status::Optimal, Certificate::BranchAndBound { .. }) => {
                p.is_feasible_point(&self.point)
                    && self.point.iter().zip(&p.integer).all(|(x, i)| !i || x.is_integer())
                    && self.value.as_ref() == Some(&p.value_at(&self.point))
            }
            _ => false,
        }
    }
}

/// How an original variable is represented by standard-form columns.
#[derive(Clone, Debug)]
enum VarMap {
    /// `x = l + z`
    Shift(usize, Rational),
    /// `x = u − z` (only an upper bound)
    Mirror(usize, Rational),
    /// `x = z⁺ − z⁻`
    Split(usize, usize),
}

struct Standard {
    /// Equality rows over `z ≥ 0`.
    a: Vec<Vec<Rational>>,
    b: Vec<Rational>,
    c: Vec<Rational>,
    map: Vec<VarMap>,
    /// For each inequality-form row: the standard row index it produced (if any).
    row_of: Vec<Option<usize>>,
}

fn standardize(p: &LpProblem) -> Standard {
    let n = p.num_vars();
    let cmin = p.min_objective();
    let mut map = Vec::with_capacity(n);
    let mut ncols = 0;
    for j in 0..n {
        match (&p.lower[j].0, &p.upper[j].0) {
            (Some(l), _) => {
                map.push(VarMap::Shift(ncols, l.clone()));
                ncols += 1;
            }
            (None, Some(u)) => {
                map.push(VarMap::Mirror(ncols, u.clone()));
                ncols += 1;
            }
            (None, None) => {
                map.push(VarMap::Split(ncols, ncols + 1));
                ncols += 2;
            }
        }
    }
    // express a·x in z: returns (coeffs over z, constant)
    let lin = |a: &[Rational]| -> (Vec<Rational>, Rational) {
        let mut z = vec![Rational::zero(); ncols];
        let mut k = Rational::zero();
        for (j, aj) in a.iter().enumerate() {
            if aj.is_zero() {
                continue;
            }
            match &map[j] {
                VarMap::Shift(c, l) => {
                    z[*c] += aj;
                    k += aj * l;
                }
                VarMap::Mirror(c, u) => {
                    z[*c] -= aj;
                    k += aj * u;
                }
                VarMap::Split(c1, c2) => {
                    z[*c1] += aj;
                    z[*c2] -= aj;
                }
            }
        }
        (z, k)
    };
    let ineq = p.inequality_form();
    let nuser = p.constraints.len();
    let mut rows: Vec<(Vec<Rational>, bool, Rational)> = Vec::new();
    let mut row_of = vec![None; ineq.len()];
    for (i, (a, eq, b)) in ineq.iter().enumerate() {
        if i >= nuser {
            // lower bounds are encoded by the shift; the upper bound of a mirrored
            // variable likewise. Other upper bounds need an explicit row.
            let j = a.iter().position(|x| !x.is_zero()).expect("unit row");
            let is_lower = a[j].is_positive();
            let implicit = match (&map[j], is_lower) {
                (VarMap::Shift(..), true) => true,
                (VarMap::Mirror(..), false) => true,
                _ => false,
            };
            if implicit {
                continue;
            }
        }
        let (z, k) = lin(a);
        row_of[i] = Some(rows.len());
        rows.push((z, *eq, b - k));
    }
    // slack columns for inequality rows: a z − s = b
    let nslack = rows.iter().filter(|r| !r.1).count();
    let total = ncols + nslack;
    let mut amat = Vec::with_capacity(rows.len());
    let mut bvec = Vec::with_capacity(rows.len());
    let mut s = ncols;
    for (z, eq, b) in rows {
        let mut row = z;
        row.resize(total, Rational::zero());
        if !eq {
            row[s] = -Rational::one();
            s += 1;
        }
        amat.push(row);
        bvec.push(b);
    }
    let (cz, _) = lin(&cmin);
    let mut c = cz;
    c.resize(total, Rational::zero());
    Standard { a: amat, b: bvec, c, map, row_of }
}

fn recover_x(std: &Standard, z: &[Rational]) -> Vec<Rational> {
    std.map
        .iter()
        .map(|m| match m {
            VarMap::Shift(c, l) => l + &z[*c],
            VarMap::Mirror(c, u) => u - &z[*c],
            VarMap::Split(a, b) => &z[*a] - &z[*b],
        })
        .collect()
}

fn recover_ray(std: &Standard, z: &[Rational]) -> Vec<Rational> {
    std.map
        .iter()
        .map(|m| match m {
            VarMap::Shift(c, _) => z[*c].clone(),
            VarMap::Mirror(c, _) => -z[*c].clone(),
            VarMap::Split(a, b) => &z[*a] - &z[*b],
        })
        .collect()
}

/// Multipliers on the inequality form from standard-row multipliers `y`,
/// filling implicit bound rows with the reduced costs `c − Aᵀy` (with `c = 0`
/// for Farkas certificates).
fn lift_multipliers(p: &LpProblem, std: &Standard, y: &[Rational], cost: Option<&[Rational]>) -> Vec<Rational> {
    let ineq = p.inequality_form();
    let n = p.num_vars();
    let mut out = vec![Rational::zero(); ineq.len()];
    let mut used = vec![Rational::zero(); n];
    for (i, (a, _, _)) in ineq.iter().enumerate() {
        if let Some(r) = std.row_of[i] {
            out[i] = y[r].clone();
            for (u, aj) in used.iter_mut().zip(a) {
                if !aj.is_zero() {
                    *u += &y[r] * aj;
                }
            }
        }
    }
    let target: Vec<Rational> = match cost {
        Some(c) => c.to_vec(),
        None => vec![Rational::zero(); n],
    };
    for (i, (a, _, _)) in ineq.iter().enumerate() {
        if std.row_of[i].is_none() {
            let j = a.iter().position(|x| !x.is_zero()).unwrap();
            // a_j = ±1: choose multiplier so that the j-th column balances
            out[i] = (&target[j] - &used[j]) / &a[j];
        }
    }
    out
}

struct Tableau {
    t: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let pv = self.t[r][c].clone();
        if !pv.is_one() {
            for x in self.t[r].iter_mut() {
                if !x.is_zero() {
                    *x /= &pv;
                }
            }
        }
        let prow = self.t[r].clone();
        let nz: Vec<usize> = (0..prow.len()).filter(|&j| !prow[j].is_zero()).collect();
        par::for_each_mut(&mut self.t, |i, row| {
            if i == r || row[c].is_zero() {
                return;
            }
            let f = row[c].clone();
            for &j in &nz {
                row[j] -= &f * &prow[j];
            }
        });
        self.basis[r] = c;
    }

    /// Minimises over the last row (reduced costs, with `-z` in the rhs column).
    /// Columns `>= forbid_from` never enter. Returns an unbounded entering column if any.
    fn run(&mut self, forbid_from: usize) -> Option<usize> {
        let m = self.basis.len();
        let rhs = self.cols;
        loop {
            let obj = &self.t[m];
            let Some(e) = (0..forbid_from).find(|&j| obj[j].is_negative()) else { return None };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..m {
                let a = &self.t[i][e];
                if a.is_positive() {
                    let ratio = &self.t[i][rhs] / a;
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                None => return Some(e),
                Some((r, _)) => self.pivot(r, e),
            }
        }
    }
}

/// Solves a continuous LP exactly. Integrality flags are ignored.
///
/// Problems with many more rows than variables are solved through their dual,
/// whose tableau has one row per variable.
pub fn lp_solve(p: &LpProblem) -> Result<LpResult, OptError> {
    p.check()?;
    if p.inequality_form().len() > 2 * p.num_vars() + 8 {
        if let Some(r) = solve_via_dual(p)? {
            return Ok(r);
        }
    }
    lp_solve_primal(p)
}

/// For `min c·x` subject to `a_i·x ≥ b_i` (or `=`), solves
/// `max b·y` subject to `Σ y_i a_i = c`, `y_i ≥ 0` on inequality rows.
/// The dual's own multipliers are `−x`. Returns `None` when the dual is
/// infeasible, which leaves "primal unbounded" and "primal infeasible" apart.
fn solve_via_dual(p: &LpProblem) -> Result<Option<LpResult>, OptError> {
    let rows = p.inequality_form();
    let n = p.num_vars();
    let c = p.min_objective();
    let mut d = LpProblem::new(Sense::Max, rows.iter().map(|r| r.2.clone()).collect());
    for (i, (_, eq, _)) in rows.iter().enumerate() {
        if *eq {
            d.set_bounds(i, None, None);
        }
    }
    for j in 0..n {
        d.add(rows.iter().map(|r| r.0[j].clone()).collect(), Relation::Eq, c[j].clone());
    }
    let r = lp_solve_primal(&d)?;
    match (r.status, r.certificate) {
        (Status::Optimal, Certificate::Dual(u)) => {
            let x: Vec<Rational> = u[..n].iter().map(|v| -v).collect();
            let value = p.value_at(&x);
            Ok(Some(LpResult { status: Status::Optimal, value: Some(value), point: x, certificate: Certificate::Dual(r.point) }))
        }
        (Status::Unbounded, Certificate::Ray(ray)) => {
            Ok(Some(LpResult { status: Status::Infeasible, value: None, point: vec![], certificate: Certificate::Farkas(ray) }))
        }
        _ => Ok(None),
    }
}

fn lp_solve_primal(p: &LpProblem) -> Result<LpResult, OptError> {
    let std = standardize(p);
    let m = std.a.len();
    let nz = std.c.len();
    // [A | I_art | b], rows sign-normalised so b ≥ 0
    let mut sigma = vec![Rational::one(); m];
    let mut t: Vec<Vec<Rational>> = Vec::with_capacity(m + 1);
    for i in 0..m {
        let flip = std.b[i].is_negative();
        if flip {
            sigma[i] = -Rational::one();
        }
        let mut row: Vec<Rational> = std.a[i].iter().map(|x| if flip { -x } else { x.clone() }).collect();
        row.extend((0..m).map(|k| if k == i { Rational::one() } else { Rational::zero() }));
        row.push(if flip { -std.b[i].clone() } else { std.b[i].clone() });
        t.push(row);
    }
    // phase one objective: Σ artificials, expressed in nonbasic columns
    let mut obj = vec![Rational::zero(); nz + m + 1];
    for row in t.iter().take(m) {
        for j in 0..nz {
            obj[j] -= &row[j];
        }
        obj[nz + m] -= &row[nz + m];
    }
    t.push(obj);
    let mut tab = Tableau { t, basis: (nz..nz + m).collect(), cols: nz + m };
    tab.run(nz);
    let phase1 = -tab.t[m][nz + m].clone();
    if phase1.is_positive() {
        // y = c_B B⁻¹ for phase-one costs, read from the artificial columns
        let y: Vec<Rational> = (0..m).map(|k| (Rational::one() - &tab.t[m][nz + k]) * &sigma[k]).collect();
        let cert = lift_multipliers(p, &std, &y, None);
        return Ok(LpResult { status: Status::Infeasible, value: None, point: vec![], certificate: Certificate::Farkas(cert) });
    }
    // drive remaining artificials out of the basis where possible
    for r in 0..m {
        if tab.basis[r] >= nz {
            if let Some(c) = (0..nz).find(|&j| !tab.t[r][j].is_zero()) {
                tab.pivot(r, c);
            }
        }
    }
    // phase two objective row
    let mut obj = vec![Rational::zero(); nz + m + 1];
    obj[..nz].clone_from_slice(&std.c);
    for r in 0..m {
        let b = tab.basis[r];
        let cb = if b < nz { std.c[b].clone() } else { Rational::zero() };
        if cb.is_zero() {
            continue;
        }
        for (o, x) in obj.iter_mut().zip(&tab.t[r]) {
            if !x.is_zero() {
                *o -= &cb * x;
            }
        }
    }
    tab.t[m] = obj;
    let unbounded = tab.run(nz);
    let mut z = vec![Rational::zero(); nz];
    for r in 0..m {
        if tab.basis[r] < nz {
            z[tab.basis[r]] = tab.t[r][nz + m].clone();
        }
    }
    let x = recover_x(&std, &z);
    if let Some(e) = unbounded {
        let mut dir = vec![Rational::zero(); nz];
        dir[e] = Rational::one();
        for r in 0..m {
            if tab.basis[r] < nz {
                dir[tab.basis[r]] = -tab.t[r][e].clone();
            }
        }
        let ray = recover_ray(&std, &dir);
        return Ok(LpResult { status: Status::Unbounded, value: None, point: x, certificate: Certificate::Ray(ray) });
    }
    // reduced cost of artificial k is −y_k
    let y: Vec<Rational> = (0..m).map(|k| -tab.t[m][nz + k].clone() * &sigma[k]).collect();
    let cmin = p.min_objective();
    let cert = lift_multipliers(p, &std, &y, Some(&cmin));
    let value = p.value_at(&x);
    Ok(LpResult { status: Status::Optimal, value: Some(value), point: x, certificate: Certificate::Dual(cert) })
}

/// Solves and insists that the certificate verifies.
pub fn lp_solve_verified(p: &LpProblem) -> Result<LpResult, OptError> {
    let r = lp_solve(p)?;
    if r.verify(p) {
        Ok(r)
    } else {
        Err(OptError::Certificate)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IlpOptions {
    pub node_budget: usize,
}

impl Default for IlpOptions {
    fn default() -> Self {
        IlpOptions { node_budget: 100_000 }
    }
}

struct Node {
    bound: Rational,
    lower: Vec<OptRat>,
    upper: Vec<OptRat>,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.bound == o.bound
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on the bound
        o.bound.cmp(&self.bound)
    }
}

fn most_fractional(x: &[Rational], integer: &[bool]) -> Option<usize> {
    let half = Rational::new(1.into(), 2.into());
    let mut best: Option<(usize, Rational)> = None;
    for (j, v) in x.iter().enumerate() {
        if !integer[j] || v.is_integer() {
            continue;
        }
        let frac = v - v.floor();
        let dist = (&frac - &half).abs();
        if best.as_ref().map(|(_, d)| dist < *d).unwrap_or(true) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Exact integer minimum (or maximum, per `sense`) by best-bound branch and bound.
pub fn ilp_minimize(p: &LpProblem, opts: IlpOptions) -> Result<LpResult, OptError> {
    p.check()?;
    let sign = if p.sense == Sense::Max { -Rational::one() } else { Rational::one() };
    let root = lp_solve(p)?;
    match root.status {
        Status::Infeasible => return Ok(root),
        Status::Unbounded => return Err(OptError::Unbounded),
        Status::Optimal => {}
    }
    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: root.value.clone().unwrap() * &sign, lower: p.lower.clone(), upper: p.upper.clone() });
    let mut best: Option<(Rational, Vec<Rational>)> = None;
    let mut nodes = 0usize;
    while let Some(node) = heap.pop() {
        if let Some((bv, _)) = &best {
            if node.bound >= *bv {
                break;
            }
        }
        nodes += 1;
        if nodes > opts.node_budget {
            let bound = match &best {
                Some((bv, _)) => node.bound.clone().min(bv.clone()),
                None => node.bound.clone(),
            } * &sign;
            return Err(OptError::NodeBudget {
                budget: opts.node_budget,
                bound: fmt_rat(&bound),
                best_bound: Some(RatBox(bound)),
            });
        }
        let mut q = p.clone();
        q.lower = node.lower.clone();
        q.upper = node.upper.clone();
        let r = lp_solve(&q)?;
        if r.status != Status::Optimal {
            continue;
        }
        let v = r.value.clone().unwrap() * &sign;
        if let Some((bv, _)) = &best {
            if v >= *bv {
                continue;
            }
        }
        match most_fractional(&r.point, &p.integer) {
            None => best = Some((v, r.point.clone())),
            Some(j) => {
                let xj = &r.point[j];
                let mut down_up = node.upper.clone();
                down_up[j] = OptRat(Some(tighter_upper(&node.upper[j].0, xj.floor())));
                let mut up_lo = node.lower.clone();
                up_lo[j] = OptRat(Some(tighter_lower(&node.lower[j].0, xj.ceil())));
                heap.push(Node { bound: v.clone(), lower: node.lower.clone(), upper: down_up });
                heap.push(Node { bound: v, lower: up_lo, upper: node.upper.clone() });
            }
        }
    }
    match best {
        Some((v, x)) => Ok(LpResult {
            status: Status::Optimal,
            value: Some(v * &sign),
            point: x,
            certificate: Certificate::BranchAndBound { nodes },
        }),
        None => Ok(LpResult { status: Status::Infeasible, value: None, point: vec![], certificate: Certificate::BranchAndBound { nodes } }),
    }
}

fn tighter_upper(u: &Option<Rational>, v: Rational) -> Rational {
    match u {
        Some(x) if *x < v => x.clone(),
        _ => v,
    }
}

fn tighter_lower(l: &Option<Rational>, v: Rational) -> Rational {
    match l {
        Some(x) if *x > v => x.clone(),
        _ => v,
    }
}

/// Range `[min, max]` of variable `j` over the relaxation, or `None` if empty.
pub fn variable_range(p: &LpProblem, j: usize) -> Result<Option<(Rational, Rational)>, OptError> {
    let mut obj = vec![Rational::zero(); p.num_vars()];
    obj[j] = Rational::one();
    let mut q = p.clone();
    q.objective = obj;
    q.sense = Sense::Min;
    let lo = lp_solve(&q)?;
    match lo.status {
        Status::Infeasible => return Ok(None),
        Status::Unbounded => return Err(OptError::Unbounded),
        Status::Optimal => {}
    }
    q.sense = Sense::Max;
    let hi = lp_solve(&q)?;
    if hi.status == Status::Unbounded {
        return Err(OptError::Unbounded);
    }
    Ok(Some((lo.value.unwrap(), hi.value.unwrap())))
}

/// All integer points of a bounded polytope, in lexicographic order.
pub fn ilp_enumerate(p: &LpProblem, cap: usize) -> Result<Vec<Vec<Rational>>, OptError> {
    p.check()?;
    let mut out = Vec::new();
    enumerate_rec(p, 0, cap, &mut out)?;
    Ok(out)
}

fn enumerate_rec(p: &LpProblem, j: usize, cap: usize, out: &mut Vec<Vec<Rational>>) -> Result<(), OptError> {
    let n = p.num_vars();
    if j == n {
        let x: Vec<Rational> = p.lower.iter().map(|l| l.0.clone().expect("fixed")).collect();
        if p.is_feasible_point(&x) {
            if out.len() >= cap {
                return Err(OptError::CapExceeded(cap));
            }
            out.push(x);
        }
        return Ok(());
    }
    let Some((lo, hi)) = variable_range(p, j)? else { return Ok(()) };
    let (a, b) = (lo.ceil().to_integer(), hi.floor().to_integer());
    let values: Vec<Rational> = num_iter(a, b);
    let children = par::map(&values, |v| {
        let mut q = p.clone();
        q.lower[j] = OptRat(Some(v.clone()));
        q.upper[j] = OptRat(Some(v.clone()));
        let mut sub = Vec::new();
        enumerate_rec(&q, j + 1, cap, &mut sub).map(|_| sub)
    });
    for c in children {
        let pts = c?;
        if out.len() + pts.len() > cap {
            return Err(OptError::CapExceeded(cap));
        }
        out.extend(pts);
    }
    Ok(())
}

fn num_iter(a: num_bigint::BigInt, b: num_bigint::BigInt) -> Vec<Rational> {
    let mut v = Vec::new();
    let mut x = a;
    while x <= b {
        v.push(Rational::from_integer(x.clone()));
        x += 1;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};

    fn r(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn max_bounded() {
        let mut p = LpProblem::new(Sense::Max, r(&[1]));
        p.add(r(&[1]), Relation::Le, int(3));
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.value, Some(int(3)));
        assert!(s.verify(&p));
    }

    #[test]
    fn infeasible_farkas() {
        let mut p = LpProblem::new(Sense::Min, r(&[0]));
        p.set_bounds(0, None, None);
        p.add(r(&[1]), Relation::Ge, int(1));
        p.add(r(&[1]), Relation::Le, int(0));
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.status, Status::Infeasible);
        assert!(s.verify(&p));
        let Certificate::Farkas(y) = &s.certificate else { panic!() };
        assert_eq!(y, &r(&[1, 1]));
    }

    #[test]
    fn exact_fraction() {
        let mut p = LpProblem::new(Sense::Min, r(&[1]));
        p.add(r(&[1]), Relation::Ge, rat(1, 3));
        p.add(r(&[1]), Relation::Ge, rat(2, 7));
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.value, Some(rat(1, 3)));
        assert!(s.verify(&p));
    }

    #[test]
    fn unbounded_ray() {
        let mut p = LpProblem::new(Sense::Max, r(&[1, 1]));
        p.add(r(&[1, -1]), Relation::Le, int(2));
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.status, Status::Unbounded);
        assert!(s.verify(&p));
    }

    #[test]
    fn equality_and_free() {
        // min x - y, x + y = 4, x free, 0 ≤ y ≤ 3
        let mut p = LpProblem::new(Sense::Min, r(&[1, -1]));
        p.set_bounds(0, None, None);
        p.set_bounds(1, Some(int(0)), Some(int(3)));
        p.add(r(&[1, 1]), Relation::Eq, int(4));
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.value, Some(int(-2)));
        assert!(s.verify(&p));
    }

    #[test]
    fn ilp_examples() {
        let mut p = LpProblem::new(Sense::Min, r(&[1])).all_integer();
        p.add(r(&[1]), Relation::Ge, rat(3, 2));
        assert_eq!(ilp_minimize(&p, IlpOptions::default()).unwrap().value, Some(int(2)));
        let mut p = LpProblem::new(Sense::Min, r(&[1, 1])).all_integer();
        p.add(r(&[1, 2]), Relation::Ge, int(3));
        let s = ilp_minimize(&p, IlpOptions::default()).unwrap();
        assert_eq!(s.value, Some(int(2)));
        assert!(s.verify(&p));
    }

    #[test]
    fn enumeration() {
        let mut p = LpProblem::new(Sense::Min, r(&[0])).all_integer();
        p.set_bounds(0, Some(int(0)), Some(int(2)));
        assert_eq!(ilp_enumerate(&p, 100).unwrap().len(), 3);
        let mut p = LpProblem::new(Sense::Min, r(&[0, 0])).all_integer();
        p.add(r(&[1, 1]), Relation::Le, int(2));
        assert_eq!(ilp_enumerate(&p, 100).unwrap().len(), 6);
        let mut p = LpProblem::new(Sense::Min, r(&[0])).all_integer();
        p.add(r(&[1]), Relation::Le, int(-1));
        assert!(ilp_enumerate(&p, 100).unwrap().is_empty());
        let mut p = LpProblem::new(Sense::Min, r(&[0, 0])).all_integer();
        p.add(r(&[1, 1]), Relation::Le, int(10));
        assert_eq!(ilp_enumerate(&p, 5), Err(OptError::CapExceeded(5)));
    }

    fn tall(seed: i64, infeasible: bool) -> LpProblem {
        // min Σ x over a polygon described by many tangent rows, x free
        let mut p = LpProblem::new(Sense::Min, r(&[1, 1, seed % 3]));
        for j in 0..3 {
            p.set_bounds(j, None, None);
        }
        for k in 0..30i64 {
            let a = (k * 7 + seed) % 11 - 5;
            let b = (k * 5 + 2 * seed) % 13 - 6;
            p.add(r(&[a, b, 1]), Relation::Ge, int(-(a.abs() + b.abs()) - 3));
            p.add(r(&[a, b, -1]), Relation::Ge, int(-(a.abs() + b.abs()) - 3));
        }
        p.add(r(&[1, 0, 0]), Relation::Ge, int(-2));
        p.add(r(&[0, 1, 0]), Relation::Ge, int(-2));
        p.add(r(&[0, 0, 1]), Relation::Eq, int(1));
        if infeasible {
            p.add(r(&[1, 0, 0]), Relation::Le, int(-3));
        }
        p
    }

    #[test]
    fn dual_route_agrees_with_primal() {
        for seed in 0..6 {
            for inf in [false, true] {
                let p = tall(seed, inf);
                let a = lp_solve(&p).unwrap();
                let b = lp_solve_primal(&p).unwrap();
                assert!(a.verify(&p) && b.verify(&p));
                assert_eq!(a.status, b.status);
                assert_eq!(a.value, b.value);
            }
        }
    }
}
