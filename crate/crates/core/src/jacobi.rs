//! Weak and holomorphic Jacobi forms of even weight, their theta
//! decomposition into vector-valued forms, and the principal-part
//! obstruction spaces that produce every linear relation among coefficient
//! functionals of weight 21/2 (Heegner side) and 17/2 (theta side) forms.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::classical::{self, series_inverse_unit, series_pow, IntSeries};
use crate::exact::{big, fmt_rat, Echelon, int, parse_rat, rat, QExpansion, RatMatrix, Rational};
use crate::{modular, par};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum JacobiError {
    #[error("odd weight {0} is not supported")]
    OddWeight(i64),
    #[error("coefficient c({n}, {r}) requested beyond precision {prec}")]
    Precision { n: usize, r: i64, prec: usize },
    #[error("inconsistent coefficients: c({0}, {1}) differs from its class representative")]
    Inconsistent(usize, i64),
    #[error("pole order must be at least 1")]
    PoleOrder,
    #[error("free functional count did not stabilize up to pole order {0}")]
    NoStabilization(u32),
    #[error("functional ({gamma}, {exponent}) lies outside the computed window")]
    OutsideWindow { gamma: u64, exponent: String },
    #[error("malformed cache file: {0}")]
    Cache(String),
}

/// Jacobi form of weight `weight` and index `index`, coefficients `c(n, r)` for `n < prec`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JacobiForm {
    pub weight: i64,
    pub index: u64,
    prec: usize,
    rmax: i64,
    coeffs: Vec<Vec<BigInt>>,
}

/// Largest `|r|` a weak form of index `m` can carry at `q^n`, `n < prec`.
pub fn weak_rmax(m: u64, prec: usize) -> i64 {
    let n = prec.saturating_sub(1) as u64;
    let bound = 4 * n * m + m * m;
    (bound as f64).sqrt().floor() as i64 + 1
}

impl JacobiForm {
    pub fn zero(weight: i64, index: u64, prec: usize) -> Self {
        let rmax = weak_rmax(index, prec);
        JacobiForm { weight, index, prec, rmax, coeffs: vec![vec![BigInt::zero(); (2 * rmax + 1) as usize]; prec] }
    }

    pub fn prec(&self) -> usize {
        self.prec
    }

    pub fn rmax(&self) -> i64 {
        self.rmax
    }

    pub fn coeff(&self, n: usize, r: i64) -> Result<BigInt, JacobiError> {
        if n >= self.prec {
            return Err(JacobiError::Precision { n, r, prec: self.prec });
        }
        Ok(self.c(n, r))
    }

    fn c(&self, n: usize, r: i64) -> BigInt {
        if r.abs() > self.rmax {
            BigInt::zero()
        } else {
            self.coeffs[n][(r + self.rmax) as usize].clone()
        }
    }

    fn c_ref(&self, n: usize, r: i64) -> Option<&BigInt> {
        if r.abs() > self.rmax {
            None
        } else {
            Some(&self.coeffs[n][(r + self.rmax) as usize])
        }
    }

    pub fn set(&mut self, n: usize, r: i64, v: BigInt) {
        assert!(r.abs() <= self.rmax && n < self.prec, "slot ({n},{r}) outside storage");
        self.coeffs[n][(r + self.rmax) as usize] = v;
    }

    /// Nonzero coefficients as `(n, r, c)` in increasing `(n, r)`.
    pub fn terms(&self) -> Vec<(usize, i64, BigInt)> {
        let mut out = Vec::new();
        for (n, row) in self.coeffs.iter().enumerate() {
            for (i, c) in row.iter().enumerate() {
                if !c.is_zero() {
                    out.push((n, i as i64 - self.rmax, c.clone()));
                }
            }
        }
        out
    }

    pub fn truncate(&self, prec: usize) -> Self {
        let prec = prec.min(self.prec);
        let mut out = JacobiForm::zero(self.weight, self.index, prec);
        for n in 0..prec {
            for r in -out.rmax..=out.rmax {
                if let Some(v) = self.c_ref(n, r) {
                    if !v.is_zero() {
                        out.set(n, r, v.clone());
                    }
                }
            }
        }
        out
    }

    /// Product of Jacobi forms (weights and indices add), truncated to `prec`.
    pub fn mul(&self, other: &JacobiForm, prec: usize) -> JacobiForm {
        let prec = prec.min(self.prec).min(other.prec);
        let mut out = JacobiForm::zero(self.weight + other.weight, self.index + other.index, prec);
        let ro = out.rmax;
        let a = &self.coeffs;
        let b = &other.coeffs;
        let (ra, rb) = (self.rmax, other.rmax);
        let rows = par::map_range(prec, |n| {
            let mut row = vec![BigInt::zero(); (2 * ro + 1) as usize];
            for n1 in 0..=n {
                let n2 = n - n1;
                let x = &a[n1];
                let y = &b[n2];
                let ynz: Vec<(i64, &BigInt)> =
                    y.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(i, v)| (i as i64 - rb, v)).collect();
                if ynz.is_empty() {
                    continue;
                }
                for (i, u) in x.iter().enumerate() {
                    if u.is_zero() {
                        continue;
                    }
                    let r1 = i as i64 - ra;
                    for (r2, v) in &ynz {
                        let r = r1 + r2;
                        if r.abs() <= ro {
                            row[(r + ro) as usize] += u * *v;
                        }
                    }
                }
            }
            row
        });
        out.coeffs = rows;
        out
    }

    /// Product with an integer q-series of the given weight.
    pub fn mul_series(&self, f: &[BigInt], weight: i64, prec: usize) -> JacobiForm {
        let prec = prec.min(self.prec).min(f.len());
        let mut out = JacobiForm::zero(self.weight + weight, self.index, prec);
        out.rmax = self.rmax;
        let width = (2 * self.rmax + 1) as usize;
        let rows = par::map_range(prec, |n| {
            let mut row = vec![BigInt::zero(); width];
            for j in 0..=n {
                if f[j].is_zero() {
                    continue;
                }
                for (i, v) in self.coeffs[n - j].iter().enumerate() {
                    if !v.is_zero() {
                        row[i] += &f[j] * v;
                    }
                }
            }
            row
        });
        out.coeffs = rows;
        out
    }

    pub fn add_scaled(&mut self, other: &JacobiForm, s: &BigInt) {
        assert_eq!(self.index, other.index);
        for n in 0..self.prec.min(other.prec) {
            for r in -other.rmax..=other.rmax {
                let v = &other.coeffs[n][(r + other.rmax) as usize];
                if !v.is_zero() {
                    let cur = self.c(n, r);
                    self.set(n, r, cur + s * v);
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|row| row.iter().all(|c| c.is_zero()))
    }

    /// Checks `c(n, r) = c(n, −r)` and that `c(n, r)` depends only on
    /// `(4nm − r², r mod 2m)` wherever both sides are stored.
    pub fn check_consistency(&self) -> Result<(), JacobiError> {
        let m = self.index as i64;
        for n in 0..self.prec {
            for r in -self.rmax..=self.rmax {
                let v = self.c(n, r);
                if v != self.c(n, -r) {
                    return Err(JacobiError::Inconsistent(n, r));
                }
                if m == 0 {
                    continue;
                }
                // reduce r to the representative in [-m, m] with the same class
                let rr = r.rem_euclid(2 * m);
                let rep = if rr > m { rr - 2 * m } else { rr };
                let d = 4 * n as i64 * m - r * r;
                let num = d + rep * rep;
                if num % (4 * m) != 0 {
                    return Err(JacobiError::Inconsistent(n, r));
                }
                let n2 = num / (4 * m);
                if n2 < 0 {
                    if !v.is_zero() {
                        return Err(JacobiError::Inconsistent(n, r));
                    }
                    continue;
                }
                if (n2 as usize) < self.prec && self.c(n2 as usize, rep) != v {
                    return Err(JacobiError::Inconsistent(n, r));
                }
            }
        }
        Ok(())
    }

    /// Minimum of `4nm − r²` over nonzero stored coefficients.
    pub fn min_discriminant(&self) -> Option<i64> {
        let m = self.index as i64;
        self.terms().iter().map(|(n, r, _)| 4 * *n as i64 * m - r * r).min()
    }

    /// Versioned text cache: header lines then one `n r p/q` triple per line.
    pub fn to_cache_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# k3nl jacobi cache v1\n");
        s.push_str(&format!("index {}\nweight {}\nprec {}\n", self.index, self.weight, self.prec));
        for (n, r, c) in self.terms() {
            s.push_str(&format!("{n} {r} \"{c}\"\n"));
        }
        s
    }

    pub fn from_cache_text(text: &str) -> Result<Self, JacobiError> {
        let bad = |m: &str| JacobiError::Cache(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        if header.trim() != "# k3nl jacobi cache v1" {
            return Err(bad("unknown header"));
        }
        let mut field = |name: &str| -> Result<i64, JacobiError> {
            let l = lines.next().ok_or_else(|| bad("truncated header"))?;
            let (k, v) = l.split_once(' ').ok_or_else(|| bad(l))?;
            if k != name {
                return Err(bad(l));
            }
            v.trim().parse::<i64>().map_err(|_| bad(l))
        };
        let index = field("index")? as u64;
        let weight = field("weight")?;
        let prec = field("prec")? as usize;
        let mut out = JacobiForm::zero(weight, index, prec);
        for l in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(bad(l));
            }
            let n: usize = parts[0].parse().map_err(|_| bad(l))?;
            let r: i64 = parts[1].parse().map_err(|_| bad(l))?;
            let c = parse_rat(parts[2].trim_matches('"')).map_err(|_| bad(l))?;
            if !c.is_integer() || n >= prec || r.abs() > out.rmax {
                return Err(bad(l));
            }
            out.set(n, r, c.to_integer());
        }
        Ok(out)
    }
}

/// The standard weak Jacobi forms φ_{−2,1} and φ_{0,1}, coefficients below `q^prec`.
pub fn weak_jacobi_generators(prec: usize) -> (JacobiForm, JacobiForm) {
    let prec = prec.max(1);
    // Π_{n≥1} (1 − qⁿζ)²(1 − qⁿζ⁻¹)² / (1 − qⁿ)⁴ on a generous ζ-window
    let big_r = 2 * prec as i64 + 4;
    let width = (2 * big_r + 1) as usize;
    let idx = |r: i64| (r + big_r) as usize;
    let mut pr = vec![vec![BigInt::zero(); width]; prec];
    pr[0][idx(0)] = BigInt::one();
    for n in 1..prec {
        for s in [1i64, 1, -1, -1] {
            // multiply by (1 − qⁿ ζ^s), descending n keeps it in place
            for k in (n..prec).rev() {
                for r in (-big_r..=big_r).rev() {
                    let src = r - s;
                    if src.abs() > big_r {
                        continue;
                    }
                    let v = pr[k - n][idx(src)].clone();
                    if !v.is_zero() {
                        pr[k][idx(r)] -= v;
                    }
                }
            }
        }
        for _ in 0..4 {
            // divide by (1 − qⁿ): ascending recurrence
            for k in n..prec {
                for i in 0..width {
                    let v = pr[k - n][i].clone();
                    if !v.is_zero() {
                        pr[k][i] += v;
                    }
                }
            }
        }
    }
    let mut phi_m2 = JacobiForm::zero(-2, 1, prec);
    let rm = phi_m2.rmax;
    for n in 0..prec {
        for r in -rm..=rm {
            let get = |rr: i64| if rr.abs() <= big_r { pr[n][idx(rr)].clone() } else { BigInt::zero() };
            let v = get(r - 1) - BigInt::from(2) * get(r) + get(r + 1);
            phi_m2.set(n, r, v);
        }
    }
    // S = Σ_{n≥1} Σ_{d|n} d (ζ^d − 2 + ζ^{−d}) qⁿ
    let mut s = JacobiForm::zero(0, 0, prec);
    s.rmax = prec as i64;
    s.coeffs = vec![vec![BigInt::zero(); (2 * s.rmax + 1) as usize]; prec];
    for n in 1..prec {
        for d in 1..=n {
            if n % d == 0 {
                let dd = d as i64;
                let bd = BigInt::from(dd);
                let cur = s.c(n, dd);
                s.set(n, dd, cur + &bd);
                let cur = s.c(n, -dd);
                s.set(n, -dd, cur + &bd);
                let cur = s.c(n, 0);
                s.set(n, 0, cur - BigInt::from(2) * &bd);
            }
        }
    }
    // φ_{0,1} = φ_{−2,1} + 12·Π + 12·S·φ_{−2,1}
    let mut phi0 = phi_m2.mul(&s, prec);
    phi0.weight = 0;
    phi0.index = 1;
    let mut out = JacobiForm::zero(0, 1, prec);
    let twelve = BigInt::from(12);
    for n in 0..prec {
        for r in -out.rmax..=out.rmax {
            let pv = if r.abs() <= big_r { pr[n][idx(r)].clone() } else { BigInt::zero() };
            let v = phi_m2.c(n, r) + &twelve * pv + &twelve * phi0.c(n, r);
            out.set(n, r, v);
        }
    }
    (phi_m2, out)
}

/// Monomials `φ_{−2,1}^a φ_{0,1}^{m−a}` for `a = 0..=m`.
pub fn generator_monomials(m: u64, prec: usize) -> Vec<JacobiForm> {
    let (a, b) = weak_jacobi_generators(prec);
    let mut pa = vec![JacobiForm::unit(prec)];
    let mut pb = vec![JacobiForm::unit(prec)];
    for _ in 0..m {
        let na = pa.last().unwrap().mul(&a, prec);
        let nb = pb.last().unwrap().mul(&b, prec);
        pa.push(na);
        pb.push(nb);
    }
    let idx: Vec<u64> = (0..=m).collect();
    par::map(&idx, |&k| pa[k as usize].mul(&pb[(m - k) as usize], prec))
}

impl JacobiForm {
    fn unit(prec: usize) -> Self {
        let mut u = JacobiForm::zero(0, 0, prec);
        u.set(0, 0, BigInt::one());
        u
    }
}

/// Monomial basis `f·φ_{−2,1}^a φ_{0,1}^{m−a}`, `f` running over `E4^i E6^j` of weight `k + 2a`.
pub fn weak_basis(k: i64, m: u64, prec: usize) -> Result<Vec<JacobiForm>, JacobiError> {
    if k % 2 != 0 {
        return Err(JacobiError::OddWeight(k));
    }
    let monos = generator_monomials(m, prec);
    let mut out = Vec::new();
    for a in 0..=m {
        let wt = k + 2 * a as i64;
        if wt < 0 {
            continue;
        }
        for f in classical::mform_basis(wt, prec).expect("even weight") {
            let series: Vec<BigInt> = (0..prec)
                .map(|n| f.expansion.coeff(&int(n as i64)).expect("within precision").to_integer())
                .collect();
            out.push(monos[a as usize].mul_series(&series, wt, prec));
        }
    }
    for f in out.iter_mut() {
        f.weight = k;
    }
    Ok(out)
}

/// Slots `(n, r)` with `0 ≤ r ≤ m` and `4nm − r² < 0` below `prec`.
fn negative_slots(m: u64, prec: usize) -> Vec<(usize, i64)> {
    let mut out = Vec::new();
    for r in 0..=m as i64 {
        for n in 0..prec {
            if 4 * n as i64 * m as i64 - r * r < 0 {
                out.push((n, r));
            }
        }
    }
    out
}

/// Holomorphic subspace: forms in the span of `basis` with `c(n, r) = 0` whenever `4nm − r² < 0`.
pub fn holomorphic_subspace(basis: &[JacobiForm]) -> Vec<JacobiForm> {
    let Some(first) = basis.first() else { return vec![] };
    let m = first.index;
    let prec = basis.iter().map(|b| b.prec).min().unwrap();
    let slots = negative_slots(m, prec);
    let rows: Vec<Vec<BigInt>> = basis.iter().map(|b| slots.iter().map(|&(n, r)| b.c(n, r)).collect()).collect();
    let kernel = modular::left_kernel(&rows, slots.len());
    kernel
        .iter()
        .map(|row| {
            let mut f = JacobiForm::zero(first.weight, m, prec);
            f.rmax = first.rmax;
            f.coeffs = vec![vec![BigInt::zero(); (2 * f.rmax + 1) as usize]; prec];
            for (j, c) in row.iter().enumerate() {
                if !c.is_zero() {
                    f.add_scaled(&basis[j], c);
                }
            }
            f
        })
        .collect()
}

/// Sign of the exponent grid of a vector-valued form: components of sign `−`
/// live on `n ≡ −γ²/4M`, of sign `+` on `n ≡ γ²/4M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridSign {
    Plus,
    Minus,
}

/// Vector-valued q-series indexed by `Z/2MZ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VVForm {
    pub modulus: u64,
    pub sign: GridSign,
    pub components: Vec<QExpansion>,
}

impl VVForm {
    pub fn component(&self, gamma: i64) -> &QExpansion {
        &self.components[gamma.rem_euclid(self.modulus as i64) as usize]
    }
}

/// Theta decomposition `h_μ = Σ_{r ≡ μ (2m)} c(n, r) q^{n − r²/4m}`.
pub fn theta_decompose(phi: &JacobiForm) -> VVForm {
    let m = phi.index as i64;
    let denom = (4 * m) as u64;
    let components = (0..2 * m)
        .map(|mu| {
            let rep = if mu > m { mu - 2 * m } else { mu };
            let shift = rat(rep * rep, 4 * m);
            let prec = int(phi.prec as i64) - &shift;
            let mut s = QExpansion::zero(denom, prec);
            for n in 0..phi.prec {
                let v = phi.c(n, rep);
                if !v.is_zero() {
                    let e = 4 * m * n as i64 - rep * rep;
                    s.set(e, big(&v));
                }
            }
            s
        })
        .collect();
    VVForm { modulus: 2 * m as u64, sign: GridSign::Minus, components }
}

/// Obstruction targets: the weight of the holomorphic space whose functionals are related.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Target {
    /// Weight 21/2, dual to Heegner divisors of F_2d.
    Heegner,
    /// Weight 17/2, the ambient space of rank-17 theta series.
    Theta,
}

impl Target {
    /// Jacobi weight of the forms whose quotients by Δ^P carry the principal parts.
    pub fn jacobi_weight(self, pole_order: u32) -> i64 {
        let p = pole_order as i64;
        match self {
            Target::Heegner => 12 * p - 8,
            Target::Theta => 12 * p - 6,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Heegner => write!(f, "21/2"),
            Target::Theta => write!(f, "17/2"),
        }
    }
}

/// Which constant terms at isotropic classes are forced to vanish.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    /// All holomorphic forms.
    Sing,
    /// Cusp forms: every isotropic constant term vanishes.
    SingMinus,
    /// Almost cusp forms: isotropic constant terms vanish except at 0.
    SingZeroBar,
}

/// Coefficient functional reading exponent `exponent ≥ 0` of component `gamma`
/// (representative `0 ≤ gamma ≤ m`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Functional {
    pub gamma: u64,
    #[serde(with = "crate::exact::rat_str")]
    pub exponent: Rational,
}

impl Functional {
    pub fn new(gamma: u64, exponent: Rational) -> Self {
        Functional { gamma, exponent }
    }

    /// Priority used when choosing free functionals: ⌈exponent⌉, then γ, then exponent.
    pub fn priority(&self) -> (BigInt, u64, Rational) {
        (self.exponent.ceil().to_integer(), self.gamma, self.exponent.clone())
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c({}, {})", self.gamma, fmt_rat(&self.exponent))
    }
}

pub fn isotropic_classes(m: u64) -> Vec<u64> {
    (0..=m).filter(|a| (a * a) % (4 * m) == 0).collect()
}

/// Functionals `(γ, e)` with `0 ≤ γ ≤ m`, `e ≡ γ²/4m (mod 1)`, `0 ≤ e ≤ bound`,
/// sorted by exponent then γ, with the flavor's isotropic constant terms removed.
pub fn functional_grid(m: u64, bound: &Rational, flavor: Flavor) -> Vec<Functional> {
    let iso = isotropic_classes(m);
    let mut out = Vec::new();
    for a in 0..=m {
        let base = rat((a * a) as i64, 4 * m as i64);
        let mut e = &base - base.floor();
        while e <= *bound {
            let drop = e.is_zero()
                && iso.contains(&a)
                && match flavor {
                    Flavor::Sing => false,
                    Flavor::SingMinus => true,
                    Flavor::SingZeroBar => a != 0,
                };
            if !drop {
                out.push(Functional::new(a, e.clone()));
            }
            e += int(1);
        }
    }
    out.sort_by(|x, y| x.exponent.cmp(&y.exponent).then(x.gamma.cmp(&y.gamma)));
    out
}

/// Echelonised relations `Σ a_f c_f = 0` valid on the flavor's holomorphic space.
#[derive(Clone, Debug)]
pub struct RelationSpace {
    pub m: u64,
    pub target: Target,
    pub pole_order: u32,
    pub flavor: Flavor,
    pub grid: Vec<Functional>,
    pub relations: RatMatrix,
}

impl RelationSpace {
    pub fn rank(&self) -> usize {
        self.relations.rows
    }

    /// Exact pairing of every relation row with coefficient values `value(f)`.
    pub fn pairings(&self, value: impl Fn(&Functional) -> Rational) -> Vec<Rational> {
        let vals: Vec<Rational> = self.grid.iter().map(&value).collect();
        self.relations
            .data
            .iter()
            .map(|row| row.iter().zip(&vals).filter(|(a, _)| !a.is_zero()).map(|(a, v)| a * v).sum())
            .collect()
    }
}

/// `q^P / Δ^P` as an integer series.
fn delta_power_inverse(p: u32, len: usize) -> IntSeries {
    let d = classical::delta_ints(len + 1);
    let shifted: Vec<BigInt> = d[1..].to_vec();
    let pw = series_pow(&shifted, p, len);
    series_inverse_unit(&pw, len)
}

/// Relation space from principal parts of `θ(φ)/Δ^P`, `φ` holomorphic of
/// weight `target.jacobi_weight(P)` and index `m`.
pub fn obstruction_space(target: Target, m: u64, pole_order: u32, flavor: Flavor) -> Result<RelationSpace, JacobiError> {
    if pole_order < 1 {
        return Err(JacobiError::PoleOrder);
    }
    let p = pole_order;
    let w = target.jacobi_weight(p);
    let prec = p as usize + (m as usize) / 4 + 2;
    let grid = functional_grid(m, &int(p as i64), flavor);
    let slots = negative_slots(m, prec);
    let inv = delta_power_inverse(p, p as usize + 1);
    let monos = generator_monomials(m, prec);

    // rows: Δ^j E4^a E6^b · monomial, skipping valuations beyond the window
    let mut specs: Vec<(usize, IntSeries, i64)> = Vec::new();
    for a in 0..=m {
        let wt = w + 2 * a as i64;
        if wt < 0 {
            continue;
        }
        for (j, f) in classical::valuation_basis(wt, prec).expect("even weight") {
            if j < prec {
                specs.push((a as usize, f, wt));
            }
        }
    }
    let mm = m as i64;
    let rows: Vec<Vec<BigInt>> = par::map(&specs, |(a, f, wt)| {
        let psi = monos[*a].mul_series(f, *wt, prec);
        let mut row: Vec<BigInt> = slots.iter().map(|&(n, r)| psi.c(n, r)).collect();
        for fnl in &grid {
            let g = fnl.gamma as i64;
            // exponent −e of h_γ/Δ^P: Σ_j h_γ(P − e − j) inv_j with n = P − e − j + γ²/4m
            let shift = rat(g * g, 4 * mm);
            let top = int(p as i64) - &fnl.exponent + &shift;
            let top = top.to_integer().to_i64().expect("integral grid");
            let mut acc = BigInt::zero();
            for (j, iv) in inv.iter().enumerate() {
                let n = top - j as i64;
                if n < 0 {
                    break;
                }
                let c = psi.c(n as usize, g);
                if !c.is_zero() && !iv.is_zero() {
                    acc += c * iv;
                }
            }
            if fnl.gamma != 0 && fnl.gamma != m {
                acc *= 2;
            }
            row.push(acc);
        }
        row
    });
    let kernel = modular::left_kernel(&rows, slots.len());
    let rel_rows: Vec<Vec<BigInt>> = kernel.iter().map(|k| modular::combine(&rows, slots.len(), k)).collect();
    let (reduced, _) = modular::rref(&rel_rows, grid.len());
    let relations = RatMatrix::from_rows(grid.len(), reduced);
    Ok(RelationSpace { m, target, pole_order, flavor, grid, relations })
}

/// Free functionals and the expression of every windowed functional in them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionalBasis {
    pub m: u64,
    pub target: Target,
    pub flavor: Flavor,
    #[serde(with = "crate::exact::rat_str")]
    pub window: Rational,
    pub pole_order: u32,
    /// Free functional counts observed for P = 1, 2, ….
    pub stabilization: Vec<usize>,
    pub free: Vec<Functional>,
    /// Coordinates of each windowed functional over `free`.
    pub dependencies: BTreeMap<Functional, Vec<RatString>>,
}

/// Rational stored as a `"p/q"` string for serialization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RatString(#[serde(with = "crate::exact::rat_str")] pub Rational);

impl FunctionalBasis {
    pub fn dim(&self) -> usize {
        self.free.len()
    }

    pub fn coordinates(&self, f: &Functional) -> Result<Vec<Rational>, JacobiError> {
        self.dependencies
            .get(f)
            .map(|v| v.iter().map(|x| x.0.clone()).collect())
            .ok_or_else(|| JacobiError::OutsideWindow { gamma: f.gamma, exponent: fmt_rat(&f.exponent) })
    }

    pub fn functionals(&self) -> impl Iterator<Item = &Functional> {
        self.dependencies.keys()
    }
}

/// Free count `|grid| − rank` of the functionals with exponent ≤ P at pole order P.
fn free_count(space: &RelationSpace) -> usize {
    space.grid.len() - space.rank()
}

/// Chooses free functionals greedily by [`Functional::priority`] and expresses
/// all grid functionals up to `window` in them.
pub fn basis_from_space(space: &RelationSpace, window: &Rational, stabilization: Vec<usize>) -> FunctionalBasis {
    let mut order: Vec<usize> = (0..space.grid.len()).collect();
    // lowest priority first, so that RREF pivots land on the dependent functionals
    order.sort_by(|&i, &j| space.grid[j].priority().cmp(&space.grid[i].priority()));
    let permuted: Vec<Vec<BigInt>> = space
        .relations
        .data
        .iter()
        .map(|row| modular::primitive(&order.iter().map(|&i| row[i].clone()).collect::<Vec<_>>()))
        .collect();
    let (reduced, pivots) = modular::rref(&permuted, order.len());
    let ech = Echelon { rank: pivots.len(), reduced: RatMatrix::from_rows(order.len(), reduced), pivots };
    let pivset: std::collections::BTreeSet<usize> = ech.pivots.iter().copied().collect();
    let mut free_pos: Vec<usize> = (0..order.len()).filter(|c| !pivset.contains(c)).collect();
    free_pos.sort_by(|&a, &b| space.grid[order[a]].priority().cmp(&space.grid[order[b]].priority()));
    let free: Vec<Functional> = free_pos.iter().map(|&c| space.grid[order[c]].clone()).collect();
    let mut deps = BTreeMap::new();
    for (k, &c) in free_pos.iter().enumerate() {
        let f = &space.grid[order[c]];
        if f.exponent <= *window {
            let mut v = vec![RatString(Rational::zero()); free.len()];
            v[k] = RatString(Rational::one());
            deps.insert(f.clone(), v);
        }
    }
    for (row, &p) in ech.reduced.data.iter().zip(&ech.pivots) {
        let f = &space.grid[order[p]];
        if f.exponent > *window {
            continue;
        }
        let v: Vec<RatString> = free_pos.iter().map(|&c| RatString(-row[c].clone())).collect();
        deps.insert(f.clone(), v);
    }
    FunctionalBasis {
        m: space.m,
        target: space.target,
        flavor: space.flavor,
        window: window.clone(),
        pole_order: space.pole_order,
        stabilization,
        free,
        dependencies: deps,
    }
}

/// Iterates the pole order until the free count is identical for three
/// consecutive values, then returns the free set and dependencies up to `window`.
pub fn stabilized_functional_basis(
    target: Target,
    m: u64,
    flavor: Flavor,
    window: &Rational,
    max_pole_order: u32,
) -> Result<FunctionalBasis, JacobiError> {
    let mut counts = Vec::new();
    let mut p = 1;
    let last = loop {
        if p > max_pole_order {
            return Err(JacobiError::NoStabilization(max_pole_order));
        }
        let space = obstruction_space(target, m, p, flavor)?;
        counts.push(free_count(&space));
        let k = counts.len();
        if k >= 3 && counts[k - 1] == counts[k - 2] && counts[k - 2] == counts[k - 3] {
            break space;
        }
        p += 1;
    };
    let need = window.ceil().to_integer().to_u32().unwrap_or(u32::MAX).max(1);
    let space = if need > p { obstruction_space(target, m, need, flavor)? } else { last };
    Ok(basis_from_space(&space, window, counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(f: &JacobiForm, n: usize) -> Vec<(i64, i64)> {
        (-f.rmax..=f.rmax).filter_map(|r| {
            let c = f.c(n, r);
            (!c.is_zero()).then(|| (r, c.to_i64().unwrap()))
        }).collect()
    }

    #[test]
    fn generator_expansions() {
        let (a, b) = weak_jacobi_generators(4);
        assert_eq!(row(&a, 0), vec![(-1, 1), (0, -2), (1, 1)]);
        assert_eq!(row(&a, 1), vec![(-2, -2), (-1, 8), (0, -12), (1, 8), (2, -2)]);
        assert_eq!(row(&b, 0), vec![(-1, 1), (0, 10), (1, 1)]);
        assert_eq!(row(&b, 1), vec![(-2, 10), (-1, -64), (0, 108), (1, -64), (2, 10)]);
        a.check_consistency().unwrap();
        b.check_consistency().unwrap();
    }

    #[test]
    fn weak_basis_sizes() {
        assert_eq!(weak_basis(4, 1, 4).unwrap().len(), 2);
        assert_eq!(weak_basis(0, 1, 4).unwrap().len(), 1);
        assert_eq!(weak_basis(10, 1, 4).unwrap().len(), 3);
        assert!(weak_basis(3, 1, 4).is_err());
    }

    #[test]
    fn holomorphic_dimensions() {
        for k in [4, 6] {
            let h = holomorphic_subspace(&weak_basis(k, 1, 6).unwrap());
            assert_eq!(h.len(), 1, "k={k}");
            assert!(h[0].min_discriminant().unwrap() >= 0);
        }
    }

    #[test]
    fn theta_decomposition_of_phi01() {
        let (_, b) = weak_jacobi_generators(4);
        let v = theta_decompose(&b);
        assert_eq!(v.component(0).coeff(&int(0)).unwrap(), int(10));
        assert_eq!(v.component(1).coeff(&rat(-1, 4)).unwrap(), int(1));
        assert_eq!(v.component(1).valuation(), rat(-1, 4));
    }

    #[test]
    fn cache_roundtrip() {
        let (a, _) = weak_jacobi_generators(5);
        let t = a.to_cache_text();
        assert_eq!(JacobiForm::from_cache_text(&t).unwrap(), a);
    }

    #[test]
    fn d1_relation() {
        let s = obstruction_space(Target::Heegner, 1, 1, Flavor::SingZeroBar).unwrap();
        assert_eq!(s.grid.len() - s.rank(), 2);
        // 150 c(0,0) + 56 c(1,1/4) + c(0,1) = 0
        let row = &s.relations.data[0];
        let scale = &row[0];
        let got: Vec<Rational> = row.iter().map(|x| x / scale * int(150)).collect();
        assert_eq!(got, vec![int(150), int(56), int(1)]);
    }
}
