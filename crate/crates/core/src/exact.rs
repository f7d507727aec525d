//! Exact rationals, fractional-exponent q-series, Laurent polynomials in the
//! elliptic variable, and exact linear algebra over Q and Z.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::par;

/// Arbitrary precision rational, always in lowest terms with positive denominator.
pub type Rational = BigRational;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExactError {
    #[error("coefficient at exponent {exponent} requested beyond precision {prec}")]
    BeyondPrecision { exponent: String, prec: String },
    #[error("exponent {0} does not lie on the series grid")]
    OffGrid(String),
    #[error("cannot parse rational from {0:?}")]
    Parse(String),
    #[error("series has no invertible leading term within its precision")]
    NotInvertible,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn big(n: &BigInt) -> Rational {
    Rational::from_integer(n.clone())
}

/// Formats as `p/q`, or `p` when the denominator is one.
pub fn fmt_rat(x: &Rational) -> String {
    x.to_string()
}

pub fn parse_rat(s: &str) -> Result<Rational, ExactError> {
    let t = s.trim();
    let bad = || ExactError::Parse(s.to_string());
    match t.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => Ok(Rational::from_integer(t.parse().map_err(|_| bad())?)),
    }
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod rat_str {
    use super::{fmt_rat, parse_rat, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rat(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(serde::de::Error::custom)
    }

    pub mod opt {
        use super::*;
        pub fn serialize<S: Serializer>(x: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => s.serialize_some(&fmt_rat(v)),
                None => s.serialize_none(),
            }
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
            let s: Option<String> = Option::deserialize(d)?;
            s.map(|s| parse_rat(&s).map_err(serde::de::Error::custom)).transpose()
        }
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;
        pub fn serialize<S: Serializer>(x: &[Rational], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(x.len()))?;
            for v in x {
                seq.serialize_element(&fmt_rat(v))?;
            }
            seq.end()
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
            let v: Vec<String> = Vec::deserialize(d)?;
            v.iter()
                .map(|s| parse_rat(s).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

fn lcm_u64(a: u64, b: u64) -> u64 {
    a / a.gcd(&b) * b
}

/// Sparse q-series with exponents on the grid `(1/denom)·Z`.
///
/// Coefficients are known exactly for all exponents `< prec`; reads at or
/// beyond `prec` are refused.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QExpansion {
    denom: u64,
    coeffs: BTreeMap<i64, Rational>,
    prec: Rational,
}

impl QExpansion {
    pub fn zero(denom: u64, prec: Rational) -> Self {
        assert!(denom > 0);
        QExpansion { denom, coeffs: BTreeMap::new(), prec }
    }

    /// Integer-exponent series `Σ c_n q^n`, `0 ≤ n < len`, complete below `len`.
    pub fn from_ints(cs: &[BigInt]) -> Self {
        let mut s = QExpansion::zero(1, int(cs.len() as i64));
        for (n, c) in cs.iter().enumerate() {
            s.set(n as i64, big(c));
        }
        s
    }

    pub fn from_terms(denom: u64, prec: Rational, terms: impl IntoIterator<Item = (i64, Rational)>) -> Self {
        let mut s = QExpansion::zero(denom, prec);
        for (e, c) in terms {
            let cur = s.coeffs.remove(&e).unwrap_or_else(Rational::zero);
            s.set(e, cur + c);
        }
        s
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn prec(&self) -> &Rational {
        &self.prec
    }

    /// Stored terms as (grid numerator, coefficient).
    pub fn terms(&self) -> impl Iterator<Item = (i64, &Rational)> {
        self.coeffs.iter().map(|(e, c)| (*e, c))
    }

    pub fn exponent(&self, e: i64) -> Rational {
        rat(e, self.denom as i64)
    }

    /// Sets the coefficient at grid numerator `e`; terms at or beyond `prec` are dropped.
    pub fn set(&mut self, e: i64, c: Rational) {
        if self.exponent(e) >= self.prec || c.is_zero() {
            self.coeffs.remove(&e);
        } else {
            self.coeffs.insert(e, c);
        }
    }

    /// Coefficient of `q^x`.
    pub fn coeff(&self, x: &Rational) -> Result<Rational, ExactError> {
        if *x >= self.prec {
            return Err(ExactError::BeyondPrecision { exponent: fmt_rat(x), prec: fmt_rat(&self.prec) });
        }
        let scaled = x * big(&BigInt::from(self.denom));
        if !scaled.is_integer() {
            // off-grid exponents have coefficient zero
            return Ok(Rational::zero());
        }
        let e = scaled.to_integer().to_i64().ok_or_else(|| ExactError::OffGrid(fmt_rat(x)))?;
        Ok(self.coeffs.get(&e).cloned().unwrap_or_else(Rational::zero))
    }

    /// Smallest exponent with nonzero coefficient, or `prec` for a series known to vanish.
    pub fn valuation(&self) -> Rational {
        match self.coeffs.keys().next() {
            Some(e) => self.exponent(*e),
            None => self.prec.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Same series on a finer grid `new_denom` (a multiple of the current one).
    pub fn regrid(&self, new_denom: u64) -> Self {
        assert!(new_denom % self.denom == 0, "grid {new_denom} does not refine {}", self.denom);
        let f = (new_denom / self.denom) as i64;
        QExpansion {
            denom: new_denom,
            coeffs: self.coeffs.iter().map(|(e, c)| (e * f, c.clone())).collect(),
            prec: self.prec.clone(),
        }
    }

    fn common(&self, other: &Self) -> (Self, Self) {
        let d = lcm_u64(self.denom, other.denom);
        (self.regrid(d), other.regrid(d))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = QExpansion::zero(self.denom, self.prec.clone());
        if !c.is_zero() {
            for (e, v) in &self.coeffs {
                out.coeffs.insert(*e, v * c);
            }
        }
        out
    }

    /// Multiplies by `q^x`; `x` must lie on the grid.
    pub fn shift(&self, x: &Rational) -> Result<Self, ExactError> {
        let scaled = x * big(&BigInt::from(self.denom));
        if !scaled.is_integer() {
            return Err(ExactError::OffGrid(fmt_rat(x)));
        }
        let s = scaled.to_integer().to_i64().ok_or_else(|| ExactError::OffGrid(fmt_rat(x)))?;
        Ok(QExpansion {
            denom: self.denom,
            coeffs: self.coeffs.iter().map(|(e, c)| (e + s, c.clone())).collect(),
            prec: &self.prec + x,
        })
    }

    pub fn truncate(&self, prec: &Rational) -> Self {
        let p = if *prec < self.prec { prec.clone() } else { self.prec.clone() };
        let mut out = QExpansion::zero(self.denom, p);
        for (e, c) in &self.coeffs {
            out.set(*e, c.clone());
        }
        out
    }

    /// Multiplicative inverse; requires a nonzero leading term below `prec`.
    pub fn inverse(&self) -> Result<Self, ExactError> {
        let (&e0, c0) = self.coeffs.iter().next().ok_or(ExactError::NotInvertible)?;
        let v = self.exponent(e0);
        let new_prec = &self.prec - &v - &v;
        let c0inv = c0.recip();
        // relative series u = self / (c0 q^v), inverse by recursion on grid steps
        let steps = ((&self.prec - &v) * big(&BigInt::from(self.denom))).ceil().to_integer();
        let steps = steps.to_i64().unwrap_or(0).max(0) as usize;
        let rel: Vec<Rational> = (0..steps)
            .map(|k| self.coeffs.get(&(e0 + k as i64)).map(|c| c * &c0inv).unwrap_or_else(Rational::zero))
            .collect();
        let mut inv = vec![Rational::zero(); steps];
        if steps > 0 {
            inv[0] = Rational::one();
        }
        for k in 1..steps {
            let mut acc = Rational::zero();
            for j in 1..=k {
                if !rel[j].is_zero() && !inv[k - j].is_zero() {
                    acc -= &rel[j] * &inv[k - j];
                }
            }
            inv[k] = acc;
        }
        let mut out = QExpansion::zero(self.denom, new_prec);
        for (k, c) in inv.into_iter().enumerate() {
            out.set(k as i64 - e0, c * &c0inv);
        }
        Ok(out)
    }

    pub fn pow(&self, k: u32) -> Self {
        if k == 0 {
            let rel = &self.prec - self.valuation();
            return QExpansion::from_terms(self.denom, rel, [(0, Rational::one())]);
        }
        let mut out = self.clone();
        for _ in 1..k {
            out = &out * self;
        }
        out
    }
}

impl Add for &QExpansion {
    type Output = QExpansion;
    fn add(self, rhs: &QExpansion) -> QExpansion {
        let (a, b) = self.common(rhs);
        let prec = if a.prec < b.prec { a.prec.clone() } else { b.prec.clone() };
        let mut out = QExpansion::zero(a.denom, prec);
        for (e, c) in a.coeffs.iter().chain(b.coeffs.iter()) {
            let cur = out.coeffs.remove(e).unwrap_or_else(Rational::zero);
            out.set(*e, cur + c);
        }
        out
    }
}

impl Neg for &QExpansion {
    type Output = QExpansion;
    fn neg(self) -> QExpansion {
        self.scale(&int(-1))
    }
}

impl Sub for &QExpansion {
    type Output = QExpansion;
    fn sub(self, rhs: &QExpansion) -> QExpansion {
        self + &(-rhs)
    }
}

impl Mul for &QExpansion {
    type Output = QExpansion;
    fn mul(self, rhs: &QExpansion) -> QExpansion {
        let (a, b) = self.common(rhs);
        let p1 = &a.prec + b.valuation();
        let p2 = &b.prec + a.valuation();
        let prec = if p1 < p2 { p1 } else { p2 };
        let mut acc: BTreeMap<i64, Rational> = BTreeMap::new();
        let d = a.denom;
        for (e1, c1) in &a.coeffs {
            for (e2, c2) in &b.coeffs {
                if rat(e1 + e2, d as i64) >= prec {
                    continue;
                }
                *acc.entry(e1 + e2).or_insert_with(Rational::zero) += c1 * c2;
            }
        }
        let mut out = QExpansion::zero(d, prec);
        for (e, c) in acc {
            out.set(e, c);
        }
        out
    }
}

impl fmt::Display for QExpansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in &self.coeffs {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})q^({})", c, self.exponent(*e))?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(q^({}))", self.prec)
    }
}

/// Finite Laurent polynomial `Σ c_r ζ^r`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LaurentZ {
    pub coeffs: BTreeMap<i64, Rational>,
}

impl LaurentZ {
    pub fn from_terms(terms: impl IntoIterator<Item = (i64, Rational)>) -> Self {
        let mut out = LaurentZ::default();
        for (r, c) in terms {
            *out.coeffs.entry(r).or_insert_with(Rational::zero) += c;
        }
        out.coeffs.retain(|_, c| !c.is_zero());
        out
    }

    pub fn coeff(&self, r: i64) -> Rational {
        self.coeffs.get(&r).cloned().unwrap_or_else(Rational::zero)
    }
}

impl Mul for &LaurentZ {
    type Output = LaurentZ;
    fn mul(self, rhs: &LaurentZ) -> LaurentZ {
        LaurentZ::from_terms(
            self.coeffs
                .iter()
                .flat_map(|(r1, c1)| rhs.coeffs.iter().map(move |(r2, c2)| (r1 + r2, c1 * c2))),
        )
    }
}

impl Add for &LaurentZ {
    type Output = LaurentZ;
    fn add(self, rhs: &LaurentZ) -> LaurentZ {
        LaurentZ::from_terms(self.coeffs.iter().chain(rhs.coeffs.iter()).map(|(r, c)| (*r, c.clone())))
    }
}

/// Dense rational matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Echelon {
    pub rank: usize,
    pub reduced: RatMatrix,
    pub pivots: Vec<usize>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix { rows, cols, data: vec![vec![Rational::zero(); cols]; rows] }
    }

    pub fn from_rows(cols: usize, data: Vec<Vec<Rational>>) -> Self {
        assert!(data.iter().all(|r| r.len() == cols));
        RatMatrix { rows: data.len(), cols, data }
    }

    pub fn from_i64(data: &[Vec<i64>]) -> Self {
        let cols = data.first().map_or(0, |r| r.len());
        RatMatrix::from_rows(cols, data.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect())
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i][j]
    }

    pub fn transpose(&self) -> Self {
        let mut t = RatMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j][i] = self.data[i][j].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &RatMatrix) -> Result<RatMatrix, ExactError> {
        if self.cols != other.rows {
            return Err(ExactError::Dimension(format!("{}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        let mut out = RatMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if self.data[i][k].is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    if !other.data[k][j].is_zero() {
                        out.data[i][j] += &self.data[i][k] * &other.data[k][j];
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn echelon(&self) -> Echelon {
        echelon_reduce(self)
    }

    /// Basis of `{x : self·x = 0}` as columns (returned as a list of vectors).
    pub fn kernel(&self) -> Vec<Vec<Rational>> {
        let e = self.echelon();
        let free: Vec<usize> = (0..self.cols).filter(|c| !e.pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Rational::zero(); self.cols];
                v[f] = Rational::one();
                for (i, &p) in e.pivots.iter().enumerate() {
                    v[p] = -e.reduced.data[i][f].clone();
                }
                v
            })
            .collect()
    }
}

fn rat_size(x: &Rational) -> u64 {
    x.numer().bits() + x.denom().bits()
}

/// Reduced row echelon form over Q (pivots equal to one, zeros above and below).
pub fn echelon_reduce(m: &RatMatrix) -> Echelon {
    let mut rows: Vec<Vec<Rational>> = m.data.clone();
    let mut pivots = Vec::new();
    let mut r = 0usize;
    for c in 0..m.cols {
        if r == rows.len() {
            break;
        }
        // smallest-size nonzero pivot limits coefficient growth
        let best = (r..rows.len()).filter(|&i| !rows[i][c].is_zero()).min_by_key(|&i| rat_size(&rows[i][c]));
        let Some(p) = best else { continue };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for x in rows[r].iter_mut() {
            if !x.is_zero() {
                *x *= &inv;
            }
        }
        let prow = rows[r].clone();
        let nz: Vec<usize> = (c..m.cols).filter(|&j| !prow[j].is_zero()).collect();
        par::for_each_mut(&mut rows, |i, row| {
            if i == r || row[c].is_zero() {
                return;
            }
            let f = row[c].clone();
            for &j in &nz {
                let t = &f * &prow[j];
                row[j] -= t;
            }
        });
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    let rank = r;
    Echelon { rank, reduced: RatMatrix { rows: rank, cols: m.cols, data: rows }, pivots }
}

/// Integer matrix helpers (row-major `Vec<Vec<BigInt>>`).
pub type IntMatrix = Vec<Vec<BigInt>>;

pub fn int_identity(n: usize) -> IntMatrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect()
}

pub fn int_matmul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let n = a.len();
    let k = b.len();
    let m = b.first().map_or(0, |r| r.len());
    let mut out = vec![vec![BigInt::zero(); m]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                out[i][j] += &a[i][l] * &b[l][j];
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Smith {
    pub u: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
}

impl Smith {
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.d.len().min(self.d.first().map_or(0, |r| r.len()))).map(|i| self.d[i][i].clone()).collect()
    }
}

/// Smith normal form `U·G·V = D` with `d_i | d_{i+1}` and `U`, `V` unimodular.
pub fn smith_normal_form(g: &IntMatrix) -> Smith {
    let n = g.len();
    let m = g.first().map_or(0, |r| r.len());
    let mut d = g.clone();
    let mut u = int_identity(n);
    let mut v = int_identity(m);
    let mut t = 0;
    while t < n.min(m) {
        // locate smallest nonzero entry in the trailing block
        let mut best: Option<(usize, usize)> = None;
        for i in t..n {
            for j in t..m {
                if !d[i][j].is_zero() && best.map_or(true, |(bi, bj)| d[i][j].abs() < d[bi][bj].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        d.swap(t, pi);
        u.swap(t, pi);
        for row in d.iter_mut() {
            row.swap(t, pj);
        }
        for row in v.iter_mut() {
            row.swap(t, pj);
        }
        let mut clean = true;
        // clear column t
        for i in t + 1..n {
            if d[i][t].is_zero() {
                continue;
            }
            let q = d[i][t].div_floor(&d[t][t]);
            for j in 0..m {
                let s = &q * &d[t][j];
                d[i][j] -= s;
            }
            for j in 0..n {
                let s = &q * &u[t][j];
                u[i][j] -= s;
            }
            if !d[i][t].is_zero() {
                clean = false;
            }
        }
        // clear row t
        for j in t + 1..m {
            if d[t][j].is_zero() {
                continue;
            }
            let q = d[t][j].div_floor(&d[t][t]);
            for i in 0..n {
                let s = &q * &d[i][t];
                d[i][j] -= s;
            }
            for i in 0..m {
                let s = &q * &v[i][t];
                v[i][j] -= s;
            }
            if !d[t][j].is_zero() {
                clean = false;
            }
        }
        if !clean {
            continue;
        }
        // divisibility of the trailing block
        let mut fix = None;
        'outer: for i in t + 1..n {
            for j in t + 1..m {
                if !(&d[i][j] % &d[t][t]).is_zero() {
                    fix = Some(i);
                    break 'outer;
                }
            }
        }
        if let Some(i) = fix {
            for j in 0..m {
                let s = d[i][j].clone();
                d[t][j] += s;
            }
            for j in 0..n {
                let s = u[i][j].clone();
                u[t][j] += s;
            }
            continue;
        }
        if d[t][t].is_negative() {
            for j in 0..m {
                d[t][j] = -d[t][j].clone();
            }
            for j in 0..n {
                u[t][j] = -u[t][j].clone();
            }
        }
        t += 1;
    }
    Smith { u, d, v }
}

/// Row-style Hermite normal form of the lattice spanned by the rows; zero rows dropped.
pub fn hermite_normal_form(rows: &IntMatrix) -> IntMatrix {
    let mut a: IntMatrix = rows.clone();
    let m = a.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..m {
        loop {
            let nz: Vec<usize> = (r..a.len()).filter(|&i| !a[i][c].is_zero()).collect();
            if nz.is_empty() {
                break;
            }
            let p = *nz.iter().min_by_key(|&&i| a[i][c].abs()).unwrap();
            a.swap(r, p);
            let mut done = true;
            for i in r + 1..a.len() {
                if a[i][c].is_zero() {
                    continue;
                }
                let q = a[i][c].div_floor(&a[r][c]);
                for j in c..m {
                    let s = &q * &a[r][j];
                    a[i][j] -= s;
                }
                if !a[i][c].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if r < a.len() && !a[r][c].is_zero() {
            if a[r][c].is_negative() {
                for j in c..m {
                    a[r][j] = -a[r][j].clone();
                }
            }
            for i in 0..r {
                let q = a[i][c].div_floor(&a[r][c]);
                if q.is_zero() {
                    continue;
                }
                for j in c..m {
                    let s = &q * &a[r][j];
                    a[i][j] -= s;
                }
            }
            r += 1;
        }
    }
    a.truncate(r);
    a
}

/// Determinant of an integer matrix by fraction-free elimination.
pub fn int_det(a: &IntMatrix) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut m = a.clone();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !m[i][k].is_zero()) else { return BigInt::zero() };
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = t / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qs(cs: &[i64]) -> QExpansion {
        QExpansion::from_ints(&cs.iter().map(|&c| BigInt::from(c)).collect::<Vec<_>>())
    }

    #[test]
    fn difference_of_squares() {
        let a = qs(&[1, 1, 0]);
        let b = qs(&[1, -1, 0]);
        let p = &a * &b;
        assert_eq!(p.coeff(&int(0)).unwrap(), int(1));
        assert_eq!(p.coeff(&int(1)).unwrap(), int(0));
        assert_eq!(p.coeff(&int(2)).unwrap(), int(-1));
    }

    #[test]
    fn theta_e8_square() {
        let a = qs(&[1, 240, 2160]);
        let p = &a * &a;
        assert_eq!(p.coeff(&int(1)).unwrap(), int(480));
        assert_eq!(p.coeff(&int(2)).unwrap(), int(61920));
        assert!(p.coeff(&int(3)).is_err());
    }

    #[test]
    fn precision_rule_with_valuation() {
        let a = QExpansion::from_terms(4, int(2), [(1, int(1))]);
        let b = QExpansion::from_terms(1, int(3), [(0, int(1)), (1, int(5))]);
        let p = &a * &b;
        // min(2 + 0, 3 + 1/4)
        assert_eq!(p.prec(), &int(2));
        assert_eq!(p.coeff(&rat(5, 4)).unwrap(), int(5));
    }

    #[test]
    fn inverse_roundtrip() {
        let a = QExpansion::from_terms(1, int(6), [(1, int(1)), (2, int(-24)), (3, int(252)), (4, int(-1472)), (5, int(4830))]);
        let inv = a.inverse().unwrap();
        let one = &a * &inv;
        assert_eq!(one.coeff(&int(0)).unwrap(), int(1));
        for k in 1..4 {
            assert_eq!(one.coeff(&int(k)).unwrap(), int(0));
        }
    }

    #[test]
    fn echelon_examples() {
        let e = RatMatrix::from_i64(&[vec![1, 0], vec![0, 1]]).echelon();
        assert_eq!((e.rank, e.pivots.clone()), (2, vec![0, 1]));
        assert_eq!(RatMatrix::from_i64(&[vec![1, 2], vec![2, 4]]).echelon().rank, 1);
        let m = RatMatrix::from_rows(2, vec![vec![int(1), rat(1, 2)], vec![rat(1, 3), rat(1, 6)]]);
        assert_eq!(m.echelon().rank, 1);
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rat("105457575250/169227").unwrap(), rat(105457575250, 169227));
        assert_eq!(fmt_rat(&rat(-3, 1)), "-3");
        assert_eq!(fmt_rat(&rat(2, -4)), "-1/2");
        assert!(parse_rat("1/0").is_err());
    }

    #[test]
    fn smith_small() {
        let s = smith_normal_form(&vec![vec![BigInt::from(2)]]);
        assert_eq!(s.diagonal(), vec![BigInt::from(2)]);
        let g: IntMatrix = vec![vec![2.into(), 1.into()], vec![1.into(), 2.into()]];
        let s = smith_normal_form(&g);
        assert_eq!(s.diagonal(), vec![BigInt::from(1), BigInt::from(3)]);
        assert_eq!(int_matmul(&int_matmul(&s.u, &g), &s.v), s.d);
    }

    #[test]
    fn hnf_spans_same_lattice() {
        let rows: IntMatrix = vec![vec![4.into(), 6.into()], vec![6.into(), 9.into()], vec![2.into(), 4.into()]];
        let h = hermite_normal_form(&rows);
        assert_eq!(h.len(), 2);
        assert_eq!(int_det(&h).abs(), BigInt::from(2));
    }
}
