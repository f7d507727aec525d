//! The discriminant form of `⟨−2d⟩ ⊕ U² ⊕ E8(−1)²`, Heegner divisor indices,
//! divisor classes in `Pic_Q(F_2d)` and their coordinates over the free
//! functionals of the almost-cusp-form space of weight 21/2.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{fmt_rat, int, parse_rat, rat, RatMatrix, Rational};
use crate::jacobi::{self, Flavor, Functional, FunctionalBasis, JacobiError, Target};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum HeegnerError {
    #[error("d must be positive")]
    BadD,
    #[error("a² − 4d(h − 1) = {0} is not positive")]
    NonPositiveDiscriminant(i64),
    #[error("({gamma}, {n}) is not a valid Heegner index for d = {d}")]
    BadIndex { d: u64, gamma: u64, n: String },
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error("relation of the requested shape is not unique: {0}-dimensional solution family")]
    RankDefect(usize),
    #[error("no relation of the requested shape exists")]
    NoRelation,
    #[error("presentation precision {0} leaves too few functionals to span the basis")]
    Presentation(String),
    #[error("malformed divisor JSON: {0}")]
    Json(String),
}

/// `Z/2dZ` with `q(a) = −a²/4d mod 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscForm2d {
    pub d: u64,
}

impl DiscForm2d {
    pub fn new(d: u64) -> Result<Self, HeegnerError> {
        if d == 0 {
            return Err(HeegnerError::BadD);
        }
        Ok(DiscForm2d { d })
    }

    pub fn order(&self) -> u64 {
        2 * self.d
    }

    pub fn q(&self, a: i64) -> Rational {
        let v = rat(-a * a, 4 * self.d as i64);
        &v - v.floor()
    }

    pub fn b(&self, a: i64, b: i64) -> Rational {
        let v = rat(-a * b, 2 * self.d as i64);
        &v - v.floor()
    }

    /// Representative `0 ≤ r ≤ d` of `±a`.
    pub fn rep(&self, a: i64) -> u64 {
        let n = 2 * self.d as i64;
        let r = a.rem_euclid(n);
        r.min(n - r) as u64
    }
}

/// Isotropic elements `a² ≡ 0 (mod 4d)`, up to sign.
pub fn cusps(d: u64) -> Vec<u64> {
    jacobi::isotropic_classes(d)
}

/// Heegner index `(γ, n)` with `n ≤ 0`, `n ≡ −γ²/4d (mod 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HeegnerIndex {
    pub gamma: u64,
    #[serde(with = "crate::exact::rat_str")]
    pub n: Rational,
}

impl HeegnerIndex {
    pub fn new(d: u64, gamma: u64, n: Rational) -> Result<Self, HeegnerError> {
        let g = gamma as i64;
        let ok = gamma <= d
            && !n.is_positive()
            && (&n + rat(g * g, 4 * d as i64)).is_integer()
            && (!n.is_zero() || gamma == 0);
        if !ok {
            return Err(HeegnerError::BadIndex { d, gamma, n: fmt_rat(&n) });
        }
        Ok(HeegnerIndex { gamma, n })
    }

    pub fn zero() -> Self {
        HeegnerIndex { gamma: 0, n: Rational::zero() }
    }

    pub fn functional(&self) -> Functional {
        Functional::new(self.gamma, -self.n.clone())
    }

    pub fn from_functional(f: &Functional) -> Self {
        HeegnerIndex { gamma: f.gamma, n: -f.exponent.clone() }
    }
}

impl fmt::Display for HeegnerIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H({}, {})", self.gamma, fmt_rat(&self.n))
    }
}

/// `(γ, n) = (a mod 2d, h − 1 − a²/4d)` for the reducible divisor `D_{h,a}`.
pub fn heegner_of(d: u64, h: i64, a: i64) -> Result<HeegnerIndex, HeegnerError> {
    let disc = a * a - 4 * d as i64 * (h - 1);
    if disc <= 0 {
        return Err(HeegnerError::NonPositiveDiscriminant(disc));
    }
    let form = DiscForm2d::new(d)?;
    let n = int(h - 1) - rat(a * a, 4 * d as i64);
    HeegnerIndex::new(d, form.rep(a), n)
}

/// Finite rational combination of Heegner divisors; λ is `−H(0̄, 0)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DivisorClass {
    pub terms: BTreeMap<HeegnerIndex, Rational>,
}

#[derive(Serialize, Deserialize)]
struct DivisorTermJson {
    gamma: u64,
    n: String,
    coeff: String,
}

#[derive(Serialize, Deserialize)]
struct DivisorJson {
    d: u64,
    terms: Vec<DivisorTermJson>,
}

impl DivisorClass {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(idx: HeegnerIndex, c: Rational) -> Self {
        let mut out = Self::new();
        out.add(idx, c);
        out
    }

    pub fn lambda() -> Self {
        Self::single(HeegnerIndex::zero(), -Rational::one())
    }

    pub fn add(&mut self, idx: HeegnerIndex, c: Rational) {
        let e = self.terms.entry(idx.clone()).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&idx);
        }
    }

    pub fn add_class(&mut self, other: &DivisorClass, s: &Rational) {
        for (k, v) in &other.terms {
            self.add(k.clone(), v * s);
        }
    }

    pub fn scaled(&self, s: &Rational) -> Self {
        let mut out = Self::new();
        out.add_class(self, s);
        out
    }

    pub fn coeff(&self, idx: &HeegnerIndex) -> Rational {
        self.terms.get(idx).cloned().unwrap_or_else(Rational::zero)
    }

    /// Coefficient of λ.
    pub fn lambda_coeff(&self) -> Rational {
        -self.coeff(&HeegnerIndex::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn to_json(&self, d: u64) -> serde_json::Value {
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| DivisorTermJson { gamma: k.gamma, n: fmt_rat(&k.n), coeff: fmt_rat(v) })
            .collect();
        serde_json::to_value(DivisorJson { d, terms }).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<(u64, Self), HeegnerError> {
        let j: DivisorJson = serde_json::from_value(v.clone()).map_err(|e| HeegnerError::Json(e.to_string()))?;
        let mut out = Self::new();
        for t in j.terms {
            let n = parse_rat(&t.n).map_err(|e| HeegnerError::Json(e.to_string()))?;
            let c = parse_rat(&t.coeff).map_err(|e| HeegnerError::Json(e.to_string()))?;
            out.add(HeegnerIndex::new(j.d, t.gamma, n)?, c);
        }
        Ok((j.d, out))
    }
}

impl fmt::Display for DivisorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, v) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if k.n.is_zero() && k.gamma == 0 {
                write!(f, "({})·λ", fmt_rat(&-v))?;
            } else {
                write!(f, "({})·{}", fmt_rat(v), k)?;
            }
        }
        Ok(())
    }
}

/// Basis of `Pic_Q(F_2d)` dual to the free coefficient functionals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PicardBasis {
    pub d: u64,
    pub functionals: FunctionalBasis,
}

impl PicardBasis {
    pub fn dim(&self) -> usize {
        self.functionals.dim()
    }

    pub fn free(&self) -> Vec<HeegnerIndex> {
        self.functionals.free.iter().map(HeegnerIndex::from_functional).collect()
    }

    /// Coordinates of `[H(γ, n)]` over the free indices.
    pub fn coordinates(&self, idx: &HeegnerIndex) -> Result<Vec<Rational>, HeegnerError> {
        Ok(self.functionals.coordinates(&idx.functional())?)
    }

    /// Coordinates of an arbitrary class.
    pub fn class_coordinates(&self, c: &DivisorClass) -> Result<Vec<Rational>, HeegnerError> {
        let mut v = vec![Rational::zero(); self.dim()];
        for (k, s) in &c.terms {
            for (x, y) in v.iter_mut().zip(self.coordinates(k)?) {
                *x += s * y;
            }
        }
        Ok(v)
    }

    /// Rewrites a class over the free indices.
    pub fn reduce(&self, c: &DivisorClass) -> Result<DivisorClass, HeegnerError> {
        let v = self.class_coordinates(c)?;
        let mut out = DivisorClass::new();
        for (k, x) in self.free().into_iter().zip(v) {
            out.add(k, x);
        }
        Ok(out)
    }

    /// Every windowed index, in increasing `(|n|, γ)`.
    pub fn indices(&self) -> Vec<HeegnerIndex> {
        let mut v: Vec<HeegnerIndex> = self.functionals.functionals().map(HeegnerIndex::from_functional).collect();
        v.sort_by(|a, b| (-&a.n).cmp(&-&b.n).then(a.gamma.cmp(&b.gamma)));
        v
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    pub max_pole_order: u32,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { max_pole_order: 12 }
    }
}

/// Picard basis for `F_2d`, with dependencies for all `|n| ≤ window`.
pub fn picard_basis(d: u64, window: &Rational, opts: PicardOptions) -> Result<PicardBasis, HeegnerError> {
    DiscForm2d::new(d)?;
    let fb = jacobi::stabilized_functional_basis(Target::Heegner, d, Flavor::SingZeroBar, window, opts.max_pole_order)?;
    Ok(PicardBasis { d, functionals: fb })
}

/// `[H(γ, n)]` over the free indices.
pub fn express(basis: &PicardBasis, idx: &HeegnerIndex) -> Result<DivisorClass, HeegnerError> {
    basis.reduce(&DivisorClass::single(idx.clone(), Rational::one()))
}

/// Explicit functionals `φ_1, …, φ_r` presenting the basis: `φ_1 = c_{0̄,0}`
/// and `φ_2, …, φ_r` span the same space as the highest grid functionals
/// below `q^Q`, normalised to unit coefficient on free functionals `2..r`.
/// Row `i` holds the coefficients of `φ_i` over the free functionals.
pub fn presentation(basis: &PicardBasis) -> Result<Vec<Vec<Rational>>, HeegnerError> {
    let r = basis.dim();
    let fb = &basis.functionals;
    let q = fb.window.clone();
    let mut top: Vec<&Functional> = fb.functionals().filter(|f| f.exponent < q).collect();
    top.sort_by(|a, b| b.exponent.cmp(&a.exponent).then(b.gamma.cmp(&a.gamma)));
    let mut chosen: Vec<Vec<Rational>> = Vec::new();
    for f in top {
        if chosen.len() + 1 == r {
            break;
        }
        let v = fb.coordinates(f)?;
        let mut trial = chosen.clone();
        trial.push(v.clone());
        let rest = RatMatrix::from_rows(r - 1, trial.iter().map(|row| row[1..].to_vec()).collect());
        if rest.echelon().rank == trial.len() {
            chosen = trial;
        }
    }
    if chosen.len() + 1 != r {
        return Err(HeegnerError::Presentation(fmt_rat(&q)));
    }
    let mut out = vec![(0..r).map(|j| if j == 0 { Rational::one() } else { Rational::zero() }).collect()];
    if r > 1 {
        // RREF over columns 1..r (placed first) fixes the normalisation
        let rows = chosen.iter().map(|v| {
            let mut w = v[1..].to_vec();
            w.push(v[0].clone());
            w
        });
        let ech = RatMatrix::from_rows(r, rows.collect()).echelon();
        for row in ech.reduced.data {
            let mut v = vec![row[r - 1].clone()];
            v.extend_from_slice(&row[..r - 1]);
            out.push(v);
        }
    }
    Ok(out)
}

/// Indices `H(0̄,−1)` and `H(ā, −a²/4d)` for `1 ≤ a ≤ d`, non-isotropic `a`.
pub fn hodge_support(d: u64) -> Vec<HeegnerIndex> {
    let iso = cusps(d);
    let mut out = vec![HeegnerIndex { gamma: 0, n: int(-1) }];
    for a in 1..=d {
        if !iso.contains(&a) {
            out.push(HeegnerIndex { gamma: a, n: rat(-((a * a) as i64), 4 * d as i64) });
        }
    }
    out
}

/// Relation `2ρ·λ ∼ Σ c_a H(ā, n_a)` with `c` of `H(0̄,−1)` equal to 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HodgeRelation {
    pub d: u64,
    pub lambda: Rational,
    pub terms: Vec<(HeegnerIndex, Rational)>,
}

impl HodgeRelation {
    /// `Σ c_a H − 2ρ λ`, the class that must vanish.
    pub fn as_class(&self) -> DivisorClass {
        let mut c = DivisorClass::new();
        for (k, v) in &self.terms {
            c.add(k.clone(), v.clone());
        }
        c.add_class(&DivisorClass::lambda(), &-self.lambda.clone());
        c
    }
}

impl fmt::Display for HodgeRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}λ ∼", fmt_rat(&self.lambda))?;
        let mut first = true;
        for (k, v) in &self.terms {
            if v.is_zero() {
                continue;
            }
            write!(f, "{} {}·{}", if first { "" } else { " +" }, fmt_rat(v), k)?;
            first = false;
        }
        Ok(())
    }
}

pub fn hodge_relation(basis: &PicardBasis) -> Result<HodgeRelation, HeegnerError> {
    let support = hodge_support(basis.d);
    let r = basis.dim();
    // unknowns: c_0..c_k on the support, then the λ coefficient x
    let mut cols: Vec<Vec<Rational>> = support.iter().map(|i| basis.coordinates(i)).collect::<Result<_, _>>()?;
    let lam = basis.class_coordinates(&DivisorClass::lambda())?;
    cols.push(lam.iter().map(|x| -x).collect());
    let k = cols.len();
    // equations: Σ_j cols[j][i] u_j = 0 for each coordinate i, plus u_0 = 1
    let mut rows: Vec<Vec<Rational>> = (0..r).map(|i| {
        let mut row: Vec<Rational> = (0..k).map(|j| cols[j][i].clone()).collect();
        row.push(Rational::zero());
        row
    }).collect();
    let mut norm = vec![Rational::zero(); k + 1];
    norm[0] = Rational::one();
    norm[k] = Rational::one();
    rows.push(norm);
    let ech = RatMatrix::from_rows(k + 1, rows).echelon();
    if ech.pivots.contains(&k) {
        return Err(HeegnerError::NoRelation);
    }
    if ech.rank < k {
        return Err(HeegnerError::RankDefect(k - ech.rank));
    }
    let mut sol = vec![Rational::zero(); k];
    for (row, &p) in ech.reduced.data.iter().zip(&ech.pivots) {
        sol[p] = row[k].clone();
    }
    let lambda = sol.pop().unwrap();
    Ok(HodgeRelation { d: basis.d, lambda, terms: support.into_iter().zip(sol).collect() })
}

/// Window needed by [`hodge_relation`].
pub fn hodge_window(d: u64) -> Rational {
    let w = rat(d as i64, 4);
    if w < int(1) {
        int(1)
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cusp_sets() {
        assert_eq!(cusps(1), vec![0]);
        assert_eq!(cusps(4), vec![0, 4]);
        assert_eq!(cusps(9), vec![0, 6]);
    }

    #[test]
    fn heegner_indices() {
        assert_eq!(heegner_of(5, 0, 0).unwrap(), HeegnerIndex { gamma: 0, n: int(-1) });
        assert_eq!(heegner_of(1, 1, 1).unwrap(), HeegnerIndex { gamma: 1, n: rat(-1, 4) });
        assert_eq!(heegner_of(2, 1, 2).unwrap(), HeegnerIndex { gamma: 2, n: rat(-1, 2) });
        assert!(heegner_of(1, 1, 0).is_err());
        assert!(HeegnerIndex::new(1, 1, rat(-1, 2)).is_err());
    }

    #[test]
    fn disc_form_values() {
        let f = DiscForm2d::new(3).unwrap();
        assert_eq!(f.q(1), rat(11, 12));
        assert_eq!(f.q(7), f.q(1));
        assert_eq!(f.q(-2), f.q(2));
        assert_eq!(f.b(1, 2), f.b(2, 1));
        assert_eq!(f.rep(-1), 1);
        assert_eq!(f.rep(5), 1);
    }

    #[test]
    fn d1_expression() {
        let b = picard_basis(1, &int(1), PicardOptions::default()).unwrap();
        assert_eq!(b.dim(), 2);
        let h = express(&b, &HeegnerIndex { gamma: 1, n: rat(-1, 4) }).unwrap();
        let mut want = DivisorClass::lambda().scaled(&rat(75, 28));
        want.add(HeegnerIndex { gamma: 0, n: int(-1) }, rat(-1, 56));
        assert_eq!(h, want);
        assert_eq!(express(&b, &HeegnerIndex::zero()).unwrap(), DivisorClass::lambda().scaled(&int(-1)));
    }

    #[test]
    fn divisor_json_roundtrip() {
        let mut c = DivisorClass::lambda().scaled(&int(3));
        c.add(HeegnerIndex { gamma: 1, n: rat(-1, 4) }, rat(5, 7));
        let j = c.to_json(1);
        assert_eq!(DivisorClass::from_json(&j).unwrap(), (1, c));
    }

    #[test]
    fn hodge_rows() {
        let want: [&[i64]; 4] = [&[150, 1, 56], &[108, 1, 128, 14], &[98, 1, 108, 54, 2], &[80, 1, 112, 56, 16]];
        for d in 1..=4u64 {
            let b = picard_basis(d, &hodge_window(d), PicardOptions::default()).unwrap();
            let h = hodge_relation(&b).unwrap();
            let mut got = vec![h.lambda.clone()];
            got.extend(h.terms.iter().map(|(_, v)| v.clone()));
            let w: Vec<Rational> = want[d as usize - 1].iter().map(|&x| int(x)).collect();
            assert_eq!(got, w, "d={d}");
            assert!(b.reduce(&h.as_class()).unwrap().is_zero());
        }
    }

    #[test]
    fn d1_presentation_constant() {
        let b = picard_basis(1, &int(10), PicardOptions::default()).unwrap();
        let p = presentation(&b).unwrap();
        assert_eq!(p[1], vec![rat(105457575250, 169227), int(1)]);
    }
}
