//! Rank-two polarised hyperbolic lattices, the irreducible Noether–Lefschetz
//! divisors `P_{Δ,δ}` they index, and the triangular change of basis between
//! the reducible divisors `D_{h,a} = H(γ, n)` and the `P_{Δ,δ}`.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{int, rat, Rational};
use crate::heegner::{DivisorClass, HeegnerError, HeegnerIndex};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NlError {
    #[error("no rank-two lattice with Δ = {disc}, δ = {delta} for d = {d}")]
    NoClass { d: u64, disc: u64, delta: u64 },
    #[error("a² − 4d(h − 1) = {0} is not positive")]
    NonPositive(i64),
    #[error(transparent)]
    Heegner(#[from] HeegnerError),
}

/// Isomorphism class of a `2d`-polarised even lattice of signature (1, 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RankTwoClass {
    pub d: u64,
    pub disc: u64,
    /// Representative `0 ≤ δ ≤ d` of the coset.
    pub delta: u64,
}

impl fmt::Display for RankTwoClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P({}, {})", self.disc, self.delta)
    }
}

fn rep(d: u64, y: i64) -> u64 {
    let n = 2 * d as i64;
    let r = y.rem_euclid(n);
    r.min(n - r) as u64
}

pub fn class_exists(d: u64, disc: u64, delta: u64) -> bool {
    disc > 0 && (disc as i128 - (delta as i128).pow(2)).rem_euclid(4 * d as i128) == 0
}

impl RankTwoClass {
    pub fn new(d: u64, disc: u64, delta: i64) -> Result<Self, NlError> {
        let delta = rep(d, delta);
        if !class_exists(d, disc, delta) {
            return Err(NlError::NoClass { d, disc, delta });
        }
        Ok(RankTwoClass { d, disc, delta })
    }

    /// Gram matrix `[[2d, y], [y, 2x]]` with `y = δ` and `x = (y² − Δ)/4d`.
    pub fn gram(&self) -> [[i64; 2]; 2] {
        let y = self.delta as i64;
        let d = self.d as i64;
        let x = (y * y - self.disc as i64) / (4 * d);
        [[2 * d, y], [y, 2 * x]]
    }

    /// Index `H(δ, −Δ/4d)` of the reducible divisor with the same invariants.
    pub fn heegner(&self) -> HeegnerIndex {
        HeegnerIndex { gamma: self.delta, n: rat(-(self.disc as i64), 4 * self.d as i64) }
    }
}

/// All existing classes with discriminant `disc`.
pub fn classes_with_disc(d: u64, disc: u64) -> Vec<RankTwoClass> {
    (0..=d).filter(|&dl| class_exists(d, disc, dl)).map(|delta| RankTwoClass { d, disc, delta }).collect()
}

fn isqrt(n: u64) -> Option<u64> {
    let r = (n as f64).sqrt().round() as u64;
    (r.saturating_sub(1)..=r + 1).find(|&x| x * x == n)
}

/// Number of `β = sH + tΓ` with `β² = 2h − 2` and `β·H = a`. Writing
/// `β² = (a² − Δt²)/2d` shows `t² = (a² − 4d(h−1))/Δ`, so only `t = ±f` can occur.
pub fn count_vectors(cls: &RankTwoClass, h: i64, a: i64) -> u64 {
    let d = cls.d as i64;
    let big = a * a - 4 * d * (h - 1);
    if big <= 0 || big % cls.disc as i64 != 0 {
        return 0;
    }
    let Some(f) = isqrt((big / cls.disc as i64) as u64) else { return 0 };
    let y = cls.delta as i64;
    [f as i64, -(f as i64)].iter().filter(|&&t| (a - t * y).rem_euclid(2 * d) == 0).count() as u64
}

/// Components `P_{Δ′,δ′}` of `D_{h,a}` with their multiplicities.
pub fn decompose_d(d: u64, h: i64, a: i64) -> Result<BTreeMap<RankTwoClass, u64>, NlError> {
    let big = a * a - 4 * d as i64 * (h - 1);
    if big <= 0 {
        return Err(NlError::NonPositive(big));
    }
    let big = big as u64;
    let mut out = BTreeMap::new();
    let mut f = 1u64;
    while f * f <= big {
        if big % (f * f) == 0 {
            for cls in classes_with_disc(d, big / (f * f)) {
                let c = count_vectors(&cls, h, a);
                if c > 0 {
                    out.insert(cls, c);
                }
            }
        }
        f += 1;
    }
    Ok(out)
}

/// `(h, a)` with `D_{h,a} = H(γ, n)`, taking `a = γ`.
pub fn ha_of(d: u64, idx: &HeegnerIndex) -> (i64, i64) {
    let a = idx.gamma as i64;
    let h = &idx.n + int(1) + rat(a * a, 4 * d as i64);
    (h.to_integer().to_i64().expect("small"), a)
}

/// Memoised inversion of the triangular system `H = Σ mult·P`.
#[derive(Clone, Debug)]
pub struct NlTable {
    pub d: u64,
    cache: BTreeMap<RankTwoClass, DivisorClass>,
}

impl NlTable {
    pub fn new(d: u64) -> Self {
        NlTable { d, cache: BTreeMap::new() }
    }

    /// `[P_{Δ,δ}]` as a rational combination of Heegner divisors.
    pub fn p_in_terms_of_h(&mut self, cls: &RankTwoClass) -> Result<DivisorClass, NlError> {
        if let Some(c) = self.cache.get(cls) {
            return Ok(c.clone());
        }
        if !class_exists(self.d, cls.disc, cls.delta) {
            return Err(NlError::NoClass { d: self.d, disc: cls.disc, delta: cls.delta });
        }
        let idx = cls.heegner();
        let (h, a) = ha_of(self.d, &idx);
        let parts = decompose_d(self.d, h, a)?;
        let own = Rational::from_integer(parts[cls].into());
        let mut acc = DivisorClass::single(idx, Rational::one());
        for (other, mult) in &parts {
            if other == cls {
                continue;
            }
            let sub = self.p_in_terms_of_h(other)?;
            acc.add_class(&sub, &-Rational::from_integer((*mult).into()));
        }
        let out = acc.scaled(&own.recip());
        self.cache.insert(*cls, out.clone());
        Ok(out)
    }

    /// `[H(γ, n)]` as a combination of irreducible classes.
    pub fn h_in_terms_of_p(&self, idx: &HeegnerIndex) -> Result<BTreeMap<RankTwoClass, u64>, NlError> {
        let (h, a) = ha_of(self.d, idx);
        decompose_d(self.d, h, a)
    }
}

/// Expands a combination of irreducible classes back into Heegner divisors.
pub fn expand(table: &mut NlTable, combo: &BTreeMap<RankTwoClass, Rational>) -> Result<DivisorClass, NlError> {
    let mut out = DivisorClass::new();
    for (cls, c) in combo {
        if !c.is_zero() {
            out.add_class(&table.p_in_terms_of_h(cls)?, c);
        }
    }
    Ok(out)
}

/// Brute-force count over the Gram model, used as an independent check.
pub fn count_vectors_brute(cls: &RankTwoClass, h: i64, a: i64, bound: i64) -> u64 {
    let g = cls.gram();
    let mut n = 0;
    for s in -bound..=bound {
        for t in -bound..=bound {
            if t == 0 {
                continue;
            }
            let sq = g[0][0] * s * s + 2 * g[0][1] * s * t + g[1][1] * t * t;
            let deg = g[0][0] * s + g[0][1] * t;
            if sq == 2 * h - 2 && deg == a {
                n += 1;
            }
        }
    }
    n
}

pub fn is_nonnegative_combination(c: &BTreeMap<RankTwoClass, Rational>) -> bool {
    c.values().all(|v| !v.is_negative())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn existence() {
        assert!(class_exists(1, 4, 0));
        assert!(class_exists(1, 5, 1));
        assert!(!class_exists(1, 3, 1));
    }

    #[test]
    fn counts_small() {
        let c = RankTwoClass::new(1, 4, 0).unwrap();
        assert_eq!(c.gram(), [[2, 0], [0, -2]]);
        assert_eq!(count_vectors(&c, 0, 0), 2);
        assert_eq!(count_vectors(&c, 1, 0), 0);
        assert_eq!(count_vectors(&c, 0, 5), 0);
    }

    #[test]
    fn counts_agree_with_brute_force() {
        for d in 1..=6u64 {
            for disc in 1..=40u64 {
                for cls in classes_with_disc(d, disc) {
                    for h in -3..=3 {
                        for a in -8..=8 {
                            assert_eq!(count_vectors(&cls, h, a), count_vectors_brute(&cls, h, a, 40), "{cls} h={h} a={a}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn d1_decompositions() {
        let parts = decompose_d(1, 0, 0).unwrap();
        let keys: Vec<(u64, u64)> = parts.keys().map(|c| (c.disc, c.delta)).collect();
        assert_eq!(keys, vec![(1, 1), (4, 0)]);
        let parts = decompose_d(1, 1, 1).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts.keys().next().unwrap().disc, 1);
    }

    #[test]
    fn round_trip() {
        let d = 1;
        let mut t = NlTable::new(d);
        for disc in 1..=20u64 {
            for cls in classes_with_disc(d, disc) {
                let p = t.p_in_terms_of_h(&cls).unwrap();
                // re-expand each H through decompose_d: must give the unit vector on cls
                let mut back: BTreeMap<RankTwoClass, Rational> = BTreeMap::new();
                for (idx, c) in &p.terms {
                    for (k, m) in t.h_in_terms_of_p(idx).unwrap() {
                        *back.entry(k).or_insert_with(Rational::zero) += c * Rational::from_integer(m.into());
                    }
                }
                back.retain(|_, v| !v.is_zero());
                assert_eq!(back.len(), 1);
                assert_eq!(back[&cls], Rational::one());
            }
        }
    }
}
