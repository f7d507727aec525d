//! Level-one modular forms: Eisenstein series, the discriminant Δ, and bases
//! of M_k, all as exact integer q-expansions.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::exact::QExpansion;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ClassicalError {
    #[error("unsupported Eisenstein weight {0}")]
    UnsupportedWeight(i64),
    #[error("weight {0} must be even and nonnegative")]
    BadWeight(i64),
    #[error("precision {0} too small")]
    Precision(usize),
    #[error("eta product and (E4^3 - E6^2)/1728 disagree at q^{0}")]
    DeltaMismatch(usize),
}

/// Dense integer q-series `Σ_{n < len} c_n q^n`.
pub type IntSeries = Vec<BigInt>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassicalForm {
    pub weight: i64,
    pub expansion: QExpansion,
}

impl ClassicalForm {
    fn from_ints(weight: i64, cs: &IntSeries) -> Self {
        ClassicalForm { weight, expansion: QExpansion::from_ints(cs) }
    }
}

pub fn sigma(k: u32, n: u64) -> BigInt {
    let mut s = BigInt::zero();
    let mut d = 1u64;
    while d * d <= n {
        if n % d == 0 {
            s += BigInt::from(d).pow(k);
            let e = n / d;
            if e != d {
                s += BigInt::from(e).pow(k);
            }
        }
        d += 1;
    }
    s
}

/// Truncated product of two dense series.
pub fn series_mul(a: &[BigInt], b: &[BigInt], len: usize) -> IntSeries {
    let mut out = vec![BigInt::zero(); len];
    for (i, x) in a.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            if !y.is_zero() {
                out[i + j] += x * y;
            }
        }
    }
    out
}

pub fn series_pow(a: &[BigInt], k: u32, len: usize) -> IntSeries {
    let mut out = vec![BigInt::zero(); len];
    if len > 0 {
        out[0] = BigInt::one();
    }
    let mut base = a[..a.len().min(len)].to_vec();
    base.resize(len, BigInt::zero());
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            out = series_mul(&out, &base, len);
        }
        e >>= 1;
        if e > 0 {
            base = series_mul(&base, &base, len);
        }
    }
    out
}

/// Inverse of a series with constant term ±1.
pub fn series_inverse_unit(a: &[BigInt], len: usize) -> IntSeries {
    assert!(a[0] == BigInt::one() || a[0] == -BigInt::one(), "leading coefficient must be a unit");
    let mut inv = vec![BigInt::zero(); len];
    if len == 0 {
        return inv;
    }
    inv[0] = a[0].clone();
    for n in 1..len {
        let mut acc = BigInt::zero();
        for j in 1..=n.min(a.len() - 1) {
            if !a[j].is_zero() {
                acc -= &a[j] * &inv[n - j];
            }
        }
        inv[n] = acc * &a[0];
    }
    inv
}

pub fn eisenstein_ints(k: i64, len: usize) -> Result<IntSeries, ClassicalError> {
    let c: i64 = match k {
        2 => -24,
        4 => 240,
        6 => -504,
        _ => return Err(ClassicalError::UnsupportedWeight(k)),
    };
    Ok((0..len)
        .map(|n| if n == 0 { BigInt::one() } else { BigInt::from(c) * sigma((k - 1) as u32, n as u64) })
        .collect())
}

/// `E_k` for k ∈ {2, 4, 6}, coefficients below `q^prec`.
pub fn eisenstein_qexp(k: i64, prec: usize) -> Result<ClassicalForm, ClassicalError> {
    if prec < 1 {
        return Err(ClassicalError::Precision(prec));
    }
    Ok(ClassicalForm::from_ints(k, &eisenstein_ints(k, prec)?))
}

/// Δ = q Π (1 − qⁿ)^24 as a dense series.
pub fn delta_ints(len: usize) -> IntSeries {
    if len == 0 {
        return vec![];
    }
    // Π (1 − qⁿ) by Euler's pentagonal theorem, then the 24th power
    let mut euler = vec![BigInt::zero(); len];
    let mut k: i64 = 0;
    loop {
        let mut any = false;
        for s in [k, -k] {
            let e = s * (3 * s - 1) / 2;
            if (e as usize) < len && e >= 0 {
                any = true;
                euler[e as usize] = if k % 2 == 0 { BigInt::one() } else { -BigInt::one() };
            }
            if k == 0 {
                break;
            }
        }
        if !any && k > 0 {
            break;
        }
        k += 1;
    }
    let p = series_pow(&euler, 24, len);
    let mut out = vec![BigInt::zero(); len];
    for n in 1..len {
        out[n] = p[n - 1].clone();
    }
    out
}

/// Δ, cross-checked against `(E4³ − E6²)/1728`.
pub fn delta_qexp(prec: usize) -> Result<ClassicalForm, ClassicalError> {
    if prec < 2 {
        return Err(ClassicalError::Precision(prec));
    }
    let d = delta_ints(prec);
    let e4 = eisenstein_ints(4, prec)?;
    let e6 = eisenstein_ints(6, prec)?;
    let a = series_pow(&e4, 3, prec);
    let b = series_pow(&e6, 2, prec);
    for n in 0..prec {
        if (&a[n] - &b[n]) != &d[n] * BigInt::from(1728) {
            return Err(ClassicalError::DeltaMismatch(n));
        }
    }
    Ok(ClassicalForm::from_ints(12, &d))
}

fn check_weight(k: i64) -> Result<(), ClassicalError> {
    if k < 0 || k % 2 != 0 {
        Err(ClassicalError::BadWeight(k))
    } else {
        Ok(())
    }
}

/// Exponent pairs (a, b) with 4a + 6b = k, in increasing a.
pub fn monomial_exponents(k: i64) -> Vec<(u32, u32)> {
    if k < 0 || k % 2 != 0 {
        return vec![];
    }
    (0..=k / 4).filter(|a| (k - 4 * a) % 6 == 0).map(|a| (a as u32, ((k - 4 * a) / 6) as u32)).collect()
}

pub fn dim_mk(k: i64) -> usize {
    monomial_exponents(k).len()
}

/// The monomials `E4^a E6^b` spanning M_k.
pub fn mform_basis(k: i64, prec: usize) -> Result<Vec<ClassicalForm>, ClassicalError> {
    check_weight(k)?;
    let e4 = eisenstein_ints(4, prec)?;
    let e6 = eisenstein_ints(6, prec)?;
    Ok(monomial_exponents(k)
        .into_iter()
        .map(|(a, b)| ClassicalForm::from_ints(k, &series_mul(&series_pow(&e4, a, prec), &series_pow(&e6, b, prec), prec)))
        .collect())
}

/// Basis `Δ^j · E4^a E6^b` of M_k with distinct valuations `j = 0..dim`;
/// integral and better conditioned than plain monomials.
pub fn valuation_basis(k: i64, len: usize) -> Result<Vec<(usize, IntSeries)>, ClassicalError> {
    check_weight(k)?;
    let dim = dim_mk(k);
    let e4 = eisenstein_ints(4, len)?;
    let e6 = eisenstein_ints(6, len)?;
    let delta = delta_ints(len);
    let mut out = Vec::with_capacity(dim);
    for j in 0..dim {
        let rest = k - 12 * j as i64;
        let (a, b) = monomial_exponents(rest)[0];
        let e = series_mul(&series_pow(&e4, a, len), &series_pow(&e6, b, len), len);
        out.push((j, series_mul(&series_pow(&delta, j as u32, len), &e, len)));
    }
    Ok(out)
}

/// Truncated `E2` as a rational q-expansion.
pub fn e2(prec: usize) -> QExpansion {
    QExpansion::from_ints(&eisenstein_ints(2, prec).expect("weight 2 supported"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> IntSeries {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn eisenstein_examples() {
        assert_eq!(eisenstein_ints(2, 3).unwrap(), ints(&[1, -24, -72]));
        assert_eq!(eisenstein_ints(4, 3).unwrap(), ints(&[1, 240, 2160]));
        assert_eq!(eisenstein_ints(6, 2).unwrap(), ints(&[1, -504]));
        assert!(eisenstein_ints(8, 2).is_err());
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_ints(4), ints(&[0, 1, -24, 252]));
        let d = delta_qexp(12).unwrap();
        assert_eq!(d.weight, 12);
    }

    #[test]
    fn delta_inverse() {
        let d = delta_ints(10);
        let shifted: Vec<BigInt> = d[1..].to_vec();
        let inv = series_inverse_unit(&shifted, 9);
        let one = series_mul(&shifted, &inv, 9);
        assert_eq!(one[0], BigInt::one());
        assert!(one[1..].iter().all(|x| x.is_zero()));
    }

    #[test]
    fn basis_counts() {
        assert_eq!(mform_basis(0, 3).unwrap().len(), 1);
        assert_eq!(mform_basis(12, 3).unwrap().len(), 2);
        assert_eq!(mform_basis(10, 3).unwrap().len(), 1);
        assert!(mform_basis(7, 3).is_err());
        for k in (0..=60).step_by(2) {
            let classical = (k / 12) as usize + usize::from(k % 12 != 2);
            assert_eq!(dim_mk(k), classical, "k={k}");
        }
    }

    #[test]
    fn cube_minus_square() {
        let e4 = eisenstein_ints(4, 3).unwrap();
        let e6 = eisenstein_ints(6, 3).unwrap();
        let a = series_pow(&e4, 3, 3);
        let b = series_pow(&e6, 2, 3);
        assert_eq!(&a[0] - &b[0], BigInt::zero());
        assert_eq!(&a[1] - &b[1], BigInt::from(1728));
    }

    #[test]
    fn valuation_basis_shape() {
        let b = valuation_basis(24, 6).unwrap();
        assert_eq!(b.len(), 3);
        for (j, s) in &b {
            assert!(s[..*j].iter().all(|x| x.is_zero()));
            assert_eq!(s[*j], BigInt::one());
        }
    }
}
