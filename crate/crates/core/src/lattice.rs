//! Even positive definite lattices given by Gram matrices: discriminant
//! modules via Smith normal form, vector-valued theta series by short-vector
//! enumeration, the genus test for the cusp lattices `2E8 ⊕ ⟨2m⟩`, and Kneser
//! neighbours.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{big, hermite_normal_form, int, rat, smith_normal_form, IntMatrix, QExpansion, Rational};
use crate::jacobi::{GridSign, VVForm};
use crate::par;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("Gram matrix is not square and symmetric")]
    NotSymmetric,
    #[error("Gram matrix has an odd diagonal entry; the lattice is not even")]
    NotEven,
    #[error("Gram matrix is degenerate")]
    Degenerate,
    #[error("lattice is not positive definite")]
    NotPositive,
    #[error("discriminant group {0:?} is not cyclic")]
    NotCyclic(Vec<String>),
    #[error("enumeration would exceed the budget of {0} vectors")]
    Budget(u64),
    #[error("generators do not span an integral even lattice")]
    BadGenerators,
    #[error("no isotropic vector modulo {0} found")]
    NoIsotropic(u64),
    #[error("{0} divides the determinant")]
    BadPrime(u64),
    #[error("malformed Gram file: {0}")]
    Json(String),
}

/// Symmetric integer Gram matrix with even diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GramLattice {
    pub gram: Vec<Vec<i64>>,
}

fn to_int_matrix(g: &[Vec<i64>]) -> IntMatrix {
    g.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

/// `A = Uᵀ·diag(D)·U` with `U` unit upper triangular, returned packed as in
/// the classical square-completion: diagonal holds `D`, upper part holds `U`.
fn square_completion(a: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let n = a.len();
    let mut q = a.to_vec();
    for i in 0..n {
        if q[i][i].is_zero() {
            return q;
        }
        for j in i + 1..n {
            q[j][i] = q[i][j].clone();
            q[i][j] = &q[i][j] / &q[i][i];
        }
        for k in i + 1..n {
            for l in k..n {
                let s = &q[k][i] * &q[i][l];
                q[k][l] -= s;
            }
        }
    }
    q
}

fn rat_inverse(g: &[Vec<i64>]) -> Option<Vec<Vec<Rational>>> {
    let n = g.len();
    let mut a: Vec<Vec<Rational>> = g
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row: Vec<Rational> = r.iter().map(|&x| int(x)).collect();
            row.extend((0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&i| !a[i][c].is_zero())?;
        a.swap(c, p);
        let inv = a[c][c].recip();
        for x in a[c].iter_mut() {
            *x *= &inv;
        }
        for i in 0..n {
            if i != c && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..2 * n {
                    let s = &f * &a[c][j];
                    a[i][j] -= s;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

impl GramLattice {
    pub fn new(gram: Vec<Vec<i64>>) -> Result<Self, LatticeError> {
        let n = gram.len();
        if gram.iter().any(|r| r.len() != n) || (0..n).any(|i| (0..n).any(|j| gram[i][j] != gram[j][i])) {
            return Err(LatticeError::NotSymmetric);
        }
        if (0..n).any(|i| gram[i][i] % 2 != 0) {
            return Err(LatticeError::NotEven);
        }
        let g = GramLattice { gram };
        if g.det().is_zero() {
            return Err(LatticeError::Degenerate);
        }
        Ok(g)
    }

    pub fn rank(&self) -> usize {
        self.gram.len()
    }

    pub fn det(&self) -> BigInt {
        crate::exact::int_det(&to_int_matrix(&self.gram))
    }

    pub fn is_positive_definite(&self) -> bool {
        let a: Vec<Vec<Rational>> = self.gram.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect();
        let q = square_completion(&a);
        (0..self.rank()).all(|i| q[i][i].is_positive())
    }

    /// Norm `vᵀGv` of a vector in basis coordinates.
    pub fn norm(&self, v: &[i64]) -> i64 {
        let n = self.rank();
        (0..n).map(|i| (0..n).map(|j| v[i] * self.gram[i][j] * v[j]).sum::<i64>()).sum()
    }

    pub fn direct_sum(&self, other: &GramLattice) -> GramLattice {
        let (a, b) = (self.rank(), other.rank());
        let mut g = vec![vec![0; a + b]; a + b];
        for i in 0..a {
            g[i][..a].copy_from_slice(&self.gram[i]);
        }
        for i in 0..b {
            g[a + i][a..].copy_from_slice(&other.gram[i]);
        }
        GramLattice { gram: g }
    }

    /// Lattice spanned by rational vectors under the standard dot product.
    pub fn from_vectors(vectors: &[Vec<Rational>]) -> Result<Self, LatticeError> {
        let den = vectors.iter().flatten().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let scaled: IntMatrix =
            vectors.iter().map(|v| v.iter().map(|x| (x * big(&den)).to_integer()).collect()).collect();
        let basis = hermite_normal_form(&scaled);
        let d2 = &den * &den;
        let n = basis.len();
        let mut gram = vec![vec![0i64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let dot: BigInt = basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
                if !(&dot % &d2).is_zero() {
                    return Err(LatticeError::BadGenerators);
                }
                gram[i][j] = (dot / &d2).to_i64().ok_or(LatticeError::BadGenerators)?;
            }
        }
        GramLattice::new(gram).map_err(|_| LatticeError::BadGenerators)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.gram).expect("integers serialise")
    }

    pub fn from_json(text: &str) -> Result<Self, LatticeError> {
        let gram: Vec<Vec<i64>> = serde_json::from_str(text).map_err(|e| LatticeError::Json(e.to_string()))?;
        GramLattice::new(gram)
    }
}

fn half(n: usize) -> Vec<Rational> {
    vec![rat(1, 2); n]
}

fn unit(n: usize, i: usize, s: i64) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); n];
    v[i] = int(s);
    v
}

fn add(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Roots `e_i − e_{i+1}` and `e_{n−1} + e_n` of `D_n` in `R^n`.
fn dn_roots(n: usize) -> Vec<Vec<Rational>> {
    let mut out: Vec<Vec<Rational>> = (0..n - 1).map(|i| add(&unit(n, i, 1), &unit(n, i + 1, -1))).collect();
    out.push(add(&unit(n, n - 2, 1), &unit(n, n - 1, 1)));
    out
}

pub fn a1() -> GramLattice {
    GramLattice { gram: vec![vec![2]] }
}

/// Rank-one lattice `⟨2m⟩`.
pub fn rank_one(m: u64) -> GramLattice {
    GramLattice { gram: vec![vec![2 * m as i64]] }
}

pub fn d_n(n: usize) -> GramLattice {
    GramLattice::from_vectors(&dn_roots(n)).expect("D_n is even")
}

pub fn e8() -> GramLattice {
    let mut gens = dn_roots(8);
    gens.push(half(8));
    GramLattice::from_vectors(&gens).expect("E8 is even")
}

/// The even unimodular lattice `D16⁺`.
pub fn d16_plus() -> GramLattice {
    let mut gens = dn_roots(16);
    gens.push(half(16));
    GramLattice::from_vectors(&gens).expect("D16+ is even")
}

/// `(E7 ⊕ D10)⁺`: glue of the spinor class of `D10` (norm 5/2) with the
/// nontrivial class of `E7` (norm 3/2). Rank 17, determinant 2.
pub fn e7_d10_plus() -> GramLattice {
    // E7 = {v ∈ E8 : v·(e7 + e8) = 0} inside the last 8 of 18 coordinates.
    let pad = |v: Vec<Rational>, off: usize| {
        let mut w = vec![Rational::zero(); 18];
        for (i, x) in v.into_iter().enumerate() {
            w[off + i] = x;
        }
        w
    };
    let mut gens: Vec<Vec<Rational>> = dn_roots(10).into_iter().map(|v| pad(v, 0)).collect();
    // D6 on the first six coordinates, the root e7 − e8, and one half-vector
    let mut e7: Vec<Vec<Rational>> = dn_roots(6)
        .into_iter()
        .map(|mut v| {
            v.extend([int(0), int(0)]);
            v
        })
        .collect();
    e7.push(add(&unit(8, 6, 1), &unit(8, 7, -1)));
    let mut h = half(8);
    h[0] = rat(-1, 2);
    h[7] = rat(-1, 2);
    e7.push(h);
    gens.extend(e7.into_iter().map(|v| pad(v, 10)));
    let mut glue = half(10);
    glue.extend([int(1), int(0), int(0), int(0), int(0), int(0), rat(-1, 2), rat(1, 2)]);
    gens.push(glue);
    GramLattice::from_vectors(&gens).expect("glue is even")
}

/// Named lattices shipped with the library.
pub fn library() -> Vec<(&'static str, GramLattice)> {
    let e8e8 = e8().direct_sum(&e8());
    vec![
        ("a1", a1()),
        ("e8", e8()),
        ("d16_plus", d16_plus()),
        ("e8e8_a1", e8e8.direct_sum(&a1())),
        ("d16_plus_a1", d16_plus().direct_sum(&a1())),
        ("e7_d10_plus", e7_d10_plus()),
    ]
}

/// `2E8 ⊕ ⟨2m⟩`, the standard representative of the cusp genus.
pub fn standard_cusp_lattice(m: u64) -> GramLattice {
    e8().direct_sum(&e8()).direct_sum(&rank_one(m))
}

/// Finite quadratic module `L∨/L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscModule {
    /// Nontrivial invariant factors.
    pub invariants: Vec<BigInt>,
    /// Generators as dual vectors in basis coordinates.
    pub generators: Vec<Vec<Rational>>,
    /// `q(g) = g²/2 mod 1` for each generator.
    pub q_values: Vec<Rational>,
    /// Rows of the Smith transform `U` for the nontrivial factors: the class of
    /// the dual vector `G⁻¹w` has coordinates `(U w)_k mod d_k`.
    class_rows: Vec<Vec<BigInt>>,
}

fn frac(x: &Rational) -> Rational {
    x - x.floor()
}

pub fn disc_module(g: &GramLattice) -> DiscModule {
    let snf = smith_normal_form(&to_int_matrix(&g.gram));
    let diag = snf.diagonal();
    let n = g.rank();
    let mut out = DiscModule { invariants: vec![], generators: vec![], q_values: vec![], class_rows: vec![] };
    for (k, dk) in diag.iter().enumerate() {
        let dk = dk.abs();
        if dk.is_one() {
            continue;
        }
        let v: Vec<Rational> = (0..n).map(|i| Rational::new(snf.v[i][k].clone(), dk.clone())).collect();
        let mut norm = Rational::zero();
        for i in 0..n {
            for j in 0..n {
                norm += &v[i] * &v[j] * int(g.gram[i][j]);
            }
        }
        out.q_values.push(frac(&(norm / int(2))));
        out.generators.push(v);
        out.class_rows.push(snf.u[k].clone());
        out.invariants.push(dk);
    }
    out
}

impl DiscModule {
    pub fn order(&self) -> BigInt {
        self.invariants.iter().product()
    }

    pub fn is_cyclic(&self) -> bool {
        self.invariants.len() <= 1
    }

    /// Class of the dual vector `G⁻¹w` in generator coordinates.
    pub fn class_of(&self, w: &[i64]) -> Vec<BigInt> {
        self.class_rows
            .iter()
            .zip(&self.invariants)
            .map(|(row, d)| row.iter().zip(w).map(|(a, &b)| a * b).sum::<BigInt>().mod_floor(d))
            .collect()
    }
}

fn gcd_u(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// Unit `u` modulo `2m` with `u²·q ≡ 1/4m (mod 1)`, when the cyclic module is
/// isometric to `x ↦ x²/4m`.
fn normalising_unit(q: &Rational, m: u64) -> Option<u64> {
    let n = 2 * m;
    let target = rat(1, 4 * m as i64);
    (1..n.max(2)).filter(|&u| gcd_u(u, n) == 1).find(|&u| frac(&(q * int((u * u) as i64))) == target)
}

/// True iff `g` lies in the genus of `2E8 ⊕ ⟨2m⟩`: rank 17, positive definite,
/// even, with discriminant module isometric to `(Z/2mZ, x²/4m)`.
pub fn genus_check(g: &GramLattice, m: u64) -> bool {
    if GramLattice::new(g.gram.clone()).is_err() || g.rank() != 17 || !g.is_positive_definite() {
        return false;
    }
    let dm = disc_module(g);
    if !dm.is_cyclic() || dm.order() != BigInt::from(2 * m) {
        return false;
    }
    match dm.q_values.first() {
        Some(q) => normalising_unit(q, m).is_some(),
        None => m == 0,
    }
}

/// Vector-valued theta series `Θ_γ = Σ_{v ≡ γ} q^{v²/2}` of a lattice with cyclic
/// discriminant group. Components are indexed by multiples of a generator `g₀`,
/// normalised so that `q(g₀) = 1/(2·|D|)` when possible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaSeries {
    pub form: VVForm,
    /// `q(g₀)` of the indexing generator.
    pub generator_q: Rational,
    pub normalised: bool,
}

impl ThetaSeries {
    pub fn coeff(&self, gamma: i64, exponent: &Rational) -> Rational {
        self.form.component(gamma).coeff(exponent).expect("within precision")
    }

    pub fn prec(&self) -> Rational {
        self.form.components.iter().map(|c| c.prec().clone()).min().unwrap_or_else(Rational::zero)
    }

    /// Componentwise product with `E2`.
    pub fn times_e2(&self) -> VVForm {
        let len = self.prec().ceil().to_integer().to_usize().unwrap_or(0) + 1;
        let e2 = crate::classical::e2(len);
        let comps = self
            .form
            .components
            .iter()
            .map(|c| {
                let mut s = QExpansion::zero(c.denom(), c.prec().clone());
                for (e, v) in c.terms() {
                    for (k, a) in e2.terms() {
                        let ex = e + k * c.denom() as i64;
                        let cur = s.coeff(&c.exponent(ex)).unwrap_or_else(|_| Rational::zero());
                        s.set(ex, cur + v * a);
                    }
                }
                s
            })
            .collect();
        VVForm { modulus: self.form.modulus, sign: GridSign::Plus, components: comps }
    }
}

/// Counts dual vectors of norm `< 2·prec` by class and norm.
struct Enumerator {
    n: usize,
    diag: Vec<f64>,
    upper: Vec<Vec<f64>>,
    adj: Vec<Vec<i64>>,
    bound: f64,
    smax: i64,
}

impl Enumerator {
    fn new(g: &GramLattice, prec: &Rational) -> Result<(Self, i64), LatticeError> {
        let n = g.rank();
        let inv = rat_inverse(&g.gram).ok_or(LatticeError::Degenerate)?;
        let det = g.det().abs();
        let det_i = det.to_i64().ok_or(LatticeError::Degenerate)?;
        let adj: Vec<Vec<i64>> = inv
            .iter()
            .map(|r| r.iter().map(|x| (x * big(&det)).to_integer().to_i64().expect("small adjugate")).collect())
            .collect();
        let q = square_completion(&inv);
        if (0..n).any(|i| !q[i][i].is_positive()) {
            return Err(LatticeError::NotPositive);
        }
        let f = |x: &Rational| x.to_f64().unwrap_or(f64::NAN);
        let diag = (0..n).map(|i| f(&q[i][i])).collect();
        let upper = (0..n).map(|i| (0..n).map(|j| if j > i { f(&q[i][j]) } else { 0.0 }).collect()).collect();
        // v²/2 = s/(2·det) with s = wᵀ adj w; keep s < 2·det·prec
        let smax = (prec * int(2 * det_i)).ceil().to_integer().to_i64().expect("small");
        let bound = smax as f64 / det_i as f64;
        Ok((Enumerator { n, diag, upper, adj, bound: bound * (1.0 + 1e-9) + 1e-9, smax }, det_i))
    }

    fn exact_s(&self, w: &[i64]) -> i64 {
        let mut s = 0i64;
        for i in 0..self.n {
            if w[i] == 0 {
                continue;
            }
            let row: i64 = (0..self.n).map(|j| self.adj[i][j] * w[j]).sum();
            s += w[i] * row;
        }
        s
    }

    /// Visits all `w` with the top coordinate fixed, calling `f(w, s)` for exact `s < smax`.
    fn walk(&self, top: i64, f: &mut dyn FnMut(&[i64], i64)) {
        let n = self.n;
        let mut w = vec![0i64; n];
        w[n - 1] = top;
        let t = self.diag[n - 1] * (top as f64).powi(2);
        if t > self.bound {
            return;
        }
        self.rec(n - 1, &mut w, self.bound - t, f);
    }

    fn rec(&self, level: usize, w: &mut Vec<i64>, rem: f64, f: &mut dyn FnMut(&[i64], i64)) {
        if level == 0 {
            let s = self.exact_s(w);
            if s < self.smax {
                f(w, s);
            }
            return;
        }
        let i = level - 1;
        let c: f64 = -(i + 1..self.n).map(|j| self.upper[i][j] * w[j] as f64).sum::<f64>();
        let r = (rem.max(0.0) / self.diag[i]).sqrt();
        let lo = (c - r - 1e-9).ceil() as i64;
        let hi = (c + r + 1e-9).floor() as i64;
        for x in lo..=hi {
            let t = self.diag[i] * (x as f64 - c).powi(2);
            if t > rem + 1e-9 {
                continue;
            }
            w[i] = x;
            self.rec(i, w, rem - t, f);
        }
        w[i] = 0;
    }

    fn top_range(&self) -> Vec<i64> {
        let r = (self.bound / self.diag[self.n - 1]).sqrt().floor() as i64;
        (-r..=r).collect()
    }
}

/// Default cap on enumerated vectors.
pub const THETA_BUDGET: u64 = 50_000_000;

/// Theta series with all exponents `< prec`.
pub fn theta_series(g: &GramLattice, prec: &Rational) -> Result<ThetaSeries, LatticeError> {
    theta_series_budget(g, prec, THETA_BUDGET)
}

pub fn theta_series_budget(g: &GramLattice, prec: &Rational, budget: u64) -> Result<ThetaSeries, LatticeError> {
    let dm = disc_module(g);
    if !dm.is_cyclic() {
        return Err(LatticeError::NotCyclic(dm.invariants.iter().map(|x| x.to_string()).collect()));
    }
    let order = dm.order().to_u64().expect("small group");
    let (en, det) = Enumerator::new(g, prec)?;
    let (gen_q, unit_inv, normalised) = match dm.q_values.first() {
        None => (Rational::zero(), 1u64, true),
        Some(q) => match (order % 2 == 0).then(|| normalising_unit(q, order / 2)).flatten() {
            Some(u) => {
                let inv = (1..order).find(|&x| (x * u) % order == 1).expect("unit");
                (rat(1, 2 * order as i64), inv, true)
            }
            None => (q.clone(), 1, false),
        },
    };
    let width = en.smax.max(0) as usize;
    let tops = en.top_range();
    let tables: Vec<Result<Vec<u64>, LatticeError>> = par::map(&tops, |&top| {
        let mut table = vec![0u64; order as usize * width];
        let mut count = 0u64;
        let mut over = false;
        en.walk(top, &mut |w, s| {
            count += 1;
            if count > budget {
                over = true;
                return;
            }
            let cls = dm.class_of(w).first().map_or(0, |c| c.to_u64().expect("small"));
            let x = (cls * unit_inv) % order.max(1);
            table[x as usize * width + s as usize] += 1;
        });
        if over {
            Err(LatticeError::Budget(budget))
        } else {
            Ok(table)
        }
    });
    let mut total = vec![0u64; order as usize * width];
    for t in tables {
        for (a, b) in total.iter_mut().zip(t?) {
            *a += b;
        }
    }
    if total.iter().sum::<u64>() > budget {
        return Err(LatticeError::Budget(budget));
    }
    let denom = 2 * det as u64;
    let comps = (0..order.max(1) as usize)
        .map(|x| {
            let terms = (0..width).filter(|&s| total[x * width + s] > 0).map(|s| (s as i64, int(total[x * width + s] as i64)));
            QExpansion::from_terms(denom, prec.clone(), terms)
        })
        .collect();
    Ok(ThetaSeries { form: VVForm { modulus: order.max(1), sign: GridSign::Plus, components: comps }, generator_q: gen_q, normalised })
}

/// Kneser `p`-neighbour for an odd prime `p ∤ det G`. Candidate vectors are
/// tried in a deterministic order, skipping the first `skip` isotropic ones.
pub fn neighbor_step(g: &GramLattice, p: u64, skip: usize) -> Result<GramLattice, LatticeError> {
    let pi = p as i64;
    if p == 2 || (g.det() % BigInt::from(p)).is_zero() {
        return Err(LatticeError::BadPrime(p));
    }
    let n = g.rank();
    let half_norm = |v: &[i64]| g.norm(v) / 2;
    let pair = |a: &[i64], b: &[i64]| -> i64 { (0..n).map(|i| (0..n).map(|j| a[i] * g.gram[i][j] * b[j]).sum::<i64>()).sum() };
    // Small vectors mod p with Q(v) ≡ 0 (mod p), in lexicographic order of supports.
    let mut found = 0;
    let mut candidate = None;
    'search: for i in 0..n {
        for j in i..n {
            for a in 1..pi {
                for b in 0..pi {
                    if i == j && b > 0 {
                        continue;
                    }
                    let mut v = vec![0i64; n];
                    v[i] += a;
                    v[j] += b;
                    if half_norm(&v).rem_euclid(pi) != 0 {
                        continue;
                    }
                    if found == skip {
                        candidate = Some(v);
                        break 'search;
                    }
                    found += 1;
                }
            }
        }
    }
    let mut v = candidate.ok_or(LatticeError::NoIsotropic(p))?;
    // lift so that Q(v) ≡ 0 (mod p²)
    let k = (0..n).find(|&k| pair(&v, &unit_i(n, k)).rem_euclid(pi) != 0).ok_or(LatticeError::NoIsotropic(p))?;
    let t = half_norm(&v) / pi;
    let b = pair(&v, &unit_i(n, k)).rem_euclid(pi);
    let binv = (1..pi).find(|&x| (x * b) % pi == 1).expect("p prime");
    let c = (-t * binv).rem_euclid(pi);
    v[k] += pi * c;
    debug_assert_eq!(half_norm(&v).rem_euclid(pi * pi), 0);
    // L_v = {x : (x, v) ≡ 0 mod p}, spanned by p·e_i and e_i − t_i e_k
    let bk = pair(&v, &unit_i(n, k)).rem_euclid(pi);
    let bkinv = (1..pi).find(|&x| (x * bk) % pi == 1).expect("p prime");
    let mut gens: Vec<Vec<Rational>> = Vec::new();
    for i in 0..n {
        let mut e = vec![Rational::zero(); n];
        if i == k {
            e[k] = int(pi);
        } else {
            let ti = (pair(&v, &unit_i(n, i)) * bkinv).rem_euclid(pi);
            e[i] = int(1);
            e[k] = int(-ti);
        }
        gens.push(e);
    }
    gens.push(v.iter().map(|&x| rat(x, pi)).collect());
    // Gram of generators in the ambient form G
    let den = BigInt::from(p);
    let scaled: IntMatrix = gens.iter().map(|v| v.iter().map(|x| (x * big(&den)).to_integer()).collect()).collect();
    let basis = hermite_normal_form(&scaled);
    let d2 = &den * &den;
    let mut gram = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = BigInt::zero();
            for a in 0..n {
                for b in 0..n {
                    s += &basis[i][a] * &basis[j][b] * g.gram[a][b];
                }
            }
            if !(&s % &d2).is_zero() {
                return Err(LatticeError::BadGenerators);
            }
            gram[i][j] = (s / &d2).to_i64().ok_or(LatticeError::BadGenerators)?;
        }
    }
    GramLattice::new(gram)
}

fn unit_i(n: usize, i: usize) -> Vec<i64> {
    let mut e = vec![0; n];
    e[i] = 1;
    e
}

/// Number of roots (norm-2 vectors) of a positive definite lattice.
pub fn root_count(g: &GramLattice) -> Result<u64, LatticeError> {
    let mut count = 0u64;
    let n = g.rank();
    let a: Vec<Vec<Rational>> = g.gram.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect();
    let sc = square_completion(&a);
    if (0..n).any(|i| !sc[i][i].is_positive()) {
        return Err(LatticeError::NotPositive);
    }
    let diag: Vec<f64> = (0..n).map(|i| sc[i][i].to_f64().unwrap()).collect();
    let upper: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if j > i { sc[i][j].to_f64().unwrap() } else { 0.0 }).collect()).collect();
    fn rec(level: usize, w: &mut [i64], rem: f64, diag: &[f64], upper: &[Vec<f64>], g: &GramLattice, count: &mut u64) {
        let n = w.len();
        if level == 0 {
            if g.norm(w) == 2 {
                *count += 1;
            }
            return;
        }
        let i = level - 1;
        let c: f64 = -(i + 1..n).map(|j| upper[i][j] * w[j] as f64).sum::<f64>();
        let r = (rem.max(0.0) / diag[i]).sqrt();
        for x in (c - r - 1e-9).ceil() as i64..=(c + r + 1e-9).floor() as i64 {
            let t = diag[i] * (x as f64 - c).powi(2);
            w[i] = x;
            rec(i, w, rem - t, diag, upper, g, count);
        }
        w[i] = 0;
    }
    let mut w = vec![0i64; n];
    rec(n, &mut w, 2.0 + 1e-9, &diag, &upper, g, &mut count);
    Ok(count)
}

/// The 1-cusp stratum of imprimitivity `N`: `H = ⟨2d/N⟩`, `H^⊥ = NZ/2dZ`,
/// `p(a) = a/N mod 2m` with `m = d/N²`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuspStratum {
    pub d: u64,
    pub n: u64,
    pub m: u64,
    pub h: Vec<u64>,
}

impl CuspStratum {
    pub fn new(d: u64, n: u64) -> Option<Self> {
        if n == 0 || d % (n * n) != 0 {
            return None;
        }
        let step = 2 * d / n;
        Some(CuspStratum { d, n, m: d / (n * n), h: (0..n).map(|i| i * step).collect() })
    }

    pub fn in_h_perp(&self, a: i64) -> bool {
        a.rem_euclid(self.n as i64) == 0
    }

    /// `p(a)` as a representative in `0..2m`.
    pub fn p(&self, a: i64) -> Option<u64> {
        self.in_h_perp(a).then(|| (a / self.n as i64).rem_euclid(2 * self.m as i64) as u64)
    }
}

pub fn cusp_strata(d: u64) -> Vec<CuspStratum> {
    (1..).take_while(|n| n * n <= d).filter_map(|n| CuspStratum::new(d, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discriminant_modules() {
        let a = disc_module(&a1());
        assert_eq!(a.invariants, vec![BigInt::from(2)]);
        assert_eq!(a.q_values, vec![rat(1, 4)]);
        assert!(disc_module(&e8()).invariants.is_empty());
        for m in 1..6 {
            let r = disc_module(&rank_one(m));
            assert_eq!(r.order(), BigInt::from(2 * m));
            assert_eq!(r.q_values, vec![rat(1, 4 * m as i64)]);
        }
    }

    #[test]
    fn library_shapes() {
        assert_eq!(e8().det(), BigInt::one());
        assert_eq!(d16_plus().det(), BigInt::one());
        let g = e7_d10_plus();
        assert_eq!((g.rank(), g.det()), (17, BigInt::from(2)));
        assert_eq!(root_count(&e8()).unwrap(), 240);
        assert_eq!(root_count(&d16_plus()).unwrap(), 480);
        assert_eq!(root_count(&g).unwrap(), 126 + 180);
    }

    #[test]
    fn genus() {
        let e8e8 = e8().direct_sum(&e8());
        assert!(genus_check(&e8e8.direct_sum(&a1()), 1));
        assert!(!genus_check(&e8e8.direct_sum(&rank_one(2)), 1));
        assert!(genus_check(&e7_d10_plus(), 1));
        assert!(genus_check(&d16_plus().direct_sum(&a1()), 1));
        for m in 1..8 {
            assert!(genus_check(&standard_cusp_lattice(m), m));
        }
    }

    #[test]
    fn small_theta_series() {
        let t = theta_series(&a1(), &int(3)).unwrap();
        assert_eq!(t.coeff(0, &int(0)), int(1));
        assert_eq!(t.coeff(0, &int(1)), int(2));
        assert_eq!(t.coeff(0, &int(2)), int(0));
        assert_eq!(t.coeff(1, &rat(1, 4)), int(2));
        assert_eq!(t.coeff(1, &rat(9, 4)), int(2));
        let t = theta_series(&e8(), &int(3)).unwrap();
        assert_eq!(t.coeff(0, &int(1)), int(240));
        assert_eq!(t.coeff(0, &int(2)), int(2160));
    }

    #[test]
    fn theta_of_sum_is_product() {
        let prec = int(3);
        let s = theta_series(&e8().direct_sum(&a1()), &prec).unwrap();
        let a = theta_series(&a1(), &prec).unwrap();
        let e8c = [1i64, 240, 2160];
        for gamma in 0..2i64 {
            for k in 0..12i64 {
                let x = rat(k, 4);
                if x >= prec {
                    break;
                }
                let mut expect = Rational::zero();
                for (j, c) in e8c.iter().enumerate() {
                    let rest = &x - int(j as i64);
                    if !rest.is_negative() {
                        expect += a.coeff(gamma, &rest) * int(*c);
                    }
                }
                assert_eq!(s.coeff(gamma, &x), expect, "γ={gamma} x={x}");
            }
        }
    }

    #[test]
    fn strata() {
        let s = cusp_strata(1);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].p(1), Some(1));
        let s = cusp_strata(4);
        assert_eq!(s.iter().map(|x| x.n).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(s[1].h, vec![0, 4]);
        assert_eq!((0..8).filter(|&a| s[1].in_h_perp(a)).collect::<Vec<_>>(), vec![0, 2, 4, 6]);
        assert_eq!(s[1].p(6), Some(1));
        let s = cusp_strata(9);
        assert_eq!(s[1].n, 3);
        assert_eq!(s[1].p(3), Some(1));
        assert_eq!(s[1].p(4), None);
    }

    #[test]
    fn neighbours_stay_in_genus() {
        let n = neighbor_step(&e8(), 3, 0).unwrap();
        assert_eq!(n.det(), BigInt::one());
        assert_eq!(theta_series(&n, &int(3)).unwrap(), theta_series(&e8(), &int(3)).unwrap());
        let k = standard_cusp_lattice(1);
        for skip in 0..3 {
            assert!(genus_check(&neighbor_step(&k, 3, skip).unwrap(), 1));
        }
        assert_eq!(neighbor_step(&k, 2, 0), Err(LatticeError::BadPrime(2)));
    }
}
