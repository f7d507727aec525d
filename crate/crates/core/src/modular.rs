//! Multimodular linear algebra: left kernels of integer matrices computed
//! modulo word-sized primes, lifted by CRT and rational reconstruction, and
//! verified exactly over the integers before being returned.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::exact::Rational;
use crate::par;

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, p);
        }
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    r
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Deterministic Miller–Rabin for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Primes below 2^62, descending.
pub fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut n = (1u64 << 62) - 1;
    while out.len() < count {
        if is_prime_u64(n) {
            out.push(n);
        }
        n -= 2;
    }
    out
}

fn reduce(x: &BigInt, p: u64) -> u64 {
    let r = x.mod_floor(&BigInt::from(p));
    r.to_u64().expect("residue fits")
}

/// Rational `n/d` with `n ≡ a·d (mod m)`, `|n|, d ≤ sqrt(m/2)`.
pub fn rational_reconstruct(a: &BigInt, m: &BigInt) -> Option<(BigInt, BigInt)> {
    let bound = (m / BigInt::from(2)).sqrt();
    let (mut r0, mut r1) = (m.clone(), a.mod_floor(m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let t2 = &t0 - &q * &t1;
        r0 = std::mem::replace(&mut r1, r2);
        t0 = std::mem::replace(&mut t1, t2);
    }
    if t1.is_zero() || t1.abs() > bound {
        return None;
    }
    let (n, d) = if t1.is_negative() { (-r1, -t1) } else { (r1, t1) };
    if n.gcd(&d).is_one() {
        Some((n, d))
    } else {
        None
    }
}

/// Reduced row echelon form of `a` (rows × cols) modulo `p`, pivots and nonzero rows.
fn rref_mod(a: &[Vec<u64>], cols: usize, p: u64) -> (Vec<usize>, Vec<Vec<u64>>) {
    let mut m: Vec<Vec<u64>> = a.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == m.len() {
            break;
        }
        let Some(pr) = (r..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(r, pr);
        let inv = inv_mod(m[r][c], p);
        for x in m[r].iter_mut() {
            *x = mul_mod(*x, inv, p);
        }
        let prow = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == r || row[c] == 0 {
                continue;
            }
            let f = row[c];
            for j in c..cols {
                if prow[j] != 0 {
                    row[j] = (row[j] + p - mul_mod(f, prow[j], p)) % p;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    (pivots, m)
}

/// Kernel basis from a reduced echelon form: one vector per non-pivot column.
fn kernel_from_rref(pivots: &[usize], rows: &[Vec<u64>], cols: usize, p: u64) -> Vec<Vec<u64>> {
    (0..cols)
        .filter(|c| !pivots.contains(c))
        .map(|f| {
            let mut v = vec![0u64; cols];
            v[f] = 1;
            for (i, &pc) in pivots.iter().enumerate() {
                v[pc] = (p - rows[i][f]) % p;
            }
            v
        })
        .collect()
}

/// Chinese-remainder lift of a modular computation whose output shape is
/// determined by a pattern (pivot columns). Primes giving a pattern of smaller
/// rank or a lexicographically later pivot set are discarded as unlucky. The
/// lift stops once two consecutive reconstructions agree and `accept` holds.
fn lift<F, A>(compute: F, accept: A) -> Vec<Vec<Rational>>
where
    F: Fn(u64) -> (Vec<usize>, Vec<Vec<u64>>) + Sync + Send,
    A: Fn(&[Vec<Rational>]) -> bool,
{
    let batch = 4usize;
    let mut used = 0usize;
    let mut modulus = BigInt::one();
    let mut pattern: Option<Vec<usize>> = None;
    let mut acc: Vec<Vec<BigInt>> = Vec::new();
    let mut last: Option<Vec<Vec<Rational>>> = None;
    loop {
        let ps = primes(used + batch)[used..].to_vec();
        used += batch;
        let results = par::map(&ps, |&p| (p, compute(p)));
        for (p, (piv, vals)) in results {
            match &pattern {
                Some(pat) if *pat == piv => {}
                Some(pat) if piv.len() < pat.len() || (piv.len() == pat.len() && piv > *pat) => continue,
                _ => {
                    pattern = Some(piv.clone());
                    modulus = BigInt::one();
                    acc = vals.iter().map(|v| vec![BigInt::zero(); v.len()]).collect();
                    last = None;
                }
            }
            let bp = BigInt::from(p);
            let minv = BigInt::from(inv_mod(reduce(&modulus, p), p));
            for (av, bv) in acc.iter_mut().zip(&vals) {
                for (x, &b) in av.iter_mut().zip(bv) {
                    let diff = (BigInt::from(b) - reduce(x, p)).mod_floor(&bp);
                    if !diff.is_zero() {
                        let t = (diff * &minv).mod_floor(&bp);
                        *x += &modulus * t;
                    }
                }
            }
            modulus *= bp;
        }
        if acc.is_empty() {
            return vec![];
        }
        let recon: Option<Vec<Vec<Rational>>> = acc
            .iter()
            .map(|v| v.iter().map(|x| rational_reconstruct(x, &modulus).map(|(n, d)| Rational::new(n, d))).collect())
            .collect();
        if let Some(cand) = recon {
            if last.as_ref() == Some(&cand) && accept(&cand) {
                return cand;
            }
            last = Some(cand);
        }
    }
}

/// Integer basis of `{k : kᵀ·A[:, ..prefix] = 0}` for the integer matrix `A`
/// given by rows; the result is exact and each vector is primitive.
pub fn left_kernel(rows: &[Vec<BigInt>], prefix: usize) -> Vec<Vec<BigInt>> {
    let n = rows.len();
    if n == 0 {
        return vec![];
    }
    if prefix == 0 {
        return (0..n).map(|i| (0..n).map(|j| BigInt::from(i64::from(i == j))).collect()).collect();
    }
    // transpose of the prefix block: kernel of Aᵀ
    let at: Vec<Vec<BigInt>> = (0..prefix).map(|c| rows.iter().map(|r| r[c].clone()).collect()).collect();
    let rats = lift(
        |p| {
            let red: Vec<Vec<u64>> = at.iter().map(|r| r.iter().map(|x| reduce(x, p)).collect()).collect();
            let (piv, ech) = rref_mod(&red, n, p);
            let k = kernel_from_rref(&piv, &ech, n, p);
            (piv, k)
        },
        |cand| verify(rows, prefix, &cand.iter().map(|v| primitive(v)).collect::<Vec<_>>()),
    );
    rats.iter().map(|v| primitive(v)).collect()
}

/// Reduced row echelon form over Q of an integer matrix, with pivot columns.
/// The result is certified: every input row is the pivot-weighted sum of the
/// output rows, and the output rank equals a lower bound for the true rank.
pub fn rref(rows: &[Vec<BigInt>], cols: usize) -> (Vec<Vec<Rational>>, Vec<usize>) {
    if rows.is_empty() || cols == 0 {
        return (vec![], vec![]);
    }
    let out = lift(
        |p| {
            let red: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|x| reduce(x, p)).collect()).collect();
            rref_mod(&red, cols, p)
        },
        |cand| rref_certifies(rows, cand),
    );
    let pivots = out.iter().map(|r| r.iter().position(|x| !x.is_zero()).expect("nonzero row")).collect();
    (out, pivots)
}

fn rref_certifies(rows: &[Vec<BigInt>], cand: &[Vec<Rational>]) -> bool {
    let mut pivots = Vec::with_capacity(cand.len());
    for (i, r) in cand.iter().enumerate() {
        let Some(p) = r.iter().position(|x| !x.is_zero()) else { return false };
        if !r[p].is_one() || cand.iter().enumerate().any(|(j, o)| j != i && !o[p].is_zero()) {
            return false;
        }
        pivots.push(p);
    }
    par::map(rows, |row| {
        let mut acc: Vec<Rational> = row.iter().map(|x| Rational::from_integer(x.clone())).collect();
        for (r, &p) in cand.iter().zip(&pivots) {
            let c = acc[p].clone();
            if c.is_zero() {
                continue;
            }
            for (a, b) in acc.iter_mut().zip(r) {
                if !b.is_zero() {
                    *a -= &c * b;
                }
            }
        }
        acc.iter().all(|x| x.is_zero())
    })
    .into_iter()
    .all(|b| b)
}

/// Clears denominators and content, making the first nonzero entry positive.
pub fn primitive(v: &[Rational]) -> Vec<BigInt> {
    let den = v.iter().fold(BigInt::one(), |d, x| d.lcm(x.denom()));
    let mut out: Vec<BigInt> = v.iter().map(|x| x.numer() * (&den / x.denom())).collect();
    let g = out.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
    if !g.is_zero() && !g.is_one() {
        for x in out.iter_mut() {
            *x /= &g;
        }
    }
    if out.iter().find(|x| !x.is_zero()).map(|x| x.sign() == Sign::Minus).unwrap_or(false) {
        for x in out.iter_mut() {
            *x = -&*x;
        }
    }
    out
}

fn verify(rows: &[Vec<BigInt>], prefix: usize, ks: &[Vec<BigInt>]) -> bool {
    par::map(ks, |k| {
        (0..prefix).all(|c| {
            let mut s = BigInt::zero();
            for (ki, r) in k.iter().zip(rows) {
                if !ki.is_zero() && !r[c].is_zero() {
                    s += ki * &r[c];
                }
            }
            s.is_zero()
        })
    })
    .into_iter()
    .all(|b| b)
}

/// `kᵀ·A` restricted to the columns after `prefix`.
pub fn combine(rows: &[Vec<BigInt>], prefix: usize, k: &[BigInt]) -> Vec<BigInt> {
    let width = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut out = vec![BigInt::zero(); width - prefix];
    for (ki, r) in k.iter().zip(rows) {
        if ki.is_zero() {
            continue;
        }
        for (o, x) in out.iter_mut().zip(&r[prefix..]) {
            if !x.is_zero() {
                *o += ki * x;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bi(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn primality() {
        assert!(is_prime_u64(2));
        assert!(is_prime_u64(1_000_000_007));
        assert!(!is_prime_u64(561));
        assert!(!is_prime_u64(1 << 40));
        let ps = primes(3);
        assert!(ps.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn reconstruction() {
        let m = BigInt::from(1_000_000_007u64);
        let d = BigInt::from(7);
        let inv = d.modpow(&(&m - 2), &m);
        let a = (BigInt::from(-3) * inv).mod_floor(&m);
        assert_eq!(rational_reconstruct(&a, &m), Some((BigInt::from(-3), BigInt::from(7))));
    }

    #[test]
    fn small_kernel() {
        // rows r0 = (1, 2 | 5), r1 = (2, 4 | 7), r2 = (0, 1 | 1)
        let rows = vec![bi(&[1, 2, 5]), bi(&[2, 4, 7]), bi(&[0, 1, 1])];
        let k = left_kernel(&rows, 2);
        assert_eq!(k, vec![bi(&[2, -1, 0])]);
        assert_eq!(combine(&rows, 2, &k[0]), bi(&[3]));
    }

    #[test]
    fn rref_matches_exact() {
        let rows = vec![bi(&[2, 4, 6, 1]), bi(&[1, 2, 5, 0]), bi(&[3, 6, 11, 1])];
        let (r, piv) = rref(&rows, 4);
        let m = crate::exact::RatMatrix::from_rows(4, rows.iter().map(|v| v.iter().map(crate::exact::big).collect()).collect());
        let e = crate::exact::echelon_reduce(&m);
        assert_eq!(piv, e.pivots);
        assert_eq!(r, e.reduced.data);
    }

    #[test]
    fn large_entries() {
        let big = BigInt::from(10).pow(60u32) + BigInt::from(7);
        let rows = vec![vec![big.clone(), BigInt::from(3)], vec![BigInt::from(3), big.clone()], vec![BigInt::from(1), BigInt::from(1)]];
        let k = left_kernel(&rows, 2);
        assert_eq!(k.len(), 1);
        assert!(verify(&rows, 2, &k));
    }
}
