//! The Noether–Lefschetz cone spanned by irreducible divisors `P_{Δ,δ}` of
//! small discriminant, the open canonical class `K° = 19λ − ½B`, and the
//! linear programs deciding `K° − ελ ∈ cone`.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{fmt_rat, int, rat, Rational};
use crate::heegner::{picard_basis, DivisorClass, HeegnerError, PicardBasis, PicardOptions};
use crate::nl::{class_exists, NlError, NlTable, RankTwoClass};
use crate::optimize::{lp_solve_verified, Certificate, LpProblem, LpResult, OptError, Relation, Sense, Status};
use crate::par;

#[derive(Debug, thiserror::Error)]
pub enum ConeError {
    #[error(transparent)]
    Heegner(#[from] HeegnerError),
    #[error(transparent)]
    Nl(#[from] NlError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error("branch divisor configuration: {0}")]
    Config(String),
    #[error("K° is outside the cone; ε is undefined")]
    Outside,
    #[error("ε did not stabilise up to Δ_max = {0}")]
    NoStability(u64),
}

/// One term `coeff · P_{Δ,δ}` of a branch-divisor configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchTerm {
    pub disc: u64,
    pub delta: u64,
    #[serde(with = "crate::exact::rat_str")]
    pub coeff: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchConfig {
    pub d: u64,
    pub terms: Vec<BranchTerm>,
}

impl BranchConfig {
    pub fn combination(&self) -> Result<BTreeMap<RankTwoClass, Rational>, ConeError> {
        let mut out = BTreeMap::new();
        for t in &self.terms {
            if !class_exists(self.d, t.disc, t.delta) || t.delta > self.d {
                return Err(ConeError::Config(format!("no class P({}, {}) for d = {}", t.disc, t.delta, self.d)));
            }
            *out.entry(RankTwoClass { d: self.d, disc: t.disc, delta: t.delta }).or_insert_with(Rational::zero) +=
                t.coeff.clone();
        }
        Ok(out)
    }
}

/// Irreducible components of the ramification divisor of `D → F_2d`, one per
/// orbit of reflective vectors: `r² = −2` with divisor 1 (`P_{4d,0}`) or 2
/// (`P_{d,d}`, only when `d ≡ 1 mod 4`), and `r² = −2d` with divisor `2d`
/// (`P_{1,δ}`) or `d` (`P_{4,δ}`).
pub fn reflective_branch_config(d: u64) -> BranchConfig {
    let mut terms = Vec::new();
    let mut push = |disc: u64, delta: u64| {
        if class_exists(d, disc, delta) && !terms.iter().any(|t: &BranchTerm| t.disc == disc && t.delta == delta) {
            terms.push(BranchTerm { disc, delta, coeff: int(2) });
        }
    };
    for delta in 0..=d {
        push(1, delta);
    }
    for delta in (0..=d).filter(|x| x % 2 == 0) {
        let j = delta / 2;
        if d == 1 || (j * j) % d == 1 % d {
            push(4, delta);
        }
    }
    push(4 * d, 0);
    if d % 4 == 1 {
        push(d, d);
    }
    BranchConfig { d, terms }
}

#[derive(Clone, Debug)]
pub struct ConeConfig {
    pub d: u64,
    pub delta_max: u64,
    pub branch: BranchConfig,
    /// Extra Δ_max steps tried before ε is accepted as stable.
    pub escalation_steps: u32,
    pub max_pole_order: u32,
}

impl ConeConfig {
    pub fn new(d: u64) -> Self {
        ConeConfig {
            d,
            delta_max: 4 * d + 25,
            branch: reflective_branch_config(d),
            escalation_steps: 1,
            max_pole_order: 12,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Generator {
    pub class: RankTwoClass,
    #[serde(with = "crate::exact::rat_str::vec")]
    pub coords: Vec<Rational>,
}

/// Picard basis, NL table and generator list for a fixed Δ_max.
pub struct ConeData {
    pub basis: PicardBasis,
    pub table: NlTable,
    pub generators: Vec<Generator>,
}

fn coords_of_class(basis: &PicardBasis, c: &DivisorClass) -> Result<Vec<Rational>, ConeError> {
    Ok(basis.class_coordinates(c)?)
}

/// All existing classes with `Δ ≤ Δ_max`, each with its Picard coordinates.
pub fn generators(basis: &PicardBasis, table: &mut NlTable, delta_max: u64) -> Result<Vec<Generator>, ConeError> {
    let d = basis.d;
    let mut classes = Vec::new();
    for disc in 1..=delta_max {
        for delta in 0..=d {
            if class_exists(d, disc, delta) {
                classes.push(RankTwoClass { d, disc, delta });
            }
        }
    }
    let exprs: Vec<DivisorClass> = classes.iter().map(|c| table.p_in_terms_of_h(c)).collect::<Result<_, _>>()?;
    let coords = par::map(&exprs, |e| coords_of_class(basis, e));
    classes
        .into_iter()
        .zip(coords)
        .map(|(class, c)| Ok(Generator { class, coords: c? }))
        .collect()
}

pub fn lambda_coords(basis: &PicardBasis) -> Result<Vec<Rational>, ConeError> {
    coords_of_class(basis, &DivisorClass::lambda())
}

/// `19λ − ½B` over the free indices.
pub fn kcirc(basis: &PicardBasis, table: &mut NlTable, branch: &BranchConfig) -> Result<Vec<Rational>, ConeError> {
    let mut k = DivisorClass::lambda().scaled(&int(19));
    for (cls, c) in branch.combination()? {
        k.add_class(&table.p_in_terms_of_h(&cls)?, &(-c * rat(1, 2)));
    }
    coords_of_class(basis, &k)
}

pub fn cone_data(cfg: &ConeConfig, delta_max: u64) -> Result<ConeData, ConeError> {
    let window = rat(delta_max.max(4 * cfg.d) as i64, 4 * cfg.d as i64);
    let basis = picard_basis(cfg.d, &window, PicardOptions { max_pole_order: cfg.max_pole_order })?;
    let mut table = NlTable::new(cfg.d);
    let generators = generators(&basis, &mut table, delta_max)?;
    Ok(ConeData { basis, table, generators })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Inside,
    Outside,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeVerdict {
    pub d: u64,
    pub delta_max: u64,
    pub membership: Membership,
    /// Extremal ε for which `K° − ελ` is a nonnegative combination.
    #[serde(with = "crate::exact::rat_str::opt")]
    pub epsilon: Option<Rational>,
    /// Nonzero weights `t_{Δ,δ}`.
    pub weights: Vec<(RankTwoClass, String)>,
    /// For outside verdicts: `w` with `w·g ≥ 0` on every generator and `w·target < 0`.
    #[serde(with = "crate::exact::rat_str::vec")]
    pub separating: Vec<Rational>,
    pub certificate: LpResult,
    /// Always true: the generator list is finite and the cone may not be the effective cone.
    pub conditional: bool,
    pub note: String,
}

const CONDITIONAL_NOTE: &str =
    "conditional on the effective cone being generated by irreducible NL divisors and on the generator list being complete";

fn membership_lp(gens: &[Generator], target: &[Rational], lambda: Option<&[Rational]>) -> LpProblem {
    let n = gens.len() + usize::from(lambda.is_some());
    let mut obj = vec![Rational::zero(); n];
    if lambda.is_some() {
        obj[n - 1] = Rational::one();
    }
    let mut p = LpProblem::new(Sense::Max, obj);
    for i in 0..target.len() {
        let mut row: Vec<Rational> = gens.iter().map(|g| g.coords[i].clone()).collect();
        if let Some(l) = lambda {
            row.push(l[i].clone());
        }
        p.add(row, Relation::Eq, target[i].clone());
    }
    p
}

fn separating_from(cert: &Certificate, rows: usize) -> Vec<Rational> {
    match cert {
        Certificate::Farkas(y) => y[..rows].iter().map(|x| -x).collect(),
        _ => vec![],
    }
}

/// Is `target` a nonnegative combination of the generators?
pub fn nl_membership(d: u64, delta_max: u64, gens: &[Generator], target: &[Rational]) -> Result<ConeVerdict, ConeError> {
    let p = membership_lp(gens, target, None);
    let r = lp_solve_verified(&p)?;
    Ok(verdict(d, delta_max, gens, target.len(), r, None))
}

fn verdict(d: u64, delta_max: u64, gens: &[Generator], rows: usize, r: LpResult, eps: Option<Rational>) -> ConeVerdict {
    let inside = r.status != Status::Infeasible;
    let weights = if r.status == Status::Optimal {
        gens.iter()
            .zip(&r.point)
            .filter(|(_, t)| !t.is_zero())
            .map(|(g, t)| (g.class, fmt_rat(t)))
            .collect()
    } else {
        vec![]
    };
    ConeVerdict {
        d,
        delta_max,
        membership: if inside { Membership::Inside } else { Membership::Outside },
        epsilon: if inside { eps } else { None },
        weights,
        separating: separating_from(&r.certificate, rows),
        certificate: r,
        conditional: true,
        note: CONDITIONAL_NOTE.to_string(),
    }
}

/// Maximises `ε ≥ 0` subject to `K° − ελ = Σ t·g`, `t ≥ 0`.
pub fn epsilon_extremal(
    d: u64,
    delta_max: u64,
    gens: &[Generator],
    kcirc: &[Rational],
    lambda: &[Rational],
) -> Result<ConeVerdict, ConeError> {
    let neg_l: Vec<Rational> = lambda.to_vec();
    // K° − ελ = Σ t g  ⇔  Σ t g + ε λ = K°
    let p = membership_lp(gens, kcirc, Some(&neg_l));
    let r = lp_solve_verified(&p)?;
    match r.status {
        Status::Infeasible => Ok(verdict(d, delta_max, gens, kcirc.len(), r, None)),
        Status::Unbounded => Err(ConeError::Opt(OptError::Unbounded)),
        Status::Optimal => {
            let eps = r.point.last().cloned().unwrap();
            let mut v = verdict(d, delta_max, &gens[..], kcirc.len(), r, Some(eps));
            v.weights.retain(|(c, _)| gens.iter().any(|g| g.class == *c));
            Ok(v)
        }
    }
}

/// Runs the ε problem at `Δ_max` and at successive enlargements until the
/// verdict and ε agree for `escalation_steps + 1` consecutive cutoffs.
pub fn analyze(cfg: &ConeConfig) -> Result<ConeVerdict, ConeError> {
    Ok(analyze_with_data(cfg)?.0)
}

/// [`analyze`], also returning the cone data at the accepted cutoff.
pub fn analyze_with_data(cfg: &ConeConfig) -> Result<(ConeVerdict, ConeData), ConeError> {
    let step = 4 * cfg.d;
    let mut dm = cfg.delta_max;
    let mut prev: Option<(Membership, Option<Rational>)> = None;
    let mut agree = 0;
    for _ in 0..(cfg.escalation_steps + 4) {
        let mut data = cone_data(cfg, dm)?;
        let k = kcirc(&data.basis, &mut data.table, &cfg.branch)?;
        let l = lambda_coords(&data.basis)?;
        let v = epsilon_extremal(cfg.d, dm, &data.generators, &k, &l)?;
        let key = (v.membership, v.epsilon.clone());
        if prev.as_ref() == Some(&key) {
            agree += 1;
        } else {
            agree = 0;
        }
        if agree >= cfg.escalation_steps {
            return Ok((v, data));
        }
        prev = Some(key);
        dm += step;
    }
    Err(ConeError::NoStability(dm))
}

/// Statement about κ(F_2d) obtainable from the open part alone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpenVerdict {
    /// κ = −∞, proved from the sign of the degree (needs the Eisenstein backend).
    MinusInfinity,
    /// κ = −∞ if the NL cone is the effective cone and the generators are complete.
    ConditionalMinusInfinity,
    /// κ < 19 under the same hypotheses; ε = 0 is extremal.
    ConditionalNotGeneralType,
    /// `K° − ελ` is inside the cone for some ε > 0; the boundary decides.
    InsideWithPositiveEpsilon,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpenReport {
    pub d: u64,
    pub verdict: OpenVerdict,
    pub proved: bool,
    pub proceed_to_boundary: bool,
    pub cone: Option<ConeVerdict>,
}

pub fn open_report_from(d: u64, cone: ConeVerdict) -> OpenReport {
    let verdict = match (&cone.membership, &cone.epsilon) {
        (Membership::Outside, _) => OpenVerdict::ConditionalMinusInfinity,
        (Membership::Inside, Some(e)) if e.is_positive() => OpenVerdict::InsideWithPositiveEpsilon,
        _ => OpenVerdict::ConditionalNotGeneralType,
    };
    let proceed = verdict != OpenVerdict::ConditionalMinusInfinity;
    OpenReport { d, verdict, proved: false, proceed_to_boundary: proceed, cone: Some(cone) }
}

/// Classifies `d` by solving the cone problem.
pub fn kodaira_open_report(cfg: &ConeConfig) -> Result<OpenReport, ConeError> {
    Ok(open_report_from(cfg.d, analyze(cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_rule_shapes() {
        let c = reflective_branch_config(46);
        let keys: Vec<(u64, u64)> = c.terms.iter().map(|t| (t.disc, t.delta)).collect();
        assert!(keys.contains(&(184, 0)));
        assert!(keys.iter().all(|&(disc, delta)| class_exists(46, disc, delta)));
        let c = reflective_branch_config(5);
        assert!(c.terms.iter().any(|t| t.disc == 5 && t.delta == 5));
    }

    #[test]
    fn d1_branch_is_h0_minus1() {
        let mut t = NlTable::new(1);
        let b = crate::nl::expand(&mut t, &reflective_branch_config(1).combination().unwrap()).unwrap();
        let h = DivisorClass::single(crate::heegner::HeegnerIndex::new(1, 0, rat(-1, 1)).unwrap(), Rational::one());
        assert_eq!(b, h);
    }

    #[test]
    fn d1_generators() {
        let b = picard_basis(1, &int(1), PicardOptions::default()).unwrap();
        let mut t = NlTable::new(1);
        let g = generators(&b, &mut t, 1).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!((g[0].class.disc, g[0].class.delta), (1, 1));
        let g4 = generators(&b, &mut t, 4).unwrap();
        assert!(g4.len() >= g.len());
        assert!(g4.iter().all(|x| x.coords.iter().any(|c| !c.is_zero())));
    }

    #[test]
    fn generator_is_inside() {
        let b = picard_basis(2, &int(1), PicardOptions::default()).unwrap();
        let mut t = NlTable::new(2);
        let g = generators(&b, &mut t, 8).unwrap();
        let v = nl_membership(2, 8, &g, &g[0].coords).unwrap();
        assert_eq!(v.membership, Membership::Inside);
        assert!(v.certificate.verify(&membership_lp(&g, &g[0].coords, None)));
    }

    #[test]
    fn zero_branch_gives_19_lambda() {
        let b = picard_basis(1, &int(1), PicardOptions::default()).unwrap();
        let mut t = NlTable::new(1);
        let k = kcirc(&b, &mut t, &BranchConfig { d: 1, terms: vec![] }).unwrap();
        let l = lambda_coords(&b).unwrap();
        assert_eq!(k, l.iter().map(|x| x * int(19)).collect::<Vec<_>>());
    }
}
