//! End-to-end Kodaira verdicts: the cone solution for `K° − ελ` becomes a
//! relation `(19 − ε)·H(0̄,0) + ½B + Σ t·P ∼ 0`, i.e. a modular form of weight
//! `19 − ε` vanishing on the ramification divisor, whose cuspidality is then
//! bounded from below over every 1-cusp by theta ghosts.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::cone::{analyze_with_data, cone_data, ConeConfig, ConeData, ConeError, ConeVerdict, Membership};
use crate::exact::{fmt_rat, int, parse_rat, rat, Rational};
use crate::ghosts::{cuspidality_verdict, default_window, Cuspidality, CuspidalityVerdict, GhostError, GhostOptions};
use crate::heegner::{DivisorClass, HeegnerIndex};
use crate::lattice::{standard_cusp_lattice, theta_series, CuspStratum};
use crate::nl::NlTable;

#[derive(Debug, thiserror::Error)]
pub enum KodairaError {
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Ghost(#[from] GhostError),
    #[error(transparent)]
    Boundary(#[from] crate::boundary::BoundaryError),
    #[error("canonical relation is not zero in Pic: {0}")]
    NotARelation(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KodairaVerdict {
    /// κ = 19.
    GeneralType,
    /// κ ≥ 0.
    NonNegative,
    /// `K°` lies outside the cone; nothing follows from the boundary.
    OutsideCone,
    /// A cusp could not be certified.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KodairaReport {
    pub d: u64,
    pub verdict: KodairaVerdict,
    #[serde(with = "crate::exact::rat_str::opt")]
    pub epsilon: Option<Rational>,
    #[serde(with = "crate::exact::rat_str::opt")]
    pub weight: Option<Rational>,
    pub relation: Option<serde_json::Value>,
    pub cuspidality: Option<CuspidalityVerdict>,
    /// Exact boundary coefficient at the standard cusp `E8² ⊕ ⟨2d⟩` (N = 1).
    #[serde(with = "crate::exact::rat_str::opt")]
    pub standard_cusp_order: Option<Rational>,
    pub cone: ConeVerdict,
}

/// Heegner form of `(19 − ε)·H(0̄,0) + ½B + Σ t·P`.
pub fn canonical_relation(cfg: &ConeConfig, cone: &ConeVerdict, table: &mut NlTable) -> Result<DivisorClass, KodairaError> {
    let eps = cone.epsilon.clone().unwrap_or_else(Rational::zero);
    let mut rel = DivisorClass::single(HeegnerIndex::zero(), int(19) - eps);
    for (cls, c) in cfg.branch.combination()? {
        rel.add_class(&table.p_in_terms_of_h(&cls).map_err(ConeError::from)?, &(c * rat(1, 2)));
    }
    for (cls, t) in &cone.weights {
        let t = parse_rat(t).map_err(|e| KodairaError::NotARelation(e.to_string()))?;
        rel.add_class(&table.p_in_terms_of_h(cls).map_err(ConeError::from)?, &t);
    }
    Ok(rel)
}

/// Boundary coefficient of `rel` at the standard 1-cusp.
pub fn standard_cusp_order(rel: &DivisorClass, d: u64) -> Result<Rational, KodairaError> {
    let s = CuspStratum::new(d, 1).ok_or(crate::boundary::BoundaryError::Stratum { d, n: 1 })?;
    let k = standard_cusp_lattice(d);
    let th = theta_series(&k, &crate::boundary::needed_prec(rel)).map_err(crate::boundary::BoundaryError::from)?;
    Ok(crate::boundary::boundary_coeff_from(rel, &s, &th.times_e2())?)
}

#[derive(Clone, Copy, Debug)]
pub struct KodairaOptions {
    pub ghosts: GhostOptions,
    /// Window for the ghost bounds; `None` uses the relation's default.
    pub window: Option<u32>,
    pub standard_cusp: bool,
}

impl Default for KodairaOptions {
    fn default() -> Self {
        KodairaOptions { ghosts: GhostOptions::default(), window: None, standard_cusp: false }
    }
}

pub fn kodaira_report_from(cfg: &ConeConfig, cone: ConeVerdict, opts: KodairaOptions) -> Result<KodairaReport, KodairaError> {
    let data = if cone.membership == Membership::Outside { None } else { Some(cone_data(cfg, cone.delta_max)?) };
    kodaira_report_with(cfg, cone, data, opts)
}

/// As [`kodaira_report_from`], reusing the cone data the verdict was computed from.
pub fn kodaira_report_with(
    cfg: &ConeConfig,
    cone: ConeVerdict,
    data: Option<ConeData>,
    opts: KodairaOptions,
) -> Result<KodairaReport, KodairaError> {
    let d = cfg.d;
    if cone.membership == Membership::Outside {
        return Ok(KodairaReport {
            d,
            verdict: KodairaVerdict::OutsideCone,
            epsilon: None,
            weight: None,
            relation: None,
            cuspidality: None,
            standard_cusp_order: None,
            cone,
        });
    }
    let data = match data {
        Some(x) => x,
        None => cone_data(cfg, cone.delta_max)?,
    };
    let mut table = data.table;
    let rel = canonical_relation(cfg, &cone, &mut table)?;
    let residue = data.basis.class_coordinates(&rel).map_err(ConeError::from)?;
    if residue.iter().any(|x| !x.is_zero()) {
        return Err(KodairaError::NotARelation(residue.iter().map(fmt_rat).collect::<Vec<_>>().join(", ")));
    }
    let eps = cone.epsilon.clone().unwrap_or_else(Rational::zero);
    let window = opts.window.map(|w| int(w as i64)).unwrap_or_else(|| default_window(&rel));
    let cusp = cuspidality_verdict(&rel, d, &window, opts.ghosts)?;
    let verdict = match (cusp.verdict, eps.is_positive()) {
        (Cuspidality::CuspFormProved, true) => KodairaVerdict::GeneralType,
        (Cuspidality::CuspFormProved, false) => KodairaVerdict::NonNegative,
        _ => KodairaVerdict::Inconclusive,
    };
    let standard = if opts.standard_cusp { Some(standard_cusp_order(&rel, d)?) } else { None };
    Ok(KodairaReport {
        d,
        verdict,
        weight: Some(int(19) - &eps),
        epsilon: Some(eps),
        relation: Some(rel.to_json(d)),
        cuspidality: Some(cusp),
        standard_cusp_order: standard,
        cone,
    })
}

pub fn kodaira_report(cfg: &ConeConfig, opts: KodairaOptions) -> Result<KodairaReport, KodairaError> {
    let (cone, data) = analyze_with_data(cfg)?;
    kodaira_report_with(cfg, cone, Some(data), opts)
}
