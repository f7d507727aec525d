//! Boundary coefficients of Heegner relations at the 1-cusps of the
//! perfect-cone toroidal compactification: each relation `Σ a·H(γ, n) ∼ 0`
//! picks up `Σ a·(N/24)·(E2·Θ_K)(p(γ), |n|)` along the component of a cusp
//! with imprimitivity `N` and lattice `K`.

use serde::{Deserialize, Serialize};

use num_traits::{Signed, Zero};

use crate::exact::{int, rat, Rational};
use crate::heegner::DivisorClass;
use crate::jacobi::VVForm;
use crate::lattice::{genus_check, theta_series, CuspStratum, GramLattice, LatticeError, ThetaSeries};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BoundaryError {
    #[error("lattice {label} is not in the genus of 2E8 ⊕ ⟨2·{m}⟩")]
    Genus { label: String, m: u64 },
    #[error("theta series known below q^{prec}, relation needs exponent {needed}")]
    Precision { prec: String, needed: String },
    #[error("stratum N = {n} does not exist for d = {d}")]
    Stratum { d: u64, n: u64 },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Largest `|n|` appearing in a relation.
pub fn max_exponent(rel: &DivisorClass) -> Rational {
    rel.terms.keys().map(|k| k.n.abs()).max().unwrap_or_else(Rational::zero)
}

/// Theta precision sufficient for `rel`: the next integer above its largest `|n|`.
pub fn needed_prec(rel: &DivisorClass) -> Rational {
    max_exponent(rel).floor() + int(1)
}

/// Boundary coefficient from a precomputed `E2·Θ_K`.
pub fn boundary_coeff_from(rel: &DivisorClass, stratum: &CuspStratum, e2theta: &VVForm) -> Result<Rational, BoundaryError> {
    let mut total = Rational::zero();
    for (idx, a) in &rel.terms {
        let Some(x) = stratum.p(idx.gamma as i64) else { continue };
        let comp = e2theta.component(x as i64);
        let e = idx.n.abs();
        let c = comp.coeff(&e).map_err(|_| BoundaryError::Precision {
            prec: crate::exact::fmt_rat(comp.prec()),
            needed: crate::exact::fmt_rat(&e),
        })?;
        total += a * c;
    }
    Ok(total * rat(stratum.n as i64, 24))
}

/// `Σ a_{γ,n}·(N/24)·(E2Θ_K)(p(γ), |n|)` over the terms with `γ ∈ H^⊥`.
pub fn boundary_coeff(rel: &DivisorClass, stratum: &CuspStratum, k: &GramLattice) -> Result<Rational, BoundaryError> {
    if !genus_check(k, stratum.m) {
        return Err(BoundaryError::Genus { label: "input".into(), m: stratum.m });
    }
    let theta = theta_series(k, &needed_prec(rel))?;
    boundary_coeff_from(rel, stratum, &theta.times_e2())
}

/// A genus representative attached to a stratum.
#[derive(Clone, Debug)]
pub struct CuspLattice {
    pub label: String,
    pub stratum: CuspStratum,
    pub lattice: GramLattice,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryTerm {
    pub label: String,
    pub imprimitivity: u64,
    #[serde(with = "crate::exact::rat_str")]
    pub coeff: Rational,
}

/// A relation on the open part together with its boundary coefficients.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompletedRelation {
    pub d: u64,
    pub relation: serde_json::Value,
    pub boundary: Vec<BoundaryTerm>,
}

impl CompletedRelation {
    pub fn coeffs(&self) -> Vec<Rational> {
        self.boundary.iter().map(|b| b.coeff.clone()).collect()
    }
}

/// Completes `rel` over the supplied cusp lattices, each checked against its stratum's genus.
pub fn complete_relation(rel: &DivisorClass, d: u64, lattices: &[CuspLattice]) -> Result<CompletedRelation, BoundaryError> {
    let prec = needed_prec(rel);
    let mut boundary = Vec::new();
    for cl in lattices {
        if cl.stratum.d != d {
            return Err(BoundaryError::Stratum { d, n: cl.stratum.n });
        }
        if !genus_check(&cl.lattice, cl.stratum.m) {
            return Err(BoundaryError::Genus { label: cl.label.clone(), m: cl.stratum.m });
        }
        let theta: ThetaSeries = theta_series(&cl.lattice, &prec)?;
        let coeff = boundary_coeff_from(rel, &cl.stratum, &theta.times_e2())?;
        boundary.push(BoundaryTerm { label: cl.label.clone(), imprimitivity: cl.stratum.n, coeff });
    }
    Ok(CompletedRelation { d, relation: rel.to_json(d), boundary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heegner::HeegnerIndex;
    use crate::lattice::{a1, cusp_strata, e7_d10_plus, e8, standard_cusp_lattice};

    fn hodge_d1() -> DivisorClass {
        let mut r = DivisorClass::new();
        r.add(HeegnerIndex::zero(), int(150));
        r.add(HeegnerIndex::new(1, 0, int(-1)).unwrap(), int(1));
        r.add(HeegnerIndex::new(1, 1, rat(-1, 4)).unwrap(), int(56));
        r
    }

    #[test]
    fn d1_hodge_boundary() {
        let s = cusp_strata(1).remove(0);
        let k = e8().direct_sum(&e8()).direct_sum(&a1());
        assert_eq!(boundary_coeff(&hodge_d1(), &s, &k).unwrap(), int(30));
        assert_eq!(boundary_coeff(&hodge_d1(), &s, &e7_d10_plus()).unwrap(), int(18));
    }

    #[test]
    fn trivial_relations() {
        for d in [1u64, 4, 9] {
            for s in cusp_strata(d) {
                let k = standard_cusp_lattice(s.m);
                assert_eq!(boundary_coeff(&DivisorClass::new(), &s, &k).unwrap(), int(0));
                let r = DivisorClass::single(HeegnerIndex::zero(), int(24));
                assert_eq!(boundary_coeff(&r, &s, &k).unwrap(), int(s.n as i64));
            }
        }
    }

    #[test]
    fn genus_is_enforced() {
        let s = cusp_strata(1).remove(0);
        assert!(matches!(boundary_coeff(&hodge_d1(), &s, &standard_cusp_lattice(2)), Err(BoundaryError::Genus { .. })));
    }
}
