use std::path::PathBuf;

use num_traits::Signed;

use k3nl::boundary::boundary_coeff;
use k3nl::exact::{int, rat, Rational};
use k3nl::ghosts::{boundary_objective, ghost_count_at, ghost_min_order, ghost_space, theta_is_ghost, GhostSpace};
use k3nl::heegner::{hodge_relation, hodge_window, picard_basis, DivisorClass, HeegnerIndex, PicardOptions};
use k3nl::io::load_lattices;
use k3nl::lattice::{cusp_strata, standard_cusp_lattice, theta_series, CuspStratum, GramLattice};

fn config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config")
}

fn hodge(d: u64) -> DivisorClass {
    let b = picard_basis(d, &hodge_window(d), PicardOptions::default()).unwrap();
    hodge_relation(&b).unwrap().as_class()
}

fn objective_at_theta(rel: &DivisorClass, s: &CuspStratum, space: &GhostSpace, k: &GramLattice) -> Rational {
    let th = theta_series(k, &(space.basis.window.floor() + int(1))).unwrap();
    let y = space.coordinates_of(|f| th.coeff(f.gamma as i64, &f.exponent)).expect("theta series on the ghost lattice");
    boundary_objective(rel, s, space).unwrap().iter().zip(&y).map(|(a, b)| a * b).sum()
}

#[test]
fn ghost_objective_matches_boundary_coefficient() {
    for d in [1u64, 4] {
        let rel = hodge(d);
        for s in cusp_strata(d) {
            let space = ghost_space(s.m, &int(3), 14).unwrap();
            let k = standard_cusp_lattice(s.m);
            assert_eq!(objective_at_theta(&rel, &s, &space, &k), boundary_coeff(&rel, &s, &k).unwrap(), "d={d} N={}", s.n);
        }
    }
    let rel = hodge(1);
    for (_, cl) in load_lattices(&config()).unwrap().into_iter().filter(|(_, c)| c.stratum.d == 1) {
        let space = ghost_space(1, &int(2), 14).unwrap();
        assert_eq!(objective_at_theta(&rel, &cl.stratum, &space, &cl.lattice), boundary_coeff(&rel, &cl.stratum, &cl.lattice).unwrap());
    }
}

#[test]
fn shipped_lattices_are_ghosts_at_every_window() {
    for (path, cl) in load_lattices(&config()).unwrap() {
        for w in 2..=3 {
            let space = ghost_space(cl.stratum.m, &int(w), 14).unwrap();
            assert!(theta_is_ghost(&space, &cl.lattice).unwrap(), "{} at window {w}", path.display());
        }
    }
}

#[test]
fn ghost_bounds_grow_with_the_window() {
    let rel = hodge(1);
    let s = cusp_strata(1).remove(0);
    let mut prev: Option<Rational> = None;
    for w in 2..=4 {
        let space = ghost_space(1, &int(w), 14).unwrap();
        let b = ghost_min_order(&rel, &s, &space, 10_000).unwrap();
        assert!(b.relaxation <= b.bound);
        assert!(b.bound <= int(18));
        if let Some(p) = &prev {
            assert!(&b.bound >= p, "window {w}");
        }
        prev = Some(b.bound);
    }
}

#[test]
fn truncated_search_is_a_lower_bound() {
    let rel = hodge(4);
    for s in cusp_strata(4) {
        let space = ghost_space(s.m, &int(3), 14).unwrap();
        let full = ghost_min_order(&rel, &s, &space, 10_000).unwrap();
        let cut = ghost_min_order(&rel, &s, &space, 1).unwrap();
        assert!(cut.bound <= full.bound, "N={}", s.n);
        assert!(full.bound.is_positive());
    }
}

#[test]
fn ghost_counts_shrink_as_the_window_grows() {
    let mut prev = usize::MAX;
    for w in 2..=4 {
        let c = ghost_count_at(&ghost_space(2, &int(w), 14).unwrap(), 100_000).unwrap();
        assert!(c <= prev);
        prev = c;
    }
}

#[test]
fn constant_relation_gives_n_everywhere() {
    let r = DivisorClass::single(HeegnerIndex::zero(), int(24));
    for s in cusp_strata(9) {
        let space = ghost_space(s.m, &int(2), 14).unwrap();
        assert_eq!(ghost_min_order(&r, &s, &space, 100).unwrap().bound, int(s.n as i64));
    }
    let half = DivisorClass::single(HeegnerIndex::zero(), int(12));
    let s = CuspStratum::new(4, 2).unwrap();
    let space = ghost_space(s.m, &int(2), 14).unwrap();
    assert_eq!(ghost_min_order(&half, &s, &space, 100).unwrap().bound, rat(1, 1));
}
