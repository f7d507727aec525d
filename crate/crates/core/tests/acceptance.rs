//! Acceptance run: one `PASS`/`FAIL`/`SKIP` line per criterion, exact values,
//! pinned runtime limits. Stretch targets run with `K3NL_STRETCH=1`.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use num_traits::{Signed, Zero};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use k3nl::boundary::complete_relation;
use k3nl::cone::{analyze_with_data, ConeConfig, ConeData, ConeVerdict, Membership};
use k3nl::exact::{int, rat, QExpansion, RatMatrix, Rational};
use k3nl::ghosts::{ghost_count, ghost_space, theta_is_ghost, theta_oracle, GhostOptions};
use k3nl::heegner::{express, hodge_relation, hodge_window, picard_basis, presentation, DivisorClass, HeegnerIndex, PicardOptions};
use k3nl::io::{lattices_for, load_lattices};
use k3nl::jacobi::{obstruction_space, Flavor, Target};
use k3nl::kodaira::{kodaira_report_with, KodairaOptions, KodairaVerdict};
use k3nl::lattice::{genus_check, library, standard_cusp_lattice, theta_series};
use k3nl::optimize::{ilp_minimize, lp_solve_verified, IlpOptions, LpProblem, Relation, Sense, Status};

struct Outcome {
    pass: bool,
    detail: String,
}

fn ok(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Report {
    failed: usize,
}

impl Report {
    fn run(&mut self, id: &str, limit: Duration, f: impl FnOnce() -> Outcome) {
        if let Ok(only) = std::env::var("K3NL_ONLY") {
            if !id.starts_with(&only) {
                return self.skip(id, "filtered by K3NL_ONLY");
            }
        }
        let t = Instant::now();
        let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|e| ok(false, format!("panicked: {:?}", e.downcast_ref::<String>().cloned().unwrap_or_default())));
        let el = t.elapsed();
        let in_time = el <= limit;
        let pass = out.pass && in_time;
        if !pass {
            self.failed += 1;
        }
        let timing = if in_time { String::new() } else { format!(" (over the {limit:?} limit)") };
        println!("{} criterion {id}: {} [{:.1?}]{timing}", if pass { "PASS" } else { "FAIL" }, out.detail, el);
    }

    fn skip(&self, id: &str, why: &str) {
        println!("SKIP criterion {id}: {why}");
    }
}

fn stretch() -> bool {
    std::env::var("K3NL_STRETCH").is_ok_and(|v| v == "1")
}

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config")
}

fn h(d: u64, gamma: u64, n: Rational) -> HeegnerIndex {
    HeegnerIndex::new(d, gamma, n).unwrap()
}

fn c1() -> Outcome {
    let b = picard_basis(1, &int(10), PicardOptions::default()).unwrap();
    let p = presentation(&b).unwrap();
    let alpha = p[1][0].clone();
    ok(b.dim() == 2 && alpha == rat(105457575250, 169227), format!("dim = {}, α = {alpha}", b.dim()))
}

fn c2() -> Outcome {
    let b = picard_basis(1, &int(1), PicardOptions::default()).unwrap();
    let e = express(&b, &h(1, 1, rat(-1, 4))).unwrap();
    let mut want = DivisorClass::lambda().scaled(&rat(75, 28));
    want.add(h(1, 0, int(-1)), rat(-1, 56));
    // substitute into 150λ ∼ H(0̄,−1) + 56·H(1̄,−1/4)
    let rel = hodge_relation(&b).unwrap().as_class();
    let mut sub = DivisorClass::new();
    for (k, v) in &rel.terms {
        if *k == h(1, 1, rat(-1, 4)) {
            sub.add_class(&e, v);
        } else {
            sub.add(k.clone(), v.clone());
        }
    }
    ok(e == want && sub.is_zero(), format!("H(1̄,−1/4) = {e}; substituted Hodge relation = {sub}"))
}

fn c3() -> Outcome {
    let want: [&[i64]; 4] = [&[150, 1, 56], &[108, 1, 128, 14], &[98, 1, 108, 54, 2], &[80, 1, 112, 56, 16]];
    let mut rows = Vec::new();
    let mut pass = true;
    for d in 1..=4u64 {
        let b = picard_basis(d, &hodge_window(d), PicardOptions::default()).unwrap();
        let r = hodge_relation(&b).unwrap();
        let mut got = vec![r.lambda.clone()];
        got.extend(r.terms.iter().map(|(_, c)| c.clone()));
        let w: Vec<Rational> = want[d as usize - 1].iter().map(|&x| int(x)).collect();
        pass &= got == w;
        rows.push(got.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("/"));
    }
    ok(pass, rows.join(", "))
}

fn c4() -> Outcome {
    let b = picard_basis(1, &int(1), PicardOptions::default()).unwrap();
    let rel = hodge_relation(&b).unwrap().as_class();
    let lats = lattices_for(&config_dir(), 1).unwrap();
    let done = complete_relation(&rel, 1, &lats).unwrap();
    let mut values: Vec<Rational> = done.coeffs();
    values.sort();
    values.dedup();
    let e8e8 = done.boundary.iter().find(|t| t.label.starts_with("e8e8_a1")).map(|t| t.coeff.clone());
    let detail = done.boundary.iter().map(|t| format!("{} → {}", t.label, t.coeff)).collect::<Vec<_>>().join(", ");
    ok(values == vec![int(18), int(30)] && e8e8 == Some(int(30)), detail)
}

fn counts(ms: &[(u64, usize)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for &(m, want) in ms {
        match ghost_count(m, GhostOptions::default()) {
            Ok(c) => {
                pass &= c.count == want;
                parts.push(format!("m={m}: {} at window {} (want {want})", c.count, c.window));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("m={m}: {e}"));
            }
        }
    }
    ok(pass, parts.join("; "))
}

fn cone(d: u64) -> (ConeVerdict, ConeData) {
    analyze_with_data(&ConeConfig::new(d)).unwrap()
}

fn eps_line(v: &ConeVerdict) -> String {
    format!("d={} ε={} (Δ_max {})", v.d, v.epsilon.as_ref().map(|e| e.to_string()).unwrap_or("outside".into()), v.delta_max)
}

fn c6(cones: &[&ConeVerdict], want: &[(u64, i64)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (&(d, e), v) in want.iter().zip(cones) {
        let certified = v.certificate.status == Status::Optimal;
        pass &= v.d == d && v.membership == Membership::Inside && v.epsilon == Some(int(e)) && certified;
        parts.push(eps_line(v));
    }
    ok(pass, parts.join("; "))
}

fn c7(d: u64, cone: (ConeVerdict, ConeData), want: KodairaVerdict, standard: bool) -> Outcome {
    let cfg = ConeConfig::new(d);
    let opts = KodairaOptions { standard_cusp: standard, ..KodairaOptions::default() };
    let r = kodaira_report_with(&cfg, cone.0, Some(cone.1), opts).unwrap();
    let cusp = r.cuspidality.as_ref().unwrap();
    let all_positive = cusp.per_stratum.iter().all(|b| b.bound.is_positive());
    let bounds = cusp.per_stratum.iter().map(|b| format!("N={}: {}", b.n, b.bound)).collect::<Vec<_>>().join(", ");
    let std_part = r.standard_cusp_order.as_ref().map(|o| format!(", standard cusp order {o}")).unwrap_or_default();
    let mut pass = r.verdict == want && all_positive;
    if standard {
        pass &= r.standard_cusp_order == Some(int(15));
    }
    ok(pass, format!("d={d}: {:?}, weight {}, ghost bounds [{bounds}]{std_part}", r.verdict, r.weight.unwrap()))
}

fn c8_oracle() -> Outcome {
    let mut n = 0;
    let mut pass = true;
    let mut lats: Vec<(String, k3nl::lattice::GramLattice, u64)> =
        library().into_iter().filter(|(_, g)| genus_check(g, 1)).map(|(l, g)| (l.to_string(), g, 1)).collect();
    for m in 2..=4 {
        lats.push((format!("standard m={m}"), standard_cusp_lattice(m), m));
    }
    for (_, cl) in load_lattices(&config_dir()).unwrap() {
        lats.push((cl.label.clone(), cl.lattice.clone(), cl.stratum.m));
    }
    // Sing and SingZeroBar relations must kill each theta series.
    for (label, g, m) in &lats {
        for flavor in [Flavor::Sing, Flavor::SingZeroBar] {
            let p = theta_oracle(g, *m, 2, flavor).unwrap();
            n += p.len();
            if p.iter().any(|x| !x.is_zero()) {
                pass = false;
                println!("  oracle mismatch: {label} {flavor:?}");
            }
        }
    }
    // SingMinus relations see only cusp forms: differences of theta series with the same m.
    let mut diffs = 0;
    for (i, (la, ga, m)) in lats.iter().enumerate() {
        for (lb, gb, _) in lats[i + 1..].iter().filter(|(_, _, mb)| mb == m) {
            let ta = theta_series(ga, &int(3)).unwrap();
            let tb = theta_series(gb, &int(3)).unwrap();
            let rs = obstruction_space(Target::Theta, *m, 2, Flavor::SingMinus).unwrap();
            let p = rs.pairings(|f| ta.coeff(f.gamma as i64, &f.exponent) - tb.coeff(f.gamma as i64, &f.exponent));
            n += p.len();
            diffs += 1;
            if p.iter().any(|x| !x.is_zero()) {
                pass = false;
                println!("  oracle mismatch: {la} − {lb} SingMinus");
            }
        }
    }
    if diffs == 0 {
        pass = false;
    }
    ok(pass, format!("{} lattices and {diffs} same-m differences, {n} relation pairings, all zero", lats.len()))
}

fn c8_ghost_predicate() -> Outcome {
    let mut pass = true;
    let mut n = 0;
    for w in 2..=3 {
        for (_, cl) in load_lattices(&config_dir()).unwrap() {
            let space = ghost_space(cl.stratum.m, &int(w), 14).unwrap();
            pass &= theta_is_ghost(&space, &cl.lattice).unwrap();
            n += 1;
        }
        for m in 1..=3 {
            let space = ghost_space(m, &int(w), 14).unwrap();
            pass &= theta_is_ghost(&space, &standard_cusp_lattice(m)).unwrap();
            n += 1;
        }
    }
    ok(pass, format!("{n} theta series checked at windows 2 and 3"))
}

fn c8_lp() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 48, ..Config::default() });
    let strat = (prop::collection::vec(prop::collection::vec(-4i64..5, 3), 2..6), prop::collection::vec(-3i64..4, 3));
    let res = runner.run(&strat, |(rows, obj)| {
        let mut p = LpProblem::new(Sense::Min, obj.iter().map(|&x| int(x)).collect()).all_integer();
        for j in 0..3 {
            p.set_bounds(j, Some(int(-3)), Some(int(3)));
        }
        for r in &rows {
            p.add(r.iter().map(|&x| int(x)).collect(), Relation::Le, int(4));
        }
        let lp = lp_solve_verified(&p).unwrap();
        let a = ilp_minimize(&p, IlpOptions::default()).unwrap();
        prop_assert!(a.status != Status::Optimal || a.verify(&p));
        // one more row: the integer minimum can only rise
        let mut q = p.clone();
        q.add(vec![int(1), int(1), int(1)], Relation::Ge, int(0));
        let b = ilp_minimize(&q, IlpOptions::default()).unwrap();
        if let (Some(x), Some(y)) = (&a.value, &b.value) {
            prop_assert!(y >= x);
        }
        if let (Some(x), Some(l)) = (&a.value, &lp.value) {
            prop_assert!(x >= l);
        }
        Ok(())
    });
    ok(res.is_ok(), format!("48 random ILPs: certificates and monotonicity {}", if res.is_ok() { "hold" } else { "violated" }))
}

fn c8_algebra() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 48, ..Config::default() });
    let series = || prop::collection::vec(-20i64..20, 1..8);
    let res = runner.run(&(series(), series(), series()), |(a, b, c)| {
        let f = |v: &Vec<i64>| QExpansion::from_ints(&v.iter().map(|&x| x.into()).collect::<Vec<_>>());
        let (a, b, c) = (f(&a), f(&b), f(&c));
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        Ok(())
    });
    let mut runner2 = TestRunner::new(Config { cases: 32, ..Config::default() });
    let mat = prop::collection::vec(prop::collection::vec(-9i64..10, 4), 1..5);
    let res2 = runner2.run(&mat, |rows| {
        let m = RatMatrix::from_rows(4, rows.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect());
        let e = m.echelon();
        prop_assert_eq!(e.reduced.echelon().reduced, e.reduced.clone());
        let g: Vec<Vec<num_bigint::BigInt>> = rows.iter().map(|r| r.iter().map(|&x| x.into()).collect()).collect();
        let s = k3nl::exact::smith_normal_form(&g);
        let p = k3nl::exact::int_matmul(&k3nl::exact::int_matmul(&s.u, &g), &s.v);
        prop_assert_eq!(p, s.d);
        Ok(())
    });
    ok(res.is_ok() && res2.is_ok(), "series associativity, echelon idempotence, SNF factorisation")
}

fn main() {
    let mut rep = Report { failed: 0 };
    let minute = Duration::from_secs(60);
    rep.run("1 (Picard basis d=1)", Duration::from_secs(10), c1);
    rep.run("2 (H(1̄,−1/4) for d=1)", Duration::from_secs(10), c2);
    rep.run("3 (Hodge relations d=1..4)", 2 * minute, c3);
    rep.run("4 (boundary completion d=1)", 2 * minute, c4);
    rep.run("5 (ghost counts m=1,2,3)", 15 * minute, || counts(&[(1, 3), (2, 35), (3, 11)]));
    if stretch() {
        rep.run("5-stretch (ghost counts m=4,5,6)", 300 * minute, || counts(&[(4, 107), (5, 58), (6, 164)]));
    } else {
        rep.skip("5-stretch", "set K3NL_STRETCH=1");
    }
    let mut c46 = None;
    rep.run("6 (extremal ε for d=40, 46)", 180 * minute, || {
        let a = cone(40);
        let b = cone(46);
        let out = c6(&[&a.0, &b.0], &[(40, 0), (46, 1)]);
        c46 = Some(b);
        out
    });
    if stretch() {
        let table = [(40, 0), (42, 0), (43, 0), (46, 1), (48, 0), (49, 0), (50, 1), (52, 1), (54, 1), (55, 0), (56, 0)];
        rep.run("6-stretch (ε for eleven d in 40..=56)", 600 * minute, || {
            let cones: Vec<ConeVerdict> = table.iter().map(|&(d, _)| cone(d).0).collect();
            c6(&cones.iter().collect::<Vec<_>>(), &table)
        });
    } else {
        rep.skip("6-stretch", "set K3NL_STRETCH=1");
    }
    rep.run("7 (kodaira d=46: general type)", 60 * minute, || {
        let c = c46.take().unwrap_or_else(|| cone(46));
        c7(46, c, KodairaVerdict::GeneralType, false)
    });
    rep.run("7 (kodaira d=42: κ ≥ 0)", 60 * minute, || c7(42, cone(42), KodairaVerdict::NonNegative, false));
    if stretch() {
        for d in [40u64, 42, 43, 48, 49, 55, 56] {
            rep.run(&format!("7-stretch (standard cusp order 15, d={d})"), 120 * minute, || {
                c7(d, cone(d), KodairaVerdict::NonNegative, true)
            });
        }
    } else {
        rep.skip("7-stretch", "set K3NL_STRETCH=1");
    }
    rep.run("8a (theta oracle equivalence)", 10 * minute, c8_oracle);
    rep.run("8b (ghost predicate on theta series)", 10 * minute, c8_ghost_predicate);
    rep.run("8c (LP/ILP certificates and monotonicity)", 5 * minute, c8_lp);
    rep.run("8d (algebraic identities)", 5 * minute, c8_algebra);
    rep.skip("9", "optional Eisenstein backend not built");
    println!("{} criteria failed", rep.failed);
    if rep.failed > 0 {
        std::process::exit(1);
    }
}
