//! `k3nl`: command-line front end. Every command prints one JSON document
//! `{"manifest": …, "result": …}` on stdout; errors print `{"manifest": …,
//! "error": …}` and exit with 1 (mathematical precondition), 2 (resource
//! budget) or 3 (configuration).

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use k3nl::boundary::{complete_relation, BoundaryError};
use k3nl::cone::{analyze, analyze_with_data, ConeConfig, ConeError};
use k3nl::exact::{fmt_rat, int, parse_rat, Rational};
use k3nl::ghosts::{
    cuspidality_verdict, default_window, ghost_count, ghost_space, theta_is_ghost, theta_oracle, GhostError, GhostOptions,
};
use k3nl::heegner::{express, hodge_relation, hodge_window, picard_basis, presentation, DivisorClass, HeegnerError, HeegnerIndex, PicardOptions};
use k3nl::io::{branch_override, lattices_for, load_lattices, read_json, ConfigError};
use k3nl::jacobi::{Flavor, JacobiError};
use k3nl::kodaira::{kodaira_report_with, KodairaError, KodairaOptions};
use k3nl::lattice::{genus_check, LatticeError};
use k3nl::nl::{NlError, NlTable, RankTwoClass};
use k3nl::optimize::OptError;

use manifest::Manifest;

#[derive(Parser, Debug)]
#[command(name = "k3nl", version, about = "Picard groups, NL cones and theta ghosts for moduli of polarised K3 surfaces")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Configuration directory (lattices/, branch/, goldens.json).
    #[arg(long, global = true, default_value = "config")]
    config: PathBuf,
    /// Worker threads for data-parallel kernels.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Branch-and-bound node budget.
    #[arg(long, global = true, default_value_t = 20_000)]
    budget: usize,
    /// Largest pole order tried when stabilising functional bases.
    #[arg(long, global = true, default_value_t = 14)]
    max_pole_order: u32,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Basis of Pic_Q(F_2d) and optional divisor expressions.
    Picard {
        #[arg(long)]
        d: u64,
        /// Largest |n| covered by the dependency table.
        #[arg(long)]
        window: Option<String>,
        /// Heegner index `γ,n` to express in the basis (repeatable).
        #[arg(long, value_name = "GAMMA,N")]
        express: Vec<String>,
    },
    /// The Hodge relation `2ρλ ∼ Σ c H`.
    Hodge {
        #[arg(long)]
        d: u64,
    },
    /// An irreducible NL divisor in terms of Heegner divisors.
    Nl {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        disc: u64,
        #[arg(long)]
        delta: i64,
    },
    /// Cone membership and the extremal ε for `K° − ελ`.
    Cone {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        delta_max: Option<u64>,
    },
    /// Boundary coefficients of a relation over the configured cusp lattices.
    Boundary {
        #[arg(long)]
        d: u64,
        /// Relation JSON; defaults to the Hodge relation.
        #[arg(long)]
        relation: Option<PathBuf>,
    },
    /// Theta ghosts.
    Ghosts {
        #[command(subcommand)]
        cmd: GhostCmd,
    },
    /// Kodaira verdict from the cone solution and ghost bounds.
    Kodaira {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        delta_max: Option<u64>,
        #[arg(long)]
        window: Option<u32>,
        /// Also compute the exact order at the standard cusp `2E8 ⊕ ⟨2d⟩`.
        #[arg(long)]
        standard_cusp: bool,
    },
    /// Cross-checks shipped configuration against the engines.
    Verify {
        /// Pole order for the theta oracle.
        #[arg(long, default_value_t = 2)]
        pole_order: u32,
    },
}

#[derive(Subcommand, Debug)]
enum GhostCmd {
    /// Number of apparent theta ghosts for `Z/2mZ`.
    Count {
        #[arg(long)]
        m: u64,
        /// Fixed window; otherwise escalate until stable.
        #[arg(long)]
        window: Option<u32>,
    },
    /// Lower bound of a relation's boundary coefficients over all 1-cusps.
    Bound {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        relation: PathBuf,
        #[arg(long)]
        window: Option<u32>,
    },
}

#[derive(Debug)]
enum Failure {
    Math(String),
    Budget(String),
    Config(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Math(_) => 1,
            Failure::Budget(_) => 2,
            Failure::Config(_) => 3,
        }
    }

    fn json(&self) -> Value {
        let (kind, msg) = match self {
            Failure::Math(m) => ("precondition", m),
            Failure::Budget(m) => ("budget", m),
            Failure::Config(m) => ("config", m),
        };
        json!({"kind": kind, "message": msg})
    }
}

fn opt_failure(e: &OptError) -> Failure {
    match e {
        OptError::NodeBudget { .. } | OptError::CapExceeded(_) => Failure::Budget(e.to_string()),
        _ => Failure::Math(e.to_string()),
    }
}

impl From<JacobiError> for Failure {
    fn from(e: JacobiError) -> Self {
        match e {
            JacobiError::NoStabilization(_) => Failure::Budget(e.to_string()),
            JacobiError::Cache(_) => Failure::Config(e.to_string()),
            _ => Failure::Math(e.to_string()),
        }
    }
}

impl From<HeegnerError> for Failure {
    fn from(e: HeegnerError) -> Self {
        match e {
            HeegnerError::Jacobi(j) => j.into(),
            HeegnerError::Json(_) => Failure::Config(e.to_string()),
            _ => Failure::Math(e.to_string()),
        }
    }
}

impl From<NlError> for Failure {
    fn from(e: NlError) -> Self {
        match e {
            NlError::Heegner(h) => h.into(),
            _ => Failure::Math(e.to_string()),
        }
    }
}

impl From<LatticeError> for Failure {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::Budget(_) => Failure::Budget(e.to_string()),
            LatticeError::Json(_) => Failure::Config(e.to_string()),
            _ => Failure::Math(e.to_string()),
        }
    }
}

impl From<ConeError> for Failure {
    fn from(e: ConeError) -> Self {
        match e {
            ConeError::Heegner(h) => h.into(),
            ConeError::Nl(n) => n.into(),
            ConeError::Opt(o) => opt_failure(&o),
            ConeError::Config(_) => Failure::Config(e.to_string()),
            ConeError::NoStability(_) => Failure::Budget(e.to_string()),
            ConeError::Outside => Failure::Math(e.to_string()),
        }
    }
}

impl From<GhostError> for Failure {
    fn from(e: GhostError) -> Self {
        match e {
            GhostError::Jacobi(j) => j.into(),
            GhostError::Opt(o) => opt_failure(&o),
            GhostError::Lattice(l) => l.into(),
            GhostError::NoStability(_) => Failure::Budget(e.to_string()),
            _ => Failure::Math(e.to_string()),
        }
    }
}

impl From<BoundaryError> for Failure {
    fn from(e: BoundaryError) -> Self {
        match e {
            BoundaryError::Lattice(l) => l.into(),
            BoundaryError::Genus { .. } | BoundaryError::Stratum { .. } => Failure::Config(e.to_string()),
            BoundaryError::Precision { .. } => Failure::Math(e.to_string()),
        }
    }
}

impl From<KodairaError> for Failure {
    fn from(e: KodairaError) -> Self {
        match e {
            KodairaError::Cone(c) => c.into(),
            KodairaError::Ghost(g) => g.into(),
            KodairaError::Boundary(b) => b.into(),
            KodairaError::NotARelation(_) => Failure::Math(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn ser<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn parse_q(s: &str) -> Result<Rational, Failure> {
    parse_rat(s).map_err(|e| Failure::Config(format!("{s}: {e}")))
}

fn read_relation(path: &Path, d: u64, m: &mut Manifest) -> Result<DivisorClass, Failure> {
    m.hash_file(path);
    let v: Value = read_json(path)?;
    let (rd, rel) = DivisorClass::from_json(&v)?;
    if rd != d {
        return Err(Failure::Config(format!("{}: relation is for d = {rd}, not {d}", path.display())));
    }
    Ok(rel)
}

fn ghost_opts(g: &Global) -> GhostOptions {
    GhostOptions { node_budget: g.budget, max_pole_order: g.max_pole_order, ..GhostOptions::default() }
}

fn cone_config(g: &Global, d: u64, delta_max: Option<u64>, m: &mut Manifest) -> Result<ConeConfig, Failure> {
    let mut cfg = ConeConfig::new(d);
    if let Some(dm) = delta_max {
        cfg.delta_max = dm;
    }
    cfg.max_pole_order = cfg.max_pole_order.max(g.max_pole_order);
    if let Some((path, b)) = branch_override(&g.config, d)? {
        m.hash_file(&path);
        if b.d != d {
            return Err(Failure::Config(format!("{}: branch divisor is for d = {}", path.display(), b.d)));
        }
        cfg.branch = b;
    }
    m.param("delta_max", cfg.delta_max);
    m.param("branch", ser(&cfg.branch));
    Ok(cfg)
}

fn run(cli: &Cli, m: &mut Manifest) -> Result<Value, Failure> {
    let g = &cli.global;
    match &cli.cmd {
        Cmd::Picard { d, window, express: ex } => {
            let w = match window {
                Some(s) => parse_q(s)?,
                None => hodge_window(*d),
            };
            m.param("d", d);
            m.param("window", fmt_rat(&w));
            let basis = picard_basis(*d, &w, PicardOptions { max_pole_order: g.max_pole_order })?;
            let pres = presentation(&basis)?;
            let mut exprs = Vec::new();
            for e in ex {
                let (gs, ns) = e.split_once(',').ok_or_else(|| Failure::Config(format!("expected GAMMA,N: {e}")))?;
                let gamma: u64 = gs.trim().parse().map_err(|_| Failure::Config(format!("bad γ: {gs}")))?;
                let idx = HeegnerIndex::new(*d, gamma, parse_q(ns.trim())?)?;
                let c = express(&basis, &idx)?;
                exprs.push(json!({"index": ser(&idx), "class": c.to_json(*d), "display": c.to_string()}));
            }
            Ok(json!({
                "d": d,
                "dim": basis.dim(),
                "free": ser(&basis.free()),
                "presentation": pres.iter().map(|r| r.iter().map(fmt_rat).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "expressions": exprs,
            }))
        }
        Cmd::Hodge { d } => {
            m.param("d", d);
            let basis = picard_basis(*d, &hodge_window(*d), PicardOptions { max_pole_order: g.max_pole_order })?;
            let h = hodge_relation(&basis)?;
            Ok(json!({
                "d": d,
                "lambda": fmt_rat(&h.lambda),
                "terms": h.terms.iter().map(|(k, v)| json!({"index": ser(k), "coeff": fmt_rat(v)})).collect::<Vec<_>>(),
                "display": h.to_string(),
                "relation": h.as_class().to_json(*d),
            }))
        }
        Cmd::Nl { d, disc, delta } => {
            m.param("d", d);
            m.param("disc", disc);
            m.param("delta", delta);
            let cls = RankTwoClass::new(*d, *disc, *delta)?;
            let mut t = NlTable::new(*d);
            let c = t.p_in_terms_of_h(&cls)?;
            Ok(json!({"class": ser(&cls), "heegner": c.to_json(*d), "display": c.to_string()}))
        }
        Cmd::Cone { d, delta_max } => {
            m.param("d", d);
            let cfg = cone_config(g, *d, *delta_max, m)?;
            Ok(ser(&analyze(&cfg)?))
        }
        Cmd::Boundary { d, relation } => {
            m.param("d", d);
            let rel = match relation {
                Some(p) => read_relation(p, *d, m)?,
                None => {
                    let b = picard_basis(*d, &hodge_window(*d), PicardOptions { max_pole_order: g.max_pole_order })?;
                    hodge_relation(&b)?.as_class()
                }
            };
            for (path, l) in load_lattices(&g.config)? {
                if l.stratum.d == *d {
                    m.hash_file(&path);
                }
            }
            let lats = lattices_for(&g.config, *d)?;
            if lats.is_empty() {
                return Err(Failure::Config(format!("no cusp lattices for d = {d} under {}", g.config.display())));
            }
            Ok(ser(&complete_relation(&rel, *d, &lats)?))
        }
        Cmd::Ghosts { cmd: GhostCmd::Count { m: mm, window } } => {
            m.param("m", mm);
            let mut o = ghost_opts(g);
            if let Some(w) = window {
                o.start_window = *w;
                o.max_window = *w;
                o.stable_steps = 0;
            }
            m.param("window", json!([o.start_window, o.max_window, o.stable_steps]));
            Ok(ser(&ghost_count(*mm, o)?))
        }
        Cmd::Ghosts { cmd: GhostCmd::Bound { d, relation, window } } => {
            m.param("d", d);
            let rel = read_relation(relation, *d, m)?;
            let w = window.map(|w| int(w as i64)).unwrap_or_else(|| default_window(&rel));
            m.param("window", fmt_rat(&w));
            Ok(ser(&cuspidality_verdict(&rel, *d, &w, ghost_opts(g))?))
        }
        Cmd::Kodaira { d, delta_max, window, standard_cusp } => {
            m.param("d", d);
            m.param("window", ser(window));
            let cfg = cone_config(g, *d, *delta_max, m)?;
            let (cone, data) = analyze_with_data(&cfg)?;
            let opts = KodairaOptions { ghosts: ghost_opts(g), window: *window, standard_cusp: *standard_cusp };
            Ok(ser(&kodaira_report_with(&cfg, cone, Some(data), opts)?))
        }
        Cmd::Verify { pole_order } => {
            m.param("pole_order", pole_order);
            verify(g, *pole_order, m)
        }
    }
}

/// Genus, ghost predicate and theta oracle for every shipped lattice; goldens if present.
fn verify(g: &Global, pole_order: u32, m: &mut Manifest) -> Result<Value, Failure> {
    let mut checks = Vec::new();
    let mut ok = true;
    for (path, l) in load_lattices(&g.config)? {
        m.hash_file(&path);
        let sm = l.stratum.m;
        let genus = genus_check(&l.lattice, sm);
        let space = ghost_space(sm, &int(2), g.max_pole_order)?;
        let ghost = genus && theta_is_ghost(&space, &l.lattice)?;
        let oracle = if genus {
            theta_oracle(&l.lattice, sm, pole_order, Flavor::Sing)?.iter().all(|x| x == &Rational::from_integer(0.into()))
        } else {
            false
        };
        ok &= genus && ghost && oracle;
        checks.push(json!({"label": l.label, "d": l.stratum.d, "n": l.stratum.n, "genus": genus, "ghost": ghost, "oracle": oracle}));
    }
    let goldens = g.config.join("goldens.json");
    let mut hodge = Vec::new();
    if goldens.is_file() {
        m.hash_file(&goldens);
        let v: Value = read_json(&goldens)?;
        if let Some(rows) = v.get("hodge").and_then(|h| h.as_object()) {
            for (d, expect) in rows {
                let d: u64 = d.parse().map_err(|_| Failure::Config(format!("goldens: bad d {d}")))?;
                let basis = picard_basis(d, &hodge_window(d), PicardOptions { max_pole_order: g.max_pole_order })?;
                let h = hodge_relation(&basis)?;
                let mut got = vec![fmt_rat(&h.lambda)];
                got.extend(h.terms.iter().map(|(_, c)| fmt_rat(c)));
                let want: Vec<String> =
                    expect.as_array().map(|a| a.iter().filter_map(|x| x.as_str().map(String::from)).collect()).unwrap_or_default();
                let pass = got == want;
                ok &= pass;
                hodge.push(json!({"d": d, "pass": pass, "got": got, "want": want}));
            }
        }
    }
    if !ok {
        return Err(Failure::Math(format!("verification failed: {}", json!({"lattices": checks, "hodge": hodge}))));
    }
    Ok(json!({"lattices": checks, "hodge": hodge, "pass": ok}))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut m = Manifest::new(&format!("{:?}", cli.cmd).split([' ', '{']).next().unwrap_or("").to_lowercase());
    m.param("budget", cli.global.budget);
    m.param("max_pole_order", cli.global.max_pole_order);
    m.param("parallel", k3nl::par::is_parallel());
    let out = k3nl::par::with_workers(cli.global.workers, || run(&cli, &mut m));
    let (body, code) = match out {
        Ok(v) => (json!({"manifest": m.to_json(), "result": v}), 0),
        Err(f) => (json!({"manifest": m.to_json(), "error": f.json()}), f.code()),
    };
    println!("{}", serde_json::to_string_pretty(&body).expect("serializable"));
    ExitCode::from(code)
}
