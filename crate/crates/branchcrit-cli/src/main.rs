//! Command-line front end for the branching library.
//!
//! Machine-readable results go to stdout as JSON (one object per line);
//! human-readable summaries and diagnostics go to stderr. Exit code 0
//! means success, 1 means a cross-route mismatch or a failed identity,
//! 2 means invalid input.
//!
//! # Key operations
//!
//! - `criterion`: decide one instance and print the decision, the point
//!   sets, and the witnessing matching when it exists.
//! - `sets`: print only the congruence-zero point sets.
//! - `operator`: build a lowering operator for an explicit point set and
//!   multiset and print its terms, symbolically or reduced at a weight.
//! - `oracle`: answer the same question by brute-force linear algebra in
//!   the irreducible head.
//! - `crosscheck`: sweep a family of instances, compare every route, and
//!   report counterexamples verbatim.
//!
//! # Design notes
//!
//! Sweeps are deterministic given the flags and the seed; `--jobs`
//! changes wall time but not output, because rows are collected and
//! printed in instance order. `BRANCHCRIT_SEED` overrides the sampling
//! seed. Config files are flat `key=value` lines with `#` comments.

use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use branchcrit::criterion::{decide_direct, decide_fast, sets, witness_m, BranchingInstance};
use branchcrit::hyperalg::{FpHypVector, HypElement, UTMatrix};
use branchcrit::lowering::{script_t, script_t_specialized, LoweringSpec};
use branchcrit::modoracle::{
    check_scalar_identity, high_weight_dim, normalize, vector_status, weight_dim_l,
    weight_dim_weyl,
};
use branchcrit::msets::Multiset;
use branchcrit::planegeo::PointSet;
use branchcrit::{Error, Weight};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "branchcrit", version, about = "Branching criterion, lowering operators, and a brute-force module oracle", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide one instance and print the decision with its witness.
    Criterion(CriterionArgs),
    /// Print the congruence-zero point sets of one instance.
    Sets(InstanceArgs),
    /// Build a lowering operator and print its terms.
    Operator(OperatorArgs),
    /// Answer one instance by brute-force linear algebra in the head.
    Oracle(InstanceArgs),
    /// Sweep a family of instances and compare every route.
    Crosscheck(CrosscheckArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Weight entries, comma separated, weakly decreasing (negatives
    /// allowed; the weight is shifted so its last entry is zero).
    #[arg(long, value_name = "a,b,…", allow_hyphen_values = true)]
    lambda: String,
    /// The characteristic, a prime.
    #[arg(long)]
    p: u64,
    /// The base column, 1 ≤ i < n.
    #[arg(long)]
    i: i64,
    /// The drop, 1 ≤ d < p.
    #[arg(long)]
    d: i64,
}

#[derive(Args)]
struct CriterionArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Re-decide antichain by antichain and check the routes agree.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct OperatorArgs {
    /// Weight entries; when given, the operator is reduced at this
    /// weight mod p, otherwise coefficients stay symbolic.
    #[arg(long, value_name = "a,b,…", allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Ambient size; required when no weight is given.
    #[arg(long)]
    n: Option<usize>,
    /// The characteristic, a prime.
    #[arg(long)]
    p: u64,
    /// The base column, 1 ≤ i < n.
    #[arg(long)]
    i: usize,
    /// The drop, 1 ≤ d < p.
    #[arg(long)]
    d: i64,
    /// Cut points as "t:h,t:h,…"; empty for the elementary operator.
    #[arg(long, value_name = "t:h,…", default_value = "", allow_hyphen_values = true)]
    set: String,
    /// Straightening multiset as "a,b,…"; at most d entries in [i..n).
    #[arg(long = "I", value_name = "a,b,…", default_value = "")]
    iset: String,
}

#[derive(Args)]
struct CrosscheckArgs {
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<String>,
    /// Smallest ambient size.
    #[arg(long)]
    n_min: Option<i64>,
    /// Largest ambient size.
    #[arg(long)]
    n_max: Option<i64>,
    /// Bound on the first weight entry (the last is pinned to zero).
    #[arg(long)]
    height: Option<i64>,
    /// Primes to sweep, comma separated.
    #[arg(long, value_name = "p,q,…")]
    primes: Option<String>,
    /// Sampling mode: "exhaustive" or "random".
    #[arg(long)]
    sample: Option<String>,
    /// Seed for random sampling (BRANCHCRIT_SEED overrides).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random instances.
    #[arg(long)]
    count: Option<usize>,
    /// Worker threads; output is identical for every value.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Criterion(args) => cmd_criterion(&args),
        Command::Sets(args) => cmd_sets(&args),
        Command::Operator(args) => cmd_operator(&args),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Crosscheck(args) => cmd_crosscheck(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {}", msg.text);
            ExitCode::from(msg.code)
        }
    }
}

/// A fatal error with the exit code it should produce.
struct Fatal {
    code: u8,
    text: String,
}

/// Invalid input: exit code 2.
fn invalid<T: std::fmt::Display>(text: T) -> Fatal {
    Fatal {
        code: 2,
        text: text.to_string(),
    }
}

/// A failed identity or mismatch: exit code 1.
fn failed<T: std::fmt::Display>(text: T) -> Fatal {
    Fatal {
        code: 1,
        text: text.to_string(),
    }
}

/// Map library errors to exit codes: malformed input is 2, everything
/// else (failed identities, surviving denominators) is 1.
fn from_error(e: Error) -> Fatal {
    let code = match e {
        Error::InvalidInstance(_)
        | Error::InvalidSpec(_)
        | Error::NotDominant(_)
        | Error::DGreaterEqualP { .. }
        | Error::ColumnOutOfRange { .. } => 2,
        _ => 1,
    };
    Fatal {
        code,
        text: e.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Flag parsing helpers

fn parse_weight(s: &str) -> Result<Weight, Fatal> {
    s.split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<Result<Weight, _>>()
        .map_err(|_| invalid(format!("cannot parse weight entries from {s:?}")))
}

fn parse_points(s: &str) -> Result<PointSet, Fatal> {
    let mut out = PointSet::new();
    if s.trim().is_empty() {
        return Ok(out);
    }
    for part in s.split(',') {
        let (t, h) = part
            .split_once(':')
            .ok_or_else(|| invalid(format!("point {part:?} is not of the form t:h")))?;
        let t = t
            .trim()
            .parse::<i64>()
            .map_err(|_| invalid(format!("bad column in point {part:?}")))?;
        let h = h
            .trim()
            .parse::<i64>()
            .map_err(|_| invalid(format!("bad row in point {part:?}")))?;
        if !out.insert((t, h)) {
            return Err(invalid(format!("point ({t},{h}) listed twice")));
        }
    }
    Ok(out)
}

fn parse_multiset(s: &str) -> Result<Multiset, Fatal> {
    if s.trim().is_empty() {
        return Ok(Multiset::new());
    }
    let entries = parse_weight(s)?;
    Ok(Multiset::from_entries(entries))
}

/// Parse and normalize an instance: shift λ so its last entry is zero
/// and validate the parameters.
fn build_instance(args: &InstanceArgs) -> Result<(BranchingInstance, i64), Fatal> {
    let raw = parse_weight(&args.lambda)?;
    let (lambda, shift) = normalize(&raw).map_err(from_error)?;
    let n = lambda.len() as i64;
    let inst =
        BranchingInstance::new(lambda, args.p, args.i, n, args.d).map_err(from_error)?;
    Ok((inst, shift))
}

// ---------------------------------------------------------------------------
// JSON shapes

fn points_json(ps: &PointSet) -> Value {
    Value::Array(ps.iter().map(|&(t, h)| json!([t, h])).collect())
}

fn sets_json(inst: &BranchingInstance) -> Value {
    let s = sets(inst);
    json!({
        "y": points_json(&s.y),
        "c": points_json(&s.c),
        "corner": points_json(&s.frakx),
        "x": points_json(&s.x),
    })
}

fn instance_json(inst: &BranchingInstance, shift: i64) -> Vec<(&'static str, Value)> {
    vec![
        ("lambda", json!(inst.lambda)),
        ("shift", json!(shift)),
        ("p", json!(inst.p)),
        ("n", json!(inst.n)),
        ("i", json!(inst.i)),
        ("d", json!(inst.d)),
    ]
}

fn object(fields: Vec<(&'static str, Value)>) -> Value {
    Value::Object(
        fields
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
    )
}

fn matrix_json(m: &UTMatrix) -> Value {
    Value::Array(
        m.support()
            .into_iter()
            .map(|(a, b, v)| json!([a, b, v]))
            .collect(),
    )
}

fn symbolic_terms_json(x: &HypElement) -> Value {
    Value::Array(
        x.terms()
            .map(|(m, c)| json!({"matrix": matrix_json(m), "coeff": c.to_string()}))
            .collect(),
    )
}

fn reduced_terms_json(v: &FpHypVector) -> Value {
    Value::Array(
        v.entries()
            .map(|(m, c)| json!({"matrix": matrix_json(m), "value": c}))
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// Subcommands

fn cmd_criterion(args: &CriterionArgs) -> Result<ExitCode, Fatal> {
    let (inst, shift) = build_instance(&args.instance)?;
    let fast = decide_fast(&inst);
    let mut fields = instance_json(&inst, shift);
    fields.push(("decision", json!(fast.holds)));
    fields.push(("sets", sets_json(&inst)));
    let witness = match witness_m(&inst) {
        Ok((m, phi)) => json!({
            "m": points_json(&m),
            "phi": phi.iter().map(|(img, src)| json!([[img.0, img.1], [src.0, src.1]])).collect::<Vec<_>>(),
        }),
        Err(Error::CriterionFails { antichain }) => {
            json!({ "blocker": antichain.iter().map(|&(t, h)| json!([t, h])).collect::<Vec<_>>() })
        }
        Err(e) => return Err(from_error(e)),
    };
    fields.push(("witness", witness));
    if args.verify {
        let direct = decide_direct(&inst);
        fields.push((
            "verify",
            json!({
                "direct": direct.holds,
                "antichains": direct.antichains_checked,
                "agree": direct.holds == fast.holds,
            }),
        ));
        if direct.holds != fast.holds {
            println!("{}", object(fields));
            return Err(failed(format!(
                "matching route says {}, antichain route says {}",
                fast.holds, direct.holds
            )));
        }
    }
    println!("{}", object(fields));
    eprintln!(
        "criterion: λ={:?} p={} i={} d={} → {}",
        inst.lambda, inst.p, inst.i, inst.d, fast.holds
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sets(args: &InstanceArgs) -> Result<ExitCode, Fatal> {
    let (inst, shift) = build_instance(args)?;
    let mut fields = instance_json(&inst, shift);
    fields.push(("sets", sets_json(&inst)));
    println!("{}", object(fields));
    let s = sets(&inst);
    eprintln!(
        "sets: |Y|={} |C|={} corner={} |X|={}",
        s.y.len(),
        s.c.len(),
        !s.frakx.is_empty(),
        s.x.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_operator(args: &OperatorArgs) -> Result<ExitCode, Fatal> {
    let lambda = match &args.lambda {
        Some(s) => {
            let raw = parse_weight(s)?;
            let (lam, _) = normalize(&raw).map_err(from_error)?;
            Some(lam)
        }
        None => None,
    };
    let n = match (&lambda, args.n) {
        (Some(lam), Some(n)) if lam.len() != n => {
            return Err(invalid(format!(
                "--n {n} disagrees with the {}-entry weight",
                lam.len()
            )))
        }
        (Some(lam), _) => lam.len(),
        (None, Some(n)) => n,
        (None, None) => return Err(invalid("one of --lambda or --n is required")),
    };
    let m = parse_points(&args.set)?;
    let iset = parse_multiset(&args.iset)?;
    let spec = LoweringSpec::new(args.i, n, args.d, m, iset).map_err(from_error)?;
    let mut fields: Vec<(&'static str, Value)> = vec![
        ("n", json!(n)),
        ("p", json!(args.p)),
        ("i", json!(args.i)),
        ("d", json!(args.d)),
        ("set", points_json(&spec.m)),
        ("iset", json!(spec.iset.entries().collect::<Vec<_>>())),
    ];
    let summary;
    match lambda {
        Some(lam) => {
            let v = script_t_specialized(&spec, &lam, args.p).map_err(from_error)?;
            summary = format!("{} terms, reduced mod {}", v.len(), args.p);
            fields.push(("lambda", json!(lam)));
            fields.push(("terms", reduced_terms_json(&v)));
        }
        None => {
            let x = script_t(&spec, args.p).map_err(from_error)?;
            summary = format!("{} terms, symbolic coefficients", x.num_terms());
            fields.push(("terms", symbolic_terms_json(&x)));
        }
    }
    println!("{}", object(fields));
    eprintln!("operator: {summary}");
    Ok(ExitCode::SUCCESS)
}

/// The target weight of an instance: `λ` lowered by `d` along the long
/// root from column `i` to column `n`.
fn target_weight(inst: &BranchingInstance) -> Weight {
    let mut mu = inst.lambda.clone();
    mu[(inst.i - 1) as usize] -= inst.d;
    mu[(inst.n - 1) as usize] += inst.d;
    mu
}

fn cmd_oracle(args: &InstanceArgs) -> Result<ExitCode, Fatal> {
    let (inst, shift) = build_instance(args)?;
    let mu = target_weight(&inst);
    let cutoff = (inst.n - 1) as usize;
    let report = high_weight_dim(&inst.lambda, &mu, inst.p, cutoff).map_err(from_error)?;
    let wdim = weight_dim_l(&inst.lambda, &mu, inst.p).map_err(from_error)?;
    let wdim_char0 = weight_dim_weyl(&inst.lambda, &mu).map_err(from_error)?;
    let mut fields = instance_json(&inst, shift);
    fields.push(("mu", json!(mu)));
    fields.push(("exists", json!(report.exists)));
    fields.push(("high_weight_dim", json!(report.dim)));
    fields.push(("weight_dim", json!(wdim)));
    fields.push(("weight_dim_char0", json!(wdim_char0)));
    println!("{}", object(fields));
    eprintln!(
        "oracle: exists={} high_weight_dim={} weight_dim={}",
        report.exists, report.dim, wdim
    );
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// Crosscheck sweeps

/// Sweep parameters with every default filled in.
#[derive(Debug, Clone)]
struct SweepConfig {
    n_min: i64,
    n_max: i64,
    height: i64,
    primes: Vec<u64>,
    random: bool,
    seed: u64,
    count: usize,
    jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_min: 2,
            n_max: 3,
            height: 4,
            primes: vec![2, 3],
            random: false,
            seed: 0,
            count: 100,
            jobs: 1,
        }
    }
}

fn parse_sample_mode(s: &str) -> Result<bool, Fatal> {
    match s {
        "exhaustive" => Ok(false),
        "random" => Ok(true),
        other => Err(invalid(format!(
            "sample mode must be \"exhaustive\" or \"random\", got {other:?}"
        ))),
    }
}

/// Read a flat `key=value` config file. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
fn read_config(path: &str, cfg: &mut SweepConfig) -> Result<(), Fatal> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read config {path:?}: {e}")))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("{path}:{}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| invalid(format!("{path}:{}: bad {what}: {value:?}", lineno + 1));
        match key {
            "n_min" => cfg.n_min = value.parse().map_err(|_| bad("n_min"))?,
            "n_max" => cfg.n_max = value.parse().map_err(|_| bad("n_max"))?,
            "height" => cfg.height = value.parse().map_err(|_| bad("height"))?,
            "primes" => {
                cfg.primes = value
                    .split(',')
                    .map(|t| t.trim().parse::<u64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad("primes"))?
            }
            "sample" => cfg.random = parse_sample_mode(value)?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
            "count" => cfg.count = value.parse().map_err(|_| bad("count"))?,
            "jobs" => cfg.jobs = value.parse().map_err(|_| bad("jobs"))?,
            other => {
                return Err(invalid(format!(
                    "{path}:{}: unknown config key {other:?}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

fn build_config(args: &CrosscheckArgs) -> Result<SweepConfig, Fatal> {
    let mut cfg = SweepConfig::default();
    if let Some(path) = &args.config {
        read_config(path, &mut cfg)?;
    }
    if let Some(v) = args.n_min {
        cfg.n_min = v;
    }
    if let Some(v) = args.n_max {
        cfg.n_max = v;
    }
    if let Some(v) = args.height {
        cfg.height = v;
    }
    if let Some(s) = &args.primes {
        cfg.primes = s
            .split(',')
            .map(|t| t.trim().parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| invalid(format!("bad --primes {s:?}")))?;
    }
    if let Some(s) = &args.sample {
        cfg.random = parse_sample_mode(s)?;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.count {
        cfg.count = v;
    }
    if let Some(v) = args.jobs {
        cfg.jobs = v;
    }
    if let Ok(s) = std::env::var("BRANCHCRIT_SEED") {
        cfg.seed = s
            .parse()
            .map_err(|_| invalid(format!("BRANCHCRIT_SEED={s:?} is not a number")))?;
    }
    if cfg.n_min < 2 || cfg.n_max < cfg.n_min {
        return Err(invalid(format!(
            "need 2 ≤ n_min ≤ n_max, got {} and {}",
            cfg.n_min, cfg.n_max
        )));
    }
    if cfg.jobs == 0 {
        return Err(invalid("jobs must be at least 1"));
    }
    Ok(cfg)
}

/// All dominant weights with `n` entries, last entry zero, first entry
/// at most `height`, in lexicographic order.
fn dominant_weights(n: i64, height: i64) -> Vec<Weight> {
    let mut out = Vec::new();
    let mut cur: Weight = Vec::with_capacity(n as usize);
    fn rec(out: &mut Vec<Weight>, cur: &mut Weight, left: i64, bound: i64) {
        if left == 1 {
            cur.push(0);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=bound {
            cur.push(v);
            rec(out, cur, left - 1, v);
            cur.pop();
        }
    }
    rec(&mut out, &mut cur, n, height);
    out
}

fn exhaustive_instances(cfg: &SweepConfig) -> Vec<BranchingInstance> {
    let mut out = Vec::new();
    for n in cfg.n_min..=cfg.n_max {
        for lambda in dominant_weights(n, cfg.height) {
            for &p in &cfg.primes {
                for d in 1..p as i64 {
                    for i in 1..n {
                        out.push(
                            BranchingInstance::new(lambda.clone(), p, i, n, d)
                                .expect("enumerated instances are valid"),
                        );
                    }
                }
            }
        }
    }
    out
}

fn random_instances(cfg: &SweepConfig) -> Vec<BranchingInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    while out.len() < cfg.count {
        let n = rng.gen_range(cfg.n_min..=cfg.n_max);
        let mut lambda: Weight = (0..n - 1)
            .map(|_| rng.gen_range(0..=cfg.height))
            .collect();
        lambda.sort_unstable_by(|a, b| b.cmp(a));
        lambda.push(0);
        let p = *cfg.primes.choose(&mut rng).expect("primes nonempty");
        let d = rng.gen_range(1..p as i64);
        let i = rng.gen_range(1..n);
        out.push(
            BranchingInstance::new(lambda, p, i, n, d).expect("sampled instances are valid"),
        );
    }
    out
}

/// One sweep row: every route's answer plus the witness checks that
/// apply when the decision is positive.
fn check_instance(index: usize, inst: &BranchingInstance) -> (Value, bool) {
    let fast = decide_fast(inst);
    let direct = decide_direct(inst);
    let mu = target_weight(inst);
    let cutoff = (inst.n - 1) as usize;
    let mut fields: Vec<(&'static str, Value)> = vec![
        ("index", json!(index)),
        ("lambda", json!(inst.lambda)),
        ("p", json!(inst.p)),
        ("i", json!(inst.i)),
        ("d", json!(inst.d)),
        ("fast", json!(fast.holds)),
        ("direct", json!(direct.holds)),
    ];
    let mut ok = fast.holds == direct.holds;
    match high_weight_dim(&inst.lambda, &mu, inst.p, cutoff) {
        Ok(report) => {
            fields.push(("oracle", json!(report.exists)));
            fields.push(("high_weight_dim", json!(report.dim)));
            ok = ok && report.exists == fast.holds;
        }
        Err(e) => {
            fields.push(("oracle_error", json!(e.to_string())));
            ok = false;
        }
    }
    if ok && fast.holds {
        let witness_ok = (|| -> branchcrit::Result<(bool, u64)> {
            let (m, _) = witness_m(inst)?;
            let spec = LoweringSpec::new(
                inst.i as usize,
                inst.n as usize,
                inst.d,
                m,
                Multiset::new(),
            )?;
            let v = script_t_specialized(&spec, &inst.lambda, inst.p)?;
            let status = vector_status(&v, &inst.lambda, inst.p, cutoff)?;
            let scalar = check_scalar_identity(inst)?;
            Ok((!status.is_zero_in_l && status.is_high_weight, scalar))
        })();
        match witness_ok {
            Ok((good, scalar)) => {
                fields.push(("witness_high_weight", json!(good)));
                fields.push(("scalar", json!(scalar)));
                ok = ok && good;
            }
            Err(e) => {
                fields.push(("witness_error", json!(e.to_string())));
                ok = false;
            }
        }
    }
    fields.push(("ok", json!(ok)));
    (object(fields), ok)
}

fn cmd_crosscheck(args: &CrosscheckArgs) -> Result<ExitCode, Fatal> {
    let cfg = build_config(args)?;
    let instances = if cfg.random {
        random_instances(&cfg)
    } else {
        exhaustive_instances(&cfg)
    };
    println!(
        "{}",
        json!({
            "config": {
                "n_min": cfg.n_min,
                "n_max": cfg.n_max,
                "height": cfg.height,
                "primes": cfg.primes,
                "sample": if cfg.random { "random" } else { "exhaustive" },
                "seed": cfg.seed,
                "count": cfg.count,
                "instances": instances.len(),
            }
        })
    );
    let t0 = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| invalid(format!("cannot build a {}-thread pool: {e}", cfg.jobs)))?;
    let rows: Vec<(Value, bool)> = pool.install(|| {
        use rayon::prelude::*;
        instances
            .par_iter()
            .enumerate()
            .map(|(idx, inst)| check_instance(idx, inst))
            .collect()
    });
    let mut holds = 0usize;
    let mut mismatches = Vec::new();
    for (row, ok) in &rows {
        println!("{row}");
        if row.get("fast") == Some(&Value::Bool(true)) {
            holds += 1;
        }
        if !ok {
            mismatches.push(row.clone());
        }
    }
    let elapsed = t0.elapsed();
    eprintln!(
        "crosscheck: {} instances, {} hold, {} fail, {} mismatches, {:.1}s (sample={}, seed={}, jobs={})",
        rows.len(),
        holds,
        rows.len() - holds,
        mismatches.len(),
        elapsed.as_secs_f64(),
        if cfg.random { "random" } else { "exhaustive" },
        cfg.seed,
        cfg.jobs,
    );
    if !mismatches.is_empty() {
        for row in &mismatches {
            eprintln!("mismatch: {row}");
        }
        return Err(failed(format!(
            "{} instance(s) disagree across routes",
            mismatches.len()
        )));
    }
    Ok(ExitCode::SUCCESS)
}
