//! Command-line front end: one subcommand per pipeline, reproducible
//! machine-readable reports.
//!
//! Exit codes: 0 when the run succeeds and every certified check holds,
//! 1 when a check fails or a verdict stays unresolved, 2 on usage,
//! parse, or precondition errors.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use qiline_core::actions::{
    holder_homomorphism_check, relation_violation_scan, translation_number, CandidateAction,
    Chart, LineHomeo,
};
use qiline_core::eval::eval_f64;
use qiline_core::expr::MapExpr;
use qiline_core::generators::{
    diffz_escape_check, independence_test, relation_suite, GeneratorSpec, WordSpec,
};
use qiline_core::metrics::{
    bounded_distance, displacement_profile, drift_classify, estimate_qi_constants, DriftClass,
    SampleGrid,
};
use qiline_core::ordering::{assign_signs, compare, semigroup_word_check, OrderVerdict};
use qiline_core::parse::parse_map;
use qiline_core::{Error, EvalConfig};

#[derive(Parser)]
#[command(
    name = "qiline",
    version,
    about = "Evaluate, compare, and certify eventually-defined homeomorphisms of the line"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Geometric sample grid, written x0,ratio,count
    #[arg(long, global = true, default_value = "1,2,40")]
    grid: String,
    /// Relative evaluation tolerance (default 1e-12)
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Mantissa bits for high-precision evaluation (default 128);
    /// the QILINE_PRECISION_BITS environment variable wins over this
    #[arg(long, global = true)]
    bits: Option<u32>,
    /// Output format; each subcommand has a native default
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Recorded in every JSON report; no subcommand draws randomness
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Also write the report to <command>-<confighash>.<ext> here
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a map expression at a point
    Eval {
        /// Map DSL text; '*' composes, left factor applied last
        map: String,
        /// Evaluation point
        #[arg(long, allow_hyphen_values = true)]
        at: f64,
    },
    /// Classify displacement drift as sublinear or linear
    Classify { map: String },
    /// Estimate quasi-isometry constants (K, C) over the grid
    QiConstants { map: String },
    /// Decide bounded-distance equivalence of two maps
    Equiv { f: String, g: String },
    /// Order two maps by eventual displacement
    Order { f: String, g: String },
    /// Assign cone signs to a family and certify positive words
    Orderability {
        #[arg(required = true)]
        maps: Vec<String>,
        /// Longest semigroup word length checked
        #[arg(long, default_value_t = 3)]
        max_len: u32,
    },
    /// Measure the generator relation suite over the grid
    Relations {
        /// Run every relation family (the default and only mode)
        #[arg(long)]
        all: bool,
    },
    /// Fit the displacement exponent of a word in B-generators
    Independence {
        /// Letters like 'B(1,1)' or 'B(2,-3)^2', leftmost applied last
        #[arg(required = true)]
        letters: Vec<String>,
    },
    /// Translation numbers and drift additivity of commuting maps
    Holder {
        #[arg(required = true)]
        maps: Vec<String>,
        /// Orbit starting point
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        at: f64,
        /// Orbit iterations per translation number
        #[arg(long, default_value_t = 10_000)]
        iters: u32,
    },
    /// Scan the two-shift product family for relation violations
    Obstruction {
        /// Parameter point c0,c1,c2; repeatable (default: a 12-point grid)
        #[arg(long = "params", value_name = "C0,C1,C2", allow_hyphen_values = true)]
        params: Vec<String>,
    },
    /// Escape rate of a periodic lift conjugated by the glue map
    Diffz { lift: String },
    /// Sample the displacement profile x, f(x)-x over the grid
    Profile { map: String },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Eval { .. } => "eval",
            Cmd::Classify { .. } => "classify",
            Cmd::QiConstants { .. } => "qi-constants",
            Cmd::Equiv { .. } => "equiv",
            Cmd::Order { .. } => "order",
            Cmd::Orderability { .. } => "orderability",
            Cmd::Relations { .. } => "relations",
            Cmd::Independence { .. } => "independence",
            Cmd::Holder { .. } => "holder",
            Cmd::Obstruction { .. } => "obstruction",
            Cmd::Diffz { .. } => "diffz",
            Cmd::Profile { .. } => "profile",
        }
    }

    fn native_format(&self) -> Format {
        match self {
            Cmd::Eval { .. } => Format::Plain,
            Cmd::Profile { .. } => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Plain,
}

impl Format {
    fn label(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Plain => "plain",
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Plain => "txt",
        }
    }
}

struct Failure {
    code: u8,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        msg: msg.into(),
    }
}

/// Bad inputs (syntax, invalid arguments, violated preconditions) are
/// usage errors; everything else is a check that failed to certify.
fn core_err(e: Error) -> Failure {
    let code = match &e {
        Error::Parse { .. }
        | Error::Invalid(_)
        | Error::Precondition(_)
        | Error::DegenerateGrid(_)
        | Error::GridBelowDomain { .. }
        | Error::BelowDomain { .. } => 2,
        _ => 1,
    };
    Failure {
        code,
        msg: e.to_string(),
    }
}

/// Everything one subcommand produces, before format selection.
struct Report {
    exit: u8,
    /// Subcommand inputs, hashed together with the config for bundles.
    args: Value,
    json_fields: Vec<(&'static str, Value)>,
    /// (header, rows) when the subcommand has a CSV schema.
    csv: Option<(&'static str, Vec<String>)>,
    plain: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("qiline: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let bits = effective_bits(cli.bits)?;
    let mut cfg = EvalConfig::with_bits(bits);
    if let Some(t) = cli.tol {
        if !t.is_finite() || t <= 0.0 {
            return Err(usage(format!("--tol must be positive and finite, got {t}")));
        }
        cfg.rel_tol = t;
    }
    let grid = parse_grid(&cli.grid)?;
    let fmt = cli.format.unwrap_or_else(|| cli.cmd.native_format());
    let report = dispatch(&cli.cmd, &grid, &cfg, fmt)?;

    let config = json!({
        "grid": cli.grid,
        "relTol": cfg.rel_tol,
        "precisionBits": bits,
        "seed": cli.seed,
        "format": fmt.label(),
    });
    let stdout = match fmt {
        Format::Json => output::json_line(cli.cmd.name(), report.json_fields, config.clone()),
        Format::Csv => match &report.csv {
            Some((header, rows)) => output::csv_table(header, rows),
            None => {
                return Err(usage(format!(
                    "'{}' has no CSV schema; use --format json or plain",
                    cli.cmd.name()
                )))
            }
        },
        Format::Plain => {
            let mut s = report.plain.clone();
            s.push('\n');
            s
        }
    };
    print!("{stdout}");

    if let Some(dir) = &cli.out_dir {
        let descriptor = json!({
            "command": cli.cmd.name(),
            "args": report.args,
            "config": config,
        });
        let hash = output::config_hash(&descriptor);
        output::write_bundle(dir, cli.cmd.name(), &hash, fmt.extension(), &stdout)
            .map_err(|e| Failure {
                code: 1,
                msg: format!("bundle write failed: {e}"),
            })?;
    }
    Ok(report.exit)
}

fn effective_bits(flag: Option<u32>) -> Result<u32, Failure> {
    let bits = match std::env::var("QILINE_PRECISION_BITS") {
        Ok(s) => s
            .trim()
            .parse::<u32>()
            .map_err(|_| usage(format!("QILINE_PRECISION_BITS must be an integer, got {s:?}")))?,
        Err(std::env::VarError::NotPresent) => flag.unwrap_or(128),
        Err(e) => return Err(usage(format!("QILINE_PRECISION_BITS: {e}"))),
    };
    if bits < 8 {
        return Err(usage(format!("precision must be at least 8 bits, got {bits}")));
    }
    Ok(bits)
}

fn parse_grid(text: &str) -> Result<SampleGrid, Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(usage(format!("--grid expects x0,ratio,count, got {text:?}")));
    }
    let x0: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| usage(format!("grid x0 is not a number: {:?}", parts[0])))?;
    let ratio: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| usage(format!("grid ratio is not a number: {:?}", parts[1])))?;
    let count: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| usage(format!("grid count is not a positive integer: {:?}", parts[2])))?;
    SampleGrid::new(x0, ratio, count).map_err(core_err)
}

/// Subcommands that sample in f64 reject grids whose top overflows.
fn require_f64_grid(grid: &SampleGrid) -> Result<(), Failure> {
    if !grid.top().is_finite() {
        return Err(usage(format!(
            "grid top {:.3e}*{}^{} exceeds the f64 range; this subcommand samples in f64",
            grid.x0,
            grid.ratio,
            grid.count - 1
        )));
    }
    Ok(())
}

fn parse_params3(text: &str) -> Result<[f64; 3], Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(usage(format!("--params expects c0,c1,c2, got {text:?}")));
    }
    let mut p = [0.0f64; 3];
    for (slot, part) in p.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| usage(format!("parameter is not a number: {part:?}")))?;
    }
    Ok(p)
}

/// A letter is a B-generator with an optional integer power suffix,
/// e.g. "B(1,1)" or "B(2,-3)^2".
fn parse_letter(term: &str) -> Result<(GeneratorSpec, i64), Failure> {
    let (base, exp) = match term.split_once('^') {
        Some((b, e)) => (
            b,
            e.parse::<i64>()
                .map_err(|_| usage(format!("bad exponent {e:?} in letter {term:?}")))?,
        ),
        None => (term, 1),
    };
    match parse_map(base).map_err(core_err)? {
        MapExpr::PowerShift { i, s } => Ok((GeneratorSpec::B { i, s }, exp)),
        other => Err(usage(format!(
            "independence letters must be B(i,s) powers, got {other}"
        ))),
    }
}

/// Candidate product action scanned by `obstruction`: two globally
/// translating shift summands and a scaling acting only inside two
/// disjoint charts. The shift drifts can cancel linearly, so every
/// parameter point either violates a relation or kills injectivity.
fn translation_summand_family(p: [f64; 3]) -> qiline_core::Result<CandidateAction> {
    let charts = vec![Chart::new(0.0, 1.0)?, Chart::new(2.0, 3.0)?];
    Ok(CandidateAction {
        i1: 1.0,
        i2: 2.0,
        a: Box::new(move |t| {
            Ok(LineHomeo::Diagonal {
                charts: charts.clone(),
                inner: MapExpr::affine(1.0, p[0] * t.ln())?,
            })
        }),
        b1: Box::new(move |s| Ok(LineHomeo::from(MapExpr::affine(1.0, p[1] * s)?))),
        b2: Box::new(move |s| Ok(LineHomeo::from(MapExpr::affine(1.0, p[2] * s)?))),
    })
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn dispatch(cmd: &Cmd, grid: &SampleGrid, cfg: &EvalConfig, fmt: Format) -> Result<Report, Failure> {
    match cmd {
        Cmd::Eval { map, at } => {
            let expr = parse_map(map).map_err(core_err)?;
            let v = eval_f64(&expr, *at, cfg).map_err(core_err)?;
            Ok(Report {
                exit: 0,
                args: json!({"map": map, "at": at}),
                json_fields: vec![
                    ("map", json!(map)),
                    ("at", json!(at)),
                    ("value", json!(v)),
                ],
                csv: None,
                plain: format!("{v}"),
            })
        }
        Cmd::Classify { map } => {
            require_f64_grid(grid)?;
            let expr = parse_map(map).map_err(core_err)?;
            let drift = drift_classify(&expr, grid, cfg).map_err(core_err)?;
            let exit = u8::from(matches!(drift, DriftClass::Unresolved(_)));
            Ok(Report {
                exit,
                args: json!({"map": map}),
                json_fields: vec![("map", json!(map)), ("drift", to_value(&drift))],
                csv: None,
                plain: format!("{drift:?}"),
            })
        }
        Cmd::QiConstants { map } => {
            require_f64_grid(grid)?;
            let expr = parse_map(map).map_err(core_err)?;
            let est = estimate_qi_constants(&expr, grid, cfg).map_err(core_err)?;
            Ok(Report {
                exit: 0,
                args: json!({"map": map}),
                json_fields: vec![
                    ("map", json!(map)),
                    ("k", json!(est.k)),
                    ("c", json!(est.c)),
                ],
                csv: None,
                plain: format!("K = {}, C = {}", est.k, est.c),
            })
        }
        Cmd::Equiv { f, g } => {
            require_f64_grid(grid)?;
            let fe = parse_map(f).map_err(core_err)?;
            let ge = parse_map(g).map_err(core_err)?;
            let verdict = bounded_distance(&fe, &ge, grid, cfg).map_err(core_err)?;
            Ok(Report {
                exit: 0,
                args: json!({"f": f, "g": g}),
                json_fields: vec![
                    ("f", json!(f)),
                    ("g", json!(g)),
                    ("verdict", to_value(&verdict)),
                ],
                csv: None,
                plain: format!("{verdict:?}"),
            })
        }
        Cmd::Order { f, g } => {
            require_f64_grid(grid)?;
            let fe = parse_map(f).map_err(core_err)?;
            let ge = parse_map(g).map_err(core_err)?;
            let verdict = compare(&fe, &ge, grid, cfg).map_err(core_err)?;
            let exit = u8::from(matches!(verdict, OrderVerdict::Unresolved(_)));
            Ok(Report {
                exit,
                args: json!({"f": f, "g": g}),
                json_fields: vec![
                    ("f", json!(f)),
                    ("g", json!(g)),
                    ("verdict", to_value(&verdict)),
                ],
                csv: None,
                plain: format!("{verdict:?}"),
            })
        }
        Cmd::Orderability { maps, max_len } => {
            let fs: Vec<MapExpr> = maps
                .iter()
                .map(|s| parse_map(s).map_err(core_err))
                .collect::<Result<_, _>>()?;
            let sa = assign_signs(&fs, grid, cfg).map_err(core_err)?;
            let wc = semigroup_word_check(&sa, &fs, *max_len, grid, cfg).map_err(core_err)?;
            let exit = u8::from(!wc.all_positive);
            let plain = format!(
                "epsilons {:?} in {} stages; {} words checked, all positive: {} (worst {} = {:.6e})",
                sa.epsilons,
                sa.stages.len(),
                wc.words_checked,
                wc.all_positive,
                wc.worst_word,
                wc.worst_value
            );
            Ok(Report {
                exit,
                args: json!({"maps": maps, "maxLen": max_len}),
                json_fields: vec![
                    ("maps", json!(maps)),
                    ("assignment", to_value(&sa)),
                    ("wordCheck", to_value(&wc)),
                ],
                csv: None,
                plain,
            })
        }
        Cmd::Relations { all } => {
            require_f64_grid(grid)?;
            let reports = relation_suite(grid, cfg).map_err(core_err)?;
            let passed = reports.iter().filter(|r| r.pass).count();
            let exit = u8::from(passed != reports.len());
            let plain = format!("{passed}/{} relations hold", reports.len());
            Ok(Report {
                exit,
                args: json!({"all": all}),
                json_fields: vec![
                    ("pass", json!(passed == reports.len())),
                    ("reports", to_value(&reports)),
                ],
                csv: None,
                plain,
            })
        }
        Cmd::Independence { letters } => {
            require_f64_grid(grid)?;
            let parsed: Vec<(GeneratorSpec, i64)> = letters
                .iter()
                .map(|t| parse_letter(t))
                .collect::<Result<_, _>>()?;
            let word = WordSpec::new(parsed).map_err(core_err)?;
            let rep = independence_test(&word, grid, cfg).map_err(core_err)?;
            let plain = format!(
                "{:?} (expected exponent {:?})",
                rep.verdict, rep.expected_exponent
            );
            Ok(Report {
                exit: 0,
                args: json!({"letters": letters}),
                json_fields: vec![("letters", json!(letters)), ("report", to_value(&rep))],
                csv: None,
                plain,
            })
        }
        Cmd::Holder { maps, at, iters } => {
            let mut names = maps.clone();
            names.sort();
            names.dedup();
            if names.len() != maps.len() {
                return Err(usage("holder generators must be distinct"));
            }
            let exprs: Vec<(String, MapExpr)> = maps
                .iter()
                .map(|s| parse_map(s).map(|e| (s.clone(), e)).map_err(core_err))
                .collect::<Result<_, _>>()?;
            let mut tau = Map::new();
            for (name, e) in &exprs {
                let t = translation_number(e, *at, *iters, cfg).map_err(core_err)?;
                tau.insert(name.clone(), json!(t.value));
            }
            let mut residual = 0.0f64;
            let mut additive = true;
            for i in 0..exprs.len() {
                for j in i + 1..exprs.len() {
                    let r = holder_homomorphism_check(&exprs[i].1, &exprs[j].1, *at, *iters, cfg)
                        .map_err(core_err)?;
                    residual = residual.max(r.residual);
                    additive &= r.additive;
                }
            }
            // CSV view: the orbit of the first generator, one row per step.
            let csv = if fmt == Format::Csv {
                let mut rows = Vec::with_capacity(*iters as usize + 1);
                let mut x = *at;
                rows.push(format!("0,{}", output::float_cell(x)));
                for step in 1..=*iters {
                    x = eval_f64(&exprs[0].1, x, cfg).map_err(core_err)?;
                    rows.push(format!("{step},{}", output::float_cell(x)));
                }
                Some(("step,x", rows))
            } else {
                None
            };
            let plain = format!(
                "tau = {:?}; additivity residual {residual:.6e}, additive: {additive}",
                exprs.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>()
            );
            Ok(Report {
                exit: u8::from(!additive),
                args: json!({"maps": maps, "at": at, "iters": iters}),
                json_fields: vec![
                    ("generators", json!(maps)),
                    ("tau", Value::Object(tau)),
                    ("residual", json!(residual)),
                    ("additive", json!(additive)),
                ],
                csv,
                plain,
            })
        }
        Cmd::Obstruction { params } => {
            let pts: Vec<[f64; 3]> = if params.is_empty() {
                let mut pts = Vec::new();
                for &c0 in &[0.5, 1.0, 2.0] {
                    for &c1 in &[0.3, 0.7] {
                        for &c2 in &[0.2, 0.9] {
                            pts.push([c0, c1, c2]);
                        }
                    }
                }
                pts
            } else {
                params
                    .iter()
                    .map(|t| parse_params3(t))
                    .collect::<Result<_, _>>()?
            };
            let reports = relation_violation_scan(&translation_summand_family, &pts, grid, cfg)
                .map_err(core_err)?;
            let rejected = reports.iter().filter(|r| r.rejected).count();
            let exit = u8::from(rejected != reports.len());
            let plain = format!("{rejected}/{} parameter points rejected", reports.len());
            Ok(Report {
                exit,
                args: json!({"params": pts}),
                json_fields: vec![
                    ("allRejected", json!(rejected == reports.len())),
                    ("reports", to_value(&reports)),
                ],
                csv: None,
                plain,
            })
        }
        Cmd::Diffz { lift } => {
            let expr = parse_map(lift).map_err(core_err)?;
            let rep = diffz_escape_check(&expr, cfg).map_err(core_err)?;
            let plain = format!(
                "escaped: {} (constant {:.6e} from x* = {})",
                rep.escaped, rep.growth_constant, rep.x_star
            );
            Ok(Report {
                exit: u8::from(!rep.escaped),
                args: json!({"lift": lift}),
                json_fields: vec![("lift", json!(lift)), ("report", to_value(&rep))],
                csv: None,
                plain,
            })
        }
        Cmd::Profile { map } => {
            require_f64_grid(grid)?;
            let expr = parse_map(map).map_err(core_err)?;
            let pts = displacement_profile(&expr, grid, cfg).map_err(core_err)?;
            let rows: Vec<String> = pts
                .iter()
                .map(|(x, d)| format!("{},{}", output::float_cell(*x), output::float_cell(*d)))
                .collect();
            let last = pts.last().expect("grids are nonempty");
            let plain = format!(
                "{} samples; displacement at x = {:.6e} is {:.6e}",
                pts.len(),
                last.0,
                last.1
            );
            Ok(Report {
                exit: 0,
                args: json!({"map": map}),
                json_fields: vec![("map", json!(map)), ("profile", to_value(&pts))],
                csv: Some(("x,displacement", rows)),
                plain,
            })
        }
    }
}
