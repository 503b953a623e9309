//! Command-line front end. [`run`] parses arguments, writes the report to
//! the given sink and returns the process exit code.

use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::channels::{Atom, Protocol};
use crate::convertibility::{decide, synthesize_mems_protocol, verify_protocol, DecideOptions, Verdict};
use crate::exec::Exec;
use crate::measures::{bell_monotones, concurrence, eof, negativity, MonotoneTriple};
use crate::oracle::{
    convert_search, falsify_rank_monotonicity_with, monotone_audit_with, FalsifierMode, MatrixParts, SearchReport,
};
use crate::qmat::{CMat2, CMat4};
use crate::states::{
    classify_family, make_bell_diagonal, make_mems, make_werner, state_scalars, BellWeights, DensityMatrix, FamilyTag,
    MemsWeights, StateError, WernerParam, DEFAULT_CLASSIFY_TOL,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_FORBIDDEN: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_INTERNAL: i32 = 70;

/// On-disk description of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Werner { w: f64 },
    BellDiagonal { lambda: [f64; 4] },
    Mems { lambda: [f64; 4] },
    Dense { re: [[f64; 4]; 4], im: [[f64; 4]; 4] },
}

impl StateSpec {
    pub fn to_state(&self) -> Result<DensityMatrix, StateError> {
        match self {
            StateSpec::Werner { w } => Ok(make_werner(WernerParam::new(*w)?)),
            StateSpec::BellDiagonal { lambda } => Ok(make_bell_diagonal(BellWeights::new(*lambda)?)),
            StateSpec::Mems { lambda } => Ok(make_mems(MemsWeights::new(*lambda)?)),
            StateSpec::Dense { re, im } => {
                let m = CMat4::from(&MatrixParts { re: *re, im: *im });
                DensityMatrix::new(m)
            }
        }
    }

    pub fn dense(rho: &DensityMatrix) -> Self {
        let p = MatrixParts::from(rho.matrix());
        StateSpec::Dense { re: p.re, im: p.im }
    }
}

/// Real and imaginary parts of a 2×2 operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mat2Spec {
    pub re: [[f64; 2]; 2],
    pub im: [[f64; 2]; 2],
}

impl From<&CMat2> for Mat2Spec {
    fn from(m: &CMat2) -> Self {
        Self {
            re: m.0.map(|r| r.map(|z| z.re)),
            im: m.0.map(|r| r.map(|z| z.im)),
        }
    }
}

impl From<&Mat2Spec> for CMat2 {
    fn from(s: &Mat2Spec) -> Self {
        let mut m = CMat2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                m.0[i][j] = C64::new(s.re[i][j], s.im[i][j]);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AtomSpec {
    LocalUnitary { weight: f64, ua: Mat2Spec, ub: Mat2Spec },
    DiscardPrepare { weight: f64, state: StateSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub atoms: Vec<AtomSpec>,
}

impl ProtocolSpec {
    pub fn from_protocol(p: &Protocol) -> Self {
        let atoms = p
            .atoms()
            .iter()
            .map(|(weight, atom)| match atom {
                Atom::LocalUnitary { ua, ub } => AtomSpec::LocalUnitary {
                    weight: *weight,
                    ua: ua.into(),
                    ub: ub.into(),
                },
                Atom::DiscardPrepare(sigma) => AtomSpec::DiscardPrepare {
                    weight: *weight,
                    state: StateSpec::dense(sigma),
                },
            })
            .collect();
        Self { atoms }
    }

    pub fn to_protocol(&self) -> Result<Protocol, String> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (i, a) in self.atoms.iter().enumerate() {
            atoms.push(match a {
                AtomSpec::LocalUnitary { weight, ua, ub } => (
                    *weight,
                    Atom::LocalUnitary {
                        ua: ua.into(),
                        ub: ub.into(),
                    },
                ),
                AtomSpec::DiscardPrepare { weight, state } => {
                    let sigma = state.to_state().map_err(|e| format!("atoms[{i}].state: {e}"))?;
                    (*weight, Atom::DiscardPrepare(sigma))
                }
            });
        }
        Protocol::new(atoms).map_err(|e| format!("atoms: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "entconv", version, about = "Two-qubit entanglement convertibility")]
struct Cli {
    /// Numerical rank tolerance
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Machine-readable output
    #[arg(long, global = true)]
    json: bool,
    /// Run oracle trials on one thread
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether FROM converts to TO
    Check { from: PathBuf, to: PathBuf },
    /// Entanglement measures and family of a state
    Measures { state: PathBuf },
    /// Werner/MEMS identity-or-prepare protocol parameters
    Synthesize { from: PathBuf, to: PathBuf },
    /// Apply a protocol to a state
    Apply { protocol: PathBuf, state: PathBuf },
    /// Numerical protocol search
    Search {
        from: PathBuf,
        to: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
    },
    /// Rank falsifier and monotone audit
    Audit {
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

struct Ctx {
    tol: f64,
    seed: u64,
    json: bool,
    exec: Exec,
}

/// Runs the tool on `argv` (including the program name).
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    if !(cli.tol.is_finite() && cli.tol > 0.0) {
        let _ = writeln!(err, "error: --tol: must be a positive number, got {}", cli.tol);
        return EXIT_USAGE;
    }
    let ctx = Ctx {
        tol: cli.tol,
        seed: cli.seed,
        json: cli.json,
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
    };
    let result = catch_unwind(AssertUnwindSafe(|| dispatch(&cli.command, &ctx)));
    match result {
        Ok(Ok((report, code))) => {
            let text = if ctx.json {
                serde_json::to_string(&report).expect("serializable report")
            } else {
                serde_json::to_string_pretty(&report).expect("serializable report")
            };
            let _ = writeln!(out, "{text}");
            code
        }
        Ok(Err(e)) => {
            let msg = match &e {
                CliError::Input(m) => format!("error: {m}"),
                CliError::Internal(m) => format!("internal error: {m}"),
            };
            let _ = writeln!(err, "{msg}");
            e.code()
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            let _ = writeln!(err, "internal error: {msg}");
            EXIT_INTERNAL
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_state(path: &Path) -> Result<DensityMatrix, CliError> {
    let spec: StateSpec = read_json(path)?;
    spec.to_state().map_err(|e| CliError::Input(format!("{}: {}", path.display(), state_error_field(&e))))
}

fn state_error_field(e: &StateError) -> String {
    match e {
        StateError::OutOfRange { .. } => e.to_string(),
        StateError::BadTrace(_) | StateError::NotPsd(_) | StateError::Matrix(_) => format!("re/im: {e}"),
    }
}

fn verdict_code(v: &Verdict) -> i32 {
    match v {
        Verdict::Convertible { .. } => EXIT_OK,
        Verdict::Forbidden { .. } => EXIT_FORBIDDEN,
        Verdict::Inconclusive { .. } => EXIT_INCONCLUSIVE,
    }
}

fn dispatch(cmd: &Command, ctx: &Ctx) -> Result<(Value, i32), CliError> {
    match cmd {
        Command::Check { from, to } => check(&read_state(from)?, &read_state(to)?, ctx),
        Command::Measures { state } => Ok((json!({ "measures": measures(&read_state(state)?, ctx) }), EXIT_OK)),
        Command::Synthesize { from, to } => synthesize(&read_state(from)?, &read_state(to)?),
        Command::Apply { protocol, state } => {
            let spec: ProtocolSpec = read_json(protocol)?;
            let p = spec
                .to_protocol()
                .map_err(|e| CliError::Input(format!("{}: {e}", protocol.display())))?;
            let rho = read_state(state)?;
            let out = p.apply(&rho);
            Ok((json!({ "state": StateSpec::dense(&out) }), EXIT_OK))
        }
        Command::Search { from, to, budget } => {
            let (rho, rho2) = (read_state(from)?, read_state(to)?);
            let r = convert_search(&rho, &rho2, *budget, ctx.seed);
            Ok((
                json!({
                    "best_distance": r.best_distance,
                    "found": r.protocol.is_some(),
                    "protocol": r.protocol.as_ref().map(ProtocolSpec::from_protocol),
                    "evaluations": r.evaluations,
                    "restart_best": r.restart_best,
                    "seed": ctx.seed,
                }),
                EXIT_OK,
            ))
        }
        Command::Audit { trials } => {
            let falsifier = falsify_rank_monotonicity_with(*trials, ctx.seed, ctx.exec, FalsifierMode::Separable);
            let audit = monotone_audit_with(*trials, ctx.seed, ctx.exec, &[]);
            let clean = falsifier.is_clean() && audit.is_clean();
            Ok((
                json!({
                    "seed": ctx.seed,
                    "falsifier": summary(&falsifier),
                    "monotone_audit": summary(&audit),
                }),
                if clean { EXIT_OK } else { EXIT_FINDINGS },
            ))
        }
    }
}

fn summary(r: &SearchReport) -> Value {
    json!({
        "trials": r.trials,
        "checks": r.checks,
        "findings": r.counterexamples.len(),
        "counterexamples": r.counterexamples,
        "elapsed": r.elapsed,
    })
}

fn family_json(tag: &FamilyTag) -> Value {
    match tag {
        FamilyTag::Werner(w) => json!({ "kind": "werner", "w": w.value() }),
        FamilyTag::BellDiagonal { weights, order } => {
            json!({ "kind": "bell_diagonal", "lambda": weights.lambda(), "order": order })
        }
        FamilyTag::Mems(l) => json!({ "kind": "mems", "lambda": l.lambda() }),
        FamilyTag::General => json!({ "kind": "general" }),
    }
}

fn monotones_of(tag: &FamilyTag) -> Option<MonotoneTriple> {
    match tag {
        FamilyTag::Werner(w) => Some(bell_monotones(&w.bell_weights())),
        FamilyTag::BellDiagonal { weights, .. } => Some(bell_monotones(weights)),
        _ => None,
    }
}

fn measures(rho: &DensityMatrix, ctx: &Ctx) -> Value {
    let s = state_scalars(rho);
    let tag = classify_family(rho, DEFAULT_CLASSIFY_TOL);
    json!({
        "concurrence": concurrence(rho),
        "eof": eof(rho),
        "negativity": negativity(rho),
        "purity": s.purity,
        "entropy": s.entropy,
        "rank": rho.rank(ctx.tol),
        "family": family_json(&tag),
        "monotones": monotones_of(&tag),
    })
}

fn check(rho: &DensityMatrix, rho2: &DensityMatrix, ctx: &Ctx) -> Result<(Value, i32), CliError> {
    let opts = DecideOptions {
        rank_tol: ctx.tol,
        ..Default::default()
    };
    let v = decide(rho, rho2, &opts);
    let residual = v.protocol().map(|p| verify_protocol(p, rho, rho2));
    let (reason, detail) = match &v {
        Verdict::Convertible { certificate, .. } => (None, certificate.clone()),
        Verdict::Forbidden { reason, detail } => (Some(reason.code()), detail.clone()),
        Verdict::Inconclusive { detail } => (None, detail.clone()),
    };
    let report = json!({
        "verdict": v.label(),
        "reason": reason,
        "detail": detail,
        "protocol": v.protocol().map(ProtocolSpec::from_protocol),
        "residual": residual,
        "measures": { "from": measures(rho, ctx), "to": measures(rho2, ctx) },
    });
    Ok((report, verdict_code(&v)))
}

fn as_mems(tag: &FamilyTag) -> Option<MemsWeights> {
    match tag {
        FamilyTag::Werner(w) => Some(w.mems_weights()),
        FamilyTag::Mems(l) => Some(*l),
        _ => None,
    }
}

fn synthesize(rho: &DensityMatrix, rho2: &DensityMatrix) -> Result<(Value, i32), CliError> {
    let (from, to) = (classify_family(rho, DEFAULT_CLASSIFY_TOL), classify_family(rho2, DEFAULT_CLASSIFY_TOL));
    let (Some(a), Some(b)) = (as_mems(&from), as_mems(&to)) else {
        return Ok((
            json!({
                "verdict": "infeasible",
                "detail": format!("synthesis covers Werner and MEMS states, got {} → {}", from.name(), to.name()),
            }),
            EXIT_INCONCLUSIVE,
        ));
    };
    match synthesize_mems_protocol(&a, &b) {
        Ok(params) => {
            let p = params.protocol();
            let residual = verify_protocol(&p, rho, rho2);
            if !residual.is_finite() || residual > 1e-8 {
                return Err(CliError::Internal(format!("synthesized protocol misses the target by {residual:e}")));
            }
            Ok((
                json!({
                    "verdict": "feasible",
                    "w": params.w,
                    "prep": { "p01": params.prep.p01, "p00_11": params.prep.p00_11, "p10": params.prep.p10 },
                    "protocol": ProtocolSpec::from_protocol(&p),
                    "residual": residual,
                }),
                EXIT_OK,
            ))
        }
        Err(e) => Ok((json!({ "verdict": "infeasible", "detail": e.to_string() }), EXIT_INCONCLUSIVE)),
    }
}
