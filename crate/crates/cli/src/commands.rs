//! Argument definitions and subcommand implementations.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qmarginal::coherent::{coherent_lift_extension, SphereGrid, MIN_PHI_NODES, MIN_THETA_ORDER};
use qmarginal::constructors::{
    build_triangle_equality_state, chain_extension, classical_extension, golden_thompson_r,
    matched_separable_extension, perturbation_candidate, perturbation_extension, ClassicalJoint, SeparableEnsemble,
};
use qmarginal::criteria::{
    entropy_report_with_tol, necessary_conditions_with, CriteriaTolerances, ENTROPY_EQ_TOL, PRODUCT_TOL, SLACK_TOL,
};
use qmarginal::feasibility::{
    build_counterexample, build_remark_pair, marginal_residual, solve, verify_certificate, CounterexampleSpec,
    FeasibilityStatus, ForcedBy, InfeasibilityEvidence, NullspaceCertificate, SolveOptions,
};
use qmarginal::matcore::herm_eigvals;
use qmarginal::states::{random_density, CompatiblePair, DensityMatrix, COMPATIBILITY_TOL, STATE_TOL};
use qmarginal::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::canon::{format_human as h, num, to_canonical_string};
use crate::error::{CliError, CliResult};
use crate::report::Report;
use crate::statefile::{read_json, read_state, state_from_value, write_state, write_text, InputDigest, StateFile};

#[derive(Debug, Parser)]
#[command(
    name = "qmarginal",
    version,
    args_conflicts_with_subcommands = true,
    about = "Check, build and refute common extensions of overlapping quantum marginals",
    after_help = "Exit codes: check 0 not blocked / 2 blocked; solve 0 FEASIBLE / 3 INFEASIBLE / 4 UNDECIDED; \
construct and counterexample 2 on a numeric failure; 1 for usage, I/O and validation errors. \
A batch run exits with the largest job exit code."
)]
pub struct Cli {
    /// Print the machine-readable JSON report instead of the summary.
    #[arg(long, global = true)]
    pub json: bool,

    /// Validation tolerance for input density matrices (Hermiticity, trace, λ_min).
    #[arg(long, global = true, default_value_t = STATE_TOL)]
    pub tol: f64,

    /// Run the jobs listed in FILE (one command line per line, `#` comments) in parallel.
    #[arg(long, value_name = "FILE")]
    pub batch: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compatibility, entropies and necessary conditions for a pair.
    Check(CheckArgs),
    /// Build an explicit extension or auxiliary state.
    Construct(ConstructArgs),
    /// Decide extendibility numerically.
    Solve(SolveArgs),
    /// Emit a separable pair with no common extension and its certificate.
    Counterexample(CounterexampleArgs),
    /// Spectrum and entropies of a single state.
    Entropy(EntropyArgs),
}

#[derive(Debug, Args)]
pub struct CriteriaFlags {
    /// Trace-norm tolerance on the middle-marginal mismatch.
    #[arg(long, default_value_t = COMPATIBILITY_TOL)]
    pub compat_tol: f64,
    /// Slack below which an entropy inequality counts as violated.
    #[arg(long, default_value_t = SLACK_TOL)]
    pub slack_tol: f64,
    /// Tolerance for entropy equalities.
    #[arg(long, default_value_t = ENTROPY_EQ_TOL)]
    pub eq_tol: f64,
    /// Trace-norm tolerance for product detection.
    #[arg(long, default_value_t = PRODUCT_TOL)]
    pub product_tol: f64,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub rho12: PathBuf,
    pub rho23: PathBuf,
    #[command(flatten)]
    pub criteria: CriteriaFlags,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// `RHO12 RHO23`, or `-` to read a counterexample bundle from stdin.
    #[arg(num_args = 1..=2, required = true)]
    pub inputs: Vec<PathBuf>,
    /// Witness output path, written only on FEASIBLE.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = SolveOptions::default().max_iter)]
    pub max_iter: usize,
    /// Residual and λ_min tolerance a witness must meet.
    #[arg(long, default_value_t = SolveOptions::default().feas_tol)]
    pub feas_tol: f64,
    /// Stalled gap above which the pair is declared infeasible.
    #[arg(long, default_value_t = SolveOptions::default().infeas_tol)]
    pub infeas_tol: f64,
    #[arg(long, default_value_t = SolveOptions::default().stall_window)]
    pub stall_window: usize,
    #[arg(long, default_value_t = SolveOptions::default().stall_rel_change)]
    pub stall_rel_change: f64,
    #[arg(long, default_value_t = SolveOptions::default().check_every)]
    pub check_every: usize,
    /// Skip the forced-kernel face restriction.
    #[arg(long)]
    pub no_facial_reduction: bool,
    #[arg(long, default_value_t = COMPATIBILITY_TOL)]
    pub compat_tol: f64,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[command(subcommand)]
    pub kind: ConstructKind,
}

#[derive(Debug, Subcommand)]
pub enum ConstructKind {
    /// Conditioning extension p12 p23 / p2 of two diagonal bipartite states.
    Classical {
        p12: PathBuf,
        p23: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Markov chain extension of diagonal bipartite links (x1,x2), (x2,x3), ...
    Chain {
        #[arg(num_args = 2.., required = true)]
        joints: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Matched separable ensemble: from --ensemble FILE, or random with --seed.
    ///
    /// FILE holds {"terms": [{"weight": w, "rho": S, "sigma": S, "tau": S}, ...]}
    /// where each S is a state file object.
    Separable {
        #[arg(long, conflicts_with = "seed")]
        ensemble: Option<PathBuf>,
        #[arg(long, required_unless_present = "ensemble")]
        seed: Option<u64>,
        /// Number of random terms.
        #[arg(long, default_value_t = 3)]
        terms: usize,
        /// Random factor dimensions d1,d2,d3.
        #[arg(long, value_delimiter = ',', default_value = "2,2,2")]
        dims: Vec<usize>,
        /// Output path for ρ123.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        out12: Option<PathBuf>,
        #[arg(long)]
        out23: Option<PathBuf>,
    },
    /// Perturb a positive definite extension --base of another pair toward RHO12, RHO23.
    Perturb {
        #[arg(long)]
        base: PathBuf,
        rho12: PathBuf,
        rho23: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = COMPATIBILITY_TOL)]
        compat_tol: f64,
    },
    /// Coherent-state lift of a three-qubit pair.
    Coherent {
        rho12: PathBuf,
        rho23: PathBuf,
        #[arg(long, default_value_t = MIN_THETA_ORDER)]
        theta_nodes: usize,
        #[arg(long, default_value_t = MIN_PHI_NODES)]
        phi_nodes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = COMPATIBILITY_TOL)]
        compat_tol: f64,
    },
    /// diag(λ) ⊗ |Φ><Φ| with Schmidt weights μ, satisfying S12 = S1 − S2.
    Triangle {
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        mus: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tolerance on the entropy identity.
        #[arg(long, default_value_t = 1e-9)]
        eq_tol: f64,
    },
    /// Golden-Thompson candidate R; --out receives R / Tr R.
    Gt {
        rho12: PathBuf,
        rho23: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = COMPATIBILITY_TOL)]
        compat_tol: f64,
    },
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    /// Larger eigenvalue of ρ2, in [1/2, 1).
    #[arg(long, default_value_t = 0.5)]
    pub mu1: f64,
    /// Angle a of φ1 = (cos a, sin a).
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub phi1_angle: f64,
    /// Skew δ of η2 = (sin δ, cos δ).
    #[arg(long, default_value_t = 0.0)]
    pub skew: f64,
    /// Emit the four-basis pair with flat spectra instead.
    #[arg(long, conflicts_with_all = ["mu1", "phi1_angle", "skew"])]
    pub remark: bool,
    /// Directory for rho12.json, rho23.json, certificate.json; `-` writes one bundle to stdout.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    pub state: PathBuf,
}

/// Streams a command writes to; batch jobs get private buffers.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
    pub stdin: &'a mut dyn Read,
}

/// Parses `args` (without the program name) and runs the command.
/// Returns the process exit code.
pub fn run_args(args: &[String], io: &mut Io<'_>) -> u8 {
    let argv = std::iter::once("qmarginal".to_string()).chain(args.iter().cloned());
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                io.out.write_all(text.as_bytes())
            } else {
                io.err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match run(&cli, args, io) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: &Cli, args: &[String], io: &mut Io<'_>) -> CliResult<u8> {
    if let Some(batch) = &cli.batch {
        return crate::batch::run_batch(batch, io);
    }
    let Some(command) = &cli.command else {
        return Err(CliError::Usage("a subcommand or --batch is required; see --help".into()));
    };
    let mut report = Report::new(args);
    report.tolerance("state", cli.tol);
    let code = match command {
        Command::Check(a) => cmd_check(a, cli.tol, &mut report)?,
        Command::Solve(a) => cmd_solve(a, cli.tol, &mut report, io)?,
        Command::Construct(a) => cmd_construct(&a.kind, cli.tol, &mut report)?,
        Command::Counterexample(a) => cmd_counterexample(a, &mut report, io)?,
        Command::Entropy(a) => cmd_entropy(a, cli.tol, &mut report)?,
    };
    let text = report.render(cli.json);
    let sink: &mut dyn Write = if matches!(command, Command::Counterexample(a) if a.out == Path::new("-")) {
        &mut *io.err
    } else {
        &mut *io.out
    };
    sink.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })?;
    Ok(code)
}

fn path_label(p: &Path) -> String {
    p.display().to_string()
}

/// Reads a pair of state files; every failure is a validation error.
fn load_pair(rho12: &Path, rho23: &Path, state_tol: f64, compat_tol: f64, report: &mut Report) -> CliResult<CompatiblePair> {
    let (a, da) = read_state(rho12, state_tol)?;
    let (b, db) = read_state(rho23, state_tol)?;
    report.input(da);
    report.input(db);
    let label = format!("{} + {}", path_label(rho12), path_label(rho23));
    CompatiblePair::new(a, b, compat_tol).map_err(|e| CliError::invalid(label, e.to_string()))
}

fn entropies_json(pair: &CompatiblePair, eq_tol: f64) -> (Value, qmarginal::criteria::EntropyReport) {
    let r = entropy_report_with_tol(pair, eq_tol);
    (serde_json::to_value(r).expect("plain struct"), r)
}

fn cmd_check(a: &CheckArgs, state_tol: f64, report: &mut Report) -> CliResult<u8> {
    let tol = CriteriaTolerances {
        compatibility: a.criteria.compat_tol,
        slack: a.criteria.slack_tol,
        entropy_eq: a.criteria.eq_tol,
        product: a.criteria.product_tol,
    };
    for (k, v) in [
        ("compatibility", tol.compatibility),
        ("slack", tol.slack),
        ("entropy_eq", tol.entropy_eq),
        ("product", tol.product),
    ] {
        report.tolerance(k, v);
    }
    let pair = load_pair(&a.rho12, &a.rho23, state_tol, f64::INFINITY, report)?;
    let verdict = necessary_conditions_with(&pair, &tol);
    let (ent, r) = entropies_json(&pair, tol.entropy_eq);

    report.number("compatibility_distance", pair.distance());
    report.field("entropies", ent);
    report.field("verdict", serde_json::to_value(verdict).expect("plain struct"));
    report.field("reasons", verdict.reasons());

    report.line(format!("compatibility distance = {}", h(pair.distance())));
    report.line(format!(
        "S1 = {}  S2 = {}  S3 = {}  S12 = {}  S23 = {}",
        h(r.s1),
        h(r.s2),
        h(r.s3),
        h(r.s12),
        h(r.s23)
    ));
    report.line(format!("slack_cheap = {}  (S12 + S23 - S2)", h(r.slack_cheap)));
    report.line(format!("slack_pol = {}  (S12 + S23 - S1 - S3)", h(r.slack_pol)));
    report.line(format!(
        "araki-lieb slack: 12 = {}  23 = {}",
        h(r.al_slack12),
        h(r.al_slack23)
    ));
    report.line(format!(
        "product-only obstruction: {} (triangle equality 12: {}, 23: {}; product distance 12 = {}, 23 = {})",
        if verdict.product_only_obstruction { "yes" } else { "no" },
        r.triangle_equality_12,
        r.triangle_equality_23,
        h(verdict.product_distance_12),
        h(verdict.product_distance_23)
    ));
    if verdict.blocked {
        report.line(format!("verdict: blocked ({})", verdict.reasons().join("; ")));
        Ok(2)
    } else {
        report.line("verdict: not blocked");
        Ok(0)
    }
}

fn solve_exit_code(status: FeasibilityStatus) -> u8 {
    match status {
        FeasibilityStatus::Feasible => 0,
        FeasibilityStatus::Infeasible => 3,
        FeasibilityStatus::Undecided => 4,
    }
}

fn read_bundle(io: &mut Io<'_>, state_tol: f64, compat_tol: f64, report: &mut Report) -> CliResult<CompatiblePair> {
    let mut bytes = Vec::new();
    io.stdin.read_to_end(&mut bytes).map_err(|source| CliError::Io {
        path: "<stdin>".into(),
        source,
    })?;
    report.input(InputDigest::of("<stdin>", &bytes));
    let mut v: Value = serde_json::from_slice(&bytes).map_err(|e| CliError::Parse {
        path: "<stdin>".into(),
        message: e.to_string(),
    })?;
    let mut take = |key: &str| -> CliResult<DensityMatrix> {
        let part = v.get_mut(key).map(Value::take).ok_or_else(|| CliError::Parse {
            path: "<stdin>".into(),
            message: format!("bundle has no \"{key}\" entry"),
        })?;
        state_from_value(&format!("<stdin>:{key}"), part, state_tol)
    };
    let a = take("rho12")?;
    let b = take("rho23")?;
    CompatiblePair::new(a, b, compat_tol).map_err(|e| CliError::invalid("<stdin>", e.to_string()))
}

fn cmd_solve(a: &SolveArgs, state_tol: f64, report: &mut Report, io: &mut Io<'_>) -> CliResult<u8> {
    let opts = SolveOptions {
        max_iter: a.max_iter,
        feas_tol: a.feas_tol,
        infeas_tol: a.infeas_tol,
        stall_window: a.stall_window,
        stall_rel_change: a.stall_rel_change,
        facial_reduction: !a.no_facial_reduction,
        check_every: a.check_every.max(1),
    };
    report.tolerance("compatibility", a.compat_tol);
    report.tolerance("feasibility", opts.feas_tol);
    report.tolerance("infeasibility", opts.infeas_tol);
    report.tolerance("stall_rel_change", opts.stall_rel_change);

    let pair = match a.inputs.as_slice() {
        [one] if one == Path::new("-") => read_bundle(io, state_tol, a.compat_tol, report)?,
        [r12, r23] => load_pair(r12, r23, state_tol, a.compat_tol, report)?,
        _ => return Err(CliError::Usage("solve takes RHO12 RHO23, or - for a bundle on stdin".into())),
    };
    let v = solve(&pair, &opts).map_err(|e| CliError::invalid("solve", e.to_string()))?;

    report.field("status", v.status.to_string());
    report.number("residual", v.residual);
    report.number("gap", v.gap);
    report.field("iterations", v.iterations);
    report.field("face_dim", v.face_dim);
    report.field("max_iter", opts.max_iter);
    report.field("facial_reduction", opts.facial_reduction);
    report.line(format!("verdict: {}", v.status));
    report.line(format!(
        "residual = {}  gap = {}  iterations = {}  face dim = {}",
        h(v.residual),
        h(v.gap),
        v.iterations,
        v.face_dim
    ));
    match v.evidence {
        Some(InfeasibilityEvidence::Certificate) => {
            let cert = v.certificate.as_ref().expect("certificate evidence carries one");
            report.field("evidence", json!({ "kind": "certificate", "span_dim": cert.span_dim, "dim": cert.dim }));
            report.line(format!(
                "certificate: {} forced kernel vectors span {} of {} dimensions, so every extension would vanish",
                cert.vectors.len(),
                cert.span_dim,
                cert.dim
            ));
        }
        Some(InfeasibilityEvidence::FaceInconsistent { residual }) => {
            report.field("evidence", json!({ "kind": "face_inconsistent", "residual": num(residual) }));
            report.line(format!(
                "certificate: marginal equations have no solution on the forced kernel face (residual {})",
                h(residual)
            ));
        }
        Some(InfeasibilityEvidence::GapStall { gap }) => {
            report.field("evidence", json!({ "kind": "gap_stall", "gap": num(gap) }));
            report.line(format!("evidence: alternating projections stalled at gap {}", h(gap)));
        }
        None => {}
    }
    if let Some(w) = &v.witness {
        let res = marginal_residual(w.matrix(), &pair).map_err(|e| CliError::invalid("witness", e.to_string()))?;
        report.number("witness_min_eigenvalue", w.min_eigenvalue());
        report.number("witness_residual", res);
        report.line(format!(
            "witness: λ_min = {}  marginal residual = {}",
            h(w.min_eigenvalue()),
            h(res)
        ));
        if let Some(out) = &a.out {
            write_text(out, &StateFile::from_density(w).to_canonical())?;
            report.field("witness", path_label(out));
            report.line(format!("witness written to {}", path_label(out)));
        }
    }
    if v.status == FeasibilityStatus::Undecided {
        report.line("no decision within the iteration budget; try a larger --max-iter");
    }
    Ok(solve_exit_code(v.status))
}

fn diagonal_joint(path: &Path, state_tol: f64, report: &mut Report) -> CliResult<ClassicalJoint> {
    let (rho, digest) = read_state(path, state_tol)?;
    report.input(digest);
    let m = rho.matrix();
    let n = m.rows();
    let off = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| m.data()[i * n + j].norm())
        .fold(0.0, f64::max);
    if off > state_tol {
        return Err(CliError::invalid(path, format!("not diagonal (max off-diagonal {off:e})")));
    }
    let mut probs: Vec<f64> = m.diagonal().iter().map(|z| z.re.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    ClassicalJoint::new(rho.shape().clone(), probs).map_err(|e| CliError::invalid(path, e.to_string()))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn write_out(out: &Option<PathBuf>, rho: &DensityMatrix, report: &mut Report) -> CliResult<()> {
    if let Some(p) = out {
        write_state(p, rho)?;
        report.field("output", path_label(p));
        report.line(format!("state written to {}", path_label(p)));
    }
    Ok(())
}

fn extension_residuals(rho123: &DensityMatrix, pair: &CompatiblePair, report: &mut Report) -> CliResult<()> {
    let res = marginal_residual(rho123.matrix(), pair)?;
    let min = rho123.min_eigenvalue();
    report.number("marginal_residual", res);
    report.number("min_eigenvalue", min);
    report.line(format!("marginal residual = {}  λ_min = {}", h(res), h(min)));
    Ok(())
}

fn cmd_construct(kind: &ConstructKind, state_tol: f64, report: &mut Report) -> CliResult<u8> {
    match kind {
        ConstructKind::Classical { p12, p23, out } => {
            let j12 = diagonal_joint(p12, state_tol, report)?;
            let j23 = diagonal_joint(p23, state_tol, report)?;
            let ext = classical_extension(&j12, &j23)?;
            let err12 = max_abs_diff(ext.marginal(&[0, 1])?.probs(), j12.probs());
            let err23 = max_abs_diff(ext.marginal(&[1, 2])?.probs(), j23.probs());
            let h2 = j12.marginal(&[1])?.entropy();
            let identity = ext.entropy() - (j12.entropy() + j23.entropy() - h2);
            report.number("marginal_error_12", err12);
            report.number("marginal_error_23", err23);
            report.number("entropy", ext.entropy());
            report.number("entropy_identity_error", identity);
            report.line(format!("marginal error: 12 = {}  23 = {}", h(err12), h(err23)));
            report.line(format!(
                "H123 = {}  H123 - (H12 + H23 - H2) = {}",
                h(ext.entropy()),
                h(identity)
            ));
            write_out(out, &ext.to_density(), report)?;
        }
        ConstructKind::Chain { joints, out } => {
            let links = joints
                .iter()
                .map(|p| diagonal_joint(p, state_tol, report))
                .collect::<CliResult<Vec<_>>>()?;
            let ext = chain_extension(&links)?;
            let n = ext.shape().num_factors();
            let mut worst: f64 = 0.0;
            for (k, link) in links.iter().enumerate() {
                worst = worst.max(max_abs_diff(ext.marginal(&[k, k + 1])?.probs(), link.probs()));
            }
            let middles: f64 = (1..n - 1).map(|k| ext.marginal(&[k]).map(|m| m.entropy())).sum::<qmarginal::Result<f64>>()?;
            let links_h: f64 = links.iter().map(ClassicalJoint::entropy).sum();
            let identity = ext.entropy() - (links_h - middles);
            report.field("dims", ext.shape().dims().to_vec());
            report.number("marginal_error", worst);
            report.number("entropy", ext.entropy());
            report.number("entropy_identity_error", identity);
            report.line(format!("{} factors, dims {:?}", n, ext.shape().dims()));
            report.line(format!("max link marginal error = {}", h(worst)));
            report.line(format!("H = {}  H - (sum links - sum middles) = {}", h(ext.entropy()), h(identity)));
            write_out(out, &ext.to_density(), report)?;
        }
        ConstructKind::Separable {
            ensemble,
            seed,
            terms,
            dims,
            out,
            out12,
            out23,
        } => {
            let ens = match (ensemble, seed) {
                (Some(path), _) => read_ensemble(path, state_tol, report)?,
                (None, Some(seed)) => random_ensemble(*seed, *terms, dims, report)?,
                (None, None) => return Err(CliError::Usage("separable needs --ensemble or --seed".into())),
            };
            let ext = matched_separable_extension(&ens);
            let pair = CompatiblePair::new(ext.rho12.clone(), ext.rho23.clone(), COMPATIBILITY_TOL)?;
            report.field("terms", ens.len());
            extension_residuals(&ext.rho123, &pair, report)?;
            write_out(out, &ext.rho123, report)?;
            for (path, rho) in [(out12, &ext.rho12), (out23, &ext.rho23)] {
                if let Some(p) = path {
                    write_state(p, rho)?;
                    report.line(format!("marginal written to {}", path_label(p)));
                }
            }
        }
        ConstructKind::Perturb {
            base,
            rho12,
            rho23,
            out,
            compat_tol,
        } => {
            report.tolerance("compatibility", *compat_tol);
            let (base, digest) = read_state(base, state_tol)?;
            report.input(digest);
            let pair = load_pair(rho12, rho23, state_tol, *compat_tol, report)?;
            let cand = perturbation_candidate(&base, &pair)?;
            let cand_min = herm_eigvals(&cand)?.into_iter().fold(f64::INFINITY, f64::min);
            report.number("candidate_min_eigenvalue", cand_min);
            report.line(format!("candidate λ_min = {}", h(cand_min)));
            let ext = perturbation_extension(&base, &pair)?;
            extension_residuals(&ext, &pair, report)?;
            write_out(out, &ext, report)?;
        }
        ConstructKind::Coherent {
            rho12,
            rho23,
            theta_nodes,
            phi_nodes,
            out,
            compat_tol,
        } => {
            report.tolerance("compatibility", *compat_tol);
            let pair = load_pair(rho12, rho23, state_tol, *compat_tol, report)?;
            let grid = SphereGrid::product(*theta_nodes, *phi_nodes)?;
            report.field("grid", vec![*theta_nodes, *phi_nodes]);
            let lift = coherent_lift_extension(&pair, &[grid.clone(), grid.clone(), grid])?;
            report.number("marginal_residual", lift.marginal_residual);
            report.number("min_eigenvalue", lift.min_eigenvalue);
            report.line(format!(
                "marginal residual = {}  λ_min = {}",
                h(lift.marginal_residual),
                h(lift.min_eigenvalue)
            ));
            write_out(out, &lift.rho123, report)?;
        }
        ConstructKind::Triangle {
            lambdas,
            mus,
            out,
            eq_tol,
        } => {
            report.tolerance("entropy_eq", *eq_tol);
            let rho12 = build_triangle_equality_state(lambdas, mus)?;
            let s12 = rho12.entropy();
            let s1 = rho12.marginal(&[0])?.entropy();
            let s2 = rho12.marginal(&[1])?.entropy();
            let gap = s12 - (s1 - s2);
            report.number("s1", s1);
            report.number("s2", s2);
            report.number("s12", s12);
            report.number("triangle_gap", gap);
            report.field("dims", rho12.shape().dims().to_vec());
            report.line(format!("S1 = {}  S2 = {}  S12 = {}", h(s1), h(s2), h(s12)));
            report.line(format!("S12 − (S1−S2) = {:.1e} ± {:e}", gap, eq_tol));
            report.field("identity_holds", gap.abs() <= *eq_tol);
            write_out(out, &rho12, report)?;
        }
        ConstructKind::Gt {
            rho12,
            rho23,
            out,
            compat_tol,
        } => {
            report.tolerance("compatibility", *compat_tol);
            let pair = load_pair(rho12, rho23, state_tol, *compat_tol, report)?;
            let (r, tr) = golden_thompson_r(&pair)?;
            report.number("trace_r", tr);
            report.line(format!("trace(R) = {:.9}", tr));
            if let Some(p) = out {
                let rho = DensityMatrix::new(r.scale(1.0 / tr).hermitian_part(), pair.shape123())?;
                write_state(p, &rho)?;
                report.field("output", path_label(p));
                report.line(format!("R / trace(R) written to {}", path_label(p)));
            }
        }
    }
    Ok(0)
}

fn read_ensemble(path: &Path, state_tol: f64, report: &mut Report) -> CliResult<SeparableEnsemble> {
    let (mut v, digest) = read_json(path)?;
    report.input(digest);
    let label = path_label(path);
    let terms = match v.get_mut("terms").map(Value::take) {
        Some(Value::Array(t)) if !t.is_empty() => t,
        _ => {
            return Err(CliError::Parse {
                path: path.into(),
                message: "expected a non-empty \"terms\" array".into(),
            })
        }
    };
    let (mut w, mut rho, mut sigma, mut tau) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, mut term) in terms.into_iter().enumerate() {
        let weight = term.get("weight").and_then(Value::as_f64).ok_or_else(|| CliError::Parse {
            path: path.into(),
            message: format!("term {k} has no numeric \"weight\""),
        })?;
        w.push(weight);
        for (key, list) in [("rho", &mut rho), ("sigma", &mut sigma), ("tau", &mut tau)] {
            let part = term.get_mut(key).map(Value::take).unwrap_or(Value::Null);
            list.push(state_from_value(&format!("{label}: term {k} {key}"), part, state_tol)?);
        }
    }
    SeparableEnsemble::new(w, rho, sigma, tau).map_err(|e| CliError::invalid(path, e.to_string()))
}

fn random_ensemble(seed: u64, terms: usize, dims: &[usize], report: &mut Report) -> CliResult<SeparableEnsemble> {
    let [d1, d2, d3] = dims else {
        return Err(CliError::Usage(format!("--dims needs three values, got {dims:?}")));
    };
    if terms == 0 {
        return Err(CliError::Usage("--terms must be positive".into()));
    }
    report.field("seed", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..terms).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|x| x / total).collect();
    let mut draw = |d: usize| -> qmarginal::Result<Vec<DensityMatrix>> {
        (0..terms).map(|_| random_density(d, d, rng.random())).collect()
    };
    let (rho, sigma, tau) = (draw(*d1)?, draw(*d2)?, draw(*d3)?);
    Ok(SeparableEnsemble::new(weights, rho, sigma, tau)?)
}

fn vec_json(v: &[Complex64]) -> Value {
    Value::Array(v.iter().map(|z| json!([num(z.re), num(z.im)])).collect())
}

fn certificate_json(cert: &NullspaceCertificate, verified: bool) -> Value {
    let vectors: Vec<Value> = cert
        .vectors
        .iter()
        .map(|v| {
            json!({
                "forced_by": match v.forced_by { ForcedBy::Rho12 => "rho12", ForcedBy::Rho23 => "rho23" },
                "kernel_vector": vec_json(&v.kernel_vector),
                "free_vector": vec_json(&v.free_vector),
                "vector": vec_json(&v.vector),
            })
        })
        .collect();
    json!({ "dim": cert.dim, "span_dim": cert.span_dim, "verified": verified, "vectors": vectors })
}

fn cmd_counterexample(a: &CounterexampleArgs, report: &mut Report, io: &mut Io<'_>) -> CliResult<u8> {
    let (pair, cert) = if a.remark {
        report.field("family", "remark");
        build_remark_pair()?
    } else {
        let spec = CounterexampleSpec {
            mu1: a.mu1,
            phi1_angle: a.phi1_angle,
            eta_skew: a.skew,
        };
        report.field("family", "separable");
        report.field("spec", json!({ "mu1": num(a.mu1), "phi1_angle": num(a.phi1_angle), "skew": num(a.skew) }));
        build_counterexample(&spec)?
    };
    report.tolerance("compatibility", COMPATIBILITY_TOL);
    let verified = verify_certificate(&pair, &cert);
    let (ent, r) = entropies_json(&pair, ENTROPY_EQ_TOL);
    report.field("span_dim", cert.span_dim);
    report.field("dim", cert.dim);
    report.field("certificate_verified", verified);
    report.field("entropies", ent);
    report.line(format!(
        "certificate: {} vectors span {} of {} (verified: {})",
        cert.vectors.len(),
        cert.span_dim,
        cert.dim,
        verified
    ));
    report.line(format!("slack_cheap = {}  slack_pol = {}", h(r.slack_cheap), h(r.slack_pol)));

    let files = [
        ("rho12", StateFile::from_density(pair.rho12()).to_value()),
        ("rho23", StateFile::from_density(pair.rho23()).to_value()),
        ("certificate", certificate_json(&cert, verified)),
    ];
    if a.out == Path::new("-") {
        let bundle: serde_json::Map<String, Value> = files.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        io.out
            .write_all(to_canonical_string(&Value::Object(bundle)).as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })?;
        report.line("bundle written to stdout");
    } else {
        std::fs::create_dir_all(&a.out).map_err(|source| CliError::Io {
            path: a.out.clone(),
            source,
        })?;
        for (name, value) in files {
            let p = a.out.join(format!("{name}.json"));
            write_text(&p, &to_canonical_string(&value))?;
            report.line(format!("{name} written to {}", path_label(&p)));
        }
        report.field("output", path_label(&a.out));
    }
    Ok(0)
}

fn cmd_entropy(a: &EntropyArgs, state_tol: f64, report: &mut Report) -> CliResult<u8> {
    let (rho, digest) = read_state(&a.state, state_tol)?;
    report.input(digest);
    let spectrum = rho.eigenvalues();
    let dims = rho.shape().dims().to_vec();
    let marginals = (0..dims.len())
        .map(|k| rho.marginal(&[k]).map(|m| m.entropy()))
        .collect::<qmarginal::Result<Vec<f64>>>()
        .map_err(|e| CliError::invalid(&a.state, e.to_string()))?;
    report.field("dims", dims.clone());
    report.number("entropy", rho.entropy());
    report.number("purity", rho.purity());
    report.field("rank", rho.rank());
    report.field("spectrum", spectrum.iter().map(|x| num(*x)).collect::<Vec<_>>());
    report.field("marginal_entropies", marginals.iter().map(|x| num(*x)).collect::<Vec<_>>());
    report.line(format!("dims {:?}  rank {}", dims, rho.rank()));
    report.line(format!("S = {}  purity = {}", h(rho.entropy()), h(rho.purity())));
    report.line(format!(
        "spectrum: {}",
        spectrum.iter().map(|x| h(*x)).collect::<Vec<_>>().join(" ")
    ));
    let labels: Vec<String> = marginals
        .iter()
        .enumerate()
        .map(|(k, s)| format!("S{} = {}", k + 1, h(*s)))
        .collect();
    report.line(format!("marginals: {}", labels.join("  ")));
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn solve_codes_are_distinct() {
        let codes = [
            solve_exit_code(FeasibilityStatus::Feasible),
            solve_exit_code(FeasibilityStatus::Infeasible),
            solve_exit_code(FeasibilityStatus::Undecided),
        ];
        assert_eq!(codes, [0, 3, 4]);
    }
}
