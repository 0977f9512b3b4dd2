//! `kirchhoff`: command-line front end for the normalized-solution library.
//!
//! Exit codes: 0 success, 2 inadmissible input, 3 no solution exists,
//! 4 numerical failure (including a failed `verify`), 1 I/O trouble.

mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use kirchhoff_core::report::{fmt_num, write_csv};
use kirchhoff_core::{
    self as core, dilation_path_bound, parse_potential, Branch, ErrorKind, FlowSchedule, Model, PotentialSpec,
    ProblemParams, RadialField, ShootingConfig,
};
use serde_json::{json, Value};

use config::{parse_c_grid, parse_list, parse_real, ConfigFile};
use output::{normalize, Format};

#[derive(Parser, Debug)]
#[command(name = "kirchhoff", version, about = "Normalized solutions of Kirchhoff equations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Flat `key = value` file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Output file (default: $KIRCHHOFF_OUT_DIR/<command>.<ext>, else stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Append a timestamped line per run to this file.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct ParamArgs {
    /// Space dimension.
    #[arg(short = 'N', long = "dim")]
    n: Option<String>,
    /// Nonlinearity exponent; fractions like 14/3 are accepted.
    #[arg(short = 'p')]
    p: Option<String>,
    #[arg(short = 'a')]
    a: Option<String>,
    #[arg(short = 'b')]
    b: Option<String>,
    /// Mass parameter (‖u‖₂ = c).
    #[arg(short = 'c')]
    c: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Regime, existence threshold and exponents.
    Classify(ParamArgs),
    /// The Gagliardo-Nirenberg optimizer Q_p and its norms.
    Profile {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        intervals: Option<usize>,
    },
    /// Every solution of the potential-free problem, with residuals.
    Solve {
        #[command(flatten)]
        params: ParamArgs,
        /// Write the solution fields as CSV (branch, r, u).
        #[arg(long)]
        dump_profile: Option<PathBuf>,
    },
    /// Solutions over a log-spaced mass grid.
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        /// lo:hi:n
        #[arg(long)]
        c_grid: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Fold of the two-branch regime and the approach to it.
    Fold {
        #[command(flatten)]
        params: ParamArgs,
        /// Relative offset above the fold for the one-sided limits.
        #[arg(long)]
        eps: Option<String>,
    },
    /// Behaviour of the unique branch as b decreases to 0.
    Blimit {
        #[command(flatten)]
        params: ParamArgs,
        /// Comma-separated, strictly decreasing.
        #[arg(long)]
        b_grid: Option<String>,
    },
    /// Energy-ratio inequality between two masses.
    Ratio {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        beta: Option<String>,
    },
    /// Identity suite on a solved instance; exit 4 if any check fails.
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        dump_profile: Option<PathBuf>,
    },
    /// Checks a potential against one hypothesis set (v1, v2, v5).
    Hypo {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        hypothesis: Option<String>,
        /// family:key=value,... e.g. gaussian:V0=0.01
        #[arg(long)]
        potential: Option<String>,
        /// Overrides the limit energy used by v1.
        #[arg(long)]
        mc: Option<String>,
    },
    /// Largest energy along the dilation path of u_c with a potential.
    Bounds {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        potential: Option<String>,
        /// Comma-separated translation lengths.
        #[arg(long)]
        translations: Option<String>,
    },
    /// Normalized gradient flow in the two-branch regime.
    Flow {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        potential: Option<String>,
        #[arg(long)]
        intervals: Option<usize>,
        #[arg(long)]
        tol: Option<String>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        dump_profile: Option<PathBuf>,
    },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Classify(_) => "classify",
            Cmd::Profile { .. } => "profile",
            Cmd::Solve { .. } => "solve",
            Cmd::Sweep { .. } => "sweep",
            Cmd::Fold { .. } => "fold",
            Cmd::Blimit { .. } => "blimit",
            Cmd::Ratio { .. } => "ratio",
            Cmd::Verify { .. } => "verify",
            Cmd::Hypo { .. } => "hypo",
            Cmd::Bounds { .. } => "bounds",
            Cmd::Flow { .. } => "flow",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Cmd::Profile { .. } | Cmd::Sweep { .. } | Cmd::Blimit { .. } | Cmd::Flow { .. } => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Flags first, then the config file, then defaults.
struct Resolver {
    cfg: ConfigFile,
}

impl Resolver {
    fn raw(&self, flag: &Option<String>, key: &str) -> Option<String> {
        flag.clone().or_else(|| self.cfg.get(key).map(str::to_string))
    }

    fn real(&self, flag: &Option<String>, key: &str) -> Result<Option<f64>> {
        self.raw(flag, key)
            .map(|t| parse_real(&t).with_context(|| format!("parameter `{key}`")))
            .transpose()
    }

    fn real_or(&self, flag: &Option<String>, key: &str, default: f64) -> Result<f64> {
        Ok(self.real(flag, key)?.unwrap_or(default))
    }

    fn required(&self, flag: &Option<String>, key: &str) -> Result<f64> {
        self.real(flag, key)?.ok_or_else(|| anyhow!("missing parameter `{key}`"))
    }

    fn count(&self, flag: Option<usize>, key: &str) -> Result<Option<usize>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self
                .cfg
                .get(key)
                .map(|t| t.parse::<usize>().map_err(|_| anyhow!("parameter `{key}`: `{t}` is not a count")))
                .transpose(),
        }
    }

    fn dim(&self, p: &ParamArgs) -> Result<u32> {
        let text = self.raw(&p.n, "N").ok_or_else(|| anyhow!("missing parameter `N`"))?;
        text.trim().parse().map_err(|_| anyhow!("parameter `N`: `{text}` is not a positive integer"))
    }

    fn model(&self, p: &ParamArgs) -> Result<Model> {
        let dim = self.dim(p)?;
        let exponent = self.required(&p.p, "p")?;
        let a = self.real_or(&p.a, "a", 1.0)?;
        let b = self.real_or(&p.b, "b", 1.0)?;
        Ok(Model::new(a, b, dim, exponent)?)
    }

    fn params(&self, p: &ParamArgs) -> Result<ProblemParams> {
        let model = self.model(p)?;
        let c = self.required(&p.c, "c")?;
        Ok(model.with_mass(c)?)
    }

    fn potential(&self, flag: &Option<String>) -> Result<PotentialSpec> {
        match self.raw(flag, "potential") {
            Some(t) => Ok(parse_potential(&t)?),
            None => Ok(PotentialSpec::Zero),
        }
    }
}

struct Sink {
    format: Format,
    path: Option<PathBuf>,
}

impl Sink {
    fn writer(&self) -> Result<Box<dyn Write>> {
        output::open(self.path.as_ref())
    }

    /// JSON as is; CSV as flattened key/value rows.
    fn emit(&self, meta: &[(&str, String)], value: Value) -> Result<()> {
        match self.format {
            Format::Json => output::write_json(self.writer()?, value),
            Format::Csv => output::write_key_value_csv(self.writer()?, meta, &normalize(value)),
        }
    }
}

fn params_json(pr: &ProblemParams) -> Value {
    json!({"a": pr.a, "b": pr.b, "c": pr.c, "N": pr.dim, "p": pr.p})
}

fn model_meta(m: &Model) -> Vec<(&'static str, String)> {
    vec![
        ("a", fmt_num(m.a)),
        ("b", fmt_num(m.b)),
        ("N", m.dim.to_string()),
        ("p", fmt_num(m.p)),
    ]
}

fn params_meta(pr: &ProblemParams) -> Vec<(&'static str, String)> {
    let mut meta = model_meta(&pr.model());
    meta.push(("c", fmt_num(pr.c)));
    meta
}

fn dump_fields(path: &PathBuf, named: &[(String, &RadialField)]) -> Result<()> {
    let out = output::open(Some(path))?;
    let rows = named
        .iter()
        .flat_map(|(name, f)| f.rows().map(move |(r, u)| vec![name.clone(), fmt_num(r), fmt_num(u)]))
        .collect::<Vec<_>>();
    write_csv(out, &[], &["branch", "r", "u"], rows)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let res = Resolver { cfg };
    let format = match res.raw(&cli.format, "format") {
        Some(t) => Format::parse(&t)?,
        None => cli.cmd.default_format(),
    };
    let out = cli.out.clone().or_else(|| res.cfg.get("out").map(PathBuf::from));
    let sink = Sink {
        format,
        path: output::target(out, cli.cmd.name(), format),
    };

    match &cli.cmd {
        Cmd::Classify(p) => {
            let model = res.model(p)?;
            let regime = core::classify_model(&model)?;
            let e = model.exponents();
            let value = json!({
                "schema_version": core::report::SCHEMA_VERSION,
                "N": model.dim, "p": model.p, "a": model.a, "b": model.b,
                "regime": regime.tag.as_str(),
                "cStar": regime.c_star,
                "exponents": {"theta": e.theta, "eta": e.eta, "zeta": e.zeta, "q": e.q, "kappa": e.kappa()},
            });
            sink.emit(&model_meta(&model), value)
        }
        Cmd::Profile { params, intervals } => {
            let dim = res.dim(params)?;
            let exponent = res.required(&params.p, "p")?;
            let mut shoot = ShootingConfig::default();
            if let Some(n) = res.count(*intervals, "intervals")? {
                shoot.intervals = n;
            }
            let ground = core::standard_ground_state(dim, exponent, &shoot)?;
            let qp = core::qp_from_standard(&ground)?;
            match format {
                Format::Csv => {
                    qp.write_csv(sink.writer()?, &shoot)?;
                    Ok(())
                }
                Format::Json => sink.emit(
                    &[],
                    json!({
                        "schema_version": core::report::SCHEMA_VERSION,
                        "N": dim, "p": exponent,
                        "standardHeight": ground.height,
                        "l2sq": qp.l2sq, "gradl2sq": qp.gradl2sq, "lpp": qp.lpp,
                        "lppScaled": 2.0 / exponent * qp.lpp,
                        "identityDefect": qp.identity_defect(),
                        "odeResidual": qp.ode_residual(),
                        "gnConstant": core::gn_best_constant(&qp),
                        "rMax": qp.grid.r_max(),
                        "intervals": qp.grid.len() - 1,
                    }),
                ),
            }
        }
        Cmd::Solve { params, dump_profile } | Cmd::Verify { params, dump_profile } => {
            let pr = res.params(params)?;
            let (report, fields) = core::verify_instance(&pr, &core::Tolerances::default())?;
            if report.branches.is_empty() {
                return Err(core::Error::NoSolution(format!(
                    "no normalized solution for c = {} (regime {}, threshold {})",
                    pr.c,
                    report.regime.as_str(),
                    report.c_star
                ))
                .into());
            }
            if let Some(path) = dump_profile {
                let named: Vec<(String, &RadialField)> = report
                    .branches
                    .iter()
                    .zip(&fields)
                    .map(|(b, f)| (b.branch.as_str().to_string(), f))
                    .collect();
                dump_fields(path, &named)?;
            }
            match format {
                Format::Csv => report.write_csv(sink.writer()?)?,
                Format::Json => output::write_json(sink.writer()?, report.to_json())?,
            }
            if matches!(cli.cmd, Cmd::Verify { .. }) && !report.passed {
                return Err(core::Error::NoConvergence {
                    what: "identity suite: at least one tolerance violated".into(),
                    iterations: 0,
                }
                .into());
            }
            Ok(())
        }
        Cmd::Sweep { params, c_grid, workers } => {
            let model = res.model(params)?;
            let grid_text = res
                .raw(c_grid, "c-grid")
                .ok_or_else(|| anyhow!("missing parameter `c-grid` (lo:hi:n)"))?;
            let grid = parse_c_grid(&grid_text)?;
            let workers = res.count(*workers, "workers")?;
            let table = core::sweep(&model, &grid, workers)?;
            match format {
                Format::Csv => table.write_csv(sink.writer()?)?,
                Format::Json => output::write_json(sink.writer()?, table.to_json())?,
            }
            Ok(())
        }
        Cmd::Fold { params, eps } => {
            let model = res.model(params)?;
            let eps = res.real_or(eps, "eps", 1e-6)?;
            let fold = core::fold_point(&model)?;
            let c1 = core::threshold_c1(model.a, model.b, model.dim, model.p)?;
            let approach = core::limit::fold_approach(&model, eps)?;
            sink.emit(
                &model_meta(&model),
                json!({
                    "schema_version": core::report::SCHEMA_VERSION,
                    "fold": serde_json::to_value(fold)?,
                    "closedFormC1": c1,
                    "relativeDifference": (fold.c_fold - c1).abs() / c1,
                    "approach": serde_json::to_value(approach)?,
                }),
            )
        }
        Cmd::Blimit { params, b_grid } => {
            let pr = res.params(params)?;
            let grid = match res.raw(b_grid, "b-grid") {
                Some(t) => parse_list(&t)?,
                None => vec![1e-1, 1e-2, 1e-3, 1e-4],
            };
            let rep = core::b_limit_check(&pr, &grid)?;
            match format {
                Format::Json => output::write_json(sink.writer()?, serde_json::to_value(&rep)?),
                Format::Csv => {
                    let mut meta = params_meta(&pr);
                    meta.push(("DsqAtZero", fmt_num(rep.solved_at_zero.dsq)));
                    meta.push(("DsqClosedForm", fmt_num(rep.closed_form.dsq)));
                    meta.push(("lambdaClosedForm", fmt_num(rep.closed_form.lambda)));
                    meta.push(("energyClosedForm", fmt_num(rep.closed_form.energy)));
                    write_csv(
                        sink.writer()?,
                        &meta,
                        &["b", "Dsq", "lambda", "energy", "DsqError", "lambdaError", "lambdaJump", "lambdaJumpBound"],
                        rep.rows.iter().map(|r| {
                            [r.b, r.dsq, r.lambda, r.energy, r.dsq_error, r.lambda_error, r.lambda_jump, r.lambda_jump_bound]
                                .iter()
                                .map(|&x| fmt_num(x))
                                .collect()
                        }),
                    )?;
                    Ok(())
                }
            }
        }
        Cmd::Ratio { params, alpha, beta } => {
            let model = res.model(params)?;
            let alpha = res.required(alpha, "alpha")?;
            let beta = res.required(beta, "beta")?;
            let rep = core::energy_ratio_check(&model, alpha, beta)?;
            sink.emit(&model_meta(&model), serde_json::to_value(rep)?)
        }
        Cmd::Hypo { params, hypothesis, potential, mc } => {
            let pr = res.params(params)?;
            let v = res.potential(potential)?;
            let which = res
                .raw(hypothesis, "hypothesis")
                .ok_or_else(|| anyhow!("missing parameter `hypothesis` (v1, v2 or v5)"))?;
            let report = match which.trim().to_ascii_lowercase().as_str() {
                "v1" => {
                    let m = match res.real(mc, "mc")? {
                        Some(m) => m,
                        None => unique_energy(&pr)?,
                    };
                    core::validate_v1(&v, &pr, m)?
                }
                "v2" => core::validate_v2(&v, &pr)?,
                "v5" => {
                    if pr.model().tag() != core::RegimeTag::TwoBranch {
                        return Err(core::Error::RegimeMismatch("(V5) is stated for 2 + 4/N < p < 2 + 8/N".into()).into());
                    }
                    let branches = core::solve(&pr)?;
                    let energy = |b: Branch| branches.iter().find(|x| x.branch == b).map(|x| x.energy);
                    let (Some(m1), Some(m2)) = (energy(Branch::Upper), energy(Branch::Lower)) else {
                        return Err(core::Error::NoSolution("(V5) needs c > c1 (two limit solutions)".into()).into());
                    };
                    core::validate_v5(&v, &pr, m1, m2)?
                }
                other => return Err(anyhow!("unknown hypothesis `{other}` (v1, v2 or v5)")),
            };
            sink.emit(&params_meta(&pr), report.to_json())
        }
        Cmd::Bounds { params, potential, translations } => {
            let pr = res.params(params)?;
            let v = res.potential(potential)?;
            let shifts = match res.raw(translations, "translations") {
                Some(t) => parse_list(&t)?,
                None => vec![0.5, 1.0, 2.0],
            };
            let branches = core::solve(&pr)?;
            let [br] = branches.as_slice() else {
                return Err(core::Error::RegimeMismatch("bounds need a unique limit solution".into()).into());
            };
            let qp = core::qp_profile(pr.dim, pr.p)?;
            let u = core::build_solution(br, &pr, &qp)?;
            let bound = dilation_path_bound(&u, &v, &pr, br.energy, &shifts)?;
            let mut hyps = Vec::new();
            if pr.dim <= 3 {
                hyps.push(core::validate_v1(&v, &pr, br.energy)?.to_json());
            }
            if pr.dim == 3 {
                hyps.push(core::validate_v2(&v, &pr)?.to_json());
            }
            let value = json!({
                "schema_version": core::report::SCHEMA_VERSION,
                "params": params_json(&pr),
                "potential": serde_json::to_value(&v)?,
                "bound": bound.to_json(),
                "hypotheses": hyps,
            });
            sink.emit(&params_meta(&pr), value)
        }
        Cmd::Flow { params, potential, intervals, tol, max_steps, dump_profile } => {
            let pr = res.params(params)?;
            let v = res.potential(potential)?;
            let mut schedule = FlowSchedule::default();
            if let Some(t) = res.real(tol, "tol")? {
                schedule.tol = t;
            }
            if let Some(m) = res.count(*max_steps, "max-steps")? {
                schedule.max_steps = m;
            }
            let cells = res.count(*intervals, "intervals")?.unwrap_or(12_000);
            let init = core::default_initial(&pr, cells)?;
            let state = core::normalized_gradient_flow(&init, &v, &pr, &schedule)?;
            if let Some(path) = dump_profile {
                dump_fields(path, &[("flow".to_string(), &state.u)])?;
            }
            let model = pr.model();
            let pohozaev = core::potential_pohozaev(&state.u, &v, &model)?;
            let scale = core::limit::identity_scale(&state.u, &model)?;
            match format {
                Format::Csv => state.write_trace_csv(sink.writer()?, &pr, &v)?,
                Format::Json => {
                    let mut value = state.to_json();
                    value["params"] = params_json(&pr);
                    value["potential"] = serde_json::to_value(&v)?;
                    value["potentialPohozaev"] = json!(pohozaev);
                    value["pohozaevRelative"] = json!(pohozaev.abs() / scale);
                    output::write_json(sink.writer()?, value)?;
                }
            }
            Ok(())
        }
    }
}

fn unique_energy(pr: &ProblemParams) -> Result<f64> {
    match core::solve(pr)?.as_slice() {
        [one] => Ok(one.energy),
        _ => Err(core::Error::RegimeMismatch("expected a unique limit solution".into()).into()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<core::Error>() {
        return match e.kind() {
            ErrorKind::BadInput => 2,
            ErrorKind::Nonexistence => 3,
            ErrorKind::Numerical => 4,
            ErrorKind::Io => 1,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 1;
    }
    2
}

fn append_log(path: &PathBuf, code: u8) {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let args: Vec<String> = std::env::args().collect();
    let line = format!("{secs} exit={code} {}\n", args.join(" "));
    let _ = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| f.write_all(line.as_bytes()));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = cli.log.clone();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    };
    if let Some(path) = log {
        append_log(&path, code);
    }
    ExitCode::from(code)
}
