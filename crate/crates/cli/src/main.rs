#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coopmotion::closed_forms::ZkbSpec;
use coopmotion::fd_scheme::{run_scheme, SchemeKind, SchemeSpec};
use coopmotion::format::sig15;
use coopmotion::scm_engine::{evolve, sample_histogram};
use coopmotion::verify::{
    classical_residual_study, clt_case_study, convergence_report, m_to_zero_check,
    p_star_hitting_time, residual_refinement, sandwich_check, BumpTest, QuadratureSpec, Report,
    ReportDoc,
};
use coopmotion::{Error, ModelParams, Pmf};

mod init;

/// Failure modes mapped to exit codes 2 (bad input) and 3 (runtime).
#[derive(Debug)]
pub enum CliError {
    Usage { flag: String, message: String },
    Runtime(Error),
    Io(String),
}

impl CliError {
    pub fn usage(flag: &str, message: String) -> Self {
        CliError::Usage {
            flag: flag.to_string(),
            message,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

/// Validation helper: attach the flag name to a domain error.
fn check<T>(flag: &str, r: coopmotion::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::usage(flag, e.to_string()))
}

#[derive(Parser)]
#[command(
    name = "coopmotion",
    version,
    about = "Symmetric cooperative motion: exact evolution, schemes and limit checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a lattice PMF by the exact recurrence.
    Evolve(EvolveArgs),
    /// Draw tree-sampler realizations and tabulate them.
    Sample(SampleArgs),
    /// Run the explicit finite-difference scheme.
    Scheme(SchemeArgs),
    /// Evaluate the ZKB profile.
    Zkb(ZkbArgs),
    /// Produce a verification report.
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, allow_negative_numbers = true)]
    m: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    q: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    r: f64,
    /// Step length of the walk.
    #[arg(long = "R", default_value_t = 1)]
    step: u32,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams, CliError> {
        let flag = if !(self.m > 0.0 && self.m.is_finite()) {
            "--m"
        } else if !(self.q > 0.0 && self.q <= 1.0) {
            "--q"
        } else if !(0.5..=1.0).contains(&self.r) {
            "--r"
        } else {
            "--R"
        };
        check(flag, ModelParams::new(self.m, self.q, self.r, self.step))
    }
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: u64,
    /// delta:K, uniform:A..B or csv:PATH
    #[arg(long, default_value = "delta:0")]
    init: String,
    /// Output CSV path (standard output when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: u32,
    #[arg(long, default_value = "delta:0")]
    init: String,
    #[arg(long, default_value_t = 10_000)]
    count: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SchemeArgs {
    /// p_laplace or heat
    #[arg(long, default_value = "p_laplace")]
    kind: String,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    m: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    q: f64,
    /// Refinement parameter N.
    #[arg(long = "N", allow_negative_numbers = true)]
    n_mesh: f64,
    /// heaviside, zkb:EPS, gauss:VAR, mesh:PATH or a lattice measure
    #[arg(long, default_value = "heaviside")]
    init: String,
    #[arg(long, default_value = "-4..4", allow_hyphen_values = true)]
    window: String,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    t: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ZkbArgs {
    #[arg(long, allow_negative_numbers = true)]
    m: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    eps: f64,
    #[arg(long, allow_negative_numbers = true)]
    t: f64,
    /// Points at which to evaluate (comma separated).
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        required = true
    )]
    eval: Vec<f64>,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Kolmogorov distance to the Beta limit along n.
    Convergence {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "delta:0")]
        init: String,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// First time the largest atom drops to p*.
    Pstar {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "delta:0")]
        init: String,
        #[arg(long, default_value_t = 10_000)]
        cap: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Ordering of the sandwiched scheme evolutions.
    Sandwich {
        #[arg(long, allow_negative_numbers = true)]
        m: f64,
        #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
        eps: f64,
        #[arg(long = "n-tilde", default_value_t = 64)]
        n_tilde: u64,
        #[arg(long = "N", default_value_t = 64)]
        n_mesh: u64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        /// Initial measure; defaults to a point mass after one step.
        #[arg(long)]
        init: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Classical and distributional residuals of the ZKB profile.
    Residual {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        m: f64,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        eps: f64,
        /// Exponent used in the nonlinearity (defaults to m).
        #[arg(long, allow_negative_numbers = true)]
        psi: Option<f64>,
        #[arg(long, default_value_t = 3)]
        doublings: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Heat scheme against the Gaussian limit.
    Clt {
        #[arg(long = "N", default_value_t = 64)]
        n_mesh: u32,
        #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
        eps: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Limit variance as m decreases.
    Mzero {
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.2,0.1,0.05,0.02",
            allow_negative_numbers = true
        )]
        m: Vec<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct OutArgs {
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the report arrays as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn emit(doc: &ReportDoc, out: &OutArgs) -> Result<(), CliError> {
    match &out.out {
        Some(p) => write_file(p, &doc.to_json())?,
        None => println!("{}", doc.to_json()),
    }
    if let Some(p) = &out.csv {
        write_file(p, &doc.to_csv())?;
    }
    Ok(())
}

fn cmd_evolve(a: &EvolveArgs) -> Result<(), CliError> {
    let params = a.model.params()?;
    let mu = init::parse_pmf(&a.init, "--init")?;
    let p = evolve(&mu, &params, a.n)?;
    let drift = p.total_mass() - mu.total_mass();
    let summary = format!(
        "mass_drift={}\nmax_p={}",
        sig15(drift),
        sig15(p.max_weight())
    );
    match &a.out {
        Some(path) => {
            write_file(path, &p.to_csv())?;
            println!("{summary}");
        }
        None => {
            print!("{}", p.to_csv());
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn cmd_sample(a: &SampleArgs) -> Result<(), CliError> {
    let params = a.model.params()?;
    if a.count == 0 {
        return Err(CliError::usage(
            "--count",
            "count must be at least 1".into(),
        ));
    }
    let mu = init::parse_pmf(&a.init, "--init")?;
    let hist = sample_histogram(&params, a.n, &mu, a.count, a.seed).map_err(|e| match e {
        Error::DomainError(msg) => CliError::usage("--m", msg),
        other => CliError::Runtime(other),
    })?;
    let mut csv = String::from("k,frequency\n");
    if hist.neg_inf > 0 {
        csv.push_str(&format!(
            "-inf,{}\n",
            sig15(hist.neg_inf as f64 / hist.count as f64)
        ));
    }
    for k in hist.finite.keys() {
        csv.push_str(&format!("{k},{}\n", sig15(hist.frequency(*k))));
    }
    if hist.pos_inf > 0 {
        csv.push_str(&format!(
            "+inf,{}\n",
            sig15(hist.pos_inf as f64 / hist.count as f64)
        ));
    }
    let exact = evolve(&mu, &params, a.n as u64)?;
    let (stat, dof, p_value) = hist.chi_square(&exact);
    let summary = format!(
        "count={}\ntotal_variation={}\nchi_square={}\ndof={dof}\np_value={}",
        hist.count,
        sig15(hist.total_variation(&exact)),
        sig15(stat),
        sig15(p_value)
    );
    match &a.out {
        Some(path) => {
            write_file(path, &csv)?;
            println!("{summary}");
        }
        None => {
            print!("{csv}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn cmd_scheme(a: &SchemeArgs) -> Result<(), CliError> {
    let kind = match a.kind.as_str() {
        "p_laplace" => {
            if !(a.m > 0.0 && a.m.is_finite()) {
                return Err(CliError::usage(
                    "--m",
                    format!("m must satisfy m > 0, got {}", a.m),
                ));
            }
            if !(a.q > 0.0 && a.q <= 1.0) {
                return Err(CliError::usage(
                    "--q",
                    format!("q must satisfy 0 < q <= 1, got {}", a.q),
                ));
            }
            SchemeKind::PLaplace { m: a.m, q: a.q }
        }
        "heat" => SchemeKind::Heat,
        other => {
            return Err(CliError::usage(
                "--kind",
                format!("expected p_laplace or heat, got {other:?}"),
            ))
        }
    };
    let spec = check("--N", SchemeSpec::new(kind, a.n_mesh))?;
    if !(a.t >= 0.0 && a.t.is_finite()) {
        return Err(CliError::usage(
            "--t",
            format!("t must be nonnegative, got {}", a.t),
        ));
    }
    let window = init::parse_window(&a.window, "--window")?;
    let f0 = init::parse_mesh(&a.init, "--init", &spec, window)?;
    let out = run_scheme(&f0, &spec, a.t)?;
    let csv = out.to_csv(&kind);
    match &a.out {
        Some(path) => {
            write_file(path, &csv)?;
            println!(
                "steps={}\ntime={}",
                coopmotion::fd_scheme::steps_to(a.t, spec.dt()),
                sig15(out.time)
            );
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_zkb(a: &ZkbArgs) -> Result<(), CliError> {
    if !(a.m > 0.0 && a.m.is_finite()) {
        return Err(CliError::usage(
            "--m",
            format!("m must satisfy m > 0, got {}", a.m),
        ));
    }
    if !(a.theta > 0.0) {
        return Err(CliError::usage(
            "--theta",
            format!("theta must be positive, got {}", a.theta),
        ));
    }
    if !(a.eps >= 0.0) {
        return Err(CliError::usage(
            "--eps",
            format!("eps must be nonnegative, got {}", a.eps),
        ));
    }
    let spec = ZkbSpec::new(a.theta, a.eps, a.m)?;
    let prof = check("--t", spec.at(a.t))?;
    println!("# support={}", sig15(prof.half_width()));
    println!("x,density,cdf");
    for &x in &a.eval {
        println!(
            "{},{},{}",
            sig15(x),
            sig15(prof.density(x)),
            sig15(prof.cdf(x))
        );
    }
    Ok(())
}

fn cmd_verify(v: &VerifyCommand) -> Result<(), CliError> {
    match v {
        VerifyCommand::Convergence {
            model,
            init,
            n,
            out,
        } => {
            let params = model.params()?;
            let mu = init::parse_pmf(init, "--init")?;
            if mu.has_infinite_atoms() {
                return Err(CliError::usage(
                    "--init",
                    "convergence needs a measure without mass at ±inf".into(),
                ));
            }
            if !params.is_symmetric() {
                return Err(CliError::usage(
                    "--r",
                    "convergence reports need r = 0.5".into(),
                ));
            }
            let mut n = n.clone();
            n.sort_unstable();
            emit(&convergence_report(&mu, &params, &n)?.to_doc(), out)
        }
        VerifyCommand::Pstar {
            model,
            init,
            cap,
            out,
        } => {
            let params = model.params()?;
            let mu = init::parse_pmf(init, "--init")?;
            if *cap == 0 {
                return Err(CliError::usage("--cap", "cap must be at least 1".into()));
            }
            let t = p_star_hitting_time(&mu, &params, *cap)?;
            let doc = ReportDoc::new("pstar")
                .param("m", params.m)
                .param("q", params.q)
                .param("r", params.r)
                .param("R", params.step)
                .param("cap", *cap)
                .fixture("p_star", params.p_star())
                .fixture("hitting_time", t as f64);
            emit(&doc, out)
        }
        VerifyCommand::Sandwich {
            m,
            eps,
            n_tilde,
            n_mesh,
            t,
            init,
            out,
        } => {
            if !(*m > 0.0 && m.is_finite()) {
                return Err(CliError::usage(
                    "--m",
                    format!("m must satisfy m > 0, got {m}"),
                ));
            }
            if !(*eps > 0.0 && *eps < 0.5) {
                return Err(CliError::usage(
                    "--eps",
                    format!("eps must lie in (0, 1/2), got {eps}"),
                ));
            }
            let mu = match init {
                Some(s) => init::parse_pmf(s, "--init")?,
                None => coopmotion::step_pmf(&Pmf::delta(0), &ModelParams::symmetric(*m)?),
            };
            let rep =
                sandwich_check(&mu, *m, *eps, *n_tilde, *n_mesh, *t).map_err(|e| match e {
                    Error::DomainError(msg) => CliError::usage("--init", msg),
                    other => CliError::Runtime(other),
                })?;
            emit(&rep.to_doc(), out)
        }
        VerifyCommand::Residual {
            m,
            eps,
            psi,
            doublings,
            out,
        } => {
            if !(*m > 0.0 && m.is_finite()) {
                return Err(CliError::usage(
                    "--m",
                    format!("m must satisfy m > 0, got {m}"),
                ));
            }
            if !(*eps > 0.0) {
                return Err(CliError::usage(
                    "--eps",
                    format!("eps must be positive, got {eps}"),
                ));
            }
            let spec = ZkbSpec::new(1.0, *eps, *m)?;
            let hw = spec.at(1.0)?.half_width();
            let points: Vec<f64> = (-4..=4).map(|i| 0.15 * hw * i as f64).collect();
            let h0 = 0.1 * hw;
            let classical = classical_residual_study(&spec, 1.0, h0.min(0.5 * eps), 4, &points)?;
            let reach = spec.at(1.0)?.half_width() * 1.5;
            let phi = BumpTest::new(0.0, reach, 1.0)?;
            let quad = QuadratureSpec {
                max_doublings: *doublings,
                ..QuadratureSpec::new((-reach, reach), 1.0, 40, 20)
            };
            let u = |x: f64, t: f64| spec.at(t).map(|p| p.density(x)).unwrap_or(0.0);
            let psi_exp = psi.unwrap_or(*m);
            let dist = residual_refinement(u, psi_exp, &phi, &quad)?;
            let doc = ReportDoc::new("residual")
                .param("m", *m)
                .param("eps", *eps)
                .param("psi_exponent", psi_exp)
                .param("converged", dist.converged)
                .array("probe_h", classical.iter().map(|c| c.0).collect())
                .array("classical", classical.iter().map(|c| c.1).collect())
                .array("nx", dist.nx.iter().map(|&n| n as f64).collect())
                .array("distributional", dist.residuals.clone())
                .fixture("final_distributional", dist.last());
            emit(&doc, out)
        }
        VerifyCommand::Clt { n_mesh, eps, out } => {
            if *n_mesh < 4 {
                return Err(CliError::usage(
                    "--N",
                    format!("N must be at least 4, got {n_mesh}"),
                ));
            }
            if !(*eps > 0.0) {
                return Err(CliError::usage(
                    "--eps",
                    format!("eps must be positive, got {eps}"),
                ));
            }
            emit(&clt_case_study(*n_mesh, *eps)?.to_doc(), out)
        }
        VerifyCommand::Mzero { m, out } => {
            if let Some(bad) = m.iter().find(|x| !(**x > 0.0)) {
                return Err(CliError::usage(
                    "--m",
                    format!("every m must satisfy m > 0, got {bad}"),
                ));
            }
            emit(&m_to_zero_check(m)?.to_doc(), out)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("COOPMOTION_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::usage(
                "COOPMOTION_THREADS",
                format!("expected a positive integer, got {v:?}"),
            )
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Evolve(a) => cmd_evolve(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Scheme(a) => cmd_scheme(a),
        Command::Zkb(a) => cmd_zkb(a),
        Command::Verify(v) => cmd_verify(v),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage { flag, message }) => {
            eprintln!("error: invalid {flag}: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(3)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
