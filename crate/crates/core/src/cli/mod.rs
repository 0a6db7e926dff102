//! Command-line front end: configuration, task pipelines and file output.

pub mod checks;
pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::analytic::{BarrierModel, DeltaModel};
use crate::error::Error;
use crate::oracle::evolve;
use crate::scattering::{scan_c2, survival_curve, RescaledPotential};
use crate::units::PhysicalConstants;

use checks::{fitted_resonance, CheckResult, Status};
pub use config::RunConfig;
use config::Model;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] Error),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 config, 3 numerical, 4 validation, 1 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Scan,
    Resonances,
    Survival,
    Validate,
    Figures,
}

#[derive(Debug, Parser)]
#[command(name = "scaledecay", version, about = "Decay of metastable states in scaling potentials")]
pub struct Args {
    #[arg(value_enum)]
    pub task: Task,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Input echo, outputs and timing of one run.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord<T: Serialize> {
    pub task: Task,
    pub version: &'static str,
    pub input: RunConfig,
    pub outputs: T,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Files written by a task, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Written {
    pub files: Vec<String>,
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool already configured: {e}");
        }
    }
    match load_config(&args.config).and_then(|cfg| run_task(args.task, &cfg, &args.out)) {
        Ok(w) => {
            for f in &w.files {
                println!("{f}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_toml(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Runs a task and writes its outputs into `out_dir`.
pub fn run_task(task: Task, cfg: &RunConfig, out_dir: &Path) -> Result<Written> {
    let start = Instant::now();
    let mut files: Vec<(String, String)> = Vec::new();
    let mut failed = None;
    let outputs = match task {
        Task::Scan => {
            let csv = scan_csv(cfg)?;
            files.push(("scan.csv".into(), csv));
            serde_json::json!({ "files": ["scan.csv"] })
        }
        Task::Resonances => {
            let (csv, rows) = resonances(cfg)?;
            files.push(("resonances.csv".into(), csv));
            serde_json::to_value(rows).map_err(|e| CliError::Config(e.to_string()))?
        }
        Task::Survival => {
            let csv = survival_csv(cfg)?;
            files.push(("survival.csv".into(), csv));
            serde_json::json!({ "files": ["survival.csv"] })
        }
        Task::Figures => {
            files.extend(figures(cfg)?);
            let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
            serde_json::json!({ "files": names })
        }
        Task::Validate => {
            let checks = checks::run_checks(cfg)?;
            let bad: Vec<&str> = checks
                .iter()
                .filter(|c| c.status == Status::Fail)
                .map(|c| c.name.as_str())
                .collect();
            if !bad.is_empty() {
                failed = Some(bad.join(", "));
            }
            serde_json::to_value(ValidationReport {
                passed: bad.is_empty(),
                checks,
            })
            .map_err(|e| CliError::Config(e.to_string()))?
        }
    };
    let record = ResultRecord {
        task,
        version: VERSION,
        input: cfg.clone(),
        outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let name = match task {
        Task::Validate => "validate.json".to_string(),
        _ => format!("{}_record.json", task_name(task)),
    };
    let json = serde_json::to_string_pretty(&record).map_err(|e| CliError::Config(e.to_string()))? + "\n";
    files.push((name, json));

    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut written = Written::default();
    for (name, body) in &files {
        write_atomic(&out_dir.join(name), body.as_bytes())?;
        written.files.push(out_dir.join(name).display().to_string());
    }
    match failed {
        Some(names) => Err(CliError::Validation(names)),
        None => Ok(written),
    }
}

fn task_name(task: Task) -> &'static str {
    match task {
        Task::Scan => "scan",
        Task::Resonances => "resonances",
        Task::Survival => "survival",
        Task::Validate => "validate",
        Task::Figures => "figures",
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn csv_header(consts: &PhysicalConstants) -> String {
    format!(
        "# scaledecay v{VERSION}, units: hbar={} mass={}\n",
        consts.hbar(),
        consts.mass()
    )
}

fn c2_table(pot: &RescaledPotential, consts: &PhysicalConstants, range: (f64, f64), samples: usize, h: f64) -> Result<String> {
    let abar = pot.well_end();
    let scan = scan_c2(pot, consts, range, samples, h)?;
    let mut s = csv_header(consts);
    s.push_str("kbar_abar,C2,ln_C2\n");
    for (k, c) in scan {
        let _ = writeln!(s, "{},{},{}", k * abar, c, c.ln());
    }
    Ok(s)
}

pub fn scan_csv(cfg: &RunConfig) -> Result<String> {
    let consts = cfg.constants()?;
    let model = cfg.model()?;
    let sc = &cfg.scan;
    let mut hi = sc.kmax;
    if let Model::Barrier(m) = &model {
        hi = hi.min(m.k_cut() * (1.0 - 1e-9));
        if hi <= sc.kmin {
            return Err(CliError::Config(format!(
                "field `scan.kmin`: no wavenumbers below the barrier cut {}",
                m.k_cut()
            )));
        }
    }
    c2_table(&model.potential(), &consts, (sc.kmin, hi), sc.samples, sc.grid_step)
}

/// One row of the resonance table: closed form and fit side by side.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceRow {
    pub n: usize,
    pub kbar_n: f64,
    pub ebar_n: f64,
    pub f: f64,
    pub g: f64,
    pub delta: f64,
    pub gamma_n_static: f64,
    pub kbar_n_fitted: f64,
    pub ebar_n_fitted: f64,
    pub f_fitted: f64,
    pub g_fitted: f64,
    pub delta_fitted: f64,
    pub gamma_n_static_fitted: f64,
    pub fit_residual: f64,
    pub regime_warning: Option<String>,
}

pub fn resonances(cfg: &RunConfig) -> Result<(String, Vec<ResonanceRow>)> {
    let consts = cfg.constants()?;
    let law = cfg.scale_law()?;
    let model = cfg.model()?;
    let count = match (&model, cfg.resonances.count) {
        (_, Some(c)) => c,
        (Model::Barrier(m), None) => m.roots().len(),
        (Model::Delta(_), None) => 3,
    };
    let l2 = law.l0() * law.l0();
    let mut rows = Vec::with_capacity(count);
    for n in 1..=count {
        let (a, warn, fit) = fitted_resonance(&model, &consts, n, cfg.resonances.grid_step, cfg.resonances.fit_samples)?;
        let r = &fit.resonance;
        rows.push(ResonanceRow {
            n,
            kbar_n: a.kbar_n,
            ebar_n: a.ebar_n,
            f: a.f,
            g: a.g,
            delta: a.delta_shift,
            gamma_n_static: a.rate_per_tau(&consts) / l2,
            kbar_n_fitted: fit.k_argmin,
            ebar_n_fitted: r.ebar_n - r.delta_shift,
            f_fitted: r.f,
            g_fitted: r.g,
            delta_fitted: r.delta_shift,
            gamma_n_static_fitted: r.rate_per_tau(&consts) / l2,
            fit_residual: fit.residual,
            regime_warning: warn.map(|w| w.to_string()),
        });
    }
    let mut s = csv_header(&consts);
    s.push_str(
        "n,kbar_n,Ebar_n,F,G,delta,Gamma_n_static,\
         kbar_n_fitted,Ebar_n_fitted,F_fitted,G_fitted,delta_fitted,Gamma_n_static_fitted,\
         F_reldev,G_reldev,delta_reldev,Gamma_reldev\n",
    );
    let rd = |x: f64, y: f64| (x - y).abs() / y.abs();
    for r in &rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.kbar_n,
            r.ebar_n,
            r.f,
            r.g,
            r.delta,
            r.gamma_n_static,
            r.kbar_n_fitted,
            r.ebar_n_fitted,
            r.f_fitted,
            r.g_fitted,
            r.delta_fitted,
            r.gamma_n_static_fitted,
            rd(r.f_fitted, r.f),
            rd(r.g_fitted, r.g),
            rd(r.delta_fitted, r.delta),
            rd(r.gamma_n_static_fitted, r.gamma_n_static),
        );
    }
    Ok((s, rows))
}

/// `γ` and `P_analytic` come from the fitted resonance, so they hold outside
/// the large-strength regime as well.
pub fn survival_csv(cfg: &RunConfig) -> Result<String> {
    let sv = cfg
        .survival
        .ok_or_else(|| CliError::Config("section `survival` is required for this task".into()))?;
    let consts = cfg.constants()?;
    let law = cfg.scale_law()?;
    let model = cfg.model()?;
    let (analytic, _, fit) = fitted_resonance(&model, &consts, sv.n, cfg.resonances.grid_step, cfg.resonances.fit_samples)?;
    let times: Vec<f64> = (0..sv.samples)
        .map(|j| sv.tmax * j as f64 / (sv.samples - 1) as f64)
        .collect();
    let curve = survival_curve(&fit.resonance, &consts, &law, &times)?;
    let oracle = if cfg.oracle.enabled {
        let pot = model.potential();
        let mut ecfg = cfg.evolution(sv.tmax);
        ecfg.output_samples = sv.samples;
        let x = ecfg.grid()?;
        let psi0 = checks::resonance_start(&model, &law, &consts, &analytic, &fit, &x)?;
        Some(evolve(&pot, &law, &consts, &psi0, &ecfg)?.curve.p)
    } else {
        None
    };
    let mut s = csv_header(&consts);
    s.push_str(if oracle.is_some() { "t,tau,gamma,P_analytic,P_oracle\n" } else { "t,tau,gamma,P_analytic\n" });
    for j in 0..times.len() {
        let _ = write!(s, "{},{},{},{}", curve.times[j], curve.tau[j], curve.gamma[j], curve.p[j]);
        if let Some(p) = &oracle {
            let _ = write!(s, ",{}", p[j]);
        }
        s.push('\n');
    }
    Ok(s)
}

/// Landscapes of the two model potentials at the strengths shown in the
/// original figures, using the configured constants, `ā` and scan settings.
pub fn figures(cfg: &RunConfig) -> Result<Vec<(String, String)>> {
    let consts = cfg.constants()?;
    let abar = cfg.potential.abar;
    let sc = &cfg.scan;
    let mut out = Vec::new();
    for s in [10.0, 200.0] {
        let m = DeltaModel::from_dimensionless(consts, s, abar)?;
        let csv = c2_table(&RescaledPotential::from(&m), &consts, (0.1 / abar, 10.0 / abar), sc.samples, sc.grid_step)?;
        out.push((format!("fig1_strength{s}.csv"), csv));
    }
    let b = BarrierModel::from_dimensionless(consts, 40.0, abar, 2.0 * abar)?;
    let kc = b.k_cut();
    let range = (0.005 * kc, kc * (1.0 - 1e-6));
    out.push(("fig2_c2.csv".into(), c2_table(&RescaledPotential::from(&b), &consts, range, sc.samples, sc.grid_step)?));
    let mut s = csv_header(&consts);
    s.push_str("kbar_abar,A,A_display\n");
    for j in 0..sc.samples {
        let k = range.0 + (range.1 - range.0) * j as f64 / (sc.samples - 1) as f64;
        let a = b.a_coef(k)?;
        let kp = b.kprime(k)?;
        let _ = writeln!(s, "{},{},{}", k * abar, a, 2.5 * (kp * abar).exp() * a);
    }
    out.push(("fig2_a.csv".into(), s));
    Ok(out)
}
