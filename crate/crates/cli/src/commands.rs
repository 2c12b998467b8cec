use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use heatsphere::diffusion::{compare_to_kernel, walk, walk_with_paths, write_paths_csv, WalkConfig};
use heatsphere::experiments::{load_csv, repeated_cv, GridConfig, KernelFamily, RepeatedCvConfig};
use heatsphere::heat::{k_exact, sweet_spot_time, ExactKernelParams};
use heatsphere::kernel::{gram_matrix_with_ids, psd_check, KernelSpec, PsdReport};
use heatsphere::parametrix::{k_prx, u0, u1, u2, unphysical_regime};
use heatsphere::SphereMapKind;

use crate::output::{open, write_header, write_json};
use crate::{CliError, Format, GlobalArgs};

fn parse_family(s: &str) -> Result<KernelFamily, String> {
    s.parse().map_err(|e: heatsphere::Error| e.to_string())
}

fn parse_map(s: &str) -> Result<SphereMapKind, String> {
    s.parse().map_err(|e: heatsphere::Error| e.to_string())
}

/// The explicit map, or the count-data default for hyperspherical kernels.
fn resolve_map(family: KernelFamily, map: Option<SphereMapKind>) -> Result<SphereMapKind, CliError> {
    match (family.is_hyperspherical(), map) {
        (true, None) => Ok(SphereMapKind::SqrtL1),
        (true, Some(SphereMapKind::None)) => {
            Err(CliError::Usage(format!("kernel {family} needs a sphere map (sqrt-l1 or l2)")))
        }
        (false, Some(m)) if m != SphereMapKind::None => {
            Err(CliError::Usage(format!("kernel {family} does not take a sphere map")))
        }
        (false, _) => Ok(SphereMapKind::None),
        (true, Some(m)) => Ok(m),
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Input CSV (optionally gzip-compressed).
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding class labels.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// One of lin, rbf, cos, prx, ext.
    #[arg(long, value_parser = parse_family)]
    pub kernel: KernelFamily,
    /// Diffusion time.
    #[arg(long, conflicts_with = "t_star")]
    pub t: Option<f64>,
    /// Multiplier of the sweet-spot time log(n)/n.
    #[arg(long)]
    pub t_star: Option<f64>,
    /// RBF width.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// One of sqrt-l1, l2, none.
    #[arg(long, value_parser = parse_map)]
    pub map: Option<SphereMapKind>,
    /// Report the extreme eigenvalues of the Gram matrix.
    #[arg(long)]
    pub psd_check: bool,
}

#[derive(Serialize)]
struct KernelSidecar {
    spec: KernelSpec,
    n: usize,
    m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    psd: Option<PsdReport>,
}

#[derive(Serialize)]
struct KernelJson<'a> {
    #[serde(flatten)]
    sidecar: &'a KernelSidecar,
    sample_ids: &'a [String],
    gram: Vec<&'a [f64]>,
}

fn kernel_spec(a: &KernelArgs, n: usize) -> Result<KernelSpec, CliError> {
    let map = resolve_map(a.kernel, a.map)?;
    let uses_t = matches!(a.kernel, KernelFamily::Prx | KernelFamily::Ext);
    if !uses_t && (a.t.is_some() || a.t_star.is_some()) {
        return usage(format!("kernel {} takes no diffusion time", a.kernel));
    }
    if a.kernel != KernelFamily::Rbf && a.gamma.is_some() {
        return usage("--gamma applies only to rbf");
    }
    let t = || -> Result<f64, CliError> {
        match (a.t, a.t_star) {
            (Some(t), None) => Ok(t),
            (None, Some(ts)) => sweet_spot_time(n, ts).map_err(|e| CliError::Usage(e.to_string())),
            _ => usage(format!("kernel {} needs --t or --t-star", a.kernel)),
        }
    };
    let spec = match a.kernel {
        KernelFamily::Lin => Ok(KernelSpec::linear()),
        KernelFamily::Rbf => match a.gamma {
            Some(g) => KernelSpec::rbf(g),
            None => return usage("rbf needs --gamma"),
        },
        KernelFamily::Cos => KernelSpec::cosine(map),
        KernelFamily::Prx => KernelSpec::parametrix(t()?, map),
        KernelFamily::Ext => KernelSpec::exact_heat(n, t()?, map),
    };
    spec.map_err(|e| CliError::Usage(e.to_string()))
}

pub fn kernel(global: &GlobalArgs, a: &KernelArgs) -> Result<(), CliError> {
    // flag combinations are checked before any data is read
    kernel_spec(a, 3)?;
    let map = resolve_map(a.kernel, a.map)?;
    let data = load_csv(&a.input, &a.label_column, map)?;
    let spec = kernel_spec(a, data.num_features())?;
    let gram = gram_matrix_with_ids(&spec, &data.matrix, data.sample_ids.clone())?;
    let psd = if a.psd_check { Some(psd_check(&gram)?) } else { None };
    let sidecar = KernelSidecar { spec, n: data.num_features(), m: data.len(), psd };
    let config = json!({
        "input": a.input,
        "label_column": a.label_column,
        "kernel": a.kernel,
        "spec": spec,
        "psd_check": a.psd_check,
        "format": global.format,
    });
    let mut out = open(global.output.as_deref())?;
    match global.format {
        Format::Json => {
            let body = KernelJson {
                sidecar: &sidecar,
                sample_ids: &gram.sample_ids,
                gram: (0..gram.dim()).map(|i| gram.row(i)).collect(),
            };
            write_json(&mut *out, global, "kernel", &config, &body)?;
        }
        Format::Csv | Format::Table => {
            gram.write_csv(&mut out)?;
            if let Some(path) = &global.output {
                let mut side = BufWriter::new(File::create(path.with_extension("json"))?);
                write_json(&mut side, global, "kernel", &config, &sidecar)?;
                side.flush()?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// Input CSV (optionally gzip-compressed).
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding class labels.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// One of lin, rbf, cos, prx, ext.
    #[arg(long, value_parser = parse_family)]
    pub kernel: KernelFamily,
    /// One of sqrt-l1, l2, none.
    #[arg(long, value_parser = parse_map)]
    pub map: Option<SphereMapKind>,
    /// Sweet-spot multipliers for prx and ext.
    #[arg(long, value_delimiter = ',')]
    pub t_star_grid: Option<Vec<f64>>,
    /// Soft-margin penalties.
    #[arg(long = "C-grid", alias = "c-grid", value_delimiter = ',')]
    pub c_grid: Option<Vec<f64>>,
    /// RBF widths; defaults to multiples of 1/(n·variance).
    #[arg(long, value_delimiter = ',')]
    pub gamma_grid: Option<Vec<f64>>,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Independent repetitions, each with its own shuffle.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Keep only KMeans representatives of each class in every run.
    #[arg(long)]
    pub balance: bool,
    /// Representatives per class; implies --balance.
    #[arg(long)]
    pub m_r: Option<usize>,
    /// KMeans restarts per class when balancing.
    #[arg(long, default_value_t = 50)]
    pub kmeans_runs: usize,
    /// Record wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
}

pub fn cv(global: &GlobalArgs, a: &CvArgs) -> Result<(), CliError> {
    let map = resolve_map(a.kernel, a.map)?;
    if a.balance && a.m_r.is_none() {
        return usage("--balance needs --m-r");
    }
    let uses_t = matches!(a.kernel, KernelFamily::Prx | KernelFamily::Ext);
    if !uses_t && a.t_star_grid.is_some() {
        return usage(format!("kernel {} takes no --t-star-grid", a.kernel));
    }
    if a.kernel != KernelFamily::Rbf && a.gamma_grid.is_some() {
        return usage("--gamma-grid applies only to rbf");
    }
    if a.runs == 0 || a.folds < 2 {
        return usage("need --runs ≥ 1 and --folds ≥ 2");
    }
    let mut grid = GridConfig::new(a.kernel, map).with_seed(global.seed);
    if let Some(ts) = &a.t_star_grid {
        grid = grid.with_t_star_grid(ts.clone());
    }
    if let Some(cs) = &a.c_grid {
        grid = grid.with_c_grid(cs.clone());
    }
    if let Some(gs) = &a.gamma_grid {
        grid.gamma_grid = gs.clone();
    }
    grid.folds = a.folds;
    let mut cfg = RepeatedCvConfig::new(grid, a.runs);
    if let Some(m_r) = a.m_r {
        cfg = cfg.with_balance(m_r, a.kmeans_runs);
    }
    let config = json!({
        "input": a.input,
        "label_column": a.label_column,
        "cv": cfg,
        "format": global.format,
    });

    let data = load_csv(&a.input, &a.label_column, map)?;
    let start = Instant::now();
    let mut report = repeated_cv(&data, &cfg)?;
    if a.timing {
        report.wall_time = Some(start.elapsed().as_secs_f64());
    }
    let mut out = open(global.output.as_deref())?;
    match global.format {
        Format::Json => write_json(&mut *out, global, "cv", &config, &report)?,
        Format::Table => {
            write_header(&mut *out, global, "cv", &config)?;
            out.write_all(report.to_table().as_bytes())?;
        }
        Format::Csv => {
            write_header(&mut *out, global, "cv", &config)?;
            for (i, run) in report.runs.iter().enumerate() {
                let mut buf = Vec::new();
                run.write_scores_csv(&mut buf)?;
                let text = String::from_utf8(buf).expect("scores are UTF-8");
                for (j, line) in text.lines().enumerate() {
                    match (i, j) {
                        (0, 0) => writeln!(out, "run,{line}")?,
                        (_, 0) => {}
                        _ => writeln!(out, "{},{line}", i + 1)?,
                    }
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Ambient dimension of the sphere S^{n-1}.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Diffusion time.
    #[arg(long, conflicts_with = "t_star")]
    pub t: Option<f64>,
    /// Multiplier of log(n)/n; 1 when neither time flag is given.
    #[arg(long)]
    pub t_star: Option<f64>,
    /// Independent walkers.
    #[arg(long, default_value_t = 20_000)]
    pub walkers: usize,
    /// Geodesic step length in radians.
    #[arg(long, default_value_t = 0.02)]
    pub delta: f64,
    /// Histogram bins over [0, π].
    #[arg(long, default_value_t = 32)]
    pub bins: usize,
    /// Write sampled paths of the first walkers to this CSV.
    #[arg(long)]
    pub paths: Option<PathBuf>,
    /// Number of walkers whose paths are dumped.
    #[arg(long, default_value_t = 10)]
    pub path_walkers: usize,
    /// Record every k-th step of the dumped paths.
    #[arg(long, default_value_t = 10)]
    pub path_stride: usize,
}

pub fn simulate(global: &GlobalArgs, a: &SimulateArgs) -> Result<(), CliError> {
    let t = match (a.t, a.t_star) {
        (Some(t), _) => t,
        (None, ts) => sweet_spot_time(a.n, ts.unwrap_or(1.0))?,
    };
    let cfg = WalkConfig::for_time(a.n, t, a.delta, a.walkers, global.seed)?;
    cfg.validate()?;
    let config = json!({
        "n": a.n,
        "t_requested": t,
        "t_walk": cfg.time(),
        "step_size": cfg.step_size,
        "num_steps": cfg.num_steps,
        "walkers": a.walkers,
        "bins": a.bins,
        "format": global.format,
    });
    let ends = walk(&cfg)?;
    let report = compare_to_kernel(&cfg.start, &ends, a.n, cfg.time(), a.bins)?;
    if let Some(path) = &a.paths {
        let mut small = cfg.clone();
        small.num_walkers = a.path_walkers.min(a.walkers);
        let (_, paths) = walk_with_paths(&small, a.path_stride.max(1))?;
        let mut f = BufWriter::new(File::create(path)?);
        write_paths_csv(&paths, &mut f)?;
        f.flush()?;
    }
    let mut out = open(global.output.as_deref())?;
    match global.format {
        Format::Json => write_json(&mut *out, global, "simulate", &config, &report)?,
        Format::Csv => {
            write_header(&mut *out, global, "simulate", &config)?;
            writeln!(out, "# ks_statistic {}", report.ks_statistic)?;
            writeln!(out, "theta_lo,theta_hi,count,empirical_density,predicted_density")?;
            for b in &report.histogram {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    b.theta_lo, b.theta_hi, b.count, b.empirical_density, b.predicted_density
                )?;
            }
        }
        Format::Table => {
            write_header(&mut *out, global, "simulate", &config)?;
            writeln!(out, "KS statistic {:.4} over {} walkers", report.ks_statistic, report.walkers)?;
            writeln!(out, "{:>8} {:>8} {:>8} {:>10} {:>10}", "θ_lo", "θ_hi", "count", "empirical", "predicted")?;
            for b in &report.histogram {
                writeln!(
                    out,
                    "{:>8.4} {:>8.4} {:>8} {:>10.4} {:>10.4}",
                    b.theta_lo, b.theta_hi, b.count, b.empirical_density, b.predicted_density
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Ambient dimensions.
    #[arg(long, value_delimiter = ',', default_value = "3,100,200")]
    pub n_grid: Vec<usize>,
    /// Diffusion times, shared by every n.
    #[arg(long, value_delimiter = ',', conflicts_with = "t_star_grid")]
    pub t_grid: Option<Vec<f64>>,
    /// Multipliers of log(n)/n.
    #[arg(long, value_delimiter = ',')]
    pub t_star_grid: Option<Vec<f64>>,
    /// Geodesic distances in [0, π]; 33 even steps by default.
    #[arg(long, value_delimiter = ',')]
    pub theta_grid: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct ShapeSummary {
    n: usize,
    t: f64,
    /// One-sided slope of the normalized exact kernel at θ = π.
    slope_ext_at_pi: f64,
    slope_prx_at_pi: f64,
    /// `(n-2)t > 3`.
    unphysical: bool,
}

#[derive(Serialize)]
struct ShapeRow {
    n: usize,
    t: f64,
    theta: f64,
    k_prx: f64,
    k_exact: f64,
    u0: Option<f64>,
    u1: Option<f64>,
    u2: Option<f64>,
}

#[derive(Serialize)]
struct Diagnosis {
    summaries: Vec<ShapeSummary>,
    rows: Vec<ShapeRow>,
}

const SLOPE_STEP: f64 = 1e-4;

fn slope_at_pi<F: Fn(f64) -> heatsphere::Result<f64>>(f: F) -> heatsphere::Result<f64> {
    let pi = std::f64::consts::PI;
    let h = SLOPE_STEP;
    Ok((3.0 * f(pi)? - 4.0 * f(pi - h)? + f(pi - 2.0 * h)?) / (2.0 * h))
}

fn diagnose_one(n: usize, t: f64, thetas: &[f64]) -> heatsphere::Result<(ShapeSummary, Vec<ShapeRow>)> {
    let params = ExactKernelParams::new(n, t)?;
    let ext = |th: f64| k_exact(th.cos(), &params);
    let summary = ShapeSummary {
        n,
        t,
        slope_ext_at_pi: slope_at_pi(ext)?,
        slope_prx_at_pi: slope_at_pi(|th| k_prx(th, t))?,
        unphysical: unphysical_regime(n, t),
    };
    let d = n - 1;
    let rows = thetas
        .iter()
        .map(|&th| {
            Ok(ShapeRow {
                n,
                t,
                theta: th,
                k_prx: k_prx(th, t)?,
                k_exact: ext(th)?,
                u0: u0(th, d).ok(),
                u1: u1(th, d).ok(),
                u2: u2(th, d).ok(),
            })
        })
        .collect::<heatsphere::Result<Vec<_>>>()?;
    Ok((summary, rows))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn diagnose(global: &GlobalArgs, a: &DiagnoseArgs) -> Result<(), CliError> {
    let pi = std::f64::consts::PI;
    let thetas = a.theta_grid.clone().unwrap_or_else(|| (0..=32).map(|i| pi * i as f64 / 32.0).collect());
    if a.n_grid.is_empty() || thetas.is_empty() {
        return usage("grids must be nonempty");
    }
    if let Some(bad) = thetas.iter().find(|th| !(0.0..=pi).contains(*th)) {
        return usage(format!("θ = {bad} is outside [0, π]"));
    }
    let mut jobs = Vec::new();
    for &n in &a.n_grid {
        if n < 3 {
            return usage(format!("n = {n} is below 3"));
        }
        match &a.t_grid {
            Some(ts) => jobs.extend(ts.iter().map(|&t| (n, t))),
            None => {
                for &ts in a.t_star_grid.as_deref().unwrap_or(&[1.0]) {
                    jobs.push((n, sweet_spot_time(n, ts)?));
                }
            }
        }
    }
    let config = json!({
        "n_grid": a.n_grid,
        "jobs": jobs,
        "theta_grid": thetas,
        "format": global.format,
    });
    let parts = jobs.par_iter().map(|&(n, t)| diagnose_one(n, t, &thetas)).collect::<heatsphere::Result<Vec<_>>>()?;
    let mut diag = Diagnosis { summaries: Vec::new(), rows: Vec::new() };
    for (s, r) in parts {
        diag.summaries.push(s);
        diag.rows.extend(r);
    }
    let mut out = open(global.output.as_deref())?;
    match global.format {
        Format::Json => write_json(&mut *out, global, "diagnose", &config, &diag)?,
        Format::Csv => {
            write_header(&mut *out, global, "diagnose", &config)?;
            writeln!(out, "n,t,theta,k_prx,k_exact,u0,u1,u2,slope_ext_at_pi,slope_prx_at_pi,unphysical")?;
            for r in &diag.rows {
                let s = diag.summaries.iter().find(|s| s.n == r.n && s.t == r.t).expect("every row has a summary");
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    r.n,
                    r.t,
                    r.theta,
                    r.k_prx,
                    r.k_exact,
                    opt(r.u0),
                    opt(r.u1),
                    opt(r.u2),
                    s.slope_ext_at_pi,
                    s.slope_prx_at_pi,
                    s.unphysical
                )?;
            }
        }
        Format::Table => {
            write_header(&mut *out, global, "diagnose", &config)?;
            let mut text = String::new();
            let _ =
                writeln!(text, "{:>5} {:>10} {:>12} {:>12} {:>10}", "n", "t", "slope ext π", "slope prx π", "(n-2)t>3");
            for s in &diag.summaries {
                let _ = writeln!(
                    text,
                    "{:>5} {:>10.4e} {:>12.3e} {:>12.3e} {:>10}",
                    s.n, s.t, s.slope_ext_at_pi, s.slope_prx_at_pi, s.unphysical
                );
            }
            let _ = writeln!(text);
            let _ = writeln!(
                text,
                "{:>5} {:>10} {:>7} {:>11} {:>11} {:>11} {:>11} {:>11}",
                "n", "t", "θ", "k_prx", "k_exact", "u0", "u1", "u2"
            );
            let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
            for r in &diag.rows {
                let _ = writeln!(
                    text,
                    "{:>5} {:>10.4e} {:>7.4} {:>11.4e} {:>11.4e} {:>11} {:>11} {:>11}",
                    r.n,
                    r.t,
                    r.theta,
                    r.k_prx,
                    r.k_exact,
                    cell(r.u0),
                    cell(r.u1),
                    cell(r.u2)
                );
            }
            out.write_all(text.as_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}
