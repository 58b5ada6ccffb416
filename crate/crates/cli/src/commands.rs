use std::path::{Path, PathBuf};

use ebspline::credible::{credible_ball, sample_posterior, RadiusSpec};
use ebspline::ebcore::{
    fit, Boundary, FitOptions, FitResult, ModelFamily, QDiagnostic, QGrid, Rounding, SelectionFlag,
    SelectionRule,
};
use ebspline::freq::{theorem4_experiment, Theorem4Config, Theorem4Report};
use ebspline::oracle::{oracle_lambda, oracle_path, KappaTable, OracleMethod, OraclePath};
use ebspline::simlab::{run_study, Generator, NoiseModel, StudyConfig};
use ebspline::spectral::{DesignConvention, DesignGrid};
use serde::{Deserialize, Serialize};

use crate::io::{
    check_design, csv_bytes, envelope, read_dataset, read_json, write_atomic, Dataset,
};
use crate::{BallArgs, CliError, GridArgs, Output, QArgs, RuleArg};

/// Print to stdout with `--stdout`, otherwise write the file.
fn emit(
    out: &Output,
    default: &str,
    command: &str,
    payload: &impl Serialize,
) -> Result<(), CliError> {
    let text = envelope(command, payload)?;
    if out.stdout {
        print!("{text}");
        return Ok(());
    }
    let path = out.out.clone().unwrap_or_else(|| PathBuf::from(default));
    write_atomic(&path, text.as_bytes())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_side(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

impl QArgs {
    fn q_grid(&self) -> Result<QGrid, CliError> {
        Ok(QGrid::stepped(self.qmin, self.qmax, self.qstep)?)
    }
}

impl GridArgs {
    fn options(&self) -> FitOptions {
        let rule = match self.rule {
            RuleArg::Profile => SelectionRule::ProfileLikelihood,
            RuleArg::Crossing => SelectionRule::Crossing(Rounding::Nearest),
        };
        FitOptions {
            rule,
            ..FitOptions::default()
        }
    }
}

impl BallArgs {
    fn spec(&self) -> RadiusSpec {
        RadiusSpec {
            alpha: self.alpha,
            mc_draws: self.mc_draws,
            seed: self.seed,
        }
    }
}

struct Fitted {
    data: Dataset,
    grid: DesignGrid,
    result: FitResult,
    q_grid: Vec<f64>,
}

fn load_and_fit(input: &Path, args: &GridArgs) -> Result<Fitted, CliError> {
    let data = read_dataset(input)?;
    let grid = DesignGrid::new(data.y.len(), args.design)?;
    check_design(&data, &grid)?;
    let qgrid = args.q.q_grid()?;
    let family = ModelFamily::analytic(grid.clone());
    let result = fit(&family, &data.y, &qgrid, &args.options())?;
    Ok(Fitted {
        data,
        grid,
        result,
        q_grid: qgrid.values().to_vec(),
    })
}

#[derive(Serialize)]
struct FitSummary<'a> {
    n: usize,
    design: DesignConvention,
    q_grid: &'a [f64],
    lambda_hat: f64,
    q_hat: f64,
    q_star: f64,
    sigma2_hat: f64,
    boundary: Option<Boundary>,
    flag: Option<SelectionFlag>,
    degenerate: bool,
    diagnostics: &'a [QDiagnostic],
}

impl<'a> FitSummary<'a> {
    fn of(f: &'a Fitted) -> Self {
        let r = &f.result;
        Self {
            n: f.grid.len(),
            design: f.grid.convention(),
            q_grid: &f.q_grid,
            lambda_hat: r.lambda_hat,
            q_hat: r.q_hat,
            q_star: r.q_star,
            sigma2_hat: r.sigma2_hat,
            boundary: r.boundary,
            flag: r.flag,
            degenerate: r.degenerate,
            diagnostics: &r.diagnostics,
        }
    }
}

pub fn fit_cmd(
    input: &Path,
    grid: &GridArgs,
    fitted: Option<&Path>,
    out: &Output,
) -> Result<(), CliError> {
    let f = load_and_fit(input, grid)?;
    if let Some(path) = fitted {
        let header = ["x", "y", "fitted"].map(String::from);
        let rows =
            (0..f.grid.len()).map(|i| vec![f.grid.points()[i], f.data.y[i], f.result.fitted[i]]);
        write_side(path, &csv_bytes(&header, rows)?)?;
    }
    emit(out, "fit.json", "fit", &FitSummary::of(&f))
}

#[derive(Serialize)]
struct BallSummary<'a> {
    #[serde(flatten)]
    fit: FitSummary<'a>,
    radius: f64,
    r_n: f64,
    sigma_hat: f64,
    #[serde(rename = "L")]
    l: f64,
    alpha: f64,
    mc_draws: usize,
    seed: u64,
    center_inside: bool,
    center: &'a [f64],
    draws: usize,
    draws_inside: Option<f64>,
}

pub fn credible_cmd(
    input: &Path,
    grid: &GridArgs,
    ball: &BallArgs,
    draws: usize,
    samples: Option<&Path>,
    out: &Output,
) -> Result<(), CliError> {
    let f = load_and_fit(input, grid)?;
    let spec = ball.spec();
    let b = credible_ball(&f.result, ball.l, &spec)?;
    let mut draws_inside = None;
    if draws > 0 {
        let curves = sample_posterior(&f.result, draws, ball.seed)?;
        let inside = curves
            .iter()
            .map(|c| b.contains(c))
            .collect::<Result<Vec<_>, _>>()?;
        draws_inside = Some(inside.iter().filter(|&&v| v).count() as f64 / draws as f64);
        let path = samples.map_or_else(|| PathBuf::from("samples.csv"), Path::to_path_buf);
        let mut header = vec!["x".to_string(), "fitted".to_string()];
        header.extend((1..=draws).map(|k| format!("draw_{k}")));
        let rows = (0..f.grid.len()).map(|i| {
            let mut row = vec![f.grid.points()[i], b.center[i]];
            row.extend(curves.iter().map(|c| c[i]));
            row
        });
        write_side(&path, &csv_bytes(&header, rows)?)?;
    } else if samples.is_some() {
        return Err(CliError::Input("--samples needs --draws > 0".into()));
    }
    let summary = BallSummary {
        fit: FitSummary::of(&f),
        radius: b.radius,
        r_n: b.r_n,
        sigma_hat: b.sigma_hat,
        l: b.l,
        alpha: b.alpha,
        mc_draws: spec.mc_draws,
        seed: spec.seed,
        center_inside: b.contains(&b.center)?,
        center: &b.center,
        draws,
        draws_inside,
    };
    emit(out, "ball.json", "credible", &summary)
}

pub struct SimulateOverrides {
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
}

pub fn simulate_cmd(
    config: &Path,
    o: &SimulateOverrides,
    table: Option<&Path>,
    out: &Output,
) -> Result<(), CliError> {
    let mut cfg: StudyConfig = read_json(config)?;
    if let Some(s) = o.sigma {
        cfg.sigma = s;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(m) = o.replicates {
        cfg.replicates = m;
    }
    let report = run_study(&cfg)?;
    let path = table.map_or_else(|| PathBuf::from("table.csv"), Path::to_path_buf);
    if !out.stdout || table.is_some() {
        write_side(&path, report.table_csv().as_bytes())?;
    }
    emit(out, "report.json", "simulate", &report)
}

fn default_replicates() -> usize {
    200
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareFile {
    generator: Generator,
    n: usize,
    #[serde(rename = "M", default = "default_replicates")]
    replicates: usize,
    q_choices: Option<Vec<f64>>,
    beta: Option<f64>,
    sigma: Option<f64>,
    seed: Option<u64>,
    design_convention: Option<DesignConvention>,
    independent_samples: Option<bool>,
    q_grid: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct CompareRow {
    q: f64,
    coverage_gcv_ball: f64,
    coverage_eb_ball: f64,
    n: usize,
    replicates: usize,
    mean_lambda_f: f64,
}

#[derive(Serialize)]
struct CompareSummary {
    results: Vec<CompareRow>,
    report: Theorem4Report,
    config: Theorem4Config,
}

pub fn compare_cmd(config: &Path, ball: &BallArgs, out: &Output) -> Result<(), CliError> {
    let file: CompareFile = read_json(config)?;
    let mut cfg = Theorem4Config::new(file.generator, file.n, file.replicates);
    if let Some(v) = file.beta {
        cfg.beta = v;
    }
    if let Some(v) = file.q_choices {
        cfg.q_choices = v;
    }
    if let Some(v) = file.sigma {
        cfg.noise = NoiseModel::new(v)?;
    }
    if let Some(v) = file.seed {
        cfg.seed = v;
    }
    if let Some(v) = file.design_convention {
        cfg.design = v;
    }
    if let Some(v) = file.independent_samples {
        cfg.independent_samples = v;
    }
    if let Some(v) = file.q_grid {
        cfg.q_grid = v;
    }
    cfg.radius = ball.spec();
    cfg.l = ball.l;
    let report = theorem4_experiment(&cfg)?;
    let results = report
        .rows
        .iter()
        .map(|r| CompareRow {
            q: r.q,
            coverage_gcv_ball: r.coverage_gcv_ball,
            coverage_eb_ball: report.coverage_eb_ball,
            n: report.n,
            replicates: report.replicates,
            mean_lambda_f: r.mean_lambda_f,
        })
        .collect();
    emit(
        out,
        "report.json",
        "compare",
        &CompareSummary {
            results,
            report,
            config: cfg,
        },
    )
}

/// Keys beyond these (say, those of a study config) are ignored.
#[derive(Deserialize)]
pub struct OracleFile {
    generator: Generator,
    n: usize,
    #[serde(default = "default_sigma")]
    sigma: f64,
    q_grid: Option<Vec<f64>>,
    design_convention: Option<DesignConvention>,
}

fn default_sigma() -> f64 {
    NoiseModel::default().sigma
}

#[derive(Serialize)]
struct OracleRow {
    q: f64,
    lambda_closed_form: f64,
    lambda_numeric: f64,
}

#[derive(Serialize)]
struct OracleSummary {
    generator: String,
    n: usize,
    sigma: f64,
    basis_degree: f64,
    orders: Vec<OracleRow>,
    path: OraclePath,
}

pub fn oracle_cmd(config: &Path, grid_args: &QArgs, out: &Output) -> Result<(), CliError> {
    let file: OracleFile = read_json(config)?;
    NoiseModel::new(file.sigma)?;
    let grid = DesignGrid::new(
        file.n,
        file.design_convention.unwrap_or(DesignConvention::Right),
    )?;
    let qs = match file.q_grid {
        Some(v) => QGrid::new(v)?,
        None => grid_args.q_grid()?,
    };
    let s2 = file.sigma * file.sigma;
    let orders = qs
        .values()
        .iter()
        .map(|&q| {
            let sp = file.generator.spectrum(&grid, q)?;
            Ok(OracleRow {
                q,
                lambda_closed_form: oracle_lambda(&sp, s2, q, OracleMethod::ClosedForm)?.lambda_q,
                lambda_numeric: oracle_lambda(&sp, s2, q, OracleMethod::NumericRoot)?.lambda_q,
            })
        })
        .collect::<Result<Vec<_>, ebspline::Error>>()?;
    let degree = file
        .generator
        .beta_nominal()
        .unwrap_or(qs.max())
        .floor()
        .max(1.0);
    let path = oracle_path(&file.generator.spectrum(&grid, degree)?, s2, qs.values())?;
    let summary = OracleSummary {
        generator: file.generator.name(),
        n: file.n,
        sigma: file.sigma,
        basis_degree: degree,
        orders,
        path,
    };
    emit(out, "oracle.json", "oracle", &summary)
}

pub fn kappa_cmd(q: f64, m_max: u32, l_max: u32, out: &Output) -> Result<(), CliError> {
    if l_max == 0 {
        return Err(CliError::Input("--l-max must be at least 1".into()));
    }
    emit(
        out,
        "kappa.json",
        "kappa",
        &KappaTable::new(q, m_max, l_max)?,
    )
}
