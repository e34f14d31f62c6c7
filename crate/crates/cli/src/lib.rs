//! Batch front-end: convergence studies, stability-constant estimates and mesh export.

pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use surface_split::analysis::{
    self, ConvergenceReport, CoercivityReport, InfSupReport, LevelOutcome, Norm, RitzDecayEntry,
    StudyOptions,
};
use surface_split::{
    delta_problem_fields, smooth_problem_fields, Error, ProblemSpec, QuadratureRule, SolveOptions,
    SolverKind, SurfaceMesh,
};

use table::{Cell, Precision, Table};

pub const MAX_LEVEL: u32 = 8;
pub const MAX_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Configuration(_) | Error::Parse(_) => {
                CliError::Config(e.to_string())
            }
            Error::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    Smooth,
    Delta,
}

impl Problem {
    pub fn spec(self) -> ProblemSpec {
        match self {
            Problem::Smooth => smooth_problem_fields(),
            Problem::Delta => delta_problem_fields(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Direct,
    Iterative,
}

impl From<Solver> for SolverKind {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Direct => SolverKind::Direct,
            Solver::Iterative => SolverKind::Iterative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Convergence,
    Infsup,
    Coercivity,
    Ritz,
    Mesh,
}

impl Command {
    /// Level range used when neither bound is given.
    pub fn default_levels(self) -> (u32, u32) {
        match self {
            Command::Convergence => (0, 6),
            Command::Infsup => (0, 3),
            Command::Coercivity => (1, 3),
            Command::Ritz => (1, 5),
            Command::Mesh => (0, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: Problem,
    pub min_level: u32,
    pub max_level: u32,
    pub quad_assembly: u32,
    pub quad_error: u32,
    pub solver: Solver,
    pub tol: f64,
    pub lambda: Option<f64>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        let (min_level, max_level) = command.default_levels();
        Self {
            command,
            problem: Problem::Smooth,
            min_level,
            max_level,
            quad_assembly: 2,
            quad_error: 4,
            solver: Solver::Direct,
            tol: 1e-10,
            lambda: None,
            format: Format::Csv,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.min_level > self.max_level || self.max_level > MAX_LEVEL {
            return Err(CliError::Config(format!(
                "levels must satisfy 0 <= min-level <= max-level <= {MAX_LEVEL}, got {}..{}",
                self.min_level, self.max_level
            )));
        }
        if !(self.tol > 0.0 && self.tol <= MAX_TOL) {
            return Err(CliError::Config(format!(
                "tol must lie in (0, {MAX_TOL:e}], got {:e}",
                self.tol
            )));
        }
        if let Some(lambda) = self.lambda {
            if self.command != Command::Infsup {
                return Err(CliError::Config("--lambda applies to infsup only".into()));
            }
            if !lambda.is_finite() {
                return Err(CliError::Config(format!("lambda must be finite, got {lambda}")));
            }
        }
        if self.command == Command::Mesh && self.out.is_none() {
            return Err(CliError::Config("mesh needs --out".into()));
        }
        self.quadratures()?;
        Ok(())
    }

    fn quadratures(&self) -> Result<(QuadratureRule, QuadratureRule), CliError> {
        Ok((
            QuadratureRule::by_degree(self.quad_assembly)?,
            QuadratureRule::by_degree(self.quad_error)?,
        ))
    }

    pub fn study_options(&self) -> Result<StudyOptions, CliError> {
        let (quad_assembly, quad_error) = self.quadratures()?;
        Ok(StudyOptions {
            quad_assembly,
            quad_error,
            solve: SolveOptions {
                tol: self.tol,
                solver: self.solver.into(),
                max_iterations: None,
            },
        })
    }

    fn meshes(&self) -> Result<Vec<SurfaceMesh>, CliError> {
        let mut mesh = SurfaceMesh::octahedron_sphere(self.min_level)?;
        let mut out = Vec::new();
        while mesh.level() < self.max_level {
            let next = mesh.refine();
            out.push(mesh);
            mesh = next;
        }
        out.push(mesh);
        Ok(out)
    }
}

#[derive(Debug, Parser)]
#[command(name = "surface-split", version, about = "Split fourth-order problems on the sphere")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Solve on each level and report errors and orders of convergence.
    Convergence(CliArgs),
    /// Discrete inf-sup constant of the H1-type bilinear form.
    Infsup(CliArgs),
    /// Discrete coercivity constant of the coupled problem.
    Coercivity(CliArgs),
    /// Decay of the Ritz projection error over a set of smooth fields.
    Ritz(CliArgs),
    /// Write the sphere triangulation at --max-level as an OFF file.
    Mesh(CliArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CliArgs {
    #[arg(long, value_enum, default_value = "smooth")]
    pub problem: Problem,
    #[arg(long)]
    pub min_level: Option<u32>,
    #[arg(long)]
    pub max_level: Option<u32>,
    /// Degree of the quadrature rule used in assembly (1, 2, 4 or 5).
    #[arg(long, default_value_t = 2)]
    pub quad_assembly: u32,
    /// Degree of the quadrature rule used for error norms (4 or 5).
    #[arg(long, default_value_t = 4)]
    pub quad_error: u32,
    #[arg(long, value_enum, default_value = "direct")]
    pub solver: Solver,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Zeroth-order weight of the bilinear form (infsup only; default 1).
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Cli {
    pub fn into_config(self) -> RunConfig {
        let (command, args) = match self.command {
            CliCommand::Convergence(a) => (Command::Convergence, a),
            CliCommand::Infsup(a) => (Command::Infsup, a),
            CliCommand::Coercivity(a) => (Command::Coercivity, a),
            CliCommand::Ritz(a) => (Command::Ritz, a),
            CliCommand::Mesh(a) => (Command::Mesh, a),
        };
        let (min_default, max_default) = command.default_levels();
        RunConfig {
            command,
            problem: args.problem,
            min_level: args.min_level.unwrap_or(min_default),
            max_level: args.max_level.unwrap_or(max_default),
            quad_assembly: args.quad_assembly,
            quad_error: args.quad_error,
            solver: args.solver,
            tol: args.tol,
            lambda: args.lambda,
            format: args.format,
            out: args.out,
        }
    }
}

/// A command result together with its rendering.
#[derive(Debug)]
pub struct Output<R> {
    pub report: R,
    /// The table in the requested format, or the summary for `mesh`.
    pub rendered: String,
    /// Levels whose solve failed; their rows are marked FAILED.
    pub failed_levels: Vec<u32>,
}

impl<R> Output<R> {
    pub fn exit_code(&self) -> i32 {
        if self.failed_levels.is_empty() {
            0
        } else {
            3
        }
    }
}

/// Companion path holding the full-precision values: `dir/name.csv` becomes
/// `dir/name.raw.csv`.
pub fn raw_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.raw.csv"))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Renders in the configured format and writes the table plus its raw companion
/// when an output path is set.
fn emit(config: &RunConfig, csv: &Table, markdown: impl FnOnce() -> String) -> Result<String, CliError> {
    let rendered = match config.format {
        Format::Csv => csv.to_csv(Precision::Table),
        Format::Md => markdown(),
    };
    if let Some(out) = &config.out {
        write(out, &rendered)?;
        write(&raw_path(out), &csv.to_csv(Precision::Raw))?;
    }
    Ok(rendered)
}

fn check(config: &RunConfig, command: Command) -> Result<(), CliError> {
    if config.command != command {
        return Err(CliError::Config(format!(
            "configuration is for {:?}, not {command:?}",
            config.command
        )));
    }
    config.validate()
}

pub const CONVERGENCE_HEADER: [&str; 13] = [
    "level", "h_nominal", "h_measured", "dofs", "err_l2_u", "eoc_l2_u", "err_h1_u", "eoc_h1_u",
    "err_l2_w", "eoc_l2_w", "err_h1_w", "eoc_h1_w", "residual",
];

pub fn convergence_table(report: &ConvergenceReport) -> Table {
    let eocs: Vec<_> = Norm::ALL.iter().map(|&n| report.eoc(n)).collect();
    let mut table = Table::new(&CONVERGENCE_HEADER);
    for (k, outcome) in report.outcomes.iter().enumerate() {
        let info = outcome.info();
        let mut row = vec![
            Cell::Int(info.level.into()),
            Cell::Real(info.nominal_h),
            Cell::Real(info.measured_h),
            Cell::Int(info.dofs as u64),
        ];
        match outcome {
            LevelOutcome::Solved(r) => {
                for (n, &norm) in Norm::ALL.iter().enumerate() {
                    row.push(r.error(norm).into());
                    row.push(eocs[n][k].into());
                }
                row.push(Cell::Real(r.residual));
            }
            LevelOutcome::Failed { error, .. } => {
                for _ in Norm::ALL {
                    row.push(Cell::Text("FAILED".into()));
                    row.push(Cell::Empty);
                }
                let residual = match error {
                    Error::Solver { residual, .. } => *residual,
                    _ => None,
                };
                row.push(residual.into());
            }
        }
        table.push(row);
    }
    table
}

/// One `h | E_L2 | EOC | E_H1 | EOC` table per unknown, the H1 columns dropped when
/// no level has them.
pub fn convergence_markdown(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    for (label, l2, h1) in [("u - u_h", Norm::L2U, Norm::H1U), ("w - w_h", Norm::L2W, Norm::H1W)] {
        let with_h1 = report
            .outcomes
            .iter()
            .any(|o| o.record().and_then(|r| r.error(h1)).is_some());
        let mut norms = vec![(l2, "E_L2")];
        if with_h1 {
            norms.push((h1, "E_H1"));
        }
        let mut headers = vec!["h"];
        for (_, name) in &norms {
            headers.extend([*name, "EOC"]);
        }
        let mut table = Table::new(&headers);
        let eocs: Vec<_> = norms.iter().map(|(n, _)| report.eoc(*n)).collect();
        for (k, outcome) in report.outcomes.iter().enumerate() {
            let mut row = vec![Cell::Real(outcome.info().nominal_h)];
            for (i, (norm, _)) in norms.iter().enumerate() {
                match outcome.record() {
                    Some(r) => row.extend([r.error(*norm).into(), eocs[i][k].into()]),
                    None => row.extend([Cell::Text("FAILED".into()), Cell::Empty]),
                }
            }
            table.push(row);
        }
        out.push_str(&format!("### {}: {label}\n\n{}\n", report.problem, table.to_markdown()));
    }
    out
}

pub fn cmd_convergence(config: &RunConfig) -> Result<Output<ConvergenceReport>, CliError> {
    check(config, Command::Convergence)?;
    let spec = config.problem.spec();
    let report = analysis::convergence_study(
        &spec,
        config.min_level,
        config.max_level,
        &config.study_options()?,
    )?;
    let failed_levels = report
        .outcomes
        .iter()
        .filter(|o| o.record().is_none())
        .map(|o| o.info().level)
        .collect();
    let rendered = emit(config, &convergence_table(&report), || convergence_markdown(&report))?;
    Ok(Output {
        report,
        rendered,
        failed_levels,
    })
}

fn titled(title: &str, table: &Table) -> String {
    format!("### {title}\n\n{}", table.to_markdown())
}

pub fn cmd_infsup(config: &RunConfig) -> Result<Output<Vec<InfSupReport>>, CliError> {
    check(config, Command::Infsup)?;
    let lambda = config.lambda.unwrap_or(1.0);
    let meshes = config.meshes()?;
    let reports = meshes
        .iter()
        .map(|m| analysis::discrete_inf_sup(m, lambda))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&["level", "h_nominal", "lambda", "beta"]);
    for (m, r) in meshes.iter().zip(&reports) {
        table.push(vec![
            Cell::Int(r.level.into()),
            Cell::Real(m.nominal_h()),
            Cell::Real(r.lambda),
            Cell::Real(r.beta),
        ]);
    }
    let rendered = emit(config, &table, || titled("discrete inf-sup constant", &table))?;
    Ok(Output {
        report: reports,
        rendered,
        failed_levels: Vec::new(),
    })
}

pub fn cmd_coercivity(config: &RunConfig) -> Result<Output<Vec<CoercivityReport>>, CliError> {
    check(config, Command::Coercivity)?;
    let spec = config.problem.spec();
    let (quad, _) = config.quadratures()?;
    let meshes = config.meshes()?;
    let reports = meshes
        .iter()
        .map(|m| analysis::discrete_coercivity_constant(&spec, m, &quad))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&["level", "h_nominal", "mu_min"]);
    for (m, r) in meshes.iter().zip(&reports) {
        table.push(vec![
            Cell::Int(r.level.into()),
            Cell::Real(m.nominal_h()),
            Cell::Real(r.mu_min),
        ]);
    }
    let title = format!("discrete coercivity constant ({})", spec.name);
    let rendered = emit(config, &table, || titled(&title, &table))?;
    Ok(Output {
        report: reports,
        rendered,
        failed_levels: Vec::new(),
    })
}

pub fn cmd_ritz(config: &RunConfig) -> Result<Output<Vec<RitzDecayEntry>>, CliError> {
    check(config, Command::Ritz)?;
    let (quad_assembly, quad_error) = config.quadratures()?;
    let meshes = config.meshes()?;
    let entries = analysis::ritz_decay(
        &meshes,
        &analysis::ritz_sample_fields(),
        &quad_assembly,
        &quad_error,
    )?;
    let ratios: Vec<f64> = entries.iter().map(|e| e.max_ratio).collect();
    let hs: Vec<f64> = meshes.iter().map(SurfaceMesh::nominal_h).collect();
    let eocs = analysis::eoc(&ratios, &hs)?;
    let mut table = Table::new(&["level", "h_nominal", "max_ratio", "eoc"]);
    for ((e, h), rate) in entries.iter().zip(&hs).zip(&eocs) {
        table.push(vec![
            Cell::Int(e.level.into()),
            Cell::Real(*h),
            Cell::Real(e.max_ratio),
            (*rate).into(),
        ]);
    }
    let rendered = emit(config, &table, || titled("Ritz projection error ratio", &table))?;
    Ok(Output {
        report: entries,
        rendered,
        failed_levels: Vec::new(),
    })
}

pub fn cmd_mesh(config: &RunConfig) -> Result<Output<SurfaceMesh>, CliError> {
    check(config, Command::Mesh)?;
    let mesh = SurfaceMesh::octahedron_sphere(config.max_level)?;
    let out = config.out.as_deref().expect("validated");
    write(out, &mesh.to_off_string())?;
    let rendered = format!(
        "level {}: V={} E={} F={} h_nominal={:.5e} h_measured={:.5e}\n",
        mesh.level(),
        mesh.num_vertices(),
        mesh.num_edges(),
        mesh.num_triangles(),
        mesh.nominal_h(),
        mesh.measured_h()
    );
    Ok(Output {
        report: mesh,
        rendered,
        failed_levels: Vec::new(),
    })
}

/// What a command run prints and how the process should exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
}

fn finish<R>(config: &RunConfig, output: Output<R>) -> RunOutcome {
    let stdout = match (&config.out, config.command) {
        (Some(out), c) if c != Command::Mesh => format!("wrote {}\n", out.display()),
        _ => output.rendered.clone(),
    };
    let stderr = output
        .failed_levels
        .iter()
        .map(|l| format!("level {l} failed\n"))
        .collect();
    RunOutcome {
        stdout,
        stderr,
        exit_code: output.exit_code(),
    }
}

pub fn run(config: &RunConfig) -> RunOutcome {
    let result = match config.command {
        Command::Convergence => cmd_convergence(config).map(|o| {
            let failures: String = o
                .report
                .outcomes
                .iter()
                .filter_map(|out| match out {
                    LevelOutcome::Failed { info, error } => {
                        Some(format!("level {}: {error}\n", info.level))
                    }
                    _ => None,
                })
                .collect();
            let mut outcome = finish(config, o);
            outcome.stderr = failures;
            outcome
        }),
        Command::Infsup => cmd_infsup(config).map(|o| finish(config, o)),
        Command::Coercivity => cmd_coercivity(config).map(|o| finish(config, o)),
        Command::Ritz => cmd_ritz(config).map(|o| finish(config, o)),
        Command::Mesh => cmd_mesh(config).map(|o| finish(config, o)),
    };
    result.unwrap_or_else(|e| RunOutcome {
        stdout: String::new(),
        stderr: format!("error: {e}\n"),
        exit_code: e.exit_code(),
    })
}
