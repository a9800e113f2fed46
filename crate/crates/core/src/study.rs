//! Refinement sweeps: mesh → assemble → solve → errors, and table output.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use crate::analysis::{self, ErrorNorms, ErrorRecord};
use crate::assembly::{assemble_system, AssemblyOptions, BlockSystem, OperatorConfig, OperatorKind};
use crate::error::{Error, Result};
use crate::fem::space::FESpace;
use crate::geometry::LevelSetSurface;
use crate::mesh::{build_mesh, SurfaceMesh};
use crate::problems::{Problem, DIFFUSION_ALPHA};
use crate::solver::{solve_system, SolveReport, SolverKind, SolverOptions};

pub const MAX_DEGREE: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub surface: String,
    /// Torus major radius.
    pub major: f64,
    /// Torus minor radius, or the sphere radius.
    pub minor: f64,
    /// `None` selects the surface's natural problem.
    pub problem: Option<String>,
    pub k_u: usize,
    pub k_p: usize,
    /// Geometric degree; `None` selects `max(k_u, k_p) + 1`.
    pub k_geo: Option<usize>,
    pub levels: (usize, usize),
    /// `None` selects diffusion for the Dziuk problem and Bochner otherwise.
    pub operator: Option<OperatorKind>,
    /// `None` selects the default `α` for the diffusion operator.
    pub alpha: Option<f64>,
    pub eta: f64,
    pub solver: SolverKind,
    pub tol: f64,
    pub out_table: Option<PathBuf>,
    pub out_vtk: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            surface: "torus".into(),
            major: 2.0,
            minor: 1.0,
            problem: None,
            k_u: 1,
            k_p: 1,
            k_geo: None,
            levels: (1, 3),
            operator: None,
            alpha: None,
            eta: 1.0,
            solver: SolverKind::Direct,
            tol: 1e-10,
            out_table: None,
            out_vtk: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

/// `A..B`, `A-B` or a single level.
pub fn parse_levels(s: &str) -> Result<(usize, usize)> {
    let s = s.trim();
    let (a, b) = s.split_once("..").or_else(|| s.split_once('-')).unwrap_or((s, s));
    let b = b.trim_start_matches('=');
    Ok((parse_num("levels", a)?, parse_num("levels", b)?))
}

impl RunConfig {
    /// Set one option by its flag name (without dashes).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "surface" => self.surface = value.to_string(),
            "R" => self.major = parse_num(key, value)?,
            "r" => self.minor = parse_num(key, value)?,
            "problem" => self.problem = Some(value.to_string()),
            "ku" => self.k_u = parse_num(key, value)?,
            "kp" => self.k_p = parse_num(key, value)?,
            "kgeo" => self.k_geo = Some(parse_num(key, value)?),
            "levels" => self.levels = parse_levels(value)?,
            "operator" => self.operator = Some(OperatorKind::parse(value)?),
            "alpha" => self.alpha = Some(parse_num(key, value)?),
            "eta" => self.eta = parse_num(key, value)?,
            "solver" => self.solver = SolverKind::parse(value)?,
            "tol" => self.tol = parse_num(key, value)?,
            "out-table" => self.out_table = Some(PathBuf::from(value)),
            "out-vtk" => self.out_vtk = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown option '{other}'"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn k_geo(&self) -> usize {
        self.k_geo.unwrap_or(self.k_u.max(self.k_p) + 1)
    }

    pub fn surface(&self) -> Result<LevelSetSurface> {
        LevelSetSurface::from_id(&self.surface, self.major, self.minor)
    }

    pub fn problem_id(&self) -> &str {
        match (&self.problem, self.surface.as_str()) {
            (Some(p), _) => p,
            (None, "sphere") => "sphere-smoke",
            (None, "dziuk") => "dziuk-diffusion",
            (None, _) => "torus-manufactured",
        }
    }

    pub fn operator_kind(&self) -> OperatorKind {
        match (self.operator, self.problem_id()) {
            (Some(k), _) => k,
            (None, "dziuk-diffusion") => OperatorKind::Diffusion,
            (None, _) => OperatorKind::Bochner,
        }
    }

    pub fn operator_config(&self) -> OperatorConfig {
        match self.operator_kind() {
            OperatorKind::Bochner => OperatorConfig::bochner(self.eta),
            OperatorKind::Diffusion => OperatorConfig::diffusion(self.alpha.unwrap_or(DIFFUSION_ALPHA), self.eta),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { kind: self.solver, tol: self.tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("ku", self.k_u), ("kp", self.k_p), ("kgeo", self.k_geo())] {
            if !(1..=MAX_DEGREE).contains(&k) {
                return Err(Error::Config(format!("{name} must be in 1..={MAX_DEGREE}, got {k}")));
            }
        }
        if self.levels.0 < 1 || self.levels.0 > self.levels.1 {
            return Err(Error::Config(format!(
                "levels must be nonempty and ascending from 1, got {}..{}",
                self.levels.0, self.levels.1
            )));
        }
        if self.operator_kind() == OperatorKind::Bochner && self.alpha.is_some() {
            return Err(Error::Config("alpha is only used by the diffusion operator".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        self.surface()?;
        self.operator_config().validate()
    }

    pub fn build_problem(&self) -> Result<Problem> {
        Problem::from_id(self.problem_id(), Some(self.surface()?), self.operator_config())
    }
}

/// Everything computed on one level.
#[derive(Clone, Debug)]
pub struct LevelOutcome {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub solve: SolveReport,
    /// `|mᵀp − c₀|`
    pub constraint_defect: f64,
    pub c0: f64,
    pub errors: Option<ErrorNorms>,
    /// `‖div_{Γh} w_h‖`
    pub divergence: f64,
    /// `‖P w_h‖`
    pub velocity_norm: f64,
    pub max_p_minus_r: f64,
}

/// Result of solving one level, including the spaces for export.
pub struct LevelSolution {
    pub outcome: LevelOutcome,
    pub v_u: FESpace,
    pub v_p: FESpace,
    pub system: BlockSystem,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
}

/// Assemble and solve on a given mesh.
pub fn solve_level(
    mesh: Arc<SurfaceMesh>,
    problem: &Problem,
    k_u: usize,
    k_p: usize,
    solver: &SolverOptions,
) -> Result<LevelSolution> {
    let v_u = FESpace::vector(mesh.clone(), k_u);
    let v_p = FESpace::scalar(mesh.clone(), k_p);
    let system = assemble_system(&v_u, &v_p, problem, &AssemblyOptions::default())?;
    let report = solve_system(&system, solver)?;
    let (w, p, _) = system.split(&report.solution);
    let (w, p) = (w.to_vec(), p.to_vec());
    let mean: f64 = system.m.iter().zip(&p).map(|(a, b)| a * b).sum();
    let errors = if problem.has_exact_solution() {
        Some(analysis::compute_errors(problem, &v_u, &v_p, &w, &p)?)
    } else {
        None
    };
    let (divergence, velocity_norm) = analysis::divergence_norms(&v_u, &v_p, &w, &p)?;
    let outcome = LevelOutcome {
        level: mesh.level(),
        h: mesh.h(),
        dofs: system.n_total(),
        constraint_defect: (mean - system.c0).abs(),
        c0: system.c0,
        solve: report,
        errors,
        divergence,
        velocity_norm,
        max_p_minus_r: system.max_p_minus_r,
    };
    Ok(LevelSolution { outcome, v_u, v_p, system, w, p })
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub levels: Vec<LevelOutcome>,
    /// Convergence table; empty without an exact solution.
    pub records: Vec<ErrorRecord>,
}

/// Run every level of `config`, calling `on_level` with each solved level.
pub fn run_convergence_study_with(
    config: &RunConfig,
    mut on_level: impl FnMut(&LevelSolution) -> Result<()>,
) -> Result<StudyResult> {
    config.validate()?;
    let problem = config.build_problem()?;
    let surface = problem.surface;
    let (first, last) = config.levels;
    let mut mesh = build_mesh(&surface, first, config.k_geo()).map_err(|e| e.at_level(first))?;
    let mut levels = Vec::new();
    for level in first..=last {
        if level > first {
            mesh = mesh.refine().map_err(|e| e.at_level(level))?;
        }
        let mesh_arc = Arc::new(mesh.clone());
        let sol = solve_level(mesh_arc, &problem, config.k_u, config.k_p, &config.solver_options())
            .map_err(|e| e.at_level(level))?;
        on_level(&sol).map_err(|e| e.at_level(level))?;
        levels.push(sol.outcome);
    }
    let mut records: Vec<ErrorRecord> = levels
        .iter()
        .filter_map(|l| l.errors.map(|errors| ErrorRecord { level: l.level, dofs: l.dofs, errors, rates: None }))
        .collect();
    analysis::eoc_table(&mut records);
    Ok(StudyResult { levels, records })
}

pub fn run_convergence_study(config: &RunConfig) -> Result<StudyResult> {
    run_convergence_study_with(config, |_| Ok(()))
}

pub const CSV_HEADER: &str = "level,dofs,eu_l2,rate_eu_l2,eu_h1,rate_eu_h1,ep_l2,rate_ep_l2,ep_h1,rate_ep_h1";

fn rate_cell(r: Option<f64>) -> String {
    r.map(|r| format!("{r:.2}")).unwrap_or_default()
}

pub fn csv_table(records: &[ErrorRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let e = r.errors.to_array();
        let rates = r.rates.map(ErrorNorms::to_array);
        let _ = write!(s, "{},{}", r.level, r.dofs);
        for k in 0..4 {
            let _ = write!(s, ",{:.6e},{}", e[k], rate_cell(rates.map(|a| a[k])));
        }
        s.push('\n');
    }
    s
}

pub fn markdown_table(records: &[ErrorRecord]) -> String {
    let header = ["ℓ", "dof num", "rate", "‖e_u‖₀", "rate", "‖e_u‖₁", "rate", "‖e_p‖₀", "rate", "‖e_p‖₁"];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in records {
        let e = r.errors.to_array();
        let rates = r.rates.map(ErrorNorms::to_array);
        let mut row = vec![r.level.to_string(), r.dofs.to_string()];
        for k in 0..4 {
            row.push(rates.map(|a| format!("{:.2}", a[k])).unwrap_or_else(|| "-".into()));
            row.push(format!("{:.2E}", e[k]));
        }
        rows.push(row);
    }
    let widths: Vec<usize> =
        (0..header.len()).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> =
            row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}", w = *w)).collect();
        let _ = writeln!(s, "| {} |", cells.join(" | "));
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| format!("{}:", "-".repeat(w + 1))).collect();
            let _ = writeln!(s, "|{}|", rule.join("|"));
        }
    }
    s
}

/// Table for problems without an exact solution.
pub fn divergence_csv(levels: &[LevelOutcome]) -> String {
    let mut s = String::from("level,dofs,div_l2,rate_div_l2,u_l2\n");
    for (i, l) in levels.iter().enumerate() {
        let rate = (i > 0).then(|| (levels[i - 1].divergence / l.divergence).log2());
        let _ = writeln!(s, "{},{},{:.6e},{},{:.6e}", l.level, l.dofs, l.divergence, rate_cell(rate), l.velocity_norm);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_config() {
        let mut c = RunConfig::default();
        c.apply_config_text("# study\nku = 2\nkp=3\nlevels = 1..4\noperator = diffusion\nalpha = 0.5\n").unwrap();
        assert_eq!((c.k_u, c.k_p, c.levels, c.k_geo()), (2, 3, (1, 4), 4));
        assert_eq!(c.operator_config(), OperatorConfig::diffusion(0.5, 1.0));
        assert!(c.apply_config_text("nonsense").is_err());
        assert!(c.set("colour", "red").is_err());
        assert_eq!(parse_levels("3").unwrap(), (3, 3));
        assert_eq!(parse_levels("2-5").unwrap(), (2, 5));
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.k_u = 7;
        assert!(c.validate().is_err());
        c.k_u = 1;
        c.levels = (3, 2);
        assert!(c.validate().is_err());
        c.levels = (0, 2);
        assert!(c.validate().is_err());
        c.levels = (1, 1);
        c.alpha = Some(1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_row_table_has_no_rates() {
        let mut rows = vec![ErrorRecord {
            level: 1,
            dofs: 10,
            errors: ErrorNorms { eu_l2: 0.1, eu_h1: 0.2, ep_l2: 0.3, ep_h1: 0.4 },
            rates: None,
        }];
        analysis::eoc_table(&mut rows);
        let csv = csv_table(&rows);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().nth(1).unwrap(), "1,10,1.000000e-1,,2.000000e-1,,3.000000e-1,,4.000000e-1,");
        let md = markdown_table(&rows);
        assert_eq!(md.lines().count(), 3);
    }
}
