use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tangent_stokes::study::{self, RunConfig};
use tangent_stokes::{vtk, Error};

/// Convergence studies for tangential Stokes flow on level-set surfaces.
#[derive(Parser, Debug)]
#[command(name = "tangent-stokes", version)]
struct Args {
    /// key = value file with the same keys as the flags; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// torus | sphere | dziuk
    #[arg(long)]
    surface: Option<String>,
    /// Torus major radius.
    #[arg(long = "R")]
    major: Option<f64>,
    /// Torus minor radius or sphere radius.
    #[arg(long = "r")]
    minor: Option<f64>,
    /// torus-manufactured | dziuk-diffusion | sphere-smoke
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    ku: Option<usize>,
    #[arg(long)]
    kp: Option<usize>,
    #[arg(long)]
    kgeo: Option<usize>,
    /// Level range, e.g. 1..4
    #[arg(long)]
    levels: Option<String>,
    /// bochner | diffusion
    #[arg(long)]
    operator: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// direct | gmres | block-gmres
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    /// CSV output; a markdown copy is written next to it with extension `.md`.
    #[arg(long = "out-table")]
    out_table: Option<PathBuf>,
    /// VTK output of the finest level.
    #[arg(long = "out-vtk")]
    out_vtk: Option<PathBuf>,
}

impl Args {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut push = |k: &'static str, val: Option<String>| {
            if let Some(val) = val {
                v.push((k, val));
            }
        };
        push("surface", self.surface.clone());
        push("R", self.major.map(|x| x.to_string()));
        push("r", self.minor.map(|x| x.to_string()));
        push("problem", self.problem.clone());
        push("ku", self.ku.map(|x| x.to_string()));
        push("kp", self.kp.map(|x| x.to_string()));
        push("kgeo", self.kgeo.map(|x| x.to_string()));
        push("levels", self.levels.clone());
        push("operator", self.operator.clone());
        push("alpha", self.alpha.map(|x| x.to_string()));
        push("eta", self.eta.map(|x| x.to_string()));
        push("solver", self.solver.clone());
        push("tol", self.tol.map(|x| x.to_string()));
        push("out-table", self.out_table.as_ref().map(|p| p.display().to_string()));
        push("out-vtk", self.out_vtk.as_ref().map(|p| p.display().to_string()));
        v
    }
}

fn configure(args: &Args) -> Result<RunConfig, Error> {
    let mut config = RunConfig::default();
    if let Some(path) = &args.config {
        config.apply_config_text(&std::fs::read_to_string(path)?)?;
    }
    for (k, v) in args.overrides() {
        config.set(k, &v)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(config: &RunConfig) -> Result<(), Error> {
    let last = config.levels.1;
    let result = study::run_convergence_study_with(config, |sol| {
        let o = &sol.outcome;
        eprintln!(
            "level {}: dofs {}, h {:.4}, residual {:.2e}, |mean - c0| {:.2e}, {} iterations, {:.2}s solve",
            o.level, o.dofs, o.h, o.solve.residual, o.constraint_defect, o.solve.iterations, o.solve.seconds
        );
        if o.level == last {
            if let Some(path) = &config.out_vtk {
                let title = format!("{} k_u={} k_p={} level={}", config.problem_id(), config.k_u, config.k_p, o.level);
                vtk::write_vtk(path, &sol.v_u, &sol.v_p, &sol.w, &sol.p, &title)?;
            }
        }
        Ok(())
    })?;
    let (csv, md) = if result.records.is_empty() {
        let csv = study::divergence_csv(&result.levels);
        (csv.clone(), csv)
    } else {
        (study::csv_table(&result.records), study::markdown_table(&result.records))
    };
    print!("{md}");
    if let Some(path) = &config.out_table {
        std::fs::write(path, &csv)?;
        std::fs::write(path.with_extension("md"), &md)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match configure(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.root() {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
