//! Wires parsed arguments to the library: load inputs, run the requested
//! computation, write the report files.

use std::fs;
use std::path::{Path, PathBuf};

use mloglin_core::{fit_mle, mediation_table, simulate, standard_errors};

use crate::error::CliError;
use crate::formats::{read_counts_csv, write_counts_csv, SpecFile};
use crate::report;
use crate::verify;

#[derive(Debug, Clone)]
pub enum Command {
    Fit {
        data: PathBuf,
        spec: PathBuf,
        out: PathBuf,
    },
    Mediate {
        data: PathBuf,
        spec: PathBuf,
        out: PathBuf,
        transitions: String,
        bootstrap: usize,
    },
    Simulate {
        spec: PathBuf,
        n: u64,
        out: Option<PathBuf>,
    },
    Verify {
        trials: usize,
        tol: Option<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
}

/// `adjacent`, `baseline`, or explicit `a-b` pairs separated by commas.
pub fn parse_transitions(s: &str, levels: usize) -> Result<Vec<(usize, usize)>, CliError> {
    match s {
        "adjacent" => Ok((1..levels).map(|i| (i - 1, i)).collect()),
        "baseline" => Ok((1..levels).map(|i| (0, i)).collect()),
        _ => s
            .split(',')
            .map(|pair| {
                let (a, b) = pair.split_once('-').ok_or_else(|| {
                    CliError::input(format!(
                        "transition `{pair}` is not `from-to` (or use `adjacent`/`baseline`)"
                    ))
                })?;
                let from: usize = a
                    .trim()
                    .parse()
                    .map_err(|_| CliError::input(format!("bad transition level `{a}`")))?;
                let to: usize = b
                    .trim()
                    .parse()
                    .map_err(|_| CliError::input(format!("bad transition level `{b}`")))?;
                if from >= levels || to >= levels {
                    return Err(CliError::input(format!(
                        "transition `{pair}` exceeds exposure levels {levels}"
                    )));
                }
                if from == to {
                    return Err(CliError::input(format!("transition `{pair}` is degenerate")));
                }
                Ok((from, to))
            })
            .collect(),
    }
}

fn write_file(path: &Path, content: &[u8]) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn run_fit(data: &Path, spec_path: &Path, out: &Path) -> Result<(), CliError> {
    let spec_file = SpecFile::load(spec_path)?;
    let space = spec_file.space()?;
    let counts = read_counts_csv(data, &space)?;
    let model = spec_file.model_spec(&space)?;

    let fit = fit_mle(&counts, &model)?;
    let se = standard_errors(&fit, &model)?;

    fs::create_dir_all(out)?;
    let mut estimates = Vec::new();
    report::write_estimates_csv(&mut estimates, &model, &fit, &se)?;
    write_file(&out.join("estimates.csv"), &estimates)?;
    let summary = report::summary_text(&model, &fit, &se, counts.total());
    write_file(&out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn run_mediate(
    data: &Path,
    spec_path: &Path,
    out: &Path,
    transitions: &str,
    bootstrap: usize,
    seed: u64,
) -> Result<(), CliError> {
    let spec_file = SpecFile::load(spec_path)?;
    let space = spec_file.space()?;
    let counts = read_counts_csv(data, &space)?;
    let model = spec_file.model_spec(&space)?;
    let roles = spec_file.mediation_roles(&space)?;
    let transitions = parse_transitions(transitions, space.levels(roles.exposure()))?;

    let fit = fit_mle(&counts, &model)?;
    let se = standard_errors(&fit, &model)?;
    let result = mediation_table(&counts, &model, &roles, &transitions, bootstrap, seed)?;

    fs::create_dir_all(out)?;
    let mut estimates = Vec::new();
    report::write_estimates_csv(&mut estimates, &model, &fit, &se)?;
    write_file(&out.join("estimates.csv"), &estimates)?;
    let mut mediation = Vec::new();
    report::write_mediation_csv(&mut mediation, &result)?;
    write_file(&out.join("mediation.csv"), &mediation)?;
    let mut summary = report::summary_text(&model, &fit, &se, counts.total());
    summary.push('\n');
    summary.push_str(&report::mediation_text(&result));
    write_file(&out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn run_simulate(spec_path: &Path, n: u64, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let spec_file = SpecFile::load(spec_path)?;
    let space = spec_file.space()?;
    let p = spec_file.theta_table(&space)?;
    let sample = simulate(&p, n, seed)?;
    let mut buf = Vec::new();
    write_counts_csv(&mut buf, &sample)?;
    match out {
        Some(path) => write_file(path, &buf)?,
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(())
}

/// Runs the command; `Ok` carries the process exit code (verification
/// failures are reported, not returned as errors).
pub fn run(config: &RunConfig) -> Result<i32, CliError> {
    match &config.command {
        Command::Fit { data, spec, out } => {
            run_fit(data, spec, out)?;
            Ok(0)
        }
        Command::Mediate {
            data,
            spec,
            out,
            transitions,
            bootstrap,
        } => {
            run_mediate(data, spec, out, transitions, *bootstrap, config.seed)?;
            Ok(0)
        }
        Command::Simulate { spec, n, out } => {
            run_simulate(spec, *n, config.seed, out.as_deref())?;
            Ok(0)
        }
        Command::Verify { trials, tol } => {
            let report = verify::run_verify(config.seed, *trials, *tol)?;
            print!("{}", report.render());
            Ok(if report.all_passed() { 0 } else { 2 })
        }
    }
}
