//! Output files: machine-readable CSV at full precision (12 significant
//! digits) and aligned human-readable text at 4 decimals.

use std::fmt::Write as _;
use std::io::Write;

use mloglin_core::{FitResult, MediationResult, MllSpec, ModelSpec};

use crate::error::CliError;

/// Decodes a term-local coordinate into non-baseline levels, last effect
/// variable fastest.
fn local_levels(spec: &MllSpec, coord: usize) -> (usize, Vec<usize>) {
    let (ti, mut local) = spec.retained()[coord];
    let effect = spec.terms()[ti].effect();
    let space = spec.space();
    let mut levels = vec![0usize; effect.len()];
    for (j, &v) in effect.iter().enumerate().rev() {
        let l = space.levels(v) - 1;
        levels[j] = local % l + 1;
        local /= l;
    }
    (ti, levels)
}

fn joined_names(spec: &MllSpec, vars: &[usize]) -> String {
    vars.iter()
        .map(|&v| spec.space().name(v))
        .collect::<Vec<_>>()
        .join("*")
}

/// One estimates row per retained coordinate: effect, margin, level combo
/// (colon-separated), estimate, and standard error.
pub fn write_estimates_csv<W: Write>(
    mut w: W,
    spec: &ModelSpec,
    fit: &FitResult,
    se: &[f64],
) -> Result<(), CliError> {
    writeln!(w, "effect,margin,levels,estimate,se")?;
    let mll = spec.mll();
    for (i, &est) in fit.eta_hat.iter().enumerate() {
        let (ti, levels) = local_levels(mll, i);
        let term = &mll.terms()[ti];
        let lv = levels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(":");
        writeln!(
            w,
            "{},{},{},{:.12e},{:.12e}",
            joined_names(mll, term.effect()),
            joined_names(mll, term.margin()),
            lv,
            est,
            se[i]
        )?;
    }
    Ok(())
}

/// Fit summary plus a per-coordinate table, everything at 4 decimals.
pub fn summary_text(spec: &ModelSpec, fit: &FitResult, se: &[f64], total: f64) -> String {
    let mll = spec.mll();
    let mut s = String::new();
    let _ = writeln!(s, "model fit summary");
    let _ = writeln!(s, "-----------------");
    let _ = writeln!(s, "cells:       {}", mll.space().total_cells());
    let _ = writeln!(s, "total count: {total}");
    let _ = writeln!(s, "deviance:    {:.4}", fit.deviance);
    let _ = writeln!(s, "dof:         {}", fit.dof);
    let _ = writeln!(s, "iterations:  {}", fit.iterations);
    let _ = writeln!(s, "converged:   {}", if fit.converged { "yes" } else { "no" });
    let _ = writeln!(s, "max |grad|:  {:.3e}", fit.max_grad);
    if fit.boundary_warning {
        let _ = writeln!(s, "warning:     fitted cells near the boundary");
    }
    let _ = writeln!(s);

    let labels: Vec<String> = (0..fit.eta_hat.len()).map(|i| mll.coord_label(i)).collect();
    let width = labels.iter().map(|l| l.len()).max().unwrap_or(4).max(4);
    let _ = writeln!(s, "{:<width$}  {:>10}  {:>10}", "term", "estimate", "s.e.");
    for (i, label) in labels.iter().enumerate() {
        let _ = writeln!(
            s,
            "{label:<width$}  {:>10.4}  {:>10.4}",
            fit.eta_hat[i], se[i]
        );
    }
    s
}

fn transition_label(t: (usize, usize)) -> String {
    format!("{}->{}", t.0, t.1)
}

/// One row per exposure transition with point estimates and bootstrap
/// standard errors at full precision.
pub fn write_mediation_csv<W: Write>(mut w: W, result: &MediationResult) -> Result<(), CliError> {
    writeln!(w, "transition,nde,se_nde,nie,se_nie,te,se_te")?;
    for (i, &t) in result.transitions.iter().enumerate() {
        let e = &result.effects[i];
        writeln!(
            w,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            transition_label(t),
            e.nde,
            result.se_nde[i],
            e.nie,
            result.se_nie[i],
            e.te,
            result.se_te[i]
        )?;
    }
    Ok(())
}

/// Human-readable mediation table mirroring the CSV at 4 decimals.
pub fn mediation_text(result: &MediationResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "natural effect decomposition");
    let _ = writeln!(s, "----------------------------");
    let _ = writeln!(
        s,
        "bootstrap:   {} replicates, {} failed",
        result.replicates, result.failures
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<10}  {:>9} {:>9}  {:>9} {:>9}  {:>9} {:>9}",
        "transition", "direct", "(s.e.)", "indirect", "(s.e.)", "total", "(s.e.)"
    );
    for (i, &t) in result.transitions.iter().enumerate() {
        let e = &result.effects[i];
        let _ = writeln!(
            s,
            "{:<10}  {:>9.4} {:>9.4}  {:>9.4} {:>9.4}  {:>9.4} {:>9.4}",
            transition_label(t),
            e.nde,
            result.se_nde[i],
            e.nie,
            result.se_nie[i],
            e.te,
            result.se_te[i]
        );
    }
    s
}
