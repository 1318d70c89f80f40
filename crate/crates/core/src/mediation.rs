//! Natural direct, indirect and total effects of an exposure on a binary
//! response through one or more discrete mediators, on the risk-difference
//! scale.
//!
//! The decomposition holds the mediator distribution at the baseline
//! exposure for the direct effect and moves it at the target exposure for
//! the indirect effect (total natural direct / pure natural indirect
//! split), which makes Dir + Ind = Total hold exactly by construction:
//!
//! ```text
//! NDE = Σ_w [P(Y=1|x1,w) − P(Y=1|x0,w)]·P(w|x0)
//! NIE = Σ_w P(Y=1|x1,w)·[P(w|x1) − P(w|x0)]
//! TE  = NDE + NIE = P(Y=1|x1) − P(Y=1|x0)
//! ```
//!
//! All probabilities are conditionals and margins of one joint table; the
//! usual no-unmeasured-confounding assumptions are taken as given.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fit::{fit_mle, simulate, FitResult, ModelSpec};
use crate::fmath;
use crate::tables::{FactorSpace, Table, TableKind};

/// Default number of bootstrap replicates for mediation standard errors.
pub const DEFAULT_BOOTSTRAP: usize = 500;

/// Variable roles: one exposure, one or more mediators, one binary
/// response; together they must account for every variable of the space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MediationRoles {
    exposure: usize,
    mediators: Vec<usize>,
    response: usize,
}

impl MediationRoles {
    pub fn new(exposure: usize, mediators: &[usize], response: usize) -> Self {
        let mut ms = mediators.to_vec();
        ms.sort_unstable();
        MediationRoles {
            exposure,
            mediators: ms,
            response,
        }
    }

    pub fn exposure(&self) -> usize {
        self.exposure
    }

    pub fn mediators(&self) -> &[usize] {
        &self.mediators
    }

    pub fn response(&self) -> usize {
        self.response
    }

    fn validate(&self, space: &FactorSpace) -> Result<()> {
        let d = space.num_vars();
        let mut seen = vec![false; d];
        for &v in self
            .mediators
            .iter()
            .chain([self.exposure, self.response].iter())
        {
            if v >= d || seen[v] {
                return Err(Error::Spec(
                    "exposure, mediators and response must be distinct variables".to_string(),
                ));
            }
            seen[v] = true;
        }
        if self.mediators.is_empty() || !seen.iter().all(|&s| s) {
            return Err(Error::Spec(
                "roles must cover every variable with at least one mediator".to_string(),
            ));
        }
        if space.levels(self.response) != 2 {
            return Err(Error::Spec(alloc::format!(
                "response `{}` must be binary",
                space.name(self.response)
            )));
        }
        Ok(())
    }
}

/// One exposure transition on the risk-difference scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NaturalEffects {
    pub nde: f64,
    pub nie: f64,
    pub te: f64,
}

/// All mediator level combinations (full ranges), last mediator fastest.
fn mediator_combos(space: &FactorSpace, mediators: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = mediators.iter().map(|&m| space.levels(m)).product();
    let mut out = Vec::with_capacity(total);
    for mut i in 0..total {
        let mut combo = vec![0usize; mediators.len()];
        for (j, &m) in mediators.iter().enumerate().rev() {
            let l = space.levels(m);
            combo[j] = i % l;
            i /= l;
        }
        out.push(combo);
    }
    out
}

/// Natural effects for the exposure change `x0 → x1`.
pub fn natural_effects(
    p: &Table,
    roles: &MediationRoles,
    x0: usize,
    x1: usize,
) -> Result<NaturalEffects> {
    if p.kind() != TableKind::Probabilities {
        return Err(Error::KindMismatch {
            expected: "probabilities",
        });
    }
    let space = p.space();
    roles.validate(space)?;
    for &x in [x0, x1].iter() {
        if x >= space.levels(roles.exposure) {
            return Err(Error::LevelOutOfRange {
                variable: space.name(roles.exposure).to_string(),
                level: x,
            });
        }
    }
    if x0 == x1 {
        return Err(Error::Spec("exposure transition needs two distinct levels".to_string()));
    }

    // Mediator distributions P(w|x0), P(w|x1).
    let given_x = |x: usize| -> Result<Table> {
        let cond = p.condition(&[(roles.exposure, x)])?;
        // Positions of the mediators among the non-exposure variables.
        let pos: Vec<usize> = roles
            .mediators
            .iter()
            .map(|&m| m - usize::from(m > roles.exposure))
            .collect();
        cond.marginalize(&pos)
    };
    let pw_x0 = given_x(x0)?;
    let pw_x1 = given_x(x1)?;

    let mut nde = 0.0;
    let mut nie = 0.0;
    for (i, combo) in mediator_combos(space, &roles.mediators).iter().enumerate() {
        let w0 = pw_x0.values()[i];
        let w1 = pw_x1.values()[i];
        if w0 == 0.0 && w1 == 0.0 {
            continue; // unreachable mediator state contributes nothing
        }
        let py1 = |x: usize| -> Result<f64> {
            let mut given = vec![(roles.exposure, x)];
            for (&m, &lvl) in roles.mediators.iter().zip(combo) {
                given.push((m, lvl));
            }
            Ok(p.condition(&given)?.values()[1])
        };
        let y_x1w = py1(x1)?;
        if w0 > 0.0 {
            nde += (y_x1w - py1(x0)?) * w0;
        }
        nie += y_x1w * (w1 - w0);
    }
    Ok(NaturalEffects {
        nde,
        nie,
        te: nde + nie,
    })
}

/// Mediation analysis over a list of exposure transitions: point estimates
/// from the fitted table, standard errors from a nonparametric bootstrap
/// (resample, refit, recompute; replicate r uses `seed + r`).
#[derive(Clone, Debug)]
pub struct MediationResult {
    pub transitions: Vec<(usize, usize)>,
    pub effects: Vec<NaturalEffects>,
    pub se_nde: Vec<f64>,
    pub se_nie: Vec<f64>,
    pub se_te: Vec<f64>,
    pub replicates: usize,
    pub failures: usize,
}

/// Fits `spec` to `counts`, evaluates every transition on the fitted
/// table, and attaches bootstrap standard errors (`b` replicates). More
/// than 10% failed replicates is an error.
pub fn mediation_table(
    counts: &Table,
    spec: &ModelSpec,
    roles: &MediationRoles,
    transitions: &[(usize, usize)],
    b: usize,
    seed: u64,
) -> Result<MediationResult> {
    if transitions.is_empty() {
        return Err(Error::Spec("at least one exposure transition required".to_string()));
    }
    if b == 0 {
        return Err(Error::Spec("bootstrap needs at least one replicate".to_string()));
    }
    let fit = fit_mle(counts, spec)?;
    let effects = effects_for(&fit, roles, transitions)?;

    let emp = counts.normalize()?;
    let draws = counts.total() as u64;
    let mut reps: Vec<Vec<NaturalEffects>> = Vec::with_capacity(b);
    let mut failures = 0usize;
    for r in 0..b {
        let resample = simulate(&emp, draws, seed + r as u64)?;
        let ok = fit_mle(&resample, spec)
            .and_then(|f| effects_for(&f, roles, transitions));
        match ok {
            Ok(e) => reps.push(e),
            Err(_) => failures += 1,
        }
    }
    if failures * 10 > b {
        return Err(Error::UnreliableBootstrap { failures, total: b });
    }

    let sd = |pick: &dyn Fn(&NaturalEffects) -> f64, t: usize| -> f64 {
        let vals: Vec<f64> = reps.iter().map(|e| pick(&e[t])).collect();
        if vals.len() < 2 {
            return 0.0;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let ss: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
        fmath::sqrt(ss / (n - 1.0))
    };
    let mut se_nde = Vec::new();
    let mut se_nie = Vec::new();
    let mut se_te = Vec::new();
    for t in 0..transitions.len() {
        se_nde.push(sd(&|e: &NaturalEffects| e.nde, t));
        se_nie.push(sd(&|e: &NaturalEffects| e.nie, t));
        se_te.push(sd(&|e: &NaturalEffects| e.te, t));
    }
    Ok(MediationResult {
        transitions: transitions.to_vec(),
        effects,
        se_nde,
        se_nie,
        se_te,
        replicates: b,
        failures,
    })
}

fn effects_for(
    fit: &FitResult,
    roles: &MediationRoles,
    transitions: &[(usize, usize)],
) -> Result<Vec<NaturalEffects>> {
    transitions
        .iter()
        .map(|&(x0, x1)| natural_effects(&fit.p_hat, roles, x0, x1))
        .collect()
}
