//! Seeded self-verification: re-derives the library's structural identities
//! on randomly generated tables and reports one PASS/FAIL line per check.
//! Output is a pure function of (seed, trials, tolerance override).

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mloglin_core::{
    bootstrap, build_prop3_spec, c1_from_loglinear, cov_block, evans_difference, fit_mle,
    information_blocks, invert_mixed, lambda_term, mean_params, mll_jacobian, natural_effects,
    p_from_theta, prop2_jacobian_check, reconstruct_from_pairwise, sd_delta,
    sd_w_logit_expansion, simulate, split_mixed, theta_from_p, Coding, FactorSpace,
    MediationRoles, MixedParam, MixedPartition, MllSpec, MllTerm, ModelSpec, Table, TermIndex,
    ThetaVector, XwyVars,
};

use crate::error::CliError;

pub struct CheckResult {
    pub name: &'static str,
    pub residual: f64,
    pub tol: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.residual < self.tol
    }
}

pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "identity verification  seed={}  trials={}",
            self.seed, self.trials
        );
        let _ = writeln!(s);
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{}  {:<32}  max residual {:.2e}  (tol {:.1e})",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.residual,
                c.tol
            );
        }
        let passed = self.checks.iter().filter(|c| c.passed()).count();
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "RESULT: {}  ({passed} of {} checks)",
            if self.all_passed() { "PASS" } else { "FAIL" },
            self.checks.len()
        );
        s
    }
}

fn sp(vars: &[(&str, usize)]) -> FactorSpace {
    FactorSpace::new(vars).expect("valid verification space")
}

fn small_spaces() -> Vec<FactorSpace> {
    vec![
        sp(&[("A", 2), ("B", 2)]),
        sp(&[("A", 3), ("B", 2)]),
        sp(&[("A", 2), ("B", 2), ("C", 2)]),
        sp(&[("A", 3), ("B", 3), ("C", 2)]),
        sp(&[("A", 4), ("B", 2), ("C", 2), ("D", 2)]),
    ]
}

fn xwy_spaces() -> Vec<FactorSpace> {
    vec![
        sp(&[("X", 2), ("W", 2), ("Y", 2)]),
        sp(&[("X", 3), ("W", 2), ("Y", 2)]),
        sp(&[("X", 2), ("W", 3), ("Y", 2)]),
        sp(&[("X", 3), ("W", 3), ("Y", 2)]),
    ]
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs()))
}

fn theta_round_trip(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    let spaces = small_spaces();
    let mut res = 0.0f64;
    for t in 0..trials {
        let space = &spaces[t % spaces.len()];
        let p = Table::random_positive(space.clone(), rng);
        for coding in [Coding::Rc, Coding::Ac] {
            let theta = theta_from_p(&p, coding)?;
            let back = p_from_theta(&theta, space)?;
            res = res.max(max_abs_diff(p.values(), back.values()));
        }
    }
    Ok(res)
}

fn uniform_theta_vanishes(_rng: &mut ChaCha8Rng, _trials: usize) -> Result<f64, CliError> {
    let mut res = 0.0f64;
    for space in small_spaces() {
        let u = Table::uniform(space);
        for coding in [Coding::Rc, Coding::Ac] {
            let theta = theta_from_p(&u, coding)?;
            res = res.max(theta.values().iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    Ok(res)
}

/// Mean parameters on V from one table, canonical parameters on U from an
/// independent one: the crossed point must invert to a table carrying both.
fn mixed_cross_inversion(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    let spaces = xwy_spaces();
    let mut res = 0.0f64;
    for t in 0..trials {
        let space = &spaces[t % spaces.len()];
        let part = MixedPartition::up_to_order(space.clone(), 1 + t % 2)?;
        let a = Table::random_positive(space.clone(), rng);
        let b = Table::random_positive(space.clone(), rng);
        let ma = split_mixed(&a, &part, Coding::Rc)?;
        let mb = split_mixed(&b, &part, Coding::Rc)?;
        let crossed = MixedParam::new(
            part.clone(),
            Coding::Rc,
            ma.mu_v().to_vec(),
            mb.theta_u().to_vec(),
        )?;
        let q = invert_mixed(&crossed)?;
        let back = split_mixed(&q, &part, Coding::Rc)?;
        res = res.max(max_abs_diff(back.mu_v(), crossed.mu_v()));
        res = res.max(max_abs_diff(back.theta_u(), crossed.theta_u()));
    }
    Ok(res)
}

fn mixed_information_orthogonality(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    let spaces = xwy_spaces();
    let mut res = 0.0f64;
    for t in 0..trials {
        let space = &spaces[t % spaces.len()];
        let part = MixedPartition::up_to_order(space.clone(), 1 + t % 2)?;
        let coding = if t % 3 == 0 { Coding::Ac } else { Coding::Rc };
        let p = Table::random_positive(space.clone(), rng);
        let blocks = information_blocks(&p, &part, coding)?;
        for i in 0..blocks.cross.rows() {
            for j in 0..blocks.cross.cols() {
                res = res.max(blocks.cross[(i, j)].abs());
            }
        }
    }
    Ok(res)
}

fn covariance_matches_derivative(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    let spaces = xwy_spaces();
    let mut res = 0.0f64;
    let h = 1e-5;
    for t in 0..trials {
        let space = &spaces[t % spaces.len()];
        let coding = if t % 2 == 0 { Coding::Rc } else { Coding::Ac };
        let p = Table::random_positive(space.clone(), rng);
        let index = TermIndex::new(space);
        let vars: &[usize] = if t % 3 == 0 { &[0, 1] } else { &[0] };
        let term = index.find_term(vars).expect("term exists");
        let tr = index.term(term);
        let block = cov_block(&p, vars, coding)?;
        let theta = theta_from_p(&p, coding)?;
        for j in 0..tr.len() {
            let mut plus = theta.values().to_vec();
            plus[tr.offset() + j] += h;
            let mut minus = theta.values().to_vec();
            minus[tr.offset() + j] -= h;
            let mu_p = mean_params(
                &p_from_theta(&ThetaVector::new(plus, coding)?, space)?,
                coding,
            )?;
            let mu_m = mean_params(
                &p_from_theta(&ThetaVector::new(minus, coding)?, space)?,
                coding,
            )?;
            for i in 0..tr.len() {
                let fd =
                    (mu_p[tr.offset() + i] - mu_m[tr.offset() + i]) / (2.0 * h);
                res = res.max((block[(i, j)] - fd).abs());
            }
        }
    }
    Ok(res)
}

fn pairwise_reconstruction(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    let spaces = [
        sp(&[("X", 2), ("W", 2), ("Y", 2)]),
        sp(&[("X", 3), ("W", 2), ("Y", 2)]),
        sp(&[("X", 2), ("W", 2), ("Y", 3)]),
    ];
    let mut res = 0.0f64;
    for t in 0..trials {
        let space = &spaces[t % spaces.len()];
        let p = Table::random_positive(space.clone(), rng);
        let theta = theta_from_p(&p, Coding::Rc)?;
        let index = TermIndex::new(space);
        let tr = index.term(index.find_term(&[0, 1, 2]).expect("three-way term"));
        let block = &theta.values()[tr.offset()..tr.offset() + tr.len()];
        let back = reconstruct_from_pairwise(
            &p.marginalize(&[0, 1])?,
            &p.marginalize(&[0, 2])?,
            &p.marginalize(&[1, 2])?,
            block,
        )?;
        res = res.max(max_abs_diff(p.values(), back.values()));
    }
    Ok(res)
}

fn margin_invariance_jacobian(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    let spaces = xwy_spaces();
    let combos: [(&[usize], &[usize]); 3] = [(&[0], &[0, 2]), (&[1], &[0, 1]), (&[0, 1], &[0, 1, 2])];
    let mut res = 0.0f64;
    for t in 0..trials {
        let space = &spaces[t % spaces.len()];
        let (effect, margin) = combos[t % combos.len()];
        let p = Table::random_positive(space.clone(), rng);
        let j = prop2_jacobian_check(&p, effect, margin, Coding::Rc)?;
        for r in 0..j.rows() {
            for c in 0..j.cols() {
                let want = if r == c { 1.0 } else { 0.0 };
                res = res.max((j[(r, c)] - want).abs());
            }
        }
    }
    Ok(res)
}

/// Adding δ to one interaction block of θ shifts every λ_{I,M} with M ⊇ I
/// by exactly δ, regardless of the margin.
fn shift_equivariance(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    use rand::Rng as _;
    let mut res = 0.0f64;
    for t in 0..trials {
        let k = 2 + t % 3;
        let space = sp(&[("X", k), ("W", 2), ("Y", 2)]);
        let index = TermIndex::new(&space);
        let tr = index.term(index.find_term(&[0]).expect("X term"));
        let vals1: Vec<f64> = (0..space.total_cells() - 1)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let mut vals2 = vals1.clone();
        // The shift reports θ¹ − θ², so subtract δ to recover it positively.
        let mut delta = vec![0.0; tr.len()];
        for (j, d) in delta.iter_mut().enumerate() {
            *d = rng.gen_range(-0.8..0.8);
            vals2[tr.offset() + j] -= *d;
        }
        let th1 = ThetaVector::new(vals1, Coding::Rc)?;
        let th2 = ThetaVector::new(vals2, Coding::Rc)?;
        let (dl, dt) = mloglin_core::example1_shift(&space, &th1, &th2, &[0])?;
        res = res.max(max_abs_diff(&dl, &dt));
        res = res.max(max_abs_diff(&dt, &delta));
    }
    Ok(res)
}

fn prop3_shapes() -> Vec<(FactorSpace, Vec<usize>)> {
    vec![
        (sp(&[("X", 2), ("W", 2), ("Y", 2)]), vec![1]),
        (sp(&[("X", 3), ("W", 2), ("Y", 2)]), vec![1]),
        (sp(&[("X", 4), ("W", 3), ("Y", 2)]), vec![1]),
        (sp(&[("X", 2), ("U", 2), ("V", 2), ("Y", 2)]), vec![1, 2]),
        (sp(&[("X", 3), ("U", 2), ("V", 3), ("Y", 2)]), vec![1, 2]),
    ]
}

fn deleted_spec_count(_rng: &mut ChaCha8Rng, _trials: usize) -> Result<f64, CliError> {
    let mut res = 0.0f64;
    for (space, meds) in prop3_shapes() {
        let response = space.num_vars() - 1;
        let spec = build_prop3_spec(&space, 0, &meds, response, None)?;
        res = res.max((spec.len() as f64 - (space.total_cells() - 1) as f64).abs());
    }
    Ok(res)
}

fn deleted_spec_jacobian(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    let shapes = prop3_shapes();
    let mut specs: Vec<(FactorSpace, MllSpec)> = Vec::new();
    for (space, meds) in shapes {
        let response = space.num_vars() - 1;
        let spec = build_prop3_spec(&space, 0, &meds, response, None)?;
        specs.push((space, spec));
    }
    let mut res = 0.0f64;
    for t in 0..trials {
        let (space, spec) = &specs[t % specs.len()];
        let p = Table::random_positive(space.clone(), rng);
        let j = mll_jacobian(&p, spec, Coding::Rc)?;
        let sigma_min = j
            .singular_values()
            .last()
            .copied()
            .unwrap_or(0.0);
        res = res.max((1e-8 - sigma_min).max(0.0));
    }
    Ok(res)
}

fn intermarginal_difference(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    let spaces = xwy_spaces();
    let combos: [(&[usize], &[usize], &[usize]); 4] = [
        (&[0], &[0, 1], &[0, 1, 2]),
        (&[0], &[0], &[0, 1]),
        (&[0, 2], &[0, 2], &[0, 1, 2]),
        (&[1], &[1, 2], &[0, 1, 2]),
    ];
    let mut res = 0.0f64;
    for t in 0..trials {
        let space = &spaces[t % spaces.len()];
        let (effect, inner, outer) = combos[t % combos.len()];
        let p = Table::random_positive(space.clone(), rng);
        let d = evans_difference(&p, effect, inner, outer)?;
        let lam_m = lambda_term(&p, &MllTerm::new(effect, outer, Coding::Rc)?)?;
        let lam_n = lambda_term(&p, &MllTerm::new(effect, inner, Coding::Rc)?)?;
        for i in 0..d.len() {
            res = res.max((d[i] - (lam_m[i] - lam_n[i])).abs());
        }
    }
    Ok(res)
}

/// θ_XY − λ_{XY;XY} computed four ways: the closed-form correction, the
/// inter-marginal difference, the direct subtraction, and (binary W) the
/// conditional double difference.
fn collapsibility_correction(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    let spaces = [
        sp(&[("X", 2), ("W", 2), ("Y", 2)]),
        sp(&[("X", 3), ("W", 3), ("Y", 2)]),
    ];
    let vars = XwyVars { x: 0, w: 1, y: 2 };
    let mut res = 0.0f64;
    for t in 0..trials {
        let space = &spaces[t % spaces.len()];
        let p = Table::random_positive(space.clone(), rng);
        let theta = theta_from_p(&p, Coding::Rc)?;
        let index = TermIndex::new(space);
        let xy = index.find_term(&[0, 2]).expect("XY term");
        let lam_xy = lambda_term(&p, &MllTerm::new(&[0, 2], &[0, 2], Coding::Rc)?)?;
        let binary_w = space.levels(1) == 2;
        for x in 1..space.levels(0) {
            let c1 = c1_from_loglinear(&theta, space, vars, x, 1)?;
            let joint = theta.values()[index.coord(xy, &[x, 1])?];
            let direct = joint - lam_xy[x - 1];
            res = res.max((c1 - direct).abs());
            if binary_w {
                let sd = sd_delta(&p, vars, x, 1)?;
                res = res.max((sd - c1).abs());
            }
        }
    }
    Ok(res)
}

/// With θ_WY = θ_XWY = 0 the XY interaction collapses over W: every route
/// to the correction must return zero.
fn conditional_independence_null(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    use rand::Rng as _;
    let spaces = [
        sp(&[("X", 2), ("W", 2), ("Y", 2)]),
        sp(&[("X", 3), ("W", 2), ("Y", 2)]),
    ];
    let vars = XwyVars { x: 0, w: 1, y: 2 };
    let mut res = 0.0f64;
    for t in 0..trials {
        let space = &spaces[t % spaces.len()];
        let index = TermIndex::new(space);
        let mut vals: Vec<f64> = (0..space.total_cells() - 1)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        for vars_t in [&[1usize, 2][..], &[0, 1, 2][..]] {
            let tr = index.term(index.find_term(vars_t).expect("term"));
            for j in 0..tr.len() {
                vals[tr.offset() + j] = 0.0;
            }
        }
        let p = p_from_theta(&ThetaVector::new(vals, Coding::Rc)?, space)?;
        let theta = theta_from_p(&p, Coding::Rc)?;
        for x in 1..space.levels(0) {
            res = res.max(sd_delta(&p, vars, x, 1)?.abs());
            res = res.max(c1_from_loglinear(&theta, space, vars, x, 1)?.abs());
        }
        for v in evans_difference(&p, &[0, 2], &[0, 2], &[0, 1, 2])? {
            res = res.max(v.abs());
        }
    }
    Ok(res)
}

fn logit_expansion(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    let spaces = [
        sp(&[("X", 2), ("W", 3), ("Y", 2)]),
        sp(&[("X", 3), ("W", 2), ("Y", 2)]),
    ];
    let vars = XwyVars { x: 0, w: 1, y: 2 };
    let mut res = 0.0f64;
    for t in 0..trials {
        let space = &spaces[t % spaces.len()];
        let p = Table::random_positive(space.clone(), rng);
        for x in 0..space.levels(0) {
            for y in 0..2 {
                for w in 1..space.levels(1) {
                    let lhs = sd_w_logit_expansion(&p, vars, w, x, y)?;
                    let cond = p.condition(&[(0, x), (2, y)])?;
                    let direct = (cond.values()[w] / cond.values()[0]).ln();
                    res = res.max((lhs - direct).abs());
                }
            }
        }
    }
    Ok(res)
}

fn independence_closed_form(_rng: &mut ChaCha8Rng, _trials: usize) -> Result<f64, CliError> {
    let space = sp(&[("X", 2), ("Y", 2)]);
    let counts = Table::counts(space.clone(), vec![30.0, 10.0, 10.0, 30.0])?;
    let all: Vec<MllTerm> = vec![
        MllTerm::new(&[0], &[0, 1], Coding::Rc)?,
        MllTerm::new(&[1], &[0, 1], Coding::Rc)?,
        MllTerm::new(&[0, 1], &[0, 1], Coding::Rc)?,
    ];
    let mll = MllSpec::new(space, all, vec![])?;
    let spec = ModelSpec::new(mll, vec![2], vec![])?;
    let fit = fit_mle(&counts, &spec)?;
    let g2 = 4.0 * (30.0 * 1.5f64.ln() + 10.0 * 0.5f64.ln());
    let mut res = (fit.deviance - g2).abs();
    res = res.max((fit.dof as f64) - 1.0);
    for &m in fit.p_hat.values() {
        res = res.max((80.0 * m - 20.0).abs());
    }
    Ok(res)
}

fn mediation_additivity(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, CliError> {
    let shapes: Vec<(FactorSpace, Vec<usize>)> = vec![
        (sp(&[("X", 2), ("W", 2), ("Y", 2)]), vec![1]),
        (sp(&[("X", 3), ("W", 2), ("Y", 2)]), vec![1]),
        (sp(&[("X", 2), ("U", 2), ("V", 2), ("Y", 2)]), vec![1, 2]),
    ];
    let mut res = 0.0f64;
    for t in 0..trials {
        let (space, meds) = &shapes[t % shapes.len()];
        let response = space.num_vars() - 1;
        let roles = MediationRoles::new(0, meds, response);
        let p = Table::random_positive(space.clone(), rng);
        let m = p.marginalize(&[0, response])?;
        for x1 in 1..space.levels(0) {
            let e = natural_effects(&p, &roles, 0, x1)?;
            res = res.max((e.te - (e.nde + e.nie)).abs());
            let risk = |x: usize| m.value(&[x, 1]) / (m.value(&[x, 0]) + m.value(&[x, 1]));
            res = res.max((e.te - (risk(x1) - risk(0))).abs());
        }
    }
    Ok(res)
}

fn resampling_determinism(_rng: &mut ChaCha8Rng, _trials: usize) -> Result<f64, CliError> {
    let space = sp(&[("X", 2), ("Y", 2)]);
    let counts = Table::counts(space.clone(), vec![25.0, 15.0, 20.0, 40.0])?;
    let p = counts.normalize()?;
    let s1 = simulate(&p, 1000, 7)?;
    let s2 = simulate(&p, 1000, 7)?;
    let mut res = max_abs_diff(s1.values(), s2.values());

    let all: Vec<MllTerm> = vec![
        MllTerm::new(&[0], &[0, 1], Coding::Rc)?,
        MllTerm::new(&[1], &[0, 1], Coding::Rc)?,
        MllTerm::new(&[0, 1], &[0, 1], Coding::Rc)?,
    ];
    let spec = ModelSpec::saturated(MllSpec::new(space, all, vec![])?);
    let b1 = bootstrap(&counts, &spec, |f| f.eta_hat[2], 10, 11)?;
    let b2 = bootstrap(&counts, &spec, |f| f.eta_hat[2], 10, 11)?;
    res = res.max(max_abs_diff(&b1.estimates, &b2.estimates));
    Ok(res)
}

type CheckFn = fn(&mut ChaCha8Rng, usize) -> Result<f64, CliError>;

fn checks() -> Vec<(&'static str, f64, CheckFn)> {
    vec![
        ("theta-round-trip", 1e-10, theta_round_trip),
        ("uniform-theta-vanishes", 1e-12, uniform_theta_vanishes),
        ("mixed-cross-inversion", 1e-10, mixed_cross_inversion),
        ("mixed-information-orthogonality", 1e-8, mixed_information_orthogonality),
        ("covariance-matches-derivative", 1e-6, covariance_matches_derivative),
        ("pairwise-reconstruction", 1e-9, pairwise_reconstruction),
        ("margin-invariance-jacobian", 1e-6, margin_invariance_jacobian),
        ("shift-equivariance", 1e-10, shift_equivariance),
        ("deleted-spec-count", 0.5, deleted_spec_count),
        ("deleted-spec-jacobian", 1e-12, deleted_spec_jacobian),
        ("intermarginal-difference", 1e-10, intermarginal_difference),
        ("collapsibility-correction", 1e-10, collapsibility_correction),
        ("conditional-independence-null", 1e-12, conditional_independence_null),
        ("logit-expansion", 1e-10, logit_expansion),
        ("independence-closed-form", 1e-8, independence_closed_form),
        ("mediation-additivity", 1e-12, mediation_additivity),
        ("resampling-determinism", 1e-15, resampling_determinism),
    ]
}

/// Runs every check on its own seeded stream; `tol` overrides all the
/// per-check tolerances when given.
pub fn run_verify(seed: u64, trials: usize, tol: Option<f64>) -> Result<VerifyReport, CliError> {
    if trials == 0 {
        return Err(CliError::input("trials must be positive".to_string()));
    }
    let mut results = Vec::new();
    for (i, (name, default_tol, check)) in checks().into_iter().enumerate() {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_add((i as u64).wrapping_mul(0x9E3779B97F4A7C15)));
        let residual = check(&mut rng, trials).unwrap_or(f64::INFINITY);
        results.push(CheckResult {
            name,
            residual,
            tol: tol.unwrap_or(default_tol),
        });
    }
    Ok(VerifyReport {
        seed,
        trials,
        checks: results,
    })
}
