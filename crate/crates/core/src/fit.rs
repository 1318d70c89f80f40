//! Constrained maximum-likelihood fitting of marginal log-linear models
//! to multinomial counts.
//!
//! A model is an [`MllSpec`] plus homogeneous constraints on its
//! coordinate vector η: selected coordinates forced to 0 and optional
//! linear rows (e.g. adjacent interactions equal). Fitting maximizes the
//! multinomial log-likelihood over the saturated canonical θ with
//! Lagrange multipliers on h(θ) = A·η(p(θ)) = 0: Newton steps use the
//! analytic constraint Jacobian from `mll_jacobian`, an ℓ1 exact-penalty
//! merit with step-halving keeps the iterates honest, and the start is
//! the uniform table (feasible, since every constraint row is
//! homogeneous and η(uniform) = 0).

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coding::{build_g, Coding};
use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg::Matrix;
use crate::loglinear::{full_information, p_from_theta, ThetaVector};
use crate::mll::{mll_jacobian, mll_vector, MllSpec};
use crate::tables::{Table, TableKind};

/// One homogeneous linear constraint `Σ weight·η_coord = 0` among MLL
/// coordinates, e.g. `equal(a, b)` for η_a = η_b (adjacent-constant
/// interactions, linear-logit models).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    coords: Vec<usize>,
    weights: Vec<f64>,
}

impl LinearConstraint {
    pub fn new(coords: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() != weights.len() {
            return Err(Error::Spec(
                "constraint needs matching, nonempty coords and weights".to_string(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) || weights.iter().all(|&w| w == 0.0) {
            return Err(Error::Spec("constraint weights must be finite and not all zero".to_string()));
        }
        Ok(LinearConstraint { coords, weights })
    }

    /// η_a − η_b = 0.
    pub fn equal(a: usize, b: usize) -> Self {
        LinearConstraint {
            coords: vec![a, b],
            weights: vec![1.0, -1.0],
        }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A marginal log-linear model: parametrization plus the constraints that
/// define it. `dof` is the number of (independent) constraint rows.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    mll: MllSpec,
    zero: Vec<usize>,
    linear: Vec<LinearConstraint>,
    a: Matrix,
}

impl ModelSpec {
    pub fn new(mll: MllSpec, zero: Vec<usize>, linear: Vec<LinearConstraint>) -> Result<Self> {
        let n = mll.len();
        let mut sorted = zero.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != zero.len() {
            return Err(Error::Spec("repeated zero constraint".to_string()));
        }
        if let Some(&c) = zero.iter().find(|&&c| c >= n) {
            return Err(Error::Spec(alloc::format!(
                "zero constraint coordinate {c} out of range (spec has {n})"
            )));
        }
        for lc in &linear {
            if let Some(&c) = lc.coords.iter().find(|&&c| c >= n) {
                return Err(Error::Spec(alloc::format!(
                    "linear constraint coordinate {c} out of range (spec has {n})"
                )));
            }
        }
        let rows = zero.len() + linear.len();
        let mut a = Matrix::zeros(rows, n);
        for (i, &c) in zero.iter().enumerate() {
            a[(i, c)] = 1.0;
        }
        for (i, lc) in linear.iter().enumerate() {
            for (&c, &w) in lc.coords.iter().zip(&lc.weights) {
                a[(zero.len() + i, c)] += w;
            }
        }
        if rows > 0 {
            let rank = a.rank(1e-10);
            if rank < rows {
                return Err(Error::RankDeficientConstraints { rank, rows });
            }
        }
        Ok(ModelSpec {
            mll,
            zero,
            linear,
            a,
        })
    }

    /// Saturated model: no constraints.
    pub fn saturated(mll: MllSpec) -> Self {
        let n = mll.len();
        ModelSpec {
            mll,
            zero: Vec::new(),
            linear: Vec::new(),
            a: Matrix::zeros(0, n),
        }
    }

    pub fn mll(&self) -> &MllSpec {
        &self.mll
    }

    pub fn zero_constraints(&self) -> &[usize] {
        &self.zero
    }

    pub fn linear_constraints(&self) -> &[LinearConstraint] {
        &self.linear
    }

    pub fn constraint_matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn dof(&self) -> usize {
        self.a.rows()
    }
}

/// Number of independent constraint rows (the deviance degrees of freedom).
pub fn count_dof(spec: &ModelSpec) -> usize {
    spec.dof()
}

/// Iteration controls for [`fit_mle_with`].
#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub constraint_tol: f64,
    pub max_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            grad_tol: 1e-8,
            constraint_tol: 1e-10,
            max_halvings: 20,
        }
    }
}

/// Converged constrained MLE.
#[derive(Clone, Debug)]
pub struct FitResult {
    /// Fitted joint distribution (strictly positive, sums to 1).
    pub p_hat: Table,
    /// Canonical coordinates of `p_hat` (Rc).
    pub theta_hat: ThetaVector,
    /// Fitted MLL coordinate vector η(p_hat).
    pub eta_hat: Vec<f64>,
    /// Asymptotic covariance of η̂ over free coordinates; rows/columns of
    /// zero-constrained coordinates are exactly 0.
    pub covariance: Matrix,
    /// 2(ℓ_saturated − ℓ_model) with 0·log 0 = 0.
    pub deviance: f64,
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
    /// max |s + Kᵀλ| at exit.
    pub max_grad: f64,
    /// Set when some fitted cell drifted below 1e−10.
    pub boundary_warning: bool,
}

struct Eval {
    theta: Vec<f64>,
    p: Table,
    eta: Vec<f64>,
    h: Vec<f64>,
    ll: f64,
}

fn log_likelihood(counts: &[f64], p: &Table) -> f64 {
    let mut ll = 0.0;
    for (&n, &pc) in counts.iter().zip(p.values()) {
        if n > 0.0 {
            ll += n * fmath::ln(pc);
        }
    }
    ll
}

fn evaluate(theta: Vec<f64>, counts: &[f64], spec: &ModelSpec) -> Result<Eval> {
    let tv = ThetaVector::new(theta.clone(), Coding::Rc)?;
    let p = p_from_theta(&tv, spec.mll.space())?;
    let eta = mll_vector(&p, &spec.mll)?;
    let h = spec.a.matvec(&eta);
    let ll = log_likelihood(counts, &p);
    Ok(Eval {
        theta,
        p,
        eta,
        h,
        ll,
    })
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |s, x| s + x.abs())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fits `spec` to multinomial `counts` with default options.
pub fn fit_mle(counts: &Table, spec: &ModelSpec) -> Result<FitResult> {
    fit_mle_with(counts, spec, &FitOptions::default())
}

/// Aitchison–Silvey constrained maximum likelihood. Newton steps solve
///
/// ```text
/// λ = −(K F⁻¹ Kᵀ)⁻¹ (K F⁻¹ s + h),   δ = F⁻¹ (s + Kᵀ λ),
/// ```
///
/// with score s = Gᵀ(n − N p), information F = N GᵀΩG and constraint
/// Jacobian K = A·J_η. Steps are capped coordinate-wise and halved until
/// the ℓ1 exact-penalty merit ℓ − ρ‖h‖₁ improves; ρ grows with the
/// multiplier estimates and never shrinks. Convergence requires both
/// max|s + Kᵀλ| < `grad_tol` and max|h| < `constraint_tol`.
pub fn fit_mle_with(counts: &Table, spec: &ModelSpec, opts: &FitOptions) -> Result<FitResult> {
    if counts.space() != spec.mll.space() {
        return Err(Error::Spec("counts space does not match model spec".to_string()));
    }
    let total = counts.total();
    if total <= 0.0 {
        return Err(Error::DegenerateTable);
    }
    let space = spec.mll.space();
    let k = space.total_cells();
    let m = k - 1;
    let g = build_g(space, Coding::Rc);
    let n_obs = counts.values();
    let c_rows = spec.a.rows();

    const MAX_STEP: f64 = 4.0;

    let mut cur = evaluate(vec![0.0; m], n_obs, spec)?;
    let mut rho = 1.0f64;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut grad_res = f64::INFINITY;
    let mut best_kkt = f64::INFINITY;
    let mut since_best = 0usize;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        // Score and information in θ.
        let resid: Vec<f64> = n_obs
            .iter()
            .zip(cur.p.values())
            .map(|(&n, &pc)| n - total * pc)
            .collect();
        let s = g.tr_matvec(&resid);
        let f = full_information(&cur.p, Coding::Rc)?.scale(total);
        let fch = f.cholesky()?;

        let (lambda, delta, grad) = if c_rows == 0 {
            let delta = fch.solve(&s);
            (Vec::new(), delta, s.clone())
        } else {
            let j = mll_jacobian(&cur.p, &spec.mll, Coding::Rc)?;
            let kmat = spec.a.matmul(&j);
            let finv_kt = fch.solve_matrix(&kmat.transpose());
            let kfk = kmat.matmul(&finv_kt);
            let finv_s = fch.solve(&s);
            let rhs: Vec<f64> = kmat
                .matvec(&finv_s)
                .iter()
                .zip(&cur.h)
                .map(|(a, b)| -(a + b))
                .collect();
            let lambda = kfk.cholesky()?.solve(&rhs);
            let grad: Vec<f64> = s
                .iter()
                .zip(kmat.tr_matvec(&lambda))
                .map(|(a, b)| a + b)
                .collect();
            let delta = fch.solve(&grad);
            (lambda, delta, grad)
        };

        grad_res = max_abs(&grad);
        let h_res = max_abs(&cur.h);
        let kkt = if grad_res > h_res { grad_res } else { h_res };
        trace.push(kkt);
        if grad_res < opts.grad_tol && h_res < opts.constraint_tol {
            return finish(cur, counts, spec, iterations, grad_res, fch, c_rows);
        }
        if kkt < best_kkt {
            best_kkt = kkt;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 30 {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: kkt,
                    trace,
                });
            }
        }

        rho = rho.max(2.0 * max_abs(&lambda)).max(1.0);
        let merit = |e: &Eval| e.ll - rho * norm1(&e.h);

        let dmax = max_abs(&delta);
        let cap = if dmax > MAX_STEP { MAX_STEP / dmax } else { 1.0 };
        let mut alpha = cap;
        let mut accepted = None;
        // Near the solution the iteration is contractive but merit
        // differences drop below f64 resolution; take the full step there.
        let local_phase = kkt < 1e-3;
        for _ in 0..=opts.max_halvings {
            let theta: Vec<f64> = cur
                .theta
                .iter()
                .zip(&delta)
                .map(|(t, d)| t + alpha * d)
                .collect();
            if let Ok(cand) = evaluate(theta, n_obs, spec) {
                if local_phase || merit(&cand) > merit(&cur) {
                    accepted = Some(cand);
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(next) => cur = next,
            None => {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: kkt,
                    trace,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations,
        residual: grad_res,
        trace,
    })
}

fn finish(
    cur: Eval,
    counts: &Table,
    spec: &ModelSpec,
    iterations: usize,
    max_grad: f64,
    fch: crate::linalg::Cholesky,
    c_rows: usize,
) -> Result<FitResult> {
    let total = counts.total();
    // Deviance with the 0·log 0 = 0 convention.
    let mut ll_sat = 0.0;
    for &n in counts.values() {
        if n > 0.0 {
            ll_sat += n * fmath::ln(n / total);
        }
    }
    let mut deviance = 2.0 * (ll_sat - cur.ll);
    if deviance < 0.0 && deviance > -1e-9 {
        deviance = 0.0;
    }

    // V_θ = F⁻¹ − F⁻¹Kᵀ(KF⁻¹Kᵀ)⁻¹KF⁻¹;  V_η = J V_θ Jᵀ.
    let j = mll_jacobian(&cur.p, &spec.mll, Coding::Rc)?;
    let f_inv = fch.inverse();
    let v_theta = if c_rows == 0 {
        f_inv
    } else {
        let kmat = spec.a.matmul(&j);
        let finv_kt = fch.solve_matrix(&kmat.transpose());
        let kfk = kmat.matmul(&finv_kt);
        let kfk_inv = kfk.cholesky()?.inverse();
        let corr = finv_kt.matmul(&kfk_inv).matmul(&finv_kt.transpose());
        f_inv.sub(&corr)
    };
    let mut covariance = j.matmul(&v_theta).matmul(&j.transpose());
    for &c in &spec.zero {
        for i in 0..covariance.rows() {
            covariance[(c, i)] = 0.0;
            covariance[(i, c)] = 0.0;
        }
    }

    let boundary = cur.p.min_value() < 1e-10;
    Ok(FitResult {
        theta_hat: ThetaVector::new(cur.theta, Coding::Rc)?,
        p_hat: cur.p,
        eta_hat: cur.eta,
        covariance,
        deviance,
        dof: spec.dof(),
        iterations,
        converged: true,
        max_grad,
        boundary_warning: boundary,
    })
}

/// Square roots of the covariance diagonal; exactly 0 for zero-constrained
/// coordinates.
pub fn standard_errors(fit: &FitResult, spec: &ModelSpec) -> Result<Vec<f64>> {
    if !fit.converged {
        return Err(Error::Spec("standard errors require a converged fit".to_string()));
    }
    let n = spec.mll.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let v = fit.covariance[(i, i)];
        if v < -1e-8 {
            return Err(Error::Singular { condition: v });
        }
        out.push(fmath::sqrt(v.max(0.0)));
    }
    Ok(out)
}

/// Multinomial draw of size `n` from `p`; deterministic given `seed`.
pub fn simulate(p: &Table, n: u64, seed: u64) -> Result<Table> {
    if p.kind() != TableKind::Probabilities {
        return Err(Error::KindMismatch {
            expected: "probabilities",
        });
    }
    if n == 0 {
        return Err(Error::Spec("sample size must be positive".to_string()));
    }
    let k = p.space().total_cells();
    let mut cum = Vec::with_capacity(k);
    let mut acc = 0.0;
    for &v in p.values() {
        acc += v;
        cum.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0.0f64; k];
    for _ in 0..n {
        let u: f64 = rng.gen_range(0.0..1.0) * acc;
        let mut cell = k - 1;
        for (c, &edge) in cum.iter().enumerate() {
            if u < edge {
                cell = c;
                break;
            }
        }
        counts[cell] += 1.0;
    }
    Table::counts(p.space().clone(), counts)
}

/// Summary of a nonparametric bootstrap run.
#[derive(Clone, Debug)]
pub struct BootstrapResult {
    /// Statistic values from the successful replicates.
    pub estimates: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over successful replicates (0 when B = 1).
    pub se: f64,
    pub failures: usize,
    pub total: usize,
    /// Set when B = 1 leaves the standard error undefined.
    pub degenerate: bool,
}

/// Nonparametric bootstrap: resample `N` cells from the empirical
/// distribution, refit, evaluate `statistic`. Replicate r uses seed
/// `seed + r`, so results do not depend on evaluation order. More than
/// 10% failed replicates is reported as an error.
pub fn bootstrap<F>(
    counts: &Table,
    spec: &ModelSpec,
    statistic: F,
    b: usize,
    seed: u64,
) -> Result<BootstrapResult>
where
    F: Fn(&FitResult) -> f64,
{
    if b == 0 {
        return Err(Error::Spec("bootstrap needs at least one replicate".to_string()));
    }
    let emp = counts.normalize()?;
    let n = counts.total();
    let draws = n as u64;
    let mut estimates = Vec::with_capacity(b);
    let mut failures = 0usize;
    for r in 0..b {
        let resample = simulate(&emp, draws, seed + r as u64)?;
        match fit_mle(&resample, spec) {
            Ok(fit) => estimates.push(statistic(&fit)),
            Err(_) => failures += 1,
        }
    }
    if failures * 10 > b {
        return Err(Error::UnreliableBootstrap { failures, total: b });
    }
    let mn = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / mn;
    let se = if estimates.len() < 2 {
        0.0
    } else {
        let ss: f64 = estimates.iter().map(|e| (e - mean) * (e - mean)).sum();
        fmath::sqrt(ss / (mn - 1.0))
    };
    Ok(BootstrapResult {
        degenerate: estimates.len() < 2,
        estimates,
        mean,
        se,
        failures,
        total: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::TermIndex;
    use crate::mll::{build_prop3_spec, MllTerm};
    use crate::tables::FactorSpace;
    use approx::assert_abs_diff_eq;

    fn saturated_joint_spec(space: &FactorSpace) -> MllSpec {
        let all: Vec<usize> = (0..space.num_vars()).collect();
        let terms: Vec<MllTerm> = TermIndex::new(space)
            .terms()
            .map(|(_, tr)| MllTerm::new(tr.vars(), &all, Coding::Rc).unwrap())
            .collect();
        MllSpec::new(space.clone(), terms, vec![]).unwrap()
    }

    /// Indices of a term's coordinates within an MLL spec, restricted to a
    /// defining margin.
    fn coords_of(spec: &MllSpec, effect: &[usize], margin: &[usize]) -> Vec<usize> {
        let ti = spec
            .terms()
            .iter()
            .position(|t| t.effect() == effect && t.margin() == margin)
            .unwrap();
        spec.retained()
            .iter()
            .enumerate()
            .filter(|(_, &(t, _))| t == ti)
            .map(|(i, _)| i)
            .collect()
    }

    /// NCDS-like layout: X with 4 levels, binary U, V, Y.
    fn xuvy_space() -> FactorSpace {
        FactorSpace::new(&[("X", 4), ("U", 2), ("V", 2), ("Y", 2)]).unwrap()
    }

    /// Duplicated-XY parametrization with XUV zeroed and two response-side
    /// interactions removed (joint UVY and XVY).
    fn m1_spec() -> ModelSpec {
        let space = xuvy_space();
        let mll = build_prop3_spec(&space, 0, &[1, 2], 3, None).unwrap();
        let all = [0, 1, 2, 3];
        let mut zero = coords_of(&mll, &[0, 1, 2], &[0, 1, 2]); // XUV in XUV margin
        zero.extend(coords_of(&mll, &[1, 2, 3], &all)); // UVY joint
        zero.extend(coords_of(&mll, &[0, 2, 3], &all)); // XVY joint
        ModelSpec::new(mll, zero, vec![]).unwrap()
    }

    /// Single-assignment variant: same margins, no duplicate, no deletion;
    /// zeroes XUV, UVY and the four-way interaction.
    fn m2_spec() -> ModelSpec {
        let space = xuvy_space();
        let all = [0usize, 1, 2, 3];
        let xy = [0usize, 3];
        let xuv = [0usize, 1, 2];
        let index = TermIndex::new(&space);
        let mut terms = Vec::new();
        for (_, tr) in index.terms() {
            let vars = tr.vars();
            if vars.iter().all(|v| xy.contains(v)) {
                terms.push(MllTerm::new(vars, &xy, Coding::Rc).unwrap());
            } else if vars.iter().all(|v| xuv.contains(v)) {
                terms.push(MllTerm::new(vars, &xuv, Coding::Rc).unwrap());
            } else {
                terms.push(MllTerm::new(vars, &all, Coding::Rc).unwrap());
            }
        }
        let mll = MllSpec::new(space, terms, vec![]).unwrap();
        let mut zero = coords_of(&mll, &[0, 1, 2], &[0, 1, 2]);
        zero.extend(coords_of(&mll, &[1, 2, 3], &all));
        zero.extend(coords_of(&mll, &[0, 1, 2, 3], &all));
        ModelSpec::new(mll, zero, vec![]).unwrap()
    }

    #[test]
    fn dof_counts_match_the_two_ncds_models() {
        assert_eq!(count_dof(&m1_spec()), 7);
        assert_eq!(count_dof(&m2_spec()), 7);
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        let sat = ModelSpec::saturated(saturated_joint_spec(&space));
        assert_eq!(count_dof(&sat), 0);
    }

    #[test]
    fn rank_deficient_constraints_are_rejected() {
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        let mll = saturated_joint_spec(&space);
        // Zero constraint on coord 2 plus a linear row pinning the same
        // single coordinate: dependent rows.
        let err = ModelSpec::new(
            mll,
            vec![2],
            vec![LinearConstraint::new(vec![2], vec![3.0]).unwrap()],
        );
        match err {
            Err(Error::RankDeficientConstraints { rank, rows }) => {
                assert_eq!((rank, rows), (1, 2));
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn saturated_fit_reproduces_empirical_table() {
        let space = FactorSpace::new(&[("X", 2), ("W", 2), ("Y", 2)]).unwrap();
        let counts = Table::counts(
            space.clone(),
            vec![12.0, 7.0, 9.0, 21.0, 14.0, 5.0, 16.0, 8.0],
        )
        .unwrap();
        let spec = ModelSpec::saturated(saturated_joint_spec(&space));
        let fit = fit_mle(&counts, &spec).unwrap();
        let total = counts.total();
        for (ph, n) in fit.p_hat.values().iter().zip(counts.values()) {
            assert_abs_diff_eq!(*ph, n / total, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(fit.deviance, 0.0, epsilon = 1e-8);
        assert_eq!(fit.dof, 0);
        assert!(fit.max_grad < 1e-8);
    }

    #[test]
    fn independence_fit_matches_closed_form() {
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        let counts = Table::counts(space.clone(), vec![30.0, 10.0, 10.0, 30.0]).unwrap();
        let mll = saturated_joint_spec(&space);
        let spec = ModelSpec::new(mll, vec![2], vec![]).unwrap(); // zero λ_XY
        let fit = fit_mle(&counts, &spec).unwrap();
        // Outer product of the margins: every fitted count is 20.
        for &ph in fit.p_hat.values() {
            assert_abs_diff_eq!(ph * 80.0, 20.0, epsilon = 1e-8);
        }
        let g2 = 4.0 * (30.0 * 1.5f64.ln() + 10.0 * 0.5f64.ln());
        assert_abs_diff_eq!(fit.deviance, g2, epsilon = 1e-8);
        assert_eq!(fit.dof, 1);
        // The zeroed coordinate really is zero in the fitted table.
        assert_abs_diff_eq!(fit.eta_hat[2], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn fitted_table_satisfies_marginal_constraints() {
        // Constraints that live in different margins (the case plain IPF
        // cannot handle uniformly): M1 on simulated NCDS-like counts.
        let space = xuvy_space();
        let p = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            Table::random_positive(space.clone(), &mut rng)
        };
        let counts = simulate(&p, 4000, 9).unwrap();
        let spec = m1_spec();
        let fit = fit_mle(&counts, &spec).unwrap();
        let eta = mll_vector(&fit.p_hat, spec.mll()).unwrap();
        for &c in spec.zero_constraints() {
            assert!(eta[c].abs() < 1e-8, "eta[{c}] = {:e}", eta[c]);
        }
        assert!(fit.deviance >= 0.0);
        assert_eq!(fit.dof, 7);
    }

    #[test]
    fn nested_models_never_decrease_deviance() {
        let space = FactorSpace::new(&[("X", 2), ("W", 2), ("Y", 2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = Table::random_positive(space.clone(), &mut rng);
        let counts = simulate(&p, 1500, 11).unwrap();
        let mll = saturated_joint_spec(&space);
        // θ_XWY = coordinate 6; θ_WY = coordinate 5.
        let small = ModelSpec::new(mll.clone(), vec![6], vec![]).unwrap();
        let large = ModelSpec::new(mll, vec![5, 6], vec![]).unwrap();
        let d_small = fit_mle(&counts, &small).unwrap().deviance;
        let d_large = fit_mle(&counts, &large).unwrap().deviance;
        assert!(d_large >= d_small - 1e-10, "{d_large} < {d_small}");
    }

    #[test]
    fn adjacent_constant_linear_constraint_fits() {
        // Force the Ac X*Y interaction constant in x: linear-logit model.
        let space = FactorSpace::new(&[("X", 4), ("Y", 2)]).unwrap();
        let all = [0usize, 1];
        let terms: Vec<MllTerm> = TermIndex::new(&space)
            .terms()
            .map(|(_, tr)| MllTerm::new(tr.vars(), &all, Coding::Ac).unwrap())
            .collect();
        let mll = MllSpec::new(space.clone(), terms, vec![]).unwrap();
        let xy = coords_of(&mll, &[0, 1], &all);
        let linear = vec![
            LinearConstraint::equal(xy[0], xy[1]),
            LinearConstraint::equal(xy[1], xy[2]),
        ];
        let spec = ModelSpec::new(mll, vec![], linear).unwrap();
        assert_eq!(spec.dof(), 2);
        let counts = Table::counts(
            space,
            vec![55.0, 45.0, 40.0, 60.0, 32.0, 68.0, 20.0, 80.0],
        )
        .unwrap();
        let fit = fit_mle(&counts, &spec).unwrap();
        for w in fit.eta_hat[xy[0]..=xy[2]].windows(2) {
            assert_abs_diff_eq!(w[0], w[1], epsilon = 1e-8);
        }
        assert!(fit.deviance >= 0.0);
    }

    #[test]
    fn saturated_one_way_standard_error_is_classical() {
        let space = FactorSpace::new(&[("X", 2)]).unwrap();
        let counts = Table::counts(space.clone(), vec![40.0, 60.0]).unwrap();
        let spec = ModelSpec::saturated(saturated_joint_spec(&space));
        let fit = fit_mle(&counts, &spec).unwrap();
        let se = standard_errors(&fit, &spec).unwrap();
        let want = (1.0f64 / 40.0 + 1.0 / 60.0).sqrt();
        assert_abs_diff_eq!(se[0], want, epsilon = 1e-8);

        // ×4 counts → s.e. halves.
        let counts4 = Table::counts(space, vec![160.0, 240.0]).unwrap();
        let fit4 = fit_mle(&counts4, &spec).unwrap();
        let se4 = standard_errors(&fit4, &spec).unwrap();
        assert!((se4[0] / se[0] - 0.5).abs() < 0.025);
    }

    #[test]
    fn constrained_coordinate_reports_zero_se() {
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        let counts = Table::counts(space.clone(), vec![28.0, 12.0, 15.0, 25.0]).unwrap();
        let spec = ModelSpec::new(saturated_joint_spec(&space), vec![2], vec![]).unwrap();
        let fit = fit_mle(&counts, &spec).unwrap();
        let se = standard_errors(&fit, &spec).unwrap();
        assert_eq!(se[2], 0.0);
        assert!(se[0] > 0.0 && se[1] > 0.0);
    }

    #[test]
    fn simulate_is_deterministic_and_consistent() {
        let space = FactorSpace::new(&[("X", 2), ("W", 2), ("Y", 2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = Table::random_positive(space.clone(), &mut rng);

        let one = simulate(&p, 1, 4).unwrap();
        assert_abs_diff_eq!(one.total(), 1.0, epsilon = 0.0);
        assert_eq!(one.values().iter().filter(|&&v| v > 0.0).count(), 1);

        let a = simulate(&p, 500, 77).unwrap();
        let b = simulate(&p, 500, 77).unwrap();
        assert_eq!(a.values(), b.values());
        assert_abs_diff_eq!(a.total(), 500.0, epsilon = 0.0);

        let big = simulate(&p, 1_000_000, 5).unwrap();
        for (n, &pc) in big.values().iter().zip(p.values()) {
            assert!((n / 1e6 - pc).abs() < 0.005, "{} vs {}", n / 1e6, pc);
        }
    }

    #[test]
    fn deviance_calibration_under_the_null() {
        // Independence holds; deviance over replicates ≈ χ²(1).
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        let p = Table::probabilities(space.clone(), vec![0.24, 0.36, 0.16, 0.24]).unwrap();
        let spec = ModelSpec::new(saturated_joint_spec(&space), vec![2], vec![]).unwrap();
        let reps = 80;
        let mut sum = 0.0;
        for r in 0..reps {
            let counts = simulate(&p, 2000, 1000 + r).unwrap();
            sum += fit_mle(&counts, &spec).unwrap().deviance;
        }
        let mean = sum / reps as f64;
        assert!((mean - 1.0).abs() < 0.3, "mean deviance {mean}");
    }

    #[test]
    fn bootstrap_matches_asymptotics_and_is_deterministic() {
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        let counts = Table::counts(space.clone(), vec![520.0, 480.0, 430.0, 570.0]).unwrap();
        let spec = ModelSpec::saturated(saturated_joint_spec(&space));
        let fit = fit_mle(&counts, &spec).unwrap();
        let asym = standard_errors(&fit, &spec).unwrap()[2];
        let stat = |f: &FitResult| f.eta_hat[2];
        let bs = bootstrap(&counts, &spec, stat, 200, 42).unwrap();
        assert!(
            (bs.se / asym - 1.0).abs() < 0.2,
            "bootstrap {} vs asymptotic {}",
            bs.se,
            asym
        );
        assert_eq!(bs.failures, 0);

        let bs2 = bootstrap(&counts, &spec, stat, 200, 42).unwrap();
        assert_eq!(bs.estimates, bs2.estimates);

        let tiny = bootstrap(&counts, &spec, stat, 1, 7).unwrap();
        assert_eq!(tiny.se, 0.0);
        assert!(tiny.degenerate);
    }

    #[test]
    fn zero_observed_cells_are_tolerated_by_constrained_fits() {
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        let counts = Table::counts(space.clone(), vec![18.0, 0.0, 9.0, 5.0]).unwrap();
        let spec = ModelSpec::new(saturated_joint_spec(&space), vec![2], vec![]).unwrap();
        let fit = fit_mle(&counts, &spec).unwrap();
        assert!(fit.p_hat.is_strictly_positive());
        assert!(fit.deviance > 0.0);
    }
}
