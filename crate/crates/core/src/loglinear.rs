//! The saturated canonical map and its derivatives.
//!
//! `p_from_theta` realizes `log p = Gθ − 1·logsumexp(Gθ)`; `theta_from_p`
//! inverts it as `θ = H log p`. `mean_params` gives `μ = G'p` and
//! `cov_block` the blocks `C_I = G_I' Ω(p) G_I`, `Ω(p) = diag(p) − pp'`,
//! which are symmetric positive definite for strictly positive `p` and equal
//! the Jacobian `∂μ_I/∂θ_I'`.

use alloc::vec;
use alloc::vec::Vec;

use crate::coding::{build_g, build_h, Coding, TermIndex};
use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg::Matrix;
use crate::tables::{FactorSpace, Table, TableKind};

/// Log-linear (canonical) parameters, length `k−1`, ordered by [`TermIndex`].
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaVector {
    values: Vec<f64>,
    coding: Coding,
}

impl ThetaVector {
    pub fn new(values: Vec<f64>, coding: Coding) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Spec(alloc::format!("non-finite theta entry {v}")));
        }
        Ok(ThetaVector { values, coding })
    }

    pub fn zeros(len: usize, coding: Coding) -> Self {
        ThetaVector {
            values: vec![0.0; len],
            coding,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coding(&self) -> Coding {
        self.coding
    }
}

impl core::ops::Index<usize> for ThetaVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Mean parameters `μ = G'p`, length `k−1`, ordered by [`TermIndex`].
/// Under Rc each entry is the probability of a level combination.
#[derive(Clone, Debug, PartialEq)]
pub struct MuVector {
    values: Vec<f64>,
    coding: Coding,
}

impl MuVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coding(&self) -> Coding {
        self.coding
    }
}

impl core::ops::Index<usize> for MuVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Elementwise log of a strictly positive probability table. Cells below
/// 1e−300 are rejected naming the offending cell; callers that care about
/// conditioning should additionally warn when `min_value() < 1e−12`.
pub(crate) fn checked_log(p: &Table) -> Result<Vec<f64>> {
    for (i, &v) in p.values().iter().enumerate() {
        if v < 1e-300 {
            return Err(Error::NonPositiveCell { index: i, value: v });
        }
    }
    Ok(p.values().iter().map(|&v| fmath::ln(v)).collect())
}

fn require_probabilities(p: &Table) -> Result<()> {
    if p.kind() != TableKind::Probabilities {
        return Err(Error::KindMismatch {
            expected: "probabilities",
        });
    }
    Ok(())
}

/// Strictly positive probability table with `log p = Gθ − 1·logsumexp(Gθ)`.
/// The logsumexp is max-shifted, so finite θ never overflows.
pub fn p_from_theta(theta: &ThetaVector, space: &FactorSpace) -> Result<Table> {
    let k = space.total_cells();
    if theta.values.len() != k - 1 {
        return Err(Error::Spec(alloc::format!(
            "theta has {} entries, space needs {}",
            theta.values.len(),
            k - 1
        )));
    }
    let g = build_g(space, theta.coding);
    let x = g.matvec(&theta.values);
    let m = x.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + fmath::ln(x.iter().map(|&v| fmath::exp(v - m)).sum());
    let mut p: Vec<f64> = x.iter().map(|&v| fmath::exp(v - lse)).collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Table::probabilities(space.clone(), p)
}

/// `θ = H·log p` for strictly positive probabilities.
pub fn theta_from_p(p: &Table, coding: Coding) -> Result<ThetaVector> {
    require_probabilities(p)?;
    let logp = checked_log(p)?;
    let h = build_h(p.space(), coding);
    Ok(ThetaVector {
        values: h.matvec(&logp),
        coding,
    })
}

/// Mean parameters `μ = G'p`.
pub fn mean_params(p: &Table, coding: Coding) -> Result<MuVector> {
    require_probabilities(p)?;
    let g = build_g(p.space(), coding);
    Ok(MuVector {
        values: g.tr_matvec(p.values()),
        coding,
    })
}

/// Full information matrix `G' Ω(p) G` of the saturated model, with
/// `Ω(p) = diag(p) − pp'`; equals the Jacobian `∂μ/∂θ'`.
pub fn full_information(p: &Table, coding: Coding) -> Result<Matrix> {
    require_probabilities(p)?;
    checked_log(p)?; // positivity gate only
    let g = build_g(p.space(), coding);
    Ok(information_for_columns(p.values(), &g, None))
}

/// Covariance block `C_I = G_I' Ω(p) G_I` for the interaction set `vars`
/// (strictly increasing variable indices). Symmetric positive definite for
/// strictly positive `p`.
pub fn cov_block(p: &Table, vars: &[usize], coding: Coding) -> Result<Matrix> {
    require_probabilities(p)?;
    checked_log(p)?; // positivity gate only
    p.space().check_subset(vars)?;
    let index = TermIndex::new(p.space());
    let term = index
        .find_term(vars)
        .ok_or_else(|| Error::Spec(alloc::string::String::from("empty interaction set")))?;
    let t = index.term(term);
    let cols: Vec<usize> = (t.offset()..t.offset() + t.len()).collect();
    let g = build_g(p.space(), coding);
    Ok(information_for_columns(p.values(), &g, Some(&cols)))
}

/// `G_S' Ω(p) G_S` for a column subset without forming Ω: entry (a,b) is
/// `Σ_c p_c g_a(c) g_b(c) − (Σ_c p_c g_a(c))(Σ_c p_c g_b(c))`.
pub(crate) fn information_for_columns(p: &[f64], g: &Matrix, cols: Option<&[usize]>) -> Matrix {
    let all: Vec<usize>;
    let cols = match cols {
        Some(c) => c,
        None => {
            all = (0..g.cols()).collect();
            &all
        }
    };
    let n = cols.len();
    let mut means = vec![0.0; n];
    for (j, &col) in cols.iter().enumerate() {
        means[j] = (0..g.rows()).map(|c| p[c] * g[(c, col)]).sum();
    }
    let mut out = Matrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let cross: f64 = (0..g.rows())
                .map(|c| p[c] * g[(c, cols[a])] * g[(c, cols[b])])
                .sum();
            let v = cross - means[a] * means[b];
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn xy_table() -> Table {
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        Table::probabilities(space, vec![0.40, 0.20, 0.10, 0.30]).unwrap()
    }

    #[test]
    fn zero_theta_gives_uniform() {
        let space = FactorSpace::new(&[("X", 2), ("W", 3), ("Y", 2)]).unwrap();
        let theta = ThetaVector::zeros(space.total_cells() - 1, Coding::Ac);
        let p = p_from_theta(&theta, &space).unwrap();
        for &v in p.values() {
            assert_abs_diff_eq!(v, 1.0 / 12.0, epsilon = 1e-15);
        }
    }

    #[test]
    #[allow(clippy::approx_constant)] // 6-decimal inputs frozen with the expected table
    fn known_theta_recovers_target_table() {
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        let theta = ThetaVector::new(
            vec![-1.386294, -0.693147, 1.791759],
            Coding::Rc,
        )
        .unwrap();
        let p = p_from_theta(&theta, &space).unwrap();
        let want = [0.40, 0.20, 0.10, 0.30];
        for (got, want) in p.values().iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-6);
        }
    }

    #[test]
    fn theta_from_p_frozen_values() {
        let theta = theta_from_p(&xy_table(), Coding::Rc).unwrap();
        // λ_X = log(p10/p00), λ_Y = log(p01/p00), λ_XY = log(p00 p11 / (p01 p10)) = log 6.
        assert_abs_diff_eq!(theta[0], (0.10f64 / 0.40).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(theta[1], (0.20f64 / 0.40).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(theta[2], 6.0f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(theta[2], 1.791_759_469_228_055, epsilon = 1e-12);

        let uniform = Table::uniform(FactorSpace::new(&[("A", 3), ("B", 2)]).unwrap());
        let theta = theta_from_p(&uniform, Coding::Ac).unwrap();
        for &v in theta.values() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_cell_is_positivity_error() {
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        let p = Table::probabilities(space, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        match theta_from_p(&p, Coding::Rc) {
            Err(Error::NonPositiveCell { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected positivity error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_both_codings() {
        let spaces = [
            FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap(),
            FactorSpace::new(&[("X", 3), ("Y", 2)]).unwrap(),
            FactorSpace::new(&[("X", 2), ("W", 2), ("Y", 2)]).unwrap(),
            FactorSpace::new(&[("A", 4), ("B", 2), ("C", 2), ("D", 2)]).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for coding in [Coding::Rc, Coding::Ac] {
            for space in &spaces {
                for _ in 0..25 {
                    let p = Table::random_positive(space.clone(), &mut rng);
                    let theta = theta_from_p(&p, coding).unwrap();
                    let back = p_from_theta(&theta, space).unwrap();
                    for (a, b) in p.values().iter().zip(back.values()) {
                        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn mean_params_frozen_values() {
        let uniform = Table::uniform(FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap());
        let mu = mean_params(&uniform, Coding::Rc).unwrap();
        assert_eq!(mu.values(), &[0.5, 0.5, 0.25]);

        let mu = mean_params(&xy_table(), Coding::Rc).unwrap();
        assert_abs_diff_eq!(mu[0], 0.40, epsilon = 1e-15);
        assert_abs_diff_eq!(mu[1], 0.50, epsilon = 1e-15);
        assert_abs_diff_eq!(mu[2], 0.30, epsilon = 1e-15);
    }

    #[test]
    fn mean_params_agree_with_marginal_tables() {
        let space = FactorSpace::new(&[("X", 3), ("Y", 2), ("Z", 2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let p = Table::random_positive(space.clone(), &mut rng);
            let mu = mean_params(&p, Coding::Rc).unwrap();
            let idx = TermIndex::new(&space);
            for (t, term) in idx.terms() {
                let marg = p.marginalize(term.vars()).unwrap();
                let sub_mu = mean_params(&marg, Coding::Rc).unwrap();
                let sub_idx = TermIndex::new(marg.space());
                let sub_t = sub_idx
                    .find_term(&(0..term.vars().len()).collect::<alloc::vec::Vec<_>>())
                    .unwrap();
                for local in 0..term.len() {
                    let (_, levels) = idx.decode(term.offset() + local);
                    let sub_coord = sub_idx.coord(sub_t, &levels).unwrap();
                    assert_abs_diff_eq!(
                        mu[term.offset() + local],
                        sub_mu[sub_coord],
                        epsilon = 1e-13
                    );
                }
                let _ = t;
            }
        }
    }

    #[test]
    fn cov_block_scalar_formulas() {
        let space = FactorSpace::new(&[("X", 2)]).unwrap();
        let p = Table::probabilities(space, vec![0.6, 0.4]).unwrap();
        let c = cov_block(&p, &[0], Coding::Rc).unwrap();
        assert_abs_diff_eq!(c[(0, 0)], 0.24, epsilon = 1e-15);

        let uniform = Table::uniform(FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap());
        let c = cov_block(&uniform, &[0, 1], Coding::Rc).unwrap();
        assert_abs_diff_eq!(c[(0, 0)], 0.1875, epsilon = 1e-15);
    }

    #[test]
    fn cov_block_matches_finite_difference_jacobian() {
        let space = FactorSpace::new(&[("X", 3), ("Y", 2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let idx = TermIndex::new(&space);
        let h = 1e-5;
        for coding in [Coding::Rc, Coding::Ac] {
            for _ in 0..5 {
                let p = Table::random_positive(space.clone(), &mut rng);
                let theta = theta_from_p(&p, coding).unwrap();
                for (t, term) in idx.terms() {
                    let c = cov_block(&p, term.vars(), coding).unwrap();
                    for a in 0..term.len() {
                        for b in 0..term.len() {
                            // ∂μ_{I,a} / ∂θ_{I,b} by central differences.
                            let j = term.offset() + b;
                            let mut up = theta.values().to_vec();
                            up[j] += h;
                            let mut dn = theta.values().to_vec();
                            dn[j] -= h;
                            let mu_up = mean_params(
                                &p_from_theta(&ThetaVector::new(up, coding).unwrap(), &space)
                                    .unwrap(),
                                coding,
                            )
                            .unwrap();
                            let mu_dn = mean_params(
                                &p_from_theta(&ThetaVector::new(dn, coding).unwrap(), &space)
                                    .unwrap(),
                                coding,
                            )
                            .unwrap();
                            let fd =
                                (mu_up[term.offset() + a] - mu_dn[term.offset() + a]) / (2.0 * h);
                            assert_abs_diff_eq!(c[(a, b)], fd, epsilon = 1e-6);
                        }
                    }
                    let _ = t;
                }
            }
        }
    }

    #[test]
    fn cov_block_is_positive_definite() {
        let space = FactorSpace::new(&[("X", 3), ("W", 2), ("Y", 2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let idx = TermIndex::new(&space);
        for _ in 0..10 {
            let p = Table::random_positive(space.clone(), &mut rng);
            for (_, term) in idx.terms() {
                let c = cov_block(&p, term.vars(), Coding::Ac).unwrap();
                let eigs = c.sym_eigenvalues();
                assert!(eigs[0] > 0.0, "min eigenvalue {:e} not positive", eigs[0]);
            }
        }
    }

    #[test]
    fn full_information_diagonal_blocks_match_cov_block() {
        let space = FactorSpace::new(&[("X", 2), ("Y", 3)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = Table::random_positive(space.clone(), &mut rng);
        let f = full_information(&p, Coding::Rc).unwrap();
        let idx = TermIndex::new(&space);
        for (_, term) in idx.terms() {
            let c = cov_block(&p, term.vars(), Coding::Rc).unwrap();
            for a in 0..term.len() {
                for b in 0..term.len() {
                    assert_abs_diff_eq!(
                        c[(a, b)],
                        f[(term.offset() + a, term.offset() + b)],
                        epsilon = 1e-14
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_identity_on_random_tables(raw in proptest::collection::vec(0.05f64..1.0, 8)) {
            let space = FactorSpace::new(&[("X", 2), ("W", 2), ("Y", 2)]).unwrap();
            let total: f64 = raw.iter().sum();
            let values: alloc::vec::Vec<f64> = raw.iter().map(|v| v / total).collect();
            let p = Table::probabilities(space.clone(), values).unwrap();
            let theta = theta_from_p(&p, Coding::Rc).unwrap();
            let back = p_from_theta(&theta, &space).unwrap();
            for (a, b) in p.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
