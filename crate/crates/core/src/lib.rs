//! Marginal log-linear models on discrete multiway contingency tables.
//!
//! The crate covers the pipeline from raw tables to mediation reports:
//!
//! - [`tables`]: factor spaces, cell indexing, marginalization and conditioning;
//! - [`coding`]: contrast matrices `H` and indicator designs `G` for reference
//!   (Rc) and adjacent (Ac) codings;
//! - [`loglinear`]: the saturated canonical map `log p = Gθ − 1·log Σ exp(Gθ)`,
//!   its inverse `θ = H log p`, mean parameters `μ = G'p`, and covariance blocks;
//! - [`mixed`]: the mixed parametrization `(μ_V, θ_U)`, Newton inversion back to
//!   a joint table, and reconstruction of a three-way table from its pairwise
//!   marginals;
//! - [`mll`]: marginal log-linear parameters `λ_{I,M}`, smooth parametrizations
//!   that define an interaction both in a margin and in the joint, and the
//!   identities connecting interactions across margins;
//! - [`fit`]: constrained maximum likelihood for multinomial counts with
//!   deviance, degrees of freedom, standard errors, simulation and bootstrap;
//! - [`mediation`]: natural direct/indirect/total effects on the risk scale.
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature for embedded use. All operations are pure functions of
//! immutable inputs and are safe to share across threads.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod coding;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod loglinear;
pub mod mediation;
pub mod mixed;
pub mod mll;
pub mod tables;

mod fmath;

pub use coding::{build_g, build_h, contrast_matrix, Coding, TermIndex};
pub use error::{Error, Result};
pub use fit::{
    bootstrap, count_dof, fit_mle, fit_mle_with, simulate, standard_errors, BootstrapResult,
    FitOptions, FitResult, LinearConstraint, ModelSpec,
};
pub use linalg::Matrix;
pub use loglinear::{cov_block, mean_params, p_from_theta, theta_from_p, MuVector, ThetaVector};
pub use mediation::{
    mediation_table, natural_effects, MediationResult, MediationRoles, NaturalEffects,
};
pub use mixed::{
    information_blocks, invert_mixed, reconstruct_from_pairwise, split_mixed, InformationBlocks,
    MixedParam, MixedPartition,
};
pub use mll::{
    build_prop3_spec, c1_from_loglinear, evans_difference, example1_shift, lambda_term,
    logits_from_loglinear, mll_jacobian, mll_vector, prop2_jacobian_check, sd_delta,
    sd_w_logit_expansion, LogitMap, MllSpec, MllTerm, XwyVars,
};
pub use tables::{FactorSpace, Table, TableKind};
