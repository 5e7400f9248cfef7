//! Public-data-assisted private query release.
//!
//! A small public sample fixes a finite cover of the query class; the
//! private sample is mapped onto the matching representative domain and
//! released with private multiplicative weights. Baselines, exact error
//! evaluation, sample-size calculators and a fingerprinting audit live
//! alongside.

pub mod audit;
pub mod classes;
pub mod cover;
pub mod error;
pub mod experiment;
pub mod pmw;
pub mod profile;
pub mod release;
pub mod repdomain;

pub use classes::{
    compute_dual_vc, compute_vc, evaluate, sauer_bound, signature, true_mean, ClassKind, Distribution, DomainPoint,
    FiniteClassDocument, Hypothesis, HypothesisClass, Label, SignVector,
};
pub use cover::{build_cover, projection_patterns, public_sample_size, CoverResult};
pub use error::{Error, Result};
pub use pmw::{laplace, pmw_release, required_private_samples, PmwConfig, PmwOutput, PmwState, QuerySet};
pub use release::{
    evaluate_error, prvq, prvq_with_options, query, structure_to_synthetic, theorem1_samples,
    theorem1_samples_dual_from_vc, PrvqOptions, QueryRelease, ReleaseStructure,
};
pub use repdomain::{build_representative_domain, map_dataset, DomainSpec, RepresentativeDomain};
