//! Exact recovery of sparse Boolean factors from their Gram matrix.
//!
//! A selection matrix `W` (m x r, exactly `k` ones per row) is observed only
//! through `M = WWᵀ` over the Boolean semiring: `M[a][b] = 1` iff rows `a`
//! and `b` share a column. For random `W` and enough rows, `W` is recovered
//! exactly, up to a permutation of its columns:
//!
//! 1. the fraction of rows avoiding a set of rows pins down the size of
//!    their union ([`mu`]),
//! 2. unions of pairs and triples give the third-order intersection tensor
//!    `T = Σ_i w_i^{⊗3}` by inclusion–exclusion ([`tensor`]),
//! 3. Jennrich's simultaneous diagonalization splits `T` into its
//!    components, which are rounded to 0/1 and checked against `M`
//!    ([`jennrich`]).
//!
//! ```
//! use ssbmf::{gen_selection_matrix, gram, tensor_recover, Arithmetic, RecoverConfig, Seed};
//!
//! let w = gen_selection_matrix(4000, 8, 2, Seed(3))?;
//! let m = gram(&w, Arithmetic::Boolean);
//! let mut found = tensor_recover(&m, 8, 2, &RecoverConfig::default())?;
//! assert!(found.success);
//! assert!(found.align(&w).is_permutation());
//! # Ok::<(), ssbmf::Error>(())
//! ```
//!
//! Around the core pipeline sit dataset recovery for InstaHide-style mixtures
//! ([`recover`]), a Max 2-CSP view of the worst case ([`csp`]), probes of the
//! rank theory that makes recovery possible ([`probes`]), and file formats
//! ([`io`]).

pub mod bits;
pub mod csp;
pub mod error;
pub mod instance;
pub mod io;
pub mod jennrich;
pub mod linalg;
pub mod mu;
pub mod probes;
pub mod recover;
pub mod seed;
pub mod tensor;

pub use error::{Error, Result};
pub use instance::{
    factorization_error, gen_selection_matrix, gram, Arithmetic, Diagonal, GramMatrix, SelectionMatrix,
};
pub use jennrich::{
    jennrich_decompose, match_columns, match_factors, round_boolean, tensor_recover, ColumnMatch, RecoverConfig,
    RecoveredFactors, RecoveryReport, TensorMode,
};
pub use mu::{mu_table, required_sample_size, MuTable};
pub use seed::Seed;
pub use tensor::{build_tensor, contract, oracle_tensor, IntersectionTensor, TensorBuilder};

// Every chapter of the guide is compiled and run as a doctest.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/mu.md")]
    mod mu {}
    #[doc = include_str!("../../../book/src/tensor.md")]
    mod tensor {}
    #[doc = include_str!("../../../book/src/recovery.md")]
    mod recovery {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/csp.md")]
    mod csp {}
    #[doc = include_str!("../../../book/src/probes.md")]
    mod probes {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
