//! Spatially permutation-invariant representational similarity.
//!
//! Standard ("spatio-semantic") RSMs compare two activation maps location by
//! location, so identical content at different positions looks dissimilar.
//! Semantic RSMs first align the spatial axes of each pair by solving a
//! maximum-weight bipartite matching between their concept vectors (the
//! per-location channel vectors), then apply the kernel.
//!
//! | module | contents |
//! |---|---|
//! | [`batch`] | `N × C × S` batches, centering |
//! | [`kernels`] | linear / RBF / cosine kernels, median bandwidth |
//! | [`assignment`] | affinity matrices, exact and approximate matchers |
//! | [`rsm`] | square RSMs and block-wise cross-similarity |
//! | [`cka`] | HSIC, CKA, layer grids |
//! | [`retrieval`] | top-k retrieval, F1 / IoU label overlap |
//! | [`analysis`] | KL, JSD, Pearson, Spearman |
//!
//! The crate is `no_std` and needs only `alloc`.
//!
//! ```
//! use semrsm_core::{assignment::Matcher, batch::RepresentationBatch, kernels::Kernel, rsm};
//!
//! // One sample with concept vectors (e0, e1) and a copy with them swapped.
//! let z = RepresentationBatch::from_samples(
//!     &[vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0]], 2, 2).unwrap();
//! let spatial = rsm::spatio_semantic_rsm(&z, Kernel::Linear).unwrap();
//! let semantic = rsm::semantic_rsm(&z, Kernel::Linear, Matcher::Optimal).unwrap();
//! assert_eq!(spatial.get(0, 1), 0.0);
//! assert_eq!(semantic.get(0, 1), 2.0);
//! ```

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod assignment;
pub mod batch;
pub mod cka;
pub mod error;
pub mod kernels;
pub mod matrix;
pub mod retrieval;
pub mod rsm;

pub use assignment::{AffinityMatrix, AssignmentResult, Matcher};
pub use batch::RepresentationBatch;
pub use error::{Error, Result};
pub use kernels::{Kernel, SigmaPolicy};
pub use matrix::{DenseMatrix, MatrixKind, SimilarityMatrix};
