//! Spatio-semantic and semantic RSMs, and block-wise query × database
//! similarity matrices.
//!
//! Both square constructions walk the upper triangle `i <= j`. Off-diagonal
//! pairs are aligned by the matcher (which always maximises the *linear*
//! affinity between concept vectors), then the chosen kernel is evaluated on
//! the flattened, aligned pair. Diagonal pairs skip the solver. The lower
//! triangle is written by mirroring, never recomputed.
//!
//! Work is described by [`RsmPlan`] and [`CrossPlan`]: callers may evaluate
//! the units (pairs, blocks) in any order or in parallel and hand the
//! results to `finish`, which produces identical output regardless.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::assignment::{affinity_from_concepts, concept_norms, concept_vectors, AssignmentResult, Matcher};
use crate::batch::{permute_spatial, RepresentationBatch};
use crate::error::{Error, Result};
use crate::kernels::{median_sigma, median_sigma_cross, Kernel, ResolvedKernel};
use crate::matrix::{DenseMatrix, MatrixKind, SimilarityMatrix};

/// Concept-major copies of every sample plus their concept-vector norms,
/// computed once and shared by all pairs involving a sample.
#[derive(Debug, Clone)]
struct Prepared {
    channels: usize,
    spatial: usize,
    concepts: Vec<f64>,
    norms: Vec<f64>,
}

impl Prepared {
    fn new(batch: &RepresentationBatch, matcher: Matcher) -> Self {
        let (channels, spatial) = (batch.n_channels(), batch.n_spatial());
        if matcher == Matcher::None {
            return Prepared {
                channels,
                spatial,
                concepts: Vec::new(),
                norms: Vec::new(),
            };
        }
        let mut concepts = Vec::with_capacity(batch.data().len());
        let mut norms = Vec::with_capacity(batch.n_samples() * spatial);
        for sample in batch.samples() {
            let cv = concept_vectors(sample, channels, spatial);
            norms.extend(concept_norms(&cv, channels));
            concepts.extend(cv);
        }
        Prepared {
            channels,
            spatial,
            concepts,
            norms,
        }
    }

    fn concepts(&self, i: usize) -> &[f64] {
        let len = self.channels * self.spatial;
        &self.concepts[i * len..(i + 1) * len]
    }

    fn norms(&self, i: usize) -> &[f64] {
        &self.norms[i * self.spatial..(i + 1) * self.spatial]
    }
}

/// Similarity of one pair and, when a matcher ran, the alignment it chose.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub value: f64,
    pub assignment: Option<AssignmentResult>,
}

#[allow(clippy::too_many_arguments)]
fn score_pair(
    left: &RepresentationBatch,
    left_prep: &Prepared,
    i: usize,
    right: &RepresentationBatch,
    right_prep: &Prepared,
    j: usize,
    kernel: &ResolvedKernel,
    matcher: Matcher,
) -> Result<PairScore> {
    let zi = left.sample(i);
    let zj = right.sample(j);
    if matcher == Matcher::None {
        return Ok(PairScore {
            value: kernel.eval(zi, zj)?,
            assignment: None,
        });
    }
    let a = affinity_from_concepts(
        left_prep.concepts(i),
        right_prep.concepts(j),
        left_prep.channels,
        left_prep.norms(i),
        right_prep.norms(j),
    )?;
    let assignment = matcher.solve(&a)?;
    let aligned = permute_spatial(zj, left_prep.channels, &assignment.permutation);
    Ok(PairScore {
        value: kernel.eval(zi, &aligned)?,
        assignment: Some(assignment),
    })
}

/// Permutation found for one off-diagonal pair of a square RSM.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAssignment {
    pub i: usize,
    pub j: usize,
    pub permutation: Vec<usize>,
    pub total_affinity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsmOutput {
    pub matrix: SimilarityMatrix,
    /// Only populated when requested; ordered by `(i, j)`.
    pub assignments: Vec<PairAssignment>,
}

/// A square RSM over one batch, split into independent pair evaluations.
#[derive(Debug)]
pub struct RsmPlan<'a> {
    batch: &'a RepresentationBatch,
    prepared: Prepared,
    kernel_spec: Kernel,
    kernel: ResolvedKernel,
    matcher: Matcher,
}

impl<'a> RsmPlan<'a> {
    pub fn new(batch: &'a RepresentationBatch, kernel: Kernel, matcher: Matcher) -> Result<Self> {
        matcher.validate_for(batch.n_spatial())?;
        let resolved = kernel.resolve(|| {
            if batch.n_samples() < 2 {
                // A single sample only ever meets itself, where RBF is 1 for any σ.
                Ok(1.0)
            } else {
                median_sigma(&batch.samples().collect::<Vec<_>>())
            }
        })?;
        Ok(RsmPlan {
            batch,
            prepared: Prepared::new(batch, matcher),
            kernel_spec: kernel,
            kernel: resolved,
            matcher,
        })
    }

    pub fn kernel(&self) -> ResolvedKernel {
        self.kernel
    }

    pub fn n(&self) -> usize {
        self.batch.n_samples()
    }

    /// Upper triangle including the diagonal, in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        upper_triangle(self.n())
    }

    pub fn evaluate(&self, i: usize, j: usize) -> Result<PairScore> {
        let matcher = if i == j { Matcher::None } else { self.matcher };
        score_pair(
            self.batch,
            &self.prepared,
            i,
            self.batch,
            &self.prepared,
            j,
            &self.kernel,
            matcher,
        )
    }

    /// Assembles scores (one per entry of [`pairs`](Self::pairs), any order).
    pub fn finish(
        &self,
        scores: impl IntoIterator<Item = ((usize, usize), PairScore)>,
        keep_assignments: bool,
    ) -> Result<RsmOutput> {
        let n = self.n();
        let mut values = DenseMatrix::zeros(n, n);
        let mut filled = alloc::vec![false; n * n];
        let mut assignments = Vec::new();
        for ((i, j), score) in scores {
            values.set(i, j, score.value);
            values.set(j, i, score.value);
            filled[i * n + j] = true;
            if keep_assignments {
                if let Some(a) = score.assignment {
                    assignments.push(PairAssignment {
                        i,
                        j,
                        permutation: a.permutation,
                        total_affinity: a.total_affinity,
                    });
                }
            }
        }
        if let Some((i, j)) = self.pairs().into_iter().find(|&(i, j)| !filled[i * n + j]) {
            return Err(Error::InvalidParameter(format!("pair ({i}, {j}) was never evaluated")));
        }
        assignments.sort_by_key(|a| (a.i, a.j));
        let ids = self.batch.sample_ids().map(<[_]>::to_vec);
        let matrix = SimilarityMatrix::new(values, MatrixKind::SquareSymmetric, self.kernel_spec, self.matcher)?
            .with_ids(ids.clone(), ids)?;
        Ok(RsmOutput { matrix, assignments })
    }

    /// Evaluates every pair sequentially.
    pub fn run(&self, keep_assignments: bool) -> Result<RsmOutput> {
        let scores = self
            .pairs()
            .into_iter()
            .map(|(i, j)| self.evaluate(i, j).map(|s| ((i, j), s)))
            .collect::<Result<Vec<_>>>()?;
        self.finish(scores, keep_assignments)
    }
}

pub fn upper_triangle(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

/// RSM with an arbitrary matcher; [`Matcher::None`] gives the spatio-semantic RSM.
pub fn rsm(z: &RepresentationBatch, kernel: Kernel, matcher: Matcher) -> Result<SimilarityMatrix> {
    Ok(RsmPlan::new(z, kernel, matcher)?.run(false)?.matrix)
}

/// `K[i][j] = kernel(flatten(z_i), flatten(z_j))`: locations are compared
/// position by position.
pub fn spatio_semantic_rsm(z: &RepresentationBatch, kernel: Kernel) -> Result<SimilarityMatrix> {
    rsm(z, kernel, Matcher::None)
}

/// Every off-diagonal pair is spatially aligned by `matcher` before the
/// kernel is evaluated.
pub fn semantic_rsm(z: &RepresentationBatch, kernel: Kernel, matcher: Matcher) -> Result<SimilarityMatrix> {
    if matcher == Matcher::None {
        return Err(Error::InvalidParameter(
            "semantic RSM needs a matcher other than `none`".into(),
        ));
    }
    rsm(z, kernel, matcher)
}

/// Where the RBF median bandwidth of a cross-similarity matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaScope {
    /// Each block uses the median of its own query × database distances.
    #[default]
    PerBlock,
    /// One σ from all query × database distances.
    Global,
}

/// One unit of cross-similarity work: `rows × cols` of the output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

/// A rectangular queries × database similarity matrix split into blocks.
#[derive(Debug)]
pub struct CrossPlan<'a> {
    queries: &'a RepresentationBatch,
    database: &'a RepresentationBatch,
    q_prep: Prepared,
    d_prep: Prepared,
    kernel_spec: Kernel,
    global: Option<ResolvedKernel>,
    matcher: Matcher,
    blocks: Vec<Block>,
}

impl<'a> CrossPlan<'a> {
    pub fn new(
        queries: &'a RepresentationBatch,
        database: &'a RepresentationBatch,
        kernel: Kernel,
        matcher: Matcher,
        block: usize,
        sigma_scope: SigmaScope,
    ) -> Result<Self> {
        if queries.n_channels() != database.n_channels() || queries.n_spatial() != database.n_spatial() {
            return Err(Error::Shape(format!(
                "queries are C×S = {}×{} but database is {}×{}",
                queries.n_channels(),
                queries.n_spatial(),
                database.n_channels(),
                database.n_spatial()
            )));
        }
        if block == 0 {
            return Err(Error::InvalidParameter("block size must be >= 1".into()));
        }
        matcher.validate_for(queries.n_spatial())?;
        let global = match (kernel, sigma_scope) {
            (Kernel::Rbf(crate::kernels::SigmaPolicy::MedianHeuristic), SigmaScope::PerBlock) => None,
            _ => Some(kernel.resolve(|| {
                median_sigma_cross(
                    &queries.samples().collect::<Vec<_>>(),
                    &database.samples().collect::<Vec<_>>(),
                )
            })?),
        };
        let (r, q) = (queries.n_samples(), database.n_samples());
        let mut blocks = Vec::new();
        for r0 in (0..r).step_by(block) {
            for c0 in (0..q).step_by(block) {
                blocks.push(Block {
                    rows: r0..(r0 + block).min(r),
                    cols: c0..(c0 + block).min(q),
                });
            }
        }
        Ok(CrossPlan {
            queries,
            database,
            q_prep: Prepared::new(queries, matcher),
            d_prep: Prepared::new(database, matcher),
            kernel_spec: kernel,
            global,
            matcher,
            blocks,
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Values of one block, row-major.
    pub fn evaluate(&self, block: &Block) -> Result<Vec<f64>> {
        let kernel = match self.global {
            Some(k) => k,
            None => self.kernel_spec.resolve(|| {
                let q: Vec<_> = block.rows.clone().map(|i| self.queries.sample(i)).collect();
                let d: Vec<_> = block.cols.clone().map(|j| self.database.sample(j)).collect();
                median_sigma_cross(&q, &d)
            })?,
        };
        let mut out = Vec::with_capacity(block.rows.len() * block.cols.len());
        for i in block.rows.clone() {
            for j in block.cols.clone() {
                let s = score_pair(
                    self.queries,
                    &self.q_prep,
                    i,
                    self.database,
                    &self.d_prep,
                    j,
                    &kernel,
                    self.matcher,
                )?;
                out.push(s.value);
            }
        }
        Ok(out)
    }

    /// Assembles the matrix from `(block, values)` pairs in any order.
    pub fn finish(&self, results: impl IntoIterator<Item = (Block, Vec<f64>)>) -> Result<SimilarityMatrix> {
        let mut values = DenseMatrix::zeros(self.queries.n_samples(), self.database.n_samples());
        let mut seen = 0usize;
        for (block, vals) in results {
            crate::error::check_len(block.rows.len() * block.cols.len(), vals.len())?;
            let mut it = vals.into_iter();
            for i in block.rows.clone() {
                for j in block.cols.clone() {
                    values.set(i, j, it.next().unwrap_or_default());
                }
            }
            seen += 1;
        }
        crate::error::check_len(self.blocks.len(), seen)?;
        SimilarityMatrix::new(values, MatrixKind::Rectangular, self.kernel_spec, self.matcher)?.with_ids(
            Some(self.queries.ids_or_default()),
            Some(self.database.ids_or_default()),
        )
    }

    pub fn run(&self) -> Result<SimilarityMatrix> {
        let results = self
            .blocks
            .iter()
            .map(|b| self.evaluate(b).map(|v| (b.clone(), v)))
            .collect::<Result<Vec<_>>>()?;
        self.finish(results)
    }
}

/// Queries × database similarity, computed in `block × block` units.
pub fn cross_similarity(
    queries: &RepresentationBatch,
    database: &RepresentationBatch,
    kernel: Kernel,
    matcher: Matcher,
    block: usize,
    sigma_scope: SigmaScope,
) -> Result<SimilarityMatrix> {
    CrossPlan::new(queries, database, kernel, matcher, block, sigma_scope)?.run()
}
