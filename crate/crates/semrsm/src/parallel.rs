//! Worker pool and the parallel drivers for RSM and cross-similarity plans.
//!
//! Work units are evaluated in any order and reassembled by index, so the
//! output does not depend on the number of threads.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use semrsm_core::rsm::{CrossPlan, RsmOutput, RsmPlan};
use semrsm_core::SimilarityMatrix;

use crate::error::{Error, Result};

pub struct Pool {
    inner: ThreadPool,
}

impl Pool {
    /// `None` or `Some(0)` uses the available parallelism.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let mut builder = ThreadPoolBuilder::new().thread_name(|i| format!("semrsm-{i}"));
        if let Some(t) = threads.filter(|&t| t > 0) {
            builder = builder.num_threads(t);
        }
        let inner = builder.build().map_err(|e| Error::Pool(e.to_string()))?;
        Ok(Pool { inner })
    }

    pub fn threads(&self) -> usize {
        self.inner.current_num_threads()
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.inner.install(f)
    }

    pub fn run_rsm(&self, plan: &RsmPlan<'_>, keep_assignments: bool) -> Result<RsmOutput> {
        let pairs = plan.pairs();
        let scores = self.install(|| {
            pairs
                .par_iter()
                .map(|&(i, j)| plan.evaluate(i, j).map(|s| ((i, j), s)))
                .collect::<semrsm_core::Result<Vec<_>>>()
        })?;
        Ok(plan.finish(scores, keep_assignments)?)
    }

    pub fn run_cross(&self, plan: &CrossPlan<'_>) -> Result<SimilarityMatrix> {
        let results = self.install(|| {
            plan.blocks()
                .par_iter()
                .map(|b| plan.evaluate(b).map(|v| (b.clone(), v)))
                .collect::<semrsm_core::Result<Vec<_>>>()
        })?;
        Ok(plan.finish(results)?)
    }
}
