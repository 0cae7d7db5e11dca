//! Representation batches: `N × C × S` activations plus optional sample and
//! group identifiers.
//!
//! Each sample is stored channel-major, so sample `i` is a `C × S` slice in
//! which entry `c * S + s` is channel `c` at spatial location `s`. The
//! length-`C` column at a fixed location is a *concept vector*.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationBatch {
    data: Vec<f64>,
    n_samples: usize,
    n_channels: usize,
    n_spatial: usize,
    sample_ids: Option<Vec<String>>,
    group_ids: Option<Vec<String>>,
}

impl RepresentationBatch {
    pub fn new(data: Vec<f64>, n_samples: usize, n_channels: usize, n_spatial: usize) -> Result<Self> {
        if n_samples == 0 || n_channels == 0 || n_spatial == 0 {
            return Err(Error::Shape(format!(
                "all dimensions must be >= 1, got N={n_samples} C={n_channels} S={n_spatial}"
            )));
        }
        let expected = n_samples * n_channels * n_spatial;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite activation {} at flat index {pos}",
                data[pos]
            )));
        }
        Ok(RepresentationBatch {
            data,
            n_samples,
            n_channels,
            n_spatial,
            sample_ids: None,
            group_ids: None,
        })
    }

    /// Builds a batch from per-sample `C × S` slices.
    pub fn from_samples(samples: &[Vec<f64>], n_channels: usize, n_spatial: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(samples.len() * n_channels * n_spatial);
        for s in samples {
            crate::error::check_len(n_channels * n_spatial, s.len())?;
            data.extend_from_slice(s);
        }
        Self::new(data, samples.len(), n_channels, n_spatial)
    }

    pub fn with_sample_ids(mut self, ids: Vec<String>) -> Result<Self> {
        crate::error::check_len(self.n_samples, ids.len())?;
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate sample id `{id}`")));
            }
        }
        self.sample_ids = Some(ids);
        Ok(self)
    }

    pub fn with_group_ids(mut self, ids: Vec<String>) -> Result<Self> {
        crate::error::check_len(self.n_samples, ids.len())?;
        self.group_ids = Some(ids);
        Ok(self)
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    #[inline]
    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    #[inline]
    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    /// Length of one flattened sample, `C · S`.
    #[inline]
    pub fn sample_len(&self) -> usize {
        self.n_channels * self.n_spatial
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The `C × S` slice of sample `i`.
    #[inline]
    pub fn sample(&self, i: usize) -> &[f64] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.sample_len())
    }

    pub fn sample_ids(&self) -> Option<&[String]> {
        self.sample_ids.as_deref()
    }

    pub fn group_ids(&self) -> Option<&[String]> {
        self.group_ids.as_deref()
    }

    /// Sample ids, defaulting to `"0".."N-1"` when none were attached.
    pub fn ids_or_default(&self) -> Vec<String> {
        match &self.sample_ids {
            Some(ids) => ids.clone(),
            None => (0..self.n_samples).map(|i| format!("{i}")).collect(),
        }
    }

    /// A new batch holding the given samples, in order, with their ids.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.sample_len());
        for &i in indices {
            if i >= self.n_samples {
                return Err(Error::InvalidParameter(format!("sample index {i} out of range")));
            }
            data.extend_from_slice(self.sample(i));
        }
        let mut out = Self::new(data, indices.len(), self.n_channels, self.n_spatial)?;
        if let Some(ids) = &self.sample_ids {
            out = out.with_sample_ids(indices.iter().map(|&i| ids[i].clone()).collect())?;
        }
        if let Some(groups) = &self.group_ids {
            out = out.with_group_ids(indices.iter().map(|&i| groups[i].clone()).collect())?;
        }
        Ok(out)
    }

    /// Keeps only the given spatial locations (in the given order) of every sample.
    pub fn select_spatial(&self, locations: &[usize]) -> Result<Self> {
        if let Some(&bad) = locations.iter().find(|&&l| l >= self.n_spatial) {
            return Err(Error::InvalidParameter(format!("spatial index {bad} out of range")));
        }
        let s_new = locations.len();
        let mut data = Vec::with_capacity(self.n_samples * self.n_channels * s_new);
        for sample in self.samples() {
            for c in 0..self.n_channels {
                let row = &sample[c * self.n_spatial..(c + 1) * self.n_spatial];
                data.extend(locations.iter().map(|&l| row[l]));
            }
        }
        let mut out = Self::new(data, self.n_samples, self.n_channels, s_new)?;
        out.sample_ids = self.sample_ids.clone();
        out.group_ids = self.group_ids.clone();
        Ok(out)
    }
}

/// Reorders the spatial axis of one `C × S` sample: output location `a`
/// takes input location `permutation[a]`.
pub fn permute_spatial(sample: &[f64], n_channels: usize, permutation: &[usize]) -> Vec<f64> {
    let s = permutation.len();
    debug_assert_eq!(sample.len(), n_channels * s);
    let mut out = vec![0.0; sample.len()];
    for c in 0..n_channels {
        let src = &sample[c * s..(c + 1) * s];
        let dst = &mut out[c * s..(c + 1) * s];
        for (a, &p) in permutation.iter().enumerate() {
            dst[a] = src[p];
        }
    }
    out
}

/// Per-position mean over samples, a `C × S` slice.
pub fn sample_mean(batch: &RepresentationBatch) -> Vec<f64> {
    let mut mean = vec![0.0; batch.sample_len()];
    for sample in batch.samples() {
        for (m, v) in mean.iter_mut().zip(sample) {
            *m += v;
        }
    }
    let n = batch.n_samples() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Subtracts the per-position sample mean (or `external_mean`, e.g. the
/// database mean when centering queries). Returns the centered batch and
/// the mean that was removed.
pub fn center(batch: &RepresentationBatch, external_mean: Option<&[f64]>) -> Result<(RepresentationBatch, Vec<f64>)> {
    let mean = match external_mean {
        Some(m) => {
            if m.len() != batch.sample_len() {
                return Err(Error::Shape(format!(
                    "external mean has {} entries, batch samples have C×S = {}",
                    m.len(),
                    batch.sample_len()
                )));
            }
            m.to_vec()
        }
        None => sample_mean(batch),
    };
    let len = batch.sample_len();
    let data: Vec<f64> = batch.data.iter().enumerate().map(|(k, v)| v - mean[k % len]).collect();
    let mut out = RepresentationBatch::new(data, batch.n_samples, batch.n_channels, batch.n_spatial)?;
    out.sample_ids = batch.sample_ids.clone();
    out.group_ids = batch.group_ids.clone();
    Ok((out, mean))
}
