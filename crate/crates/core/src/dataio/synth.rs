use serde::{Deserialize, Serialize};

use super::dataset::{normalize_minmax, MultiViewDataset};
use crate::error::{Error, Result};
use crate::numcore::{Matrix, RngStream};

const SYNTH_STREAM: u64 = 0x5EED_DA7A;
/// Standard deviation of the per-view private codes.
const PRIVATE_STD: f64 = 0.3;

/// Parameters of the synthetic multi-view generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub views: usize,
    pub clusters: usize,
    pub shared_dim: usize,
    pub private_dim: usize,
    pub noise_dim: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n: usize, views: usize, clusters: usize, seed: u64) -> Self {
        Self {
            n,
            views,
            clusters,
            shared_dim: 8,
            private_dim: 4,
            noise_dim: 4,
            noise_scale: 0.05,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters < 2 || self.n < self.clusters {
            return Err(Error::InvalidInput(format!(
                "synthetic data needs n >= k >= 2 (n = {}, k = {})",
                self.n, self.clusters
            )));
        }
        if self.views == 0 {
            return Err(Error::InvalidInput("synthetic data needs at least one view".into()));
        }
        if self.shared_dim + self.private_dim == 0 {
            return Err(Error::InvalidInput("shared_dim + private_dim must be >= 1".into()));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::InvalidInput("noise_scale must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Feature dimension of view `v` before the pure-noise block.
    pub fn informative_dim(&self, v: usize) -> usize {
        2 * (self.shared_dim + self.private_dim) + 3 * v
    }
}

/// Un-normalized generator output, exposed for inspection in tests.
#[derive(Debug, Clone)]
pub struct SynthParts {
    pub labels: Vec<usize>,
    /// `shared_dim x n` (absent when `shared_dim == 0`).
    pub shared: Option<Matrix>,
    pub raw_views: Vec<Matrix>,
}

/// Draws the latent codes and raw views.
///
/// Cluster centroids live in a shared latent space. Each sample gets its
/// cluster's centroid plus `noise_scale` Gaussian jitter as shared code, and an
/// independent private code per view. View `v` is a fixed random linear map of
/// `[shared; private]` followed by `noise_dim` pure-noise features.
pub fn synth_parts(spec: &SynthSpec) -> Result<SynthParts> {
    spec.validate()?;
    let mut rng = RngStream::new(spec.seed, SYNTH_STREAM);
    let (n, k) = (spec.n, spec.clusters);

    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    rng.shuffle(&mut labels);

    let shared = (spec.shared_dim > 0).then(|| {
        let centroids = rng.normal_matrix(spec.shared_dim, k, 1.0);
        let mut s = Matrix::zeros(spec.shared_dim, n);
        for (i, &l) in labels.iter().enumerate() {
            for r in 0..spec.shared_dim {
                s[(r, i)] = centroids[(r, l)] + spec.noise_scale * rng.normal();
            }
        }
        s
    });

    let latent_dim = spec.shared_dim + spec.private_dim;
    let mut raw_views = Vec::with_capacity(spec.views);
    for v in 0..spec.views {
        let private = (spec.private_dim > 0).then(|| rng.normal_matrix(spec.private_dim, n, PRIVATE_STD));
        let code = match (&shared, &private) {
            (Some(s), Some(p)) => Matrix::vstack(&[s, p])?,
            (Some(s), None) => s.clone(),
            (None, Some(p)) => p.clone(),
            (None, None) => unreachable!("validated"),
        };
        let map = rng.normal_matrix(spec.informative_dim(v), latent_dim, 1.0 / (latent_dim as f64).sqrt());
        let informative = map.matmul(&code);
        let view = if spec.noise_dim > 0 {
            let noise = rng.normal_matrix(spec.noise_dim, n, spec.noise_scale);
            Matrix::vstack(&[&informative, &noise])?
        } else {
            informative
        };
        raw_views.push(view);
    }
    Ok(SynthParts {
        labels,
        shared,
        raw_views,
    })
}

/// Generates a labelled, `[0, 1]`-normalized synthetic dataset.
pub fn synth_generate(spec: &SynthSpec) -> Result<MultiViewDataset> {
    let parts = synth_parts(spec)?;
    let names = (0..spec.views).map(|v| format!("view{v}")).collect();
    let ds = MultiViewDataset::new(parts.raw_views, spec.clusters, Some(parts.labels), names)?;
    Ok(normalize_minmax(&ds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let spec = SynthSpec::new(400, 3, 4, 7);
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.views[0], c.views[0]);
    }

    #[test]
    fn labels_are_balanced_and_entries_normalized() {
        let ds = synth_generate(&SynthSpec::new(403, 2, 4, 1)).unwrap();
        let mut counts = [0usize; 4];
        for &l in ds.labels.as_ref().unwrap() {
            counts[l] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{counts:?}");
        assert!(ds.views.iter().all(|v| v.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x))));
        assert_eq!(ds.view_dims(), vec![28, 31]);
    }

    #[test]
    fn noiseless_shared_codes_coincide_within_cluster() {
        let spec = SynthSpec {
            noise_scale: 0.0,
            noise_dim: 0,
            ..SynthSpec::new(60, 2, 3, 11)
        };
        let parts = synth_parts(&spec).unwrap();
        let shared = parts.shared.unwrap();
        for i in 0..spec.n {
            for j in 0..spec.n {
                if parts.labels[i] == parts.labels[j] {
                    assert_eq!(shared.column(i), shared.column(j));
                }
            }
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(synth_generate(&SynthSpec::new(3, 2, 4, 0)).is_err());
        assert!(synth_generate(&SynthSpec::new(10, 2, 1, 0)).is_err());
        assert!(synth_generate(&SynthSpec { views: 0, ..SynthSpec::new(10, 2, 2, 0) }).is_err());
        assert!(synth_generate(&SynthSpec {
            shared_dim: 0,
            private_dim: 0,
            ..SynthSpec::new(10, 2, 2, 0)
        })
        .is_err());
    }
}
