//! Pseudo-labels, k-means, spectral clustering of the affinity, optimal
//! label matching, and evaluation metrics.
//!
//! Spectral clustering uses the symmetric normalized Laplacian. NMI is
//! normalized by the geometric mean of the two entropies; Fscore is the
//! pair-counting F1.

mod hungarian;
mod kmeans;
mod labels;
mod metrics;
mod spectral;

pub use hungarian::hungarian;
pub use kmeans::{kmeans, KMeansConfig, KMeansFit};
pub use labels::{pseudo_labels, PartitionLabels};
pub use metrics::{metric_acc, metric_fscore, metric_nmi, metric_purity, ClusterMetrics};
pub use spectral::{normalized_laplacian, spectral_cluster, spectral_cluster_with, DEGREE_EPS};
