//! Additive vector quantization for approximate nearest neighbor search.
//!
//! The crate learns `M` dictionaries of `K` elements each and approximates every
//! vector by the sum of one element per dictionary. Besides the classic product
//! (PQ) and residual (RVQ) trainers it implements dictionary annealing: a
//! refinement loop that repeatedly re-encodes the data with a norm-ordered beam
//! search, rebuilds one dictionary against an intermediate dataset made of the
//! residue plus that dictionary's contribution, and fits it with k-means grown
//! over PCA subspaces.
//!
//! All numeric code is generic over the storage scalar ([`Scalar`], implemented
//! for `f32` and `f64`). Reductions are always carried out in `f64`. The
//! `*F32` / `*F64` aliases below name the common instantiations.

pub mod codebook;
pub mod encoder;
pub mod error;
pub mod kmeans;
pub mod numerics;
pub mod scalar;
pub mod search;
pub mod trainers;
pub mod vecio;

pub use codebook::{
    build_cross_terms, cross_term_of, entropy, mutual_information, quantization_error, reconstruct,
    residuals, sort_by_norm, CodeMatrix, Codebook, CrossTermTable, DictionaryOrder,
    EncodedDatabase,
};
pub use encoder::{
    beam_encode, encode_dataset, exhaustive_encode, greedy_encode, icm_encode, pq_encode,
    BeamCandidate, BeamSearch, EncodeMethod,
};
pub use error::{Error, Result};
pub use kmeans::{assign, kmeans_fit, KMeansConfig, KMeansInit, KMeansResult};
pub use numerics::{gram, pca, project, sq_l2, DenseMatrix, Rotation};
pub use scalar::Scalar;
pub use search::{
    adc_scan, adc_score, adc_search, build_adc_tables, exact_scan, exact_search, recall_at_r,
    AdcTables, Neighbor, SearchResult,
};
pub use trainers::{
    anneal_dictionary, build_intermediate, da_iterate, online_update, subspace_schedule, train_da,
    train_darvq, train_pq, train_rvq, DAConfig, DictionaryPick, IterationRecord, TrainReport,
};
pub use vecio::{GaussianMixture, GroundTruth, VectorDataset};

pub type VectorDatasetF32 = VectorDataset<f32>;
pub type VectorDatasetF64 = VectorDataset<f64>;
pub type CodebookF32 = Codebook<f32>;
pub type CodebookF64 = Codebook<f64>;
pub type KMeansResultF32 = KMeansResult<f32>;
pub type KMeansResultF64 = KMeansResult<f64>;
