//! Distribution metrics (FID, KID), detector-confidence aggregation and
//! report assembly.

mod confidence;
mod extractor;
mod fid;
mod kid;
mod report;
mod stats;

pub use confidence::{detection_confidence, summarize_confidences, ConfidenceSummary, HandDetector};
pub use extractor::{FeatureExtractor, RandomProjectionExtractor};
pub use fid::fid;
pub use kid::{kid, mmd2_unbiased, polynomial_kernel, KidConfig, KidEstimate};
pub use report::{evaluate_dirs, evaluate_features, extract_dir, list_images, MetricReport};
pub use stats::{accumulate_stats, FeatureStats, StatsAccumulator};
