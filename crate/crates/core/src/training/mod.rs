//! Fine-tuning the control branch with the mask-normalized loss while the
//! base denoiser stays frozen, plus manifest-driven dataset ingestion.

mod data;
mod loss;
mod optim;
mod trainer;

pub use data::{crop_origin, ingest_dataset, read_manifest, write_manifest, IngestConfig, Ingested, ManifestRecord, RecordStyle};
pub use loss::{inpaint_loss, inpaint_loss_grad};
pub use optim::{AdamW, AdamWConfig};
pub use trainer::{
    make_input, sha256_hex, train, train_step, Checkpoint, FrozenPartition, TrainConfig, TrainContext, TrainInput,
    TrainReport, TrainSample, TrainableControl,
};
