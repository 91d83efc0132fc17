//! Datasets: seeded Gaussian blobs, long-tailed subsampling, IDX files and
//! synthetic out-of-distribution sets.

mod blobs;
mod dataset;
mod idx;
mod longtail;
mod ood;

pub use blobs::{gen_blobs, BlobSpec};
pub use dataset::{Dataset, OOD_LABEL};
pub use idx::{load_idx, write_idx_images, write_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use longtail::{make_longtail_profile, subsample_longtail, ImbalanceProfile};
pub use ood::{gen_ood, OodKind};
