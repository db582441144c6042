//! Feature-pair datasets, PCA reduction and synthetic mixtures with a
//! closed-form conditional oracle.

mod csv_import;
mod dataset;
mod pca;
mod presets;
mod synthetic;

pub use csv_import::{import_csv, read_csv};
pub use dataset::{
    load_dataset, read_dataset, save_dataset, write_dataset, DatasetMeta, PairDataset,
    DATASET_VERSION,
};
pub use pca::{pca_fit, pca_fit_whitened, reduce_dataset, PcaProjection};
pub use presets::{preset, PRESET_NAMES};
pub use synthetic::{synth_generate, MixtureComponent, SyntheticSpec};
