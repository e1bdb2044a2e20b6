//! Geometry of labeled embedding spaces: silhouette and isotropy metrics,
//! the classification and triplet objectives that relate them, and a seeded
//! harness that optimises embeddings directly while tracking both.

pub mod adam;
pub mod datagen;
pub mod error;
pub mod geometry;
pub mod labels;
pub mod loss;
pub mod metrics;
pub mod objectives;
pub mod stats;
pub mod train;
pub mod trajectory;

pub use error::{Error, Result};
pub use geometry::{PointCloud, VarianceVector};
pub use labels::{Label, LabelAssignment};
pub use metrics::{aux_indices, isoscore, silhouette, AuxIndices, IndexValue, IsoScoreReport, SilhouetteReport};
pub use train::{run_experiment, LossKind, TrainConfig};
pub use trajectory::{Trajectory, TrajectoryRecord};
