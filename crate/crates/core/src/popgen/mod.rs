//! Synthetic populations with correlated census/survey capture.

mod capture;
mod geography;
mod keys;
mod population;

pub use capture::{
    joint_cell_probs, CaptureModel, CaptureOverride, CaptureParams, HardToCount, JointCells, StratumSelector,
};
pub use geography::{Area, AreaSpec, Geography, GeographySpec};
pub use keys::{AreaKey, DemographicGroup, GeographyKey, PostStratumKey, Tenure};
pub use population::{
    generate_population, true_totals, CellCount, CountsSpec, Field, GroupKey, Person, Population, PopulationConfig,
    PopulationSpec,
};
