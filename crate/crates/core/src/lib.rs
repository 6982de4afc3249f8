//! Hierarchical equations of motion for the FMO complex, with pairwise
//! Bell-CHSH nonlocality, concurrence and l1 coherence along the trajectory.

pub mod analysis;
pub mod error;
pub mod heom;
pub mod hierarchy;
pub mod integrate;
pub mod linalg;
pub mod measures;
pub mod model;
pub mod series;

pub use error::{Error, Result};
pub use heom::{HeomModel, HierarchyState};
pub use hierarchy::HierarchyIndexSpace;
pub use integrate::{integrate, IntegratorConfig, OutputGrid, Trajectory};
pub use linalg::ComplexMatrix;
pub use measures::{PairMeasures, ReducedPairState};
pub use model::{ExcitonBasis, SystemParams, UnitSystem};
pub use series::CorrelationTimeSeries;
