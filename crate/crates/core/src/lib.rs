//! Anchor-point assignment for synthetic populations.
//!
//! Persons with a residence district receive a residence cell, an occupation,
//! an industry field, a work district and finally a work cell on a regular
//! grid. Every random draw comes from a stream keyed by seed, stage and
//! entity id, so results do not depend on thread count or iteration order.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the pipeline uses.

pub mod apportion;
pub mod distributions;
pub mod error;
pub mod ingest;
pub mod lastmile;
pub mod model;
pub mod nace;
pub mod num;
pub mod pipeline;
pub mod report;
pub mod residence;
pub mod subzone;

pub use error::{Error, Result};
pub use model::{
    CellClass, CellId, District, DistrictId, Gender, HouseholdId, LandUse, Person, PersonId,
    Purpose, NOT_EMPLOYED, OTHER_FIELD,
};
pub use num::Real;
pub use pipeline::Stage;

pub type Grid = model::Grid<f64>;
pub type Cell = model::Cell<f64>;
pub type WeightConfig = model::WeightConfig<f64>;
pub type ConditionalTable = distributions::ConditionalTable<f64>;
pub type OdMatrix = report::OdMatrix<f64>;

pub type Grid32 = model::Grid<f32>;
pub type Cell32 = model::Cell<f32>;
pub type WeightConfig32 = model::WeightConfig<f32>;
