//! Exact, certificate-producing checks for coarse geometry on finite metric spaces.

pub mod budget;
pub mod builders;
pub mod cliques;
pub mod coarse_maps;
pub mod coloring;
pub mod covers;
pub mod dimension;
pub mod dist;
pub mod error;
pub mod fit;
pub mod metric;
pub mod precode;
pub mod verify;

mod bitset;

pub use budget::Budgets;
pub use coarse_maps::{CoarseMap, CoarseMapRecord};
pub use covers::{Cover, DisjointFamilyList};
pub use dist::{Dist, DistRatio};
pub use error::{Error, Result};
pub use metric::{FiniteMetricSpace, MetricSpace, Norm, PointSet, ProductSpace, SpaceRef, Walk};
