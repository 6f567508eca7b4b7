//! Planning and validation toolkit for a wireless rechargeable sensor
//! network served by a single mobile charging base station.
//!
//! The pipeline clusters nodes, partitions each cluster into hexagonal
//! charging cells, builds charging tours, solves per-cluster and head-layer
//! charging/routing programs, composes them into a periodic joint schedule
//! and replays the result against battery limits.

pub mod clustering;
pub mod energy;
pub mod error;
pub mod hexgrid;
pub mod lp;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod schedule;
pub mod sim;
pub mod svg;
pub mod tour;

pub use scenario::{distance, Point, Scenario};
