//! Signed-network asset selection and portfolio research.
//!
//! The pipeline: build a [`market_data::ReturnPanel`], score every asset by
//! how often its demeaned daily return moves against the rest of the market
//! ([`hedge_select`]), keep the top `K` by score times mean return, allocate
//! on that universe ([`allocate`]) and measure the result on the following
//! year ([`backtest`]). [`signed_graph`] holds the graph-side analytics.

pub mod allocate;
pub mod backtest;
pub mod error;
pub mod estimators;
pub mod fmt;
pub mod hedge_select;
pub mod market_data;
pub mod signed_graph;

pub use error::{Error, Result};
