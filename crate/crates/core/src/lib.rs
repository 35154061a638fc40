// SPDX-License-Identifier: Apache-2.0

//! Probabilistic embodied-carbon modeling for semiconductor designs.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carbon;
pub mod distcore;
pub mod ingest;
pub mod params;
pub mod provision;
