//! Services built on `ivise-core`: the camera-side edge agent, the fog
//! coordinator and an in-process simulation harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clock;
pub mod config;
pub mod edge;
pub mod fog;
pub mod sim;
