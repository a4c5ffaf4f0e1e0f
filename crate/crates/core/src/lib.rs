//! Numerical laboratory for partially hyperbolic endomorphisms of the 2-torus.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conjugacy;
pub mod foliation;
pub mod geometry;
pub mod incoherent;
pub mod lab;
pub mod models;
pub mod polyline;
pub mod semiconjugacy;
