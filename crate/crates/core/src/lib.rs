#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod linalg;
pub mod sets;
pub mod divergences;
pub mod mappings;
pub mod proximity;
pub mod solver;
pub mod apps;
pub mod cli;
