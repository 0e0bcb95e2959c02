//! Convex lifting of the one-dimensional Mumford–Shah functional to positive
//! combinations of SBV graphs, with exact column calibrations, a constructive
//! decomposition into single graphs, and an exact discrete minimizer.

pub mod currents;
pub mod decompose;
pub mod lift;
pub mod sbv;
pub mod simplex;
pub mod solver;
