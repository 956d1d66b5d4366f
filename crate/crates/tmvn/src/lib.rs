//! Truncated multivariate normal distributions on the positive orthant.

pub mod normal;
