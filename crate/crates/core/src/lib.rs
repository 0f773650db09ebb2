//! Runtime enforcement of signal temporal logic properties on sampled
//! piecewise-linear signals.

pub mod rational;
pub mod stl;
pub mod signal;
pub mod bench;
pub mod encoder;
pub mod enforcer;
pub mod transducer;
pub mod modifier;
pub mod monitor;
pub mod scenario;
