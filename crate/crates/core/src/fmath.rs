//! Float functions for `no_std`, backed by `libm`.

pub use libm::{
    cosh, exp, expm1, fabs as abs, log as ln, log1p, pow as powf, sin, sinh, sqrt, tgamma,
};

pub const PI: f64 = core::f64::consts::PI;
