//! Operator calculus on quotients `f/H^k`, where `H` is the Heaviside
//! function and the product is the convolution `∫_0^x f(t) g(x-t) dt`.

pub mod error;
pub mod algebra;
pub mod cli;
pub mod cesaro;
pub mod expr;
pub mod localization;
pub mod numerics;
pub mod special;
pub mod transforms;
