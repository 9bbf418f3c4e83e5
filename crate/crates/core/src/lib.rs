//! Steady periodic water waves with vorticity at a fixed Bernoulli constant.

pub mod continuation;
pub mod diagnostics;
pub mod dispersion;
pub mod fsutil;
pub mod grid;
pub mod heightfield;
pub mod quadrature;
pub mod roots;
pub mod scalar;
pub mod spline;
pub mod streamflow;
pub mod vorticity;

pub type Model = vorticity::VorticityModel<f64>;
pub type Regime = streamflow::FlowRegime<f64>;
pub type Stream = streamflow::StreamSolution<f64>;
pub type Seed = dispersion::BifurcationSeed<f64>;
