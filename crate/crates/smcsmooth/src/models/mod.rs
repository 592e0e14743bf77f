//! Concrete state-space models and their exact oracles.

pub mod linear_gaussian;
pub mod lotka_volterra;

pub use linear_gaussian::{
    kalman_filter_smoother, GaussianMoments, KalmanResult, LgFeynmanKac, LinearGaussianModel,
};
pub use lotka_volterra::{LotkaVolterraSde, LvFeynmanKac};
