//! Scalar model constants shared by every sampler and evaluator.

use crate::error::{param, Result};
use crate::pointproc::Window;

/// Power-law attenuation `l(r) = (A r)^beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub a: f64,
    pub beta: f64,
    /// `beta / 2` when it is a small integer, so squared distances can use `powi`.
    half_beta_int: Option<i32>,
}

impl PathLoss {
    pub fn new(a: f64, beta: f64) -> Self {
        let half = beta / 2.0;
        let half_beta_int = if half.fract() == 0.0 && half.abs() < 32.0 {
            Some(half as i32)
        } else {
            None
        };
        PathLoss {
            a,
            beta,
            half_beta_int,
        }
    }

    /// `l(r)`.
    pub fn loss(&self, r: f64) -> f64 {
        (self.a * r).powf(self.beta)
    }

    /// `1 / l(d)` from the squared distance `d2`.
    #[inline]
    pub fn gain_sq(&self, d2: f64) -> f64 {
        let x = self.a * self.a * d2;
        match self.half_beta_int {
            Some(k) => 1.0 / x.powi(k),
            None => 1.0 / x.powf(0.5 * self.beta),
        }
    }

    /// Largest `r` with `l(r) <= value`.
    pub fn inverse(&self, value: f64) -> f64 {
        value.powf(1.0 / self.beta) / self.a
    }
}

/// Law of the thermal noise `W_j(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLaw {
    Off,
    Constant(f64),
    Exponential { mean: f64 },
}

impl NoiseLaw {
    /// Almost-sure lower bound of the noise.
    pub fn floor(&self) -> f64 {
        match *self {
            NoiseLaw::Constant(w) => w,
            _ => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            NoiseLaw::Off => 0.0,
            NoiseLaw::Constant(w) => w,
            NoiseLaw::Exponential { mean } => mean,
        }
    }
}

/// Law of the fading variables `F_{i,j}(n)`.
///
/// `Quantile` takes an inverse CDF on `[0, 1)`; its `mean` must be finite and
/// the function nondecreasing.
#[derive(Debug, Clone, Copy)]
pub enum FadingLaw {
    Exponential { mu: f64 },
    Quantile { quantile: fn(f64) -> f64, mean: f64 },
}

impl FadingLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            FadingLaw::Exponential { mu } => 1.0 / mu,
            FadingLaw::Quantile { mean, .. } => mean,
        }
    }

    /// Rate of the exponential law, if that is the law in use.
    pub fn exponential_rate(&self) -> Option<f64> {
        match *self {
            FadingLaw::Exponential { mu } => Some(mu),
            FadingLaw::Quantile { .. } => None,
        }
    }

    /// Largest value the mark generator can ever produce for this law.
    pub fn max_value(&self) -> f64 {
        match *self {
            FadingLaw::Exponential { mu } => crate::marks::MAX_UNIT_EXPONENTIAL / mu,
            FadingLaw::Quantile { quantile, .. } => quantile(crate::marks::MAX_UNIT_OPEN),
        }
    }
}

/// Every scalar constant of the model.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Intensity of the Poisson component.
    pub lambda_m: f64,
    /// Step of the shifted grid component, when present.
    pub grid_step: Option<f64>,
    pub aloha_p: f64,
    pub fading: FadingLaw,
    pub threshold: f64,
    pub pathloss: PathLoss,
    pub noise: NoiseLaw,
    pub window: Window,
    pub seed: u64,
}

impl ModelParams {
    /// Poisson model with exponential fading and the given threshold/noise on `window`.
    #[allow(clippy::too_many_arguments)]
    pub fn poisson(lambda: f64, p: f64, mu: f64, t: f64, a: f64, beta: f64, noise: NoiseLaw, window: Window) -> Self {
        ModelParams {
            lambda_m: lambda,
            grid_step: None,
            aloha_p: p,
            fading: FadingLaw::Exponential { mu },
            threshold: t,
            pathloss: PathLoss::new(a, beta),
            noise,
            window,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_grid(mut self, step: f64) -> Self {
        self.grid_step = Some(step);
        self
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = t;
        self
    }

    pub fn with_noise(mut self, noise: NoiseLaw) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.aloha_p > 0.0 && self.aloha_p < 1.0) {
            return param(format!("aloha_p must lie in (0,1), got {}", self.aloha_p));
        }
        if !(self.pathloss.beta > 2.0) {
            return param(format!("pathloss_beta must exceed 2, got {}", self.pathloss.beta));
        }
        if !(self.pathloss.a > 0.0) {
            return param(format!("pathloss_A must be positive, got {}", self.pathloss.a));
        }
        if !(self.threshold > 0.0) {
            return param(format!("threshold_T must be positive, got {}", self.threshold));
        }
        if !(self.lambda_m >= 0.0) {
            return param(format!("lambda_M must be nonnegative, got {}", self.lambda_m));
        }
        match self.fading {
            FadingLaw::Exponential { mu } if !(mu > 0.0) => {
                return param(format!("fading_mu must be positive, got {mu}"));
            }
            FadingLaw::Quantile { mean, .. } if !(mean.is_finite() && mean > 0.0) => {
                return param("fading law must have a finite positive mean");
            }
            _ => {}
        }
        match self.noise {
            NoiseLaw::Constant(w) if !(w > 0.0) => return param("constant noise must be positive"),
            NoiseLaw::Exponential { mean } if !(mean > 0.0) => {
                return param("exponential noise mean must be positive")
            }
            _ => {}
        }
        if let Some(s) = self.grid_step {
            if !(s > 0.0) {
                return param(format!("grid_step_s must be positive, got {s}"));
            }
        }
        if self.lambda_m == 0.0 && self.grid_step.is_none() {
            return param("model has neither a Poisson nor a grid component");
        }
        self.window.validate()
    }

    /// Total intensity `lambda_M + 1/s^2`.
    pub fn intensity(&self) -> f64 {
        self.lambda_m + self.grid_step.map_or(0.0, |s| 1.0 / (s * s))
    }

    /// Radius beyond which no SNR (hence no SINR) edge can exist, given that
    /// fading marks are bounded and the noise has a positive floor.
    pub fn link_cutoff(&self) -> Option<f64> {
        let floor = self.noise.floor();
        if floor <= 0.0 {
            return None;
        }
        let max_loss = self.fading.max_value() / (self.threshold * floor);
        Some(self.pathloss.inverse(max_loss) * (1.0 + 1e-9))
    }
}
