//! Closed forms and quadratures used as ground truth for the Monte Carlo side.
//!
//! All functions are pure. They refuse parameter combinations without a
//! closed form (non-exponential fading, grid components where a Poisson
//! formula is needed) instead of approximating.

pub mod quad;

use std::f64::consts::PI;

use crate::error::{param, Error, Result};
use crate::params::{ModelParams, NoiseLaw};
use crate::pointproc::{Origin, PointPattern, Position};

pub use quad::ABS_TOL;

/// `L_W(xi) = E[exp(-xi W)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLaplace {
    pub law: NoiseLaw,
}

impl NoiseLaplace {
    pub fn new(law: NoiseLaw) -> Self {
        NoiseLaplace { law }
    }

    pub fn eval(&self, xi: f64) -> f64 {
        match self.law {
            NoiseLaw::Off => 1.0,
            NoiseLaw::Constant(w) => (-xi * w).exp(),
            NoiseLaw::Exponential { mean } => 1.0 / (1.0 + xi * mean),
        }
    }
}

/// Laplace transform of `e F'` with `e ~ Bernoulli(p)`, `F' ~ Exp(1)`.
pub fn aloha_fading_laplace(p: f64, xi: f64) -> f64 {
    1.0 - p + p / (1.0 + xi)
}

fn exponential_mu(params: &ModelParams) -> Result<f64> {
    params
        .fading
        .exponential_rate()
        .ok_or_else(|| Error::Unsupported("closed form requires exponential fading".into()))
}

fn require_pure_poisson(params: &ModelParams) -> Result<()> {
    if params.grid_step.is_some() {
        return Err(Error::Unsupported("closed form requires a pure Poisson model".into()));
    }
    if !(params.lambda_m > 0.0) {
        return param("Poisson intensity must be positive");
    }
    Ok(())
}

/// `pi_{i,j}(Phi)`: probability that the link `i -> j` succeeds in a slot, given the pattern.
pub fn success_prob_given_pattern(pattern: &PointPattern, params: &ModelParams, i: usize, j: usize) -> Result<f64> {
    let mu = exponential_mu(params)?;
    if i == j {
        return Err(Error::Domain(format!("success probability of the self link {i}")));
    }
    if i.max(j) >= pattern.len() {
        return Err(Error::Domain(format!("node ids {i},{j} not in pattern")));
    }
    let p = params.aloha_p;
    let t = params.threshold;
    let pl = &params.pathloss;
    let l_ij = 1.0 / pl.gain_sq(pattern.dist_sq(i, j));
    let mut prod = p * (1.0 - p) * NoiseLaplace::new(params.noise).eval(t * mu * l_ij);
    for k in 0..pattern.len() {
        if k != i && k != j {
            // T d_ij^beta / d_kj^beta, the A^beta factors cancel
            let xi = t * l_ij * pl.gain_sq(pattern.dist_sq(k, j));
            prod *= aloha_fading_laplace(p, xi);
        }
    }
    Ok(prod)
}

/// `E[L_{i,j}(0) | Phi] = 1 / pi_{i,j}(Phi)`.
pub fn mean_local_delay_given_pattern(pattern: &PointPattern, params: &ModelParams, i: usize, j: usize) -> Result<f64> {
    Ok(1.0 / success_prob_given_pattern(pattern, params, i, j)?)
}

/// Exact conditional mean together with its three-factor upper bound for a
/// Poisson+Grid pattern with both endpoints inside `B_0(radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalDelayBound {
    pub exact: f64,
    pub bound: f64,
    /// `1 / (p (1-p) L_W(T mu (2 A R)^beta))`.
    pub prefactor: f64,
    /// Grid term.
    pub a: f64,
    /// Near-field Poisson term.
    pub b: f64,
    /// Far-field Poisson term.
    pub c: f64,
}

/// Number of grid points within `3 sqrt(2) s` of a receiver used by the grid
/// term of the bound.
pub const GRID_NEAR_COUNT: f64 = 49.0;

/// Conditional mean local delay and its upper bound. Every non-grid point of
/// the pattern (Poisson or Palm) is treated as part of the Poisson component.
pub fn local_delay_bound(
    pattern: &PointPattern,
    params: &ModelParams,
    i: usize,
    j: usize,
    radius: f64,
) -> Result<LocalDelayBound> {
    let mu = exponential_mu(params)?;
    let s = params
        .grid_step
        .ok_or_else(|| Error::Unsupported("the local delay bound needs a grid component".into()))?;
    let exact = mean_local_delay_given_pattern(pattern, params, i, j)?;
    let window = pattern.window();
    let r_of = |k: usize| window.dist_sq(Position::ORIGIN, pattern.position(k)).sqrt();
    for k in [i, j] {
        if r_of(k) > radius {
            return Err(Error::Domain(format!("node {k} lies outside B_0({radius})")));
        }
    }
    let p = params.aloha_p;
    let t = params.threshold;
    let beta = params.pathloss.beta;
    let two_r_beta = (2.0 * radius).powf(beta);
    let prefactor =
        1.0 / (p * (1.0 - p) * NoiseLaplace::new(params.noise).eval(t * mu * params.pathloss.loss(2.0 * radius)));
    let log_q = (1.0 - p).ln();
    let a = (-GRID_NEAR_COUNT * log_q + two_r_beta * p * t * c_s_beta_closed(s, beta)?).exp();
    let mut near = 0usize;
    let mut far_log = 0.0;
    for k in 0..pattern.len() {
        if pattern.nodes()[k].origin == Origin::Grid {
            continue;
        }
        let rk = r_of(k);
        if rk <= 2.0 * radius {
            near += 1;
        } else {
            let g = (rk - radius).powf(beta);
            far_log -= (1.0 - p + p * g / (g + t * two_r_beta)).ln();
        }
    }
    let b = (-(near as f64) * log_q).exp();
    let c = far_log.exp();
    Ok(LocalDelayBound {
        exact,
        bound: prefactor * a * b * c,
        prefactor,
        a,
        b,
        c,
    })
}

/// `C(s, beta) = (2 pi / s^2) int_{sqrt2 s}^inf (t + sqrt2 s) t^-beta dt`, by quadrature.
pub fn c_s_beta(s: f64, beta: f64) -> Result<f64> {
    check_c_args(s, beta)?;
    let a = std::f64::consts::SQRT_2 * s;
    let inner = quad::integrate_to_infinity(|t| (t + a) * t.powf(-beta), a, a, ABS_TOL * 1e-2)?;
    Ok(2.0 * PI / (s * s) * inner)
}

/// Antiderivative form of [`c_s_beta`].
pub fn c_s_beta_closed(s: f64, beta: f64) -> Result<f64> {
    check_c_args(s, beta)?;
    let a = std::f64::consts::SQRT_2 * s;
    Ok(2.0 * PI / (s * s) * a.powf(2.0 - beta) * (1.0 / (beta - 2.0) + 1.0 / (beta - 1.0)))
}

fn check_c_args(s: f64, beta: f64) -> Result<()> {
    if !(s > 0.0) {
        return param(format!("grid step must be positive, got {s}"));
    }
    if !(beta > 2.0) {
        return Err(Error::Divergent(format!("C(s, beta) diverges for beta = {beta} <= 2")));
    }
    Ok(())
}

fn check_beta(params: &ModelParams) -> Result<()> {
    if !(params.pathloss.beta > 2.0) {
        return Err(Error::Divergent(format!(
            "interference integrals diverge for beta = {} <= 2",
            params.pathloss.beta
        )));
    }
    Ok(())
}

/// `int_0^inf v T l(r) / (l(v) + (1-p) T l(r)) dv` by quadrature in `u = v^2`.
pub fn local_delay_exponent_integral(r: f64, params: &ModelParams) -> Result<f64> {
    check_beta(params)?;
    let pl = &params.pathloss;
    let tl = params.threshold * pl.loss(r);
    if tl == 0.0 {
        return Ok(0.0);
    }
    let shift = (1.0 - params.aloha_p) * tl;
    // v dv = du / 2 and l(v) = (A^2 u)^(beta/2)
    let g = |u: f64| 0.5 * tl / ((pl.a * pl.a * u).powf(0.5 * pl.beta) + shift);
    // the integrand is flat up to l(v) ~ shift, i.e. u ~ shift^(2/beta) / A^2
    let scale = shift.powf(2.0 / pl.beta) / (pl.a * pl.a);
    quad::integrate_to_infinity(g, 0.0, scale.max(1e-300), ABS_TOL)
}

/// Closed form of [`local_delay_exponent_integral`]:
/// `T l(r) A^-beta c^(2/beta - 1) pi / (beta sin(2 pi / beta))` with
/// `c = (1-p) T l(r) / A^beta`.
pub fn local_delay_exponent_closed(r: f64, params: &ModelParams) -> Result<f64> {
    check_beta(params)?;
    let pl = &params.pathloss;
    let beta = pl.beta;
    let tl = params.threshold * pl.loss(r);
    if tl == 0.0 {
        return Ok(0.0);
    }
    let a_beta = pl.a.powf(beta);
    let c = (1.0 - params.aloha_p) * tl / a_beta;
    Ok(tl / a_beta * c.powf(2.0 / beta - 1.0) * PI / (beta * (2.0 * PI / beta).sin()))
}

/// `E^{X,Y}[L_{X,Y}(0)]` for Palm points at distance `r` in a Poisson model.
pub fn mean_local_delay_poisson(r: f64, params: &ModelParams) -> Result<f64> {
    check_beta(params)?;
    let mu = exponential_mu(params)?;
    require_pure_poisson(params)?;
    if !(r >= 0.0) {
        return param(format!("distance must be nonnegative, got {r}"));
    }
    let p = params.aloha_p;
    let j = local_delay_exponent_integral(r, params)?;
    let lw = NoiseLaplace::new(params.noise).eval(mu * params.pathloss.loss(r) * params.threshold);
    Ok((2.0 * PI * p * params.lambda_m * j).exp() / (p * (1.0 - p) * lw))
}

/// Palm mean of the interference from transmitters farther than `eps`.
pub fn campbell_interference(eps: f64, params: &ModelParams) -> Result<f64> {
    check_campbell(eps, params)?;
    let pl = &params.pathloss;
    let beta = pl.beta;
    Ok(2.0 * PI * params.aloha_p * params.lambda_m * params.fading.mean() * eps.powf(2.0 - beta)
        / (pl.a.powf(beta) * (beta - 2.0)))
}

/// [`campbell_interference`] by quadrature of `2 pi p lambda E[F] int_eps^inf r / l(r) dr`.
pub fn campbell_interference_quadrature(eps: f64, params: &ModelParams) -> Result<f64> {
    check_campbell(eps, params)?;
    let pl = params.pathloss;
    let inner = quad::integrate_to_infinity(|r| r / pl.loss(r), eps, eps, ABS_TOL * 1e-2)?;
    Ok(2.0 * PI * params.aloha_p * params.lambda_m * params.fading.mean() * inner)
}

fn check_campbell(eps: f64, params: &ModelParams) -> Result<()> {
    check_beta(params)?;
    require_pure_poisson(params)?;
    if eps == 0.0 {
        return Err(Error::Divergent("near-field interference diverges at eps = 0".into()));
    }
    if !(eps > 0.0) {
        return param(format!("exclusion radius must be positive, got {eps}"));
    }
    Ok(())
}

/// Components of the SNR-trial tail at the typical node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub lambda: f64,
    pub p: f64,
    pub beta: f64,
    pub a: f64,
    /// `K = w mu T A^beta`; zero when the noise is off.
    pub k: f64,
}

/// One row of a [`TailCurve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPoint {
    pub q: f64,
    /// `P^0{T^ > q}`.
    pub exact: f64,
    /// `exp(-pi lambda (v_q + 1/K))`.
    pub lower_bound: f64,
    /// `1/q`.
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailCurve {
    pub model: TailModel,
    pub points: Vec<TailPoint>,
}

impl TailModel {
    pub fn new(params: &ModelParams) -> Result<Self> {
        check_beta(params)?;
        let mu = exponential_mu(params)?;
        require_pure_poisson(params)?;
        let w = match params.noise {
            NoiseLaw::Off => 0.0,
            NoiseLaw::Constant(w) => w,
            NoiseLaw::Exponential { .. } => {
                return Err(Error::Unsupported(
                    "exact SNR-trial survival needs constant (or no) noise".into(),
                ))
            }
        };
        let pl = params.pathloss;
        Ok(TailModel {
            lambda: params.lambda_m,
            p: params.aloha_p,
            beta: pl.beta,
            a: pl.a,
            k: w * mu * params.threshold * pl.a.powf(pl.beta),
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.k == 0.0
    }

    /// `f(u) = (1-p) exp(-K u^(beta/2))`, success chance towards a point at squared distance `u`.
    pub fn f(&self, u: f64) -> f64 {
        (1.0 - self.p) * (-self.k * u.powf(0.5 * self.beta)).exp()
    }

    /// `v_q`: where `f` crosses `1/q`, in the squared-distance variable.
    /// Zero when `q (1-p) <= 1`.
    pub fn v_q(&self, q: f64) -> f64 {
        self.v_q_log(q.ln())
    }

    /// [`Self::v_q`] from `ln q`, usable far beyond the range of `f64` for `q`.
    pub fn v_q_log(&self, ln_q: f64) -> f64 {
        let l = ln_q + (1.0 - self.p).ln();
        if l <= 0.0 {
            return 0.0;
        }
        (l / self.k).powf(2.0 / self.beta)
    }

    fn miss(&self, u: f64, q: f64) -> f64 {
        // 1 - (1 - f)^q without cancellation
        -(q * (-self.f(u)).ln_1p()).exp_m1()
    }

    /// `int_0^inf (1 - (1 - f(u))^q) du`.
    pub fn exponent_u(&self, q: f64) -> Result<f64> {
        if q == 0.0 {
            return Ok(0.0);
        }
        let scale = self.v_q(q).max((1.0 / self.k).powf(2.0 / self.beta));
        quad::integrate_to_infinity(|u| self.miss(u, q), 0.0, scale, ABS_TOL)
    }

    /// `2 int_0^inf (1 - (1 - f(v^2))^q) v dv`; equal to [`Self::exponent_u`] under `u = v^2`.
    pub fn exponent_v(&self, q: f64) -> Result<f64> {
        if q == 0.0 {
            return Ok(0.0);
        }
        let scale = self.v_q(q).max((1.0 / self.k).powf(2.0 / self.beta)).sqrt();
        quad::integrate_to_infinity(|v| 2.0 * v * self.miss(v * v, q), 0.0, scale, ABS_TOL)
    }

    /// `ln P^0{T^ > q}`.
    pub fn log_survival(&self, q: f64) -> Result<f64> {
        Ok(-PI * self.lambda * self.exponent_u(q)?)
    }

    /// `ln` of the lower bound `exp(-pi lambda (v_q + 1/K))`.
    pub fn log_lower_bound(&self, q: f64) -> f64 {
        self.log_lower_bound_log(q.ln())
    }

    /// [`Self::log_lower_bound`] from `ln q`.
    pub fn log_lower_bound_log(&self, ln_q: f64) -> f64 {
        -PI * self.lambda * (self.v_q_log(ln_q) + 1.0 / self.k)
    }

    pub fn point(&self, q: f64) -> Result<TailPoint> {
        if !(q >= 0.0) {
            return param(format!("tail index must be nonnegative, got {q}"));
        }
        if self.is_degenerate() {
            // one attempt always succeeds when some other node listens
            let s = if q < 1.0 { 1.0 } else { 0.0 };
            return Ok(TailPoint {
                q,
                exact: s,
                lower_bound: 0.0,
                reference: 1.0 / q,
            });
        }
        Ok(TailPoint {
            q,
            exact: self.log_survival(q)?.exp(),
            lower_bound: self.log_lower_bound(q).exp(),
            reference: 1.0 / q,
        })
    }

    /// `ln Q`: past this point the lower bound stays above `1/q`.
    pub fn log_crossover(&self) -> Result<f64> {
        if self.is_degenerate() {
            return Err(Error::Unsupported("no heavy tail without noise".into()));
        }
        // g(L) = ln(bound at q = e^L) + L is convex in L, negative at the
        // start and tends to +inf, so it has a single root
        let g = |l: f64| self.log_lower_bound_log(l) + l;
        let mut lo = -(1.0 - self.p).ln();
        let mut hi = lo.max(1.0);
        while g(hi) <= 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::Numerical("tail crossover not found below q = e^1e6".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Exact survival of the SNR trial count at the typical node with the
/// asymptotic bound and `1/q` overlay, at each requested `q`.
pub fn snr_trial_survival(qs: &[u64], params: &ModelParams) -> Result<TailCurve> {
    let model = TailModel::new(params)?;
    let points = qs.iter().map(|&q| model.point(q as f64)).collect::<Result<Vec<_>>>()?;
    Ok(TailCurve { model, points })
}
