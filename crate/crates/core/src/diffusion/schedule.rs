use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Real;

/// Number of training timesteps the base schedule is defined over.
pub const BASE_STEPS: usize = 1000;
pub const BETA_START: f64 = 0.00085;
pub const BETA_END: f64 = 0.012;

/// Cumulative signal rates `ᾱ` for `T` inference steps.
///
/// Timestep `t` ranges over `0..=T`: `t = 0` is the clean sample with
/// `ᾱ = 1`, and `t ≥ 1` reads `alpha_bar[t - 1]`, which decreases strictly
/// as `t` grows.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule<T> {
    alpha_bar: Vec<T>,
}

impl<T: Real> DiffusionSchedule<T> {
    /// Builds a schedule from explicit values, which must be strictly
    /// decreasing and lie in `(0, 1]`.
    pub fn from_alpha_bar(alpha_bar: Vec<T>) -> Result<Self> {
        if alpha_bar.is_empty() {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if alpha_bar
            .iter()
            .any(|a| !(*a > T::zero() && *a <= T::one()))
        {
            return Err(Error::invalid("alpha_bar values must lie in (0, 1]"));
        }
        if alpha_bar.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("alpha_bar must be strictly decreasing"));
        }
        Ok(Self { alpha_bar })
    }

    pub fn steps(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn alpha_bar(&self) -> &[T] {
        &self.alpha_bar
    }

    /// `ᾱ_t`; exactly 1 at `t = 0`.
    pub fn alpha_bar_at(&self, t: usize) -> Result<T> {
        match t {
            0 => Ok(T::one()),
            t if t <= self.steps() => Ok(self.alpha_bar[t - 1]),
            t => Err(Error::invalid(format!(
                "timestep {t} outside schedule of {} steps",
                self.steps()
            ))),
        }
    }
}

/// Scaled-linear betas over [`BASE_STEPS`], subsampled to `steps` entries at
/// base indices `⌊(k+1)·1000/steps⌋ − 1`, so the last entry is always the
/// noisiest base step.
pub fn make_schedule<T: Real>(steps: usize) -> Result<DiffusionSchedule<T>> {
    if steps == 0 || steps > BASE_STEPS {
        return Err(Error::invalid(format!(
            "schedule steps must lie in 1..={BASE_STEPS}, got {steps}"
        )));
    }
    let (lo, hi) = (BETA_START.sqrt(), BETA_END.sqrt());
    let mut base = Vec::with_capacity(BASE_STEPS);
    let mut prod = 1.0f64;
    for i in 0..BASE_STEPS {
        let s = lo + (hi - lo) * i as f64 / (BASE_STEPS - 1) as f64;
        prod *= 1.0 - s * s;
        base.push(prod);
    }
    let alpha_bar = (0..steps)
        .map(|k| T::lit(base[(k + 1) * BASE_STEPS / steps - 1]))
        .collect();
    DiffusionSchedule::from_alpha_bar(alpha_bar)
}

/// `x_t = √ᾱ_t · x0 + √(1 − ᾱ_t) · ε`.
pub fn forward_noise<T: Real>(
    x0: &Grid<T>,
    t: usize,
    sched: &DiffusionSchedule<T>,
    eps: &Grid<T>,
) -> Result<Grid<T>> {
    let ab = sched.alpha_bar_at(t)?;
    let (a, b) = (ab.sqrt(), (T::one() - ab).sqrt());
    x0.zip_map(eps, |x, e| a * x + b * e)
}

/// Deterministic DDIM update (η = 0) from `t` to `t_prev < t`.
pub fn ddim_step<T: Real>(
    x_t: &Grid<T>,
    eps_hat: &Grid<T>,
    t: usize,
    t_prev: usize,
    sched: &DiffusionSchedule<T>,
) -> Result<Grid<T>> {
    if t_prev >= t {
        return Err(Error::invalid(format!(
            "DDIM step must move to an earlier timestep ({t} -> {t_prev})"
        )));
    }
    let ab_t = sched.alpha_bar_at(t)?;
    let ab_prev = sched.alpha_bar_at(t_prev)?;
    let (sa, sb) = (ab_t.sqrt(), (T::one() - ab_t).sqrt());
    let x0_pred = x_t.zip_map(eps_hat, |x, e| (x - sb * e) / sa)?;
    if t_prev == 0 {
        return Ok(x0_pred);
    }
    let (pa, pb) = (ab_prev.sqrt(), (T::one() - ab_prev).sqrt());
    x0_pred.zip_map(eps_hat, |x0, e| pa * x0 + pb * e)
}
