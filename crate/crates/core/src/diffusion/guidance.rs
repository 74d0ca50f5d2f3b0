use crate::error::Result;
use crate::grid::Grid;
use crate::scalar::Real;

use super::denoiser::{Conditions, PairDenoiser, PairInput};

/// Guidance weights for text, camera, epipolar and Plücker conditioning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfgScales<T> {
    pub text: T,
    pub camera: T,
    pub epipolar: T,
    pub plucker: T,
}

impl<T: Real> CfgScales<T> {
    pub fn new(text: T, camera: T, epipolar: T, plucker: T) -> crate::error::Result<Self> {
        let s = Self {
            text,
            camera,
            epipolar,
            plucker,
        };
        if [text, camera, epipolar, plucker]
            .iter()
            .any(|v| !v.is_finite() || *v < T::zero())
        {
            return Err(crate::error::Error::invalid(
                "guidance scales must be finite and non-negative",
            ));
        }
        Ok(s)
    }

    /// Every scale 1: the composition collapses to the fully conditioned estimate.
    pub fn unit() -> Self {
        Self {
            text: T::one(),
            camera: T::one(),
            epipolar: T::one(),
            plucker: T::one(),
        }
    }

    /// Text-only guidance at 7.5, unit scales elsewhere.
    pub fn text_only() -> Self {
        Self {
            text: T::lit(7.5),
            ..Self::unit()
        }
    }
}

/// The five estimates of the guidance cascade for one latent, from fully
/// unconditional to fully conditioned.
#[derive(Debug, Clone, Copy)]
pub struct GuidanceLevels<'a, T> {
    pub null: &'a Grid<T>,
    pub text: &'a Grid<T>,
    pub text_camera: &'a Grid<T>,
    pub text_camera_epipolar: &'a Grid<T>,
    pub full: &'a Grid<T>,
}

/// `e∅ + s_T(e_T − e∅) + s_C(e_TC − e_T) + s_E(e_TCE − e_TC) + s_P(e_full − e_TCE)`.
///
/// Evaluated in the regrouped form
/// `(1 − s_T)e∅ + (s_T − s_C)e_T + (s_C − s_E)e_TC + (s_E − s_P)e_TCE + s_P·e_full`
/// so unit scales return `e_full` and zero scales return `e∅` bit-exactly.
pub fn cfg_compose<T: Real>(
    levels: GuidanceLevels<'_, T>,
    scales: &CfgScales<T>,
) -> Result<Grid<T>> {
    let grids = [
        levels.null,
        levels.text,
        levels.text_camera,
        levels.text_camera_epipolar,
        levels.full,
    ];
    for g in &grids[1..] {
        grids[0].ensure_same_shape(g)?;
    }
    let weights = [
        T::one() - scales.text,
        scales.text - scales.camera,
        scales.camera - scales.epipolar,
        scales.epipolar - scales.plucker,
        scales.plucker,
    ];
    let mut out = grids[0].map(|_| T::zero());
    for (g, w) in grids.iter().zip(weights) {
        for (o, v) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *o += w * *v;
        }
    }
    Ok(out)
}

/// Wraps a denoiser with layered classifier-free guidance: each call
/// evaluates the inner denoiser at all five cascade levels and composes.
#[derive(Debug, Clone)]
pub struct GuidedDenoiser<D, T> {
    pub inner: D,
    pub scales: CfgScales<T>,
}

impl<T: Real, D: PairDenoiser<T>> PairDenoiser<T> for GuidedDenoiser<D, T> {
    fn predict_noise(&self, input: &PairInput<'_, T>) -> Result<[Grid<T>; 2]> {
        let levels = (0..=4)
            .map(|level| {
                let call = PairInput {
                    active: Conditions::cascade(level),
                    ..*input
                };
                self.inner.predict_noise(&call)
            })
            .collect::<Result<Vec<_>>>()?;
        let compose = |k: usize| {
            cfg_compose(
                GuidanceLevels {
                    null: &levels[0][k],
                    text: &levels[1][k],
                    text_camera: &levels[2][k],
                    text_camera_epipolar: &levels[3][k],
                    full: &levels[4][k],
                },
                &self.scales,
            )
        };
        Ok([compose(0)?, compose(1)?])
    }
}
