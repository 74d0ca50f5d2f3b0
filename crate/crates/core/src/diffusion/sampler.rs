use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::camera::{relative_pose, CameraPose, Intrinsics};
use crate::epipolar::{build_mask_set, EpipolarMaskSet};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::plucker::{plucker_grid, PluckerGrid};
use crate::scalar::Real;

use super::denoiser::{Conditions, PairDenoiser, PairInput};
use super::pairing::pair_schedule;
use super::schedule::{ddim_step, forward_noise, make_schedule};

pub const DEFAULT_STEPS: usize = 200;
pub const DEFAULT_BLOB_STEPS: usize = 20;

/// Dark Gaussian blob on a white background:
/// `1 − exp(−((u − cx)² + (v − cy)²) / 2σ²)` at pixel centers, same value in every channel.
pub fn blob_init<T: Real>(
    height: usize,
    width: usize,
    channels: usize,
    sigma: T,
) -> Result<Grid<T>> {
    if sigma.is_nan() || sigma <= T::zero() {
        return Err(Error::invalid(format!(
            "blob sigma must be positive, got {sigma}"
        )));
    }
    let half = T::lit(0.5);
    let cx = T::from_usize_lossy(width) * half;
    let cy = T::from_usize_lossy(height) * half;
    let denom = T::lit(2.0) * sigma * sigma;
    Ok(Grid::from_fn(height, width, channels, |r, c, _| {
        let du = T::from_usize_lossy(c) + half - cx;
        let dv = T::from_usize_lossy(r) + half - cy;
        T::one() - (-(du * du + dv * dv) / denom).exp()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub steps: usize,
    /// Leading timesteps whose latents are replaced by a noised blob image.
    pub blob_steps: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            blob_steps: DEFAULT_BLOB_STEPS,
            seed: 0,
        }
    }
}

fn gaussian_grid<T: Real>(shape: (usize, usize, usize), rng: &mut ChaCha8Rng) -> Grid<T> {
    Grid::from_fn(shape.0, shape.1, shape.2, |_, _, _| {
        let x: f64 = StandardNormal.sample(rng);
        T::lit(x)
    })
}

/// Jointly samples one image per pose with a two-view denoiser.
///
/// Every timestep pairs the views by [`pair_schedule`] (rounds advance with
/// the step index), denoises each pair at the same noise level and moves
/// every latent one DDIM step. During the first `blob_steps` steps each
/// latent is first replaced by the blob image noised to the current level.
/// All randomness is drawn up front from `seed`, so the result does not
/// depend on how pairs are scheduled across threads.
///
/// With `feature_intrinsics`, two-view epipolar masks and per-view Plücker
/// grids at that resolution are handed to the denoiser.
pub fn joint_multiview_sample<T: Real, D: PairDenoiser<T>>(
    denoiser: &D,
    poses: &[CameraPose<T>],
    condition: &[T],
    shape: (usize, usize, usize),
    config: &SamplerConfig,
    feature_intrinsics: Option<&Intrinsics<T>>,
) -> Result<Vec<Grid<T>>> {
    let m = poses.len();
    if m < 2 {
        return Err(Error::invalid(format!(
            "joint sampling needs at least 2 views, got {m}"
        )));
    }
    if config.blob_steps > config.steps {
        return Err(Error::invalid(format!(
            "blob steps ({}) exceed sampling steps ({})",
            config.blob_steps, config.steps
        )));
    }
    let (h, w, c) = shape;
    if h == 0 || w == 0 || c == 0 {
        return Err(Error::invalid("latent shape must be non-empty"));
    }
    let sched = make_schedule::<T>(config.steps)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut latents: Vec<Grid<T>> = (0..m).map(|_| gaussian_grid(shape, &mut rng)).collect();
    let blob_noise: Vec<Vec<Grid<T>>> = (0..config.blob_steps)
        .map(|_| (0..m).map(|_| gaussian_grid(shape, &mut rng)).collect())
        .collect();
    let blob = blob_init(h, w, c, T::from_usize_lossy(w) / T::lit(8.0))?;

    let plucker: Option<Vec<PluckerGrid<T>>> =
        feature_intrinsics.map(|intr| poses.iter().map(|p| plucker_grid(p, intr)).collect());
    let mut masks: HashMap<(usize, usize), EpipolarMaskSet> = HashMap::new();

    for k in 0..config.steps {
        let t = config.steps - k;
        if let Some(noise) = blob_noise.get(k) {
            for (x, eps) in latents.iter_mut().zip(noise) {
                *x = forward_noise(&blob, t, &sched, eps)?;
            }
        }
        let alpha_bar = sched.alpha_bar_at(t)?;
        let round = pair_schedule(m, k)?;

        // (a, b, keep second prediction)
        let mut jobs: Vec<(usize, usize, bool)> =
            round.pairs.iter().map(|(a, b)| (*a, *b, true)).collect();
        if let Some(bye) = round.bye {
            jobs.push((bye.view, bye.partner, false));
        }
        if let Some(intr) = feature_intrinsics {
            for (a, b, _) in &jobs {
                if let Entry::Vacant(slot) = masks.entry((*a, *b)) {
                    slot.insert(build_mask_set(&[poses[*a], poses[*b]], intr)?);
                }
            }
        }

        let predictions = jobs
            .par_iter()
            .map(|(a, b, _)| {
                let input = PairInput {
                    views: [*a, *b],
                    latents: [&latents[*a], &latents[*b]],
                    timestep: t,
                    alpha_bar,
                    condition,
                    relative_pose: relative_pose(&poses[*a], &poses[*b]),
                    masks: masks.get(&(*a, *b)),
                    plucker: plucker.as_ref().map(|g| [&g[*a], &g[*b]]),
                    active: Conditions::ALL,
                };
                denoiser.predict_noise(&input)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut eps_hat: Vec<Option<Grid<T>>> = vec![None; m];
        for ((a, b, keep), [ea, eb]) in jobs.iter().zip(predictions) {
            eps_hat[*a] = Some(ea);
            if *keep {
                eps_hat[*b] = Some(eb);
            }
        }
        for (x, eps) in latents.iter_mut().zip(&eps_hat) {
            let eps = eps
                .as_ref()
                .expect("pair schedule covers every view once per step");
            *x = ddim_step(x, eps, t, t - 1, &sched)?;
        }
    }
    Ok(latents)
}
