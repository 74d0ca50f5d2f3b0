use crate::camera::RelativePose;
use crate::epipolar::EpipolarMaskSet;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::plucker::PluckerGrid;
use crate::scalar::Real;

/// Which conditioning signals a denoiser call may use. Guidance drops them
/// in the order text, camera, epipolar masks, Plücker embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Conditions {
    pub text: bool,
    pub camera: bool,
    pub epipolar: bool,
    pub plucker: bool,
}

impl Conditions {
    pub const NONE: Self = Self {
        text: false,
        camera: false,
        epipolar: false,
        plucker: false,
    };

    pub const ALL: Self = Self {
        text: true,
        camera: true,
        epipolar: true,
        plucker: true,
    };

    /// The first `level` conditions of the cascade enabled (0..=4).
    pub fn cascade(level: usize) -> Self {
        Self {
            text: level >= 1,
            camera: level >= 2,
            epipolar: level >= 3,
            plucker: level >= 4,
        }
    }
}

/// Everything a two-view denoiser sees for one call. Both latents are at
/// the same timestep.
#[derive(Debug, Clone, Copy)]
pub struct PairInput<'a, T> {
    /// Indices of the two views in the full view set.
    pub views: [usize; 2],
    pub latents: [&'a Grid<T>; 2],
    pub timestep: usize,
    pub alpha_bar: T,
    /// Opaque conditioning vector standing in for the text embedding.
    pub condition: &'a [T],
    /// Maps points from the first view's camera frame to the second's.
    pub relative_pose: RelativePose<T>,
    /// Two-view masks at feature resolution, when available.
    pub masks: Option<&'a EpipolarMaskSet>,
    pub plucker: Option<[&'a PluckerGrid<T>; 2]>,
    pub active: Conditions,
}

/// Two-view noise predictor `ε_θ(x¹_t, x²_t, t, y, Δπ)`. Implementations
/// must be deterministic and keep no state between calls.
pub trait PairDenoiser<T: Real>: Sync {
    fn predict_noise(&self, input: &PairInput<'_, T>) -> Result<[Grid<T>; 2]>;
}

impl<T: Real, D: PairDenoiser<T> + ?Sized> PairDenoiser<T> for &D {
    fn predict_noise(&self, input: &PairInput<'_, T>) -> Result<[Grid<T>; 2]> {
        (**self).predict_noise(input)
    }
}

/// Exact denoiser for known clean targets: inverts the forward-noising
/// formula, `ε̂ = (x_t − √ᾱ_t · x0) / √(1 − ᾱ_t)`. Conditioning is ignored.
#[derive(Debug, Clone)]
pub struct OracleDenoiser<T> {
    targets: Vec<Grid<T>>,
}

impl<T: Real> OracleDenoiser<T> {
    pub fn new(targets: Vec<Grid<T>>) -> Result<Self> {
        let first = targets
            .first()
            .ok_or_else(|| Error::invalid("oracle denoiser needs at least one target"))?;
        for t in &targets {
            first.ensure_same_shape(t)?;
        }
        Ok(Self { targets })
    }

    pub fn targets(&self) -> &[Grid<T>] {
        &self.targets
    }

    /// Noise estimate for one view.
    pub fn noise_for(&self, view: usize, x_t: &Grid<T>, alpha_bar: T) -> Result<Grid<T>> {
        let x0 = self
            .targets
            .get(view)
            .ok_or_else(|| Error::invalid(format!("oracle has no target for view {view}")))?;
        x0.ensure_same_shape(x_t)?;
        let sigma = (T::one() - alpha_bar).sqrt();
        if sigma.is_nan() || sigma <= T::zero() {
            return Ok(Grid::zeros(x_t.height(), x_t.width(), x_t.channels()));
        }
        let a = alpha_bar.sqrt();
        x_t.zip_map(x0, |x, c| (x - a * c) / sigma)
    }
}

impl<T: Real> PairDenoiser<T> for OracleDenoiser<T> {
    fn predict_noise(&self, input: &PairInput<'_, T>) -> Result<[Grid<T>; 2]> {
        Ok([
            self.noise_for(input.views[0], input.latents[0], input.alpha_bar)?,
            self.noise_for(input.views[1], input.latents[1], input.alpha_bar)?,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{forward_noise, make_schedule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn oracle_recovers_injected_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x0 = Grid::from_fn(4, 4, 3, |_, _, _| rng.random_range(0.0..1.0));
        let eps = Grid::from_fn(4, 4, 3, |_, _, _| rng.random_range(-2.0..2.0));
        let oracle = OracleDenoiser::new(vec![x0.clone()]).unwrap();
        let sched = make_schedule::<f64>(200).unwrap();
        for t in [1, 17, 100, 200] {
            let xt = forward_noise(&x0, t, &sched, &eps).unwrap();
            let est = oracle
                .noise_for(0, &xt, sched.alpha_bar_at(t).unwrap())
                .unwrap();
            assert!(est.max_abs_diff(&eps) <= 1e-12, "t={t}");
        }
    }

    #[test]
    fn oracle_guards_clean_timestep() {
        let x0 = Grid::filled(2, 2, 1, 0.5);
        let oracle = OracleDenoiser::new(vec![x0.clone()]).unwrap();
        let est = oracle
            .noise_for(0, &Grid::filled(2, 2, 1, 0.9), 1.0)
            .unwrap();
        assert_eq!(est, Grid::zeros(2, 2, 1));
    }

    #[test]
    fn oracle_rejects_bad_shapes() {
        assert!(OracleDenoiser::<f64>::new(vec![]).is_err());
        assert!(
            OracleDenoiser::new(vec![Grid::<f64>::zeros(2, 2, 1), Grid::zeros(2, 3, 1)]).is_err()
        );
        let oracle = OracleDenoiser::new(vec![Grid::<f64>::zeros(2, 2, 1)]).unwrap();
        assert!(oracle.noise_for(0, &Grid::zeros(3, 2, 1), 0.5).is_err());
        assert!(oracle.noise_for(1, &Grid::zeros(2, 2, 1), 0.5).is_err());
    }

    #[test]
    fn cascade_levels() {
        assert_eq!(Conditions::cascade(0), Conditions::NONE);
        assert_eq!(Conditions::cascade(4), Conditions::ALL);
        let c = Conditions::cascade(2);
        assert!(c.text && c.camera && !c.epipolar && !c.plucker);
    }
}
