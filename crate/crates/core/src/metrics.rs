//! PSNR and SSIM for comparing rendered or sampled views against targets.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Real;

pub const PSNR_CAP_DB: f64 = 99.0;
const PSNR_MSE_FLOOR: f64 = 1e-10;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// `10·log10(1 / MSE)` for images in `[0, 1]`, capped at 99 dB.
pub fn psnr<T: Real>(a: &Grid<T>, b: &Grid<T>) -> Result<T> {
    a.ensure_same_shape(b)?;
    let n = a.as_slice().len();
    if n == 0 {
        return Err(Error::invalid("cannot compute PSNR of empty images"));
    }
    let sse: T = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (*x - *y) * (*x - *y))
        .sum();
    let mse = sse / T::from_usize_lossy(n);
    let cap = T::lit(PSNR_CAP_DB);
    if mse < T::lit(PSNR_MSE_FLOOR) {
        return Ok(cap);
    }
    Ok((T::lit(10.0) * (T::one() / mse).log10()).min(cap))
}

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
fn gaussian_taps<T: Real>() -> Vec<T> {
    let mid = (SSIM_WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - mid).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| T::lit(v / total)).collect()
}

/// Mean structural similarity: 11×11 Gaussian window (σ = 1.5) over every
/// fully-inside position, K1 = 0.01, K2 = 0.03, dynamic range 1, averaged
/// over channels.
pub fn ssim<T: Real>(a: &Grid<T>, b: &Grid<T>) -> Result<T> {
    a.ensure_same_shape(b)?;
    let (h, w, channels) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let taps = gaussian_taps::<T>();
    let c1 = T::lit((SSIM_K1 * 1.0) * (SSIM_K1 * 1.0));
    let c2 = T::lit((SSIM_K2 * 1.0) * (SSIM_K2 * 1.0));
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let two = T::lit(2.0);

    let mut total = T::zero();
    for k in 0..channels {
        let mut channel_sum = T::zero();
        for r in 0..oh {
            for c in 0..ow {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) =
                    (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
                for (i, ti) in taps.iter().enumerate() {
                    for (j, tj) in taps.iter().enumerate() {
                        let wgt = *ti * *tj;
                        let (x, y) = (a.get(r + i, c + j, k), b.get(r + i, c + j, k));
                        ma += wgt * x;
                        mb += wgt * y;
                        saa += wgt * (x * x);
                        sbb += wgt * (y * y);
                        sab += wgt * (x * y);
                    }
                }
                let var_a = saa - ma * ma;
                let var_b = sbb - mb * mb;
                let cov = sab - ma * mb;
                let num = (two * (ma * mb) + c1) * (two * cov + c2);
                let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
                channel_sum += num / den;
            }
        }
        total += channel_sum / T::from_usize_lossy(oh * ow);
    }
    Ok(total / T::from_usize_lossy(channels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub image: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Per-image metrics with their means.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn push(&mut self, image: impl Into<String>, a: &Grid<f64>, b: &Grid<f64>) -> Result<()> {
        self.rows.push(MetricRow {
            image: image.into(),
            psnr_db: psnr(a, b)?,
            ssim: ssim(a, b)?,
        });
        Ok(())
    }

    pub fn mean_psnr(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.psnr_db))
    }

    pub fn mean_ssim(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.ssim))
    }

    /// `image,psnr_db,ssim` header, one row per image, then a `mean` row.
    /// Values use six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,psnr_db,ssim\n");
        for r in &self.rows {
            writeln!(out, "{},{:.6},{:.6}", r.image, r.psnr_db, r.ssim).unwrap();
        }
        writeln!(out, "mean,{:.6},{:.6}", self.mean_psnr(), self.mean_ssim()).unwrap();
        out
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Grid<f64> {
        Grid::from_fn(h, w, 3, |_, _, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn psnr_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_image(&mut rng, 8, 8);
        assert_eq!(psnr(&a, &a).unwrap(), 99.0);
        let zeros = Grid::<f64>::zeros(4, 4, 3);
        let ones = Grid::filled(4, 4, 3, 1.0);
        assert_eq!(psnr(&zeros, &ones).unwrap(), 0.0);
        let tenth = Grid::filled(4, 4, 3, 0.1);
        assert!((psnr(&zeros, &tenth).unwrap() - 20.0).abs() < 1e-12);
        assert!(psnr(&zeros, &Grid::zeros(4, 5, 3)).is_err());
    }

    #[test]
    fn psnr_decreases_with_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Grid::filled(16, 16, 3, 0.5);
        let noise = Grid::from_fn(16, 16, 3, |_, _, _| rng.random_range(-1.0..1.0));
        let values: Vec<f64> = [0.01, 0.02, 0.05, 0.1, 0.2]
            .iter()
            .map(|amp| {
                let b = a.zip_map(&noise, |x, n| x + amp * n).unwrap();
                psnr(&a, &b).unwrap()
            })
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_image(&mut rng, 16, 13);
        let b = random_image(&mut rng, 16, 13);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let s = ssim(&a, &b).unwrap();
        assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = Grid::<f64>::zeros(10, 20, 1);
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn ssim_tolerates_tiny_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_image(&mut rng, 12, 12);
        let b = a.map(|x| x + 1e-6);
        assert!(ssim(&a, &b).unwrap() >= 0.9999);
    }

    #[test]
    fn csv_layout() {
        let mut r = MetricReport::default();
        let a = Grid::filled(11, 11, 3, 0.25);
        r.push("view_0.ppm", &a, &a).unwrap();
        assert_eq!(
            r.to_csv(),
            "image,psnr_db,ssim\nview_0.ppm,99.000000,1.000000\nmean,99.000000,1.000000\n"
        );
    }
}
