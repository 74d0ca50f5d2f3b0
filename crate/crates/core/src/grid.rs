//! Dense `h × w × c` grids: feature maps, latents and images share this layout.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major `h × w × c` grid of scalars. Flattening yields the `(h·w) × c`
/// token matrix that attention operates on.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, T::zero())
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("grid must have at least one channel"));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(
                format!(
                    "{} values for {height}x{width}x{channels}",
                    height * width * channels
                ),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for k in 0..channels {
                    data.push(f(r, c, k));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of spatial locations, `h·w`.
    pub fn locations(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize, k: usize) -> T {
        self.data[(r * self.width + c) * self.channels + k]
    }

    pub fn set(&mut self, r: usize, c: usize, k: usize, v: T) {
        self.data[(r * self.width + c) * self.channels + k] = v;
    }

    /// Feature vector of flattened location `s = r·w + c`.
    pub fn row(&self, s: usize) -> &[T] {
        &self.data[s * self.channels..(s + 1) * self.channels]
    }

    pub fn row_mut(&mut self, s: usize) -> &mut [T] {
        &mut self.data[s * self.channels..(s + 1) * self.channels]
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Elementwise `f(self, other)`; shapes must match.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.ensure_same_shape(other)?;
        Ok(Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Grid::<f64>::from_vec(2, 2, 3, vec![0.0; 11]).is_err());
        assert!(Grid::<f64>::from_vec(2, 2, 0, vec![]).is_err());
        let g = Grid::<f64>::from_vec(2, 2, 3, (0..12).map(f64::from).collect()).unwrap();
        assert_eq!(g.get(1, 0, 2), 8.0);
        assert_eq!(g.row(3), &[9.0, 10.0, 11.0]);
    }
}
