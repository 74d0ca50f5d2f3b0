//! Plücker ray embeddings `(o × d, d)` and their additive injection into
//! feature maps through a zero-initialized linear projection.

use crate::camera::{pixel_ray, CameraPose, Intrinsics, Ray};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::Vec3;
use crate::scalar::Real;

pub const PLUCKER_DIM: usize = 6;

/// `(m, d)` with moment `m = o × d`. Invariant to sliding `o` along the ray.
pub fn plucker_embed<T: Real>(ray: &Ray<T>) -> [T; PLUCKER_DIM] {
    let m = ray.origin.cross(&ray.direction);
    let d = ray.direction;
    [m[0], m[1], m[2], d[0], d[1], d[2]]
}

/// Per-pixel Plücker embeddings of an `h × w` grid, layout `(m_x, m_y, m_z, d_x, d_y, d_z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerGrid<T> {
    values: Grid<T>,
}

impl<T: Real> PluckerGrid<T> {
    pub fn from_grid(values: Grid<T>) -> Result<Self> {
        if values.channels() != PLUCKER_DIM {
            return Err(Error::shape(
                format!("{PLUCKER_DIM} channels"),
                format!("{} channels", values.channels()),
            ));
        }
        Ok(Self { values })
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.values
    }

    pub fn at(&self, s: usize) -> &[T] {
        self.values.row(s)
    }

    pub fn moment(&self, s: usize) -> Vec3<T> {
        let p = self.at(s);
        Vec3::new(p[0], p[1], p[2])
    }

    pub fn direction(&self, s: usize) -> Vec3<T> {
        let p = self.at(s);
        Vec3::new(p[3], p[4], p[5])
    }
}

/// Embeds the ray through every pixel center of a camera.
pub fn plucker_grid<T: Real>(pose: &CameraPose<T>, intr: &Intrinsics<T>) -> PluckerGrid<T> {
    let mut values = Grid::zeros(intr.height, intr.width, PLUCKER_DIM);
    for v in 0..intr.height {
        for u in 0..intr.width {
            let ray = pixel_ray(pose, intr, u, v).expect("pixel inside grid");
            values
                .row_mut(v * intr.width + u)
                .copy_from_slice(&plucker_embed(&ray));
        }
    }
    PluckerGrid { values }
}

/// Linear map from the 6-dimensional embedding to feature depth `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerProjection<T> {
    /// Row-major `6 × d`.
    weights: Vec<T>,
    bias: Vec<T>,
}

impl<T: Real> PluckerProjection<T> {
    /// Fresh projection: weights and bias are exactly zero, so injection is
    /// the identity until the weights are set.
    pub fn zeros(depth: usize) -> Self {
        Self {
            weights: vec![T::zero(); PLUCKER_DIM * depth],
            bias: vec![T::zero(); depth],
        }
    }

    pub fn new(weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if bias.is_empty() || weights.len() != PLUCKER_DIM * bias.len() {
            return Err(Error::shape(
                format!("6x{} weights", bias.len()),
                format!("{} weights", weights.len()),
            ));
        }
        Ok(Self { weights, bias })
    }

    pub fn depth(&self) -> usize {
        self.bias.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }
}

/// `features + plucker · weights + bias` at every location.
pub fn plucker_inject<T: Real>(
    features: &Grid<T>,
    plucker: &PluckerGrid<T>,
    proj: &PluckerProjection<T>,
) -> Result<Grid<T>> {
    let d = features.channels();
    if proj.depth() != d {
        return Err(Error::shape(
            format!("projection width {d}"),
            format!("projection width {}", proj.depth()),
        ));
    }
    if (plucker.height(), plucker.width()) != (features.height(), features.width()) {
        return Err(Error::shape(
            format!("{}x{} plucker grid", features.height(), features.width()),
            format!("{}x{}", plucker.height(), plucker.width()),
        ));
    }
    let mut out = features.clone();
    for s in 0..features.locations() {
        let p = plucker.at(s);
        for (k, o) in out.row_mut(s).iter_mut().enumerate() {
            let mut acc = proj.bias[k];
            for (i, pi) in p.iter().enumerate() {
                acc += *pi * proj.weights[i * d + k];
            }
            *o += acc;
        }
    }
    Ok(out)
}
