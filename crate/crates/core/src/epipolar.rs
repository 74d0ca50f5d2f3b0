//! Fundamental matrices, epipolar lines on feature grids and the cross-view
//! attention masks built from them.
//!
//! A mask for the ordered pair `(i, j)` is an `(h·w) × (h·w)` boolean matrix:
//! row `s` lists the locations of view `j` that source location `s` of view
//! `i` may attend to. Self blocks (`i == j`) are implicitly all-true.

use log::warn;
use rayon::prelude::*;

use crate::camera::{relative_pose, CameraPose, Intrinsics, RelativePose};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

/// Camera baselines shorter than this (world units) carry no epipolar constraint.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Half-width of the rasterized line, in pixels, before dilation.
pub const RASTER_HALF_WIDTH: f64 = 0.5;

/// Lines whose `(a, b)` norm falls below this are undefined (source pixel at the epipole).
pub const LINE_EPSILON: f64 = 1e-12;

/// `F = M_tgtᵀ [t]ₓ R M_src` where `M` maps homogeneous pixels to
/// camera-frame rays. Scaled so its largest-magnitude entry is exactly 1.
pub fn fundamental_from_inverse_calibration<T: Real>(
    rel: &RelativePose<T>,
    inv_src: &Mat3<T>,
    inv_tgt: &Mat3<T>,
) -> Result<Mat3<T>> {
    let baseline = rel.translation.norm();
    if baseline < T::lit(DEGENERACY_THRESHOLD) {
        return Err(Error::DegenerateGeometry {
            baseline: baseline.to_f64_lossy(),
        });
    }
    let f = inv_tgt.transpose() * Mat3::skew(&rel.translation) * rel.rotation * *inv_src;
    let pivot =
        f.0.iter().flatten().copied().fold(
            T::zero(),
            |best, v| if v.abs() > best.abs() { v } else { best },
        );
    Ok(f.scale(T::one() / pivot))
}

/// Fundamental matrix for pixel coordinates of the two cameras: any pair of
/// projections `x_src`, `x_tgt` of one 3D point satisfies `x_tgtᵀ F x_src = 0`.
pub fn fundamental_matrix<T: Real>(
    rel: &RelativePose<T>,
    intr_src: &Intrinsics<T>,
    intr_tgt: &Intrinsics<T>,
) -> Result<Mat3<T>> {
    fundamental_from_inverse_calibration(
        rel,
        &intr_src.inverse_calibration(),
        &intr_tgt.inverse_calibration(),
    )
}

/// Line `a·u + b·v + c = 0` in continuous target pixel coordinates, with `a² + b² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpipolarLine<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> EpipolarLine<T> {
    /// Normalizes an arbitrary homogeneous line.
    pub fn from_homogeneous(l: Vec3<T>) -> Option<Self> {
        let n = (l[0] * l[0] + l[1] * l[1]).sqrt();
        if n.is_nan() || n < T::lit(LINE_EPSILON) {
            return None;
        }
        Some(Self {
            a: l[0] / n,
            b: l[1] / n,
            c: l[2] / n,
        })
    }

    /// Unsigned distance from `(u, v)` to the line.
    pub fn distance(&self, u: T, v: T) -> T {
        (self.a * u + self.b * v + self.c).abs()
    }
}

/// Epipolar line in the target image of source pixel `(u, v)` (its center).
pub fn epipolar_line<T: Real>(f: &Mat3<T>, u: usize, v: usize) -> Result<EpipolarLine<T>> {
    let half = T::lit(0.5);
    let (pu, pv) = (T::from_usize_lossy(u) + half, T::from_usize_lossy(v) + half);
    let l = f.mul_vec(&Vec3::new(pu, pv, T::one()));
    EpipolarLine::from_homogeneous(l).ok_or(Error::LineUndefined {
        u: pu.to_f64_lossy(),
        v: pv.to_f64_lossy(),
    })
}

/// Row-major boolean `h × w` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolGrid {
    pub height: usize,
    pub width: usize,
    pub cells: Vec<bool>,
}

impl BoolGrid {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            cells: vec![false; height * width],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.cells[r * self.width + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.cells[r * self.width + c] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }
}

/// Marks every cell whose center lies within half a pixel of the line.
pub fn rasterize_line<T: Real>(line: &EpipolarLine<T>, height: usize, width: usize) -> BoolGrid {
    let threshold = T::lit(RASTER_HALF_WIDTH + 1e-9);
    let half = T::lit(0.5);
    let mut grid = BoolGrid::new(height, width);
    for r in 0..height {
        let v = T::from_usize_lossy(r) + half;
        for c in 0..width {
            let u = T::from_usize_lossy(c) + half;
            if line.distance(u, v) <= threshold {
                grid.set(r, c, true);
            }
        }
    }
    grid
}

/// Morphological dilation with a full `(2·radius+1)²` square, clipped at the borders.
pub fn dilate_mask(grid: &BoolGrid, radius: usize) -> BoolGrid {
    let mut out = BoolGrid::new(grid.height, grid.width);
    for r in 0..grid.height {
        for c in 0..grid.width {
            if !grid.get(r, c) {
                continue;
            }
            let (r0, r1) = (r.saturating_sub(radius), (r + radius).min(grid.height - 1));
            let (c0, c1) = (c.saturating_sub(radius), (c + radius).min(grid.width - 1));
            for rr in r0..=r1 {
                for cc in c0..=c1 {
                    out.set(rr, cc, true);
                }
            }
        }
    }
    out
}

/// Dense bit matrix with `u64` words per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn new(rows: usize, cols: usize, value: bool) -> Self {
        let words_per_row = cols.div_ceil(64);
        let mut m = Self {
            rows,
            cols,
            words_per_row,
            words: vec![0; rows * words_per_row],
        };
        if value {
            for r in 0..rows {
                m.fill_row(r, true);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        (self.words[r * self.words_per_row + c / 64] >> (c % 64)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let w = &mut self.words[r * self.words_per_row + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    pub fn fill_row(&mut self, r: usize, v: bool) {
        for c in 0..self.cols {
            self.set(r, c, v);
        }
    }

    pub fn row_count(&self, r: usize) -> usize {
        self.words[r * self.words_per_row..(r + 1) * self.words_per_row]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    fn set_row_from(&mut self, r: usize, grid: &BoolGrid) {
        for (c, v) in grid.cells.iter().enumerate() {
            if *v {
                self.set(r, c, true);
            }
        }
    }
}

/// Cross-view masks for every ordered pair of `n_views` views on an `h × w` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpipolarMaskSet {
    n_views: usize,
    height: usize,
    width: usize,
    /// Indexed by `i * n_views + j`; diagonal entries are unused.
    pairs: Vec<Option<BitMatrix>>,
}

impl EpipolarMaskSet {
    fn uniform(n_views: usize, height: usize, width: usize, value: bool) -> Self {
        let hw = height * width;
        let pairs = (0..n_views * n_views)
            .map(|k| (k / n_views != k % n_views).then(|| BitMatrix::new(hw, hw, value)))
            .collect();
        Self {
            n_views,
            height,
            width,
            pairs,
        }
    }

    /// Every cross-view entry allowed; attention reduces to plain concatenation.
    pub fn full(n_views: usize, height: usize, width: usize) -> Self {
        Self::uniform(n_views, height, width, true)
    }

    /// Every cross-view entry blocked; attention reduces to per-view self-attention.
    pub fn blocked(n_views: usize, height: usize, width: usize) -> Self {
        Self::uniform(n_views, height, width, false)
    }

    pub fn n_views(&self) -> usize {
        self.n_views
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn locations(&self) -> usize {
        self.height * self.width
    }

    /// Mask of ordered pair `(i, j)`, `i != j`.
    pub fn pair(&self, i: usize, j: usize) -> &BitMatrix {
        assert_ne!(i, j, "self blocks are implicit");
        self.pairs[i * self.n_views + j]
            .as_ref()
            .expect("off-diagonal pair present")
    }

    pub fn pair_mut(&mut self, i: usize, j: usize) -> &mut BitMatrix {
        assert_ne!(i, j, "self blocks are implicit");
        self.pairs[i * self.n_views + j]
            .as_mut()
            .expect("off-diagonal pair present")
    }

    /// Whether location `s` of view `i` may attend to location `t` of view `j`.
    pub fn allowed(&self, i: usize, j: usize, s: usize, t: usize) -> bool {
        i == j || self.pair(i, j).get(s, t)
    }

    /// Ordered pairs `(i, j)`, `i != j`, in row-major order.
    pub fn ordered_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n_views;
        (0..n).flat_map(move |i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
    }

    /// Sub-set restricted to the given views, in the given order.
    pub fn select(&self, views: &[usize]) -> Self {
        let n = views.len();
        let mut pairs = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                pairs.push((a != b).then(|| self.pair(views[a], views[b]).clone()));
            }
        }
        Self {
            n_views: n,
            height: self.height,
            width: self.width,
            pairs,
        }
    }
}

/// Mask for one ordered pair: each source row is the dilated epipolar line
/// of the source pixel in the target grid. Coincident camera centers yield
/// an all-true mask.
pub fn build_pair_mask<T: Real>(
    src: &CameraPose<T>,
    tgt: &CameraPose<T>,
    intr: &Intrinsics<T>,
) -> BitMatrix {
    let (h, w) = (intr.height, intr.width);
    let hw = h * w;
    let f = match fundamental_matrix(&relative_pose(src, tgt), intr, intr) {
        Ok(f) => f,
        Err(e) => {
            warn!("{e}; falling back to full cross-view attention for this pair");
            return BitMatrix::new(hw, hw, true);
        }
    };
    let rows: Vec<Option<BoolGrid>> = (0..hw)
        .into_par_iter()
        .map(|s| {
            // An undefined line or one missing the grid leaves only the self view.
            epipolar_line(&f, s % w, s / w)
                .ok()
                .map(|line| dilate_mask(&rasterize_line(&line, h, w), 1))
        })
        .collect();
    let mut mask = BitMatrix::new(hw, hw, false);
    for (s, row) in rows.iter().enumerate() {
        if let Some(row) = row {
            mask.set_row_from(s, row);
        }
    }
    mask
}

/// Masks for every ordered pair of views at the resolution of `intr`.
pub fn build_mask_set<T: Real>(
    poses: &[CameraPose<T>],
    intr: &Intrinsics<T>,
) -> Result<EpipolarMaskSet> {
    if poses.len() < 2 {
        return Err(Error::invalid(format!(
            "epipolar masks need at least 2 views, got {}",
            poses.len()
        )));
    }
    let n = poses.len();
    let pairs = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            (i != j).then(|| build_pair_mask(&poses[i], &poses[j], intr))
        })
        .collect();
    Ok(EpipolarMaskSet {
        n_views: n,
        height: intr.height,
        width: intr.width,
        pairs,
    })
}
