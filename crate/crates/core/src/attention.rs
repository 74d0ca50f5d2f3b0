//! Single-head scaled dot-product attention over feature grids: plain
//! self-attention, concatenated multi-view attention, and the epipolar-masked
//! variant with optional Plücker positional injection.

use crate::epipolar::EpipolarMaskSet;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::plucker::{plucker_inject, PluckerGrid, PluckerProjection};
use crate::scalar::Real;

/// Feature map `h × w × d`; flattened to `(h·w) × d` tokens.
pub type FeatureGrid<T> = Grid<T>;

/// Square projection matrix stored row-major; a token row vector `x` maps to `x · W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    dim: usize,
    values: Vec<T>,
}

impl<T: Real> Projection<T> {
    pub fn new(dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 || values.len() != dim * dim {
            return Err(Error::shape(
                format!("{dim}x{dim} matrix"),
                format!("{} values", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection weights must be finite"));
        }
        Ok(Self { dim, values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            values: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.values[i * dim + i] = T::one();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.dim + j]
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (i, xi) in x.iter().enumerate() {
                acc += *xi * self.values[i * self.dim + j];
            }
            *o = acc;
        }
    }

    /// Projects every token of a grid.
    fn project(&self, g: &Grid<T>) -> Grid<T> {
        let mut out = Grid::zeros(g.height(), g.width(), self.dim);
        for s in 0..g.locations() {
            self.apply(g.row(s), out.row_mut(s));
        }
        out
    }
}

/// Query, key and value projections of one attention head.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights<T> {
    pub query: Projection<T>,
    pub key: Projection<T>,
    pub value: Projection<T>,
}

impl<T: Real> AttentionWeights<T> {
    pub fn new(query: Projection<T>, key: Projection<T>, value: Projection<T>) -> Result<Self> {
        if query.dim() != key.dim() || key.dim() != value.dim() {
            return Err(Error::shape(
                format!("equal projection sizes ({})", query.dim()),
                format!("{}/{}/{}", query.dim(), key.dim(), value.dim()),
            ));
        }
        Ok(Self { query, key, value })
    }

    pub fn dim(&self) -> usize {
        self.query.dim()
    }

    fn check(&self, g: &Grid<T>) -> Result<()> {
        if g.channels() != self.dim() {
            return Err(Error::shape(
                format!("feature depth {}", self.dim()),
                format!("feature depth {}", g.channels()),
            ));
        }
        Ok(())
    }
}

/// Softmax restricted to `allowed` entries; the rest are exactly zero.
pub fn masked_softmax<T: Real>(logits: &[T], allowed: &[bool]) -> Result<Vec<T>> {
    if logits.len() != allowed.len() {
        return Err(Error::shape(
            format!("{} mask entries", logits.len()),
            format!("{} mask entries", allowed.len()),
        ));
    }
    let max = logits
        .iter()
        .zip(allowed)
        .filter(|(_, a)| **a)
        .map(|(l, _)| *l)
        .fold(None, |m: Option<T>, l| Some(m.map_or(l, |m| m.max(l))))
        .ok_or_else(|| Error::invalid("masked softmax needs at least one allowed entry"))?;
    let mut out: Vec<T> = logits
        .iter()
        .zip(allowed)
        .map(|(l, a)| if *a { (*l - max).exp() } else { T::zero() })
        .collect();
    let total: T = out.iter().copied().sum();
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

/// Attention of one query over `keys`/`values` with an allowed-set, into `out`.
fn attend<T: Real>(
    query: &[T],
    keys: &[&Grid<T>],
    values: &[&Grid<T>],
    allowed: &[bool],
    scale: T,
    out: &mut [T],
) -> Result<()> {
    let logits: Vec<T> = keys
        .iter()
        .flat_map(|k| (0..k.locations()).map(move |t| (k, t)))
        .map(|(k, t)| dot(query, k.row(t)) * scale)
        .collect();
    let probs = masked_softmax(&logits, allowed)?;
    out.iter_mut().for_each(|o| *o = T::zero());
    let mut idx = 0;
    for v in values {
        for t in 0..v.locations() {
            let p = probs[idx];
            idx += 1;
            if p == T::zero() {
                continue;
            }
            for (o, x) in out.iter_mut().zip(v.row(t)) {
                *o += p * *x;
            }
        }
    }
    Ok(())
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn scale_for<T: Real>(d: usize) -> T {
    T::one() / T::from_usize_lossy(d).sqrt()
}

/// `softmax(Q(F_s) · K(F)ᵀ / √d) · V(F)` at every location `s`.
pub fn self_attention<T: Real>(
    features: &FeatureGrid<T>,
    w: &AttentionWeights<T>,
) -> Result<FeatureGrid<T>> {
    w.check(features)?;
    let (q, k, v) = (
        w.query.project(features),
        w.key.project(features),
        w.value.project(features),
    );
    let scale = scale_for::<T>(w.dim());
    let allowed = vec![true; features.locations()];
    let mut out = Grid::zeros(features.height(), features.width(), w.dim());
    for s in 0..features.locations() {
        attend(q.row(s), &[&k], &[&v], &allowed, scale, out.row_mut(s))?;
    }
    Ok(out)
}

fn check_views<T: Real>(views: &[FeatureGrid<T>], w: &AttentionWeights<T>) -> Result<()> {
    let first = views
        .first()
        .ok_or_else(|| Error::invalid("multi-view attention needs at least one view"))?;
    for v in views {
        first.ensure_same_shape(v)?;
        w.check(v)?;
    }
    Ok(())
}

/// Every location of every view attends over the concatenation of all views.
pub fn concat_attention<T: Real>(
    views: &[FeatureGrid<T>],
    w: &AttentionWeights<T>,
) -> Result<Vec<FeatureGrid<T>>> {
    check_views(views, w)?;
    let qs: Vec<_> = views.iter().map(|g| w.query.project(g)).collect();
    let ks: Vec<_> = views.iter().map(|g| w.key.project(g)).collect();
    let vs: Vec<_> = views.iter().map(|g| w.value.project(g)).collect();
    let scale = scale_for::<T>(w.dim());
    let n_loc = views[0].locations();
    let allowed = vec![true; n_loc * views.len()];
    let key_refs: Vec<_> = ks.iter().collect();
    let val_refs: Vec<_> = vs.iter().collect();
    let mut outs = Vec::with_capacity(views.len());
    for q in &qs {
        let mut out = Grid::zeros(q.height(), q.width(), w.dim());
        for s in 0..n_loc {
            attend(
                q.row(s),
                &key_refs,
                &val_refs,
                &allowed,
                scale,
                out.row_mut(s),
            )?;
        }
        outs.push(out);
    }
    Ok(outs)
}

/// Plücker grids (one per view) and the shared projection that injects them.
#[derive(Debug, Clone, Copy)]
pub struct PluckerInput<'a, T> {
    pub grids: &'a [PluckerGrid<T>],
    pub projection: &'a PluckerProjection<T>,
}

/// Epipolar attention: location `s` of view `i` attends to all of view `i`
/// and to the masked locations of every other view. Keys are ordered
/// `[own view | other views in index order]`. `masks = None` allows every
/// cross-view entry.
pub fn multiview_attention<T: Real>(
    views: &[FeatureGrid<T>],
    w: &AttentionWeights<T>,
    masks: Option<&EpipolarMaskSet>,
    plucker: Option<PluckerInput<'_, T>>,
) -> Result<Vec<FeatureGrid<T>>> {
    check_views(views, w)?;
    let n = views.len();
    let (h, wd) = (views[0].height(), views[0].width());
    let n_loc = h * wd;
    if let Some(m) = masks {
        if m.n_views() != n || m.height() != h || m.width() != wd {
            return Err(Error::shape(
                format!("masks for {n} views at {h}x{wd}"),
                format!(
                    "masks for {} views at {}x{}",
                    m.n_views(),
                    m.height(),
                    m.width()
                ),
            ));
        }
    }
    let injected: Vec<FeatureGrid<T>>;
    let inputs: &[FeatureGrid<T>] = match plucker {
        Some(p) => {
            if p.grids.len() != n {
                return Err(Error::shape(
                    format!("{n} plucker grids"),
                    format!("{}", p.grids.len()),
                ));
            }
            injected = views
                .iter()
                .zip(p.grids)
                .map(|(f, g)| plucker_inject(f, g, p.projection))
                .collect::<Result<_>>()?;
            &injected
        }
        None => views,
    };

    let qs: Vec<_> = inputs.iter().map(|g| w.query.project(g)).collect();
    let ks: Vec<_> = inputs.iter().map(|g| w.key.project(g)).collect();
    let vs: Vec<_> = inputs.iter().map(|g| w.value.project(g)).collect();
    let scale = scale_for::<T>(w.dim());

    let mut outs = Vec::with_capacity(n);
    for (i, q) in qs.iter().enumerate() {
        let order: Vec<usize> = std::iter::once(i)
            .chain((0..n).filter(|j| *j != i))
            .collect();
        let key_refs: Vec<_> = order.iter().map(|j| &ks[*j]).collect();
        let val_refs: Vec<_> = order.iter().map(|j| &vs[*j]).collect();
        let mut out = Grid::zeros(h, wd, w.dim());
        let mut allowed = vec![true; n_loc * n];
        for s in 0..n_loc {
            if let Some(m) = masks {
                for (slot, j) in order.iter().enumerate().skip(1) {
                    let pair = m.pair(i, *j);
                    for t in 0..n_loc {
                        allowed[slot * n_loc + t] = pair.get(s, t);
                    }
                }
            }
            attend(
                q.row(s),
                &key_refs,
                &val_refs,
                &allowed,
                scale,
                out.row_mut(s),
            )?;
        }
        outs.push(out);
    }
    Ok(outs)
}
