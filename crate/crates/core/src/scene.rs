//! Synthetic colored point-cloud scene, z-buffered point-splat renderer and
//! ground-truth cross-view correspondences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{project_point, CameraPose, Intrinsics, Projection};
use crate::grid::Grid;
use crate::linalg::{Mat3, Vec3};

/// Half side of the cube the points are sampled on.
const CUBE_HALF: f64 = 0.4;
const FACE_GRID: usize = 10;
const POSITION_JITTER: f64 = 0.005;
const POINT_RADIUS: f64 = 0.035;
/// Marker glyph height above the +Z face.
const MARKER_LIFT: f64 = 0.02;
const MARKER_COLOR: [f64; 3] = [0.05, 0.05, 0.05];

/// Splats never shrink below this radius, so each point always covers the
/// center of the pixel it projects into.
pub const MIN_SPLAT_RADIUS_PX: f64 = 0.75;

/// Depth agreement, in world units, for a point to count as visible.
pub const VISIBILITY_TOLERANCE: f64 = 1e-3;

pub const BACKGROUND: [f64; 3] = [1.0, 1.0, 1.0];

/// Face colors for +X, −X, +Y, −Y, +Z, −Z.
const FACE_COLORS: [[f64; 3]; 6] = [
    [0.85, 0.2, 0.2],
    [0.2, 0.7, 0.25],
    [0.2, 0.35, 0.85],
    [0.9, 0.8, 0.2],
    [0.75, 0.3, 0.8],
    [0.2, 0.75, 0.8],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenePoint {
    pub position: [f64; 3],
    pub color: [f64; 3],
    pub radius: f64,
    /// Outward surface normal; the point is seen only from its front side.
    pub normal: [f64; 3],
}

impl ScenePoint {
    pub fn position(&self) -> Vec3<f64> {
        Vec3(self.position)
    }

    pub fn faces(&self, eye: &Vec3<f64>) -> bool {
        Vec3(self.normal).dot(&(*eye - self.position())) > 0.0
    }
}

/// Colored points inside the unit cube `[-0.5, 0.5]³`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointScene {
    pub points: Vec<ScenePoint>,
}

impl PointScene {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn within_unit_cube(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.position.iter().all(|c| (-0.5..=0.5).contains(c)))
    }

    /// Applies a world rotation about the origin to every point.
    pub fn rotated(&self, rotation: &Mat3<f64>) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| ScenePoint {
                    position: rotation.mul_vec(&p.position()).0,
                    normal: rotation.mul_vec(&Vec3(p.normal)).0,
                    ..*p
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes to TOML")
    }
}

/// Deterministic scene: a 10×10 grid of points on each face of a colored
/// cube, jittered by `seed`, plus a raised "F" glyph on the +Z face that
/// makes the scene chiral.
pub fn build_scene(seed: u64) -> PointScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(6 * FACE_GRID * FACE_GRID + 16);
    let step = 2.0 * CUBE_HALF / FACE_GRID as f64;
    for (face, color) in FACE_COLORS.iter().enumerate() {
        let axis = face / 2;
        let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
        let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
        for i in 0..FACE_GRID {
            for j in 0..FACE_GRID {
                let mut p = [0.0; 3];
                p[axis] = sign * CUBE_HALF;
                p[a1] = -CUBE_HALF
                    + (i as f64 + 0.5) * step
                    + rng.random_range(-POSITION_JITTER..=POSITION_JITTER);
                p[a2] = -CUBE_HALF
                    + (j as f64 + 0.5) * step
                    + rng.random_range(-POSITION_JITTER..=POSITION_JITTER);
                let mut normal = [0.0; 3];
                normal[axis] = sign;
                points.push(ScenePoint {
                    position: p,
                    color: *color,
                    radius: POINT_RADIUS,
                    normal,
                });
            }
        }
    }
    let z = CUBE_HALF + MARKER_LIFT;
    let glyph = (0..5)
        .map(|k| (-0.15, -0.2 + 0.1 * k as f64))
        .chain((1..4).map(|k| (-0.15 + 0.1 * k as f64, 0.2)))
        .chain((1..3).map(|k| (-0.15 + 0.1 * k as f64, 0.0)));
    for (x, y) in glyph {
        points.push(ScenePoint {
            position: [x, y, z],
            color: MARKER_COLOR,
            radius: POINT_RADIUS * 0.8,
            normal: [0.0, 0.0, 1.0],
        });
    }
    PointScene { points }
}

/// RGB image in `[0, 1]` plus per-pixel depth along the optical axis
/// (`+∞` where nothing was drawn).
#[derive(Debug, Clone, PartialEq)]
pub struct Render {
    pub image: Grid<f64>,
    pub depth: Grid<f64>,
}

fn splat_radius(point: &ScenePoint, intr: &Intrinsics<f64>, depth: f64) -> f64 {
    (point.radius * intr.focal / depth).max(MIN_SPLAT_RADIUS_PX)
}

/// Splats every point as a screen-space disc of constant depth onto a white
/// background, keeping the nearest disc per pixel.
pub fn render_view(scene: &PointScene, pose: &CameraPose<f64>, intr: &Intrinsics<f64>) -> Render {
    let (h, w) = (intr.height, intr.width);
    let mut image = Grid::from_fn(h, w, 3, |_, _, k| BACKGROUND[k]);
    let mut depth = Grid::filled(h, w, 1, f64::INFINITY);
    for point in &scene.points {
        let Some(Projection { u, v, depth: z }) = project_point(pose, intr, &point.position())
        else {
            continue;
        };
        let r = splat_radius(point, intr, z);
        let c0 = (u - r - 0.5).floor().max(0.0) as usize;
        let r0 = (v - r - 0.5).floor().max(0.0) as usize;
        let c1 = (u + r).ceil().min(w as f64);
        let r1 = (v + r).ceil().min(h as f64);
        if c1 <= 0.0 || r1 <= 0.0 {
            continue;
        }
        for row in r0..r1 as usize {
            for col in c0..c1 as usize {
                let (du, dv) = (col as f64 + 0.5 - u, row as f64 + 0.5 - v);
                if du * du + dv * dv <= r * r && z < depth.get(row, col, 0) {
                    depth.set(row, col, 0, z);
                    for k in 0..3 {
                        image.set(row, col, k, point.color[k]);
                    }
                }
            }
        }
    }
    Render { image, depth }
}

/// A scene point seen in both views, with its pixel cell and continuous
/// projection in each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub point: usize,
    pub source: (usize, usize),
    pub target: (usize, usize),
    pub source_xy: (f64, f64),
    pub target_xy: (f64, f64),
    pub source_depth: f64,
    pub target_depth: f64,
}

fn visible(
    point: &ScenePoint,
    pose: &CameraPose<f64>,
    intr: &Intrinsics<f64>,
    depth: &Grid<f64>,
) -> Option<(Projection<f64>, (usize, usize))> {
    if !point.faces(&pose.position) {
        return None;
    }
    let p = project_point(pose, intr, &point.position())?;
    let (u, v) = p.pixel(intr.width, intr.height)?;
    (p.depth <= depth.get(v, u, 0) + VISIBILITY_TOLERANCE).then_some((p, (u, v)))
}

/// Points visible in both views: in front of the camera, inside the image,
/// front-facing and not hidden behind the rendered depth.
pub fn correspondences(
    scene: &PointScene,
    pose_src: &CameraPose<f64>,
    pose_tgt: &CameraPose<f64>,
    intr: &Intrinsics<f64>,
) -> Vec<Correspondence> {
    let depth_src = render_view(scene, pose_src, intr).depth;
    let depth_tgt = render_view(scene, pose_tgt, intr).depth;
    scene
        .points
        .iter()
        .enumerate()
        .filter_map(|(k, point)| {
            let (ps, cs) = visible(point, pose_src, intr, &depth_src)?;
            let (pt, ct) = visible(point, pose_tgt, intr, &depth_tgt)?;
            Some(Correspondence {
                point: k,
                source: cs,
                target: ct,
                source_xy: (ps.u, ps.v),
                target_xy: (pt.u, pt.v),
                source_depth: ps.depth,
                target_depth: pt.depth,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{relative_pose, spherical_pose};
    use crate::epipolar::fundamental_matrix;

    fn intr(n: usize) -> Intrinsics<f64> {
        Intrinsics::from_fov(40.26, n, n).unwrap()
    }

    #[test]
    fn scene_is_deterministic_and_bounded() {
        let a = build_scene(3);
        assert_eq!(a, build_scene(3));
        assert_ne!(a, build_scene(4));
        assert!(a.len() >= 500);
        assert!(a.within_unit_cube());
    }

    #[test]
    fn scene_round_trips_through_toml() {
        let s = build_scene(0);
        let back: PointScene = toml::from_str(&s.to_toml()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn empty_scene_renders_white() {
        let r = render_view(
            &PointScene::default(),
            &spherical_pose(0.0, 0.0, 3.5).unwrap(),
            &intr(16),
        );
        assert!(r.image.as_slice().iter().all(|v| *v == 1.0));
        assert!(r.depth.as_slice().iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn single_point_disc_is_centered() {
        let scene = PointScene {
            points: vec![ScenePoint {
                position: [0.0; 3],
                color: [0.0, 0.0, 1.0],
                radius: 0.1,
                normal: [0.0, 0.0, 1.0],
            }],
        };
        let r = render_view(&scene, &spherical_pose(0.0, 0.0, 3.5).unwrap(), &intr(32));
        let covered: Vec<(usize, usize)> = (0..32)
            .flat_map(|row| (0..32).map(move |col| (row, col)))
            .filter(|(row, col)| r.depth.get(*row, *col, 0).is_finite())
            .collect();
        assert!(!covered.is_empty());
        let n = covered.len() as f64;
        let mean_r = covered
            .iter()
            .map(|(row, _)| *row as f64 + 0.5)
            .sum::<f64>()
            / n;
        let mean_c = covered
            .iter()
            .map(|(_, col)| *col as f64 + 0.5)
            .sum::<f64>()
            / n;
        assert!((mean_r - 16.0).abs() < 1e-9 && (mean_c - 16.0).abs() < 1e-9);
        assert_eq!(r.image.get(16, 16, 2), 1.0);
        assert_eq!(r.image.get(16, 16, 0), 0.0);
        assert!((r.depth.get(16, 16, 0) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn nearer_point_wins() {
        let near = ScenePoint {
            position: [0.0, 0.0, 0.3],
            color: [1.0, 0.0, 0.0],
            radius: 0.05,
            normal: [0.0, 0.0, 1.0],
        };
        let far = ScenePoint {
            position: [0.0, 0.0, -0.3],
            color: [0.0, 1.0, 0.0],
            radius: 0.05,
            normal: [0.0, 0.0, 1.0],
        };
        let pose = spherical_pose(0.0, 0.0, 3.5).unwrap();
        for points in [vec![near, far], vec![far, near]] {
            let r = render_view(&PointScene { points }, &pose, &intr(32));
            assert_eq!(r.image.get(16, 16, 0), 1.0);
            assert!((r.depth.get(16, 16, 0) - 3.2).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_cameras_give_identity_correspondences() {
        let scene = build_scene(1);
        let pose = spherical_pose(20.0, 35.0, 3.5).unwrap();
        let c = correspondences(&scene, &pose, &pose, &intr(32));
        assert!(!c.is_empty());
        assert!(c.iter().all(|c| c.source == c.target));
    }

    #[test]
    fn disjoint_views_have_no_correspondences() {
        let scene = build_scene(1);
        let toward = spherical_pose(0.0, 0.0, 3.5).unwrap();
        let away = CameraPose::look_at(
            Vec3::new(0.0, 0.0, 3.5),
            Vec3::new(0.0, 0.0, 10.0),
            Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        assert!(correspondences(&scene, &toward, &away, &intr(32)).is_empty());
    }

    #[test]
    fn correspondences_satisfy_epipolar_and_depth_checks() {
        let scene = build_scene(2);
        let i = intr(32);
        let a = spherical_pose(15.0, 10.0, 3.5).unwrap();
        let b = spherical_pose(15.0, 40.0, 3.5).unwrap();
        let f = fundamental_matrix(&relative_pose(&a, &b), &i, &i).unwrap();
        let da = render_view(&scene, &a, &i).depth;
        let db = render_view(&scene, &b, &i).depth;
        let c = correspondences(&scene, &a, &b, &i);
        assert!(c.len() > 20, "{}", c.len());
        for c in &c {
            let xs = Vec3::new(c.source_xy.0, c.source_xy.1, 1.0);
            let xt = Vec3::new(c.target_xy.0, c.target_xy.1, 1.0);
            assert!(xt.dot(&f.mul_vec(&xs)).abs() <= 1e-6);
            let p = scene.points[c.point];
            assert!(p.faces(&a.position) && p.faces(&b.position));
            assert!((da.get(c.source.1, c.source.0, 0) - c.source_depth).abs() <= 1e-3);
            assert!((db.get(c.target.1, c.target.0, 0) - c.target_depth).abs() <= 1e-3);
        }
    }

    fn rot_y(angle: f64) -> Mat3<f64> {
        let (s, c) = angle.sin_cos();
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    #[test]
    fn rendering_is_pose_equivariant() {
        let scene = build_scene(5);
        let i = intr(24);
        let pose = spherical_pose(25.0, 60.0, 3.5).unwrap();
        let rot = rot_y(0.7) * Mat3([[1.0, 0.0, 0.0], [0.0, 0.8, -0.6], [0.0, 0.6, 0.8]]);
        let a = render_view(&scene, &pose, &i);
        let b = render_view(&scene.rotated(&rot), &pose.rotated(&rot), &i);
        assert!(a.image.max_abs_diff(&b.image) < 1e-12);
        for (x, y) in a.depth.as_slice().iter().zip(b.depth.as_slice()) {
            assert!(x == y || (x - y).abs() < 1e-9);
        }
    }

    /// Every proper rotation mapping the axes onto signed axes.
    fn cube_rotations() -> Vec<Mat3<f64>> {
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut out = Vec::new();
        for p in perms {
            for signs in 0..8 {
                let mut m = Mat3::zero();
                for (row, col) in p.iter().enumerate() {
                    m.0[row][*col] = if signs >> row & 1 == 1 { -1.0 } else { 1.0 };
                }
                if m.det() > 0.0 {
                    out.push(m);
                }
            }
        }
        out
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3<f64> {
        let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let tau = std::f64::consts::TAU;
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        let (w, x, y, z) = (
            a * (tau * u2).sin(),
            a * (tau * u2).cos(),
            b * (tau * u3).sin(),
            b * (tau * u3).cos(),
        );
        Mat3([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - z * w),
                2.0 * (x * z + y * w),
            ],
            [
                2.0 * (x * y + z * w),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - x * w),
            ],
            [
                2.0 * (x * z - y * w),
                2.0 * (y * z + x * w),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ])
    }

    /// Fraction of `moved` points with a same-colored scene point within `tol`.
    fn match_fraction(scene: &PointScene, moved: &PointScene, tol: f64) -> f64 {
        let hits = moved
            .points
            .iter()
            .filter(|m| {
                scene
                    .points
                    .iter()
                    .any(|p| p.color == m.color && (p.position() - m.position()).norm() <= tol)
            })
            .count();
        hits as f64 / moved.len() as f64
    }

    #[test]
    fn scene_is_chiral() {
        let scene = build_scene(0);
        let mirror = PointScene {
            points: scene
                .points
                .iter()
                .map(|p| ScenePoint {
                    position: [-p.position[0], p.position[1], p.position[2]],
                    ..*p
                })
                .collect(),
        };
        let tol = 0.03;
        assert_eq!(match_fraction(&scene, &scene, tol), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut rotations = cube_rotations();
        assert_eq!(rotations.len(), 24);
        rotations.extend((0..300).map(|_| random_rotation(&mut rng)));
        let best = rotations
            .iter()
            .map(|r| match_fraction(&scene, &mirror.rotated(r), tol))
            .fold(0.0, f64::max);
        assert!(best < 0.9, "mirror matched {best}");
    }
}
