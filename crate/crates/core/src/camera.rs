//! Pinhole cameras, spherical pose sampling, relative poses and pixel rays.
//!
//! Conventions: the world is right-handed and Y-up. In the camera frame the
//! optical axis is −Z, +X points right and +Y points up; image coordinates
//! grow right (`u`) and down (`v`). Pixel `(u, v)` has its center at
//! `(u + 0.5, v + 0.5)` in continuous pixel coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

/// Pinhole intrinsics in pixels. Square pixels, no distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics<T> {
    pub focal: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> Intrinsics<T> {
    pub fn new(focal: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        if focal <= T::zero() || !focal.is_finite() {
            return Err(Error::invalid(format!(
                "focal length must be positive, got {focal}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1"));
        }
        Ok(Self {
            focal,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Intrinsics for a horizontal field of view, principal point at the image center.
    pub fn from_fov(fov_deg: T, width: usize, height: usize) -> Result<Self> {
        if !(fov_deg > T::zero() && fov_deg < T::lit(180.0)) {
            return Err(Error::invalid(format!(
                "field of view must lie in (0, 180) degrees, got {fov_deg}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1"));
        }
        let w = T::from_usize_lossy(width);
        let h = T::from_usize_lossy(height);
        let half = (fov_deg / T::lit(2.0)).to_radians();
        let focal = w / (T::lit(2.0) * half.tan());
        Self::new(focal, w / T::lit(2.0), h / T::lit(2.0), width, height)
    }

    /// Rescales to a grid of `height` rows, keeping the aspect ratio. Focal
    /// length and principal point scale by `height / self.height`.
    pub fn at_resolution(&self, height: usize) -> Result<Self> {
        if height == 0 {
            return Err(Error::invalid("feature resolution must be at least 1"));
        }
        let factor = T::from_usize_lossy(height) / T::from_usize_lossy(self.height);
        let width = (T::from_usize_lossy(self.width) * factor)
            .round()
            .to_usize()
            .unwrap_or(0)
            .max(1);
        Self::new(
            self.focal * factor,
            self.cx * factor,
            self.cy * factor,
            width,
            height,
        )
    }

    /// Maps homogeneous pixel coordinates to camera-frame directions with
    /// depth 1 along the optical axis (the inverse calibration under this
    /// crate's axis conventions).
    pub fn inverse_calibration(&self) -> Mat3<T> {
        let f = self.focal;
        let (o, z) = (T::one(), T::zero());
        Mat3([
            [o / f, z, -self.cx / f],
            [z, -o / f, self.cy / f],
            [z, z, -o],
        ])
    }
}

/// Rigid camera placement. `rotation` maps camera-frame vectors to the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose<T> {
    pub rotation: Mat3<T>,
    pub position: Vec3<T>,
}

impl<T: Real> CameraPose<T> {
    pub fn new(rotation: Mat3<T>, position: Vec3<T>) -> Result<Self> {
        check_rotation(&rotation)?;
        Ok(Self { rotation, position })
    }

    /// Camera at `eye` looking at `target`. When the viewing direction is
    /// parallel to `up`, +Z is used as the up vector instead.
    pub fn look_at(eye: Vec3<T>, target: Vec3<T>, up: Vec3<T>) -> Result<Self> {
        let forward = (target - eye)
            .normalized()
            .ok_or_else(|| Error::invalid("look-at target coincides with the eye"))?;
        let mut side = forward.cross(&up);
        if side.norm() <= T::lit(1e-9) {
            side = forward.cross(&Vec3::new(T::zero(), T::zero(), T::one()));
        }
        let right = side
            .normalized()
            .ok_or_else(|| Error::invalid("degenerate look-at frame"))?;
        let cam_up = right.cross(&forward);
        Ok(Self {
            rotation: Mat3::from_cols(right, cam_up, -forward),
            position: eye,
        })
    }

    /// World-space optical axis (camera −Z).
    pub fn optical_axis(&self) -> Vec3<T> {
        -self.rotation.col(2)
    }

    /// World point expressed in this camera's frame.
    pub fn world_to_camera(&self, x: &Vec3<T>) -> Vec3<T> {
        self.rotation.transpose().mul_vec(&(*x - self.position))
    }

    pub fn camera_to_world(&self, x: &Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(x) + self.position
    }

    /// Applies a world-frame rotation about the origin to the whole camera.
    pub fn rotated(&self, world_rotation: &Mat3<T>) -> Self {
        Self {
            rotation: *world_rotation * self.rotation,
            position: world_rotation.mul_vec(&self.position),
        }
    }
}

fn check_rotation<T: Real>(r: &Mat3<T>) -> Result<()> {
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
    if r.orthonormality_error() > tol || (r.det() - T::one()).abs() > tol {
        return Err(Error::invalid(
            "rotation is not orthonormal with determinant +1",
        ));
    }
    Ok(())
}

/// Camera on a sphere around the origin, looking at it with +Y up.
///
/// `position = distance · (cos el · sin az, sin el, cos el · cos az)`.
pub fn spherical_pose<T: Real>(
    elevation_deg: T,
    azimuth_deg: T,
    distance: T,
) -> Result<CameraPose<T>> {
    if !(elevation_deg >= T::lit(-90.0) && elevation_deg <= T::lit(90.0)) {
        return Err(Error::invalid(format!(
            "elevation must lie in [-90, 90] degrees, got {elevation_deg}"
        )));
    }
    if distance <= T::zero() || !distance.is_finite() {
        return Err(Error::invalid(format!(
            "distance must be positive, got {distance}"
        )));
    }
    if !azimuth_deg.is_finite() {
        return Err(Error::invalid("azimuth must be finite"));
    }
    let el = elevation_deg.to_radians();
    let az = azimuth_deg.to_radians();
    let eye = Vec3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos()).scale(distance);
    CameraPose::look_at(eye, Vec3::zero(), Vec3::new(T::zero(), T::one(), T::zero()))
}

/// Rigid transform from a source camera frame to a target camera frame:
/// `x_tgt = rotation · x_src + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> RelativePose<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zero(),
        }
    }

    pub fn apply(&self, x: &Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(x) + self.translation
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Self) -> Self {
        Self {
            rotation: next.rotation * self.rotation,
            translation: next.rotation.mul_vec(&self.translation) + next.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -rt.mul_vec(&self.translation),
        }
    }

    /// `[R | t]` as a row-major 3×4 matrix.
    pub fn to_matrix(&self) -> [[T; 4]; 3] {
        let r = &self.rotation.0;
        let t = &self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t[0]],
            [r[1][0], r[1][1], r[1][2], t[1]],
            [r[2][0], r[2][1], r[2][2], t[2]],
        ]
    }
}

pub fn relative_pose<T: Real>(src: &CameraPose<T>, tgt: &CameraPose<T>) -> RelativePose<T> {
    let tgt_inv = tgt.rotation.transpose();
    RelativePose {
        rotation: tgt_inv * src.rotation,
        translation: tgt_inv.mul_vec(&(src.position - tgt.position)),
    }
}

/// World-space ray with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    pub direction: Vec3<T>,
}

impl<T: Real> Ray<T> {
    /// Normalizes `direction`; fails for a zero direction.
    pub fn new(origin: Vec3<T>, direction: Vec3<T>) -> Result<Self> {
        let direction = direction
            .normalized()
            .ok_or_else(|| Error::invalid("ray direction must be non-zero"))?;
        Ok(Self { origin, direction })
    }

    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.direction.scale(t)
    }
}

/// Ray through continuous pixel coordinates `(px, py)`.
pub fn ray_through<T: Real>(pose: &CameraPose<T>, intr: &Intrinsics<T>, px: T, py: T) -> Ray<T> {
    let cam = Vec3::new(
        (px - intr.cx) / intr.focal,
        -(py - intr.cy) / intr.focal,
        -T::one(),
    );
    let dir = pose.rotation.mul_vec(&cam);
    Ray {
        origin: pose.position,
        direction: dir.normalized().expect("camera ray has unit z component"),
    }
}

/// Ray through the center of pixel `(u, v)`.
pub fn pixel_ray<T: Real>(
    pose: &CameraPose<T>,
    intr: &Intrinsics<T>,
    u: usize,
    v: usize,
) -> Result<Ray<T>> {
    if u >= intr.width || v >= intr.height {
        return Err(Error::invalid(format!(
            "pixel ({u}, {v}) outside {}x{} image",
            intr.width, intr.height
        )));
    }
    let half = T::lit(0.5);
    Ok(ray_through(
        pose,
        intr,
        T::from_usize_lossy(u) + half,
        T::from_usize_lossy(v) + half,
    ))
}

/// Continuous pixel position of a projected point and its depth along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<T> {
    pub u: T,
    pub v: T,
    pub depth: T,
}

impl<T: Real> Projection<T> {
    /// Integer pixel containing the projection, if inside a `width × height` image.
    pub fn pixel(&self, width: usize, height: usize) -> Option<(usize, usize)> {
        if self.u < T::zero() || self.v < T::zero() {
            return None;
        }
        let (u, v) = (self.u.floor().to_usize()?, self.v.floor().to_usize()?);
        (u < width && v < height).then_some((u, v))
    }
}

/// Minimum depth for a point to count as in front of the camera.
pub const MIN_DEPTH: f64 = 1e-9;

/// Pinhole projection; `None` marks a point at or behind the camera plane.
pub fn project_point<T: Real>(
    pose: &CameraPose<T>,
    intr: &Intrinsics<T>,
    x: &Vec3<T>,
) -> Option<Projection<T>> {
    let c = pose.world_to_camera(x);
    let depth = -c.z();
    if depth <= T::lit(MIN_DEPTH) {
        return None;
    }
    Some(Projection {
        u: intr.cx + intr.focal * c.x() / depth,
        v: intr.cy - intr.focal * c.y() / depth,
        depth,
    })
}

/// One camera in a camera-set file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSpec {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub distance: f64,
}

impl ViewSpec {
    pub fn pose<T: Real>(&self) -> Result<CameraPose<T>> {
        spherical_pose(
            T::lit(self.elevation_deg),
            T::lit(self.azimuth_deg),
            T::lit(self.distance),
        )
    }
}
