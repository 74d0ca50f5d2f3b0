//! Camera-set and run configuration files (TOML).
//!
//! ```toml
//! fov_deg = 40.26       # optional, default 40.26
//! width = 256           # optional, default 256
//! height = 256          # optional, default 256
//! res = 32              # feature resolution: 8, 16 or 32
//! steps = 200
//! blob_steps = 20
//! seed = 0
//! scale_t = 7.5
//! scale_c = 1.0
//! scale_e = 1.0
//! scale_p = 1.0
//! out = "runs/a"
//!
//! [[views]]
//! elevation_deg = 0.0
//! azimuth_deg = 0.0
//! distance = 3.5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::{CameraPose, Intrinsics, ViewSpec};
use crate::diffusion::{CfgScales, DEFAULT_BLOB_STEPS, DEFAULT_STEPS};
use crate::error::{Error, Result};

pub const DEFAULT_FOV_DEG: f64 = 40.26;
pub const DEFAULT_IMAGE_SIZE: usize = 256;
pub const DEFAULT_DISTANCE: f64 = 3.5;
pub const DEFAULT_RESOLUTION: usize = 32;
pub const FEATURE_RESOLUTIONS: [usize; 3] = [8, 16, 32];

/// Cameras sharing one set of intrinsics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSet {
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
    pub views: Vec<ViewSpec>,
}

impl CameraSet {
    pub fn intrinsics(&self) -> Result<Intrinsics<f64>> {
        Intrinsics::from_fov(self.fov_deg, self.width, self.height)
    }

    pub fn poses(&self) -> Result<Vec<CameraPose<f64>>> {
        self.views.iter().map(ViewSpec::pose).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::Config(
                "views: at least one camera is required".into(),
            ));
        }
        self.intrinsics()
            .map_err(|e| Error::Config(format!("fov_deg/width/height: {e}")))?;
        for (k, v) in self.views.iter().enumerate() {
            v.pose::<f64>()
                .map_err(|e| Error::Config(format!("views[{k}]: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cameras: CameraSet,
    pub resolution: usize,
    pub steps: usize,
    pub blob_steps: usize,
    pub seed: u64,
    pub scales: CfgScales<f64>,
    pub out: Option<PathBuf>,
}

/// Values given on the command line; each overrides the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub resolution: Option<usize>,
    pub steps: Option<usize>,
    pub blob_steps: Option<usize>,
    pub seed: Option<u64>,
    pub scale_t: Option<f64>,
    pub scale_c: Option<f64>,
    pub scale_e: Option<f64>,
    pub scale_p: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    fov_deg: Option<f64>,
    width: Option<usize>,
    height: Option<usize>,
    views: Vec<ViewSpec>,
    res: Option<usize>,
    steps: Option<usize>,
    blob_steps: Option<usize>,
    seed: Option<u64>,
    scale_t: Option<f64>,
    scale_c: Option<f64>,
    scale_e: Option<f64>,
    scale_p: Option<f64>,
    out: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let cameras = CameraSet {
            fov_deg: raw.fov_deg.unwrap_or(DEFAULT_FOV_DEG),
            width: raw.width.unwrap_or(DEFAULT_IMAGE_SIZE),
            height: raw.height.unwrap_or(DEFAULT_IMAGE_SIZE),
            views: raw.views,
        };
        cameras.validate()?;
        let scale = |o: Option<f64>, f: Option<f64>, d: f64| o.or(f).unwrap_or(d);
        let scales = CfgScales::new(
            scale(overrides.scale_t, raw.scale_t, 7.5),
            scale(overrides.scale_c, raw.scale_c, 1.0),
            scale(overrides.scale_e, raw.scale_e, 1.0),
            scale(overrides.scale_p, raw.scale_p, 1.0),
        )
        .map_err(|_| {
            Error::Config("scale_t/scale_c/scale_e/scale_p: must be finite and non-negative".into())
        })?;
        let cfg = Self {
            cameras,
            resolution: overrides
                .resolution
                .or(raw.res)
                .unwrap_or(DEFAULT_RESOLUTION),
            steps: overrides.steps.or(raw.steps).unwrap_or(DEFAULT_STEPS),
            blob_steps: overrides
                .blob_steps
                .or(raw.blob_steps)
                .unwrap_or(DEFAULT_BLOB_STEPS),
            seed: overrides.seed.or(raw.seed).unwrap_or(0),
            scales,
            out: overrides.out.clone().or(raw.out),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !FEATURE_RESOLUTIONS.contains(&self.resolution) {
            return Err(Error::Config(format!(
                "res: must be one of 8, 16, 32 (got {})",
                self.resolution
            )));
        }
        if self.steps == 0 || self.steps > crate::diffusion::BASE_STEPS {
            return Err(Error::Config(format!(
                "steps: must lie in 1..=1000 (got {})",
                self.steps
            )));
        }
        if self.blob_steps > self.steps {
            return Err(Error::Config(format!(
                "blob_steps: {} exceeds steps {}",
                self.blob_steps, self.steps
            )));
        }
        Ok(())
    }

    /// Intrinsics at the feature resolution.
    pub fn feature_intrinsics(&self) -> Result<Intrinsics<f64>> {
        self.cameras.intrinsics()?.at_resolution(self.resolution)
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::parse(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[views]]
elevation_deg = 0.0
azimuth_deg = 0.0
distance = 3.5
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = RunConfig::parse(MINIMAL, &Overrides::default()).unwrap();
        assert_eq!(c.cameras.fov_deg, 40.26);
        assert_eq!((c.cameras.width, c.cameras.height), (256, 256));
        assert_eq!(
            (c.resolution, c.steps, c.blob_steps, c.seed),
            (32, 200, 20, 0)
        );
        assert_eq!(c.scales, CfgScales::new(7.5, 1.0, 1.0, 1.0).unwrap());
        assert!(c.out.is_none());
    }

    #[test]
    fn overrides_beat_file_values() {
        let text = format!("steps = 50\nseed = 3\n{MINIMAL}");
        let o = Overrides {
            steps: Some(80),
            scale_t: Some(2.0),
            ..Default::default()
        };
        let c = RunConfig::parse(&text, &o).unwrap();
        assert_eq!((c.steps, c.seed, c.scales.text), (80, 3, 2.0));
    }

    #[test]
    fn validation_errors_name_the_field() {
        let err = RunConfig::parse(
            &format!("steps = 10\nblob_steps = 11\n{MINIMAL}"),
            &Overrides::default(),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("blob_steps"), "{err}");
        let err = RunConfig::parse(&format!("res = 33\n{MINIMAL}"), &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("res"), "{err}");
        let err = RunConfig::parse("fov_deg = 40.0\n", &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("views"), "{err}");
        let bad_view = MINIMAL.replace("0.0\nazimuth", "95.0\nazimuth");
        let err = RunConfig::parse(&bad_view, &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("views[0]"), "{err}");
        assert!(RunConfig::parse(&format!("bogus = 1\n{MINIMAL}"), &Overrides::default()).is_err());
    }
}
