//! Interface-level configuration: unit-suffixed lengths, angles in degrees,
//! and a TOML config file whose values can be overridden field by field.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::affordance::GripperModel;
use crate::cloud::CloudFilterConfig;
use crate::error::{io_err, Error, Result};
use crate::normals::NeighborhoodSpec;
use crate::pipeline::PipelineConfig;

/// A length in meters, parsed from `"8cm"`, `"5 mm"`, `"0.08m"` or a bare
/// number of meters.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct Length(pub f64);

impl Length {
    pub fn meters(self) -> f64 {
        self.0
    }
}

impl FromStr for Length {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (num, scale) = if let Some(v) = t.strip_suffix("mm") {
            (v, 1e-3)
        } else if let Some(v) = t.strip_suffix("cm") {
            (v, 1e-2)
        } else if let Some(v) = t.strip_suffix('m') {
            (v, 1.0)
        } else {
            (t, 1.0)
        };
        let v: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse length {s:?} (use e.g. 8cm, 5mm, 0.08m)")))?;
        if !v.is_finite() {
            return Err(Error::Config(format!("length {s:?} is not finite")));
        }
        Ok(Length(v * scale))
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(v) => Ok(Length(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperSection {
    pub d: Option<Length>,
    pub w: Option<Length>,
    pub e: Option<Length>,
    pub h: Option<Length>,
    pub l: Option<Length>,
    pub g: Option<Length>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationSection {
    pub theta_low_deg: Option<f64>,
    pub theta_high_deg: Option<f64>,
    pub k: Option<f64>,
    pub radius: Option<Length>,
    pub min_segment_size: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalsSection {
    pub radius: Option<Length>,
    pub knn: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub voxel_leaf: Option<Length>,
    pub smoothing_radius: Option<Length>,
    pub max_displacement: Option<Length>,
}

/// Every field optional; absent fields keep their defaults.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub gripper: GripperSection,
    #[serde(default)]
    pub segmentation: SegmentationSection,
    #[serde(default)]
    pub normals: NormalsSection,
    #[serde(default)]
    pub filter: FilterSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Overlays `other` on `self`: fields set in `other` win.
    pub fn merged(mut self, other: ConfigFile) -> Self {
        macro_rules! take {
            ($($sec:ident . $f:ident),* $(,)?) => {
                $( if other.$sec.$f.is_some() { self.$sec.$f = other.$sec.$f; } )*
            };
        }
        take!(
            gripper.d, gripper.w, gripper.e, gripper.h, gripper.l, gripper.g,
            segmentation.theta_low_deg, segmentation.theta_high_deg, segmentation.k,
            segmentation.radius, segmentation.min_segment_size,
            normals.radius, normals.knn,
            filter.voxel_leaf, filter.smoothing_radius, filter.max_displacement,
        );
        self
    }

    /// Applies the overrides to `base` and validates the result.
    pub fn resolve(&self, base: PipelineConfig) -> Result<PipelineConfig> {
        let mut cfg = base;
        let gr = &self.gripper;
        let m = |l: Option<Length>, d: f64| l.map_or(d, Length::meters);
        cfg.gripper = GripperModel {
            d: m(gr.d, cfg.gripper.d),
            w: m(gr.w, cfg.gripper.w),
            e: m(gr.e, cfg.gripper.e),
            h: m(gr.h, cfg.gripper.h),
            l: m(gr.l, cfg.gripper.l),
            g: m(gr.g, cfg.gripper.g),
        };
        let s = &self.segmentation;
        let seg = &mut cfg.segmentation;
        if let Some(v) = s.theta_low_deg {
            seg.theta_low = v.to_radians();
        }
        if let Some(v) = s.theta_high_deg {
            seg.theta_high = v.to_radians();
        }
        if let Some(v) = s.k {
            seg.edge_ratio_k = v;
        }
        seg.radius = m(s.radius, seg.radius);
        if let Some(v) = s.min_segment_size {
            seg.min_segment_size = v;
        }
        match (self.normals.radius, self.normals.knn) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("set either normals.radius or normals.knn, not both".into()))
            }
            (Some(r), None) => cfg.normals = Some(NeighborhoodSpec::Radius(r.meters())),
            (None, Some(k)) => cfg.normals = Some(NeighborhoodSpec::Knn(k)),
            (None, None) => {}
        }
        let f = &self.filter;
        cfg.filter = CloudFilterConfig {
            voxel_leaf: m(f.voxel_leaf, cfg.filter.voxel_leaf),
            smoothing_radius: m(f.smoothing_radius, cfg.filter.smoothing_radius),
            max_displacement: f.max_displacement.map(Length::meters).or(cfg.filter.max_displacement),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Configuration as reported back in output files, angles in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub gripper: GripperModel,
    pub theta_low_deg: f64,
    pub theta_high_deg: f64,
    pub edge_ratio_k: f64,
    pub radius: f64,
    pub min_segment_size: usize,
    pub normals: NeighborhoodSpec,
    pub filter: CloudFilterConfig,
}

impl From<&PipelineConfig> for ConfigEcho {
    fn from(cfg: &PipelineConfig) -> Self {
        Self {
            gripper: cfg.gripper,
            theta_low_deg: cfg.segmentation.theta_low.to_degrees(),
            theta_high_deg: cfg.segmentation.theta_high.to_degrees(),
            edge_ratio_k: cfg.segmentation.edge_ratio_k,
            radius: cfg.segmentation.radius,
            min_segment_size: cfg.segmentation.min_segment_size,
            normals: cfg.normal_spec(),
            filter: cfg.filter,
        }
    }
}
