//! Polar ring x sector descriptors for lidar submaps and radar scans.
//!
//! Ring `i` covers planar range `[i * r_max / rings, (i + 1) * r_max / rings)`;
//! sector `j` covers azimuth `[-pi + j * 2pi / sectors, -pi + (j + 1) * 2pi / sectors)`,
//! counter-clockwise positive. Both modalities share this layout so the encoder
//! sees aligned geometry.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::submap::PointCloud3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Lidar,
    Radar,
}

impl Modality {
    pub fn code(self) -> u8 {
        match self {
            Modality::Lidar => 0,
            Modality::Radar => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Modality::Lidar),
            1 => Some(Modality::Radar),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Lidar => "lidar",
            Modality::Radar => "radar",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lidar" => Ok(Modality::Lidar),
            "radar" => Ok(Modality::Radar),
            other => Err(format!("unknown modality `{other}` (expected lidar or radar)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorConfig {
    pub rings: usize,
    pub sectors: usize,
    pub r_max: f64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self { rings: 40, sectors: 120, r_max: 80.0 }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rings == 0 || self.sectors == 0 || !(self.r_max > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid descriptor config {self:?}")));
        }
        Ok(())
    }

    /// Cell containing the planar point `(x, y)`, or `None` beyond `r_max`.
    #[inline]
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let r = x.hypot(y);
        if !(r < self.r_max) {
            return None;
        }
        let ring = ((r / self.r_max * self.rings as f64) as usize).min(self.rings - 1);
        Some((ring, self.sector_of(y.atan2(x))))
    }

    #[inline]
    pub fn sector_of(&self, azimuth: f64) -> usize {
        let s = ((azimuth + PI) / (2.0 * PI) * self.sectors as f64).floor() as isize;
        s.rem_euclid(self.sectors as isize) as usize
    }
}

/// A single FMCW radar sweep in native polar form.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarPolarScan {
    pub n_azimuth: usize,
    pub n_range: usize,
    /// Meters per range bin.
    pub range_resolution: f64,
    /// `n_azimuth x n_range`, row-major, each value in `[0, 1]`.
    pub intensities: Vec<f64>,
}

impl RadarPolarScan {
    pub fn new(n_azimuth: usize, n_range: usize, range_resolution: f64, intensities: Vec<f64>) -> Result<Self> {
        if n_azimuth == 0 || n_range == 0 {
            return Err(Error::ShapeMismatch("radar scan needs at least one bin per axis".into()));
        }
        if !(range_resolution > 0.0 && range_resolution.is_finite()) {
            return Err(Error::InvalidConfig(format!("range resolution {range_resolution} must be > 0")));
        }
        if intensities.len() != n_azimuth * n_range {
            return Err(Error::ShapeMismatch(format!(
                "{} intensities for a {n_azimuth}x{n_range} scan",
                intensities.len()
            )));
        }
        if let Some(v) = intensities.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidConfig(format!("radar intensity {v} outside [0, 1]")));
        }
        Ok(Self { n_azimuth, n_range, range_resolution, intensities })
    }

    pub fn zeros(n_azimuth: usize, n_range: usize, range_resolution: f64) -> Self {
        Self { n_azimuth, n_range, range_resolution, intensities: vec![0.0; n_azimuth * n_range] }
    }

    #[inline]
    pub fn get(&self, azimuth: usize, range: usize) -> f64 {
        self.intensities[azimuth * self.n_range + range]
    }

    #[inline]
    pub fn set(&mut self, azimuth: usize, range: usize, v: f64) {
        self.intensities[azimuth * self.n_range + range] = v;
    }

    /// Azimuth of the center of bin `a`, radians.
    #[inline]
    pub fn azimuth_center(&self, a: usize) -> f64 {
        -PI + (a as f64 + 0.5) * 2.0 * PI / self.n_azimuth as f64
    }

    #[inline]
    pub fn range_center(&self, r: usize) -> f64 {
        (r as f64 + 0.5) * self.range_resolution
    }

    pub fn max_range(&self) -> f64 {
        self.n_range as f64 * self.range_resolution
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarDescriptor {
    pub modality: Modality,
    pub values: Grid,
}

impl PolarDescriptor {
    pub fn rings(&self) -> usize {
        self.values.rows()
    }

    pub fn sectors(&self) -> usize {
        self.values.cols()
    }

    /// Rotation by `k` sector widths.
    pub fn shift_sectors(&self, k: isize) -> Self {
        Self { modality: self.modality, values: self.values.shift_columns(k) }
    }

    /// Per-ring mean, the rotation-invariant key used for coarse search.
    pub fn ring_key(&self) -> Vec<f64> {
        (0..self.rings())
            .map(|r| self.values.row(r).iter().sum::<f64>() / self.sectors() as f64)
            .collect()
    }
}

/// Binary occupancy of a point cloud already expressed in the sensor frame.
pub fn lidar_descriptor(cloud: &PointCloud3D, cfg: &DescriptorConfig) -> PolarDescriptor {
    let mut values = Grid::zeros(cfg.rings, cfg.sectors);
    for p in &cloud.points {
        if let Some((i, j)) = cfg.cell_of(p[0], p[1]) {
            values.set(i, j, 1.0);
        }
    }
    PolarDescriptor { modality: Modality::Lidar, values }
}

/// Max-pools native radar bins into descriptor cells by bin-center location.
pub fn radar_descriptor(scan: &RadarPolarScan, cfg: &DescriptorConfig) -> Result<PolarDescriptor> {
    if scan.max_range() < cfg.r_max {
        return Err(Error::InsufficientRange { covered: scan.max_range(), required: cfg.r_max });
    }
    let mut values = Grid::zeros(cfg.rings, cfg.sectors);
    for a in 0..scan.n_azimuth {
        let sector = cfg.sector_of(scan.azimuth_center(a));
        for r in 0..scan.n_range {
            let range = scan.range_center(r);
            if range >= cfg.r_max {
                break;
            }
            let ring = ((range / cfg.r_max * cfg.rings as f64) as usize).min(cfg.rings - 1);
            let v = scan.get(a, r);
            if v > values.get(ring, sector) {
                values.set(ring, sector, v);
            }
        }
    }
    Ok(PolarDescriptor { modality: Modality::Radar, values })
}
