//! Simulated sessions and the paired per-location descriptors built from them.

use crate::descriptor::{lidar_descriptor, radar_descriptor, DescriptorConfig, PolarDescriptor, RadarPolarScan};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sim::{generate_trajectory, generate_world, render_lidar, render_radar, sensor_rng, Sensor, SensorConfig, World, WorldConfig};
use crate::submap::{build_submap, submap_bounds, PointCloud3D, SubmapConfig};
use crate::trajectory::{Pose2D, Trajectory};

/// Raw observations of one session, one cloud and one scan per pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub trajectory: Trajectory,
    pub clouds: Vec<PointCloud3D>,
    pub scans: Vec<RadarPolarScan>,
}

impl Session {
    pub fn new(trajectory: Trajectory, clouds: Vec<PointCloud3D>, scans: Vec<RadarPolarScan>) -> Result<Self> {
        if clouds.len() != trajectory.len() || scans.len() != trajectory.len() {
            return Err(Error::ShapeMismatch(format!(
                "session has {} poses, {} clouds and {} scans",
                trajectory.len(),
                clouds.len(),
                scans.len()
            )));
        }
        Ok(Self { trajectory, clouds, scans })
    }

    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub world: WorldConfig,
    pub sensors: SensorConfig,
    pub pose_count: usize,
    /// Poses of the exploring pass that form the map session; the rest of the
    /// trajectory retraces it and forms the query session.
    pub map_poses: usize,
    /// Master seed; replaces `world.seed`.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { world: WorldConfig::default(), sensors: SensorConfig::default(), pose_count: 900, map_poses: 600, seed: 0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.sensors.validate()?;
        if !(2..self.pose_count).contains(&self.map_poses) {
            return Err(Error::InvalidConfig(format!(
                "map_poses must lie in [2, pose_count), got {} of {}",
                self.map_poses, self.pose_count
            )));
        }
        Ok(())
    }
}

/// A simulated run split into a map session and a query session.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRun {
    pub world: World,
    pub map: Session,
    pub query: Session,
}

/// Renders one session; `first_index` keys the per-pose random streams.
pub fn render_session(world: &World, trajectory: Trajectory, sensors: &SensorConfig, seed: u64, first_index: usize) -> Result<Session> {
    let mut clouds = Vec::with_capacity(trajectory.len());
    let mut scans = Vec::with_capacity(trajectory.len());
    for (k, pose) in trajectory.poses().iter().enumerate() {
        let i = first_index + k;
        clouds.push(render_lidar(world, pose, sensors, &mut sensor_rng(seed, i, Sensor::Lidar)));
        scans.push(render_radar(world, pose, sensors, &mut sensor_rng(seed, i, Sensor::Radar)));
    }
    Session::new(trajectory, clouds, scans)
}

pub fn simulate(cfg: &SimConfig) -> Result<SimulatedRun> {
    cfg.validate()?;
    let world = generate_world(&WorldConfig { seed: cfg.seed, ..cfg.world.clone() })?;
    let revisit = 1.0 - cfg.map_poses as f64 / cfg.pose_count as f64;
    let full = generate_trajectory(&world, cfg.pose_count, revisit, cfg.seed)?;
    let map_traj = full.slice(0, cfg.map_poses, format!("map-{}", cfg.seed))?;
    let query_traj = full.slice(cfg.map_poses, cfg.pose_count, format!("query-{}", cfg.seed))?;
    let map = render_session(&world, map_traj, &cfg.sensors, cfg.seed, 0)?;
    let query = render_session(&world, query_traj, &cfg.sensors, cfg.seed, cfg.map_poses)?;
    Ok(SimulatedRun { world, map, query })
}

/// Both modalities' descriptors at one place.
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub pose: Pose2D,
    pub lidar: PolarDescriptor,
    pub radar: PolarDescriptor,
}

impl Location {
    pub fn descriptor(&self, modality: crate::descriptor::Modality) -> &Grid {
        match modality {
            crate::descriptor::Modality::Lidar => &self.lidar.values,
            crate::descriptor::Modality::Radar => &self.radar.values,
        }
    }
}

/// Lidar submap descriptor around `center`, binned without materializing the
/// accumulated cloud. Equals `lidar_descriptor(build_submap(..))`.
pub fn submap_descriptor(
    session: &Session,
    center: usize,
    submap: &SubmapConfig,
    desc: &DescriptorConfig,
) -> Result<PolarDescriptor> {
    let bounds = submap_bounds(&session.trajectory, center, submap)?;
    let poses = session.trajectory.poses();
    let c = poses[center];
    let (z_lo, z_hi) = submap.z_band;
    let r2 = submap.r_max * submap.r_max;
    let mut values = Grid::zeros(desc.rings, desc.sectors);
    for k in bounds.start_index..=bounds.end_index {
        let pose = poses[k];
        for p in &session.clouds[k].points {
            if p[2] < z_lo || p[2] > z_hi {
                continue;
            }
            let (wx, wy) = pose.to_world(p[0], p[1]);
            let (lx, ly) = c.to_local(wx, wy);
            if lx * lx + ly * ly > r2 {
                continue;
            }
            if let Some((i, j)) = desc.cell_of(lx, ly) {
                values.set(i, j, 1.0);
            }
        }
    }
    Ok(PolarDescriptor { modality: crate::descriptor::Modality::Lidar, values })
}

/// Reference path through the explicit submap; slower, used to check
/// [`submap_descriptor`].
pub fn submap_descriptor_reference(
    session: &Session,
    center: usize,
    submap: &SubmapConfig,
    desc: &DescriptorConfig,
) -> Result<PolarDescriptor> {
    let bounds = submap_bounds(&session.trajectory, center, submap)?;
    let cloud = build_submap(&session.trajectory, &session.clouds[bounds.start_index..=bounds.end_index], bounds, submap)?;
    Ok(lidar_descriptor(&cloud, desc))
}

/// Paired descriptors for every pose of a session.
pub fn describe_session(session: &Session, submap: &SubmapConfig, desc: &DescriptorConfig) -> Result<Vec<Location>> {
    submap.validate()?;
    desc.validate()?;
    (0..session.len())
        .map(|i| {
            Ok(Location {
                pose: session.trajectory.poses()[i],
                lidar: submap_descriptor(session, i, submap, desc)?,
                radar: radar_descriptor(&session.scans[i], desc)?,
            })
        })
        .collect()
}
