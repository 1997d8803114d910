//! Deterministic multi-modal simulator: a static world of walls and poles,
//! revisiting trajectories through it, and lidar/radar renders along them.

mod path;
mod render;
mod world;

pub use path::{generate_trajectory, PERIOD, STEP};
pub use render::{lidar_azimuth, render_lidar, render_radar, sensor_rng, Sensor, SensorConfig};
pub use world::{generate_world, Hit, Pole, Wall, World, WorldConfig};
