//! Directory layout of sessions and derived artifacts, with atomic writes.
//!
//! ```text
//! session/
//!   poses.txt        t x y yaw per line
//!   meta.txt         key = value
//!   lidar/000000.plcd ...
//!   radar/000000.radr ...
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::Session;
use crate::error::{Error, Result};
use crate::io::format::{decode_cloud, decode_scan, encode_cloud, encode_scan};
use crate::io::text::{format_poses, parse_poses};
use crate::submap::PointCloud3D;
use crate::trajectory::Trajectory;

pub const POSES_FILE: &str = "poses.txt";
pub const META_FILE: &str = "meta.txt";

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let name = path.file_name().ok_or_else(|| Error::InvalidConfig(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// `dir/000042.ext`
pub fn indexed_path(dir: &Path, index: usize, ext: &str) -> PathBuf {
    dir.join(format!("{index:06}.{ext}"))
}

/// Reads `dir/000000.ext`, `dir/000001.ext`, ... for exactly `count` files,
/// failing if any is missing or an extra index follows.
pub fn read_indexed<T>(dir: &Path, ext: &str, count: usize, mut decode: impl FnMut(&[u8]) -> Result<T>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let p = indexed_path(dir, i, ext);
        let bytes = fs::read(&p).map_err(|e| io_context(e, &p))?;
        out.push(decode(&bytes).map_err(|e| data_context(e, &p))?);
    }
    let extra = indexed_path(dir, count, ext);
    if extra.exists() {
        return Err(Error::ShapeMismatch(format!("{} has more files than the {count} poses", dir.display())));
    }
    Ok(out)
}

pub fn io_context(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Prefixes a decoding failure with the file it came from.
fn data_context(e: Error, path: &Path) -> Error {
    match e {
        Error::Format(f) => Error::ShapeMismatch(format!("{}: {f}", path.display())),
        other => other,
    }
}

pub fn read_poses(path: &Path, session_id: &str) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(|e| io_context(e, path))?;
    parse_poses(&text, session_id)
}

pub fn write_poses(path: &Path, trajectory: &Trajectory) -> Result<()> {
    atomic_write(path, format_poses(trajectory.poses()).as_bytes())
}

pub fn write_session(root: &Path, session: &Session, meta: &str) -> Result<()> {
    fs::create_dir_all(root.join("lidar"))?;
    fs::create_dir_all(root.join("radar"))?;
    write_poses(&root.join(POSES_FILE), &session.trajectory)?;
    for (i, cloud) in session.clouds.iter().enumerate() {
        atomic_write(&indexed_path(&root.join("lidar"), i, "plcd"), &encode_cloud(&cloud.points))?;
    }
    for (i, scan) in session.scans.iter().enumerate() {
        atomic_write(&indexed_path(&root.join("radar"), i, "radr"), &encode_scan(scan)?)?;
    }
    atomic_write(&root.join(META_FILE), meta.as_bytes())
}

pub fn read_session(root: &Path) -> Result<Session> {
    let id = root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let trajectory = read_poses(&root.join(POSES_FILE), &id)?;
    let poses = trajectory.poses().to_vec();
    let mut k = 0;
    let clouds = read_indexed(&root.join("lidar"), "plcd", poses.len(), |b| {
        let cloud = PointCloud3D::new(decode_cloud(b)?, poses[k]);
        k += 1;
        Ok(cloud)
    })?;
    let scans = read_indexed(&root.join("radar"), "radr", poses.len(), decode_scan)?;
    Session::new(trajectory, clouds, scans)
}
