//! File formats and on-disk layout.

pub mod format;
pub mod layout;
pub mod text;

pub use format::*;
pub use layout::{atomic_write, indexed_path, read_indexed, read_poses, read_session, write_poses, write_session};
pub use text::{format_key_values, format_poses, normalize_key, parse_key_values, parse_poses};
