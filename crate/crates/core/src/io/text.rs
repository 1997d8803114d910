//! Plain-text inputs: pose files and `key = value` configuration.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::trajectory::{Pose2D, Trajectory};

/// Parses `t x y yaw` lines; blank lines and `#` comments are skipped.
/// Line numbers in errors are one-based.
pub fn parse_poses(text: &str, session_id: &str) -> Result<Trajectory> {
    let mut poses = Vec::new();
    let mut prev_t: Option<(f64, usize)> = None;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 fields `t x y yaw`, found {}", fields.len())));
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse::<f64>().map_err(|_| parse_err(format!("not a number: {f:?}")))?;
            if !slot.is_finite() {
                return Err(parse_err(format!("non-finite value {f:?}")));
            }
        }
        if let Some((t, _)) = prev_t {
            if v[0] <= t {
                return Err(parse_err(format!("timestamp {} does not increase past {}", v[0], t)));
            }
        }
        prev_t = Some((v[0], line_no));
        poses.push(Pose2D::new(v[0], v[1], v[2], v[3]));
    }
    if poses.is_empty() {
        return Err(Error::Parse { line: 0, msg: "pose file contains no poses".into() });
    }
    Trajectory::new(poses, session_id)
}

/// Writes poses with shortest round-tripping decimals.
pub fn format_poses(poses: &[Pose2D]) -> String {
    let mut s = String::from("# t x y yaw\n");
    for p in poses {
        s.push_str(&format!("{:?} {:?} {:?} {:?}\n", p.t, p.x, p.y, p.yaw));
    }
    s
}

/// Parses `key = value` lines. Keys are normalized to kebab-case; a repeated
/// key is an error so the effective value is never ambiguous.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: k + 1, msg };
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
        let key = normalize_key(key.trim());
        if key.is_empty() {
            return Err(err("empty key".into()));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(err(format!("key `{key}` given twice")));
        }
    }
    Ok(out)
}

pub fn normalize_key(key: &str) -> String {
    key.replace('_', "-")
}

pub fn format_key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pose() {
        let t = parse_poses("0.0 1.0 2.0 0.5\n", "s").unwrap();
        assert_eq!(t.poses(), &[Pose2D::new(0.0, 1.0, 2.0, 0.5)]);
    }

    #[test]
    fn yaw_is_wrapped() {
        let t = parse_poses("# header\n\n0 0 0 7.0\n", "s").unwrap();
        assert!((t.poses()[0].yaw - (7.0 - std::f64::consts::TAU)).abs() < 1e-15);
        assert!((t.poses()[0].yaw - 0.7168).abs() < 1e-4);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_poses("0 0 0 0\n# c\n1 0 x 0\n", "s").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_poses("0 0 0 0\n1 0 0\n", "s").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = parse_poses("1 0 0 0\n1 0 0 0\n", "s").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(parse_poses("# nothing\n", "s").is_err());
    }

    #[test]
    fn key_values() {
        let kv = parse_key_values("# c\nepochs = 3  # trailing\npose_count=10\n\n").unwrap();
        assert_eq!(kv.get("epochs").map(String::as_str), Some("3"));
        assert_eq!(kv.get("pose-count").map(String::as_str), Some("10"));
        assert!(matches!(parse_key_values("a = 1\nb\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_key_values("a = 1\na = 2\n").is_err());
        assert!(parse_key_values(" = 2\n").is_err());
    }
}
