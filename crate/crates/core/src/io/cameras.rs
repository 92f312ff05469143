use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::renderer::Camera;

/// Orthonormality tolerance applied to camera files.
pub const CAMERA_TOLERANCE: f64 = 1e-6;

fn json_err(e: serde_json::Error, context: &str) -> Error {
    Error::Parse {
        line: e.line(),
        message: format!("{context}{e}"),
    }
}

/// Parses a JSON array of cameras and validates each entry.
pub fn parse_cameras(text: &str) -> Result<Vec<Camera>> {
    let entries: Vec<serde_json::Value> = serde_json::from_str(text).map_err(|e| json_err(e, ""))?;
    let mut cameras = Vec::with_capacity(entries.len());
    for (i, entry) in entries.into_iter().enumerate() {
        let camera: Camera = serde_json::from_value(entry).map_err(|e| Error::Parse {
            line: 0,
            message: format!("camera {i}: {e}"),
        })?;
        camera
            .validate(CAMERA_TOLERANCE)
            .map_err(|e| Error::Validation(format!("camera {i}: {e}")))?;
        cameras.push(camera);
    }
    Ok(cameras)
}

pub fn read_cameras(path: &Path) -> Result<Vec<Camera>> {
    parse_cameras(&fs::read_to_string(path)?)
}

/// Writes cameras as a JSON array.
pub fn write_cameras(cameras: &[Camera], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(cameras).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    const IDENTITY: &str = r#"{"width": 64, "height": 64, "fx": 100, "fy": 100, "cx": 32, "cy": 32,
        "world_to_camera": [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}"#;

    #[test]
    fn identity_camera_looks_down_z() {
        let cams = parse_cameras(&format!("[{IDENTITY}]")).unwrap();
        assert_eq!(cams.len(), 1);
        let c = &cams[0];
        assert_eq!(c.center(), Vec3::zeros());
        let (u, v, z) = c.project(&Vec3::new(0.0, 0.0, 2.0));
        assert_eq!((u, v, z), (32.0, 32.0, 2.0));
        let (u, v, _) = c.project(&Vec3::new(0.1, 0.2, 1.0));
        assert!((u - 42.0).abs() < 1e-12 && (v - 52.0).abs() < 1e-12);
    }

    #[test]
    fn order_is_preserved_and_round_trips() {
        let cams: Vec<Camera> = (0..3)
            .map(|i| Camera::look_at(Vec3::new(2.0, i as f64, 1.0), Vec3::repeat(0.5), Vec3::y(), 8 + i, 8, 20.0))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cams.json");
        write_cameras(&cams, &path).unwrap();
        let back = read_cameras(&path).unwrap();
        assert_eq!(back, cams);
    }

    #[test]
    fn errors_name_the_problem() {
        let missing = IDENTITY.replace(r#""fx": 100, "#, "");
        let err = parse_cameras(&format!("[{IDENTITY}, {missing}]")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(msg.contains("camera 1") && msg.contains("fx"), "{msg}");

        let skewed = IDENTITY.replace("[1,0,0,0,", "[1,0.01,0,0,");
        let err = parse_cameras(&format!("[{IDENTITY}, {IDENTITY}, {skewed}]")).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("camera 2"), "{err}");

        assert!(matches!(parse_cameras("[{"), Err(Error::Parse { line: 1, .. })));
    }
}
