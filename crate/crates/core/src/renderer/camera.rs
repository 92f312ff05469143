use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::Vec3;

/// Pinhole camera.
///
/// Camera space looks down `+z` with `x` to the right and `y` down the
/// image. A camera-space point `(x, y, z)` lands on pixel coordinates
/// `(fx·x/z + cx, fy·y/z + cy)`; pixel `(i, j)` covers `[i, i+1) × [j, j+1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Rigid world-to-camera transform, row-major 4×4.
    pub world_to_camera: [f64; 16],
}

impl Camera {
    /// Camera at `eye` looking at `target`; `up` fixes the roll.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, width: usize, height: usize, focal: f64) -> Self {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(rot * eye);
        let mut m = [0.0; 16];
        for r in 0..3 {
            for c in 0..3 {
                m[4 * r + c] = rot[(r, c)];
            }
            m[4 * r + 3] = t[r];
        }
        m[15] = 1.0;
        Self {
            width,
            height,
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            world_to_camera: m,
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let m = &self.world_to_camera;
        Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10])
    }

    pub fn translation(&self) -> Vec3 {
        let m = &self.world_to_camera;
        Vec3::new(m[3], m[7], m[11])
    }

    /// Camera center in world space.
    pub fn center(&self) -> Vec3 {
        -(self.rotation().transpose() * self.translation())
    }

    /// Checks intrinsics and that the rotation block is orthonormal within
    /// `tol` with determinant +1.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(invalid("camera image size must be positive"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(invalid(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy)));
        }
        if self.world_to_camera.iter().any(|v| !v.is_finite()) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(invalid("camera has non-finite parameters"));
        }
        let m = &self.world_to_camera;
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(Error::Validation("last row of world_to_camera must be 0 0 0 1".into()));
        }
        let r = self.rotation();
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err > tol || r.determinant() < 0.0 {
            return Err(Error::Validation(format!(
                "rotation is not orthonormal (deviation {err:e})"
            )));
        }
        Ok(())
    }

    /// World-space ray through the center of pixel `(x, y)`.
    ///
    /// The direction has unit camera-space depth, so the ray parameter is
    /// the depth along the optical axis.
    pub fn pixel_ray(&self, x: usize, y: usize) -> (Vec3, Vec3) {
        let u = x as f64 + 0.5;
        let v = y as f64 + 0.5;
        let dir_cam = Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        (self.center(), self.rotation().transpose() * dir_cam)
    }

    /// Pixel coordinates and depth of a world point.
    pub fn project(&self, p: &Vec3) -> (f64, f64, f64) {
        let q = self.rotation() * p + self.translation();
        (self.fx * q.x / q.z + self.cx, self.fy * q.y / q.z + self.cy, q.z)
    }

    pub fn from_rotation_translation(
        rotation: &Rotation3<f64>,
        translation: Vec3,
        width: usize,
        height: usize,
        fx: f64,
        fy: f64,
    ) -> Self {
        let r = rotation.matrix();
        let mut m = [0.0; 16];
        for i in 0..3 {
            for j in 0..3 {
                m[4 * i + j] = r[(i, j)];
            }
            m[4 * i + 3] = translation[i];
        }
        m[15] = 1.0;
        Self {
            width,
            height,
            fx,
            fy,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            world_to_camera: m,
        }
    }
}
