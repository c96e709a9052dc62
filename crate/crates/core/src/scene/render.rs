//! Ray casting and water-column image formation.

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::Pose;
use crate::rng::splitmix64;
use crate::scene::{CameraIntrinsics, Image, Primitive, SceneSpec, Shape, WaterColumn};

const RAY_EPS: f64 = 1e-9;

/// Renders the scene from `pose` as an RGB image.
///
/// Same inputs and seed give a bit-identical image. The seed drives the
/// per-image brightness jitter and the per-pixel sensor noise; scene
/// texture comes from the per-primitive seeds and is view-independent.
pub fn render(
    scene: &SceneSpec,
    pose: &Pose,
    camera: &CameraIntrinsics,
    water: &WaterColumn,
    seed: u64,
) -> Result<Image, crate::scene::SceneError> {
    scene.validate()?;
    camera.validate()?;
    water.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, water.brightness_jitter_std)
        .map_err(|_| crate::scene::SceneError::InvalidWater { reason: "brightness jitter std" })?;
    let sensor = Normal::new(0.0, water.pixel_noise_std)
        .map_err(|_| crate::scene::SceneError::InvalidWater { reason: "pixel noise std" })?;
    let bias = water.brightness_bias + jitter.sample(&mut rng);

    let f = camera.focal();
    let (w, h) = (camera.width, camera.height);
    let mut img = Image::zeros(w, h, 3)?;
    for py in 0..h {
        for px in 0..w {
            let dir_cam = Vector3::new(
                (px as f64 + 0.5 - w as f64 / 2.0) / f,
                (py as f64 + 0.5 - h as f64 / 2.0) / f,
                1.0,
            )
            .normalize();
            let dir = pose.orientation.rotate_vector(dir_cam);
            let mut color = shade(scene, pose.position, dir, water);
            for c in 0..3 {
                let v = color[c as usize] + bias + sensor.sample(&mut rng);
                color[c as usize] = v.clamp(0.0, 1.0);
            }
            for c in 0..3 {
                img.set(px, py, c, color[c as usize]);
            }
        }
    }
    Ok(img)
}

fn shade(scene: &SceneSpec, origin: Vector3<f64>, dir: Vector3<f64>, water: &WaterColumn) -> [f64; 3] {
    let hit = scene
        .primitives
        .iter()
        .filter_map(|p| intersect(p, origin, dir).map(|t| (t, p)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    match hit {
        None => scene.background,
        Some((t, prim)) => {
            let point = origin + dir * t;
            let local = (point - prim.center) / scene.texture_cell;
            let n = value_noise3(local, prim.texture_seed);
            let delta = scene.texture_amplitude * (n - 0.5);
            let fog = (-water.turbidity * t).exp();
            let mut out = [0.0; 3];
            for c in 0..3 {
                let textured = (prim.color[c] + delta).clamp(0.0, 1.0);
                out[c] = textured * fog + scene.background[c] * (1.0 - fog);
            }
            out
        }
    }
}

/// Nearest positive hit distance along `origin + t·dir`, if any.
fn intersect(prim: &Primitive, origin: Vector3<f64>, dir: Vector3<f64>) -> Option<f64> {
    match prim.shape {
        Shape::Box => {
            let b = prim.aabb();
            ray_aabb(origin, dir, b.min, b.max)
        }
        Shape::Cylinder => ray_cylinder(prim, origin, dir),
    }
}

/// Slab test. Returns the entry distance, or the exit distance when the
/// origin is inside the box.
fn ray_aabb(origin: Vector3<f64>, dir: Vector3<f64>, min: Vector3<f64>, max: Vector3<f64>) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for i in 0..3 {
        let inv = 1.0 / dir[i];
        let (mut ta, mut tb) = ((min[i] - origin[i]) * inv, (max[i] - origin[i]) * inv);
        if ta > tb {
            core::mem::swap(&mut ta, &mut tb);
        }
        t_enter = t_enter.max(ta);
        t_exit = t_exit.min(tb);
        if t_enter > t_exit || t_exit < RAY_EPS {
            return None;
        }
    }
    if t_enter > RAY_EPS {
        Some(t_enter)
    } else {
        Some(t_exit)
    }
}

fn ray_cylinder(prim: &Primitive, origin: Vector3<f64>, dir: Vector3<f64>) -> Option<f64> {
    let o = origin - prim.center;
    let r = prim.size.x / 2.0;
    let hh = prim.size.z / 2.0;
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t > RAY_EPS && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    };

    // Lateral surface: quadratic in the xy-plane.
    let a = dir.x * dir.x + dir.y * dir.y;
    if a > 1e-16 {
        let b = 2.0 * (o.x * dir.x + o.y * dir.y);
        let c = o.x * o.x + o.y * o.y - r * r;
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                let z = o.z + t * dir.z;
                if z.abs() <= hh {
                    consider(t);
                }
            }
        }
    }

    // Caps.
    if dir.z.abs() > 1e-16 {
        for zc in [-hh, hh] {
            let t = (zc - o.z) / dir.z;
            let x = o.x + t * dir.x;
            let y = o.y + t * dir.y;
            if x * x + y * y <= r * r {
                consider(t);
            }
        }
    }
    best
}

/// Value noise in `[0, 1]`: a seeded random value per integer lattice
/// point, interpolated with a smoothstep fade.
pub fn value_noise3(p: Vector3<f64>, seed: u64) -> f64 {
    let base = [p.x.floor(), p.y.floor(), p.z.floor()];
    let frac = [p.x - base[0], p.y - base[1], p.z - base[2]];
    let fade = |t: f64| t * t * (3.0 - 2.0 * t);
    let (fx, fy, fz) = (fade(frac[0]), fade(frac[1]), fade(frac[2]));
    let mut accum = 0.0;
    for corner in 0..8u64 {
        let (cx, cy, cz) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
        let v = lattice_value(
            base[0] as i64 + cx as i64,
            base[1] as i64 + cy as i64,
            base[2] as i64 + cz as i64,
            seed,
        );
        let wx = if cx == 1 { fx } else { 1.0 - fx };
        let wy = if cy == 1 { fy } else { 1.0 - fy };
        let wz = if cz == 1 { fz } else { 1.0 - fz };
        accum += v * wx * wy * wz;
    }
    accum
}

fn lattice_value(ix: i64, iy: i64, iz: i64, seed: u64) -> f64 {
    let mixed = splitmix64(
        (ix as u64).wrapping_mul(0x9E37_79B1_85EB_CA87)
            ^ (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
            ^ (iz as u64).wrapping_mul(0x1656_67B1_9E37_79F9)
            ^ seed,
    );
    (mixed >> 11) as f64 / (1u64 << 53) as f64
}
