//! End-to-end acceptance checks. Each test prints one
//! `ACCEPTANCE <n> <label>: PASS|FAIL` line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use aquapose_core::data::{PoseNormalization, TrialDataset};
use aquapose_core::eval::median;
use aquapose_core::fusion::{
    nees, run_filter, Ekf, FilterConfig, FilterState, MeasurementKind, TimedMeasurement,
};
use aquapose_core::geom::{angular_distance, look_at, slerp, Pose, Quaternion};
use aquapose_core::loss::{equivalent_translation, AngleForm, PoseLoss};
use aquapose_core::regressor::{
    train, ConvSpec, DropoutMode, NetConfig, NetParams, Optimizer, TrainConfig, TrainSample,
    DEFAULT_MC_SAMPLES,
};
use aquapose_core::scene::{
    generate_trial, lawnmower_trajectory, preset, CameraIntrinsics, Image, LawnmowerConfig,
    ScenePreset, SweepMode, WaterColumn,
};
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn report(n: u32, label: &str, ok: bool) {
    println!("ACCEPTANCE {n} {label}: {}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "acceptance criterion {n} ({label}) failed");
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_unit_quat(rng: &mut ChaCha8Rng) -> Quaternion {
    loop {
        let q = Quaternion::new(normal(rng), normal(rng), normal(rng), normal(rng));
        if let Ok(u) = q.normalize() {
            return u;
        }
    }
}

fn random_unit_vec(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(normal(rng), normal(rng), normal(rng));
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

// ---------------------------------------------------------------- 1

#[test]
fn acceptance_1_loss_arithmetic() {
    // (reported composite, median position, median angle in degrees, d)
    let rows: [(f64, f64, f64, f64); 14] = [
        (2.41, 2.36, 0.86, 3.0),
        (0.61, 0.53, 1.50, 3.0),
        (0.41, 0.36, 0.99, 3.0),
        (0.34, 0.29, 0.88, 3.0),
        (0.30, 0.22, 1.51, 3.0),
        (0.19, 0.12, 1.34, 3.0),
        (1.45, 1.34, 2.09, 3.0),
        (0.75, 0.58, 3.20, 3.0),
        (0.47, 0.47, 0.00, 3.0),
        (0.52, 0.40, 2.28, 3.0),
        (0.20, 0.15, 0.93, 3.0),
        (0.11, 0.11, 0.00, 3.0),
        (0.80, 0.59, 12.15, 1.0),
        (0.26, 0.17, 5.09, 1.0),
    ];
    let mut ok = true;
    for (i, &(total, pos, ang_deg, d)) in rows.iter().enumerate() {
        let composed =
            pos + equivalent_translation(d, ang_deg.to_radians(), AngleForm::Exact).unwrap();
        let err = (composed - total).abs();
        if err > 0.01 {
            println!("  row {i}: composed {composed:.4} vs reported {total:.4} (|err| {err:.4})");
            ok = false;
        }
    }
    report(1, "loss-arithmetic", ok);
}

// ---------------------------------------------------------------- 2

#[test]
fn acceptance_2_geometry_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let mut ok = true;
    let mut worst = (0.0f64, "");
    let mut note = |err: f64, what: &'static str, ok: &mut bool, tol: f64| {
        if err > worst.0 {
            worst = (err, what);
        }
        if err > tol {
            *ok = false;
        }
    };
    for _ in 0..10_000 {
        let a = random_unit_quat(&mut rng);
        let b = random_unit_quat(&mut rng);
        let c = random_unit_quat(&mut rng);

        // metric axioms
        let dab = angular_distance(a, b).unwrap();
        let dba = angular_distance(b, a).unwrap();
        let dac = angular_distance(a, c).unwrap();
        let dbc = angular_distance(b, c).unwrap();
        note(angular_distance(a, a).unwrap(), "identity", &mut ok, 1e-9);
        note((dab - dba).abs(), "symmetry", &mut ok, 1e-9);
        if !(0.0..=core::f64::consts::PI + 1e-9).contains(&dab) {
            ok = false;
        }
        note(dac - (dab + dbc), "triangle", &mut ok, 1e-9);

        // double cover
        let neg_b = b.scale(-1.0);
        note(angular_distance(b, neg_b).unwrap(), "antipode", &mut ok, 1e-9);
        note((dab - angular_distance(a, neg_b).unwrap()).abs(), "cover", &mut ok, 1e-9);

        // slerp geodesic linearity (skip near-antipodal pairs, where
        // the geodesic itself is ill-conditioned)
        if dab < 3.0 {
            let t: f64 = rng.random_range(0.0..1.0);
            let s = slerp(a, b, t);
            note((angular_distance(a, s).unwrap() - t * dab).abs(), "slerp", &mut ok, 1e-6);
        }

        // product against the rotation-matrix oracle
        let ours = rot_matrix(a * b);
        let na = |q: Quaternion| {
            nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q.w, q.x, q.y, q.z))
        };
        let oracle = (na(a) * na(b)).to_rotation_matrix();
        let diff = (ours - oracle.matrix()).abs().max();
        note(diff, "product", &mut ok, 1e-9);
    }
    println!("  worst deviation {:.3e} ({})", worst.0, worst.1);
    report(2, "geometry-properties", ok);
}

fn rot_matrix(q: Quaternion) -> Matrix3<f64> {
    Matrix3::from_columns(&[
        q.rotate_vector(Vector3::x()),
        q.rotate_vector(Vector3::y()),
        q.rotate_vector(Vector3::z()),
    ])
}

// ---------------------------------------------------------------- 3

#[test]
fn acceptance_3_gradient_check() {
    let net = NetConfig {
        input_width: 8,
        input_height: 8,
        input_channels: 1,
        conv: vec![ConvSpec { filters: 2, kernel: 3, stride: 2 }],
        hidden: vec![6],
        dropout_rate: 0.2,
    };
    let mut params = NetParams::init(net, 42).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let images: Vec<Image> = (0..3)
        .map(|_| {
            let data: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
            Image::new(8, 8, 1, data).unwrap()
        })
        .collect();
    let batch: Vec<(&Image, Pose)> = images
        .iter()
        .map(|img| {
            let p = Vector3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng));
            (img, Pose::new(p, random_unit_quat(&mut rng)))
        })
        .collect();
    let loss = PoseLoss::Beta { beta: 0.4 };
    let mode = DropoutMode::Seeded(9);

    let (_, analytic) = params.loss_and_gradients(&batch, &loss, mode).unwrap();
    let n = params.values().len();
    assert_eq!(analytic.len(), n);
    let h = 1e-5;
    let mut max_rel = 0.0f64;
    let mut max_idx = 0usize;
    for i in 0..n {
        let orig = params.values()[i];
        params.values_mut()[i] = orig + h;
        let (lp, _) = params.loss_and_gradients(&batch, &loss, mode).unwrap();
        params.values_mut()[i] = orig - h;
        let (lm, _) = params.loss_and_gradients(&batch, &loss, mode).unwrap();
        params.values_mut()[i] = orig;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (fd - analytic[i]).abs() / analytic[i].abs().max(fd.abs()).max(1e-6);
        if rel > max_rel {
            max_rel = rel;
            max_idx = i;
        }
    }
    println!("  {n} parameters, worst relative error {max_rel:.3e} at index {max_idx}");
    report(3, "gradient-check", max_rel < 1e-3);
}

// ---------------------------------------------------------------- 4

#[test]
fn acceptance_4_ekf_consistency() {
    let mut ok = true;

    // (a) scalar altimeter update against the closed form
    let cfg = FilterConfig::default();
    let pose0 = Pose::new(Vector3::zeros(), look_at(Vector3::zeros(), Vector3::x()));
    let mut ekf = Ekf::new(cfg.clone(), FilterState::from_pose(&pose0, 0.0, &cfg)).unwrap();
    let z_meas = 0.4;
    let p_prior = cfg.init_position_std * cfg.init_position_std;
    let r = cfg.altimeter_noise_std * cfg.altimeter_noise_std;
    let k = p_prior / (p_prior + r);
    ekf.update(&MeasurementKind::Altimeter { z: z_meas }).unwrap();
    let mean_err = (ekf.state().state[2] - k * z_meas).abs();
    let var_err = (ekf.state().cov[(2, 2)] - (1.0 - k) * p_prior).abs();
    if mean_err > 1e-9 || var_err > 1e-9 {
        println!("  scalar update: mean err {mean_err:.2e}, var err {var_err:.2e}");
        ok = false;
    }

    // (b) symmetry and positive semidefiniteness under random traffic
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ekf = Ekf::new(cfg.clone(), FilterState::from_pose(&pose0, 0.0, &cfg)).unwrap();
    let mut worst_asym = 0.0f64;
    let mut worst_eig = f64::INFINITY;
    for i in 0..10_000 {
        ekf.predict(rng.random_range(0.0..0.3)).unwrap();
        let m = match i % 3 {
            0 => {
                let s = ekf.state();
                let mut value = [0.0; 7];
                for j in 0..3 {
                    value[j] = s.state[j] + 0.5 * normal(&mut rng);
                }
                let q = random_unit_quat(&mut rng);
                value[3] = q.w;
                value[4] = q.x;
                value[5] = q.y;
                value[6] = q.z;
                let mut std = [0.0; 7];
                for v in std.iter_mut() {
                    *v = rng.random_range(0.05..0.5);
                }
                MeasurementKind::Pose7 { value, std }
            }
            1 => MeasurementKind::Compass {
                heading: rng.random_range(-core::f64::consts::PI..core::f64::consts::PI),
            },
            _ => MeasurementKind::Altimeter { z: ekf.state().state[2] + 0.2 * normal(&mut rng) },
        };
        ekf.update(&m).unwrap();
        let cov = ekf.state().cov;
        let asym = (cov - cov.transpose()).abs().max();
        let min_eig = cov.symmetric_eigen().eigenvalues.min();
        worst_asym = worst_asym.max(asym);
        worst_eig = worst_eig.min(min_eig);
    }
    println!("  worst asymmetry {worst_asym:.2e}, smallest eigenvalue {worst_eig:.2e}");
    if worst_asym > 1e-9 || worst_eig < -1e-9 {
        ok = false;
    }

    // (c) NEES consistency over Monte Carlo runs
    let runs = 50;
    let steps = 60;
    let dt = 0.25;
    let sigma_p = 0.15;
    let sigma_q = 0.02;
    let cfg = FilterConfig { accel_noise: 0.4, ang_accel_noise: 0.15, ..FilterConfig::default() };
    let mut anees = vec![0.0f64; steps];
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(40_000 + run);
        let init_pose = Pose::new(Vector3::zeros(), look_at(Vector3::zeros(), Vector3::x()));
        let mut truth_p = Vector3::zeros();
        let mut truth_v = Vector3::zeros();
        let mut truth_q = init_pose.orientation;
        let mut truth_w = Vector3::zeros();
        for i in 0..3 {
            truth_p[i] += cfg.init_position_std * normal(&mut rng);
            truth_v[i] += cfg.init_velocity_std * normal(&mut rng);
            truth_w[i] += cfg.init_rate_std * normal(&mut rng);
        }
        let mut q_arr = truth_q.to_array();
        for v in q_arr.iter_mut() {
            *v += cfg.init_attitude_std * normal(&mut rng);
        }
        truth_q = Quaternion::from_array(q_arr).normalize().unwrap();

        let mut ekf = Ekf::new(cfg.clone(), FilterState::from_pose(&init_pose, 0.0, &cfg)).unwrap();
        for (step, slot) in anees.iter_mut().enumerate() {
            // advance truth with process noise matching the filter model
            let (lp, lv) = (
                cfg.accel_noise * dt.powf(1.5) / 3.0f64.sqrt(),
                cfg.accel_noise * dt.sqrt(),
            );
            let w_start = truth_w;
            let mut dth = Vector3::zeros();
            for i in 0..3 {
                let (n1, n2) = (normal(&mut rng), normal(&mut rng));
                truth_p[i] += truth_v[i] * dt + lp * n1;
                truth_v[i] += lv * (3.0f64.sqrt() / 2.0 * n1 + 0.5 * n2);
                let (m1, m2) = (normal(&mut rng), normal(&mut rng));
                dth[i] = cfg.ang_accel_noise * dt.powf(1.5) / 3.0f64.sqrt() * m1;
                truth_w[i] += cfg.ang_accel_noise
                    * dt.sqrt()
                    * (3.0f64.sqrt() / 2.0 * m1 + 0.5 * m2);
            }
            let advanced = truth_q * Quaternion::from_scaled_axis(w_start * dt);
            let l = rate_map_like(advanced);
            let noisy = l * dth;
            let mut qa = advanced.to_array();
            for i in 0..4 {
                qa[i] += noisy[i];
            }
            truth_q = Quaternion::from_array(qa).normalize().unwrap();

            // noisy full-pose measurement with honest stds
            let mut value = [0.0; 7];
            let mut std = [0.0; 7];
            for i in 0..3 {
                value[i] = truth_p[i] + sigma_p * normal(&mut rng);
                std[i] = sigma_p;
            }
            let qt = truth_q.to_array();
            for i in 0..4 {
                value[3 + i] = qt[i] + sigma_q * normal(&mut rng);
                std[3 + i] = sigma_q;
            }
            ekf.predict(dt).unwrap();
            ekf.update(&MeasurementKind::Pose7 { value, std }).unwrap();
            *slot +=
                nees(ekf.state(), &truth_p, &truth_v, &truth_w).unwrap() / runs as f64;
        }
    }
    let dof = 9.0 * runs as f64;
    let chi = ChiSquared::new(dof).unwrap();
    let (lo, hi) = (chi.inverse_cdf(0.025) / runs as f64, chi.inverse_cdf(0.975) / runs as f64);
    let inside = anees.iter().filter(|&&v| v >= lo && v <= hi).count();
    println!(
        "  ANEES: {inside}/{steps} steps inside [{lo:.2}, {hi:.2}], mean {:.2}",
        anees.iter().sum::<f64>() / steps as f64
    );
    if (inside as f64) < 0.9 * steps as f64 {
        ok = false;
    }

    report(4, "ekf-consistency", ok);
}

/// Quaternion rate map: columns are d(q ⊗ exp(½εeᵢ))/dε, the image of
/// a small body-frame rotation in quaternion components.
fn rate_map_like(q: Quaternion) -> SMatrix<f64, 4, 3> {
    0.5 * SMatrix::<f64, 4, 3>::new(
        -q.x, -q.y, -q.z, //
        q.w, -q.z, q.y, //
        q.z, q.w, -q.x, //
        -q.y, q.x, q.w,
    )
}

// ---------------------------------------------------------------- 5

#[test]
fn acceptance_5_fusion_improvement() {
    let scene = preset(ScenePreset::BarrelFrame);
    let sweep = LawnmowerConfig {
        depth: -3.0,
        standoff: 3.0,
        line_spacing: 1.0,
        sample_spacing: 0.5,
        mode: SweepMode::Horizontal,
    };
    let poses = lawnmower_trajectory(&scene, &sweep).unwrap();
    let rate = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let sigma_p = 0.3;
    let sigma_q = 0.05;

    let mut measurements = Vec::new();
    let mut raw = Vec::new();
    for (k, pose) in poses.iter().enumerate() {
        let t = k as f64 / rate;
        let mut p = pose.position;
        for i in 0..3 {
            p[i] += sigma_p * normal(&mut rng);
        }
        if k % 20 == 7 {
            p += 3.0 * random_unit_vec(&mut rng);
        }
        let mut qa = pose.orientation.to_array();
        for v in qa.iter_mut() {
            *v += sigma_q * normal(&mut rng);
        }
        let value = [p.x, p.y, p.z, qa[0], qa[1], qa[2], qa[3]];
        let std = [sigma_p, sigma_p, sigma_p, sigma_q, sigma_q, sigma_q, sigma_q];
        measurements.push(TimedMeasurement { timestamp: t, kind: MeasurementKind::Pose7 { value, std } });
        raw.push((t, p, Quaternion::from_array(qa).normalize().unwrap()));
    }

    let cfg = FilterConfig { accel_noise: 1.0, ang_accel_noise: 0.5, ..FilterConfig::default() };
    let initial = FilterState::from_pose(&poses[0], 0.0, &cfg);
    let states = run_filter(&initial, &cfg, &measurements).unwrap();

    let mut raw_se = 0.0;
    let mut fused_se = 0.0;
    let mut raw_comp = Vec::new();
    let mut fused_comp = Vec::new();
    for (k, pose) in poses.iter().enumerate() {
        let (_, rp, rq) = raw[k];
        let fs = &states[k + 1];
        let fp = fs.position();
        let fq = fs.quaternion();
        raw_se += (rp - pose.position).norm_squared();
        fused_se += (fp - pose.position).norm_squared();
        let comp = |p_err: f64, a_err: f64| {
            p_err + equivalent_translation(3.0, a_err, AngleForm::Exact).unwrap()
        };
        raw_comp.push(comp(
            (rp - pose.position).norm(),
            angular_distance(pose.orientation, rq).unwrap(),
        ));
        fused_comp.push(comp(
            (fp - pose.position).norm(),
            angular_distance(pose.orientation, fq).unwrap(),
        ));
    }
    let n = poses.len() as f64;
    let raw_rmse = (raw_se / n).sqrt();
    let fused_rmse = (fused_se / n).sqrt();
    let raw_med = median(&raw_comp).unwrap();
    let fused_med = median(&fused_comp).unwrap();
    println!(
        "  position RMSE raw {raw_rmse:.3} m -> fused {fused_rmse:.3} m; median composite raw {raw_med:.3} m -> fused {fused_med:.3} m"
    );
    report(5, "fusion-improvement", fused_rmse < raw_rmse && fused_med < raw_med);
}

// ------------------------------------------------------------- 6/7

fn survey_band(
    depth: f64,
    width: u32,
    turbidity: f64,
    seed: u64,
    sample_spacing: f64,
) -> TrialDataset {
    let scene = preset(ScenePreset::BarrelFrame);
    let sweep = LawnmowerConfig {
        depth,
        standoff: 3.0,
        line_spacing: 1.0,
        sample_spacing,
        mode: SweepMode::Horizontal,
    };
    let camera = CameraIntrinsics { width, height: width, hfov: 1.2 };
    let water = WaterColumn { turbidity, pixel_noise_std: 0.01, ..WaterColumn::default() };
    let poses = lawnmower_trajectory(&scene, &sweep).unwrap();
    generate_trial(&scene, &camera, &water, &poses, 2.0, seed).unwrap()
}

fn toy_net(width: u32) -> NetConfig {
    NetConfig {
        input_width: width,
        input_height: width,
        input_channels: 3,
        conv: vec![
            ConvSpec { filters: 8, kernel: 5, stride: 2 },
            ConvSpec { filters: 16, kernel: 3, stride: 2 },
        ],
        hidden: vec![64],
        dropout_rate: 0.0,
    }
}

fn toy_train_cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        loss: PoseLoss::Distance { d: 3.0, angle_form: AngleForm::Approximate },
        optimizer: Optimizer::Adam,
        learning_rate: 3e-3,
        weight_decay: 1e-5,
        batch_size: 16,
        max_epochs: epochs,
        patience: epochs,
        jitter: None,
        seed,
    }
}

fn labeled<'a>(t: &'a TrialDataset, norm: &PoseNormalization) -> Vec<TrainSample<'a>> {
    t.samples()
        .iter()
        .map(|s| (s.image.as_ref().unwrap(), norm.normalize_pose(&s.pose.unwrap())))
        .collect()
}

fn predict_pose(params: &NetParams, norm: &PoseNormalization, image: &Image) -> Pose {
    let out = params.forward(image, DropoutMode::Off).unwrap();
    let q = Quaternion::new(out[3], out[4], out[5], out[6]).normalize().unwrap();
    Pose::new(norm.denormalize_position(Vector3::new(out[0], out[1], out[2])), q)
}

#[test]
fn acceptance_7_interpolation_sanity() {
    let trial = survey_band(-3.0, 24, 0.15, 11, 0.075);
    let positions: Vec<Vector3<f64>> =
        trial.samples().iter().map(|s| s.pose.unwrap().position).collect();
    let mut lo = positions[0];
    let mut hi = positions[0];
    for p in &positions {
        for i in 0..3 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let extent = (hi - lo).norm();

    let mut pos_medians = Vec::new();
    let mut ang_medians = Vec::new();
    for seed in [1u64, 2, 3] {
        let (tr, va, te) = trial.split([0.6, 0.2, 0.2], seed).unwrap();
        let norm = tr.fit_normalization().unwrap();
        let out = train(
            NetParams::init(toy_net(24), seed).unwrap(),
            &labeled(&tr, &norm),
            &labeled(&va, &norm),
            &toy_train_cfg(250, seed),
        )
        .unwrap();
        let mut pes = Vec::new();
        let mut aes = Vec::new();
        for s in te.samples() {
            let pred = predict_pose(&out.params, &norm, s.image.as_ref().unwrap());
            let truth = s.pose.unwrap();
            pes.push((pred.position - truth.position).norm());
            aes.push(angular_distance(truth.orientation, pred.orientation).unwrap());
        }
        let (mp, ma) = (median(&pes).unwrap(), median(&aes).unwrap());
        println!("  seed {seed}: median position {mp:.3} m, median angle {:.2} deg", ma.to_degrees());
        pos_medians.push(mp);
        ang_medians.push(ma);
    }
    let mp = median(&pos_medians).unwrap();
    let ma = median(&ang_medians).unwrap();
    println!(
        "  across seeds: position {mp:.3} m (bar {:.3} = 10% of {extent:.2} m extent), angle {:.2} deg (bar 10)",
        0.1 * extent,
        ma.to_degrees()
    );
    report(7, "interpolation-sanity", mp < 0.1 * extent && ma.to_degrees() < 10.0);
}

// ---------------------------------------------------------------- 8

#[test]
fn acceptance_8_mc_dropout_stats() {
    assert_eq!(DEFAULT_MC_SAMPLES, 100);
    assert_eq!(FilterConfig::default().mc_samples, DEFAULT_MC_SAMPLES);

    // Constant-activation net: the only stochasticity is the dropout
    // mask, so each output is (1/H)·Σ mⱼ + bias with a known variance
    // H⁻¹·r/(1−r).
    let hidden = 50usize;
    let rate = 0.3;
    let net = NetConfig {
        input_width: 1,
        input_height: 1,
        input_channels: 1,
        conv: vec![ConvSpec { filters: 1, kernel: 1, stride: 1 }],
        hidden: vec![hidden],
        dropout_rate: rate,
    };
    let mut params = NetParams::init(net, 1).unwrap();
    let n = params.values().len();
    // layout: conv w (1), conv b (1), dense w (50), dense b (50),
    // head w (350), head b (7)
    assert_eq!(n, 1 + 1 + hidden + hidden + hidden * 7 + 7);
    for v in params.values_mut().iter_mut() {
        *v = 0.0;
    }
    params.values_mut()[1] = 1.0; // conv bias -> feature = 1
    for j in 0..hidden {
        params.values_mut()[2 + hidden + j] = 1.0; // dense bias -> activation = 1
    }
    let head_w = 2 + 2 * hidden;
    for i in 0..hidden * 7 {
        params.values_mut()[head_w + i] = 1.0 / hidden as f64;
    }
    params.values_mut()[head_w + hidden * 7 + 3] = 5.0; // q_w bias keeps the hemisphere fixed

    let image = Image::new(1, 1, 1, vec![0.5]).unwrap();
    let k = 10_000;
    let pred = params.mc_dropout_predict(&image, k, 2468).unwrap();
    let sigma2 = rate / (1.0 - rate) / hidden as f64;
    let chi = ChiSquared::new((k - 1) as f64).unwrap();
    let (lo, hi) = (chi.inverse_cdf(0.025), chi.inverse_cdf(0.975));
    let mut ok = true;
    for dim in 0..3 {
        let stat = (k - 1) as f64 * pred.std[dim] * pred.std[dim] / sigma2;
        let inside = stat >= lo && stat <= hi;
        println!(
            "  dim {dim}: sample std {:.4} vs true {:.4}, chi-square stat {stat:.0} in [{lo:.0}, {hi:.0}]: {inside}",
            pred.std[dim],
            sigma2.sqrt()
        );
        ok &= inside;
    }
    let mean_err = (pred.mean[0] - 1.0).abs();
    ok &= mean_err < 5.0 * (sigma2 / k as f64).sqrt();
    report(8, "mc-dropout-stats", ok);
}

// ---------------------------------------------------------------- 9

#[test]
fn acceptance_9_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, DET_CONFIG).unwrap();
    let bin = env!("CARGO_BIN_EXE_aquapose");
    let steps = ["simulate", "augment", "train", "fuse", "eval", "report"];
    for out in ["a", "b"] {
        let out_dir = dir.path().join(out);
        for step in steps {
            let status = Command::new(bin)
                .arg(step)
                .arg("--config")
                .arg(&cfg_path)
                .arg("--out")
                .arg(&out_dir)
                .status()
                .unwrap();
            assert!(status.success(), "{step} failed in {out}");
        }
    }
    let tree_a = collect_tree(&dir.path().join("a"));
    let tree_b = collect_tree(&dir.path().join("b"));
    let mut ok = tree_a.len() == tree_b.len();
    if !ok {
        println!("  file sets differ: {} vs {}", tree_a.len(), tree_b.len());
    }
    for (rel, bytes) in &tree_a {
        match tree_b.get(rel) {
            Some(other) if other == bytes => {}
            Some(_) => {
                println!("  differs: {}", rel.display());
                ok = false;
            }
            None => {
                println!("  missing in second run: {}", rel.display());
                ok = false;
            }
        }
    }
    println!("  compared {} files", tree_a.len());
    report(9, "cli-determinism", ok);
}

fn collect_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

const DET_CONFIG: &str = r#"
name = "det"
out_dir = "runs/det"

[scene]
preset = "barrel_frame"

[camera]
width = 16
height = 16
hfov = 1.2

[water]
turbidity = 0.25
pixel_noise_std = 0.01

[trajectory]
standoff = 3.0
line_spacing = 2.0
sample_spacing = 1.0
mode = "horizontal"
rate_hz = 2.0

[data]
mode = "cross_band"
train_bands = [0, 1]
eval_band = 2
use_augmented = true

[net]
input_width = 16
input_height = 16
input_channels = 3
conv = [
    { filters = 8, kernel = 5, stride = 2 },
    { filters = 16, kernel = 3, stride = 2 },
]
hidden = [32]
dropout_rate = 0.2

[train]
loss = { kind = "distance", d = 3.0, angle_form = "approximate" }
optimizer = "adam"
learning_rate = 1e-3
weight_decay = 1e-5
batch_size = 8
max_epochs = 2
patience = 2
seed = 7

[augment]
brightness_bias = 0.02

[augment.synthesis]
depth_offsets = [0.0, -0.5]
range_scales = [1.0]
keep_orientation = true

[filter]
mc_samples = 8

[fuse]
band = 2
compass_rate_hz = 1.0
altimeter_rate_hz = 1.0

[eval]
d = 3.0
angle_form = "approximate"
targets = ["checkpoint", "fused"]

[seeds]
simulate = 11
split = 12
augment = 13
fuse = 14
"#;
