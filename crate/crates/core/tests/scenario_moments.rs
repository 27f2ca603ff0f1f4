//! Monte-Carlo checks of the generative model.

use dtrack_core::scenario::{generate, GroundTruthObject, ScenarioConfig};
use dtrack_core::steering::{ArrayGeometry, SteeringField, WaveguideEnv};
use dtrack_core::{Complex64, KinematicState};

fn config(objects: Vec<GroundTruthObject>, noise: f64) -> ScenarioConfig {
    let field = SteeringField::isovelocity(
        ArrayGeometry::uniform(10.0, 12.0, 6).unwrap(),
        WaveguideEnv::new(90.0, 1500.0).unwrap(),
        vec![150.0],
    )
    .unwrap();
    // 100 steps x 1000 snapshots = 10^5 snapshots
    ScenarioConfig {
        field,
        objects,
        noise_power: vec![noise],
        snapshots: 1000,
        num_steps: 100,
        step_duration: 4.096,
        seed: 31,
    }
}

#[test]
fn noise_only_power() {
    let cfg = config(vec![], 1.0);
    let (frames, _) = generate(&cfg).unwrap();
    let m = cfg.field.num_elements() as f64;
    let (mut sum, mut n) = (0.0, 0usize);
    for f in &frames {
        let b = &f.blocks[0];
        for j in 0..b.num_snapshots() {
            sum += b.snapshot(j).iter().map(|z| z.norm_sqr()).sum::<f64>() / m;
            n += 1;
        }
    }
    let mean = sum / n as f64;
    assert!((0.99..=1.01).contains(&mean), "{mean}");
}

#[test]
fn single_source_covariance() {
    let x = KinematicState::at_rest(1500.0, 40.0);
    let object = GroundTruthObject::constant_velocity(x, 0, 99, 4.096, vec![2.0]);
    let cfg = config(vec![object], 1.0);
    let (frames, _) = generate(&cfg).unwrap();
    let a = cfg.field.steering_vector(&x, 0).unwrap();
    let m = a.len();
    let mut acc = vec![Complex64::new(0.0, 0.0); m * m];
    let mut n = 0usize;
    for f in &frames {
        let b = &f.blocks[0];
        for j in 0..b.num_snapshots() {
            let z = b.snapshot(j);
            for r in 0..m {
                for c in 0..m {
                    acc[r * m + c] += z[r] * z[c].conj();
                }
            }
            n += 1;
        }
    }
    assert_eq!(n, 100_000);
    let mut worst: f64 = 0.0;
    let mut largest: f64 = 0.0;
    for r in 0..m {
        for c in 0..m {
            let truth = a[r] * a[c].conj() * 2.0 + if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            worst = worst.max((acc[r * m + c] / n as f64 - truth).norm());
            largest = largest.max(truth.norm());
        }
    }
    assert!(worst < 0.03 * largest, "max entry error {worst} vs max entry {largest}");
}
