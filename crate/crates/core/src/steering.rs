//! Array response vectors `a_i(x)` per tone.
//!
//! Two analytic fields are provided: a far-field plane-wave model for a line
//! array, and a normal-mode model of an isovelocity waveguide with a
//! pressure-release surface and a rigid bottom. Every returned vector is
//! scaled to unit Euclidean norm, so source power lives entirely in the
//! per-tone power state.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::state::KinematicState;

/// Sensor positions along the array axis, in meters.
///
/// For a vertical line array these are element depths; for the plane-wave
/// field they are offsets from the array reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<f64>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(invalid("element_positions", "array needs at least one element"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("element_positions"));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(
                "element_positions",
                "positions must be strictly increasing",
            ));
        }
        Ok(Self { positions })
    }

    /// `count` elements starting at `first`, `spacing` meters apart.
    pub fn uniform(first: f64, spacing: f64, count: usize) -> Result<Self> {
        Self::new((0..count).map(|m| first + spacing * m as f64).collect())
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideEnv {
    pub water_depth: f64,
    pub sound_speed: f64,
}

impl WaveguideEnv {
    pub fn new(water_depth: f64, sound_speed: f64) -> Result<Self> {
        if !(water_depth > 0.0) || !water_depth.is_finite() {
            return Err(invalid("water_depth", "must be positive and finite"));
        }
        if !(sound_speed > 0.0) || !sound_speed.is_finite() {
            return Err(invalid("sound_speed", "must be positive and finite"));
        }
        Ok(Self {
            water_depth,
            sound_speed,
        })
    }
}

/// One propagating waveguide mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// Vertical wavenumber `(m - 1/2) pi / D`, rad/m.
    pub vertical: f64,
    /// Horizontal wavenumber `sqrt(k^2 - k_z^2)`, rad/m.
    pub radial: f64,
}

/// Propagating modes of the isovelocity waveguide at frequency `f`, ordered
/// by mode number. A mode whose vertical wavenumber equals `2 pi f / c` is
/// not propagating.
pub fn mode_set(env: &WaveguideEnv, frequency: f64) -> Vec<Mode> {
    let k = 2.0 * PI * frequency / env.sound_speed;
    let mut modes = Vec::new();
    let mut m = 1usize;
    loop {
        let kz = (m as f64 - 0.5) * PI / env.water_depth;
        if kz >= k {
            break;
        }
        let kr2 = k * k - kz * kz;
        if !(kr2 > 0.0) {
            break;
        }
        modes.push(Mode {
            vertical: kz,
            radial: libm::sqrt(kr2),
        });
        m += 1;
    }
    modes
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Propagation {
    /// Far-field plane wave arriving at elevation `atan2(depth - reference_depth, range)`.
    PlaneWave {
        sound_speed: f64,
        reference_depth: f64,
    },
    IsovelocityModes(WaveguideEnv),
}

#[derive(Debug, Clone, PartialEq)]
struct ModeTable {
    modes: Vec<Mode>,
    /// `sin(k_z z_m) / D`, laid out mode-major (`modes.len() x M`).
    element_terms: Vec<f64>,
}

/// Steering-vector generator: propagation model, array and tone set.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringField {
    propagation: Propagation,
    geometry: ArrayGeometry,
    tones: Vec<f64>,
    tables: Vec<ModeTable>,
}

fn validate_tones(tones: &[f64]) -> Result<()> {
    if tones.is_empty() {
        return Err(invalid("tones", "at least one tone is required"));
    }
    if tones.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
        return Err(invalid("tones", "frequencies must be positive and finite"));
    }
    for (i, a) in tones.iter().enumerate() {
        if tones[i + 1..].contains(a) {
            return Err(invalid("tones", format!("duplicate frequency {a} Hz")));
        }
    }
    Ok(())
}

impl SteeringField {
    pub fn plane_wave(
        geometry: ArrayGeometry,
        tones: Vec<f64>,
        sound_speed: f64,
        reference_depth: f64,
    ) -> Result<Self> {
        validate_tones(&tones)?;
        if !(sound_speed > 0.0) || !sound_speed.is_finite() {
            return Err(invalid("sound_speed", "must be positive and finite"));
        }
        if !reference_depth.is_finite() {
            return Err(Error::NonFinite("reference_depth"));
        }
        Ok(Self {
            propagation: Propagation::PlaneWave {
                sound_speed,
                reference_depth,
            },
            geometry,
            tones,
            tables: Vec::new(),
        })
    }

    pub fn isovelocity(geometry: ArrayGeometry, env: WaveguideEnv, tones: Vec<f64>) -> Result<Self> {
        validate_tones(&tones)?;
        let depths = geometry.positions();
        if depths.iter().any(|z| *z < 0.0 || *z > env.water_depth) {
            return Err(invalid(
                "element_positions",
                "vertical array elements must lie inside the water column",
            ));
        }
        let tables = tones
            .iter()
            .map(|&f| {
                let modes = mode_set(&env, f);
                let mut element_terms = Vec::with_capacity(modes.len() * depths.len());
                for mode in &modes {
                    for &z in depths {
                        element_terms.push(libm::sin(mode.vertical * z) / env.water_depth);
                    }
                }
                ModeTable {
                    modes,
                    element_terms,
                }
            })
            .collect();
        Ok(Self {
            propagation: Propagation::IsovelocityModes(env),
            geometry,
            tones,
            tables,
        })
    }

    pub fn propagation(&self) -> &Propagation {
        &self.propagation
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn tones(&self) -> &[f64] {
        &self.tones
    }

    pub fn num_tones(&self) -> usize {
        self.tones.len()
    }

    pub fn num_elements(&self) -> usize {
        self.geometry.len()
    }

    /// Returns `a_tone(x)` (tone index is zero-based). Only the position
    /// components of `x` are used.
    pub fn steering_vector(&self, x: &KinematicState, tone: usize) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.num_elements()];
        self.steering_into(x.range, x.depth, tone, &mut out)?;
        Ok(out)
    }

    /// Writes the unit-norm response at `(range, depth)` into `out`.
    pub fn steering_into(
        &self,
        range: f64,
        depth: f64,
        tone: usize,
        out: &mut [Complex64],
    ) -> Result<()> {
        if tone >= self.tones.len() {
            return Err(invalid(
                "tone_index",
                format!("tone {tone} out of range for {} tones", self.tones.len()),
            ));
        }
        if out.len() != self.num_elements() {
            return Err(Error::DimensionMismatch(format!(
                "output has {} entries, array has {} elements",
                out.len(),
                self.num_elements()
            )));
        }
        if !range.is_finite() || !depth.is_finite() {
            return Err(Error::NonFinite("source position"));
        }
        let frequency = self.tones[tone];
        match self.propagation {
            Propagation::PlaneWave {
                sound_speed,
                reference_depth,
            } => {
                let dz = depth - reference_depth;
                let dist = libm::hypot(range, dz);
                if !(dist > 0.0) {
                    return Err(Error::Domain(
                        "source coincides with the array reference point".into(),
                    ));
                }
                let sin_theta = dz / dist;
                let k = 2.0 * PI * frequency / sound_speed;
                let scale = 1.0 / libm::sqrt(self.num_elements() as f64);
                for (o, &p) in out.iter_mut().zip(self.geometry.positions()) {
                    let (s, c) = libm::sincos(-k * p * sin_theta);
                    *o = Complex64::new(c * scale, s * scale);
                }
                Ok(())
            }
            Propagation::IsovelocityModes(env) => {
                if !(range > 0.0) {
                    return Err(Error::Domain(format!(
                        "waveguide field requires positive range, got {range}"
                    )));
                }
                if depth < 0.0 || depth > env.water_depth {
                    return Err(Error::Domain(format!(
                        "source depth {depth} outside the water column [0, {}]",
                        env.water_depth
                    )));
                }
                let table = &self.tables[tone];
                if table.modes.is_empty() {
                    return Err(Error::NoPropagatingModes { tone, frequency });
                }
                let m_count = out.len();
                out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
                for (mode, terms) in table
                    .modes
                    .iter()
                    .zip(table.element_terms.chunks_exact(m_count))
                {
                    let kr_r = mode.radial * range;
                    let amp = libm::sin(mode.vertical * depth) / libm::sqrt(kr_r);
                    let (s, c) = libm::sincos(-kr_r);
                    let (cr, ci) = (amp * c, amp * s);
                    for (o, &t) in out.iter_mut().zip(terms) {
                        o.re += cr * t;
                        o.im += ci * t;
                    }
                }
                let norm = libm::sqrt(crate::linalg::norm_sqr(out));
                if !(norm > 0.0) || !norm.is_finite() {
                    return Err(Error::Domain(format!(
                        "field vanishes at range {range}, depth {depth}"
                    )));
                }
                let inv = 1.0 / norm;
                out.iter_mut().for_each(|o| *o *= inv);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_sqr;
    use proptest::prelude::*;

    fn env100() -> WaveguideEnv {
        WaveguideEnv::new(100.0, 1500.0).unwrap()
    }

    fn vla() -> ArrayGeometry {
        ArrayGeometry::uniform(10.0, 8.0, 11).unwrap()
    }

    #[test]
    fn first_mode_at_49_hz() {
        let modes = mode_set(&env100(), 49.0);
        // closed-form oracle, evaluated independently
        let k: f64 = 2.0 * PI * 49.0 / 1500.0;
        let kz = PI / 200.0;
        assert!((modes[0].vertical - 0.015_707_963_267_948_967).abs() < 1e-15);
        assert!((modes[0].vertical - kz).abs() < 1e-15);
        assert!((modes[0].radial - (k * k - kz * kz).sqrt()).abs() < 1e-15);
        assert!((modes[0].radial - 0.204_648_767_317_731_6).abs() < 1e-12);
        assert!(modes.windows(2).all(|w| w[0].vertical < w[1].vertical));
    }

    #[test]
    fn no_modes_below_cutoff() {
        assert!(mode_set(&env100(), 3.0).is_empty());
    }

    #[test]
    fn cutoff_boundary_is_exclusive() {
        let env = env100();
        let kz1 = 0.5 * PI / env.water_depth;
        // walk f in ulps until 2 pi f / c lands exactly on k_z,1
        let mut f = kz1 * env.sound_speed / (2.0 * PI);
        let mut found = false;
        for _ in 0..64 {
            let k = 2.0 * PI * f / env.sound_speed;
            if k == kz1 {
                found = true;
                break;
            }
            f = if k < kz1 {
                f64::from_bits(f.to_bits() + 1)
            } else {
                f64::from_bits(f.to_bits() - 1)
            };
        }
        assert!(found);
        assert!(mode_set(&env, f).is_empty());
        assert_eq!(mode_set(&env, f64::from_bits(f.to_bits() + 4)).len(), 1);
    }

    #[test]
    fn broadside_plane_wave_is_uniform() {
        let field = SteeringField::plane_wave(
            ArrayGeometry::uniform(-20.0, 4.0, 11).unwrap(),
            vec![100.0, 300.0],
            1500.0,
            50.0,
        )
        .unwrap();
        let x = KinematicState::at_rest(1000.0, 50.0);
        for tone in 0..2 {
            let a = field.steering_vector(&x, tone).unwrap();
            let expected = 1.0 / (11f64).sqrt();
            for v in a {
                assert!((v.re - expected).abs() < 1e-15);
                assert!(v.im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn plane_wave_conjugate_symmetry() {
        let field = SteeringField::plane_wave(
            ArrayGeometry::uniform(-20.0, 4.0, 11).unwrap(),
            vec![250.0],
            1500.0,
            50.0,
        )
        .unwrap();
        let up = field
            .steering_vector(&KinematicState::at_rest(300.0, 50.0 + 120.0), 0)
            .unwrap();
        let down = field
            .steering_vector(&KinematicState::at_rest(300.0, 50.0 - 120.0), 0)
            .unwrap();
        for (u, d) in up.iter().zip(&down) {
            assert!((u - d.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn waveguide_ignores_velocity() {
        let field = SteeringField::isovelocity(vla(), env100(), vec![150.0]).unwrap();
        let a = field
            .steering_vector(&KinematicState::new(800.0, 40.0, 3.0, -0.5), 0)
            .unwrap();
        let b = field
            .steering_vector(&KinematicState::new(800.0, 40.0, -1.0, 0.9), 0)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn waveguide_errors() {
        let field = SteeringField::isovelocity(vla(), env100(), vec![3.0, 150.0]).unwrap();
        let x = KinematicState::at_rest(500.0, 30.0);
        assert_eq!(
            field.steering_vector(&x, 0),
            Err(Error::NoPropagatingModes {
                tone: 0,
                frequency: 3.0
            })
        );
        assert!(matches!(
            field.steering_vector(&KinematicState::at_rest(0.0, 30.0), 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            field.steering_vector(&KinematicState::at_rest(-5.0, 30.0), 1),
            Err(Error::Domain(_))
        ));
        assert!(field.steering_vector(&x, 2).is_err());
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(ArrayGeometry::new(vec![]).is_err());
        assert!(ArrayGeometry::new(vec![1.0, 1.0]).is_err());
        assert!(ArrayGeometry::new(vec![1.0, f64::NAN]).is_err());
        assert!(WaveguideEnv::new(0.0, 1500.0).is_err());
        assert!(WaveguideEnv::new(100.0, -1.0).is_err());
        assert!(SteeringField::isovelocity(vla(), env100(), vec![]).is_err());
        assert!(SteeringField::isovelocity(vla(), env100(), vec![50.0, 50.0]).is_err());
        assert!(SteeringField::isovelocity(vla(), env100(), vec![-50.0]).is_err());
        assert!(SteeringField::isovelocity(
            ArrayGeometry::uniform(10.0, 20.0, 11).unwrap(),
            env100(),
            vec![50.0]
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn unit_norm_and_deterministic(
            range in 1.0f64..5000.0,
            depth in 0.5f64..100.0,
            tone in 0usize..3,
        ) {
            let field = SteeringField::isovelocity(vla(), env100(), vec![49.0, 148.0, 388.0]).unwrap();
            let x = KinematicState::at_rest(range, depth);
            let a = field.steering_vector(&x, tone).unwrap();
            let b = field.steering_vector(&x, tone).unwrap();
            prop_assert!((norm_sqr(&a).sqrt() - 1.0).abs() < 1e-12);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn plane_wave_unit_norm(range in 1.0f64..5000.0, depth in -300.0f64..300.0) {
            let field = SteeringField::plane_wave(
                ArrayGeometry::uniform(-20.0, 4.0, 11).unwrap(), vec![120.0], 1500.0, 0.0).unwrap();
            let a = field.steering_vector(&KinematicState::at_rest(range, depth), 0).unwrap();
            prop_assert!((norm_sqr(&a).sqrt() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn mode_count_monotone(f1 in 1.0f64..500.0, f2 in 1.0f64..500.0) {
            let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
            prop_assert!(mode_set(&env100(), lo).len() <= mode_set(&env100(), hi).len());
        }
    }
}
