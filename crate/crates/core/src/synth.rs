//! Deterministic synthetic gesture generator.
//!
//! Gestures are built as trajectories and differentiated analytically to
//! acceleration, then passed through a per-user sensor model (orientation,
//! per-axis gain, bias) with gravity and white noise added:
//!
//! * `O`: one clockwise revolution in the x/y plane. The acceleration of a
//!   circle is a pair of sinusoids in quadrature.
//! * `X`: five minimum-jerk strokes, center → top-right → bottom-left →
//!   top-left → bottom-right → center. Acceleration vanishes at every corner.
//! * `Random`: a sum of random-phase low-frequency sinusoids (band-limited
//!   Gaussian motion) with a slow drift and, sometimes, a short high-energy
//!   burst.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Entry, Origin, Provenance};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::signal::{
    Annotation, GestureClass, Recording, Sample, Window, DEFAULT_RATE_HZ, DEFAULT_WINDOW_LEN,
    FULL_SCALE_G, MAX_SHIFT,
};

/// Nominal gesture duration in samples before tempo and jitter.
const BASE_DURATION: f64 = 80.0;
/// Fraction of the O revolution tapered in and out.
const TAPER: f64 = 0.08;
/// Peak of the minimum-jerk acceleration profile `60u - 180u^2 + 120u^3`.
const MIN_JERK_PEAK: f64 = 5.773_502_691_896_258;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub amplitude_g: f64,
    pub noise_std_g: f64,
    pub speed_jitter: f64,
    /// Bound on the per-user bias drawn for each axis.
    pub per_user_offset_g: [f64; 3],
    pub rng_seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            amplitude_g: 1.5,
            noise_std_g: 0.05,
            speed_jitter: 0.1,
            per_user_offset_g: [0.05; 3],
            rng_seed: 0,
        }
    }
}

impl SynthParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.amplitude_g > 0.0
            && self.amplitude_g.is_finite()
            && self.noise_std_g >= 0.0
            && self.noise_std_g.is_finite()
            && (0.0..0.3).contains(&self.speed_jitter)
            && self
                .per_user_offset_g
                .iter()
                .all(|o| o.is_finite() && *o >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "synthesis parameters {self:?}"
            )))
        }
    }
}

/// Simulated wearer: sensor gain and bias, gesture tempo and wrist orientation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: u32,
    pub scale: [f64; 3],
    pub offset: [f64; 3],
    pub tempo: f64,
    /// Roll and pitch of the wrist in radians; rotates both motion and gravity.
    pub orientation: [f64; 2],
}

impl UserProfile {
    /// Unit gain, no bias, gravity on +z.
    pub fn neutral(user_id: u32) -> Self {
        Self {
            user_id,
            scale: [1.0; 3],
            offset: [0.0; 3],
            tempo: 1.0,
            orientation: [0.0; 2],
        }
    }

    pub fn draw(user_id: u32, params: &SynthParams) -> Self {
        let mut rng = seed::sub_rng(params.rng_seed, "user", u64::from(user_id));
        let scale = [(); 3].map(|_| rng.random_range(0.8..=1.2));
        let offset = params.per_user_offset_g.map(|b| {
            if b > 0.0 {
                rng.random_range(-b..=b)
            } else {
                0.0
            }
        });
        let tempo = rng.random_range(0.85..=1.2);
        let orientation = [(); 2].map(|_| rng.random_range(-0.35..=0.35));
        Self {
            user_id,
            scale,
            offset,
            tempo,
            orientation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.scale.iter().all(|s| (0.7..=1.3).contains(s))
            && self.offset.iter().all(|o| o.is_finite())
            && (0.8..=1.25).contains(&self.tempo)
            && self.orientation.iter().all(|a| a.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("user profile {self:?}")))
        }
    }

    fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let (sr, cr) = self.orientation[0].sin_cos();
        let (sp, cp) = self.orientation[1].sin_cos();
        // pitch about y, then roll about x
        let x = cp * v[0] + sp * v[2];
        let z = -sp * v[0] + cp * v[2];
        let y = cr * v[1] - sr * z;
        let z = sr * v[1] + cr * z;
        [x, y, z]
    }
}

fn o_accel(u: f64, amplitude: f64) -> [f64; 3] {
    let theta = 2.0 * PI * u;
    let taper = if u < TAPER {
        0.5 - 0.5 * (PI * u / TAPER).cos()
    } else if u > 1.0 - TAPER {
        0.5 - 0.5 * (PI * (1.0 - u) / TAPER).cos()
    } else {
        1.0
    };
    // position (sin θ, cos θ) traced clockwise from the top
    [
        -amplitude * taper * theta.sin(),
        -amplitude * taper * theta.cos(),
        0.0,
    ]
}

const X_PATH: [[f64; 2]; 6] = [
    [0.0, 0.0],
    [1.0, 1.0],
    [-1.0, -1.0],
    [-1.0, 1.0],
    [1.0, -1.0],
    [0.0, 0.0],
];

fn x_accel(u: f64, amplitude: f64) -> [f64; 3] {
    // stroke time ∝ sqrt(length) gives every stroke the same peak acceleration
    let lens: Vec<f64> = X_PATH
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .collect();
    let times: Vec<f64> = lens.iter().map(|l| l.sqrt()).collect();
    let total: f64 = times.iter().sum();
    let mut t = u * total;
    for (k, (&dt, &len)) in times.iter().zip(&lens).enumerate() {
        if t < dt || k == times.len() - 1 {
            let v = (t / dt).clamp(0.0, 1.0);
            let profile = 60.0 * v - 180.0 * v * v + 120.0 * v * v * v;
            let s = amplitude * profile / MIN_JERK_PEAK;
            let dx = (X_PATH[k + 1][0] - X_PATH[k][0]) / len;
            let dy = (X_PATH[k + 1][1] - X_PATH[k][1]) / len;
            return [s * dx, s * dy, 0.0];
        }
        t -= dt;
    }
    unreachable!()
}

struct RandomMotion {
    tones: Vec<[(f64, f64, f64); 3]>,
    drift: [f64; 3],
    burst: Option<(f64, f64, f64, f64, [f64; 3])>,
}

impl RandomMotion {
    fn draw(rng: &mut Rng, amplitude: f64, rate_hz: f64) -> Self {
        let tones = (0..4)
            .map(|_| {
                [(); 3].map(|_| {
                    let f = rng.random_range(0.15..2.0) / rate_hz;
                    let a: f64 = rng.sample::<f64, _>(StandardNormal) * 0.3 * amplitude;
                    (2.0 * PI * f, a, rng.random_range(0.0..2.0 * PI))
                })
            })
            .collect();
        let drift = [(); 3].map(|_| rng.random_range(-0.004..0.004) * amplitude);
        let burst = rng.random_bool(0.4).then(|| {
            let f = rng.random_range(1.5..4.0) / rate_hz;
            let gain = rng.random_range(0.8..1.6) * amplitude;
            let width = rng.random_range(4.0..12.0);
            let center = rng.random_range(0.15..0.85);
            let mut dir = [(); 3].map(|_| rng.sample::<f64, _>(StandardNormal));
            let n = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
            dir.iter_mut().for_each(|d| *d /= n);
            (2.0 * PI * f, gain, width, center, dir)
        });
        Self {
            tones,
            drift,
            burst,
        }
    }

    fn at(&self, i: f64, span: f64) -> [f64; 3] {
        let mut a = [0.0; 3];
        for tone in &self.tones {
            for (axis, &(w, amp, phase)) in tone.iter().enumerate() {
                a[axis] += amp * (w * i + phase).sin();
            }
        }
        for (axis, d) in self.drift.iter().enumerate() {
            a[axis] += d * (i - span / 2.0);
        }
        if let Some((w, gain, width, center, dir)) = self.burst {
            let c = center * span;
            let env = (-0.5 * ((i - c) / width).powi(2)).exp();
            for (axis, d) in dir.iter().enumerate() {
                a[axis] += gain * env * (w * (i - c)).sin() * d;
            }
        }
        a
    }
}

/// Generates the window plus `MAX_SHIFT` samples of surrounding stream on
/// each side, returned as a recording whose single annotation is the window.
pub fn synth_segment(
    class: GestureClass,
    params: &SynthParams,
    user: &UserProfile,
) -> Result<Recording> {
    if !class.is_gesture() {
        return Err(Error::InvalidClass(class));
    }
    params.validate()?;
    user.validate()?;
    let len = DEFAULT_WINDOW_LEN;
    let margin = MAX_SHIFT;
    let total = len + 2 * margin;
    let mut rng = seed::rng(params.rng_seed);

    let jitter = if params.speed_jitter > 0.0 {
        rng.random_range(1.0 - params.speed_jitter..=1.0 + params.speed_jitter)
    } else {
        1.0
    };
    let duration = (BASE_DURATION * user.tempo * jitter)
        .round()
        .clamp(20.0, len as f64);
    let slack = (len as f64 - duration) / 2.0;
    let onset_jitter = rng.random_range(-3.0..=3.0_f64).min(slack).max(-slack);
    let onset = margin as f64 + slack + onset_jitter.round();

    let random = (class == GestureClass::Random)
        .then(|| RandomMotion::draw(&mut rng, params.amplitude_g, DEFAULT_RATE_HZ));

    let gravity = user.rotate([0.0, 0.0, 1.0]);
    let samples = (0..total)
        .map(|i| {
            let motion = match (&random, class) {
                (Some(r), _) => r.at(i as f64, total as f64),
                (None, c) => {
                    let u = (i as f64 - onset) / duration;
                    if (0.0..1.0).contains(&u) {
                        if c == GestureClass::O {
                            o_accel(u, params.amplitude_g)
                        } else {
                            x_accel(u, params.amplitude_g)
                        }
                    } else {
                        [0.0; 3]
                    }
                }
            };
            let m = user.rotate(motion);
            let mut v = [0.0; 3];
            for axis in 0..3 {
                let noise = if params.noise_std_g > 0.0 {
                    params.noise_std_g * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                v[axis] = (user.scale[axis] * m[axis] + gravity[axis] + user.offset[axis] + noise)
                    .clamp(-FULL_SCALE_G, FULL_SCALE_G);
            }
            Sample::new(i as u64, v[0], v[1], v[2])
        })
        .collect();
    Recording::new(samples, vec![Annotation::new(margin, margin + len, class)])
}

/// One 100-sample window of `class`; a pure function of its inputs.
pub fn synth_window(
    class: GestureClass,
    params: &SynthParams,
    user: &UserProfile,
) -> Result<Window> {
    let segment = synth_segment(class, params, user)?;
    Ok(window_of(&segment))
}

fn window_of(segment: &Recording) -> Window {
    let a = segment.annotations()[0];
    let samples: Vec<Sample> = segment.samples()[a.start..a.end]
        .iter()
        .enumerate()
        .map(|(i, s)| Sample::new(i as u64, s.ax, s.ay, s.az))
        .collect();
    Window::new(samples, segment.rate_hz(), Some(a.class)).expect("generator output is valid")
}

/// `3 · n_per_class · n_users` windows ordered by user, then class.
pub fn synth_dataset(n_per_class: usize, n_users: usize, params: &SynthParams) -> Result<Dataset> {
    if n_per_class == 0 || !(1..=100).contains(&n_users) {
        return Err(Error::InvalidInput(format!(
            "n_per_class {n_per_class} must be >= 1 and n_users {n_users} in 1..=100"
        )));
    }
    params.validate()?;
    let mut entries = Vec::with_capacity(3 * n_per_class * n_users);
    for u in 0..n_users as u32 {
        let user = UserProfile::draw(u, params);
        for class in GestureClass::GESTURES {
            for _ in 0..n_per_class {
                let id = entries.len() as u64;
                let window_seed = seed::derive(params.rng_seed, "window", id);
                let p = SynthParams {
                    rng_seed: window_seed,
                    ..params.clone()
                };
                let segment = synth_segment(class, &p, &user)?;
                entries.push(Entry {
                    window: window_of(&segment),
                    provenance: Provenance {
                        id,
                        origin: Origin::Synthetic,
                        source: None,
                        user: Some(u),
                        seed: Some(window_seed),
                        op: None,
                    },
                    context: Some(segment),
                });
            }
        }
    }
    Dataset::new(entries, Some(params.rng_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Axis;

    fn quiet(seed: u64) -> SynthParams {
        SynthParams {
            noise_std_g: 0.0,
            ..SynthParams::default().with_seed(seed)
        }
    }

    #[test]
    fn o_is_bit_identical_across_calls() {
        let u = UserProfile::neutral(0);
        let a = synth_window(GestureClass::O, &quiet(7), &u).unwrap();
        let b = synth_window(GestureClass::O, &quiet(7), &u).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn o_gravity_mean_on_z() {
        let w = synth_window(GestureClass::O, &quiet(7), &UserProfile::neutral(0)).unwrap();
        let z = w.channel(Axis::Z);
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        assert!((mean - 1.0).abs() < 1e-6, "mean az {mean}");
    }

    fn derivative_alternations(x: &[f64]) -> usize {
        let d: Vec<f64> = x
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| *d != 0.0)
            .collect();
        d.windows(2)
            .filter(|w| w[0].signum() != w[1].signum())
            .count()
    }

    #[test]
    fn x_strokes_alternate_on_dominant_axis() {
        for seed in 0..20 {
            let params = SynthParams::default().with_seed(seed);
            let user = UserProfile::draw(seed as u32 % 5, &params);
            let w = synth_window(GestureClass::X, &params, &user).unwrap();
            // dominant axis = largest variance
            let dominant = Axis::ALL
                .iter()
                .map(|&a| {
                    let c = w.channel(a);
                    let m = c.iter().sum::<f64>() / c.len() as f64;
                    (c.iter().map(|v| (v - m).powi(2)).sum::<f64>(), a)
                })
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap()
                .1;
            assert!(derivative_alternations(&w.channel(dominant)) >= 4);
        }
        // noise-free, neutral user: the strokes alone carry the alternations
        let w = synth_window(GestureClass::X, &quiet(3), &UserProfile::neutral(0)).unwrap();
        assert!(derivative_alternations(&w.channel(Axis::Y)) >= 4);
    }

    #[test]
    fn uncertain_rejected() {
        assert!(matches!(
            synth_window(GestureClass::Uncertain, &quiet(1), &UserProfile::neutral(0)),
            Err(Error::InvalidClass(_))
        ));
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let p = SynthParams::default().with_seed(11);
        let d = synth_dataset(10, 5, &p).unwrap();
        assert_eq!(d.len(), 150);
        assert!(d.class_counts().values().all(|&c| c == 50));
        assert_eq!(d, synth_dataset(10, 5, &p).unwrap());
        let other = synth_dataset(10, 5, &SynthParams::default().with_seed(12)).unwrap();
        assert!(d
            .windows()
            .zip(other.windows())
            .any(|(a, b)| a.samples() != b.samples()));
    }

    #[test]
    fn samples_within_full_scale() {
        let d = synth_dataset(20, 3, &SynthParams::default().with_seed(5)).unwrap();
        assert!(d
            .windows()
            .all(|w| w.samples().iter().all(Sample::is_valid)));
    }

    #[test]
    fn drawn_users_respect_bounds() {
        for u in 0..100 {
            UserProfile::draw(u, &SynthParams::default())
                .validate()
                .unwrap();
        }
    }
}
