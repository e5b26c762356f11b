use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ClassLabel, LoadProfile, ProfileError, ProfileSet, Sample};
use crate::seeding::derive_seed;

/// Relative weights of the three demand classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassMix {
    pub low: f64,
    pub moderate: f64,
    pub high: f64,
}

impl Default for ClassMix {
    fn default() -> Self {
        Self {
            low: 1.0,
            moderate: 1.0,
            high: 1.0,
        }
    }
}

impl ClassMix {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let w = [self.low, self.moderate, self.high];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ProfileError::InvalidClassMix(format!(
                "weights must be finite and >= 0, got {w:?}"
            )));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(ProfileError::InvalidClassMix("weights sum to zero".into()));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> ClassLabel {
        let total = self.low + self.moderate + self.high;
        let u = rng.random::<f64>() * total;
        if u < self.low {
            ClassLabel::Low
        } else if u < self.low + self.moderate || self.high == 0.0 {
            ClassLabel::Moderate
        } else {
            ClassLabel::High
        }
    }
}

/// Cruise plateau ranges per class, as `[lo, hi]` fractions of the plant ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassBands {
    pub low: [f64; 2],
    pub moderate: [f64; 2],
    pub high: [f64; 2],
}

impl Default for ClassBands {
    fn default() -> Self {
        Self {
            low: [0.30, 0.42],
            moderate: [0.47, 0.56],
            high: [0.60, 0.65],
        }
    }
}

impl ClassBands {
    pub fn band(&self, class: ClassLabel) -> [f64; 2] {
        match class {
            ClassLabel::Low => self.low,
            ClassLabel::Moderate => self.moderate,
            ClassLabel::High => self.high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub plant_ceiling_kw: f64,
    pub step_seconds: f64,
    pub sailing_minutes: f64,
    pub port_minutes: f64,
    pub class_mix: ClassMix,
    pub plateau_bands: ClassBands,
    /// Harbour manoeuvring demand range, fraction of ceiling.
    pub manoeuvre_band: [f64; 2],
    /// Hotel load in port, fraction of ceiling.
    pub hotel_band: [f64; 2],
    /// Upper bound of the fluctuation amplitude, fraction of the plateau.
    pub fluctuation_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            plant_ceiling_kw: 4370.0,
            step_seconds: 60.0,
            sailing_minutes: 60.0,
            port_minutes: 15.0,
            class_mix: ClassMix::default(),
            plateau_bands: ClassBands::default(),
            manoeuvre_band: [0.12, 0.18],
            hotel_band: [0.02, 0.04],
            fluctuation_fraction: 0.10,
            validation_fraction: 0.1,
        }
    }
}

impl GeneratorConfig {
    pub fn sailing_steps(&self) -> usize {
        (self.sailing_minutes * 60.0 / self.step_seconds).round() as usize
    }

    pub fn port_steps(&self) -> usize {
        ((self.port_minutes * 60.0 / self.step_seconds).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        self.class_mix.validate()?;
        let bad = |m: String| Err(ProfileError::InvalidConfig(m));
        if !(self.plant_ceiling_kw > 0.0 && self.step_seconds > 0.0) {
            return bad("plant_ceiling_kw and step_seconds must be > 0".into());
        }
        if self.sailing_steps() < 1 {
            return bad("sailing segment shorter than one step".into());
        }
        for band in [
            self.plateau_bands.low,
            self.plateau_bands.moderate,
            self.plateau_bands.high,
            self.manoeuvre_band,
            self.hotel_band,
        ] {
            if !(0.0 <= band[0] && band[0] <= band[1] && band[1] <= 1.0) {
                return bad(format!("band {band:?} must satisfy 0 <= lo <= hi <= 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.fluctuation_fraction) {
            return bad("fluctuation_fraction must lie in [0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// Generates `n_profiles` synthetic voyages and splits them into train and validation sets.
///
/// Profile `i` depends only on `(seed, i)`, so a larger `n_profiles` extends rather than
/// reshuffles the generated population.
pub fn generate(seed: u64, n_profiles: usize, cfg: &GeneratorConfig) -> Result<ProfileSet, ProfileError> {
    cfg.validate()?;
    if n_profiles < 2 {
        return Err(ProfileError::TooFew(n_profiles));
    }
    let profiles: Vec<LoadProfile> = (0..n_profiles)
        .map(|i| voyage(seed, i, cfg))
        .collect();

    let n_val = ((n_profiles as f64 * cfg.validation_fraction).round() as usize).clamp(1, n_profiles - 1);
    let mut order: Vec<usize> = (0..n_profiles).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX)));
    let mut is_val = vec![false; n_profiles];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }
    let (validation, train): (Vec<_>, Vec<_>) = profiles
        .into_iter()
        .zip(is_val)
        .partition(|(_, v)| *v);
    Ok(ProfileSet {
        train: train.into_iter().map(|(p, _)| p).collect(),
        validation: validation.into_iter().map(|(p, _)| p).collect(),
        seed,
    })
}

fn uniform(rng: &mut impl Rng, band: [f64; 2]) -> f64 {
    if band[1] > band[0] {
        rng.random_range(band[0]..band[1])
    } else {
        band[0]
    }
}

fn voyage(seed: u64, index: usize, cfg: &GeneratorConfig) -> LoadProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index as u64));
    let ceiling = cfg.plant_ceiling_kw;
    let class = cfg.class_mix.sample(&mut rng);
    let plateau = uniform(&mut rng, cfg.plateau_bands.band(class)) * ceiling;
    let manoeuvre = uniform(&mut rng, cfg.manoeuvre_band) * ceiling;
    let hotel = uniform(&mut rng, cfg.hotel_band) * ceiling;

    let n = cfg.sailing_steps();
    let minutes = cfg.sailing_minutes;
    // Harbour dwell, acceleration, cruise, deceleration, harbour dwell.
    let dwell_out = rng.random_range(3.0..6.0) / 60.0 * minutes;
    let accel = rng.random_range(6.0..10.0) / 60.0 * minutes;
    let decel = rng.random_range(6.0..10.0) / 60.0 * minutes;
    let dwell_in = rng.random_range(3.0..6.0) / 60.0 * minutes;
    let cruise_start = dwell_out + accel;
    let cruise_end = minutes - dwell_in - decel;
    let base = |t: f64| -> f64 {
        if t < dwell_out || t >= minutes - dwell_in {
            manoeuvre
        } else if t < cruise_start {
            manoeuvre + (plateau - manoeuvre) * (t - dwell_out) / accel
        } else if t < cruise_end {
            plateau
        } else {
            plateau + (manoeuvre - plateau) * (t - cruise_end) / decel
        }
    };

    // Three sinusoids plus moving-average-filtered Gaussian noise.
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.3..1.0),
                rng.random_range(3.0..20.0),
                rng.random_range(0.0..TAU),
            )
        })
        .collect();
    let normal = Normal::new(0.0, 0.6).expect("valid normal");
    let noise: Vec<f64> = (0..n + 4).map(|_| normal.sample(&mut rng)).collect();
    let minute_of = |k: usize| k as f64 * cfg.step_seconds / 60.0;
    let raw: Vec<f64> = (0..n)
        .map(|k| {
            let t = minute_of(k);
            let wave: f64 = waves
                .iter()
                .map(|(amp, period, phase)| amp * (TAU * t / period + phase).sin())
                .sum();
            let filtered = noise[k..k + 5].iter().sum::<f64>() / 5.0;
            wave + filtered
        })
        .collect();
    let peak = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let amplitude = cfg.fluctuation_fraction * rng.random_range(0.5..1.0);
    let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };

    let mut samples: Vec<Sample> = (0..n)
        .map(|k| {
            let p = base(minute_of(k)) + plateau * raw[k] * scale;
            Sample {
                p_dem_kw: p.clamp(0.0, ceiling),
                spa: false,
            }
        })
        .collect();
    samples.extend((0..cfg.port_steps()).map(|_| Sample {
        p_dem_kw: hotel,
        spa: true,
    }));

    LoadProfile {
        id: format!("s{seed}-{index:05}"),
        samples,
        step_seconds: cfg.step_seconds,
        class_label: class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Mean demand over the central cruise window (minutes 20 to 40).
    fn plateau_mean(p: &LoadProfile) -> f64 {
        let s = &p.samples[20..40];
        s.iter().map(|s| s.p_dem_kw).sum::<f64>() / s.len() as f64
    }

    #[test]
    fn same_seed_same_set() {
        let cfg = GeneratorConfig::default();
        assert_eq!(generate(7, 20, &cfg).unwrap(), generate(7, 20, &cfg).unwrap());
        assert_ne!(generate(7, 20, &cfg).unwrap(), generate(8, 20, &cfg).unwrap());
    }

    #[test]
    fn generated_profiles_satisfy_invariants() {
        let cfg = GeneratorConfig::default();
        let set = generate(3, 60, &cfg).unwrap();
        assert_eq!(set.train.len() + set.validation.len(), 60);
        assert_eq!(set.validation.len(), 6);
        for p in set.all() {
            p.validate(cfg.plant_ceiling_kw).unwrap();
            assert_eq!(p.sailing_len(), 60);
            assert!(p.samples.last().unwrap().spa);
        }
        let mut ids: Vec<&str> = set.all().map(|p| p.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 60);
    }

    #[test]
    fn class_plateaus_sit_in_their_bands() {
        let cfg = GeneratorConfig::default();
        let c = cfg.plant_ceiling_kw;
        let set = generate(11, 300, &cfg).unwrap();
        for p in set.all() {
            let m = plateau_mean(p);
            match p.class_label {
                ClassLabel::Low => assert!(m < 0.45 * c, "{} low plateau {m}", p.id),
                ClassLabel::Moderate => assert!(m > 0.45 * c && m < 0.6 * c),
                ClassLabel::High => assert!(m > 0.58 * c, "{} high plateau {m}", p.id),
            }
        }
    }

    #[test]
    fn fluctuation_bounded_by_ten_percent_of_plateau() {
        let cfg = GeneratorConfig {
            class_mix: ClassMix {
                low: 0.0,
                moderate: 1.0,
                high: 0.0,
            },
            ..Default::default()
        };
        let set = generate(5, 40, &cfg).unwrap();
        for p in set.all() {
            let s = &p.samples[20..40];
            let mean = plateau_mean(p);
            for v in s {
                // plateau within [0.47, 0.56] of ceiling; deviation at most 10 % of it
                assert!((v.p_dem_kw - mean).abs() <= 0.2 * 0.56 * cfg.plant_ceiling_kw);
            }
        }
    }

    #[test]
    fn invalid_mix_rejected() {
        let mut cfg = GeneratorConfig::default();
        cfg.class_mix.low = -1.0;
        assert!(matches!(generate(1, 10, &cfg), Err(ProfileError::InvalidClassMix(_))));
        cfg.class_mix = ClassMix {
            low: 0.0,
            moderate: 0.0,
            high: 0.0,
        };
        assert!(matches!(generate(1, 10, &cfg), Err(ProfileError::InvalidClassMix(_))));
        assert!(matches!(
            generate(1, 1, &GeneratorConfig::default()),
            Err(ProfileError::TooFew(1))
        ));
    }

    #[test]
    fn class_means_stationary_across_seed_ranges() {
        let cfg = GeneratorConfig::default();
        let mean_by_class = |seed: u64| {
            let set = generate(seed, 150, &cfg).unwrap();
            let mut acc = [(0.0, 0usize); 3];
            for p in set.all() {
                let k = p.class_label as usize;
                acc[k].0 += plateau_mean(p);
                acc[k].1 += 1;
            }
            acc.map(|(s, n)| {
                assert!(n >= 20);
                s / n as f64
            })
        };
        let a = mean_by_class(1);
        let b = mean_by_class(1_000_003);
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() / a[k] < 0.05, "class {k}: {} vs {}", a[k], b[k]);
        }
    }
}
