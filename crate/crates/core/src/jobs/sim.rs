//! Stand-in sintering model: power-law growth with an Arrhenius rate and an
//! ensemble band over perturbed parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::Scalar;

/// Gas constant, J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314_462_618;
pub const KELVIN_OFFSET: f64 = 273.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinteringParams<T> {
    /// Initial mean particle size, nm.
    pub d0_nm: T,
    /// Growth exponent.
    pub n: T,
    /// Pre-exponential factor, 1/min.
    pub a_per_min: T,
    /// Activation energy, J/mol.
    pub ea_j_per_mol: T,
}

impl Default for SinteringParams<f64> {
    fn default() -> Self {
        Self {
            d0_nm: 2.0,
            n: 3.0,
            a_per_min: 1.0e4,
            ea_j_per_mol: 1.0e5,
        }
    }
}

/// Relative spread of the ensemble draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpread {
    /// Standard deviation of ln A.
    pub ln_a_sigma: f64,
    /// Uniform half-width of Ea as a fraction of Ea.
    pub ea_fraction: f64,
    /// Uniform half-width of n as a fraction of n.
    pub n_fraction: f64,
    pub members: usize,
    pub seed: u64,
}

impl Default for EnsembleSpread {
    fn default() -> Self {
        Self {
            ln_a_sigma: 0.3,
            ea_fraction: 0.02,
            n_fraction: 0.05,
            members: 64,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub params: SinteringParams<f64>,
    #[serde(default)]
    pub spread: EnsembleSpread,
    #[serde(default = "default_bounds")]
    pub temperature_bounds_c: (f64, f64),
}

fn default_bounds() -> (f64, f64) {
    (100.0, 1200.0)
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            params: SinteringParams::default(),
            spread: EnsembleSpread::default(),
            temperature_bounds_c: default_bounds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("temperature {value} °C is outside [{min}, {max}] °C")]
    TemperatureOutOfBounds { value: f64, min: f64, max: f64 },
    #[error("time grid must be non-empty, non-negative and strictly increasing")]
    BadGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSeries<T> {
    pub temperature_c: T,
    pub time_min: Vec<T>,
    pub mean_nm: Vec<T>,
    pub lower_nm: Vec<T>,
    pub upper_nm: Vec<T>,
}

/// k(T) = A exp(-Ea / (R T_K)), in 1/min.
pub fn arrhenius_rate<T: Scalar>(a_per_min: T, ea_j_per_mol: T, temperature_c: T) -> T {
    let t_k = temperature_c + T::lit(KELVIN_OFFSET);
    a_per_min * (-(ea_j_per_mol / (T::lit(GAS_CONSTANT) * t_k))).exp()
}

/// d(t) = d0 (1 + k t)^(1/n).
pub fn mean_size<T: Scalar>(d0_nm: T, k_per_min: T, n: T, t_min: T) -> T {
    d0_nm * (T::one() + k_per_min * t_min).powf(T::one() / n)
}

fn size_at<T: Scalar>(p: &SinteringParams<T>, temperature_c: T, t: T) -> T {
    mean_size(
        p.d0_nm,
        arrhenius_rate(p.a_per_min, p.ea_j_per_mol, temperature_c),
        p.n,
        t,
    )
}

fn ensemble(config: &SimConfig) -> Vec<SinteringParams<f64>> {
    let p = config.params;
    let s = config.spread;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut out = vec![p];
    for _ in 0..s.members {
        // Box-Muller for a standard normal
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        out.push(SinteringParams {
            d0_nm: p.d0_nm,
            a_per_min: p.a_per_min * (s.ln_a_sigma * z).exp(),
            ea_j_per_mol: p.ea_j_per_mol * (1.0 + rng.random_range(-s.ea_fraction..=s.ea_fraction)),
            n: p.n * (1.0 + rng.random_range(-s.n_fraction..=s.n_fraction)),
        });
    }
    out
}

pub fn simulate<T: Scalar>(
    config: &SimConfig,
    temperature_c: T,
    grid: &[T],
) -> Result<SimSeries<T>, SimError> {
    let (min, max) = config.temperature_bounds_c;
    let tc = temperature_c.to_f64_lossy();
    if !(tc >= min && tc <= max) {
        return Err(SimError::TemperatureOutOfBounds {
            value: tc,
            min,
            max,
        });
    }
    let increasing = grid.windows(2).all(|w| w[0] < w[1]);
    if grid.is_empty() || !increasing || grid[0] < T::zero() {
        return Err(SimError::BadGrid);
    }
    let cast = |p: &SinteringParams<f64>| SinteringParams {
        d0_nm: T::lit(p.d0_nm),
        n: T::lit(p.n),
        a_per_min: T::lit(p.a_per_min),
        ea_j_per_mol: T::lit(p.ea_j_per_mol),
    };
    let nominal = cast(&config.params);
    let members: Vec<SinteringParams<T>> = ensemble(config).iter().map(cast).collect();
    let mut series = SimSeries {
        temperature_c,
        time_min: grid.to_vec(),
        mean_nm: Vec::with_capacity(grid.len()),
        lower_nm: Vec::with_capacity(grid.len()),
        upper_nm: Vec::with_capacity(grid.len()),
    };
    for &t in grid {
        let mean = size_at(&nominal, temperature_c, t);
        // the nominal member is part of the ensemble, so the band holds mean
        let (lo, hi) = members.iter().fold((mean, mean), |(lo, hi), m| {
            let d = size_at(m, temperature_c, t);
            (lo.min(d), hi.max(d))
        });
        series.mean_nm.push(mean);
        series.lower_nm.push(lo);
        series.upper_nm.push(hi);
    }
    Ok(series)
}

impl<T: Scalar> SimSeries<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_min,mean_nm,lower_nm,upper_nm\n");
        for i in 0..self.time_min.len() {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                self.time_min[i], self.mean_nm[i], self.lower_nm[i], self.upper_nm[i]
            ));
        }
        out
    }
}
