//! Two-channel sinusoid synthesis, noise, and noise-floor estimation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::angle::{circular_distance, wrap_angle};
use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_eigenvalues, CMatrix, HermitianMatrix};
use crate::vandermonde::{Atom, LineSpectrum};

/// Channels per sample.
pub const CHANNELS: usize = 2;

/// Identifier of the random generator recorded in every artifact.
pub const GENERATOR_ID: &str = "ChaCha20Rng/rand_chacha-0.9";

pub type SpecRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> SpecRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent stream for one trial of a study.
pub fn trial_rng(master_seed: u64, trial: u64) -> SpecRng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Stacked samples `y(0), ..., y(n)`, each a complex 2-vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasurementWire", into = "MeasurementWire")]
pub struct MeasurementVector {
    n: usize,
    samples: Vec<c64>,
}

impl MeasurementVector {
    pub fn new(n: usize, samples: Vec<c64>) -> Result<Self> {
        if samples.len() != CHANNELS * (n + 1) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples for n={n}, got {}",
                CHANNELS * (n + 1),
                samples.len()
            )));
        }
        Ok(Self { n, samples })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            samples: vec![c64::new(0.0, 0.0); CHANNELS * (n + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn as_slice(&self) -> &[c64] {
        &self.samples
    }

    pub fn sample(&self, t: usize) -> [c64; 2] {
        [self.samples[2 * t], self.samples[2 * t + 1]]
    }

    /// `y_k(0), ..., y_k(n)` for channel `k` in `0..2`.
    pub fn channel(&self, k: usize) -> Vec<c64> {
        self.samples.iter().skip(k).step_by(CHANNELS).copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n: self.n,
            samples: self.samples.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch("measurement lengths differ".into()));
        }
        Ok(Self {
            n: self.n,
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

#[derive(Serialize, Deserialize)]
struct MeasurementWire {
    n: usize,
    channels: usize,
    samples: Vec<c64>,
}

impl TryFrom<MeasurementWire> for MeasurementVector {
    type Error = Error;

    fn try_from(w: MeasurementWire) -> Result<Self> {
        if w.channels != CHANNELS {
            return Err(Error::Format(format!("only {CHANNELS} channels are supported, got {}", w.channels)));
        }
        MeasurementVector::new(w.n, w.samples)
    }
}

impl From<MeasurementVector> for MeasurementWire {
    fn from(x: MeasurementVector) -> Self {
        Self {
            n: x.n,
            channels: CHANNELS,
            samples: x.samples,
        }
    }
}

/// `y(t) = sum_l s_l e^{i theta_l t}` for `t = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidModel {
    pub n: usize,
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<[c64; 2]>,
}

impl SinusoidModel {
    pub fn new(n: usize, frequencies: Vec<f64>, amplitudes: Vec<[c64; 2]>) -> Result<Self> {
        if frequencies.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} frequencies but {} amplitudes",
                frequencies.len(),
                amplitudes.len()
            )));
        }
        let frequencies: Vec<f64> = frequencies.into_iter().map(wrap_angle).collect();
        for (i, a) in amplitudes.iter().enumerate() {
            if a[0].norm_sqr() + a[1].norm_sqr() == 0.0 {
                return Err(Error::InvalidArgument(format!("amplitude {i} is zero")));
            }
        }
        for i in 0..frequencies.len() {
            for j in i + 1..frequencies.len() {
                if circular_distance(frequencies[i], frequencies[j]) == 0.0 {
                    return Err(Error::InvalidArgument(format!("repeated frequency {}", frequencies[i])));
                }
            }
        }
        Ok(Self {
            n,
            frequencies,
            amplitudes,
        })
    }

    /// Number of sources `L`.
    pub fn sources(&self) -> usize {
        self.frequencies.len()
    }

    /// Atomic decomposition with rank-one densities `s_l s_l^H`.
    pub fn line_spectrum(&self) -> LineSpectrum {
        let atoms = self
            .frequencies
            .iter()
            .zip(&self.amplitudes)
            .map(|(&theta, s)| Atom {
                theta,
                q: CMatrix::from_fn(2, 2, |i, j| s[i] * s[j].conj()),
            })
            .collect();
        LineSpectrum::new(CHANNELS, atoms).expect("model invariants give a valid spectrum")
    }

    /// `sum_l ||s_l||`.
    pub fn amplitude_norm_sum(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|s| (s[0].norm_sqr() + s[1].norm_sqr()).sqrt())
            .sum()
    }
}

pub fn synthesize(model: &SinusoidModel) -> MeasurementVector {
    let n = model.n;
    let mut samples = vec![c64::new(0.0, 0.0); CHANNELS * (n + 1)];
    for (&theta, s) in model.frequencies.iter().zip(&model.amplitudes) {
        for t in 0..=n {
            let e = c64::from_polar(1.0, theta * t as f64);
            samples[2 * t] += s[0] * e;
            samples[2 * t + 1] += s[1] * e;
        }
    }
    MeasurementVector { n, samples }
}

/// Circular complex Gaussian noise level and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_w: f64,
    pub seed: u64,
}

pub fn add_noise(x: &MeasurementVector, spec: &NoiseSpec) -> Result<MeasurementVector> {
    add_noise_with(x, spec.sigma_w, &mut rng_from_seed(spec.seed))
}

/// Adds noise whose real and imaginary parts are each `N(0, sigma_w^2 / 2)`.
pub fn add_noise_with<R: Rng + ?Sized>(x: &MeasurementVector, sigma_w: f64, rng: &mut R) -> Result<MeasurementVector> {
    if !(sigma_w >= 0.0) || !sigma_w.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level must be nonnegative, got {sigma_w}")));
    }
    if sigma_w == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, sigma_w / 2f64.sqrt()).expect("finite positive deviation");
    let samples = x
        .samples
        .iter()
        .map(|z| z + c64::new(normal.sample(rng), normal.sample(rng)))
        .collect();
    Ok(MeasurementVector { n: x.n, samples })
}

pub fn random_amplitudes(count: usize, seed: u64) -> Vec<[c64; 2]> {
    random_amplitudes_with(count, &mut rng_from_seed(seed))
}

/// Each component has real and imaginary parts uniform on `[0, 1)`.
pub fn random_amplitudes_with<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<[c64; 2]> {
    (0..count)
        .map(|_| {
            let mut c = || c64::new(rng.random::<f64>(), rng.random::<f64>());
            [c(), c()]
        })
        .collect()
}

/// I.i.d. uniform frequencies on `(-pi, pi]`, redrawn until pairwise separated by `min_separation`.
pub fn random_frequencies_with<R: Rng + ?Sized>(count: usize, min_separation: f64, rng: &mut R) -> Result<Vec<f64>> {
    const MAX_DRAWS: usize = 100_000;
    for _ in 0..MAX_DRAWS {
        let thetas: Vec<f64> = (0..count).map(|_| PI - 2.0 * PI * rng.random::<f64>()).collect();
        if min_pairwise_separation(&thetas) >= min_separation {
            return Ok(thetas);
        }
    }
    Err(Error::InvalidArgument(format!(
        "could not place {count} frequencies with separation {min_separation}"
    )))
}

fn min_pairwise_separation(thetas: &[f64]) -> f64 {
    let mut best = 2.0 * PI;
    for i in 0..thetas.len() {
        for j in i + 1..thetas.len() {
            best = best.min(circular_distance(thetas[i], thetas[j]));
        }
    }
    best
}

/// Noise level for a given SNR in dB, with signal deviation `sqrt(1/6)`.
pub fn snr_to_sigma(snr_db: f64) -> f64 {
    (1.0f64 / 6.0).sqrt() * 10f64.powf(-snr_db / 20.0)
}

/// `sigma(j) = (1/(n+1)) sum_{t=0}^{n-j} y(t+j) conj(y(t))` for `j = 0..=n_tilde`.
pub fn biased_covariances(y: &[c64], n_tilde: usize) -> Result<Vec<c64>> {
    if y.is_empty() || n_tilde >= y.len() {
        return Err(Error::InvalidArgument(format!(
            "lag {n_tilde} needs at least {} samples, got {}",
            n_tilde + 1,
            y.len()
        )));
    }
    let count = y.len() as f64;
    Ok((0..=n_tilde)
        .map(|j| y[j..].iter().zip(y).map(|(a, b)| a * b.conj()).sum::<c64>() / count)
        .collect())
}

/// Largest lag used for the noise-floor estimate.
pub fn noise_lag(n: usize) -> usize {
    n / 3
}

/// Number of smallest eigenvalues averaged for lag `n_tilde`.
pub fn noise_floor_count(n_tilde: usize) -> usize {
    ((n_tilde + 1) / 4).max(1)
}

/// Mean of the smallest eigenvalues of the averaged per-channel covariance Toeplitz matrices.
pub fn estimate_noise_variance(y: &MeasurementVector) -> Result<f64> {
    if y.n() < 8 {
        return Err(Error::InvalidArgument(format!(
            "noise-floor estimate needs n >= 8, got {}",
            y.n()
        )));
    }
    let n_tilde = noise_lag(y.n());
    let mut lags = vec![c64::new(0.0, 0.0); n_tilde + 1];
    for k in 0..CHANNELS {
        for (acc, s) in lags.iter_mut().zip(biased_covariances(&y.channel(k), n_tilde)?) {
            *acc += s;
        }
    }
    for l in &mut lags {
        *l /= CHANNELS as f64;
    }
    let t = HermitianMatrix::from_fn(n_tilde + 1, |i, j| {
        if i >= j {
            lags[i - j]
        } else {
            lags[j - i].conj()
        }
    });
    let eig = hermitian_eigenvalues(&t)?;
    let count = noise_floor_count(n_tilde);
    Ok(eig[..count].iter().sum::<f64>() / count as f64)
}

/// `tau = sigma_w sqrt((n+1)(2 + ln(n+1) + sqrt(4 ln(n+1))))`.
pub fn compute_tau(sigma_w: f64, n: usize) -> f64 {
    let m = (n + 1) as f64;
    let l = m.ln();
    sigma_w * (m * (2.0 + l + (4.0 * l).sqrt())).sqrt()
}
