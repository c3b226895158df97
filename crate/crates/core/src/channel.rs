//! Scenario description and the seeded Monte Carlo link simulator.
//!
//! The surface is assumed to co-phase every reflected path for the user under
//! study, so only channel magnitudes are ever drawn: each element contributes
//! `|h_m| |g_m|`, a product of two Rayleigh variates with `E|h|^2 = 2 sigma^2`.
//! User indices are zero-based throughout the library; user 0 is the far user
//! with the largest power share.

use crate::error::{Error, Result};
use crate::exec::{self, CHUNK};
use crate::pep::ErrorEvent;
use crate::specfun::ln_q_function;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

/// A finite symbol alphabet with unit average energy and a bit label per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstellationRepr", into = "ConstellationRepr")]
pub struct Constellation {
    name: Option<String>,
    points: Vec<Complex64>,
    labels: Vec<u32>,
    bits: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ConstellationRepr {
    Named(String),
    Custom {
        points: Vec<[f64; 2]>,
        #[serde(default)]
        labels: Option<Vec<u32>>,
    },
}

impl TryFrom<ConstellationRepr> for Constellation {
    type Error = Error;

    fn try_from(r: ConstellationRepr) -> Result<Self> {
        match r {
            ConstellationRepr::Named(n) => Constellation::named(&n),
            ConstellationRepr::Custom { points, labels } => Constellation::custom(
                points
                    .into_iter()
                    .map(|[re, im]| Complex64::new(re, im))
                    .collect(),
                labels,
            ),
        }
    }
}

impl From<Constellation> for ConstellationRepr {
    fn from(c: Constellation) -> Self {
        match c.name {
            Some(n) => ConstellationRepr::Named(n),
            None => ConstellationRepr::Custom {
                points: c.points.iter().map(|p| [p.re, p.im]).collect(),
                labels: Some(c.labels),
            },
        }
    }
}

fn gray(k: u32) -> u32 {
    k ^ (k >> 1)
}

impl Constellation {
    pub fn bpsk() -> Self {
        Constellation {
            name: Some("bpsk".into()),
            points: vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            labels: vec![0, 1],
            bits: 1,
        }
    }

    /// Gray-labelled QPSK.
    pub fn qpsk() -> Self {
        let a = FRAC_1_SQRT_2;
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (i, re) in [a, -a].into_iter().enumerate() {
            for (q, im) in [a, -a].into_iter().enumerate() {
                points.push(Complex64::new(re, im));
                labels.push(((i as u32) << 1) | q as u32);
            }
        }
        Constellation {
            name: Some("qpsk".into()),
            points,
            labels,
            bits: 2,
        }
    }

    /// Gray-labelled square 16-QAM.
    pub fn qam16() -> Self {
        let scale = 10f64.sqrt().recip();
        let levels = [-3.0, -1.0, 1.0, 3.0];
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (i, re) in levels.iter().enumerate() {
            for (q, im) in levels.iter().enumerate() {
                points.push(Complex64::new(re * scale, im * scale));
                labels.push((gray(i as u32) << 2) | gray(q as u32));
            }
        }
        Constellation {
            name: Some("16qam".into()),
            points,
            labels,
            bits: 4,
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Self::bpsk()),
            "qpsk" | "4qam" => Ok(Self::qpsk()),
            "16qam" | "qam16" => Ok(Self::qam16()),
            other => Err(Error::InvalidConfig(format!(
                "unknown constellation '{other}' (expected bpsk, qpsk or 16qam)"
            ))),
        }
    }

    /// A custom alphabet. Labels default to the point index; the point count
    /// must then be a power of two for bit-error counting to be meaningful.
    pub fn custom(points: Vec<Complex64>, labels: Option<Vec<u32>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("constellation has no points".into()));
        }
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
        if (energy - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "constellation average energy {energy} is not 1"
            )));
        }
        for (i, a) in points.iter().enumerate() {
            if points[..i].iter().any(|b| (a - b).norm() < 1e-12) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate constellation point {a}"
                )));
            }
        }
        let labels = labels.unwrap_or_else(|| (0..points.len() as u32).collect());
        if labels.len() != points.len() {
            return Err(Error::InvalidConfig(
                "label count differs from point count".into(),
            ));
        }
        let bits = (points.len() as f64).log2().ceil().max(1.0) as u32;
        Ok(Constellation {
            name: None,
            points,
            labels,
            bits,
        })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    /// Number of differing label bits between two points.
    pub fn bit_errors(&self, a: usize, b: usize) -> u32 {
        (self.labels[a] ^ self.labels[b]).count_ones()
    }

    /// Index of the point closest to `z` (ML decision in Gaussian noise).
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }
}

/// One constellation shared by every user, or one per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstellationSet {
    Shared(Constellation),
    PerUser(Vec<Constellation>),
}

/// Full scenario description. Field names in JSON follow the usual symbols
/// (`M`, `L`, `sigma2`, `alpha`, `d_B`, `d_R`, `P`, `N0`, `constellation`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of reflective elements.
    #[serde(rename = "M")]
    pub elements: u32,
    /// Number of users.
    #[serde(rename = "L")]
    pub users: usize,
    /// Fading parameter: `E|h| = sigma sqrt(pi/2)`, `E|h|^2 = 2 sigma^2`.
    pub sigma2: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Base station to surface distance.
    #[serde(rename = "d_B")]
    pub d_b: f64,
    /// Surface to user distances, far user first.
    #[serde(rename = "d_R")]
    pub d_r: Vec<f64>,
    /// Power shares, largest first, summing to one.
    #[serde(rename = "P")]
    pub power: Vec<f64>,
    /// Noise power spectral density.
    #[serde(rename = "N0")]
    pub n0: f64,
    pub constellation: ConstellationSet,
}

impl SystemConfig {
    /// The two-user BPSK reference scenario: `P = (0.8, 0.2)`, `d_R = (5, 2)`,
    /// `d_B = 1`, `alpha = 3`, `sigma^2 = 1/2` (unit-power links) and `N0 = 1`.
    pub fn reference(elements: u32) -> Self {
        SystemConfig {
            elements,
            users: 2,
            sigma2: 0.5,
            alpha: 3.0,
            d_b: 1.0,
            d_r: vec![5.0, 2.0],
            power: vec![0.8, 0.2],
            n0: 1.0,
            constellation: ConstellationSet::Shared(Constellation::bpsk()),
        }
    }

    /// A single-user scenario with unit distances, so that `q = S`.
    pub fn unit_distance(elements: u32, sigma2: f64) -> Self {
        SystemConfig {
            elements,
            users: 1,
            sigma2,
            alpha: 3.0,
            d_b: 1.0,
            d_r: vec![1.0],
            power: vec![1.0],
            n0: 1.0,
            constellation: ConstellationSet::Shared(Constellation::bpsk()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.elements == 0 {
            return bad("M must be at least 1".into());
        }
        if self.users == 0 {
            return bad("L must be at least 1".into());
        }
        if self.d_r.len() != self.users || self.power.len() != self.users {
            return bad(format!(
                "d_R has {} and P has {} entries, expected L = {}",
                self.d_r.len(),
                self.power.len(),
                self.users
            ));
        }
        for (name, v) in [
            ("sigma2", self.sigma2),
            ("alpha", self.alpha),
            ("d_B", self.d_b),
            ("N0", self.n0),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.d_r.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return bad("all d_R must be positive".into());
        }
        if self.d_r.windows(2).any(|w| !(w[0] > w[1])) {
            return bad("d_R must be strictly decreasing (far user first)".into());
        }
        let sum: f64 = self.power.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return bad(format!("power coefficients sum to {sum}, not 1"));
        }
        if self.users > 1 && self.power.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return bad("power coefficients must lie in (0, 1)".into());
        }
        if self.power.windows(2).any(|w| !(w[0] > w[1])) {
            return bad("power coefficients must be strictly decreasing".into());
        }
        if let ConstellationSet::PerUser(v) = &self.constellation {
            if v.len() != self.users {
                return bad(format!(
                    "{} constellations for {} users",
                    v.len(),
                    self.users
                ));
            }
        }
        Ok(())
    }

    pub fn check_user(&self, user: usize) -> Result<()> {
        if user >= self.users {
            return Err(Error::InvalidArgument(format!(
                "user index {user} out of range for L = {}",
                self.users
            )));
        }
        Ok(())
    }

    pub fn constellation(&self, user: usize) -> &Constellation {
        match &self.constellation {
            ConstellationSet::Shared(c) => c,
            ConstellationSet::PerUser(v) => &v[user],
        }
    }

    /// `sqrt(d_B^alpha d_{R,l}^alpha)`, the divisor turning `S` into `q_l`.
    pub fn distance_factor(&self, user: usize) -> f64 {
        (self.d_b.powf(self.alpha) * self.d_r[user].powf(self.alpha)).sqrt()
    }

    pub fn with_elements(mut self, elements: u32) -> Self {
        self.elements = elements;
        self
    }

    pub fn with_n0(mut self, n0: f64) -> Self {
        self.n0 = n0;
        self
    }

    /// Sets `N0 = 1 / snr` for a linear average transmit SNR.
    pub fn with_snr(self, snr: f64) -> Self {
        self.with_n0(1.0 / snr)
    }

    /// Two-user shorthand: `P = (p1, 1 - p1)`.
    pub fn with_first_power(mut self, p1: f64) -> Self {
        if self.power.len() == 2 {
            self.power = vec![p1, 1.0 - p1];
        }
        self
    }
}

/// Strictly increasing positive average transmit SNRs; `gamma = 1 / N0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrGrid {
    points: Vec<f64>,
}

impl SnrGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty SNR grid".into()));
        }
        if points.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument("SNR values must be positive".into()));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "SNR grid must be strictly increasing".into(),
            ));
        }
        Ok(SnrGrid { points })
    }

    pub fn from_db(db: &[f64]) -> Result<Self> {
        Self::new(db.iter().map(|d| crate::db_to_linear(*d)).collect())
    }

    /// `start, start + step, ...` up to and including `stop` (with rounding slack).
    pub fn db_range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || stop < start {
            return Err(Error::InvalidArgument(format!(
                "bad SNR range {start}:{stop}:{step}"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        let db: Vec<f64> = (0..n).map(|k| start + k as f64 * step).collect();
        Self::from_db(&db)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn db(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| crate::linear_to_db(*p))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One draw of the cascade: `s` is the raw sum, `q = s / sqrt(d_B^a d_R^a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeSample {
    pub s: f64,
    pub q: f64,
}

/// `-ln U` for `U` uniform on `(0, 1]`.
#[inline]
fn exp1(rng: &mut ChaCha8Rng) -> f64 {
    -(1.0 - rng.gen::<f64>()).ln()
}

/// One Rayleigh-product sum `sum_m |h_m||g_m|`. With
/// `|h| = sigma sqrt(-2 ln U)`, a product is `2 sigma^2 sqrt(ln U1 ln U2)`.
#[inline]
pub(crate) fn draw_cascade_sum(m: u32, sigma: f64, rng: &mut ChaCha8Rng) -> f64 {
    let mut acc = 0.0;
    for _ in 0..m {
        acc += (exp1(rng) * exp1(rng)).sqrt();
    }
    2.0 * sigma * sigma * acc
}

/// Draws `count` reproducible cascade samples for `user`.
pub fn sample_cascade(
    config: &SystemConfig,
    user: usize,
    count: u64,
    seed: u64,
) -> Result<Vec<CascadeSample>> {
    config.validate()?;
    config.check_user(user)?;
    if count == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be at least 1".into(),
        ));
    }
    let d = config.distance_factor(user);
    let sigma = config.sigma2.sqrt();
    let m = config.elements;
    let parts = exec::map_chunks(count, seed, |_, len, rng| {
        (0..len)
            .map(|_| {
                let s = draw_cascade_sum(m, sigma, rng);
                CascadeSample { s, q: s / d }
            })
            .collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Histogram of `q` samples on `bins` equal cells of `[0, upper)`; the last
/// entry of the returned vector counts samples at or above `upper`.
pub fn cascade_histogram(
    config: &SystemConfig,
    user: usize,
    count: u64,
    seed: u64,
    upper: f64,
    bins: usize,
) -> Result<Vec<u64>> {
    config.validate()?;
    config.check_user(user)?;
    if count == 0 || bins == 0 || !(upper > 0.0) {
        return Err(Error::InvalidArgument(
            "histogram needs samples, bins and a positive range".into(),
        ));
    }
    let d = config.distance_factor(user);
    let sigma = config.sigma2.sqrt();
    let m = config.elements;
    let width = upper / bins as f64;
    let parts = exec::map_chunks(count, seed, |_, len, rng| {
        let mut h = vec![0u64; bins + 1];
        for _ in 0..len {
            let q = draw_cascade_sum(m, sigma, rng) / d;
            let k = ((q / width) as usize).min(bins);
            h[k] += 1;
        }
        h
    });
    let mut total = vec![0u64; bins + 1];
    for h in parts {
        for (t, v) in total.iter_mut().zip(h) {
            *t += v;
        }
    }
    Ok(total)
}

/// Wilson score interval for `k` successes in `n` trials at 95% confidence.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if p == 1.0 {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Monte Carlo budget for [`simulate_ber_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerOptions {
    /// Frame cap per SNR point; rounded up to whole chunks of 65536 frames.
    pub max_frames: u64,
    /// Stop a point once every user has seen this many bit errors.
    pub min_errors: Option<u64>,
    pub seed: u64,
}

/// One simulated BER point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr: f64,
    pub snr_db: f64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub frames: u64,
}

/// An SNR-indexed error-rate series for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub user: usize,
    pub method: String,
    pub points: Vec<BerPoint>,
}

/// Draws one frame: symbol indices of every user and each user's cascade.
/// The base-station links are shared; each user has its own surface links.
struct Frame {
    symbols: Vec<usize>,
    q: Vec<f64>,
    noise: Vec<Complex64>,
}

fn draw_frame(
    config: &SystemConfig,
    sigma: f64,
    inv_d: &[f64],
    rng: &mut ChaCha8Rng,
    f: &mut Frame,
) {
    let m = config.elements;
    for (l, s) in f.symbols.iter_mut().enumerate() {
        *s = rng.gen_range(0..config.constellation(l).len());
    }
    for q in f.q.iter_mut() {
        *q = 0.0;
    }
    for _ in 0..m {
        let h = exp1(rng);
        for q in f.q.iter_mut() {
            *q += (h * exp1(rng)).sqrt();
        }
    }
    for (q, inv) in f.q.iter_mut().zip(inv_d) {
        *q *= 2.0 * sigma * sigma * inv;
    }
    for n in f.noise.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *n = Complex64::new(re, im) * FRAC_1_SQRT_2;
    }
}

/// SIC detection at `user`: decode users `0..=user` in turn, each time
/// subtracting the already decided (possibly wrong) stronger symbols and
/// treating weaker users as noise. Returns the decided index for `user`.
fn sic_detect(config: &SystemConfig, sqrt_p: &[f64], user: usize, q: f64, r: Complex64) -> usize {
    let mut residual = r;
    let mut decided = 0;
    for i in 0..=user {
        let c = config.constellation(i);
        let gain = q * sqrt_p[i];
        decided = c.nearest(residual / gain);
        residual -= gain * c.points()[decided];
    }
    decided
}

/// Fixed-budget BER simulation: `frames` frames at every SNR point.
pub fn simulate_ber(
    config: &SystemConfig,
    snr: &SnrGrid,
    frames: u64,
    seed: u64,
) -> Result<Vec<BerCurve>> {
    simulate_ber_with(
        config,
        snr,
        &BerOptions {
            max_frames: frames,
            min_errors: None,
            seed,
        },
    )
}

/// Per-user BER over `snr` with the full superposition and SIC chain.
///
/// Every SNR point sees the same frames (common random numbers), with noise
/// scaled by `sqrt(N0)`. Work proceeds in batches of chunks; after each batch
/// points that reached `min_errors` for every user are retired, so the result
/// depends on the seed and options only.
pub fn simulate_ber_with(
    config: &SystemConfig,
    snr: &SnrGrid,
    opts: &BerOptions,
) -> Result<Vec<BerCurve>> {
    config.validate()?;
    if opts.max_frames == 0 {
        return Err(Error::InvalidArgument("frames must be at least 1".into()));
    }
    let users = config.users;
    let npts = snr.len();
    let sigma = config.sigma2.sqrt();
    let inv_d: Vec<f64> = (0..users)
        .map(|l| 1.0 / config.distance_factor(l))
        .collect();
    let sqrt_p: Vec<f64> = config.power.iter().map(|p| p.sqrt()).collect();
    let noise_scale: Vec<f64> = snr.points().iter().map(|g| (1.0 / g).sqrt()).collect();

    let total_chunks = opts.max_frames.div_ceil(CHUNK);
    let last_len = opts.max_frames - (total_chunks - 1) * CHUNK;
    const BATCH: u64 = 4;

    let mut errors = vec![vec![0u64; users]; npts];
    let mut frames = vec![0u64; npts];
    let mut active: Vec<bool> = vec![true; npts];
    let mut next = 0;
    while next < total_chunks && active.iter().any(|a| *a) {
        let end = (next + BATCH).min(total_chunks);
        let act = active.clone();
        let results = exec::map_chunk_range(next..end, opts.seed, |c, rng| {
            let len = if c + 1 == total_chunks {
                last_len
            } else {
                CHUNK
            };
            let mut counts = vec![vec![0u64; users]; npts];
            let mut f = Frame {
                symbols: vec![0; users],
                q: vec![0.0; users],
                noise: vec![Complex64::new(0.0, 0.0); users],
            };
            for _ in 0..len {
                draw_frame(config, sigma, &inv_d, rng, &mut f);
                let tx: Complex64 = (0..users)
                    .map(|i| sqrt_p[i] * config.constellation(i).points()[f.symbols[i]])
                    .sum();
                for (p, row) in counts.iter_mut().enumerate() {
                    if !act[p] {
                        continue;
                    }
                    for l in 0..users {
                        let r = f.q[l] * tx + noise_scale[p] * f.noise[l];
                        let d = sic_detect(config, &sqrt_p, l, f.q[l], r);
                        if d != f.symbols[l] {
                            row[l] += config.constellation(l).bit_errors(d, f.symbols[l]) as u64;
                        }
                    }
                }
            }
            (len, counts)
        });
        for (len, counts) in results {
            for p in 0..npts {
                if act[p] {
                    frames[p] += len;
                    for l in 0..users {
                        errors[p][l] += counts[p][l];
                    }
                }
            }
        }
        if let Some(min) = opts.min_errors {
            for p in 0..npts {
                if errors[p].iter().all(|e| *e >= min) {
                    active[p] = false;
                }
            }
        }
        next = end;
    }

    let db = snr.db();
    let curves = (0..users)
        .map(|l| {
            let bits_per = config.constellation(l).bits_per_symbol() as u64;
            let points = (0..npts)
                .map(|p| {
                    let bits = frames[p] * bits_per;
                    let k = errors[p][l];
                    let (lo, hi) = wilson_interval(k, bits);
                    BerPoint {
                        snr: snr.points()[p],
                        snr_db: db[p],
                        ber: k as f64 / bits as f64,
                        ci_low: lo,
                        ci_high: hi,
                        bit_errors: k,
                        bits,
                        frames: frames[p],
                    }
                })
                .collect();
            BerCurve {
                user: l,
                method: "monte-carlo".into(),
                points,
            }
        })
        .collect();
    Ok(curves)
}

/// Monte Carlo estimate of the exact (pre-Chernoff) unconditional PEP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PepEstimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
    /// Target level `c` of `|h|^2 |g|^2 / (4 sigma^4)` per element used by the
    /// importance density; 1 is plain sampling.
    pub importance_level: f64,
    /// The event has `vartheta <= 0`: the error is at least as likely as not at
    /// every SNR. Legal, but reported.
    pub vartheta_nonpositive: bool,
}

/// Number of ways the importance density splits a small product `a b = c`.
const SPLITS: usize = 9;
/// Share of each coordinate drawn from the original law, which keeps every
/// likelihood ratio below `1 / DEFENSIVE^2` per element.
const DEFENSIVE: f64 = 0.1;

/// Importance density for one element: `a = |h|^2 / 2 sigma^2` and
/// `b = |g|^2 / 2 sigma^2` are unit exponentials under the original law.
/// The proposal picks a split `theta` and draws `a` and `b` from defensive
/// mixtures of exponentials with means `c^theta` and `c^(1 - theta)`.
struct Proposal {
    means: [(f64, f64); SPLITS],
    ln_means: [(f64, f64); SPLITS],
}

impl Proposal {
    fn new(c: f64) -> Self {
        let mut means = [(1.0, 1.0); SPLITS];
        let mut ln_means = [(0.0, 0.0); SPLITS];
        for j in 0..SPLITS {
            let th = j as f64 / (SPLITS - 1) as f64;
            means[j] = (c.powf(th), c.powf(1.0 - th));
            ln_means[j] = (means[j].0.ln(), means[j].1.ln());
        }
        Proposal { means, ln_means }
    }

    fn draw(mean: f64, rng: &mut ChaCha8Rng) -> f64 {
        let e = exp1(rng);
        if rng.gen::<f64>() < DEFENSIVE {
            e
        } else {
            e * mean
        }
    }

    fn ln_coord(x: f64, mean: f64, ln_mean: f64) -> f64 {
        let a = DEFENSIVE.ln() - x;
        let b = (1.0 - DEFENSIVE).ln() - ln_mean - x / mean;
        let hi = a.max(b);
        hi + (-(a - b).abs()).exp().ln_1p()
    }

    /// Draws `(sqrt(a b), ln of the likelihood ratio)` for one element.
    fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let (ua, ub) = self.means[rng.gen_range(0..SPLITS)];
        let a = Self::draw(ua, rng);
        let b = Self::draw(ub, rng);
        let mut terms = [0.0; SPLITS];
        let mut hi = f64::NEG_INFINITY;
        for (t, (m, l)) in terms.iter_mut().zip(self.means.iter().zip(&self.ln_means)) {
            *t = Self::ln_coord(a, m.0, l.0) + Self::ln_coord(b, m.1, l.1);
            hi = hi.max(*t);
        }
        let ln_g =
            hi + terms.iter().map(|t| (t - hi).exp()).sum::<f64>().ln() - (SPLITS as f64).ln();
        ((a * b).sqrt(), -a - b - ln_g)
    }
}

fn pep_chunk(m: u32, scale: f64, k: f64, c: f64, len: u64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    if c >= 1.0 {
        for _ in 0..len {
            let v = ln_q_function(scale * draw_cascade_unit(m, rng) * k).exp();
            sum += v;
            sum2 += v * v;
        }
        return (sum, sum2);
    }
    let prop = Proposal::new(c);
    for _ in 0..len {
        let (mut acc, mut ln_w) = (0.0, 0.0);
        for _ in 0..m {
            let (r, lw) = prop.sample(rng);
            acc += r;
            ln_w += lw;
        }
        let v = (ln_w + ln_q_function(scale * acc * k)).exp();
        sum += v;
        sum2 += v * v;
    }
    (sum, sum2)
}

/// `sum_m sqrt(a_m b_m)` with unit exponentials.
fn draw_cascade_unit(m: u32, rng: &mut ChaCha8Rng) -> f64 {
    (0..m).map(|_| (exp1(rng) * exp1(rng)).sqrt()).sum()
}

/// `E[Q(q vartheta / lambda)]` over the cascade of `event.user`, with the
/// standard error of the mean.
///
/// Rare events are sampled from a mixture that concentrates every element's
/// `|h| |g|` near a common small level while spreading how the smallness is
/// shared between `|h|` and `|g|`, and reweighted by the likelihood ratio. The
/// level is the one with the lowest relative variance on short pilot runs.
/// The estimate is unbiased for any level.
pub fn simulate_pep(
    config: &SystemConfig,
    event: &ErrorEvent,
    trials: u64,
    seed: u64,
) -> Result<PepEstimate> {
    simulate_pep_with_level(config, event, trials, seed, None)
}

/// Pilot candidates: `c = 10^{-j/2}`, `j = 0..PILOT_LEVELS`.
const PILOT_LEVELS: u64 = 29;
const PILOT_TRIALS: u64 = 1 << 13;

/// [`simulate_pep`] with an optional fixed importance level `c` in `(0, 1]`
/// (`Some(1.0)` is plain Monte Carlo).
pub fn simulate_pep_with_level(
    config: &SystemConfig,
    event: &ErrorEvent,
    trials: u64,
    seed: u64,
    level: Option<f64>,
) -> Result<PepEstimate> {
    config.validate()?;
    config.check_user(event.user)?;
    if trials < 2 {
        return Err(Error::InvalidArgument(
            "at least two trials are needed".into(),
        ));
    }
    if event.delta_bar.norm() == 0.0 {
        return Err(Error::InvalidArgument("x and xbar coincide".into()));
    }
    let m = config.elements;
    let scale = 2.0 * config.sigma2 / config.distance_factor(event.user);
    let k = event.vartheta / event.lambda;

    let c = match level {
        Some(c) if c > 0.0 && c <= 1.0 => c,
        Some(c) => {
            return Err(Error::InvalidArgument(format!(
                "importance level {c} outside (0, 1]"
            )))
        }
        None => {
            // pilot runs live on substreams far above those of the main run
            let rel_var: Vec<(f64, f64)> = exec::map_ordered((0..PILOT_LEVELS).collect(), |j| {
                let c = 10f64.powf(-(j as f64) / 2.0);
                let mut rng = exec::chunk_rng(seed, (1 << 40) + j);
                let (s, s2) = pep_chunk(m, scale, k, c, PILOT_TRIALS, &mut rng);
                let n = PILOT_TRIALS as f64;
                let mean = s / n;
                let rv = if mean > 0.0 {
                    (s2 / n - mean * mean).max(0.0) / (mean * mean)
                } else {
                    f64::INFINITY
                };
                (rv, c)
            });
            rel_var
                .into_iter()
                .fold(
                    (f64::INFINITY, 1.0),
                    |best, x| if x.0 < best.0 { x } else { best },
                )
                .1
        }
    };
    let parts = exec::map_chunks(trials, seed, |_, len, rng| {
        pep_chunk(m, scale, k, c, len, rng)
    });
    let (s, s2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(PepEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        trials,
        importance_level: c,
        vartheta_nonpositive: event.vartheta <= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_is_valid() {
        let c = SystemConfig::reference(3);
        c.validate().unwrap();
        assert_eq!(c.distance_factor(0), (125.0f64 * 1.0).sqrt());
        assert!(c.clone().with_first_power(0.6).validate().is_ok());
        assert!(c.clone().with_first_power(0.4).validate().is_err());
    }

    #[test]
    fn config_validation_errors() {
        let mut c = SystemConfig::reference(3);
        c.d_r = vec![2.0, 5.0];
        assert!(c.validate().is_err());
        let mut c = SystemConfig::reference(3);
        c.power = vec![0.7, 0.2];
        assert!(c.validate().is_err());
        let mut c = SystemConfig::reference(3);
        c.sigma2 = 0.0;
        assert!(c.validate().is_err());
        assert!(SystemConfig::reference(0).validate().is_err());
        assert!(SystemConfig::reference(3).check_user(2).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = SystemConfig::reference(6);
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"M\":6") && text.contains("\"d_R\"") && text.contains("\"bpsk\""));
        let back: SystemConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let custom = r#"{"M":2,"L":1,"sigma2":1,"alpha":2,"d_B":1,"d_R":[1],"P":[1],"N0":1,
            "constellation":[{"points":[[1,0],[-1,0]]}]}"#;
        let c: SystemConfig = serde_json::from_str(custom).unwrap();
        c.validate().unwrap();
        assert_eq!(c.constellation(0).len(), 2);
    }

    #[test]
    fn constellations() {
        for c in [
            Constellation::bpsk(),
            Constellation::qpsk(),
            Constellation::qam16(),
        ] {
            let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.len() as f64;
            assert!((e - 1.0).abs() < 1e-12);
            assert_eq!(1 << c.bits_per_symbol(), c.len());
            for (k, p) in c.points().iter().enumerate() {
                assert_eq!(c.nearest(*p * 1.01), k);
            }
        }
        // Gray: nearest neighbours in 16-QAM differ by one bit
        let q = Constellation::qam16();
        let d = 2.0 / 10f64.sqrt();
        for (a, pa) in q.points().iter().enumerate() {
            for (b, pb) in q.points().iter().enumerate() {
                if ((pa - pb).norm() - d).abs() < 1e-9 {
                    assert_eq!(q.bit_errors(a, b), 1);
                }
            }
        }
        assert!(Constellation::named("8psk").is_err());
        assert!(Constellation::custom(vec![Complex64::new(2.0, 0.0)], None).is_err());
    }

    #[test]
    fn snr_grid() {
        let g = SnrGrid::db_range(0.0, 30.0, 2.0).unwrap();
        assert_eq!(g.len(), 16);
        assert!((g.db()[15] - 30.0).abs() < 1e-9);
        assert!(SnrGrid::new(vec![1.0, 1.0]).is_err());
        assert!(SnrGrid::new(vec![0.0]).is_err());
    }

    #[test]
    fn cascade_scaling_is_exact() {
        let c = SystemConfig::reference(2);
        let v = sample_cascade(&c, 1, 1000, 3).unwrap();
        let d = c.distance_factor(1);
        assert!(v.iter().all(|s| s.q == s.s / d));
        let unit = sample_cascade(&SystemConfig::unit_distance(1, 1.0), 0, 1000, 3).unwrap();
        assert!(unit.iter().all(|s| s.q == s.s));
        assert!(sample_cascade(&c, 2, 10, 1).is_err());
        assert!(sample_cascade(&c, 0, 0, 1).is_err());
    }

    #[test]
    fn wilson() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.03 && hi < 0.04);
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn noise_limit_gives_half() {
        let c = SystemConfig::reference(3);
        let g = SnrGrid::new(vec![1e-8]).unwrap();
        let curves = simulate_ber(&c, &g, 200_000, 5).unwrap();
        for curve in curves {
            let p = curve.points[0];
            let sd = (0.25 / p.bits as f64).sqrt();
            assert!((p.ber - 0.5).abs() < 5.0 * sd, "{p:?}");
        }
    }

    #[test]
    fn ber_reproducible_and_adaptive() {
        let c = SystemConfig::reference(2);
        let g = SnrGrid::from_db(&[0.0, 10.0, 40.0]).unwrap();
        let opts = BerOptions {
            max_frames: 5 * CHUNK,
            min_errors: Some(200),
            seed: 11,
        };
        let a = simulate_ber_with(&c, &g, &opts).unwrap();
        let b = simulate_ber_with(&c, &g, &opts).unwrap();
        assert_eq!(a, b);
        // the 0 dB point has plenty of errors after the first batch
        assert_eq!(a[0].points[0].frames, 4 * CHUNK);
        assert_eq!(a[0].points[2].frames, 5 * CHUNK);
        for curve in &a {
            assert!(curve.points[0].ber >= curve.points[2].ber);
        }
    }
}
