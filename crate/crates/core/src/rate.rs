//! Slack fixed point and Monte-Carlo ergodic rates.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Allocation, Scenario, SlackState};
use crate::rng::{mix, stream_rng};
use crate::units::LOG2_E;

/// Iteration cap of [`solve_slack_fixed_point`].
pub const SLACK_MAX_ITERS: usize = 10_000;
/// Relative residual accepted by [`solve_slack_fixed_point`].
pub const SLACK_TOL: f64 = 1e-12;

/// Right-hand side of the slack equation, `1 + sum_k a_k / (1 + M a_k / w)` with `a_k = l_k^2 p_k / sigma^2`.
pub fn slack_map(w: f64, snr: &[f64], m: usize) -> f64 {
    let m = m as f64;
    1.0 + snr.iter().map(|&a| a * w / (w + m * a)).sum::<f64>()
}

/// Per-UAV receive SNR `l^2 p / sigma^2`.
pub(crate) fn link_snr<'a>(
    power: &'a [f64],
    gains: &'a [f64],
    noise: f64,
) -> impl Iterator<Item = f64> + 'a {
    power.iter().zip(gains).map(move |(p, l)| l * l * p / noise)
}

/// Solves `w = 1 + sum_k l_k^2 p_k / (sigma^2 + M l_k^2 p_k / w)` for `w >= 1`.
///
/// The residual `h(w) = w - map(w)` is convex and increasing past its root, so Newton's
/// method started at the upper bracket `1 + sum a_k` descends monotonically onto it; a
/// bisection step takes over if rounding ever pushes an iterate out of the bracket.
pub fn solve_slack_fixed_point(power: &[f64], gains: &[f64], m: usize, noise: f64) -> Result<f64> {
    if power.len() != gains.len() {
        return Err(Error::Usage(format!(
            "{} powers for {} gains",
            power.len(),
            gains.len()
        )));
    }
    if let Some(p) = power.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(Error::Domain(format!(
            "power must be finite and non-negative, got {p}"
        )));
    }
    if !(noise > 0.0) || m == 0 {
        return Err(Error::Domain(
            "noise power and antenna count must be positive".into(),
        ));
    }
    let snr: Vec<f64> = link_snr(power, gains, noise).collect();
    fixed_point_snr(&snr, m)
}

pub(crate) fn fixed_point_snr(snr: &[f64], m: usize) -> Result<f64> {
    let total: f64 = snr.iter().sum();
    if total == 0.0 {
        return Ok(1.0);
    }
    let mf = m as f64;
    let (mut lo, mut hi) = (1.0, 1.0 + total);
    let mut w = hi;
    let mut residual = f64::INFINITY;
    for _ in 0..SLACK_MAX_ITERS {
        let f = slack_map(w, snr, m);
        let h = w - f;
        residual = h.abs() / w;
        if residual <= SLACK_TOL {
            return Ok(w);
        }
        if h > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let dh = 1.0
            - snr
                .iter()
                .map(|&a| mf * a * a / (w + mf * a).powi(2))
                .sum::<f64>();
        let next = w - h / dh;
        w = if dh > 0.0 && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            return Ok(w);
        }
    }
    Err(Error::Numerical {
        message: "slack fixed point did not converge".into(),
        residual,
    })
}

impl SlackState {
    /// Slack values consistent with the powers in `alloc`, for every `(n, u, g)`.
    pub fn fixed_point(alloc: &Allocation, sc: &Scenario) -> Result<Self> {
        alloc.check_shape(sc)?;
        Self::for_power(sc, &alloc.power)
    }

    /// Slack values consistent with a power tensor `[n][g][k]`.
    pub fn for_power(sc: &Scenario, power: &[Vec<Vec<f64>>]) -> Result<Self> {
        if power.len() != sc.num_slots() {
            return Err(Error::Usage(
                "power tensor slot count differs from scenario".into(),
            ));
        }
        let mut w = Vec::with_capacity(sc.num_slots());
        for n in 0..sc.num_slots() {
            let mut per_u = Vec::with_capacity(sc.users_per_slot[n]);
            for u in 0..sc.users_per_slot[n] {
                let row = (0..sc.num_subchannels)
                    .map(|g| {
                        solve_slack_fixed_point(
                            &power[n][g],
                            sc.uav_gains(n, u, g),
                            sc.antennas_per_user,
                            sc.noise_power,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                per_u.push(row);
            }
            w.push(per_u);
        }
        Ok(Self { w })
    }
}

/// Monte-Carlo estimate of an ergodic rate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
}

const CHUNK: usize = 1024;

/// `E log2 det(I_M + S L P L S^H / sigma^2)` over `S` with i.i.d. unit-variance complex Gaussian entries.
///
/// Deterministic in `(seed, samples)` regardless of the thread count.
pub fn mc_ergodic_rate(
    power: &[f64],
    gains: &[f64],
    m: usize,
    noise: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    mc_ergodic_estimate(power, gains, m, noise, samples, seed).mean
}

pub fn mc_ergodic_estimate(
    power: &[f64],
    gains: &[f64],
    m: usize,
    noise: f64,
    samples: usize,
    seed: u64,
) -> McEstimate {
    let samples = samples.max(1);
    let amp: Vec<f64> = link_snr(power, gains, noise).map(f64::sqrt).collect();
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            let mut rng = stream_rng(seed, &[c as u64]);
            let mut work = LogDetWork::new(m, amp.len());
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let r = work.sample(&mut rng, &amp);
                s1 += r;
                s2 += r * r;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = samples as f64;
    let mean = s1 / n;
    let var = if samples > 1 {
        ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    McEstimate {
        mean,
        std_err: (var / n).sqrt(),
    }
}

/// Scratch buffers for one `log2 det` draw.
struct LogDetWork {
    m: usize,
    k: usize,
    h: Vec<Complex64>,
    a: Vec<Complex64>,
}

impl LogDetWork {
    fn new(m: usize, k: usize) -> Self {
        let d = m.min(k);
        Self {
            m,
            k,
            h: vec![Complex64::default(); m * k],
            a: vec![Complex64::default(); d * d],
        }
    }

    fn sample<R: Rng>(&mut self, rng: &mut R, amp: &[f64]) -> f64 {
        let (m, k) = (self.m, self.k);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // Always draw the full M x K matrix so that draws line up across power levels.
        for r in 0..m {
            for c in 0..k {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                self.h[r * k + c] = Complex64::new(re * s, im * s) * amp[c];
            }
        }
        let d = m.min(k);
        // Gram matrix in the smaller dimension: det(I + H H^H) = det(I + H^H H).
        for i in 0..d {
            for j in 0..=i {
                let mut acc = Complex64::default();
                if k <= m {
                    for r in 0..m {
                        acc += self.h[r * k + i] * self.h[r * k + j].conj();
                    }
                } else {
                    for c in 0..k {
                        acc += self.h[i * k + c] * self.h[j * k + c].conj();
                    }
                }
                if i == j {
                    acc += 1.0;
                }
                self.a[i * d + j] = acc;
            }
        }
        2.0 * LOG2_E * cholesky_log_diag(&mut self.a, d)
    }
}

/// In-place lower Cholesky of a Hermitian positive-definite matrix; returns `sum ln L_ii`.
fn cholesky_log_diag(a: &mut [Complex64], d: usize) -> f64 {
    let mut log_sum = 0.0;
    for j in 0..d {
        let mut diag = a[j * d + j].re;
        for p in 0..j {
            diag -= a[j * d + p].norm_sqr();
        }
        let ljj = diag.max(f64::MIN_POSITIVE).sqrt();
        a[j * d + j] = Complex64::new(ljj, 0.0);
        log_sum += ljj.ln();
        for i in j + 1..d {
            let mut v = a[i * d + j];
            for p in 0..j {
                v -= a[i * d + p] * a[j * d + p].conj();
            }
            a[i * d + j] = v / ljj;
        }
    }
    log_sum
}

/// Monte-Carlo efficiencies of an allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct McObjectives {
    /// Overall efficiency `D_e`, bit*s/Hz.
    pub d_e: f64,
    /// Worst per-user efficiency `D_min`.
    pub d_min: f64,
    /// `[n][u]` totals.
    pub per_user: Vec<Vec<f64>>,
}

/// Plugs Monte-Carlo rates into the overall and minimum efficiency.
///
/// Each `(n, u, g)` link uses its own sample stream derived from `seed`, so two allocations
/// evaluated with the same seed see the same fading.
pub fn mc_objectives(
    alloc: &Allocation,
    sc: &Scenario,
    samples: usize,
    seed: u64,
) -> Result<McObjectives> {
    alloc.check_shape(sc)?;
    let links: Vec<(usize, usize, usize)> = (0..sc.num_slots())
        .flat_map(|n| {
            (0..sc.users_per_slot[n])
                .flat_map(move |u| (0..sc.num_subchannels).map(move |g| (n, u, g)))
        })
        .filter(|&(n, u, g)| alloc.assign[n][u][g])
        .collect();
    let rates: Vec<f64> = links
        .par_iter()
        .map(|&(n, u, g)| {
            let link_seed = mix(seed, &[n as u64, u as u64, g as u64]);
            mc_ergodic_rate(
                &alloc.power[n][g],
                sc.uav_gains(n, u, g),
                sc.antennas_per_user,
                sc.noise_power,
                samples,
                link_seed,
            )
        })
        .collect();
    let mut per_user: Vec<Vec<f64>> = sc.users_per_slot.iter().map(|&u| vec![0.0; u]).collect();
    for (&(n, u, _), r) in links.iter().zip(&rates) {
        per_user[n][u] += alloc.hover[n] * r;
    }
    let d_e = per_user.iter().flatten().sum();
    let min = per_user
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let d_min = if min.is_finite() { min } else { 0.0 };
    Ok(McObjectives {
        d_e,
        d_min,
        per_user,
    })
}
