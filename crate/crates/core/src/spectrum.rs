//! Power spectral density, PAPR and mask checks.
//!
//! The analytic PSD is `S(f) = (1/N_s) Σ_k σ_k² |H_k(f)|²`, sampled on a
//! uniform grid of `d·N` points. [`PsdModel`] keeps the per-carrier terms so
//! that switching carriers off is a cheap subtraction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::config::OfdmConfig;
use crate::design::PulseDesign;
use crate::error::{Error, Result};
use crate::pulse::basic_pulse;
use crate::window::ShapingWindow;

pub const DEFAULT_GRID_DENSITY: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Absolute,
    /// Divided by the maximum over the data-carrier frequencies.
    Peak0Db,
}

/// PSD samples on a uniform grid covering `(-1/2, 1/2]`, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdCurve {
    pub n_carriers: usize,
    pub sample_rate_hz: f64,
    pub values: Vec<f64>,
    pub normalization: Normalization,
    /// Absolute passband peak used for normalization.
    pub reference: f64,
}

/// Ascending-order index of natural FFT bin `b` on an `m`-point grid.
fn ascending_index(b: usize, m: usize) -> usize {
    if b <= m / 2 {
        b + m / 2 - 1
    } else {
        b - m / 2 - 1
    }
}

/// Natural bins whose frequencies fall in `[lo, hi]` (carrier units, circular).
fn bins_in(lo: f64, hi: f64, n_carriers: usize, m: usize) -> impl Iterator<Item = usize> {
    let scale = m as f64 / n_carriers as f64;
    let a = (lo * scale - 1e-9).ceil() as i64;
    let b = (hi * scale + 1e-9).floor() as i64;
    let m = m as i64;
    let count = if b >= a { (b - a + 1).min(m) } else { 0 };
    (0..count).map(move |i| (a + i).rem_euclid(m) as usize)
}

impl PsdCurve {
    fn from_natural(config: &OfdmConfig, natural: &[f64], reference: f64, normalization: Normalization) -> Self {
        let m = natural.len();
        let mut values = vec![0.0; m];
        let scale = match normalization {
            Normalization::Absolute => 1.0,
            Normalization::Peak0Db => 1.0 / reference,
        };
        for (b, v) in natural.iter().enumerate() {
            values[ascending_index(b, m)] = v.max(0.0) * scale;
        }
        Self {
            n_carriers: config.n_carriers,
            sample_rate_hz: config.sample_rate_hz,
            values,
            normalization,
            reference,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid_density(&self) -> f64 {
        self.values.len() as f64 / self.n_carriers as f64
    }

    /// Normalized frequencies of the samples.
    pub fn frequencies(&self) -> Vec<f64> {
        let m = self.values.len() as i64;
        (0..m).map(|i| (i - (m / 2 - 1)) as f64 / m as f64).collect()
    }

    pub fn db(&self) -> Vec<f64> {
        self.values.iter().map(|&v| to_db(v)).collect()
    }

    /// Natural-order bin `b` value.
    pub fn at_bin(&self, b: usize) -> f64 {
        self.values[ascending_index(b % self.values.len(), self.values.len())]
    }

    /// Value at the grid point nearest to carrier frequency `k` (carrier units).
    pub fn at_carrier(&self, k: f64) -> f64 {
        let m = self.values.len();
        let b = (k * m as f64 / self.n_carriers as f64).round() as i64;
        self.at_bin(b.rem_euclid(m as i64) as usize)
    }

    /// Maximum over grid points in `[lo, hi]` (carrier units, circular).
    pub fn max_in(&self, lo: f64, hi: f64) -> f64 {
        bins_in(lo, hi, self.n_carriers, self.values.len())
            .map(|b| self.at_bin(b))
            .fold(0.0, f64::max)
    }

    /// Mean over grid points in `[lo, hi]` (carrier units, circular).
    pub fn mean_in(&self, lo: f64, hi: f64) -> f64 {
        let (s, c) = bins_in(lo, hi, self.n_carriers, self.values.len())
            .fold((0.0, 0usize), |(s, c), b| (s + self.at_bin(b), c + 1));
        if c == 0 {
            0.0
        } else {
            s / c as f64
        }
    }

    /// Rescales so that the maximum over the given data carriers is 0 dB.
    pub fn normalized_to_carriers(&self, data: &[usize]) -> Self {
        let peak = data.iter().map(|&k| self.at_carrier(k as f64)).fold(0.0, f64::max);
        let mut out = self.clone();
        if peak > 0.0 {
            out.values.iter_mut().for_each(|v| *v /= peak);
            out.reference = match self.normalization {
                Normalization::Absolute => peak,
                Normalization::Peak0Db => self.reference * peak,
            };
        }
        out.normalization = Normalization::Peak0Db;
        out
    }

    /// `∫ S(f) df` over the full band (rectangle rule, exact for trigonometric
    /// polynomials of degree below the grid size).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// CSV with columns `frequency_hz,psd_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency_hz,psd_db\n");
        for (f, v) in self.frequencies().iter().zip(&self.values) {
            let _ = writeln!(out, "{:.6},{:.6}", f * self.sample_rate_hz, to_db(*v));
        }
        out
    }
}

pub fn to_db(v: f64) -> f64 {
    10.0 * v.max(1e-300).log10()
}

/// `|X(m/M)|²` for `m` in `0..M`, natural order, via folding onto `M` points.
pub fn pulse_power_spectrum(pulse: &[Complex64], fft: &dyn Fft<f64>) -> Vec<f64> {
    let m = fft.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (i, v) in pulse.iter().enumerate() {
        buf[i % m] += v;
    }
    fft.process(&mut buf);
    buf.iter().map(|v| v.norm_sqr()).collect()
}

/// Per-carrier decomposition of the analytic PSD.
#[derive(Clone)]
pub struct PsdModel {
    config: OfdmConfig,
    points: usize,
    /// `|G(f)|² / N_s`, natural order.
    base: Vec<f64>,
    /// `|H_k(f)|² / N_s` for carriers with generalized pulses.
    generalized: BTreeMap<usize, Vec<f64>>,
    variances: BTreeMap<usize, f64>,
    total: Vec<f64>,
}

impl std::fmt::Debug for PsdModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PsdModel")
            .field("points", &self.points)
            .field("active", &self.variances.len())
            .field("generalized", &self.generalized.len())
            .finish()
    }
}

impl PsdModel {
    fn planner(config: &OfdmConfig, grid_density: usize) -> Result<(usize, Arc<dyn Fft<f64>>)> {
        if grid_density < 4 {
            return Err(Error::Config(format!("grid density {grid_density} is below 4")));
        }
        let points = grid_density * config.n_carriers;
        Ok((points, FftPlanner::new().plan_fft_forward(points)))
    }

    /// Conventional transmitter with unit variance on `data`.
    pub fn conventional(
        config: &OfdmConfig,
        window: &ShapingWindow,
        data: &[usize],
        grid_density: usize,
    ) -> Result<Self> {
        let variances = data.iter().map(|&k| (k, 1.0)).collect();
        Self::build(config, window, &BTreeMap::new(), variances, grid_density)
    }

    /// Every data carrier of `design` with unit variance.
    pub fn from_design(design: &PulseDesign, grid_density: usize) -> Result<Self> {
        let variances = design.plan.data.iter().map(|&k| (k, 1.0)).collect();
        Self::from_design_with(design, variances, grid_density)
    }

    /// `variances` maps data carriers to `σ_k²`; absent carriers are silent.
    pub fn from_design_with(
        design: &PulseDesign,
        variances: BTreeMap<usize, f64>,
        grid_density: usize,
    ) -> Result<Self> {
        let pulses: BTreeMap<usize, Vec<Complex64>> = design
            .carriers
            .par_iter()
            .map(|cd| Ok((cd.carrier, design.pulse(cd.carrier)?)))
            .collect::<Result<_>>()?;
        Self::build(&design.config, &design.window, &pulses, variances, grid_density)
    }

    fn build(
        config: &OfdmConfig,
        window: &ShapingWindow,
        pulses: &BTreeMap<usize, Vec<Complex64>>,
        variances: BTreeMap<usize, f64>,
        grid_density: usize,
    ) -> Result<Self> {
        let (points, fft) = Self::planner(config, grid_density)?;
        for &k in variances.keys() {
            config.check_carrier(k)?;
        }
        let ns = config.symbol_len() as f64;
        let g = basic_pulse(config, window, 0)?;
        let base: Vec<f64> = pulse_power_spectrum(&g, fft.as_ref())
            .into_iter()
            .map(|v| v / ns)
            .collect();
        let generalized: BTreeMap<usize, Vec<f64>> = pulses
            .par_iter()
            .map(|(&k, h)| {
                let s = pulse_power_spectrum(h, fft.as_ref());
                (k, s.into_iter().map(|v| v / ns).collect())
            })
            .collect();
        let mut model = Self {
            config: *config,
            points,
            base,
            generalized,
            variances,
            total: Vec::new(),
        };
        model.total = model.conventional_sum(&fft)?;
        let extra: Vec<(f64, &Vec<f64>)> = model
            .generalized
            .iter()
            .filter_map(|(k, s)| model.variances.get(k).map(|&v| (v, s)))
            .collect();
        let mut total = std::mem::take(&mut model.total);
        for (v, s) in extra {
            for (t, x) in total.iter_mut().zip(s) {
                *t += v * x;
            }
        }
        model.total = total;
        Ok(model)
    }

    /// Conventional carriers: the comb of variances convolved with `|G|²/N_s`.
    fn conventional_sum(&self, fft: &Arc<dyn Fft<f64>>) -> Result<Vec<f64>> {
        let m = self.points;
        let d = m / self.config.n_carriers;
        let mut comb = vec![Complex64::new(0.0, 0.0); m];
        let mut any = false;
        for (&k, &v) in &self.variances {
            if !self.generalized.contains_key(&k) {
                comb[d * k] += v;
                any = true;
            }
        }
        if !any {
            return Ok(vec![0.0; m]);
        }
        let mut base: Vec<Complex64> = self.base.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.process(&mut comb);
        fft.process(&mut base);
        for (c, b) in comb.iter_mut().zip(&base) {
            *c *= b;
        }
        let inverse = FftPlanner::new().plan_fft_inverse(m);
        inverse.process(&mut comb);
        let scale = 1.0 / m as f64;
        Ok(comb.iter().map(|v| (v.re * scale).max(0.0)).collect())
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.config
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn grid_density(&self) -> usize {
        self.points / self.config.n_carriers
    }

    /// Carriers currently transmitting.
    pub fn active(&self) -> Vec<usize> {
        self.variances
            .iter()
            .filter(|(_, &v)| v > 0.0)
            .map(|(&k, _)| k)
            .collect()
    }

    /// Contribution of carrier `k` at natural bin `b`.
    fn contribution(&self, k: usize, b: usize) -> f64 {
        let v = self.variances.get(&k).copied().unwrap_or(0.0);
        if v == 0.0 {
            return 0.0;
        }
        match self.generalized.get(&k) {
            Some(s) => v * s[b],
            None => {
                let d = self.points / self.config.n_carriers;
                v * self.base[(b + self.points - d * k) % self.points]
            }
        }
    }

    /// Switches carrier `k` off.
    pub fn remove(&mut self, k: usize) {
        if !self.variances.contains_key(&k) {
            return;
        }
        let delta: Vec<f64> = (0..self.points).map(|b| self.contribution(k, b)).collect();
        for (t, x) in self.total.iter_mut().zip(delta) {
            *t = (*t - x).max(0.0);
        }
        self.variances.remove(&k);
    }

    /// Absolute PSD at natural bin `b`.
    pub fn at_bin(&self, b: usize) -> f64 {
        self.total[b % self.points]
    }

    /// Maximum over the active data carriers' frequencies.
    pub fn passband_peak(&self) -> f64 {
        let d = self.points / self.config.n_carriers;
        self.active().iter().map(|&k| self.total[d * k]).fold(0.0, f64::max)
    }

    /// Maximum of the absolute PSD over `[lo, hi]` in carrier units.
    pub fn max_in(&self, lo: f64, hi: f64) -> f64 {
        bins_in(lo, hi, self.config.n_carriers, self.points)
            .map(|b| self.total[b])
            .fold(0.0, f64::max)
    }

    pub fn curve(&self, normalization: Normalization) -> PsdCurve {
        PsdCurve::from_natural(&self.config, &self.total, self.passband_peak(), normalization)
    }
}

/// Analytic PSD of a design with unit-variance data.
pub fn analytic_psd(design: &PulseDesign, grid_density: usize, normalization: Normalization) -> Result<PsdCurve> {
    Ok(PsdModel::from_design(design, grid_density)?.curve(normalization))
}

pub fn analytic_psd_conventional(
    config: &OfdmConfig,
    window: &ShapingWindow,
    data: &[usize],
    grid_density: usize,
    normalization: Normalization,
) -> Result<PsdCurve> {
    Ok(PsdModel::conventional(config, window, data, grid_density)?.curve(normalization))
}

/// Periodic Hann window of `len` samples.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// Averaged-periodogram estimate with a Hann window, scaled so that
/// unit-variance white noise has PSD 1.
pub fn welch_psd(
    config: &OfdmConfig,
    samples: &[Complex64],
    window_len: usize,
    overlap_len: usize,
) -> Result<PsdCurve> {
    if window_len == 0 || overlap_len >= window_len {
        return Err(Error::Config("Welch overlap must be shorter than the window".into()));
    }
    if samples.len() < window_len {
        return Err(Error::InsufficientSamples {
            required: window_len,
            actual: samples.len(),
        });
    }
    let w = hann(window_len);
    let power: f64 = w.iter().map(|v| v * v).sum();
    let step = window_len - overlap_len;
    let segments = (samples.len() - window_len) / step + 1;
    let fft = FftPlanner::new().plan_fft_forward(window_len);
    const BATCH: usize = 16;
    let partial: Vec<Vec<f64>> = (0..segments.div_ceil(BATCH))
        .into_par_iter()
        .map(|batch| {
            let mut acc = vec![0.0; window_len];
            let mut buf = vec![Complex64::new(0.0, 0.0); window_len];
            for s in batch * BATCH..((batch + 1) * BATCH).min(segments) {
                let start = s * step;
                for ((b, x), wv) in buf.iter_mut().zip(&samples[start..start + window_len]).zip(&w) {
                    *b = x * wv;
                }
                fft.process(&mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b.norm_sqr();
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; window_len];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let scale = 1.0 / (power * segments as f64);
    total.iter_mut().for_each(|v| *v *= scale);
    Ok(PsdCurve::from_natural(config, &total, 1.0, Normalization::Absolute))
}

/// Power level exceeded by a fraction `clip_probability` of the samples,
/// relative to the mean power, in dB.
pub fn papr_db(samples: &[Complex64], clip_probability: f64) -> Result<f64> {
    let powers: Vec<f64> = samples.iter().map(|v| v.norm_sqr()).collect();
    papr_from_powers(powers, clip_probability)
}

pub fn papr_from_powers(mut powers: Vec<f64>, clip_probability: f64) -> Result<f64> {
    if !(clip_probability > 0.0 && clip_probability < 1.0) {
        return Err(Error::Config(format!(
            "clip probability {clip_probability} outside (0, 1)"
        )));
    }
    let count = powers.len();
    let required = (100.0 / clip_probability).ceil() as usize;
    if count < required {
        return Err(Error::InsufficientSamples {
            required,
            actual: count,
        });
    }
    let mean = powers.iter().sum::<f64>() / count as f64;
    if mean == 0.0 {
        return Err(Error::Config("stream has no power".into()));
    }
    let exceed = (clip_probability * count as f64).floor() as usize;
    let idx = count - exceed.max(1);
    let (_, threshold, _) = powers.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(to_db(*threshold / mean))
}

/// `(threshold_db, P[power/mean > threshold])` for each threshold.
pub fn papr_ccdf(samples: &[Complex64], thresholds_db: &[f64]) -> Vec<(f64, f64)> {
    let powers: Vec<f64> = samples.iter().map(|v| v.norm_sqr()).collect();
    let mean = powers.iter().sum::<f64>() / powers.len().max(1) as f64;
    let mut sorted = powers;
    sorted.sort_unstable_by(f64::total_cmp);
    thresholds_db
        .iter()
        .map(|&t| {
            let level = mean * 10f64.powf(t / 10.0);
            let below = sorted.partition_point(|&p| p <= level);
            (t, (sorted.len() - below) as f64 / sorted.len().max(1) as f64)
        })
        .collect()
}

/// One notch of a spectral mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskNotch {
    pub carrier_lo: usize,
    /// Inclusive; may be below `carrier_lo` for a notch wrapping through 0.
    pub carrier_hi: usize,
    /// Limit relative to the passband peak, negative.
    pub depth_db: f64,
}

impl MaskNotch {
    /// `[lo, hi]` in carrier units with `hi ≥ lo`.
    pub fn span(&self, n_carriers: usize) -> (f64, f64) {
        let lo = self.carrier_lo as f64;
        let mut hi = self.carrier_hi as f64;
        if self.carrier_hi < self.carrier_lo {
            hi += n_carriers as f64;
        }
        (lo, hi)
    }

    pub fn contains(&self, k: usize) -> bool {
        if self.carrier_lo <= self.carrier_hi {
            (self.carrier_lo..=self.carrier_hi).contains(&k)
        } else {
            k >= self.carrier_lo || k <= self.carrier_hi
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralMask {
    pub notches: Vec<MaskNotch>,
}

impl SpectralMask {
    pub fn validate(&self, n_carriers: usize) -> Result<()> {
        for n in &self.notches {
            if n.carrier_lo >= n_carriers || n.carrier_hi >= n_carriers {
                return Err(Error::CarrierOutOfRange {
                    index: n.carrier_lo.max(n.carrier_hi),
                    n_carriers,
                });
            }
            if !(n.depth_db < 0.0) {
                return Err(Error::Config(format!("mask depth {} dB is not negative", n.depth_db)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotchReport {
    pub notch: MaskNotch,
    pub peak_db: f64,
    /// `depth - peak`; negative when violated.
    pub margin_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub notches: Vec<NotchReport>,
    pub compliant: bool,
    /// Normalized frequencies of violating grid points.
    pub violations: Vec<f64>,
}

impl ComplianceReport {
    pub fn worst_margin_db(&self) -> f64 {
        self.notches.iter().map(|n| n.margin_db).fold(f64::INFINITY, f64::min)
    }
}

/// Compares a peak-normalized PSD with the mask over each notch's carrier span.
pub fn check_mask(psd: &PsdCurve, mask: &SpectralMask) -> ComplianceReport {
    let m = psd.values.len();
    let mut notches = Vec::new();
    let mut violations = Vec::new();
    for notch in &mask.notches {
        let (lo, hi) = notch.span(psd.n_carriers);
        let limit = 10f64.powf(notch.depth_db / 10.0);
        let mut peak = 0.0f64;
        for b in bins_in(lo, hi, psd.n_carriers, m) {
            let v = psd.at_bin(b);
            peak = peak.max(v);
            if v > limit {
                let f = if b <= m / 2 { b as f64 } else { b as f64 - m as f64 };
                violations.push(f / m as f64);
            }
        }
        let peak_db = to_db(peak);
        notches.push(NotchReport {
            notch: *notch,
            peak_db,
            margin_db: notch.depth_db - peak_db,
        });
    }
    violations.sort_by(f64::total_cmp);
    violations.dedup();
    ComplianceReport {
        compliant: violations.is_empty(),
        notches,
        violations,
    }
}

/// Circular distance from carrier `k` to the span `[lo, hi]`, and whether
/// `k` lies below it.
fn distance_to_span(k: usize, lo: usize, hi: usize, n: usize) -> (usize, bool) {
    let below = (lo + n - k) % n;
    let above = (k + n - hi) % n;
    if below <= above {
        (below, true)
    } else {
        (above, false)
    }
}

/// Nearest active carrier to the span, lower side first on ties.
fn nearest_active(active: &BTreeSet<usize>, lo: usize, hi: usize, n: usize) -> Option<usize> {
    active
        .iter()
        .map(|&k| {
            let (d, below) = distance_to_span(k, lo, hi, n);
            (d, !below, k)
        })
        .min()
        .map(|(_, _, k)| k)
}

/// Nearest active carrier on one side of the span.
fn nearest_on_side(active: &BTreeSet<usize>, lo: usize, hi: usize, n: usize, below: bool) -> Option<usize> {
    active
        .iter()
        .filter_map(|&k| {
            let (d, side) = distance_to_span(k, lo, hi, n);
            (side == below).then_some((d, k))
        })
        .min()
        .map(|(_, k)| k)
}

/// Carriers whose basic pulse alone exceeds `mask` somewhere in a notch,
/// relative to the pulse's own peak.
pub fn carriers_exceeding_mask(
    config: &OfdmConfig,
    window: &ShapingWindow,
    candidates: &[usize],
    mask: &SpectralMask,
    grid_density: usize,
) -> Result<Vec<usize>> {
    let n = config.n_carriers;
    mask.validate(n)?;
    let (points, fft) = PsdModel::planner(config, grid_density)?;
    // every basic pulse is a frequency shift of the carrier-0 pulse
    let s = pulse_power_spectrum(&basic_pulse(config, window, 0)?, fft.as_ref());
    let peak = s[0];
    let limits: Vec<(f64, f64, f64)> = mask
        .notches
        .iter()
        .map(|notch| {
            let (lo, hi) = notch.span(n);
            (lo, hi, peak * 10f64.powf(notch.depth_db / 10.0))
        })
        .collect();
    let mut out = Vec::new();
    for &k in candidates {
        config.check_carrier(k)?;
        let kf = k as f64;
        if limits
            .iter()
            .any(|&(lo, hi, limit)| bins_in(lo - kf, hi - kf, n, points).any(|b| s[b] > limit))
        {
            out.push(k);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullingResult {
    /// Carriers nulled at each notch edge.
    pub n_off: usize,
    pub nulled: Vec<usize>,
    /// Nulled carriers over the original data count, in percent.
    pub loss_percent: f64,
    pub level_db: f64,
}

/// Nulls data carriers symmetrically around the notch spans, nearest first,
/// one carrier per edge and step, until the peak-normalized maximum over
/// `measure` (carrier units) is at or below `target_db`.
pub fn nulling_baseline(
    model: &PsdModel,
    notches: &[(usize, usize)],
    measure: (f64, f64),
    target_db: f64,
) -> Result<NullingResult> {
    let mut model = model.clone();
    let n = model.config.n_carriers;
    let original = model.active().len();
    let reference = model.passband_peak();
    let level = |m: &PsdModel| to_db(m.max_in(measure.0, measure.1) / reference);
    let mut active: BTreeSet<usize> = model.active().into_iter().collect();
    let mut nulled = Vec::new();
    let mut current = level(&model);
    let mut steps = 0;
    while current > target_db {
        let before = nulled.len();
        for &(lo, hi) in notches {
            for below in [true, false] {
                if let Some(k) = nearest_on_side(&active, lo, hi, n, below) {
                    active.remove(&k);
                    model.remove(k);
                    nulled.push(k);
                }
            }
        }
        if nulled.len() == before {
            return Err(Error::Unreachable(format!(
                "in-notch level {current:.2} dB stays above {target_db:.2} dB with every carrier nulled"
            )));
        }
        steps += 1;
        current = level(&model);
    }
    Ok(NullingResult {
        n_off: steps,
        loss_percent: 100.0 * nulled.len() as f64 / original.max(1) as f64,
        nulled,
        level_db: current,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub nulled: Vec<usize>,
    pub inband_cc: usize,
    pub original_data: usize,
    pub loss_percent: f64,
    pub compliance: ComplianceReport,
}

/// Extends a design with greedy nulling until it meets `mask`, then counts
/// the data carriers lost to nulling and to inband cancellation carriers.
pub fn loss_report(
    model: &PsdModel,
    inband_cc: usize,
    original_data: usize,
    mask: &SpectralMask,
) -> Result<LossReport> {
    mask.validate(model.config.n_carriers)?;
    let mut model = model.clone();
    let n = model.config.n_carriers;
    let reference = model.passband_peak();
    let mut active: BTreeSet<usize> = model.active().into_iter().collect();
    let mut nulled = Vec::new();
    let margins = |m: &PsdModel| -> Vec<f64> {
        mask.notches
            .iter()
            .map(|notch| {
                let (lo, hi) = notch.span(n);
                notch.depth_db - to_db(m.max_in(lo, hi) / reference)
            })
            .collect()
    };
    let mut current = margins(&model);
    loop {
        let worst = current
            .iter()
            .enumerate()
            .filter(|(_, &m)| m < 0.0)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i);
        let Some(i) = worst else { break };
        let notch = &mask.notches[i];
        let k = nearest_active(&active, notch.carrier_lo, notch.carrier_hi, n).ok_or_else(|| {
            Error::Unreachable(format!(
                "mask notch {}..{} cannot be met with every carrier nulled",
                notch.carrier_lo, notch.carrier_hi
            ))
        })?;
        active.remove(&k);
        model.remove(k);
        nulled.push(k);
        current = margins(&model);
    }
    // compliance is reported against the original passband reference
    let mut curve = model.curve(Normalization::Absolute);
    curve.values.iter_mut().for_each(|v| *v /= reference);
    curve.normalization = Normalization::Peak0Db;
    curve.reference = reference;
    let compliance = check_mask(&curve, mask);
    Ok(LossReport {
        loss_percent: 100.0 * (nulled.len() + inband_cc) as f64 / original_data.max(1) as f64,
        nulled,
        inband_cc,
        original_data,
        compliance,
    })
}
