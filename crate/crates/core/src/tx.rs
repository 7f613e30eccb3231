//! Sample-stream synthesis.
//!
//! Three paths produce the same stream: the conventional IDFT transmitter,
//! a slow reference that sums the pulses `h_k` column by column, and the fast
//! transmitter that folds the cancellation carriers into the IDFT input and
//! adds the transition terms separately.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::config::OfdmConfig;
use crate::design::{PulseDesign, TransitionCoefficients, TransitionKind};
use crate::error::{Error, Result};
use crate::pulse::extend_into;
use crate::window::ShapingWindow;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Modulating values of one OFDM symbol, one per data carrier in ascending
/// carrier order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolFrame {
    pub values: Vec<Complex64>,
}

impl SymbolFrame {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn zeros(n_data: usize) -> Self {
        Self {
            values: vec![ZERO; n_data],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    Qpsk,
}

/// Which implementation a [`Modulator`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxPath {
    /// Basic pulses only; all generalized coefficients are ignored.
    Conventional,
    /// Column-by-column sum of `h_k`.
    Direct,
    /// IDFT-based fast transmitter.
    Fast,
}

/// `e^{j2πm/N}` for `m` in `0..N`.
struct Twiddles {
    table: Vec<Complex64>,
}

impl Twiddles {
    fn new(n: usize) -> Self {
        Self {
            table: (0..n)
                .map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64))
                .collect(),
        }
    }

    fn get(&self, k: usize, m: i64) -> Complex64 {
        let n = self.table.len() as i64;
        self.table[(k as i64 * m).rem_euclid(n) as usize]
    }
}

/// Per-reduced-carrier terms needed by the fast path.
struct FastTerms {
    /// Position of the carrier within `plan.data`.
    data_pos: usize,
    cc: Vec<(usize, Complex64)>,
    general: Vec<Complex64>,
    windowed: Vec<(usize, Complex64)>,
    harmonic_start: Vec<(usize, Complex64)>,
    harmonic_end: Vec<(usize, Complex64)>,
}

/// Streaming overlap-add modulator.
///
/// Each pushed frame finalizes `N_s` samples; [`Modulator::finish`] flushes
/// the trailing `β` samples of the last symbol.
pub struct Modulator<'a> {
    config: OfdmConfig,
    window: &'a ShapingWindow,
    data: &'a [usize],
    design: Option<&'a PulseDesign>,
    path: TxPath,
    ifft: Arc<dyn Fft<f64>>,
    ifft_beta: Option<Arc<dyn Fft<f64>>>,
    twiddles: Twiddles,
    terms: Vec<FastTerms>,
    /// Direct path: `(data position, h_k)` for every reduced-set carrier.
    pulses: Vec<(usize, Vec<Complex64>)>,
    generalized: Vec<bool>,
    tail: Vec<Complex64>,
    pending_end: Option<Vec<Complex64>>,
    symbols: usize,
}

impl<'a> Modulator<'a> {
    /// Conventional transmitter over the data carriers `data`.
    pub fn conventional(config: OfdmConfig, window: &'a ShapingWindow, data: &'a [usize]) -> Result<Self> {
        config.validate()?;
        if window.len() != config.pulse_len() {
            return Err(Error::LengthMismatch {
                expected: config.pulse_len(),
                actual: window.len(),
            });
        }
        for &k in data {
            config.check_carrier(k)?;
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            config,
            window,
            data,
            design: None,
            path: TxPath::Conventional,
            ifft: planner.plan_fft_inverse(config.n_carriers),
            ifft_beta: None,
            twiddles: Twiddles::new(config.n_carriers),
            terms: Vec::new(),
            pulses: Vec::new(),
            generalized: vec![false; data.len()],
            tail: vec![ZERO; config.rolloff_len],
            pending_end: None,
            symbols: 0,
        })
    }

    pub fn new(design: &'a PulseDesign, path: TxPath) -> Result<Self> {
        let mut m = Self::conventional(design.config, &design.window, &design.plan.data)?;
        if path == TxPath::Conventional {
            return Ok(m);
        }
        m.design = Some(design);
        m.path = path;
        let position = |k: usize| -> Result<usize> {
            design
                .plan
                .data
                .binary_search(&k)
                .map_err(|_| Error::Plan(format!("designed carrier {k} is not a data carrier")))
        };
        match path {
            TxPath::Direct => {
                m.pulses = design
                    .carriers
                    .par_iter()
                    .map(|cd| Ok((position(cd.carrier)?, design.pulse(cd.carrier)?)))
                    .collect::<Result<_>>()?;
            }
            TxPath::Fast => {
                let beta = design.config.rolloff_len;
                if design.transition == TransitionKind::Harmonic {
                    m.ifft_beta = Some(FftPlanner::new().plan_fft_inverse(beta));
                }
                for cd in &design.carriers {
                    let mut t = FastTerms {
                        data_pos: position(cd.carrier)?,
                        cc: cd.cc.iter().copied().zip(cd.alpha.iter().copied()).collect(),
                        general: Vec::new(),
                        windowed: Vec::new(),
                        harmonic_start: Vec::new(),
                        harmonic_end: Vec::new(),
                    };
                    match &cd.transition {
                        TransitionCoefficients::None => {}
                        TransitionCoefficients::General { zeta } => t.general = zeta.clone(),
                        TransitionCoefficients::Windowed { q, lambda } => {
                            t.windowed = q.iter().copied().zip(lambda.iter().copied()).collect()
                        }
                        TransitionCoefficients::Harmonic { indices, start, end } => {
                            t.harmonic_start = indices.iter().copied().zip(start.iter().copied()).collect();
                            t.harmonic_end = indices.iter().copied().zip(end.iter().copied()).collect();
                        }
                    }
                    m.terms.push(t);
                }
            }
            TxPath::Conventional => unreachable!(),
        }
        for &(pos, _) in &m.pulses {
            m.generalized[pos] = true;
        }
        Ok(m)
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols
    }

    fn check_frame(&self, frame: &SymbolFrame) -> Result<()> {
        if frame.values.len() != self.data.len() {
            return Err(Error::LengthMismatch {
                expected: self.data.len(),
                actual: frame.values.len(),
            });
        }
        Ok(())
    }

    /// Samples of one symbol (length `L`) without harmonic boundary terms.
    fn symbol(&self, frame: &SymbolFrame) -> Vec<Complex64> {
        match self.path {
            TxPath::Direct => self.symbol_direct(frame),
            _ => self.symbol_fast(frame),
        }
    }

    fn symbol_direct(&self, frame: &SymbolFrame) -> Vec<Complex64> {
        let len = self.config.pulse_len();
        let gi = self.config.guard_len as i64;
        let mut out = vec![ZERO; len];
        for (pos, (&k, &s)) in self.data.iter().zip(&frame.values).enumerate() {
            if s == ZERO || self.generalized[pos] {
                continue;
            }
            for (i, (o, &g)) in out.iter_mut().zip(&self.window.samples).enumerate() {
                *o += self.twiddles.get(k, i as i64 - gi) * (s * g);
            }
        }
        for (pos, h) in &self.pulses {
            let s = frame.values[*pos];
            if s != ZERO {
                for (o, v) in out.iter_mut().zip(h) {
                    *o += v * s;
                }
            }
        }
        out
    }

    fn symbol_fast(&self, frame: &SymbolFrame) -> Vec<Complex64> {
        let n = self.config.n_carriers;
        let len = self.config.pulse_len();
        let beta = self.config.rolloff_len;
        let mut bins = vec![ZERO; n];
        for (&k, &s) in self.data.iter().zip(&frame.values) {
            bins[k] = s;
        }
        let mut windowed_bins: Option<Vec<Complex64>> = None;
        let mut out = vec![ZERO; len];
        for t in &self.terms {
            let s = frame.values[t.data_pos];
            if s == ZERO {
                continue;
            }
            for &(c, a) in &t.cc {
                bins[c] += a * s;
            }
            if !t.general.is_empty() {
                for i in 0..beta {
                    out[i] += t.general[i] * s;
                    out[len - beta + i] += t.general[beta + i] * s;
                }
            }
            if !t.windowed.is_empty() {
                let wb = windowed_bins.get_or_insert_with(|| vec![ZERO; n]);
                for &(q, l) in &t.windowed {
                    wb[q] += l * s;
                }
            }
        }
        self.ifft.process(&mut bins);
        extend_into(&self.config, &self.window.samples, &bins, &mut out);
        if let (Some(mut wb), Some(design)) = (windowed_bins, self.design) {
            self.ifft.process(&mut wb);
            extend_into(&self.config, &design.edge_window, &wb, &mut out);
        }
        out
    }

    /// `Σ_k Ξ^{s|e}[:, k] s_k` as `β`-point IDFT inputs.
    fn harmonic_inputs(&self, frame: &SymbolFrame) -> (Vec<Complex64>, Vec<Complex64>) {
        let beta = self.config.rolloff_len;
        let mut start = vec![ZERO; beta];
        let mut end = vec![ZERO; beta];
        for t in &self.terms {
            let s = frame.values[t.data_pos];
            for &(q, c) in &t.harmonic_start {
                start[q] += c * s;
            }
            for &(q, c) in &t.harmonic_end {
                end[q] += c * s;
            }
        }
        (start, end)
    }

    /// Adds one frame and returns the `N_s` samples it finalizes.
    pub fn push(&mut self, frame: &SymbolFrame) -> Result<Vec<Complex64>> {
        self.check_frame(frame)?;
        let x = self.symbol(frame);
        Ok(self.merge(frame, x))
    }

    fn merge(&mut self, frame: &SymbolFrame, mut x: Vec<Complex64>) -> Vec<Complex64> {
        let beta = self.config.rolloff_len;
        let ns = self.config.symbol_len();
        if let Some(ifft_beta) = self.ifft_beta.clone() {
            let (mut boundary, end) = self.harmonic_inputs(frame);
            if let Some(prev_end) = self.pending_end.take() {
                for (b, e) in boundary.iter_mut().zip(prev_end) {
                    *b += e;
                }
            }
            // one β-point IDFT per symbol boundary
            ifft_beta.process(&mut boundary);
            for (o, b) in x[..beta].iter_mut().zip(boundary) {
                *o += b;
            }
            self.pending_end = Some(end);
        }
        for (o, t) in x[..beta].iter_mut().zip(&self.tail) {
            *o += t;
        }
        self.tail = x.split_off(ns);
        self.symbols += 1;
        x
    }

    /// Flushes the last `β` samples.
    pub fn finish(mut self) -> Vec<Complex64> {
        if let (Some(ifft_beta), Some(mut end)) = (self.ifft_beta.clone(), self.pending_end.take()) {
            ifft_beta.process(&mut end);
            for (t, e) in self.tail.iter_mut().zip(end) {
                *t += e;
            }
        }
        self.tail
    }

    /// Full stream for `frames`: length `count·N_s + β`.
    pub fn run(mut self, frames: &[SymbolFrame]) -> Result<Vec<Complex64>> {
        for f in frames {
            self.check_frame(f)?;
        }
        let ns = self.config.symbol_len();
        let symbols: Vec<Vec<Complex64>> = frames.par_iter().map(|f| self.symbol(f)).collect();
        let mut out = Vec::with_capacity(frames.len() * ns + self.config.rolloff_len);
        for (f, x) in frames.iter().zip(symbols) {
            let chunk = self.merge(f, x);
            out.extend(chunk);
        }
        out.extend(self.finish());
        Ok(out)
    }
}

pub fn modulate_conventional(
    config: &OfdmConfig,
    window: &ShapingWindow,
    data: &[usize],
    frames: &[SymbolFrame],
) -> Result<Vec<Complex64>> {
    Modulator::conventional(*config, window, data)?.run(frames)
}

pub fn modulate_generalized_direct(design: &PulseDesign, frames: &[SymbolFrame]) -> Result<Vec<Complex64>> {
    Modulator::new(design, TxPath::Direct)?.run(frames)
}

pub fn modulate_generalized_fast(design: &PulseDesign, frames: &[SymbolFrame]) -> Result<Vec<Complex64>> {
    Modulator::new(design, TxPath::Fast)?.run(frames)
}

/// Seeded source of random frames.
pub struct FrameSource {
    rng: ChaCha20Rng,
    constellation: Constellation,
    n_data: usize,
}

impl FrameSource {
    pub fn new(n_data: usize, constellation: Constellation, seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            constellation,
            n_data,
        }
    }

    pub fn next_frame(&mut self) -> SymbolFrame {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let values = match self.constellation {
            Constellation::Qpsk => (0..self.n_data)
                .map(|_| {
                    let bits: u8 = self.rng.random_range(0..4);
                    Complex64::new(if bits & 1 == 0 { a } else { -a }, if bits & 2 == 0 { a } else { -a })
                })
                .collect(),
        };
        SymbolFrame { values }
    }

    pub fn frames(&mut self, count: usize) -> Vec<SymbolFrame> {
        (0..count).map(|_| self.next_frame()).collect()
    }
}

/// Random stream through the fast transmitter plus the frames that made it.
pub fn generate_stream(
    design: &PulseDesign,
    n_symbols: usize,
    constellation: Constellation,
    seed: u64,
) -> Result<(Vec<Complex64>, Vec<SymbolFrame>)> {
    if n_symbols == 0 {
        return Err(Error::Config("at least one symbol is required".into()));
    }
    let frames = FrameSource::new(design.plan.data.len(), constellation, seed).frames(n_symbols);
    let stream = modulate_generalized_fast(design, &frames)?;
    Ok((stream, frames))
}

/// Conventional receiver run over a stream: for symbol `i`, drops the guard,
/// takes the N-point DFT of samples `i·N_s + N_GI ..` and reads the data bins.
///
/// Only meant for transparency checks.
pub fn demodulate(
    config: &OfdmConfig,
    data: &[usize],
    stream: &[Complex64],
    n_symbols: usize,
) -> Result<Vec<SymbolFrame>> {
    let n = config.n_carriers;
    let ns = config.symbol_len();
    let gi = config.guard_len;
    let required = (n_symbols.max(1) - 1) * ns + gi + n;
    if stream.len() < required {
        return Err(Error::InsufficientSamples {
            required,
            actual: stream.len(),
        });
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let scale = 1.0 / n as f64;
    Ok((0..n_symbols)
        .map(|i| {
            let start = i * ns + gi;
            let mut buf = stream[start..start + n].to_vec();
            fft.process(&mut buf);
            SymbolFrame {
                values: data.iter().map(|&k| buf[k] * scale).collect(),
            }
        })
        .collect())
}

/// Complex products per symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    /// `N`-point IDFT plus `2β` window products.
    pub baseline: f64,
    pub cc_term: f64,
    pub transition_term: f64,
}

impl ComplexityReport {
    pub fn total(&self) -> f64 {
        self.baseline + self.cc_term + self.transition_term
    }

    /// Increment over the baseline in percent.
    pub fn increment_percent(&self) -> f64 {
        100.0 * (self.cc_term + self.transition_term) / self.baseline
    }
}

/// Products of a radix-2 style `n`-point IDFT, `(n/2)·log2 n`.
pub fn idft_products(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        n as f64 / 2.0 * (n as f64).log2()
    }
}

pub fn complexity_report(design: &PulseDesign) -> ComplexityReport {
    let n = design.config.n_carriers;
    let beta = design.config.rolloff_len as f64;
    let baseline = idft_products(n) + 2.0 * beta;
    let nnz = |v: &[Complex64]| v.iter().filter(|c| **c != ZERO).count() as f64;
    let dh = design.carriers.len() as f64;
    let cc_term: f64 = design.carriers.iter().map(|cd| cd.cc.len() as f64).sum();
    let transition_term = if design.carriers.is_empty() {
        0.0
    } else {
        match design.transition {
            TransitionKind::None => 0.0,
            TransitionKind::General => 2.0 * beta * dh,
            TransitionKind::Windowed => design.windowed_carriers().len() as f64 * dh + idft_products(n) + 2.0 * beta,
            TransitionKind::Harmonic => {
                let (s, e) = design.harmonic_matrices();
                nnz(s.as_slice()) + nnz(e.as_slice()) + idft_products(design.config.rolloff_len)
            }
        }
    };
    ComplexityReport {
        baseline,
        cc_term,
        transition_term,
    }
}

/// Writes interleaved little-endian `f64` Re/Im pairs.
pub fn write_stream(path: &Path, stream: &[Complex64]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in stream {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stream(path: &Path) -> Result<Vec<Complex64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::LengthMismatch {
            expected: bytes.len() / 16 * 16 + 16,
            actual: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::basic_pulse;
    use crate::window::{build_shaping_window, WindowKind};

    #[test]
    fn single_carrier_frame_is_basic_pulse() {
        let c = OfdmConfig::new(16, 6, 3, 1.0).unwrap();
        let w = build_shaping_window(&c, WindowKind::RaisedCosine).unwrap();
        let data = vec![2, 5, 9];
        let mut f = SymbolFrame::zeros(3);
        f.values[1] = Complex64::new(1.0, 0.0);
        let s = modulate_conventional(&c, &w, &data, &[f]).unwrap();
        let p = basic_pulse(&c, &w, 5).unwrap();
        assert_eq!(s.len(), c.pulse_len());
        for (a, b) in s.iter().zip(&p) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_frames_give_silence() {
        let c = OfdmConfig::new(16, 6, 3, 1.0).unwrap();
        let w = build_shaping_window(&c, WindowKind::RaisedCosine).unwrap();
        let data = vec![1, 2];
        let s = modulate_conventional(&c, &w, &data, &vec![SymbolFrame::zeros(2); 4]).unwrap();
        assert_eq!(s.len(), 4 * c.symbol_len() + 3);
        assert!(s.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn frame_length_checked() {
        let c = OfdmConfig::new(16, 6, 3, 1.0).unwrap();
        let w = build_shaping_window(&c, WindowKind::RaisedCosine).unwrap();
        assert!(modulate_conventional(&c, &w, &[1, 2], &[SymbolFrame::zeros(3)]).is_err());
    }

    #[test]
    fn qpsk_alphabet_and_determinism() {
        let a = FrameSource::new(50, Constellation::Qpsk, 7).frames(3);
        let b = FrameSource::new(50, Constellation::Qpsk, 7).frames(3);
        assert_eq!(a, b);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for f in &a {
            for v in &f.values {
                assert!((v.re.abs() - h).abs() < 1e-15 && (v.im.abs() - h).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn idft_count() {
        assert_eq!(idft_products(4096), 24576.0);
        assert_eq!(idft_products(1), 0.0);
    }

    #[test]
    fn stream_file_round_trip() {
        let dir = std::env::temp_dir().join(format!("ofdm-shaper-tx-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.bin");
        let s = vec![Complex64::new(1.5, -2.0), Complex64::new(0.0, 3.25)];
        write_stream(&path, &s).unwrap();
        assert_eq!(read_stream(&path).unwrap(), s);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
