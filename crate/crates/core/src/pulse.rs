//! Basic pulses and the cyclic-extension stage of the IDFT transmitter.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::config::OfdmConfig;
use crate::error::{Error, Result};
use crate::window::ShapingWindow;

/// `w_N^{k m}` for integer `m`, with the exponent reduced modulo `N` so the
/// phase stays exact for long pulses.
pub(crate) fn twiddle(n: usize, k: usize, m: i64) -> Complex64 {
    let e = (k as i64 * m).rem_euclid(n as i64);
    Complex64::from_polar(1.0, 2.0 * PI * e as f64 / n as f64)
}

/// `p_k(n) = g(n) w_N^{k (n - N_GI)}` for `n` in `0..L`.
pub fn basic_pulse(config: &OfdmConfig, window: &ShapingWindow, k: usize) -> Result<Vec<Complex64>> {
    config.check_carrier(k)?;
    check_window(config, window)?;
    let n = config.n_carriers;
    let gi = config.guard_len as i64;
    Ok(window
        .samples
        .iter()
        .enumerate()
        .map(|(i, &g)| twiddle(n, k, i as i64 - gi) * g)
        .collect())
}

/// Applies `G Δ`: output(n) = g(n) core((n - N_GI) mod N).
pub fn cyclic_extend_and_window(
    config: &OfdmConfig,
    window: &ShapingWindow,
    core: &[Complex64],
) -> Result<Vec<Complex64>> {
    check_window(config, window)?;
    if core.len() != config.n_carriers {
        return Err(Error::LengthMismatch {
            expected: config.n_carriers,
            actual: core.len(),
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); config.pulse_len()];
    extend_into(config, &window.samples, core, &mut out);
    Ok(out)
}

/// Adds `u(n) core((n - N_GI) mod N)` into `out` for every `n` in `0..L`.
pub(crate) fn extend_into(config: &OfdmConfig, weights: &[f64], core: &[Complex64], out: &mut [Complex64]) {
    let n = config.n_carriers;
    let gi = config.guard_len;
    for (i, (&w, o)) in weights.iter().zip(out.iter_mut()).enumerate() {
        if w != 0.0 {
            *o += core[(i + n - gi % n) % n] * w;
        }
    }
}

fn check_window(config: &OfdmConfig, window: &ShapingWindow) -> Result<()> {
    if window.len() != config.pulse_len() {
        return Err(Error::LengthMismatch {
            expected: config.pulse_len(),
            actual: window.len(),
        });
    }
    Ok(())
}

/// Output of a conventional receiver for one symbol: drops the guard and
/// returns the N-point DFT of samples `N_GI..N_GI+N`, scaled by `1/N`.
///
/// This is a reference check for receiver transparency, not a receiver.
pub fn receiver_bins(config: &OfdmConfig, symbol: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = config.n_carriers;
    let gi = config.guard_len;
    if symbol.len() < gi + n {
        return Err(Error::LengthMismatch {
            expected: gi + n,
            actual: symbol.len(),
        });
    }
    let mut buf = symbol[gi..gi + n].to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    Ok(buf)
}
