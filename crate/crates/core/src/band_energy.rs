//! In-band energy of finite pulses.
//!
//! For a pulse `x` of length `L` with spectrum `X(f) = Σ x(n) e^{-j2πfn}`,
//! the energy inside a band `B` is the Hermitian Toeplitz quadratic form
//! `x^H Φ x` with `Φ(m, n) = φ(m - n)` and `φ(d) = ∫_B e^{j2πfd} df`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::band::BandSet;
use crate::error::{Error, Result};

/// `φ(lag) = ∫_B e^{j2πf·lag} df`, summed over the band's intervals.
pub fn phi_entry(band: &BandSet, lag: i64) -> Complex64 {
    if lag == 0 {
        return Complex64::new(band.measure(), 0.0);
    }
    let m = lag as f64;
    band.intervals()
        .iter()
        .map(|&(a, b)| {
            let amp = (PI * (b - a) * m).sin() / (PI * m);
            Complex64::from_polar(amp, PI * (a + b) * m)
        })
        .sum()
}

/// Toeplitz band matrix `Φ_B` of size `L × L`, stored by its generator.
#[derive(Clone)]
pub struct BandMatrix {
    /// φ(0), φ(1), …, φ(L-1); negative lags are conjugates.
    lags: Vec<Complex64>,
    measure: f64,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for BandMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BandMatrix")
            .field("size", &self.size())
            .field("measure", &self.measure)
            .finish()
    }
}

impl BandMatrix {
    pub fn new(band: &BandSet, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Band("band matrix needs at least one row".into()));
        }
        let measure = band.measure();
        if !(measure > 0.0) {
            return Err(Error::Band("band has zero measure".into()));
        }
        let lags: Vec<Complex64> = (0..size as i64).map(|d| phi_entry(band, d)).collect();

        // circulant embedding of size 2L
        let m = 2 * size;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
        spectrum[..size].copy_from_slice(&lags);
        for d in 1..size {
            spectrum[m - d] = lags[d].conj();
        }
        forward.process(&mut spectrum);
        let scale = 1.0 / m as f64;
        spectrum.iter_mut().for_each(|v| *v *= scale);

        Ok(Self {
            lags,
            measure,
            spectrum,
            forward,
            inverse,
        })
    }

    pub fn size(&self) -> usize {
        self.lags.len()
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Generator row: `φ(0..L)`.
    pub fn first_row(&self) -> Vec<Complex64> {
        self.lags.iter().map(|v| v.conj()).collect()
    }

    /// `φ(d)` for any `|d| < L`.
    pub fn lag(&self, d: i64) -> Complex64 {
        if d >= 0 {
            self.lags[d as usize]
        } else {
            self.lags[(-d) as usize].conj()
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.lag(row as i64 - col as i64)
    }

    /// `Φ x` through the circulant embedding.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let l = self.size();
        if x.len() != l {
            return Err(Error::LengthMismatch {
                expected: l,
                actual: x.len(),
            });
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * l];
        buf[..l].copy_from_slice(x);
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        buf.truncate(l);
        Ok(buf)
    }

    /// `Φ x` for `x` supported on a few segments `(start, values)`; cost is
    /// proportional to the support size times `L`.
    pub fn apply_sparse(&self, segments: &[(usize, Vec<Complex64>)]) -> Vec<Complex64> {
        let l = self.size();
        let mut out = vec![Complex64::new(0.0, 0.0); l];
        for (start, values) in segments {
            for (t, v) in values.iter().enumerate() {
                if *v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let col = (start + t) as i64;
                for (row, o) in out.iter_mut().enumerate() {
                    *o += self.lag(row as i64 - col) * v;
                }
            }
        }
        out
    }

    /// `x^H Φ x`, real by construction; tiny negative rounding is clamped.
    pub fn quad_form(&self, x: &[Complex64]) -> Result<f64> {
        let y = self.apply(x)?;
        let v: f64 = x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum();
        Ok(v.max(0.0))
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let l = self.size();
        DMatrix::from_fn(l, l, |r, c| self.entry(r, c))
    }
}

/// `E_B = p^H Φ_B p`.
pub fn band_energy(pulse: &[Complex64], phi: &BandMatrix) -> Result<f64> {
    phi.quad_form(pulse)
}

/// Power in the band, `(1/N_s) Σ σ_k² E_{k,B}`, from `(σ_k², pulse)` pairs.
pub fn band_power<'a>(
    symbol_len: usize,
    carriers: impl IntoIterator<Item = (f64, &'a [Complex64])>,
    phi: &BandMatrix,
) -> Result<f64> {
    let mut total = 0.0;
    for (variance, pulse) in carriers {
        if variance != 0.0 {
            total += variance * band_energy(pulse, phi)?;
        }
    }
    Ok(total / symbol_len as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(lo: f64, hi: f64) -> BandSet {
        BandSet::new([(lo, hi)]).unwrap()
    }

    #[test]
    fn full_band_is_identity() {
        let phi = BandMatrix::new(&BandSet::full(), 64).unwrap();
        for d in 1..64 {
            assert!(phi.lag(d).norm() < 1e-14, "lag {d}: {}", phi.lag(d));
        }
        assert_eq!(phi.lag(0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn conjugate_symmetric_in_lag() {
        let b = BandSet::new([(0.05, 0.17), (-0.4, -0.3)]).unwrap();
        for m in 1..40 {
            assert!((phi_entry(&b, -m) - phi_entry(&b, m).conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn fft_product_matches_dense() {
        let b = BandSet::new([(0.11, 0.23), (0.3, 0.31)]).unwrap();
        let phi = BandMatrix::new(&b, 37).unwrap();
        let x: Vec<Complex64> = (0..37)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let dense = phi.to_dense();
        let y = phi.apply(&x).unwrap();
        for r in 0..37 {
            let expect: Complex64 = (0..37).map(|c| dense[(r, c)] * x[c]).sum();
            assert!((y[r] - expect).norm() < 1e-13);
        }
        let sparse = phi.apply_sparse(&[(0, x.clone())]);
        for r in 0..37 {
            assert!((sparse[r] - y[r]).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_pulse_has_no_energy() {
        let phi = BandMatrix::new(&band(0.0, 0.25), 16).unwrap();
        assert_eq!(band_energy(&[Complex64::new(0.0, 0.0); 16], &phi).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let phi = BandMatrix::new(&band(0.0, 0.25), 16).unwrap();
        assert!(band_energy(&[Complex64::new(1.0, 0.0); 15], &phi).is_err());
    }

    #[test]
    fn empty_size_rejected() {
        assert!(BandMatrix::new(&band(0.0, 0.25), 0).is_err());
    }

    #[test]
    fn band_power_of_silent_carriers() {
        let phi = BandMatrix::new(&BandSet::full(), 8).unwrap();
        let p = vec![Complex64::new(1.0, 0.0); 8];
        assert_eq!(band_power(6, [(0.0, p.as_slice())], &phi).unwrap(), 0.0);
        let v = band_power(6, [(1.0, p.as_slice())], &phi).unwrap();
        assert!((v - 8.0 / 6.0).abs() < 1e-12);
    }
}
