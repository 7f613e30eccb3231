#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ofdm_shaper::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Toy system with one notch and a scaled-down 2+1 cancellation plan.
pub struct Toy {
    pub config: OfdmConfig,
    pub notch: CarrierRange,
    pub band: BandSet,
}

impl Toy {
    pub fn new(n: usize, guard: usize, beta: usize, notch: (usize, usize)) -> Self {
        let config = OfdmConfig::new(n, guard, beta, 1.0).unwrap();
        let notch = CarrierRange::new(notch.0, notch.1);
        let band = BandSet::from_carriers(&config, &[notch], 0.0).unwrap();
        Self { config, notch, band }
    }

    pub fn plan(&self, inband: usize, outband: usize, per_edge: usize) -> CarrierPlan {
        CarrierPlan::from_rules(
            self.config.n_carriers,
            &PlanRules {
                notches: vec![self.notch],
                cc_inband_per_edge: inband,
                cc_outband_per_edge: outband,
                reduced: ReducedSet::NearestPerEdge(per_edge),
                cc_policy: CcPolicy::NearestEdge,
            },
        )
        .unwrap()
    }

    pub fn inputs(&self, plan: CarrierPlan, kind: TransitionKind, constraint: ConstraintSpec) -> DesignInputs {
        DesignInputs {
            config: self.config,
            window: WindowKind::RaisedCosine,
            plan,
            band: self.band.clone(),
            transition: TransitionParams::of_kind(kind),
            constraint,
        }
    }
}

pub const ALL_KINDS: [TransitionKind; 4] = [
    TransitionKind::None,
    TransitionKind::General,
    TransitionKind::Windowed,
    TransitionKind::Harmonic,
];

/// `∫_B |X(f)|² df` by a midpoint sum on `points` nodes per interval.
pub fn band_energy_by_sum(x: &[Complex64], band: &BandSet, points: usize) -> f64 {
    let mut total = 0.0;
    for &(a, b) in band.intervals() {
        let h = (b - a) / points as f64;
        for i in 0..points {
            let f = a + (i as f64 + 0.5) * h;
            let s: Complex64 = x
                .iter()
                .enumerate()
                .map(|(n, v)| v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * n as f64))
                .sum();
            total += s.norm_sqr() * h;
        }
    }
    total
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Adaptive Simpson quadrature of a real integrand.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rule(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = rule(fa, flm, fm, m - a);
        let right = rule(fm, frm, fb, b - m);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    step(f, a, b, fa, fm, fb, rule(fa, fm, fb, b - a), tol, 40)
}

pub fn phi_by_quadrature(band: &BandSet, lag: i64) -> Complex64 {
    let w = 2.0 * std::f64::consts::PI * lag as f64;
    band.intervals()
        .iter()
        .map(|&(a, b)| {
            let re = simpson(&|f| (w * f).cos(), a, b, 1e-14);
            let im = simpson(&|f| (w * f).sin(), a, b, 1e-14);
            Complex64::new(re, im)
        })
        .sum()
}

pub fn random_band(rng: &mut ChaCha8Rng) -> BandSet {
    let count = rng.random_range(1..=3);
    let mut edges: Vec<f64> = (0..2 * count).map(|_| rng.random_range(-0.5..0.5)).collect();
    edges.sort_by(f64::total_cmp);
    BandSet::new(edges.chunks(2).map(|c| (c[0], c[1]))).unwrap()
}

/// `E(γ) = c + 2 Re(b^H γ) + γ^H G γ` assembled from sampled spectra.
pub struct Quadratic {
    pub g: Vec<Vec<Complex64>>,
    pub b: Vec<Complex64>,
    pub c: f64,
}

impl Quadratic {
    pub fn from_pulses(p: &[Complex64], cols: &[Vec<Complex64>], band: &BandSet) -> Self {
        let w = 2.0 * std::f64::consts::PI;
        let dtft = |x: &[Complex64], f: f64| -> Complex64 {
            x.iter()
                .enumerate()
                .map(|(n, v)| v * Complex64::from_polar(1.0, -w * f * n as f64))
                .sum()
        };
        let m = cols.len();
        let mut g = vec![vec![Complex64::new(0.0, 0.0); m]; m];
        let mut b = vec![Complex64::new(0.0, 0.0); m];
        let mut c = 0.0;
        for &(lo, hi) in band.intervals() {
            let points = 4000;
            let h = (hi - lo) / points as f64;
            for i in 0..points {
                let f = lo + (i as f64 + 0.5) * h;
                let pf = dtft(p, f);
                let cf: Vec<Complex64> = cols.iter().map(|col| dtft(col, f)).collect();
                c += pf.norm_sqr() * h;
                for r in 0..m {
                    b[r] += cf[r].conj() * pf * h;
                    for s in 0..m {
                        g[r][s] += cf[r].conj() * cf[s] * h;
                    }
                }
            }
        }
        Self { g, b, c }
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        let m = self.b.len();
        let gamma: Vec<Complex64> = (0..m).map(|i| Complex64::new(x[2 * i], x[2 * i + 1])).collect();
        let mut e = self.c;
        for r in 0..m {
            e += 2.0 * (self.b[r].conj() * gamma[r]).re;
            for s in 0..m {
                e += (gamma[r].conj() * self.g[r][s] * gamma[s]).re;
            }
        }
        e
    }
}

/// Coarse-to-fine grid search over a box of real coordinates; every level
/// scans `points` values per axis around the incumbent and shrinks the span.
pub fn grid_search(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], points: usize, levels: usize) -> (Vec<f64>, f64) {
    let dim = lo.len();
    let mut center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let mut best = (center.clone(), f(&center));
    let total = points.pow(dim as u32);
    let mut x = vec![0.0; dim];
    for _ in 0..levels {
        for idx in 0..total {
            let mut rest = idx;
            for d in 0..dim {
                let t = (rest % points) as f64 / (points - 1) as f64;
                rest /= points;
                x[d] = (center[d] - half[d] + 2.0 * half[d] * t).clamp(lo[d], hi[d]);
            }
            let v = f(&x);
            if v < best.1 {
                best = (x.clone(), v);
            }
        }
        center.clone_from(&best.0);
        half.iter_mut().for_each(|h| *h *= 0.6);
    }
    best
}

pub fn carrier_problem(toy: &Toy, design: &PulseDesign, k: usize) -> Quadratic {
    let cd = design.carrier(k).unwrap();
    let p = basic_pulse(&toy.config, &design.window, k).unwrap();
    let cols: Vec<Vec<Complex64>> = cd
        .cc
        .iter()
        .map(|&c| basic_pulse(&toy.config, &design.window, c).unwrap())
        .collect();
    Quadratic::from_pulses(&p, &cols, &toy.band)
}

/// Gram, cross term and offset of carrier `k` against the columns of `cc`.
pub fn problem(toy: &Toy, k: usize, cc: &[usize]) -> (Gram, DVector<Complex64>, f64) {
    let window = build_shaping_window(&toy.config, WindowKind::RaisedCosine).unwrap();
    let len = toy.config.pulse_len();
    let phi = BandMatrix::new(&toy.band, len).unwrap().to_dense();
    let p = DVector::from_vec(basic_pulse(&toy.config, &window, k).unwrap());
    let cols: Vec<Vec<Complex64>> = cc
        .iter()
        .map(|&c| basic_pulse(&toy.config, &window, c).unwrap())
        .collect();
    let pi = DMatrix::from_fn(len, cc.len(), |r, c| cols[c][r]);
    let g = pi.adjoint() * &phi * &pi;
    let b = pi.adjoint() * &phi * &p;
    let c = p.dotc(&(&phi * &p)).re;
    (Gram::new(g).unwrap(), b, c)
}
