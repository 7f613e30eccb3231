//! Minimization of the in-band energy quadratic
//! `E(γ) = c + 2 Re(b^H γ) + γ^H G γ` with `G = Π^H Φ Π`, `b = Π^H Φ p`,
//! `c = p^H Φ p`.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative Tikhonov weight added to every normal-equation system.
pub const TIKHONOV: f64 = 1e-12;

/// Box problems with more complex coefficients than this are split by ADMM
/// instead of the dense projected Newton iteration.
pub const DENSE_BOX_LIMIT: usize = 64;

/// ADMM penalty relative to the mean diagonal of `G`.
const ADMM_PENALTY: f64 = 1e-9;
const ADMM_RELAXATION: f64 = 1.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSpec {
    Unconstrained,
    /// Bounds on the real and imaginary part of each coefficient, separately
    /// for cancellation-carrier weights and transition coefficients.
    Box {
        eps_cc: f64,
        eps_t: f64,
    },
    /// `‖γ‖² ≤ eps_norm`.
    L2Ball {
        eps_norm: f64,
    },
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        ConstraintSpec::Box {
            eps_cc: 2.0,
            eps_t: 2.0,
        }
    }
}

impl ConstraintSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ConstraintSpec::Unconstrained => true,
            ConstraintSpec::Box { eps_cc, eps_t } => eps_cc > 0.0 && eps_t > 0.0,
            ConstraintSpec::L2Ball { eps_norm } => eps_norm > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("constraint bounds must be strictly positive".into()))
        }
    }
}

/// Iteration limits and tolerances for the box solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop when the projected gradient falls below `stop_tol·(1 + ‖b‖)`.
    pub stop_tol: f64,
    /// Accept a non-terminated run whose projected gradient is below
    /// `accept_tol·(1 + ‖b‖)`.
    pub accept_tol: f64,
    /// Iteration cap for the ADMM path on large bases.
    pub admm_max_iters: usize,
    /// ADMM stops once the best energy improved by less than this fraction
    /// over the last `admm_window` iterations.
    pub admm_rel_tol: f64,
    pub admm_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            stop_tol: 1e-10,
            accept_tol: 1e-8,
            admm_max_iters: 4000,
            admm_rel_tol: 1e-4,
            admm_window: 250,
        }
    }
}

/// Gram matrix `G` with its regularized factorizations, shared by every
/// carrier whose generalized pulse uses the same basis.
#[derive(Debug, Clone)]
pub struct Gram {
    gram: DMatrix<Complex64>,
    reg: f64,
    chol: Option<Cholesky<Complex64, Dyn>>,
    penalized: OnceLock<Option<(f64, Cholesky<Complex64, Dyn>)>>,
    eigen: OnceLock<SymmetricEigen<Complex64, Dyn>>,
}

impl Gram {
    pub fn new(gram: DMatrix<Complex64>) -> Result<Self> {
        let m = gram.nrows();
        if gram.ncols() != m {
            return Err(Error::LinearAlgebra("gram matrix is not square".into()));
        }
        let trace: f64 = (0..m).map(|i| gram[(i, i)].re).sum();
        if m == 0 || !(trace > 0.0) {
            return Ok(Self {
                gram,
                reg: 0.0,
                chol: None,
                penalized: OnceLock::new(),
                eigen: OnceLock::new(),
            });
        }
        let reg = TIKHONOV * trace / m as f64;
        let mut shifted = gram.clone();
        for i in 0..m {
            shifted[(i, i)] += reg;
        }
        let chol = Cholesky::new(shifted)
            .ok_or_else(|| Error::LinearAlgebra("regularized gram matrix is not positive definite".into()))?;
        Ok(Self {
            gram,
            reg,
            chol: Some(chol),
            penalized: OnceLock::new(),
            eigen: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.gram
    }

    pub fn regularization(&self) -> f64 {
        self.reg
    }

    /// `c + 2 Re(b^H γ) + γ^H G γ`, clamped at zero.
    pub fn energy(&self, offset: f64, cross: &DVector<Complex64>, gamma: &DVector<Complex64>) -> f64 {
        let quad = gamma.dotc(&(&self.gram * gamma)).re;
        (offset + 2.0 * cross.dotc(gamma).re + quad).max(0.0)
    }

    /// Wirtinger gradient `2 (G γ + b)`; its real and imaginary parts are the
    /// partial derivatives of the energy with respect to Re γ and Im γ.
    pub fn gradient(&self, cross: &DVector<Complex64>, gamma: &DVector<Complex64>) -> DVector<Complex64> {
        (&self.gram * gamma + cross) * Complex64::new(2.0, 0.0)
    }

    /// `γ = -(G + λI)^{-1} b`.
    pub fn solve_unconstrained(&self, cross: &DVector<Complex64>) -> DVector<Complex64> {
        match &self.chol {
            Some(chol) => -chol.solve(cross),
            None => DVector::zeros(self.dim()),
        }
    }

    /// Minimizes the energy subject to `|Re γ_i|, |Im γ_i| ≤ bounds[i]`.
    pub fn solve_box(
        &self,
        cross: &DVector<Complex64>,
        bounds: &[f64],
        options: &SolverOptions,
    ) -> Result<DVector<Complex64>> {
        let m = self.dim();
        if bounds.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                actual: bounds.len(),
            });
        }
        if bounds.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::Config("box bounds must be strictly positive".into()));
        }
        let free = self.solve_unconstrained(cross);
        if free
            .iter()
            .zip(bounds)
            .all(|(g, &b)| g.re.abs() <= b && g.im.abs() <= b)
        {
            return Ok(free);
        }
        if m > DENSE_BOX_LIMIT {
            return self.admm_box(cross, bounds, options);
        }
        let lifted = LiftedBox::new(self, cross, bounds);
        let start = lifted.lift(&free);
        let x = lifted.solve(&lifted.project(&start), options)?;
        Ok(lifted.unlift(&x))
    }

    /// ADMM on `γ = z`, `z` in the box. The linear step reuses one
    /// factorization of `G + ρI` for every carrier sharing this Gram. The
    /// best feasible iterate is returned.
    fn admm_box(
        &self,
        cross: &DVector<Complex64>,
        bounds: &[f64],
        options: &SolverOptions,
    ) -> Result<DVector<Complex64>> {
        let m = self.dim();
        let Some((rho, chol)) = self.penalized.get_or_init(|| {
            let trace: f64 = (0..m).map(|i| self.gram[(i, i)].re).sum();
            let (lo, hi) = self.extreme_eigenvalues();
            let rho = (lo * hi).sqrt().max(ADMM_PENALTY * trace / m as f64) + self.reg;
            let mut shifted = self.gram.clone();
            for i in 0..m {
                shifted[(i, i)] += rho;
            }
            Cholesky::new(shifted).map(|c| (rho, c))
        }) else {
            return Err(Error::LinearAlgebra(
                "penalized gram matrix is not positive definite".into(),
            ));
        };
        let clip = |v: Complex64, b: f64| Complex64::new(v.re.clamp(-b, b), v.im.clamp(-b, b));
        let rho_c = Complex64::new(*rho, 0.0);
        let mut z = DVector::<Complex64>::zeros(m);
        let mut w = DVector::<Complex64>::zeros(m);
        let mut best = z.clone();
        let mut best_e = 0.0;
        let mut mark = best_e;
        for iter in 1..=options.admm_max_iters {
            let rhs = (&z - &w) * rho_c - cross;
            let x = chol.solve(&rhs);
            for i in 0..m {
                let relaxed = x[i] * ADMM_RELAXATION + z[i] * (1.0 - ADMM_RELAXATION);
                let next = clip(relaxed + w[i], bounds[i]);
                w[i] += relaxed - next;
                z[i] = next;
            }
            if iter % 25 == 0 {
                // energy without the constant term, so it may be negative
                let e = 2.0 * cross.dotc(&z).re + z.dotc(&(&self.gram * &z)).re;
                if e < best_e {
                    best_e = e;
                    best.copy_from(&z);
                }
            }
            if iter % options.admm_window == 0 {
                if mark - best_e <= options.admm_rel_tol * best_e.abs() {
                    break;
                }
                mark = best_e;
            }
        }
        Ok(best)
    }

    /// Rough smallest and largest eigenvalues of `G`, by inverse and direct
    /// power iteration.
    fn extreme_eigenvalues(&self) -> (f64, f64) {
        let m = self.dim();
        let Some(chol) = &self.chol else {
            return (0.0, 0.0);
        };
        let start = DVector::from_fn(m, |i, _| {
            Complex64::new(1.0 + (i as f64 * 0.7).sin(), (i as f64 * 1.3).cos())
        });
        let mut v = start.normalize();
        let mut hi = 0.0;
        for _ in 0..30 {
            let w = &self.gram * &v;
            hi = v.dotc(&w).re;
            let norm = w.norm();
            if norm == 0.0 {
                break;
            }
            v = w / Complex64::new(norm, 0.0);
        }
        let mut v = start.normalize();
        let mut lo = 0.0;
        for _ in 0..30 {
            let w = chol.solve(&v);
            let inv = v.dotc(&w).re;
            lo = if inv > 0.0 {
                (1.0 / inv - self.reg).max(0.0)
            } else {
                0.0
            };
            v = w.normalize();
        }
        (lo, hi)
    }

    /// Minimizes the energy subject to `‖γ‖² ≤ radius_sq` by bisection on
    /// the multiplier of `(G + λI + μI) γ = -b`.
    pub fn solve_ball(&self, cross: &DVector<Complex64>, radius_sq: f64) -> Result<DVector<Complex64>> {
        if !(radius_sq > 0.0) {
            return Err(Error::Config("ball radius must be positive".into()));
        }
        let m = self.dim();
        if m == 0 {
            return Ok(DVector::zeros(0));
        }
        let free = self.solve_unconstrained(cross);
        if free.norm_squared() <= radius_sq {
            return Ok(free);
        }
        let eig = self.eigen.get_or_init(|| SymmetricEigen::new(self.gram.clone()));
        let coeffs = eig.eigenvectors.adjoint() * cross;
        let shifted: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0) + self.reg).collect();
        let norm_sq = |mu: f64| -> f64 {
            coeffs
                .iter()
                .zip(&shifted)
                .map(|(c, l)| c.norm_sqr() / (l + mu).powi(2))
                .sum()
        };
        let mut lo = 0.0;
        let mut hi = cross.norm() / radius_sq.sqrt() * (1.0 + 1e-9);
        if !(norm_sq(hi) <= radius_sq) {
            return Err(Error::Bracket(format!(
                "‖γ(μ)‖² = {:.3e} exceeds {:.3e} at the upper multiplier {:.3e}",
                norm_sq(hi),
                radius_sq,
                hi
            )));
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm_sq(mid) > radius_sq {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let scaled = DVector::from_iterator(m, coeffs.iter().zip(&shifted).map(|(c, l)| -c / (l + hi)));
        Ok(&eig.eigenvectors * scaled)
    }
}

/// Box problem over `x = [Re γ; Im γ]`: minimize `x^T Q x + 2 q^T x`.
struct LiftedBox {
    q_mat: DMatrix<f64>,
    q_vec: DVector<f64>,
    bounds: Vec<f64>,
    scale: f64,
}

impl LiftedBox {
    fn new(gram: &Gram, cross: &DVector<Complex64>, bounds: &[f64]) -> Self {
        let m = gram.dim();
        let g = &gram.gram;
        let mut q_mat = DMatrix::<f64>::zeros(2 * m, 2 * m);
        for r in 0..m {
            for c in 0..m {
                let v = g[(r, c)];
                q_mat[(r, c)] = v.re;
                q_mat[(r + m, c + m)] = v.re;
                q_mat[(r, c + m)] = -v.im;
                q_mat[(r + m, c)] = v.im;
            }
            q_mat[(r, r)] += gram.reg;
            q_mat[(r + m, r + m)] += gram.reg;
        }
        let q_vec = DVector::from_iterator(2 * m, cross.iter().map(|v| v.re).chain(cross.iter().map(|v| v.im)));
        let lifted_bounds = bounds.iter().chain(bounds.iter()).copied().collect();
        Self {
            q_mat,
            q_vec,
            bounds: lifted_bounds,
            scale: 1.0 + cross.norm(),
        }
    }

    fn lift(&self, gamma: &DVector<Complex64>) -> DVector<f64> {
        DVector::from_iterator(
            2 * gamma.len(),
            gamma.iter().map(|v| v.re).chain(gamma.iter().map(|v| v.im)),
        )
    }

    fn unlift(&self, x: &DVector<f64>) -> DVector<Complex64> {
        let m = x.len() / 2;
        DVector::from_fn(m, |i, _| Complex64::new(x[i], x[i + m]))
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().zip(&self.bounds).map(|(v, b)| v.clamp(-b, *b)))
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.q_mat * x + &self.q_vec) * 2.0
    }

    fn at_lower(&self, x: &DVector<f64>, i: usize) -> bool {
        x[i] <= -self.bounds[i] * (1.0 - 1e-12)
    }

    fn at_upper(&self, x: &DVector<f64>, i: usize) -> bool {
        x[i] >= self.bounds[i] * (1.0 - 1e-12)
    }

    fn projected_gradient_norm(&self, x: &DVector<f64>, g: &DVector<f64>) -> f64 {
        (0..x.len())
            .map(|i| {
                if (self.at_lower(x, i) && g[i] > 0.0) || (self.at_upper(x, i) && g[i] < 0.0) {
                    0.0
                } else {
                    g[i] * g[i]
                }
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest eigenvalue of the Hessian `2Q` by power iteration.
    fn lipschitz(&self) -> f64 {
        let n = self.q_mat.nrows();
        let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let mut lambda = 0.0;
        for _ in 0..200 {
            let w = &self.q_mat * &v;
            let norm = w.norm();
            if norm == 0.0 {
                return 1.0;
            }
            let next = 2.0 * v.dot(&w);
            v = w / norm;
            if (next - lambda).abs() <= 1e-6 * next.abs() {
                lambda = next;
                break;
            }
            lambda = next;
        }
        // power iteration approaches from below
        lambda.max(1e-300) * 1.05
    }

    /// Pins coordinates within a relative `1e-6` of a bound whose gradient
    /// points outward and solves the stationarity system for the rest.
    /// Returns `None` unless the result is feasible and no worse.
    fn polish(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let n = x.len();
        let g = self.gradient(x);
        let mut y = x.clone();
        let mut free = Vec::new();
        for i in 0..n {
            let b = self.bounds[i];
            if x[i] >= b * (1.0 - 1e-6) && g[i] <= 0.0 {
                y[i] = b;
            } else if x[i] <= -b * (1.0 - 1e-6) && g[i] >= 0.0 {
                y[i] = -b;
            } else {
                free.push(i);
            }
        }
        if !free.is_empty() {
            let h = DMatrix::from_fn(free.len(), free.len(), |r, c| self.q_mat[(free[r], free[c])]);
            let rhs = DVector::from_iterator(
                free.len(),
                free.iter().map(|&i| {
                    let fixed: f64 = (0..n)
                        .filter(|j| !free.contains(j))
                        .map(|j| self.q_mat[(i, j)] * y[j])
                        .sum();
                    -self.q_vec[i] - fixed
                }),
            );
            let sol = Cholesky::new(h)?.solve(&rhs);
            for (r, &i) in free.iter().enumerate() {
                y[i] = sol[r];
            }
        }
        let feasible = y.iter().zip(&self.bounds).all(|(v, b)| v.abs() <= *b);
        let s = &y - x;
        let change = g.dot(&s) + s.dot(&(&self.q_mat * &s));
        (feasible && change <= 0.0).then_some(y)
    }

    /// Projected Newton iteration: Newton steps on the variables away from
    /// their bounds, gradient steps on the others, and a backtracking search
    /// along the projected path.
    fn solve(&self, start: &DVector<f64>, options: &SolverOptions) -> Result<DVector<f64>> {
        let n = start.len();
        let stop = options.stop_tol * self.scale;
        let step = 1.0 / self.lipschitz();
        let mut x = start.clone();
        let mut pg = f64::INFINITY;
        let mut iterations = 0;
        while iterations < options.max_iters {
            iterations += 1;
            let g = self.gradient(&x);
            pg = self.projected_gradient_norm(&x, &g);
            if pg <= stop {
                return Ok(x);
            }
            // variables this close to a bound with the gradient pointing out
            // are held fixed for the Newton step
            let width = (0..n)
                .map(|i| (x[i] - (x[i] - g[i]).clamp(-self.bounds[i], self.bounds[i])).powi(2))
                .sum::<f64>()
                .sqrt();
            let held: Vec<bool> = (0..n)
                .map(|i| {
                    let eps = width.min(1e-3 * self.bounds[i]);
                    (x[i] <= -self.bounds[i] + eps && g[i] > 0.0) || (x[i] >= self.bounds[i] - eps && g[i] < 0.0)
                })
                .collect();
            let free: Vec<usize> = (0..n).filter(|&i| !held[i]).collect();
            let mut d = DVector::from_iterator(n, g.iter().map(|v| -v * step));
            if !free.is_empty() {
                let h = DMatrix::from_fn(free.len(), free.len(), |r, c| self.q_mat[(free[r], free[c])]);
                let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -0.5 * g[i]));
                if let Some(chol) = Cholesky::new(h) {
                    let sol = chol.solve(&rhs);
                    for (r, &i) in free.iter().enumerate() {
                        d[i] = sol[r];
                    }
                }
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = self.project(&(&x + &d * t));
                let s = &trial - &x;
                let slope = g.dot(&s);
                // change in the objective from the step itself, free of the
                // cancellation in f(trial) - f(x)
                let change = slope + s.dot(&(&self.q_mat * &s));
                if slope < 0.0 && change <= 1e-4 * slope {
                    x = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // no decrease left at rounding level
                break;
            }
        }
        pg = pg.min(self.projected_gradient_norm(&x, &self.gradient(&x)));
        if pg <= options.accept_tol * self.scale {
            return Ok(x);
        }
        if let Some(polished) = self.polish(&x) {
            let ppg = self.projected_gradient_norm(&polished, &self.gradient(&polished));
            if ppg <= options.accept_tol * self.scale {
                return Ok(polished);
            }
            pg = pg.min(ppg);
        }
        let m = x.len() / 2;
        Err(Error::NoConvergence {
            iterations,
            gradient_norm: pg,
            last_iterate: (0..m).map(|i| Complex64::new(x[i], x[i + m])).collect(),
        })
    }
}
