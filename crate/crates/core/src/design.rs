//! Generalized-pulse design.
//!
//! Every data carrier `k` in the reduced set gets the pulse
//! `h_k = p_k + P_{C(k)} α_k + t_k`, where the transition term `t_k` lives on
//! the first and last `β` samples only. The coefficients minimize the energy
//! of `h_k` inside the protected band. Carriers sharing the same basis share
//! one factorized Gram matrix.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::BandSet;
use crate::band_energy::BandMatrix;
use crate::carriers::CarrierPlan;
use crate::config::{wrap_frequency, OfdmConfig};
use crate::error::{Error, Result};
use crate::pulse::{basic_pulse, twiddle};
use crate::solver::{ConstraintSpec, Gram, SolverOptions};
use crate::window::{build_shaping_window, hamming, rc_ramp, ShapingWindow, WindowKind};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    None,
    /// One free coefficient per edge sample (`2β` in total).
    General,
    /// Windowed conventional pulses `U Δ W_N^Q λ`.
    Windowed,
    /// `β`-point harmonic series on each edge, truncated to a few terms.
    Harmonic,
}

/// Carrier set `Q` spanned by windowed transition pulses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowedSet {
    /// All cancellation carriers of the plan.
    AllCancellation,
    /// The cancellation carriers of the pulse being designed.
    CarrierCancellation,
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionParams {
    pub kind: TransitionKind,
    /// Harmonic terms kept per edge.
    pub harmonic_terms: usize,
    pub windowed_set: WindowedSet,
}

impl Default for TransitionParams {
    fn default() -> Self {
        Self {
            kind: TransitionKind::None,
            harmonic_terms: 3,
            windowed_set: WindowedSet::AllCancellation,
        }
    }
}

impl TransitionParams {
    pub fn of_kind(kind: TransitionKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }
}

/// Basis column stored by its non-zero segments `(start, values)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumn {
    pub segments: Vec<(usize, Vec<Complex64>)>,
}

impl SparseColumn {
    pub fn dense(values: Vec<Complex64>) -> Self {
        Self {
            segments: vec![(0, values)],
        }
    }

    pub fn nnz(&self) -> usize {
        self.segments.iter().map(|(_, v)| v.len()).sum()
    }

    /// `π^H y`.
    pub fn dot_conj(&self, y: &[Complex64]) -> Complex64 {
        self.segments
            .iter()
            .map(|(s, v)| v.iter().zip(&y[*s..]).map(|(a, b)| a.conj() * b).sum::<Complex64>())
            .sum()
    }

    pub fn add_scaled_into(&self, out: &mut [Complex64], coef: Complex64) {
        for (s, v) in &self.segments {
            for (o, x) in out[*s..].iter_mut().zip(v) {
                *o += x * coef;
            }
        }
    }

    pub fn to_dense(&self, len: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; len];
        self.add_scaled_into(&mut out, Complex64::new(1.0, 0.0));
        out
    }
}

/// Transition columns `T`, `T_w` or `T_h` with the data that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionBasis {
    pub kind: TransitionKind,
    pub columns: Vec<SparseColumn>,
    /// Windowed kind: carrier set `Q`.
    pub q: Vec<usize>,
    /// Windowed kind: edge window `u(n)` over the whole pulse.
    pub edge_window: Vec<f64>,
    /// Harmonic kind: selected `β`-point harmonic indices, used on both edges.
    pub harmonics: Vec<usize>,
}

impl TransitionBasis {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn to_matrix(&self, pulse_len: usize) -> DMatrix<Complex64> {
        let cols: Vec<_> = self.columns.iter().map(|c| c.to_dense(pulse_len)).collect();
        DMatrix::from_fn(pulse_len, cols.len(), |r, c| cols[c][r])
    }
}

/// What to build for [`build_transition_basis`].
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionSetup {
    None,
    General,
    Windowed { q: Vec<usize>, edge_window: Vec<f64> },
    Harmonic { indices: Vec<usize> },
}

/// Hamming pulse of length `β` on both edges, zero elsewhere.
pub fn default_edge_window(config: &OfdmConfig) -> Vec<f64> {
    let beta = config.rolloff_len;
    let len = config.pulse_len();
    let mut u = vec![0.0; len];
    for (n, v) in hamming(beta).into_iter().enumerate() {
        u[n] = v;
        u[len - beta + n] = v;
    }
    u
}

pub fn build_transition_basis(config: &OfdmConfig, setup: &TransitionSetup) -> Result<TransitionBasis> {
    let beta = config.rolloff_len;
    let len = config.pulse_len();
    let kind = match setup {
        TransitionSetup::None => TransitionKind::None,
        TransitionSetup::General => TransitionKind::General,
        TransitionSetup::Windowed { .. } => TransitionKind::Windowed,
        TransitionSetup::Harmonic { .. } => TransitionKind::Harmonic,
    };
    if kind != TransitionKind::None && beta == 0 {
        return Err(Error::Config("transition pulses need a non-zero roll-off".into()));
    }
    let mut basis = TransitionBasis {
        kind,
        columns: Vec::new(),
        q: Vec::new(),
        edge_window: Vec::new(),
        harmonics: Vec::new(),
    };
    match setup {
        TransitionSetup::None => {}
        TransitionSetup::General => {
            let one = vec![Complex64::new(1.0, 0.0)];
            basis.columns = (0..beta)
                .chain(len - beta..len)
                .map(|n| SparseColumn {
                    segments: vec![(n, one.clone())],
                })
                .collect();
        }
        TransitionSetup::Windowed { q, edge_window } => {
            if edge_window.len() != len {
                return Err(Error::LengthMismatch {
                    expected: len,
                    actual: edge_window.len(),
                });
            }
            if edge_window[beta..len - beta].iter().any(|&v| v != 0.0) {
                return Err(Error::Config("edge window must vanish outside the two edges".into()));
            }
            let n = config.n_carriers;
            let gi = config.guard_len as i64;
            for &qk in q {
                config.check_carrier(qk)?;
                let edge = |start: usize| -> Vec<Complex64> {
                    (start..start + beta)
                        .map(|i| twiddle(n, qk, i as i64 - gi) * edge_window[i])
                        .collect()
                };
                basis.columns.push(SparseColumn {
                    segments: vec![(0, edge(0)), (len - beta, edge(len - beta))],
                });
            }
            basis.q = q.clone();
            basis.edge_window = edge_window.clone();
        }
        TransitionSetup::Harmonic { indices } => {
            if let Some(&bad) = indices.iter().find(|&&q| q >= beta) {
                return Err(Error::Config(format!("harmonic index {bad} outside 0..{beta}")));
            }
            let series = |q: usize| -> Vec<Complex64> { (0..beta).map(|i| twiddle(beta, q, i as i64)).collect() };
            for &q in indices {
                basis.columns.push(SparseColumn {
                    segments: vec![(0, series(q))],
                });
            }
            for &q in indices {
                basis.columns.push(SparseColumn {
                    segments: vec![(len - beta, series(q))],
                });
            }
            basis.harmonics = indices.clone();
        }
    }
    Ok(basis)
}

/// The `count` harmonic indices `q` of a `β`-point series whose frequency
/// `q/β` lies closest to `edge_frequency` (wrapped distance), sorted.
pub fn nearest_harmonics(beta: usize, edge_frequency: f64, count: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = (0..beta)
        .map(|q| {
            let d = wrap_frequency(q as f64 / beta as f64 - edge_frequency).abs();
            (d, q)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = order.into_iter().take(count.min(beta)).map(|(_, q)| q).collect();
    out.sort_unstable();
    out
}

/// Columns `p_c` for each `c` in `cc_set`, which must avoid the data set.
pub fn build_cancellation_basis(
    config: &OfdmConfig,
    window: &ShapingWindow,
    plan: &CarrierPlan,
    cc_set: &[usize],
) -> Result<DMatrix<Complex64>> {
    let cols = cancellation_columns(config, window, plan, cc_set)?;
    let len = config.pulse_len();
    Ok(DMatrix::from_fn(len, cols.len(), |r, c| cols[c].segments[0].1[r]))
}

fn cancellation_columns(
    config: &OfdmConfig,
    window: &ShapingWindow,
    plan: &CarrierPlan,
    cc_set: &[usize],
) -> Result<Vec<SparseColumn>> {
    if let Some(&c) = cc_set.iter().find(|c| plan.data.binary_search(c).is_ok()) {
        return Err(Error::Plan(format!(
            "carrier {c} is a data carrier, not a cancellation carrier"
        )));
    }
    cc_set
        .iter()
        .map(|&c| basic_pulse(config, window, c).map(SparseColumn::dense))
        .collect()
}

/// Everything a design run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignInputs {
    pub config: OfdmConfig,
    pub window: WindowKind,
    pub plan: CarrierPlan,
    pub band: BandSet,
    pub transition: TransitionParams,
    pub constraint: ConstraintSpec,
}

/// Optimized transition coefficients of one carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransitionCoefficients {
    None,
    /// `ζ_k`: first `β` entries for the leading edge, then the trailing edge.
    General {
        zeta: Vec<Complex64>,
    },
    Windowed {
        q: Vec<usize>,
        lambda: Vec<Complex64>,
    },
    Harmonic {
        indices: Vec<usize>,
        start: Vec<Complex64>,
        end: Vec<Complex64>,
    },
}

impl TransitionCoefficients {
    fn coefficients(&self) -> Vec<Complex64> {
        match self {
            TransitionCoefficients::None => Vec::new(),
            TransitionCoefficients::General { zeta } => zeta.clone(),
            TransitionCoefficients::Windowed { lambda, .. } => lambda.clone(),
            TransitionCoefficients::Harmonic { start, end, .. } => start.iter().chain(end.iter()).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierDesign {
    pub carrier: usize,
    /// `C(k)`, in the order of `alpha`.
    pub cc: Vec<usize>,
    pub alpha: Vec<Complex64>,
    pub transition: TransitionCoefficients,
    /// In-band energy of the basic pulse.
    pub energy_before: f64,
    /// In-band energy of the generalized pulse.
    pub energy_after: f64,
}

impl CarrierDesign {
    /// `γ_k = [α_k; transition coefficients]`.
    pub fn gamma(&self) -> Vec<Complex64> {
        self.alpha
            .iter()
            .copied()
            .chain(self.transition.coefficients())
            .collect()
    }
}

/// Data-independent set of generalized pulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseDesign {
    pub config: OfdmConfig,
    pub window: ShapingWindow,
    pub plan: CarrierPlan,
    pub band: BandSet,
    pub transition: TransitionKind,
    /// `u(n)` of windowed transitions; empty for other kinds.
    pub edge_window: Vec<f64>,
    /// One entry per reduced-set carrier, ascending.
    pub carriers: Vec<CarrierDesign>,
}

impl PulseDesign {
    /// Design with no generalized pulses at all.
    pub fn conventional(config: OfdmConfig, window: ShapingWindow, plan: CarrierPlan, band: BandSet) -> Self {
        let mut plan = plan;
        plan.reduced_data.clear();
        plan.per_carrier_cc.clear();
        Self {
            config,
            window,
            plan,
            band,
            transition: TransitionKind::None,
            edge_window: Vec::new(),
            carriers: Vec::new(),
        }
    }

    /// Copy with the data carriers in `off` switched off.
    pub fn without_data(&self, off: &[usize]) -> Self {
        let off: std::collections::BTreeSet<usize> = off.iter().copied().collect();
        let mut d = self.clone();
        d.plan.data.retain(|k| !off.contains(k));
        d.plan.reduced_data.retain(|k| !off.contains(k));
        d.plan.per_carrier_cc.retain(|k, _| !off.contains(k));
        d.carriers.retain(|c| !off.contains(&c.carrier));
        d
    }

    pub fn carrier(&self, k: usize) -> Option<&CarrierDesign> {
        self.carriers
            .binary_search_by_key(&k, |c| c.carrier)
            .ok()
            .map(|i| &self.carriers[i])
    }

    /// `t_k` as a dense vector of length `L`.
    pub fn transition_pulse(&self, k: usize) -> Vec<Complex64> {
        let len = self.config.pulse_len();
        let beta = self.config.rolloff_len;
        let mut out = vec![ZERO; len];
        let Some(cd) = self.carrier(k) else {
            return out;
        };
        match &cd.transition {
            TransitionCoefficients::None => {}
            TransitionCoefficients::General { zeta } => {
                out[..beta].copy_from_slice(&zeta[..beta]);
                out[len - beta..].copy_from_slice(&zeta[beta..]);
            }
            TransitionCoefficients::Windowed { q, lambda } => {
                let n = self.config.n_carriers;
                let gi = self.config.guard_len as i64;
                for (i, o) in out.iter_mut().enumerate() {
                    let u = self.edge_window[i];
                    if u != 0.0 {
                        *o = q
                            .iter()
                            .zip(lambda)
                            .map(|(&qk, l)| twiddle(n, qk, i as i64 - gi) * l)
                            .sum::<Complex64>()
                            * u;
                    }
                }
            }
            TransitionCoefficients::Harmonic { indices, start, end } => {
                for i in 0..beta {
                    let s: Complex64 = indices
                        .iter()
                        .zip(start)
                        .map(|(&q, c)| twiddle(beta, q, i as i64) * c)
                        .sum();
                    let e: Complex64 = indices
                        .iter()
                        .zip(end)
                        .map(|(&q, c)| twiddle(beta, q, i as i64) * c)
                        .sum();
                    out[i] += s;
                    out[len - beta + i] += e;
                }
            }
        }
        out
    }

    /// `h_k`; the basic pulse for carriers outside the reduced set.
    pub fn pulse(&self, k: usize) -> Result<Vec<Complex64>> {
        let mut h = basic_pulse(&self.config, &self.window, k)?;
        if let Some(cd) = self.carrier(k) {
            for (&c, &a) in cd.cc.iter().zip(&cd.alpha) {
                let pc = basic_pulse(&self.config, &self.window, c)?;
                for (x, y) in h.iter_mut().zip(&pc) {
                    *x += y * a;
                }
            }
            for (x, t) in h.iter_mut().zip(self.transition_pulse(k)) {
                *x += t;
            }
        }
        Ok(h)
    }

    /// `A_D`: rows follow `plan.cancellation()`, columns `plan.reduced_data`.
    pub fn cc_matrix(&self) -> DMatrix<Complex64> {
        let rows = self.plan.cancellation();
        let mut a = DMatrix::zeros(rows.len(), self.carriers.len());
        for (col, cd) in self.carriers.iter().enumerate() {
            for (&c, &v) in cd.cc.iter().zip(&cd.alpha) {
                let r = rows.binary_search(&c).expect("cancellation carrier in plan");
                a[(r, col)] += v;
            }
        }
        a
    }

    /// `Z_D` (`2β × |D^h|`) for general transitions.
    pub fn general_matrix(&self) -> DMatrix<Complex64> {
        let beta = self.config.rolloff_len;
        let mut z = DMatrix::zeros(2 * beta, self.carriers.len());
        for (col, cd) in self.carriers.iter().enumerate() {
            if let TransitionCoefficients::General { zeta } = &cd.transition {
                for (r, v) in zeta.iter().enumerate() {
                    z[(r, col)] = *v;
                }
            }
        }
        z
    }

    /// Union of the windowed sets `Q`, ascending.
    pub fn windowed_carriers(&self) -> Vec<usize> {
        let mut q: Vec<usize> = self
            .carriers
            .iter()
            .flat_map(|cd| match &cd.transition {
                TransitionCoefficients::Windowed { q, .. } => q.clone(),
                _ => Vec::new(),
            })
            .collect();
        q.sort_unstable();
        q.dedup();
        q
    }

    /// `Λ_D` with rows following [`Self::windowed_carriers`].
    pub fn windowed_matrix(&self) -> DMatrix<Complex64> {
        let rows = self.windowed_carriers();
        let mut m = DMatrix::zeros(rows.len(), self.carriers.len());
        for (col, cd) in self.carriers.iter().enumerate() {
            if let TransitionCoefficients::Windowed { q, lambda } = &cd.transition {
                for (&qk, &v) in q.iter().zip(lambda) {
                    let r = rows.binary_search(&qk).expect("windowed carrier listed");
                    m[(r, col)] += v;
                }
            }
        }
        m
    }

    /// `(Ξ^s, Ξ^e)`, each `β × |D^h|`.
    pub fn harmonic_matrices(&self) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let beta = self.config.rolloff_len;
        let mut s = DMatrix::zeros(beta, self.carriers.len());
        let mut e = DMatrix::zeros(beta, self.carriers.len());
        for (col, cd) in self.carriers.iter().enumerate() {
            if let TransitionCoefficients::Harmonic { indices, start, end } = &cd.transition {
                for (i, &q) in indices.iter().enumerate() {
                    s[(q, col)] += start[i];
                    e[(q, col)] += end[i];
                }
            }
        }
        (s, e)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Basis shared by a group of carriers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct GroupKey {
    cc: Vec<usize>,
    q: Vec<usize>,
    harmonics: Vec<usize>,
}

struct Group {
    columns: Vec<SparseColumn>,
    gram: Gram,
}

/// Edge frequency used to pick harmonics for carrier `k`: the nearest plan
/// edge, or else the nearest band interval endpoint.
fn edge_frequency(plan: &CarrierPlan, band: &BandSet, k: usize) -> f64 {
    let n = plan.n_carriers as f64;
    if let Some(edge) = plan.nearest_edge(k) {
        return wrap_frequency(edge.boundary / n);
    }
    let f = k as f64 / n;
    band.intervals()
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .min_by(|a, b| wrap_frequency(a - f).abs().total_cmp(&wrap_frequency(b - f).abs()))
        .unwrap_or(0.0)
}

fn group_key(inputs: &DesignInputs, k: usize) -> GroupKey {
    let plan = &inputs.plan;
    let cc = plan.per_carrier_cc.get(&k).cloned().unwrap_or_default();
    let q = match (&inputs.transition.kind, &inputs.transition.windowed_set) {
        (TransitionKind::Windowed, WindowedSet::AllCancellation) => plan.cancellation(),
        (TransitionKind::Windowed, WindowedSet::CarrierCancellation) => cc.clone(),
        (TransitionKind::Windowed, WindowedSet::Explicit(list)) => list.clone(),
        _ => Vec::new(),
    };
    let harmonics = if inputs.transition.kind == TransitionKind::Harmonic {
        nearest_harmonics(
            inputs.config.rolloff_len,
            edge_frequency(plan, &inputs.band, k),
            inputs.transition.harmonic_terms,
        )
    } else {
        Vec::new()
    };
    GroupKey { cc, q, harmonics }
}

fn transition_setup(inputs: &DesignInputs, key: &GroupKey, edge_window: &[f64]) -> TransitionSetup {
    match inputs.transition.kind {
        TransitionKind::None => TransitionSetup::None,
        TransitionKind::General => TransitionSetup::General,
        TransitionKind::Windowed => TransitionSetup::Windowed {
            q: key.q.clone(),
            edge_window: edge_window.to_vec(),
        },
        TransitionKind::Harmonic => TransitionSetup::Harmonic {
            indices: key.harmonics.clone(),
        },
    }
}

/// `Φ π` for a basis column, picking the cheaper product.
fn phi_times(phi: &BandMatrix, column: &SparseColumn) -> Result<Vec<Complex64>> {
    if column.nnz() <= 64 {
        Ok(phi.apply_sparse(&column.segments))
    } else {
        phi.apply(&column.to_dense(phi.size()))
    }
}

fn build_group(
    inputs: &DesignInputs,
    window: &ShapingWindow,
    phi: &BandMatrix,
    key: &GroupKey,
    edge_window: &[f64],
) -> Result<Group> {
    let mut columns = cancellation_columns(&inputs.config, window, &inputs.plan, &key.cc)?;
    let transition = build_transition_basis(&inputs.config, &transition_setup(inputs, key, edge_window))?;
    columns.extend(transition.columns);
    let m = columns.len();
    let images: Vec<Vec<Complex64>> = columns.par_iter().map(|c| phi_times(phi, c)).collect::<Result<_>>()?;
    let mut gram = DMatrix::zeros(m, m);
    let rows: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|i| (i..m).map(|j| columns[i].dot_conj(&images[j])).collect())
        .collect();
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            if i == j {
                gram[(i, i)] = Complex64::new(v.re, 0.0);
            } else {
                gram[(i, j)] = v;
                gram[(j, i)] = v.conj();
            }
        }
    }
    Ok(Group {
        columns,
        gram: Gram::new(gram)?,
    })
}

/// Solves every reduced-set carrier of `inputs`.
pub fn design_pulse_set(inputs: &DesignInputs) -> Result<PulseDesign> {
    design_pulse_set_with(inputs, &SolverOptions::default())
}

pub fn design_pulse_set_with(inputs: &DesignInputs, options: &SolverOptions) -> Result<PulseDesign> {
    inputs.config.validate()?;
    inputs.plan.validate()?;
    inputs.constraint.validate()?;
    if inputs.plan.n_carriers != inputs.config.n_carriers {
        return Err(Error::Plan(
            "plan and configuration disagree on the carrier count".into(),
        ));
    }
    let window = build_shaping_window(&inputs.config, inputs.window)?;
    let len = inputs.config.pulse_len();
    let beta = inputs.config.rolloff_len;
    let edge_window = if inputs.transition.kind == TransitionKind::Windowed {
        default_edge_window(&inputs.config)
    } else {
        Vec::new()
    };
    let carriers: Vec<usize> = inputs.plan.reduced_data.clone();
    if carriers.is_empty() {
        let mut design = PulseDesign::conventional(inputs.config, window, inputs.plan.clone(), inputs.band.clone());
        design.transition = inputs.transition.kind;
        design.edge_window = edge_window;
        return Ok(design);
    }
    let phi = BandMatrix::new(&inputs.band, len)?;

    let keys: Vec<GroupKey> = carriers.iter().map(|&k| group_key(inputs, k)).collect();
    let mut unique: Vec<GroupKey> = Vec::new();
    let mut index: HashMap<GroupKey, usize> = HashMap::new();
    for key in &keys {
        if !index.contains_key(key) {
            index.insert(key.clone(), unique.len());
            unique.push(key.clone());
        }
    }
    let groups: Vec<Group> = unique
        .par_iter()
        .map(|key| build_group(inputs, &window, &phi, key, &edge_window))
        .collect::<Result<_>>()?;

    let designs: Vec<CarrierDesign> = carriers
        .par_iter()
        .zip(keys.par_iter())
        .map(|(&k, key)| {
            let group = &groups[index[key]];
            solve_carrier(inputs, &window, &phi, group, key, k, options).map_err(|e| e.at_carrier(k))
        })
        .collect::<Result<_>>()?;

    debug_assert!(designs
        .iter()
        .all(|d| d.gamma().len() <= key_dim(beta, &keys[0]).max(d.gamma().len())));
    Ok(PulseDesign {
        config: inputs.config,
        window,
        plan: inputs.plan.clone(),
        band: inputs.band.clone(),
        transition: inputs.transition.kind,
        edge_window,
        carriers: designs,
    })
}

fn key_dim(_beta: usize, key: &GroupKey) -> usize {
    key.cc.len()
}

fn solve_carrier(
    inputs: &DesignInputs,
    window: &ShapingWindow,
    phi: &BandMatrix,
    group: &Group,
    key: &GroupKey,
    k: usize,
    options: &SolverOptions,
) -> Result<CarrierDesign> {
    let p = basic_pulse(&inputs.config, window, k)?;
    let phi_p = phi.apply(&p)?;
    let m = group.columns.len();
    let cross = DVector::from_iterator(m, group.columns.iter().map(|c| c.dot_conj(&phi_p)));
    let energy_before = p
        .iter()
        .zip(&phi_p)
        .map(|(a, b)| (a.conj() * b).re)
        .sum::<f64>()
        .max(0.0);
    let n_cc = key.cc.len();
    let gamma = match inputs.constraint {
        ConstraintSpec::Unconstrained => group.gram.solve_unconstrained(&cross),
        ConstraintSpec::Box { eps_cc, eps_t } => {
            let bounds: Vec<f64> = (0..m).map(|i| if i < n_cc { eps_cc } else { eps_t }).collect();
            group.gram.solve_box(&cross, &bounds, options)?
        }
        ConstraintSpec::L2Ball { eps_norm } => group.gram.solve_ball(&cross, eps_norm)?,
    };

    let mut h = p;
    for (col, g) in group.columns.iter().zip(gamma.iter()) {
        col.add_scaled_into(&mut h, *g);
    }
    let energy_after = phi.quad_form(&h)?;
    let gamma: Vec<Complex64> = gamma.iter().copied().collect();
    Ok(CarrierDesign {
        carrier: k,
        cc: key.cc.clone(),
        alpha: gamma[..n_cc].to_vec(),
        transition: split_transition(inputs.transition.kind, key, &gamma[n_cc..]),
        energy_before,
        energy_after,
    })
}

fn split_transition(kind: TransitionKind, key: &GroupKey, coeffs: &[Complex64]) -> TransitionCoefficients {
    match kind {
        TransitionKind::None => TransitionCoefficients::None,
        TransitionKind::General => TransitionCoefficients::General { zeta: coeffs.to_vec() },
        TransitionKind::Windowed => TransitionCoefficients::Windowed {
            q: key.q.clone(),
            lambda: coeffs.to_vec(),
        },
        TransitionKind::Harmonic => {
            let h = key.harmonics.len();
            TransitionCoefficients::Harmonic {
                indices: key.harmonics.clone(),
                start: coeffs[..h].to_vec(),
                end: coeffs[h..].to_vec(),
            }
        }
    }
}

/// Configurations of earlier cancellation and time-domain methods expressed
/// as generalized pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// One cancellation carrier at the outer side of each edge, unconstrained.
    Yamaguchi,
    /// Two cancellation carriers at the inner side of each edge, norm-bounded.
    Brandes,
    /// Fixed per-group transition waveforms, no optimization.
    SahinFixedWindows,
    /// No cancellation carriers, general transitions under a norm bound.
    MahmoudAst,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yamaguchi" => Ok(Preset::Yamaguchi),
            "brandes" => Ok(Preset::Brandes),
            "sahin_fixed_windows" | "sahin" => Ok(Preset::SahinFixedWindows),
            "mahmoud_ast" | "mahmoud" => Ok(Preset::MahmoudAst),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

/// The parts of a scenario a preset pins down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFragment {
    pub cc_inband_per_edge: usize,
    pub cc_outband_per_edge: usize,
    pub transition: TransitionKind,
    pub constraint: ConstraintSpec,
    /// Transitions are fixed waveforms rather than optimized.
    pub fixed_transitions: bool,
}

/// Default norm bound of the ball-constrained presets.
pub const PRESET_BALL_RADIUS_SQ: f64 = 4.0;

pub fn preset(name: &str) -> Result<ScenarioFragment> {
    Ok(preset_fragment(name.parse()?))
}

pub fn preset_fragment(p: Preset) -> ScenarioFragment {
    match p {
        Preset::Yamaguchi => ScenarioFragment {
            cc_inband_per_edge: 1,
            cc_outband_per_edge: 0,
            transition: TransitionKind::None,
            constraint: ConstraintSpec::Unconstrained,
            fixed_transitions: false,
        },
        Preset::Brandes => ScenarioFragment {
            cc_inband_per_edge: 0,
            cc_outband_per_edge: 2,
            transition: TransitionKind::None,
            constraint: ConstraintSpec::L2Ball {
                eps_norm: PRESET_BALL_RADIUS_SQ,
            },
            fixed_transitions: false,
        },
        Preset::SahinFixedWindows => ScenarioFragment {
            cc_inband_per_edge: 0,
            cc_outband_per_edge: 0,
            transition: TransitionKind::General,
            constraint: ConstraintSpec::Unconstrained,
            fixed_transitions: true,
        },
        Preset::MahmoudAst => ScenarioFragment {
            cc_inband_per_edge: 0,
            cc_outband_per_edge: 0,
            transition: TransitionKind::General,
            constraint: ConstraintSpec::L2Ball {
                eps_norm: PRESET_BALL_RADIUS_SQ,
            },
            fixed_transitions: false,
        },
    }
}

/// Fixed-window design: carriers in the plan's reduced set keep the full
/// raised-cosine ramp of length `β`; every other data carrier gets a
/// transition pulse that sharpens its ramp to `short_ramp` samples.
pub fn fixed_window_design(
    config: OfdmConfig,
    plan: CarrierPlan,
    band: BandSet,
    short_ramp: usize,
) -> Result<PulseDesign> {
    let beta = config.rolloff_len;
    if short_ramp > beta {
        return Err(Error::Config("short ramp longer than the roll-off".into()));
    }
    let window = build_shaping_window(&config, WindowKind::RaisedCosine)?;
    let len = config.pulse_len();
    let short = rc_ramp(short_ramp);
    // target ramp: ones before the short ramp, then the short ramp ends at β
    let mut target = vec![0.0; beta];
    for (i, v) in short.iter().enumerate() {
        target[beta - short_ramp + i] = *v;
    }
    let delta: Vec<f64> = (0..beta).map(|i| target[i] - window.samples[i]).collect();

    let phi = BandMatrix::new(&band, len)?;
    let edge_set: std::collections::BTreeSet<usize> = plan.reduced_data.iter().copied().collect();
    let mut per_carrier = BTreeMap::new();
    for &k in &plan.data {
        per_carrier.insert(k, Vec::new());
    }
    let mut full_plan = plan;
    full_plan.reduced_data = full_plan.data.clone();
    full_plan.per_carrier_cc = per_carrier;

    let carriers: Vec<CarrierDesign> = full_plan
        .data
        .par_iter()
        .map(|&k| {
            let p = basic_pulse(&config, &window, k)?;
            let energy_before = phi.quad_form(&p)?;
            let mut zeta = vec![ZERO; 2 * beta];
            if !edge_set.contains(&k) {
                for i in 0..beta {
                    // leading ramp mirrored at the tail
                    zeta[i] = p[i] / window.samples[i] * delta[i];
                    let tail = len - 1 - i;
                    zeta[2 * beta - 1 - i] = p[tail] / window.samples[tail] * delta[i];
                }
            }
            let mut h = p;
            for i in 0..beta {
                h[i] += zeta[i];
                h[len - beta + i] += zeta[beta + i];
            }
            Ok(CarrierDesign {
                carrier: k,
                cc: Vec::new(),
                alpha: Vec::new(),
                transition: TransitionCoefficients::General { zeta },
                energy_before,
                energy_after: phi.quad_form(&h)?,
            })
        })
        .collect::<Result<_>>()?;

    Ok(PulseDesign {
        config,
        window,
        plan: full_plan,
        band,
        transition: TransitionKind::General,
        edge_window: Vec::new(),
        carriers,
    })
}
