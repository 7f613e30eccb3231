//! Carrier bookkeeping: data, cancellation and null sets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::band::CarrierRange;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSide {
    /// Data carriers sit below the notch.
    Lower,
    /// Data carriers sit above the notch.
    Upper,
}

/// One boundary between a data region and a notch, with the cancellation
/// carriers placed there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEdge {
    pub notch: usize,
    pub side: EdgeSide,
    /// Boundary position in carrier units, half-way between the outermost
    /// notch carrier and its data-side neighbour, in [0, N).
    pub boundary: f64,
    pub inband: Vec<usize>,
    pub outband: Vec<usize>,
}

impl BandEdge {
    pub fn cancellation_carriers(&self) -> impl Iterator<Item = usize> + '_ {
        self.inband.iter().chain(self.outband.iter()).copied()
    }

    /// Circular distance from carrier `k` to the boundary, in carrier spacings.
    pub fn distance(&self, k: usize, n: usize) -> f64 {
        let d = (k as f64 - self.boundary).rem_euclid(n as f64);
        d.min(n as f64 - d)
    }
}

/// Which data carriers use generalized pulses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducedSet {
    None,
    All,
    /// The `n` data carriers closest to every edge.
    NearestPerEdge(usize),
    Explicit(Vec<usize>),
}

/// Which cancellation carriers enter each generalized pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CcPolicy {
    NearestEdge,
    TwoNearestEdges,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRules {
    /// Carrier ranges inside the bands to protect. Contiguous ranges merge.
    pub notches: Vec<CarrierRange>,
    pub cc_inband_per_edge: usize,
    pub cc_outband_per_edge: usize,
    pub reduced: ReducedSet,
    pub cc_policy: CcPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierPlan {
    pub n_carriers: usize,
    pub data: Vec<usize>,
    pub cc_inband: Vec<usize>,
    pub cc_outband: Vec<usize>,
    pub reduced_data: Vec<usize>,
    pub per_carrier_cc: BTreeMap<usize, Vec<usize>>,
    pub notches: Vec<CarrierRange>,
    pub edges: Vec<BandEdge>,
}

impl CarrierPlan {
    /// Plan with every carrier outside `notches` used for data and no
    /// cancellation carriers.
    pub fn conventional(n_carriers: usize, notches: &[CarrierRange]) -> Result<Self> {
        Self::from_rules(
            n_carriers,
            &PlanRules {
                notches: notches.to_vec(),
                cc_inband_per_edge: 0,
                cc_outband_per_edge: 0,
                reduced: ReducedSet::None,
                cc_policy: CcPolicy::NearestEdge,
            },
        )
    }

    pub fn from_rules(n: usize, rules: &PlanRules) -> Result<Self> {
        if n == 0 {
            return Err(Error::Plan("no carriers".into()));
        }
        let mut in_notch = vec![false; n];
        for r in &rules.notches {
            if r.lo >= n || r.hi >= n {
                return Err(Error::Plan(format!("notch {}..{} outside 0..{}", r.lo, r.hi, n - 1)));
            }
            for k in r.iter(n) {
                in_notch[k] = true;
            }
        }
        if in_notch.iter().all(|&m| m) {
            return Err(Error::Plan("notches cover every carrier".into()));
        }
        let notches = circular_runs(&in_notch);

        let mut edges = Vec::with_capacity(2 * notches.len());
        for (idx, r) in notches.iter().enumerate() {
            let width = r.width(n);
            let n_out = rules.cc_outband_per_edge.min(width);
            let lower_in: Vec<usize> = (1..=rules.cc_inband_per_edge).map(|i| (r.lo + n - i % n) % n).collect();
            let lower_out: Vec<usize> = (0..n_out).map(|i| (r.lo + i) % n).collect();
            let upper_out: Vec<usize> = (0..n_out).map(|i| (r.hi + n - i) % n).collect();
            let upper_in: Vec<usize> = (1..=rules.cc_inband_per_edge).map(|i| (r.hi + i) % n).collect();
            for &k in lower_in.iter().chain(upper_in.iter()) {
                if in_notch[k] {
                    return Err(Error::Plan(format!(
                        "inband cancellation carrier {k} of notch {}..{} falls in a notch",
                        r.lo, r.hi
                    )));
                }
            }
            let nf = n as f64;
            edges.push(BandEdge {
                notch: idx,
                side: EdgeSide::Lower,
                boundary: (r.lo as f64 - 0.5).rem_euclid(nf),
                inband: lower_in,
                outband: lower_out,
            });
            edges.push(BandEdge {
                notch: idx,
                side: EdgeSide::Upper,
                boundary: (r.hi as f64 + 0.5).rem_euclid(nf),
                inband: upper_in,
                outband: upper_out,
            });
        }

        let cc_inband: BTreeSet<usize> = edges.iter().flat_map(|e| e.inband.iter().copied()).collect();
        let cc_outband: BTreeSet<usize> = edges.iter().flat_map(|e| e.outband.iter().copied()).collect();
        let data: Vec<usize> = (0..n).filter(|&k| !in_notch[k] && !cc_inband.contains(&k)).collect();
        let is_data = {
            let mut v = vec![false; n];
            for &k in &data {
                v[k] = true;
            }
            v
        };

        // carrier -> (distance, edge) it was selected for
        let mut assigned: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        match &rules.reduced {
            ReducedSet::None => {}
            ReducedSet::All => {
                for &k in &data {
                    assigned.insert(k, nearest_edge(&edges, k, n));
                }
            }
            ReducedSet::Explicit(list) => {
                for &k in list {
                    if k >= n || !is_data[k] {
                        return Err(Error::Plan(format!("reduced-set carrier {k} is not a data carrier")));
                    }
                    assigned.insert(k, nearest_edge(&edges, k, n));
                }
            }
            ReducedSet::NearestPerEdge(count) => {
                for (e_idx, edge) in edges.iter().enumerate() {
                    let mut taken = 0;
                    let mut step = 1;
                    while taken < *count && step < n {
                        let k = match edge.side {
                            EdgeSide::Lower => (notches[edge.notch].lo + n - step % n) % n,
                            EdgeSide::Upper => (notches[edge.notch].hi + step) % n,
                        };
                        step += 1;
                        if in_notch[k] {
                            break;
                        }
                        if !is_data[k] {
                            continue;
                        }
                        taken += 1;
                        let d = edge.distance(k, n);
                        match assigned.get(&k) {
                            Some(&(d0, _)) if d0 <= d => {}
                            _ => {
                                assigned.insert(k, (d, e_idx));
                            }
                        }
                    }
                }
            }
        }

        let all_cc: Vec<usize> = cc_inband.union(&cc_outband).copied().collect();
        let mut per_carrier_cc = BTreeMap::new();
        for (&k, &(_, e_idx)) in &assigned {
            let set: BTreeSet<usize> = match rules.cc_policy {
                CcPolicy::All => all_cc.iter().copied().collect(),
                CcPolicy::NearestEdge => edges
                    .get(e_idx)
                    .map(|e| e.cancellation_carriers().collect())
                    .unwrap_or_default(),
                CcPolicy::TwoNearestEdges => {
                    let mut order: Vec<(f64, usize)> =
                        edges.iter().enumerate().map(|(i, e)| (e.distance(k, n), i)).collect();
                    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    order
                        .iter()
                        .take(2)
                        .flat_map(|&(_, i)| edges[i].cancellation_carriers())
                        .collect()
                }
            };
            per_carrier_cc.insert(k, set.into_iter().collect());
        }

        let plan = Self {
            n_carriers: n,
            data,
            cc_inband: cc_inband.into_iter().collect(),
            cc_outband: cc_outband.into_iter().collect(),
            reduced_data: assigned.keys().copied().collect(),
            per_carrier_cc,
            notches,
            edges,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan from explicit index sets; no edges are recorded.
    pub fn from_sets(
        n_carriers: usize,
        data: Vec<usize>,
        cc_inband: Vec<usize>,
        cc_outband: Vec<usize>,
        per_carrier_cc: BTreeMap<usize, Vec<usize>>,
    ) -> Result<Self> {
        let plan = Self {
            n_carriers,
            data: sorted(data),
            cc_inband: sorted(cc_inband),
            cc_outband: sorted(cc_outband),
            reduced_data: per_carrier_cc.keys().copied().collect(),
            per_carrier_cc,
            notches: Vec::new(),
            edges: Vec::new(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_carriers;
        let mut role = vec![0u8; n];
        for (set, tag) in [(&self.data, 1u8), (&self.cc_inband, 2), (&self.cc_outband, 3)] {
            for &k in set {
                if k >= n {
                    return Err(Error::Plan(format!("carrier {k} outside 0..{}", n - 1)));
                }
                if role[k] != 0 {
                    return Err(Error::Plan(format!(
                        "carrier {k} belongs to more than one of data/inband/outband"
                    )));
                }
                role[k] = tag;
            }
        }
        for (&k, ccs) in &self.per_carrier_cc {
            if k >= n || role[k] != 1 {
                return Err(Error::Plan(format!(
                    "generalized-pulse carrier {k} is not a data carrier"
                )));
            }
            if let Some(&c) = ccs.iter().find(|&&c| c >= n || role[c] < 2) {
                return Err(Error::Plan(format!(
                    "carrier {c} used for cancellation by carrier {k} is not a cancellation carrier"
                )));
            }
        }
        if self
            .reduced_data
            .iter()
            .copied()
            .ne(self.per_carrier_cc.keys().copied())
        {
            return Err(Error::Plan("reduced set and per-carrier sets disagree".into()));
        }
        Ok(())
    }

    /// All cancellation carriers, sorted.
    pub fn cancellation(&self) -> Vec<usize> {
        sorted(self.cc_inband.iter().chain(self.cc_outband.iter()).copied().collect())
    }

    /// Carriers carrying no power at all.
    pub fn null(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_carriers];
        for &k in self.data.iter().chain(&self.cc_inband).chain(&self.cc_outband) {
            used[k] = true;
        }
        (0..self.n_carriers).filter(|&k| !used[k]).collect()
    }

    /// Data carriers before any were repurposed as inband cancellation carriers.
    pub fn original_data_count(&self) -> usize {
        self.data.len() + self.cc_inband.len()
    }

    pub fn is_generalized(&self, k: usize) -> bool {
        self.per_carrier_cc.contains_key(&k)
    }

    /// Edge closest to carrier `k`, if any edges are recorded.
    pub fn nearest_edge(&self, k: usize) -> Option<&BandEdge> {
        if self.edges.is_empty() {
            None
        } else {
            Some(&self.edges[nearest_edge(&self.edges, k, self.n_carriers).1])
        }
    }

    /// Data carriers ordered by distance from `edge`, nearest first, stopping
    /// at the next notch.
    pub fn data_side_of(&self, edge: &BandEdge) -> Vec<usize> {
        let n = self.n_carriers;
        let notch = self.notches[edge.notch];
        let is_data: BTreeSet<usize> = self.data.iter().copied().collect();
        let mut out = Vec::new();
        for step in 1..n {
            let k = match edge.side {
                EdgeSide::Lower => (notch.lo + n - step) % n,
                EdgeSide::Upper => (notch.hi + step) % n,
            };
            if self.notches.iter().any(|r| r.contains(k, n)) {
                break;
            }
            if is_data.contains(&k) {
                out.push(k);
            }
        }
        out
    }
}

fn nearest_edge(edges: &[BandEdge], k: usize, n: usize) -> (f64, usize) {
    edges
        .iter()
        .enumerate()
        .map(|(i, e)| (e.distance(k, n), i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .unwrap_or((f64::INFINITY, usize::MAX))
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Maximal circular runs of `true`, starting from the lowest run start.
fn circular_runs(marks: &[bool]) -> Vec<CarrierRange> {
    let n = marks.len();
    let mut runs = Vec::new();
    for s in 0..n {
        if marks[s] && !marks[(s + n - 1) % n] {
            let mut e = s;
            while marks[(e + 1) % n] {
                e = (e + 1) % n;
            }
            runs.push(CarrierRange::new(s, e));
        }
    }
    runs
}
