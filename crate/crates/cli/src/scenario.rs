//! Scenario files: TOML schema, defaults, validation and construction of the
//! library inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ofdm_shaper::{
    build_shaping_window, carriers_exceeding_mask, design_pulse_set, fixed_window_design, preset, BandSet, CarrierPlan,
    CarrierRange, CcPolicy, ConstraintSpec, DesignInputs, MaskNotch, OfdmConfig, PlanRules, PulseDesign, ReducedSet,
    SpectralMask, TransitionKind, TransitionParams, WindowKind, WindowedSet,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    /// Named configuration of an earlier method; fills the plan counts, the
    /// transition kind and the constraint left unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub ofdm: OfdmSection,
    #[serde(default)]
    pub plan: PlanSection,
    #[serde(default)]
    pub band: BandSection,
    #[serde(default)]
    pub transition: TransitionSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintSpec>,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskSection>,
    /// Protected carrier ranges. Taken from the mask when left out.
    #[serde(default)]
    pub notches: Vec<NotchSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmSection {
    pub n_carriers: usize,
    pub guard_len: usize,
    pub rolloff_len: usize,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_window")]
    pub window: WindowKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotchSpec {
    pub lo: usize,
    /// Inclusive; below `lo` for a range wrapping through carrier 0.
    pub hi: usize,
    /// Generalized-pulse carriers at each edge of this notch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_d: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cc_inband_per_edge: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cc_outband_per_edge: Option<usize>,
    #[serde(default = "default_n_d")]
    pub n_d: usize,
    #[serde(default)]
    pub generalized: Generalized,
    #[serde(default = "default_cc_policy")]
    pub cc_policy: CcPolicy,
    /// Index sets given directly instead of derived from the notches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<ExplicitPlan>,
}

impl Default for PlanSection {
    fn default() -> Self {
        Self {
            cc_inband_per_edge: None,
            cc_outband_per_edge: None,
            n_d: default_n_d(),
            generalized: Generalized::default(),
            cc_policy: default_cc_policy(),
            explicit: None,
        }
    }
}

/// How the data carriers with generalized pulses are picked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generalized {
    /// The `n_d` data carriers nearest each notch edge.
    #[default]
    NearestPerEdge,
    /// Data carriers whose basic pulse alone violates the mask.
    ExceedingMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitPlan {
    pub data: Vec<usize>,
    #[serde(default)]
    pub cc_inband: Vec<usize>,
    #[serde(default)]
    pub cc_outband: Vec<usize>,
    /// Data carriers with generalized pulses; each uses every cancellation carrier.
    #[serde(default)]
    pub generalized: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    /// Carrier spacings added beyond each notch edge.
    #[serde(default)]
    pub guard_fraction: f64,
}

impl Default for BandSection {
    fn default() -> Self {
        Self { guard_fraction: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<TransitionKind>,
    #[serde(default = "default_harmonic_terms")]
    pub harmonic_terms: usize,
    #[serde(default = "default_windowed_set")]
    pub windowed_set: WindowedSet,
    /// Fixed waveforms instead of optimized ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<bool>,
    /// Ramp length of the fixed waveforms, in samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub short_ramp: Option<usize>,
}

impl Default for TransitionSection {
    fn default() -> Self {
        Self {
            kind: None,
            harmonic_terms: default_harmonic_terms(),
            windowed_set: default_windowed_set(),
            fixed: None,
            short_ramp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_symbols")]
    pub symbols: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_constellation")]
    pub constellation: String,
    #[serde(default = "default_welch_len")]
    pub welch_len: usize,
    #[serde(default = "default_welch_overlap")]
    pub welch_overlap: usize,
    #[serde(default = "default_clip_probability")]
    pub clip_probability: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            symbols: default_symbols(),
            seed: 0,
            constellation: default_constellation(),
            welch_len: default_welch_len(),
            welch_overlap: default_welch_overlap(),
            clip_probability: default_clip_probability(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_grid_density")]
    pub grid_density: usize,
    /// Notch whose level `nulloff` matches.
    #[serde(default)]
    pub nulloff_notch: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            grid_density: default_grid_density(),
            nulloff_notch: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Scenario files, relative to this one. The first is the reference.
    pub scenarios: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSection {
    /// JSON file holding a list of mask notches, relative to the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notches: Vec<MaskNotch>,
}

fn default_sample_rate() -> f64 {
    100e6
}
fn default_window() -> WindowKind {
    WindowKind::RaisedCosine
}
fn default_n_d() -> usize {
    9
}
fn default_cc_policy() -> CcPolicy {
    CcPolicy::NearestEdge
}
fn default_harmonic_terms() -> usize {
    3
}
fn default_windowed_set() -> WindowedSet {
    WindowedSet::AllCancellation
}
fn default_symbols() -> usize {
    200
}
fn default_constellation() -> String {
    "qpsk".into()
}
fn default_welch_len() -> usize {
    16384
}
fn default_welch_overlap() -> usize {
    4096
}
fn default_clip_probability() -> f64 {
    1e-3
}
fn default_grid_density() -> usize {
    16
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

const DEFAULT_CC_INBAND: usize = 2;
const DEFAULT_CC_OUTBAND: usize = 1;

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("scenario parse error: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Validation(format!("cannot serialize scenario: {e}")))
    }

    /// Reads, resolves and validates a scenario file. Relative paths inside
    /// it are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        s.resolve(&base)?;
        s.validate()?;
        Ok(s)
    }

    /// Fills every default so the dump of the result loads to itself.
    pub fn resolve(&mut self, base: &Path) -> Result<(), CliError> {
        if let Some(mask) = &mut self.mask {
            if let Some(file) = mask.file.take() {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Io(format!("cannot read mask {}: {e}", path.display())))?;
                let loaded = SpectralMask::from_json(&text)
                    .map_err(|e| CliError::Validation(format!("mask {}: {e}", path.display())))?;
                mask.notches.extend(loaded.notches);
            }
        }
        if self.notches.is_empty() {
            if let Some(mask) = &self.mask {
                self.notches = mask
                    .notches
                    .iter()
                    .map(|m| NotchSpec {
                        lo: m.carrier_lo,
                        hi: m.carrier_hi,
                        n_d: None,
                    })
                    .collect();
            }
        }
        let fragment = match &self.preset {
            Some(name) => Some(preset(name).map_err(|e| CliError::Validation(e.to_string()))?),
            None => None,
        };
        let plan = &mut self.plan;
        let tr = &mut self.transition;
        plan.cc_inband_per_edge
            .get_or_insert(fragment.as_ref().map_or(DEFAULT_CC_INBAND, |f| f.cc_inband_per_edge));
        plan.cc_outband_per_edge
            .get_or_insert(fragment.as_ref().map_or(DEFAULT_CC_OUTBAND, |f| f.cc_outband_per_edge));
        tr.kind
            .get_or_insert(fragment.as_ref().map_or(TransitionKind::None, |f| f.transition));
        tr.fixed
            .get_or_insert(fragment.as_ref().is_some_and(|f| f.fixed_transitions));
        if tr.fixed == Some(true) {
            tr.short_ramp.get_or_insert(self.ofdm.rolloff_len / 4);
        }
        self.constraint
            .get_or_insert(fragment.as_ref().map_or_else(ConstraintSpec::default, |f| f.constraint));
        if let Some(cmp) = &mut self.compare {
            for p in &mut cmp.scenarios {
                if p.is_relative() {
                    let joined = base.join(&*p);
                    *p = std::path::absolute(&joined).unwrap_or(joined);
                }
            }
        }
        for n in &mut self.notches {
            n.n_d.get_or_insert(self.plan.n_d);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = |msg: String| Err(CliError::Validation(msg));
        let config = self.config()?;
        let n = config.n_carriers;
        if self.notches.is_empty() {
            return v("no notch ranges given: the protected band is empty".into());
        }
        for (i, r) in self.notches.iter().enumerate() {
            if r.lo >= n || r.hi >= n {
                return v(format!(
                    "notch {i} ({}..{}) has a carrier outside 0..{}",
                    r.lo,
                    r.hi,
                    n - 1
                ));
            }
        }
        if !(self.band.guard_fraction >= 0.0) {
            return v(format!("band guard_fraction {} is negative", self.band.guard_fraction));
        }
        if let Some(c) = &self.constraint {
            c.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        }
        if let Some(e) = &self.plan.explicit {
            let notch_ranges = self.ranges();
            let sets = [
                ("data", &e.data),
                ("cc_inband", &e.cc_inband),
                ("cc_outband", &e.cc_outband),
            ];
            let mut seen = BTreeMap::new();
            for (name, set) in sets {
                for &k in set.iter() {
                    if k >= n {
                        return v(format!("{name} carrier {k} outside 0..{}", n - 1));
                    }
                    if let Some(other) = seen.insert(k, name) {
                        return v(format!(
                            "carrier {k} is in both {other} and {name}: sets must be disjoint"
                        ));
                    }
                }
            }
            for &k in e.data.iter().chain(&e.cc_inband) {
                if notch_ranges.iter().any(|r| r.contains(k, n)) {
                    return v(format!("carrier {k} is active but lies in a notch"));
                }
            }
            for &k in &e.generalized {
                if seen.get(&k) != Some(&"data") {
                    return v(format!("generalized carrier {k} is not a data carrier"));
                }
            }
        }
        if self.simulation.constellation != "qpsk" {
            return v(format!("unsupported constellation `{}`", self.simulation.constellation));
        }
        if self.simulation.welch_overlap >= self.simulation.welch_len {
            return v("welch_overlap must be smaller than welch_len".into());
        }
        if !(self.simulation.clip_probability > 0.0 && self.simulation.clip_probability < 1.0) {
            return v(format!(
                "clip_probability {} outside (0, 1)",
                self.simulation.clip_probability
            ));
        }
        if self.analysis.grid_density == 0 {
            return v("grid_density must be positive".into());
        }
        if self.analysis.nulloff_notch >= self.notches.len() {
            return v(format!(
                "nulloff_notch {} does not name a notch",
                self.analysis.nulloff_notch
            ));
        }
        if let Some(mask) = &self.mask {
            self.spectral_mask_of(mask)
                .validate(n)
                .map_err(|e| CliError::Validation(format!("mask: {e}")))?;
        }
        if self.transition.short_ramp.is_some_and(|r| r > self.ofdm.rolloff_len) {
            return v("short_ramp exceeds the roll-off length".into());
        }
        self.plan()?;
        Ok(())
    }

    pub fn config(&self) -> Result<OfdmConfig, CliError> {
        let o = &self.ofdm;
        Ok(OfdmConfig::new(
            o.n_carriers,
            o.guard_len,
            o.rolloff_len,
            o.sample_rate_hz,
        )?)
    }

    pub fn ranges(&self) -> Vec<CarrierRange> {
        self.notches.iter().map(|r| CarrierRange::new(r.lo, r.hi)).collect()
    }

    pub fn band(&self) -> Result<BandSet, CliError> {
        if self.notches.is_empty() {
            return Err(CliError::Validation("the protected band is empty".into()));
        }
        Ok(BandSet::from_carriers(
            &self.config()?,
            &self.ranges(),
            self.band.guard_fraction,
        )?)
    }

    fn rules(&self, reduced: ReducedSet) -> PlanRules {
        PlanRules {
            notches: self.ranges(),
            cc_inband_per_edge: self.plan.cc_inband_per_edge.unwrap_or(DEFAULT_CC_INBAND),
            cc_outband_per_edge: self.plan.cc_outband_per_edge.unwrap_or(DEFAULT_CC_OUTBAND),
            reduced,
            cc_policy: self.plan.cc_policy,
        }
    }

    pub fn plan(&self) -> Result<CarrierPlan, CliError> {
        let n = self.ofdm.n_carriers;
        if let Some(e) = &self.plan.explicit {
            let all_cc: Vec<usize> = e.cc_inband.iter().chain(&e.cc_outband).copied().collect();
            let per_carrier = e.generalized.iter().map(|&k| (k, all_cc.clone())).collect();
            return Ok(CarrierPlan::from_sets(
                n,
                e.data.clone(),
                e.cc_inband.clone(),
                e.cc_outband.clone(),
                per_carrier,
            )?);
        }
        if self.plan.generalized == Generalized::ExceedingMask {
            let mask = self
                .spectral_mask()
                .ok_or_else(|| CliError::Validation("generalized = \"exceeding_mask\" needs a [mask]".into()))?;
            let skeleton = CarrierPlan::from_rules(n, &self.rules(ReducedSet::None))?;
            let config = self.config()?;
            let window = build_shaping_window(&config, self.ofdm.window)?;
            let chosen = carriers_exceeding_mask(&config, &window, &skeleton.data, &mask, self.analysis.grid_density)?;
            return Ok(CarrierPlan::from_rules(n, &self.rules(ReducedSet::Explicit(chosen)))?);
        }
        let counts: Vec<usize> = self.notches.iter().map(|r| r.n_d.unwrap_or(self.plan.n_d)).collect();
        if counts.iter().all(|&c| c == counts[0]) {
            return Ok(CarrierPlan::from_rules(
                n,
                &self.rules(ReducedSet::NearestPerEdge(counts[0])),
            )?);
        }
        // per-notch counts: pick the carriers nearest each edge on a plan
        // without generalized pulses, then rebuild with that list
        let skeleton = CarrierPlan::from_rules(n, &self.rules(ReducedSet::None))?;
        let mut chosen = BTreeSet::new();
        for edge in &skeleton.edges {
            let lo = skeleton.notches[edge.notch].lo;
            let count = self
                .notches
                .iter()
                .find(|r| CarrierRange::new(r.lo, r.hi).contains(lo, n))
                .and_then(|r| r.n_d)
                .unwrap_or(self.plan.n_d);
            chosen.extend(skeleton.data_side_of(edge).into_iter().take(count));
        }
        Ok(CarrierPlan::from_rules(
            n,
            &self.rules(ReducedSet::Explicit(chosen.into_iter().collect())),
        )?)
    }

    fn spectral_mask_of(&self, mask: &MaskSection) -> SpectralMask {
        SpectralMask {
            notches: mask.notches.clone(),
        }
    }

    pub fn spectral_mask(&self) -> Option<SpectralMask> {
        self.mask.as_ref().map(|m| self.spectral_mask_of(m))
    }

    pub fn transition_kind(&self) -> TransitionKind {
        self.transition.kind.unwrap_or(TransitionKind::None)
    }

    pub fn constraint(&self) -> ConstraintSpec {
        self.constraint.unwrap_or_default()
    }

    pub fn design_inputs(&self) -> Result<DesignInputs, CliError> {
        Ok(DesignInputs {
            config: self.config()?,
            window: self.ofdm.window,
            plan: self.plan()?,
            band: self.band()?,
            transition: TransitionParams {
                kind: self.transition_kind(),
                harmonic_terms: self.transition.harmonic_terms,
                windowed_set: self.transition.windowed_set.clone(),
            },
            constraint: self.constraint(),
        })
    }

    /// Runs the pulse designer, or builds the pulse set directly when there
    /// is nothing to optimize.
    pub fn design(&self) -> Result<PulseDesign, CliError> {
        let inputs = self.design_inputs()?;
        if self.transition.fixed == Some(true) {
            let ramp = self.transition.short_ramp.unwrap_or(self.ofdm.rolloff_len / 4);
            return Ok(fixed_window_design(inputs.config, inputs.plan, inputs.band, ramp)?);
        }
        if inputs.plan.cancellation().is_empty() && inputs.transition.kind == TransitionKind::None {
            let window = build_shaping_window(&inputs.config, inputs.window)?;
            return Ok(PulseDesign::conventional(
                inputs.config,
                window,
                inputs.plan,
                inputs.band,
            ));
        }
        Ok(design_pulse_set(&inputs)?)
    }
}
