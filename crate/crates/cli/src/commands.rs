//! Subcommands and their artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ofdm_shaper::spectrum::to_db;
use ofdm_shaper::{
    build_shaping_window, check_mask, complexity_report, generate_stream, loss_report, nulling_baseline, papr_ccdf,
    papr_db, welch_psd, CarrierPlan, ComplexityReport, ComplianceReport, Constellation, LossReport, Normalization,
    NullingResult, PsdCurve, PsdModel, PulseDesign, SpectralMask,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::plot::{svg, Series};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Design,
    Psd,
    Simulate,
    Papr,
    Comply,
    Compare,
    Nulloff,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub scenario: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid_density: Option<usize>,
    pub plot: bool,
}

/// Files written by one command; removed again if the command fails.
struct Artifacts {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    summary: String,
}

/// What a successful command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Human-readable result lines, empty for commands with nothing to report.
    pub summary: String,
}

impl Artifacts {
    fn open(dir: &Path) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
            summary: String::new(),
        })
    }

    fn claim(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        path
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.claim(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, text + "\n")
    }

    fn discard(self) {
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

/// Loads the scenario, applies the command-line overrides and runs `command`.
pub fn run(command: Command, options: &RunOptions) -> Result<Outcome, CliError> {
    let mut scenario = Scenario::load(&options.scenario)?;
    if let Some(seed) = options.seed {
        scenario.simulation.seed = seed;
    }
    if let Some(d) = options.grid_density {
        scenario.analysis.grid_density = d;
    }
    if let Some(out) = &options.out {
        scenario.output.dir = out.clone();
    }
    scenario.validate()?;

    let mut artifacts = Artifacts::open(&scenario.output.dir)?;
    match execute(command, &scenario, options.plot, &mut artifacts) {
        Ok(()) => Ok(Outcome {
            files: artifacts.files,
            summary: artifacts.summary,
        }),
        Err(e) => {
            artifacts.discard();
            Err(e)
        }
    }
}

fn execute(command: Command, s: &Scenario, plot: bool, out: &mut Artifacts) -> Result<(), CliError> {
    let resolved = s.to_toml()?;
    out.write("resolved.toml", &resolved)?;
    match command {
        Command::Design => {
            let design = s.design()?;
            out.write("design.json", design.to_json()?)?;
            out.write("energies.csv", energy_table(&design))?;
            let _ = writeln!(out.summary, "designed {} generalized pulses", design.carriers.len());
        }
        Command::Psd => {
            let design = s.design()?;
            let curve = PsdModel::from_design(&design, s.analysis.grid_density)?.curve(Normalization::Peak0Db);
            out.write("psd.csv", curve.to_csv())?;
            out.write("notches.csv", notch_table(s, &curve))?;
            if plot {
                out.write("psd.svg", psd_svg(&s.name, &[("analytic", &curve)]))?;
            }
        }
        Command::Simulate => {
            let design = s.design()?;
            let (stream, _) = generate_stream(&design, s.simulation.symbols, Constellation::Qpsk, s.simulation.seed)?;
            let path = out.claim("stream.bin");
            ofdm_shaper::tx::write_stream(&path, &stream)?;
            out.write_json("stream.json", &StreamSidecar::new(s, stream.len())?)?;
            let welch = welch_psd(
                &design.config,
                &stream,
                s.simulation.welch_len,
                s.simulation.welch_overlap,
            )?
            .normalized_to_carriers(&design.plan.data);
            out.write("welch.csv", welch.to_csv())?;
            if plot {
                out.write("welch.svg", psd_svg(&s.name, &[("welch", &welch)]))?;
            }
        }
        Command::Papr => {
            let design = s.design()?;
            let (stream, _) = generate_stream(&design, s.simulation.symbols, Constellation::Qpsk, s.simulation.seed)?;
            let p = s.simulation.clip_probability;
            let value = papr_db(&stream, p)?;
            let thresholds: Vec<f64> = (0..=300).map(|i| i as f64 * 0.05).collect();
            let mut csv = String::from("threshold_db,probability\n");
            for (t, prob) in papr_ccdf(&stream, &thresholds) {
                let _ = writeln!(csv, "{t:.2},{prob:.9e}");
            }
            out.write("ccdf.csv", csv)?;
            out.write_json(
                "papr.json",
                &PaprSummary {
                    clip_probability: p,
                    papr_db: value,
                    samples: stream.len(),
                },
            )?;
            let _ = writeln!(out.summary, "PAPR at {p:e} clipping: {value:.3} dB");
        }
        Command::Comply => {
            let mask = require_mask(s)?;
            let design = s.design()?;
            let (compliance, loss) = comply(&design, &mask, s.analysis.grid_density)?;
            out.write_json("compliance.json", &compliance)?;
            out.write_json("loss.json", &loss)?;
            let _ = writeln!(
                out.summary,
                "compliant: {}, worst margin {:.2} dB, data carrier loss {:.2}%",
                compliance.compliant,
                compliance.worst_margin_db(),
                loss.loss_percent
            );
        }
        Command::Compare => {
            let mask = require_mask(s)?;
            let list = s
                .compare
                .as_ref()
                .filter(|c| !c.scenarios.is_empty())
                .ok_or_else(|| CliError::Validation("compare needs a [compare] scenarios list".into()))?;
            let mut columns = Vec::new();
            for path in &list.scenarios {
                let sub = Scenario::load(path)?;
                columns.push(evaluate(&sub, &mask, s)?);
            }
            let table = CompareTable::new(columns);
            out.write("compare.csv", table.to_csv())?;
            out.write_json("compare.json", &table)?;
            out.summary.push_str(&table.to_text());
        }
        Command::Nulloff => {
            let design = s.design()?;
            let result = nulloff(s, &design)?;
            out.write_json("nulloff.json", &result)?;
            let _ = writeln!(out.summary, "N_off = {}", result.nulling.n_off);
        }
    }
    Ok(())
}

fn require_mask(s: &Scenario) -> Result<SpectralMask, CliError> {
    s.spectral_mask()
        .filter(|m| !m.notches.is_empty())
        .ok_or_else(|| CliError::Validation("this command needs a [mask]".into()))
}

fn energy_table(design: &PulseDesign) -> String {
    let mut csv = String::from("carrier,energy_before,energy_after,reduction_db\n");
    for cd in &design.carriers {
        let _ = writeln!(
            csv,
            "{},{:.9e},{:.9e},{:.4}",
            cd.carrier,
            cd.energy_before,
            cd.energy_after,
            to_db(cd.energy_before / cd.energy_after)
        );
    }
    csv
}

/// Carrier-unit span of a possibly wrapping range, with `hi ≥ lo`.
fn span(lo: usize, hi: usize, n: usize) -> (f64, f64) {
    let h = if hi < lo { hi + n } else { hi };
    (lo as f64, h as f64)
}

fn notch_table(s: &Scenario, curve: &PsdCurve) -> String {
    let mut csv = String::from("notch_lo,notch_hi,max_db\n");
    for r in &s.notches {
        let (lo, hi) = span(r.lo, r.hi, s.ofdm.n_carriers);
        let _ = writeln!(csv, "{},{},{:.4}", r.lo, r.hi, to_db(curve.max_in(lo, hi)));
    }
    csv
}

fn psd_svg(title: &str, curves: &[(&str, &PsdCurve)]) -> String {
    let series: Vec<Series> = curves
        .iter()
        .map(|(label, c)| Series {
            label,
            points: c
                .frequencies()
                .iter()
                .zip(c.db())
                .map(|(f, v)| (f * c.sample_rate_hz, v))
                .collect(),
        })
        .collect();
    svg(title, "frequency (Hz)", "PSD (dB)", &series, -100.0)
}

#[derive(Debug, Serialize)]
struct StreamSidecar {
    format: &'static str,
    samples: usize,
    symbols: usize,
    seed: u64,
    sample_rate_hz: f64,
    scenario_sha256: String,
}

impl StreamSidecar {
    /// The hash covers the resolved scenario minus its output directory.
    fn new(s: &Scenario, samples: usize) -> Result<Self, CliError> {
        let mut hashed = s.clone();
        hashed.output.dir = PathBuf::new();
        Ok(Self {
            format: "interleaved little-endian f64 re, im",
            samples,
            symbols: s.simulation.symbols,
            seed: s.simulation.seed,
            sample_rate_hz: s.ofdm.sample_rate_hz,
            scenario_sha256: format!("{:x}", Sha256::digest(hashed.to_toml()?.as_bytes())),
        })
    }
}

#[derive(Debug, Serialize)]
struct PaprSummary {
    clip_probability: f64,
    papr_db: f64,
    samples: usize,
}

/// Mask check of the design's PSD, plus the carrier loss needed to comply.
pub fn comply(
    design: &PulseDesign,
    mask: &SpectralMask,
    grid_density: usize,
) -> Result<(ComplianceReport, LossReport), CliError> {
    let model = PsdModel::from_design(design, grid_density)?;
    let compliance = check_mask(&model.curve(Normalization::Peak0Db), mask);
    let loss = loss_report(
        &model,
        design.plan.cc_inband.len(),
        design.plan.original_data_count(),
        mask,
    )?;
    Ok((compliance, loss))
}

#[derive(Debug, Clone, Serialize)]
pub struct NulloffReport {
    pub notch: (usize, usize),
    /// Design level over the notch, relative to the passband peak.
    pub design_level_db: f64,
    pub conventional_level_db: f64,
    pub nulling: NullingResult,
}

/// Carriers a conventionally windowed transmitter must null around the
/// selected notch to reach the design's level there.
pub fn nulloff(s: &Scenario, design: &PulseDesign) -> Result<NulloffReport, CliError> {
    let n = s.ofdm.n_carriers;
    let density = s.analysis.grid_density;
    let r = &s.notches[s.analysis.nulloff_notch];
    let (lo, hi) = span(r.lo, r.hi, n);
    let model = PsdModel::from_design(design, density)?;
    let design_level_db = to_db(model.max_in(lo, hi) / model.passband_peak());
    let conventional = CarrierPlan::conventional(n, &s.ranges())?;
    let window = build_shaping_window(&design.config, s.ofdm.window)?;
    let rc = PsdModel::conventional(&design.config, &window, &conventional.data, density)?;
    let conventional_level_db = to_db(rc.max_in(lo, hi) / rc.passband_peak());
    let nulling = nulling_baseline(&rc, &[(r.lo, r.hi)], (lo, hi), design_level_db)?;
    Ok(NulloffReport {
        notch: (r.lo, r.hi),
        design_level_db,
        conventional_level_db,
        nulling,
    })
}

/// One column of the comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub name: String,
    pub loss_percent: f64,
    pub nulled: usize,
    pub inband_cc: usize,
    pub complexity: ComplexityReport,
    pub papr_db: f64,
    pub samples: usize,
}

/// Loss under `mask`, then complexity and PAPR of the compliant transmitter,
/// with the nulled carriers switched off. Simulation and analysis settings
/// come from `settings`, so all columns share them.
pub fn evaluate(s: &Scenario, mask: &SpectralMask, settings: &Scenario) -> Result<Evaluation, CliError> {
    let design = s.design()?;
    let (_, loss) = comply(&design, mask, settings.analysis.grid_density)?;
    let design = design.without_data(&loss.nulled);
    let sim = &settings.simulation;
    let (stream, _) = generate_stream(&design, sim.symbols, Constellation::Qpsk, sim.seed)?;
    Ok(Evaluation {
        name: s.name.clone(),
        loss_percent: loss.loss_percent,
        nulled: loss.nulled.len(),
        inband_cc: loss.inband_cc,
        complexity: complexity_report(&design),
        papr_db: papr_db(&stream, sim.clip_probability)?,
        samples: stream.len(),
    })
}

/// Side-by-side comparison; increments are relative to the first column.
#[derive(Debug, Clone, Serialize)]
pub struct CompareTable {
    pub columns: Vec<Evaluation>,
    pub products_increment_percent: Vec<f64>,
    pub papr_increment_db: Vec<f64>,
}

impl CompareTable {
    pub fn new(columns: Vec<Evaluation>) -> Self {
        let ref_total = columns[0].complexity.total();
        let ref_papr = columns[0].papr_db;
        let products_increment_percent = columns
            .iter()
            .map(|c| 100.0 * (c.complexity.total() - ref_total) / ref_total)
            .collect();
        let papr_increment_db = columns.iter().map(|c| c.papr_db - ref_papr).collect();
        Self {
            columns,
            products_increment_percent,
            papr_increment_db,
        }
    }

    fn rows(&self) -> [(&'static str, Vec<f64>); 3] {
        [
            (
                "data_carrier_loss_percent",
                self.columns.iter().map(|c| c.loss_percent).collect(),
            ),
            (
                "products_per_symbol_increment_percent",
                self.products_increment_percent.clone(),
            ),
            ("papr_increment_db", self.papr_increment_db.clone()),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut csv = String::from("metric");
        for c in &self.columns {
            let _ = write!(csv, ",{}", c.name);
        }
        csv.push('\n');
        for (label, values) in self.rows() {
            csv.push_str(label);
            for v in values {
                let _ = write!(csv, ",{v:.4}");
            }
            csv.push('\n');
        }
        csv
    }

    pub fn to_text(&self) -> String {
        let mut text = format!("{:<40}", "");
        for c in &self.columns {
            let _ = write!(text, "{:>14}", c.name);
        }
        text.push('\n');
        for (label, values) in self.rows() {
            let _ = write!(text, "{label:<40}");
            for v in values {
                let _ = write!(text, "{v:>14.2}");
            }
            text.push('\n');
        }
        text
    }
}
