//! JSON scenario files, built-in presets and the machine-readable run report.
//!
//! Scenario layout:
//!
//! ```json
//! {
//!   "name": "stern-gerlach",
//!   "d1": 2, "d2": 2,
//!   "rho": [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]],
//!   "kraus": [ <d2 x d1 matrix>, ... ],
//!   "povm_a": { "effects": [ <d1 x d1 matrix>, ... ], "labels": ["up", "down"] },
//!   "povm_b": { "effects": [ ... ] },
//!   "povm_a_alt": { "effects": [ ... ] },
//!   "pure_fallback": false
//! }
//! ```
//!
//! Matrices are arrays of rows; each entry is a `[re, im]` pair. `labels`,
//! `povm_a_alt` and `pure_fallback` are optional.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::JointDistribution;
use crate::linalg::ComplexMatrix;
use crate::objects::{validate_channel, validate_povm, validate_state, DensityMatrix, KrausChannel, Povm, Scenario};
use crate::verify::{BatchReport, FrameReport, NoSignallingReport};

/// Rows of `[re, im]` pairs.
pub type MatrixRepr = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmFile {
    pub effects: Vec<MatrixRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

/// On-disk form of a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub d1: usize,
    pub d2: usize,
    pub rho: MatrixRepr,
    pub kraus: Vec<MatrixRepr>,
    pub povm_a: PovmFile,
    pub povm_b: PovmFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm_a_alt: Option<PovmFile>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pure_fallback: bool,
}

pub fn matrix_to_repr(m: &ComplexMatrix) -> MatrixRepr {
    m.to_rows()
        .into_iter()
        .map(|row| row.into_iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

/// Convert and check the shape against `(rows, cols)`.
pub fn matrix_from_repr(repr: &MatrixRepr, rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if repr.len() != rows {
        return Err(Error::dim(format!("expected {rows} rows, found {}", repr.len())));
    }
    if let Some((r, row)) = repr.iter().enumerate().find(|(_, row)| row.len() != cols) {
        return Err(Error::dim(format!("row {r} has {} entries, expected {cols}", row.len())));
    }
    let rows: Vec<Vec<Complex64>> = repr
        .iter()
        .map(|row| row.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows)
}

fn povm_from_file(file: &PovmFile, dim: usize, field: &str, prefix: &str) -> Result<Povm> {
    let effects = file
        .effects
        .iter()
        .enumerate()
        .map(|(k, e)| matrix_from_repr(e, dim, dim).map_err(|err| err.at(format!("{field}.effects[{k}]"))))
        .collect::<Result<Vec<_>>>()?;
    let povm = validate_povm(effects).map_err(|e| match e {
        Error::Located { path, source } => source.at(format!("{field}.{path}")),
        other => other.at(field),
    })?;
    match &file.labels {
        Some(labels) => povm.with_labels(labels.clone()).map_err(|e| e.at(format!("{field}.labels"))),
        None => Ok(povm.with_prefix(prefix)),
    }
}

fn povm_to_file(povm: &Povm) -> PovmFile {
    PovmFile {
        effects: povm.effects().iter().map(matrix_to_repr).collect(),
        labels: Some(povm.labels().to_vec()),
    }
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            name: s.name().to_string(),
            d1: s.dims().d1(),
            d2: s.dims().d2(),
            rho: matrix_to_repr(s.rho().matrix()),
            kraus: s.channel().kraus().iter().map(matrix_to_repr).collect(),
            povm_a: povm_to_file(s.povm_a()),
            povm_b: povm_to_file(s.povm_b()),
            povm_a_alt: s.povm_a_alt().map(povm_to_file),
            pure_fallback: s.pure_fallback(),
        }
    }

    /// Validate every field, reporting the first failure with its path.
    pub fn into_scenario(&self) -> Result<Scenario> {
        let (d1, d2) = (self.d1, self.d2);
        if d1 < 2 {
            return Err(Error::dim(format!("d1 = {d1} must be at least 2")).at("d1"));
        }
        if d2 < 2 {
            return Err(Error::dim(format!("d2 = {d2} must be at least 2")).at("d2"));
        }
        let rho = matrix_from_repr(&self.rho, d1, d1)
            .and_then(validate_state)
            .map_err(|e| e.at("rho"))?;
        let kraus = self
            .kraus
            .iter()
            .enumerate()
            .map(|(m, k)| matrix_from_repr(k, d2, d1).map_err(|e| e.at(format!("kraus[{m}]"))))
            .collect::<Result<Vec<_>>>()?;
        let channel = validate_channel(kraus, d1, d2).map_err(|e| e.at("kraus"))?;
        let povm_a = povm_from_file(&self.povm_a, d1, "povm_a", "a")?;
        let povm_b = povm_from_file(&self.povm_b, d2, "povm_b", "b")?;
        let povm_a_alt = self
            .povm_a_alt
            .as_ref()
            .map(|p| povm_from_file(p, d1, "povm_a_alt", "a'"))
            .transpose()?;
        Scenario::new(self.name.clone(), rho, channel, povm_a, povm_b, povm_a_alt, self.pure_fallback)
    }
}

/// Parse and validate a JSON scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let err = Error::Parse(inner.to_string());
        if path == "." {
            err
        } else {
            err.at(path)
        }
    })?;
    file.into_scenario()
}

/// Pretty-printed JSON. Floats use the shortest representation that parses
/// back to the same value.
pub fn serialize_scenario(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_scenario(s)).expect("scenario files always serialize")
}

pub const PRESET_NAMES: [&str; 3] = ["stern-gerlach", "depolarizing", "bell"];

fn labeled(povm: Povm, labels: [&str; 2]) -> Povm {
    povm.with_labels(labels.iter().map(|s| s.to_string()).collect())
        .expect("two labels for two effects")
}

fn x_basis() -> Povm {
    let plus = ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).expect("2x2");
    let minus = ComplexMatrix::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]).expect("2x2");
    validate_povm(vec![plus, minus]).expect("X basis is a POVM")
}

/// Built-in scenarios.
///
/// - `stern-gerlach`: maximally mixed spin, identity evolution, both devices
///   measuring along Z.
/// - `depolarizing`: the same with a completely depolarizing channel.
/// - `bell`: `stern-gerlach` with an X measurement as the alternative for A.
pub fn preset(name: &str) -> Result<Scenario> {
    let z_a = || labeled(Povm::computational_basis(2), ["Z1↑", "Z1↓"]);
    let z_b = || labeled(Povm::computational_basis(2), ["Z2↑", "Z2↓"]);
    let rho = DensityMatrix::maximally_mixed(2);
    match name {
        "stern-gerlach" => Scenario::new(name, rho, KrausChannel::identity(2), z_a(), z_b(), None, false),
        "depolarizing" => Scenario::new(
            name,
            rho,
            KrausChannel::completely_depolarizing(2),
            z_a(),
            z_b(),
            None,
            false,
        ),
        "bell" => Scenario::new(
            name,
            rho,
            KrausChannel::identity(2),
            z_a(),
            z_b(),
            Some(labeled(x_basis(), ["X1↑", "X1↓"])),
            false,
        ),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Echo of the options a run was invoked with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub tol: f64,
}

/// Machine-readable result of a CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<FrameReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub no_signalling: Option<NoSignallingReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<BatchReport>,
    pub passed: bool,
}

impl RunReport {
    pub fn new(config: RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            frames: None,
            no_signalling: None,
            batch: None,
            passed: false,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Side-by-side table of the three frames' probabilities.
pub fn render_frames_table(report: &FrameReport) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", report.scenario);
    let _ = writeln!(out, "{:<28} {:>10} {:>10} {:>10}", "outcome pair", "p_alpha", "p_beta", "p_gamma");
    let tables: [&JointDistribution; 3] = [&report.alpha, &report.beta, &report.gamma];
    for (i, la) in report.alpha.labels_a.iter().enumerate() {
        for (j, lb) in report.alpha.labels_b.iter().enumerate() {
            let pair = format!("({la}, {lb})");
            let _ = write!(out, "{pair:<28}");
            for t in tables {
                let _ = write!(out, " {:>10.6}", t.get(i, j));
            }
            let _ = writeln!(out);
        }
    }
    let _ = writeln!(out, "deviations (tol {:.2e}):", report.tol);
    for (name, d) in report.deviations() {
        let _ = writeln!(out, "  {name:<14} {d:.2e}");
    }
    let _ = writeln!(out, "verdict: {}", if report.passed { "PASS" } else { "FAIL" });
    out
}

pub fn render_no_signalling(report: &NoSignallingReport) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", report.scenario);
    let _ = writeln!(out, "{:<12} {:>12} {:>12} {:>12}", "outcome", "under A", "under A'", "Tr[b T(rho)]");
    for (j, label) in report.labels_b.iter().enumerate() {
        let _ = writeln!(
            out,
            "{label:<12} {:>12.6} {:>12.6} {:>12.6}",
            report.marginal_a[j], report.marginal_a_alt[j], report.expected[j]
        );
    }
    let _ = writeln!(out, "max deviation {:.2e} (tol {:.2e})", report.max_deviation, report.tol);
    let _ = writeln!(out, "verdict: {}", if report.passed { "PASS" } else { "FAIL" });
    out
}

pub fn render_batch(report: &BatchReport) -> String {
    use std::fmt::Write;

    let s = &report.summary;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "trials: {}  passed: {}  failed: {}  errored: {}",
        s.n_trials, s.passed, s.failed, s.errored
    );
    for (class, n) in &s.errors {
        let _ = writeln!(out, "  error {class}: {n}");
    }
    if let Some(w) = &s.worst {
        let _ = writeln!(
            out,
            "worst deviation {:.2e} at trial {} (seed {}, d1={}, d2={}, kraus={})",
            w.deviation, w.trial, w.seed, w.d1, w.d2, w.kraus
        );
    }
    let _ = writeln!(out, "worst frame deviation {:.2e}", s.worst_frame_deviation);
    let _ = writeln!(out, "worst no-signalling deviation {:.2e}", s.worst_no_signalling);
    let _ = writeln!(
        out,
        "time: total {:.3}s, mean {:.2e}s/trial, max {:.2e}s",
        report.timing.total_secs, report.timing.mean_trial_secs, report.timing.max_trial_secs
    );
    let _ = writeln!(out, "verdict: {}", if report.all_passed() { "PASS" } else { "FAIL" });
    out
}
