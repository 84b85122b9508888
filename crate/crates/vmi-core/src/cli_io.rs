//! Run configuration (strict TOML schema), named presets, scan evaluation,
//! and deterministic CSV/JSON output.
//!
//! # Configuration schema
//!
//! Unknown keys anywhere are errors, and validation reports *every*
//! violation found, not just the first. Keys marked with a default may be
//! omitted; everything else is required.
//!
//! ```toml
//! version = "1"                  # schema version, default "1"
//!
//! [scenario]                     # whole block optional
//! speed_of_light = 1.0           # default 1
//! quad_rel_tol   = 1e-6          # default 1e-6
//!
//! [[molecule]]                   # one block per molecule, at least one
//! tag      = "a"                 # unique label
//! energies = [0.0, 1.0]          # level energies, unique ground level
//! position = [0.0, 0.0, 0.0]
//!
//!   [[molecule.dephasing]]       # one block per damped level pair
//!   levels = [0, 1]
//!   rate   = 0.05
//!
//!   [[molecule.dipole]]          # one block per transition dipole
//!   levels = [0, 1]
//!   mu_re  = [0.0, 0.0, 1.0]
//!   mu_im  = [0.0, 0.0, 0.0]     # default zero
//!
//! [[pulse]]                      # one block per drive pulse (1 to 3)
//! amplitude_re = 1.0
//! amplitude_im = 0.0             # default 0
//! center_time  = 0.0
//! sigma        = 8.0
//! carrier      = 1.0
//! direction    = [1.0, 0.0, 0.0] # normalized internally, |k| = carrier/c
//! polarization = [0.0, 0.0, 1.0] # must be transverse to direction
//!
//! [detection]                    # exactly one detection pulse; same keys
//! amplitude_re = 1.0
//! center_time  = 0.0
//! sigma        = 8.0
//! carrier      = 1.0
//! direction    = [1.0, 0.0, 0.0]
//! polarization = [0.0, 0.0, 1.0]
//!
//! [run]                          # whole block optional
//! order     = 1                  # default: number of [[pulse]] blocks
//! domain    = "freq"             # "freq" | "time", default "freq"
//! vmi       = true               # include pair corrections, default true
//! breakdown = false              # emit per-term columns, default false
//! rwa       = false              # drop detection-incompatible branches
//! output    = "out.csv"          # optional; default prints to stdout
//!
//!   [run.scan]                   # optional scan over one axis
//!   axis  = "omega_s"            # omega_s | omega_1 | delay | separation
//!   start = 0.6
//!   stop  = 1.4
//!   steps = 33                   # number of grid points, >= 1
//! ```
//!
//! # Scan axes
//!
//! * `omega_s` — detection carrier frequency (wavevector rescaled with it).
//! * `omega_1` — carrier frequency of the first drive pulse.
//! * `delay` — time added to the detection pulse arrival and, when there
//!   are two or more drive pulses, to the last drive pulse as well.
//! * `separation` — distance between the first two molecules; the second
//!   molecule is moved along the line joining their configured positions.
//!
//! # Output
//!
//! Grids are written as CSV with every float printed to 17 significant
//! digits, rows in axis order, so reruns are byte-identical. When a file
//! path is given, a `<path>.meta.json` sidecar records the SHA-256 digest
//! of the canonical configuration and the software version. The
//! `VMI_OUTPUT_DIR` environment variable redirects relative output paths.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::core_model::{self, build_superop_space, MolecularModel};
use crate::diagrams::{self, Classification, Target, VertexKind};
use crate::fields::Pulse;
use crate::geometry::cubic_lattice;
use crate::response;
use crate::signals::{baseline_signal, vmi_signal, Domain, Scenario};
use crate::{Complex64, Result, VmiError};

/// Default relative quadrature tolerance written into configurations.
pub const DEFAULT_QUAD_REL_TOL: f64 = 1e-6;

/// The scan axes accepted by `[run.scan]`.
pub const SCAN_AXES: [&str; 4] = ["omega_s", "omega_1", "delay", "separation"];

/// Names of the built-in example configurations.
pub const PRESET_NAMES: [&str; 6] = [
    "dimer_linear",
    "ladder_s2",
    "cascade_s3",
    "scramble_demo",
    "lattice_pm",
    "scaling",
];

// ---------------------------------------------------------------------------
// Configuration data model
// ---------------------------------------------------------------------------

/// Global scenario parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Propagation speed appearing in |k| = carrier/c and in retardation.
    pub speed_of_light: f64,
    /// Relative tolerance for all adaptive quadratures.
    pub quad_rel_tol: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            speed_of_light: 1.0,
            quad_rel_tol: DEFAULT_QUAD_REL_TOL,
        }
    }
}

/// One damped level pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingConfig {
    /// The (lower, upper) level indices.
    pub levels: [usize; 2],
    /// Dephasing rate of the corresponding coherence.
    pub rate: f64,
}

/// One transition dipole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleConfig {
    /// The (lower, upper) level indices.
    pub levels: [usize; 2],
    /// Real part of the dipole vector ⟨lower|μ|upper⟩.
    pub mu_re: [f64; 3],
    /// Imaginary part of the dipole vector.
    pub mu_im: [f64; 3],
}

/// One molecule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeConfig {
    /// Unique label used in output and error messages.
    pub tag: String,
    /// Level energies (ħ = 1); the ground level must be unique.
    pub energies: Vec<f64>,
    /// Position in space.
    pub position: [f64; 3],
    /// Damped level pairs.
    pub dephasing: Vec<DephasingConfig>,
    /// Transition dipoles.
    pub dipole: Vec<DipoleConfig>,
}

/// One Gaussian pulse (drive or detection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    /// Real part of the complex amplitude.
    pub amplitude_re: f64,
    /// Imaginary part of the complex amplitude.
    pub amplitude_im: f64,
    /// Envelope peak arrival time.
    pub center_time: f64,
    /// Gaussian duration σ > 0.
    pub sigma: f64,
    /// Carrier frequency Ω > 0.
    pub carrier: f64,
    /// Propagation direction (any nonzero vector; normalized internally).
    pub direction: [f64; 3],
    /// Polarization (nonzero, transverse to the direction).
    pub polarization: [f64; 3],
}

impl PulseConfig {
    /// Build the validated pulse for a given propagation speed.
    pub fn build(&self, speed_of_light: f64) -> Result<Pulse> {
        Pulse::new(
            Complex64::new(self.amplitude_re, self.amplitude_im),
            self.center_time,
            self.sigma,
            self.carrier,
            self.direction,
            self.polarization,
            speed_of_light,
        )
    }
}

/// One-axis scan grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// One of [`SCAN_AXES`].
    pub axis: String,
    /// First grid value.
    pub start: f64,
    /// Last grid value (equal to `start` when `steps` is 1).
    pub stop: f64,
    /// Number of grid points, at least 1.
    pub steps: usize,
}

impl ScanConfig {
    /// The evenly spaced grid values, `steps` of them from start to stop.
    pub fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.start + h * i as f64).collect()
    }
}

/// Execution options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunBlock {
    /// Interaction order, 1–3; must equal the number of drive pulses.
    pub order: usize,
    /// `"freq"` or `"time"`.
    pub domain: String,
    /// Include the vacuum-mediated pair corrections.
    pub vmi: bool,
    /// Emit one CSV column per pair-correction term.
    pub breakdown: bool,
    /// Keep only drive branches whose deposited frequency can reach the
    /// detection carrier (rotating-wave diagnostic).
    pub rwa: bool,
    /// Output CSV path; stdout when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Optional scan grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Schema version tag.
    pub version: String,
    /// Global parameters.
    pub scenario: ScenarioConfig,
    /// The molecules.
    pub molecule: Vec<MoleculeConfig>,
    /// The drive pulses, chronological by convention.
    pub pulse: Vec<PulseConfig>,
    /// The single detection pulse.
    pub detection: PulseConfig,
    /// Execution options.
    pub run: RunBlock,
}

impl RunConfig {
    /// The signal domain selected by the run block.
    pub fn domain(&self) -> Domain {
        if self.run.domain == "time" {
            Domain::Time
        } else {
            Domain::Freq
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing: strict schema walk collecting every violation
// ---------------------------------------------------------------------------

struct Walk {
    violations: Vec<String>,
}

impl Walk {
    fn push(&mut self, msg: String) {
        self.violations.push(msg);
    }

    /// Check a value is a table and flag unknown keys.
    fn table<'a>(
        &mut self,
        value: &'a toml::Value,
        path: &str,
        allowed: &[&str],
    ) -> Option<&'a toml::Table> {
        match value.as_table() {
            Some(t) => {
                for key in t.keys() {
                    if !allowed.contains(&key.as_str()) {
                        self.push(format!("{path}: unknown key `{key}`"));
                    }
                }
                Some(t)
            }
            None => {
                self.push(format!("{path}: expected a table"));
                None
            }
        }
    }

    fn required<'a>(
        &mut self,
        table: &'a toml::Table,
        path: &str,
        key: &str,
    ) -> Option<&'a toml::Value> {
        let v = table.get(key);
        if v.is_none() {
            self.push(format!("{path}: missing required key `{key}`"));
        }
        v
    }

    fn float(&mut self, value: &toml::Value, path: &str) -> Option<f64> {
        match value {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => {
                self.push(format!("{path}: expected a number"));
                None
            }
        }
    }

    fn index(&mut self, value: &toml::Value, path: &str) -> Option<usize> {
        match value {
            toml::Value::Integer(i) if *i >= 0 => Some(*i as usize),
            _ => {
                self.push(format!("{path}: expected a non-negative integer"));
                None
            }
        }
    }

    fn string(&mut self, value: &toml::Value, path: &str) -> Option<String> {
        match value.as_str() {
            Some(s) => Some(s.to_string()),
            None => {
                self.push(format!("{path}: expected a string"));
                None
            }
        }
    }

    fn boolean(&mut self, value: &toml::Value, path: &str) -> Option<bool> {
        match value.as_bool() {
            Some(b) => Some(b),
            None => {
                self.push(format!("{path}: expected a boolean"));
                None
            }
        }
    }

    fn floats(&mut self, value: &toml::Value, path: &str) -> Option<Vec<f64>> {
        let arr = match value.as_array() {
            Some(a) => a,
            None => {
                self.push(format!("{path}: expected an array of numbers"));
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for (i, v) in arr.iter().enumerate() {
            out.push(self.float(v, &format!("{path}[{i}]"))?);
        }
        Some(out)
    }

    fn vec3(&mut self, value: &toml::Value, path: &str) -> Option<[f64; 3]> {
        let v = self.floats(value, path)?;
        if v.len() != 3 {
            self.push(format!(
                "{path}: expected exactly 3 components, found {}",
                v.len()
            ));
            return None;
        }
        Some([v[0], v[1], v[2]])
    }

    fn level_pair(&mut self, value: &toml::Value, path: &str) -> Option<[usize; 2]> {
        let arr = match value.as_array() {
            Some(a) => a,
            None => {
                self.push(format!("{path}: expected an array of two level indices"));
                return None;
            }
        };
        if arr.len() != 2 {
            self.push(format!(
                "{path}: expected exactly 2 level indices, found {}",
                arr.len()
            ));
            return None;
        }
        let a = self.index(&arr[0], &format!("{path}[0]"))?;
        let b = self.index(&arr[1], &format!("{path}[1]"))?;
        Some([a, b])
    }
}

const PULSE_KEYS: [&str; 7] = [
    "amplitude_re",
    "amplitude_im",
    "center_time",
    "sigma",
    "carrier",
    "direction",
    "polarization",
];

fn walk_pulse(w: &mut Walk, value: &toml::Value, path: &str) -> PulseConfig {
    let mut out = PulseConfig {
        amplitude_re: 1.0,
        amplitude_im: 0.0,
        center_time: 0.0,
        sigma: 1.0,
        carrier: 1.0,
        direction: [1.0, 0.0, 0.0],
        polarization: [0.0, 0.0, 1.0],
    };
    let Some(t) = w.table(value, path, &PULSE_KEYS) else {
        return out;
    };
    if let Some(v) = w.required(t, path, "amplitude_re") {
        if let Some(x) = w.float(v, &format!("{path}.amplitude_re")) {
            out.amplitude_re = x;
        }
    }
    if let Some(v) = t.get("amplitude_im") {
        if let Some(x) = w.float(v, &format!("{path}.amplitude_im")) {
            out.amplitude_im = x;
        }
    }
    if let Some(v) = w.required(t, path, "center_time") {
        if let Some(x) = w.float(v, &format!("{path}.center_time")) {
            out.center_time = x;
        }
    }
    if let Some(v) = w.required(t, path, "sigma") {
        if let Some(x) = w.float(v, &format!("{path}.sigma")) {
            out.sigma = x;
        }
    }
    if let Some(v) = w.required(t, path, "carrier") {
        if let Some(x) = w.float(v, &format!("{path}.carrier")) {
            out.carrier = x;
        }
    }
    if let Some(v) = w.required(t, path, "direction") {
        if let Some(x) = w.vec3(v, &format!("{path}.direction")) {
            out.direction = x;
        }
    }
    if let Some(v) = w.required(t, path, "polarization") {
        if let Some(x) = w.vec3(v, &format!("{path}.polarization")) {
            out.polarization = x;
        }
    }
    out
}

fn walk_molecule(w: &mut Walk, value: &toml::Value, path: &str) -> MoleculeConfig {
    let mut out = MoleculeConfig {
        tag: String::new(),
        energies: Vec::new(),
        position: [0.0; 3],
        dephasing: Vec::new(),
        dipole: Vec::new(),
    };
    let Some(t) = w.table(
        value,
        path,
        &["tag", "energies", "position", "dephasing", "dipole"],
    ) else {
        return out;
    };
    if let Some(v) = w.required(t, path, "tag") {
        if let Some(s) = w.string(v, &format!("{path}.tag")) {
            out.tag = s;
        }
    }
    if let Some(v) = w.required(t, path, "energies") {
        if let Some(e) = w.floats(v, &format!("{path}.energies")) {
            out.energies = e;
        }
    }
    if let Some(v) = w.required(t, path, "position") {
        if let Some(p) = w.vec3(v, &format!("{path}.position")) {
            out.position = p;
        }
    }
    if let Some(v) = t.get("dephasing") {
        let dpath = format!("{path}.dephasing");
        match v.as_array() {
            Some(arr) => {
                for (i, item) in arr.iter().enumerate() {
                    let ipath = format!("{dpath}[{i}]");
                    let mut d = DephasingConfig {
                        levels: [0, 1],
                        rate: 0.0,
                    };
                    if let Some(dt) = w.table(item, &ipath, &["levels", "rate"]) {
                        if let Some(lv) = w.required(dt, &ipath, "levels") {
                            if let Some(l) = w.level_pair(lv, &format!("{ipath}.levels")) {
                                d.levels = l;
                            }
                        }
                        if let Some(rv) = w.required(dt, &ipath, "rate") {
                            if let Some(r) = w.float(rv, &format!("{ipath}.rate")) {
                                d.rate = r;
                            }
                        }
                    }
                    out.dephasing.push(d);
                }
            }
            None => w.push(format!("{dpath}: expected an array of tables")),
        }
    }
    if let Some(v) = t.get("dipole") {
        let dpath = format!("{path}.dipole");
        match v.as_array() {
            Some(arr) => {
                for (i, item) in arr.iter().enumerate() {
                    let ipath = format!("{dpath}[{i}]");
                    let mut d = DipoleConfig {
                        levels: [0, 1],
                        mu_re: [0.0; 3],
                        mu_im: [0.0; 3],
                    };
                    if let Some(dt) = w.table(item, &ipath, &["levels", "mu_re", "mu_im"]) {
                        if let Some(lv) = w.required(dt, &ipath, "levels") {
                            if let Some(l) = w.level_pair(lv, &format!("{ipath}.levels")) {
                                d.levels = l;
                            }
                        }
                        if let Some(rv) = w.required(dt, &ipath, "mu_re") {
                            if let Some(m) = w.vec3(rv, &format!("{ipath}.mu_re")) {
                                d.mu_re = m;
                            }
                        }
                        if let Some(iv) = dt.get("mu_im") {
                            if let Some(m) = w.vec3(iv, &format!("{ipath}.mu_im")) {
                                d.mu_im = m;
                            }
                        }
                    }
                    out.dipole.push(d);
                }
            }
            None => w.push(format!("{dpath}: expected an array of tables")),
        }
    }
    out
}

fn walk_scan(w: &mut Walk, value: &toml::Value, path: &str) -> ScanConfig {
    let mut out = ScanConfig {
        axis: String::new(),
        start: 0.0,
        stop: 0.0,
        steps: 1,
    };
    let Some(t) = w.table(value, path, &["axis", "start", "stop", "steps"]) else {
        return out;
    };
    if let Some(v) = w.required(t, path, "axis") {
        if let Some(a) = w.string(v, &format!("{path}.axis")) {
            out.axis = a;
        }
    }
    if let Some(v) = w.required(t, path, "start") {
        if let Some(x) = w.float(v, &format!("{path}.start")) {
            out.start = x;
        }
    }
    if let Some(v) = w.required(t, path, "stop") {
        if let Some(x) = w.float(v, &format!("{path}.stop")) {
            out.stop = x;
        }
    }
    if let Some(v) = w.required(t, path, "steps") {
        match v {
            toml::Value::Integer(i) if *i >= 1 => out.steps = *i as usize,
            _ => w.push(format!("{path}.steps: expected an integer >= 1")),
        }
    }
    out
}

/// Parse and fully validate a TOML run configuration.
///
/// On failure the returned [`VmiError::InvalidConfig`] lists **every**
/// violation found: syntax, unknown/missing keys, type errors, and
/// physical-model violations (negative rates, non-transverse polarizations,
/// scan-axis problems, ...).
///
/// # Errors
/// [`VmiError::InvalidConfig`] with the full violation list.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| VmiError::config(vec![format!("TOML syntax error: {e}")]))?;

    let mut w = Walk {
        violations: Vec::new(),
    };
    for key in root.keys() {
        if ![
            "version",
            "scenario",
            "molecule",
            "pulse",
            "detection",
            "run",
        ]
        .contains(&key.as_str())
        {
            w.push(format!("unknown top-level key `{key}`"));
        }
    }

    let version = match root.get("version") {
        Some(v) => w.string(v, "version").unwrap_or_else(|| "1".to_string()),
        None => "1".to_string(),
    };

    let mut scenario = ScenarioConfig::default();
    if let Some(v) = root.get("scenario") {
        if let Some(t) = w.table(v, "scenario", &["speed_of_light", "quad_rel_tol"]) {
            if let Some(c) = t.get("speed_of_light") {
                if let Some(x) = w.float(c, "scenario.speed_of_light") {
                    scenario.speed_of_light = x;
                }
            }
            if let Some(c) = t.get("quad_rel_tol") {
                if let Some(x) = w.float(c, "scenario.quad_rel_tol") {
                    scenario.quad_rel_tol = x;
                }
            }
        }
    }

    let mut molecules = Vec::new();
    match root.get("molecule") {
        Some(toml::Value::Array(arr)) => {
            if arr.is_empty() {
                w.push("molecule: at least one molecule required".to_string());
            }
            for (i, item) in arr.iter().enumerate() {
                let m = walk_molecule(&mut w, item, &format!("molecule[{i}]"));
                molecules.push(m);
            }
        }
        Some(_) => w.push("molecule: expected an array of tables (use [[molecule]])".to_string()),
        None => w.push("missing required section [[molecule]]".to_string()),
    }

    let mut pulses = Vec::new();
    match root.get("pulse") {
        Some(toml::Value::Array(arr)) => {
            if arr.is_empty() || arr.len() > 3 {
                w.push(format!(
                    "pulse: between 1 and 3 drive pulses required, found {}",
                    arr.len()
                ));
            }
            for (i, item) in arr.iter().enumerate() {
                pulses.push(walk_pulse(&mut w, item, &format!("pulse[{i}]")));
            }
        }
        Some(_) => w.push("pulse: expected an array of tables (use [[pulse]])".to_string()),
        None => w.push("missing required section [[pulse]]".to_string()),
    }

    let detection = match root.get("detection") {
        Some(toml::Value::Array(arr)) => {
            w.push(format!(
                "detection: exactly one detection pulse required, found {}",
                arr.len()
            ));
            walk_pulse(
                &mut w,
                arr.first().unwrap_or(&toml::Value::Boolean(false)),
                "detection",
            )
        }
        Some(v) => walk_pulse(&mut w, v, "detection"),
        None => {
            w.push("missing required section [detection]".to_string());
            PulseConfig {
                amplitude_re: 1.0,
                amplitude_im: 0.0,
                center_time: 0.0,
                sigma: 1.0,
                carrier: 1.0,
                direction: [1.0, 0.0, 0.0],
                polarization: [0.0, 0.0, 1.0],
            }
        }
    };

    let mut run = RunBlock {
        order: pulses.len().max(1),
        domain: "freq".to_string(),
        vmi: true,
        breakdown: false,
        rwa: false,
        output: None,
        scan: None,
    };
    if let Some(v) = root.get("run") {
        if let Some(t) = w.table(
            v,
            "run",
            &[
                "order",
                "domain",
                "vmi",
                "breakdown",
                "rwa",
                "output",
                "scan",
            ],
        ) {
            if let Some(c) = t.get("order") {
                match c {
                    toml::Value::Integer(i) if (1..=3).contains(i) => run.order = *i as usize,
                    _ => w.push("run.order: expected an integer in 1..=3".to_string()),
                }
            }
            if let Some(c) = t.get("domain") {
                if let Some(d) = w.string(c, "run.domain") {
                    run.domain = d;
                }
            }
            if let Some(c) = t.get("vmi") {
                if let Some(b) = w.boolean(c, "run.vmi") {
                    run.vmi = b;
                }
            }
            if let Some(c) = t.get("breakdown") {
                if let Some(b) = w.boolean(c, "run.breakdown") {
                    run.breakdown = b;
                }
            }
            if let Some(c) = t.get("rwa") {
                if let Some(b) = w.boolean(c, "run.rwa") {
                    run.rwa = b;
                }
            }
            if let Some(c) = t.get("output") {
                run.output = w.string(c, "run.output");
            }
            if let Some(c) = t.get("scan") {
                run.scan = Some(walk_scan(&mut w, c, "run.scan"));
            }
        }
    }

    let cfg = RunConfig {
        version,
        scenario,
        molecule: molecules,
        pulse: pulses,
        detection,
        run,
    };

    // Semantic and physical validation only once the schema itself is clean,
    // so placeholder values from failed parses never produce spurious
    // complaints.
    if w.violations.is_empty() {
        w.violations.extend(validate_semantics(&cfg));
    }
    if w.violations.is_empty() {
        Ok(cfg)
    } else {
        Err(VmiError::config(w.violations))
    }
}

/// Serialize a configuration to canonical TOML (defaults materialized).
pub fn serialize_config(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("run configurations always serialize")
}

/// Every semantic violation in an already schema-valid configuration.
fn validate_semantics(cfg: &RunConfig) -> Vec<String> {
    let mut violations = Vec::new();

    if cfg.version != "1" {
        violations.push(format!(
            "version: unsupported schema version `{}`",
            cfg.version
        ));
    }
    if !(cfg.scenario.speed_of_light > 0.0) || !cfg.scenario.speed_of_light.is_finite() {
        violations.push(format!(
            "scenario.speed_of_light: must be positive and finite, got {}",
            cfg.scenario.speed_of_light
        ));
    }
    if !(cfg.scenario.quad_rel_tol > 0.0 && cfg.scenario.quad_rel_tol < 0.1) {
        violations.push(format!(
            "scenario.quad_rel_tol: must lie in (0, 0.1), got {}",
            cfg.scenario.quad_rel_tol
        ));
    }

    let mut seen = std::collections::BTreeSet::new();
    for (i, m) in cfg.molecule.iter().enumerate() {
        if m.tag.is_empty() {
            violations.push(format!("molecule[{i}].tag: must not be empty"));
        }
        if !seen.insert(m.tag.clone()) {
            violations.push(format!("molecule[{i}].tag: duplicate tag `{}`", m.tag));
        }
        let deph: Vec<((usize, usize), f64)> = m
            .dephasing
            .iter()
            .map(|d| ((d.levels[0], d.levels[1]), d.rate))
            .collect();
        let dip: Vec<((usize, usize), [Complex64; 3])> = m
            .dipole
            .iter()
            .map(|d| {
                (
                    (d.levels[0], d.levels[1]),
                    [
                        Complex64::new(d.mu_re[0], d.mu_im[0]),
                        Complex64::new(d.mu_re[1], d.mu_im[1]),
                        Complex64::new(d.mu_re[2], d.mu_im[2]),
                    ],
                )
            })
            .collect();
        for v in core_model::validate_parts(&m.tag, &m.energies, &deph, &dip) {
            violations.push(format!("molecule[{i}]: {v}"));
        }
        for p in &m.position {
            if !p.is_finite() {
                violations.push(format!("molecule[{i}].position: must be finite"));
                break;
            }
        }
    }

    for (i, p) in cfg.pulse.iter().enumerate() {
        if let Err(e) = p.build(cfg.scenario.speed_of_light.abs().max(f64::MIN_POSITIVE)) {
            violations.push(format!("pulse[{i}]: {e}"));
        }
    }
    if let Err(e) = cfg
        .detection
        .build(cfg.scenario.speed_of_light.abs().max(f64::MIN_POSITIVE))
    {
        violations.push(format!("detection: {e}"));
    }

    if !matches!(cfg.run.domain.as_str(), "freq" | "time") {
        violations.push(format!(
            "run.domain: expected \"freq\" or \"time\", got \"{}\"",
            cfg.run.domain
        ));
    }
    if cfg.run.order != cfg.pulse.len() {
        violations.push(format!(
            "run.order: must equal the number of drive pulses ({}), got {}",
            cfg.pulse.len(),
            cfg.run.order
        ));
    }

    if let Some(scan) = &cfg.run.scan {
        if !SCAN_AXES.contains(&scan.axis.as_str()) {
            violations.push(format!(
                "run.scan.axis: unknown axis `{}` (expected one of {})",
                scan.axis,
                SCAN_AXES.join(", ")
            ));
        }
        if !scan.start.is_finite() || !scan.stop.is_finite() {
            violations.push("run.scan: start and stop must be finite".to_string());
        }
        if scan.steps < 1 {
            violations.push("run.scan.steps: must be at least 1".to_string());
        }
        match scan.axis.as_str() {
            "omega_s" | "omega_1" => {
                if scan.start.min(scan.stop) <= 0.0 {
                    violations.push(format!(
                        "run.scan: carrier frequencies must stay positive over the \
                         {} grid, got start {} stop {}",
                        scan.axis, scan.start, scan.stop
                    ));
                }
            }
            "separation" => {
                if cfg.molecule.len() < 2 {
                    violations.push(
                        "run.scan: the separation axis needs at least two molecules".to_string(),
                    );
                } else {
                    let a = cfg.molecule[0].position;
                    let b = cfg.molecule[1].position;
                    let d2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2);
                    if d2 == 0.0 {
                        violations.push(
                            "run.scan: the separation axis needs the first two molecules \
                             at distinct configured positions to define a direction"
                                .to_string(),
                        );
                    }
                }
                if scan.start.min(scan.stop) <= 0.0 {
                    violations.push(format!(
                        "run.scan: separations must stay positive, got start {} stop {}",
                        scan.start, scan.stop
                    ));
                }
            }
            _ => {}
        }
    }

    violations
}

/// Build the evaluation-ready scenario from a validated configuration.
///
/// # Errors
/// [`VmiError::InvalidConfig`] listing every construction failure.
pub fn build_scenario(cfg: &RunConfig) -> Result<Scenario> {
    let semantic = validate_semantics(cfg);
    if !semantic.is_empty() {
        return Err(VmiError::config(semantic));
    }
    let mut molecules = Vec::with_capacity(cfg.molecule.len());
    for m in &cfg.molecule {
        let deph: Vec<((usize, usize), f64)> = m
            .dephasing
            .iter()
            .map(|d| ((d.levels[0], d.levels[1]), d.rate))
            .collect();
        let dip: Vec<((usize, usize), [Complex64; 3])> = m
            .dipole
            .iter()
            .map(|d| {
                (
                    (d.levels[0], d.levels[1]),
                    [
                        Complex64::new(d.mu_re[0], d.mu_im[0]),
                        Complex64::new(d.mu_re[1], d.mu_im[1]),
                        Complex64::new(d.mu_re[2], d.mu_im[2]),
                    ],
                )
            })
            .collect();
        molecules.push(MolecularModel::new(
            m.tag.clone(),
            m.energies.clone(),
            &deph,
            &dip,
            m.position,
        )?);
    }
    let drive: Vec<Pulse> = cfg
        .pulse
        .iter()
        .map(|p| p.build(cfg.scenario.speed_of_light))
        .collect::<Result<_>>()?;
    let detection = cfg.detection.build(cfg.scenario.speed_of_light)?;
    let mut sc = Scenario::new(molecules, drive, detection, cfg.scenario.speed_of_light)?;
    sc.rel_tol = cfg.scenario.quad_rel_tol;
    sc.rwa = cfg.run.rwa;
    sc.validate(Some(cfg.run.order))?;
    Ok(sc)
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

fn pulse_cfg(
    center_time: f64,
    sigma: f64,
    carrier: f64,
    direction: [f64; 3],
    polarization: [f64; 3],
) -> PulseConfig {
    PulseConfig {
        amplitude_re: 1.0,
        amplitude_im: 0.0,
        center_time,
        sigma,
        carrier,
        direction,
        polarization,
    }
}

fn two_level_cfg(
    tag: &str,
    omega0: f64,
    gamma: f64,
    mu: [f64; 3],
    position: [f64; 3],
) -> MoleculeConfig {
    MoleculeConfig {
        tag: tag.to_string(),
        energies: vec![0.0, omega0],
        position,
        dephasing: vec![DephasingConfig {
            levels: [0, 1],
            rate: gamma,
        }],
        dipole: vec![DipoleConfig {
            levels: [0, 1],
            mu_re: mu,
            mu_im: [0.0; 3],
        }],
    }
}

fn ladder_cfg(tag: &str, gamma: f64, position: [f64; 3]) -> MoleculeConfig {
    MoleculeConfig {
        tag: tag.to_string(),
        energies: vec![0.0, 1.0, 4.0],
        position,
        dephasing: vec![
            DephasingConfig {
                levels: [0, 1],
                rate: gamma,
            },
            DephasingConfig {
                levels: [0, 2],
                rate: gamma,
            },
            DephasingConfig {
                levels: [1, 2],
                rate: gamma,
            },
        ],
        dipole: vec![
            DipoleConfig {
                levels: [0, 1],
                mu_re: [0.0, 0.0, 1.0],
                mu_im: [0.0; 3],
            },
            DipoleConfig {
                levels: [1, 2],
                mu_re: [0.0, 0.0, 0.8],
                mu_im: [0.0; 3],
            },
            DipoleConfig {
                levels: [0, 2],
                mu_re: [0.0, 0.0, 0.3],
                mu_im: [0.0; 3],
            },
        ],
    }
}

fn run_block(order: usize, domain: &str, breakdown: bool, scan: Option<ScanConfig>) -> RunBlock {
    RunBlock {
        order,
        domain: domain.to_string(),
        vmi: true,
        breakdown,
        rwa: false,
        output: None,
        scan,
    }
}

/// Build a named example configuration.
///
/// # Errors
/// [`VmiError::Unsupported`] for unknown names; see [`PRESET_NAMES`].
pub fn preset(name: &str) -> Result<RunConfig> {
    let x_hat = [1.0, 0.0, 0.0];
    let y_hat = [0.0, 1.0, 0.0];
    let z_hat = [0.0, 0.0, 1.0];
    match name {
        // Two identical two-level molecules one wavelength apart; linear
        // detection scanned across the shared resonance.
        "dimer_linear" => Ok(RunConfig {
            version: "1".into(),
            scenario: ScenarioConfig {
                speed_of_light: 1.0,
                quad_rel_tol: DEFAULT_QUAD_REL_TOL,
            },
            molecule: vec![
                two_level_cfg("a", 1.0, 0.05, z_hat, [0.0, 0.0, 0.0]),
                two_level_cfg("b", 1.0, 0.05, z_hat, [0.0, 0.0, 1.0]),
            ],
            pulse: vec![pulse_cfg(0.0, 8.0, 1.0, x_hat, z_hat)],
            detection: pulse_cfg(0.0, 8.0, 1.0, x_hat, z_hat),
            run: run_block(
                1,
                "freq",
                false,
                Some(ScanConfig {
                    axis: "omega_s".into(),
                    start: 0.6,
                    stop: 1.4,
                    steps: 33,
                }),
            ),
        }),
        // Three-level ladders driven on the two rungs; the local-field
        // corrections to the two-pulse signal, term by term.
        "ladder_s2" => Ok(RunConfig {
            version: "1".into(),
            scenario: ScenarioConfig {
                speed_of_light: 2000.0,
                quad_rel_tol: DEFAULT_QUAD_REL_TOL,
            },
            molecule: vec![
                ladder_cfg("a", 0.05, [0.0, 0.0, 0.0]),
                ladder_cfg("b", 0.05, [0.0, 0.0, 0.5]),
            ],
            pulse: vec![
                pulse_cfg(0.0, 10.0, 1.0, x_hat, z_hat),
                pulse_cfg(0.0, 10.0, 3.0, x_hat, z_hat),
            ],
            detection: pulse_cfg(0.0, 10.0, 4.0, x_hat, z_hat),
            run: run_block(2, "freq", true, None),
        }),
        // Three-pulse drive of the same ladder pair; the cascading
        // corrections where both molecules respond at second order. The
        // rotating-frame filter drops the five far-off-resonant conjugation
        // branches (of eight), which keeps the time-domain evaluation of
        // this three-pulse demo interactive without touching the three
        // branches that carry signal.
        "cascade_s3" => Ok(RunConfig {
            version: "1".into(),
            scenario: ScenarioConfig {
                speed_of_light: 2000.0,
                quad_rel_tol: DEFAULT_QUAD_REL_TOL,
            },
            molecule: vec![
                ladder_cfg("a", 0.05, [0.0, 0.0, 0.0]),
                ladder_cfg("b", 0.05, [0.0, 0.0, 0.5]),
            ],
            pulse: vec![
                pulse_cfg(0.0, 14.0, 1.0, x_hat, z_hat),
                pulse_cfg(0.0, 14.0, 3.0, x_hat, z_hat),
                pulse_cfg(0.0, 14.0, 5.2, x_hat, z_hat),
            ],
            detection: pulse_cfg(0.0, 14.0, 1.2, x_hat, z_hat),
            run: RunBlock {
                rwa: true,
                ..run_block(3, "freq", true, None)
            },
        }),
        // A slowly dephasing partner keeps radiating long after the first
        // pulse; the late pulse pair then reads out its stored field, a
        // contribution invisible when each molecule is driven independently.
        "scramble_demo" => Ok(RunConfig {
            version: "1".into(),
            scenario: ScenarioConfig {
                speed_of_light: 2000.0,
                quad_rel_tol: DEFAULT_QUAD_REL_TOL,
            },
            molecule: vec![
                ladder_cfg("a", 0.1, [0.0, 0.0, 0.0]),
                ladder_cfg("b", 0.01, [0.0, 0.0, 0.5]),
            ],
            pulse: vec![
                pulse_cfg(0.0, 5.0, 1.0, x_hat, z_hat),
                pulse_cfg(50.0, 5.0, 3.0, x_hat, z_hat),
            ],
            detection: pulse_cfg(50.0, 5.0, 4.0, x_hat, z_hat),
            run: run_block(2, "time", true, None),
        }),
        // 125 two-level molecules on a cubic lattice one wavelength apart;
        // collinear detection is phase matched, tilted detection is not.
        "lattice_pm" => {
            let spacing = 2.0 * std::f64::consts::PI;
            let positions = cubic_lattice(5, spacing, [0.0, 0.0, 0.0]);
            let molecule = positions
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let (ix, iy, iz) = (i / 25, (i / 5) % 5, i % 5);
                    two_level_cfg(&format!("m{ix}{iy}{iz}"), 1.0, 0.05, y_hat, p)
                })
                .collect();
            Ok(RunConfig {
                version: "1".into(),
                scenario: ScenarioConfig {
                    speed_of_light: 1.0,
                    quad_rel_tol: DEFAULT_QUAD_REL_TOL,
                },
                molecule,
                pulse: vec![pulse_cfg(0.0, 8.0, 1.0, z_hat, y_hat)],
                detection: pulse_cfg(0.0, 8.0, 1.0, z_hat, y_hat),
                run: run_block(1, "freq", false, None),
            })
        }
        // A short line of two-level molecules for ensemble-size scaling:
        // the baseline grows with N, the pair corrections with N(N-1).
        "scaling" => {
            let molecule = (0..5)
                .map(|i| {
                    two_level_cfg(
                        &format!("m{i}"),
                        1.0,
                        0.1,
                        z_hat,
                        [9.0 * i as f64, 0.0, 0.0],
                    )
                })
                .collect();
            Ok(RunConfig {
                version: "1".into(),
                scenario: ScenarioConfig {
                    speed_of_light: 2000.0,
                    quad_rel_tol: DEFAULT_QUAD_REL_TOL,
                },
                molecule,
                pulse: vec![pulse_cfg(0.0, 5.0, 1.0, y_hat, z_hat)],
                detection: pulse_cfg(0.0, 5.0, 1.0, y_hat, z_hat),
                run: run_block(1, "freq", false, None),
            })
        }
        other => Err(VmiError::Unsupported(format!(
            "unknown preset `{other}`; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

// ---------------------------------------------------------------------------
// Scan evaluation
// ---------------------------------------------------------------------------

/// The configuration with one scan axis set to a specific value.
fn config_at(cfg: &RunConfig, axis: &str, value: f64) -> RunConfig {
    let mut out = cfg.clone();
    match axis {
        "omega_s" => out.detection.carrier = value,
        "omega_1" => out.pulse[0].carrier = value,
        "delay" => {
            out.detection.center_time += value;
            if out.pulse.len() >= 2 {
                let last = out.pulse.len() - 1;
                out.pulse[last].center_time += value;
            }
        }
        "separation" => {
            let a = cfg.molecule[0].position;
            let b = cfg.molecule[1].position;
            let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            out.molecule[1].position = [
                a[0] + value * d[0] / n,
                a[1] + value * d[1] / n,
                a[2] + value * d[2] / n,
            ];
        }
        other => unreachable!("scan axis `{other}` was validated"),
    }
    out
}

/// Evaluated signal values over a (possibly single-point) scan grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalGrid {
    /// Scan axis name, absent for single-point runs.
    pub axis: Option<String>,
    /// Axis value per row (empty for single-point runs).
    pub axis_values: Vec<f64>,
    /// Names of the value columns: `signal`, then one per breakdown term.
    pub columns: Vec<String>,
    /// One inner vector per grid point, aligned with `columns`.
    pub rows: Vec<Vec<f64>>,
}

impl SignalGrid {
    /// All header names: the axis (if any) followed by the value columns.
    pub fn header(&self) -> Vec<String> {
        let mut h = Vec::new();
        if let Some(a) = &self.axis {
            h.push(a.clone());
        }
        h.extend(self.columns.iter().cloned());
        h
    }
}

/// Evaluate the configured signal over its scan grid (or at the single
/// configured point). Grid points are evaluated independently (in parallel)
/// and emitted in axis order, so results do not depend on thread timing.
///
/// # Errors
/// [`VmiError::InvalidConfig`] for configuration problems and
/// [`VmiError::Numerical`] if any quadrature fails.
pub fn run_signal(cfg: &RunConfig) -> Result<SignalGrid> {
    let semantic = validate_semantics(cfg);
    if !semantic.is_empty() {
        return Err(VmiError::config(semantic));
    }
    let order = cfg.run.order;
    let domain = cfg.domain();

    let mut columns = vec!["signal".to_string()];
    if cfg.run.vmi && cfg.run.breakdown {
        // Term names are fixed per order; evaluate them without running any
        // quadrature by matching the breakdown layout.
        let names: Vec<String> = match order {
            1 => vec![crate::signals::S1_TERM_NAME.to_string()],
            2 => crate::signals::S2_TERM_NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            _ => crate::signals::S3_TERM_NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
        };
        columns.extend(names);
    }

    let (axis, points): (Option<String>, Vec<Option<f64>>) = match &cfg.run.scan {
        Some(scan) => (
            Some(scan.axis.clone()),
            scan.values().into_iter().map(Some).collect(),
        ),
        None => (None, vec![None]),
    };

    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|point| -> Result<Vec<f64>> {
            let local = match point {
                Some(v) => config_at(cfg, axis.as_deref().expect("axis set with points"), *v),
                None => cfg.clone(),
            };
            let sc = build_scenario(&local)?;
            let base = baseline_signal(&sc, order, domain)?;
            let mut row = Vec::with_capacity(columns.len());
            if cfg.run.vmi {
                let br = vmi_signal(&sc, order, domain)?;
                row.push(base + br.total());
                if cfg.run.breakdown {
                    row.extend(br.terms.iter().map(|(_, v)| *v));
                }
            } else {
                row.push(base);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SignalGrid {
        axis,
        axis_values: points.iter().flatten().copied().collect(),
        columns,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Deterministic output
// ---------------------------------------------------------------------------

/// Render a float with 17 significant digits (shortest exact round trip is
/// not used so that column widths and reruns are stable).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render a grid as CSV: header line, then one line per grid point.
pub fn grid_to_csv(grid: &SignalGrid) -> String {
    let mut out = String::new();
    out.push_str(&grid.header().join(","));
    out.push('\n');
    for (i, row) in grid.rows.iter().enumerate() {
        let mut fields = Vec::with_capacity(row.len() + 1);
        if grid.axis.is_some() {
            fields.push(fmt_float(grid.axis_values[i]));
        }
        fields.extend(row.iter().map(|v| fmt_float(*v)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// SHA-256 digest (lowercase hex) of the canonical TOML serialization.
pub fn config_digest(cfg: &RunConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serialize_config(cfg).as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Resolve an output path against an optional base directory (the value of
/// `VMI_OUTPUT_DIR`): relative paths are joined onto the base, absolute
/// paths are kept as-is.
fn resolve_against(base: Option<&std::ffi::OsStr>, raw: &str) -> PathBuf {
    let p = PathBuf::from(raw);
    match base {
        Some(dir) if p.is_relative() => PathBuf::from(dir).join(p),
        _ => p,
    }
}

/// Resolve an output path, honoring the `VMI_OUTPUT_DIR` environment
/// variable for relative paths.
pub fn resolve_output_path(raw: &str) -> PathBuf {
    resolve_against(std::env::var_os("VMI_OUTPUT_DIR").as_deref(), raw)
}

/// Sidecar metadata written next to every CSV output file.
#[derive(Debug, Serialize)]
struct GridMeta<'a> {
    software_version: &'a str,
    scenario_digest: String,
    columns: Vec<String>,
    rows: usize,
}

/// Write the grid CSV to `raw_path` (after `VMI_OUTPUT_DIR` resolution)
/// plus a `<path>.meta.json` sidecar with the configuration digest and
/// software version. Returns the resolved CSV path.
///
/// # Errors
/// [`VmiError::Io`] on filesystem failures.
pub fn write_grid_outputs(grid: &SignalGrid, cfg: &RunConfig, raw_path: &str) -> Result<PathBuf> {
    let path = resolve_output_path(raw_path);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&path, grid_to_csv(grid))?;
    let meta = GridMeta {
        software_version: env!("CARGO_PKG_VERSION"),
        scenario_digest: format!("sha256:{}", config_digest(cfg)),
        columns: grid.header(),
        rows: grid.rows.len(),
    };
    let meta_path = PathBuf::from(format!("{}.meta.json", path.display()));
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    std::fs::write(&meta_path, text)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Single-molecule response tables
// ---------------------------------------------------------------------------

/// Which response function the `respond` command evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseKind {
    /// Linear (two indices, one argument).
    Alpha,
    /// Quadratic (three indices, two arguments).
    Beta,
    /// Cubic (four indices, three arguments).
    Gamma,
}

impl ResponseKind {
    /// Lowercase name used in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            ResponseKind::Alpha => "alpha",
            ResponseKind::Beta => "beta",
            ResponseKind::Gamma => "gamma",
        }
    }

    /// Number of Cartesian indices.
    pub fn index_count(self) -> usize {
        match self {
            ResponseKind::Alpha => 2,
            ResponseKind::Beta => 3,
            ResponseKind::Gamma => 4,
        }
    }

    /// Number of time/frequency arguments.
    pub fn arg_count(self) -> usize {
        match self {
            ResponseKind::Alpha => 1,
            ResponseKind::Beta => 2,
            ResponseKind::Gamma => 3,
        }
    }
}

/// Parse Cartesian index letters (`x`, `y`, `z`) into axis numbers.
fn parse_indices(kind: ResponseKind, text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(text.len());
    for ch in text.chars() {
        out.push(match ch {
            'x' => 0,
            'y' => 1,
            'z' => 2,
            other => {
                return Err(VmiError::config(vec![format!(
                    "indices: expected only x, y or z, got `{other}`"
                )]))
            }
        });
    }
    if out.len() != kind.index_count() {
        return Err(VmiError::config(vec![format!(
            "indices: {} needs exactly {} Cartesian letters, got {}",
            kind.name(),
            kind.index_count(),
            out.len()
        )]));
    }
    Ok(out)
}

/// Evaluate a bare response function of one molecule on a grid of its first
/// argument, the remaining arguments held fixed, and render the table as
/// CSV with columns `kind, indices, arg1..argN, re, im`.
///
/// Time-domain arguments are the successive propagation delays (all must be
/// non-negative); frequency-domain arguments are real frequencies.
///
/// # Errors
/// [`VmiError::InvalidConfig`] for unknown tags, malformed indices or
/// argument-count mismatches.
pub fn respond_csv(
    cfg: &RunConfig,
    molecule: Option<&str>,
    kind: ResponseKind,
    domain: Domain,
    indices_text: &str,
    grid: &ScanConfig,
    fixed_args: &[f64],
) -> Result<String> {
    let semantic = validate_semantics(cfg);
    if !semantic.is_empty() {
        return Err(VmiError::config(semantic));
    }
    let idx = parse_indices(kind, indices_text)?;
    if fixed_args.len() + 1 != kind.arg_count() {
        return Err(VmiError::config(vec![format!(
            "args: {} takes {} argument(s); the grid covers the first, so {} fixed \
             value(s) must be supplied, got {}",
            kind.name(),
            kind.arg_count(),
            kind.arg_count() - 1,
            fixed_args.len()
        )]));
    }
    if domain == Domain::Time {
        let mut all = vec![grid.start, grid.stop];
        all.extend_from_slice(fixed_args);
        if all.iter().any(|v| *v < 0.0) {
            return Err(VmiError::config(vec![
                "time-domain response arguments are propagation delays and must be \
                 non-negative"
                    .to_string(),
            ]));
        }
    }

    let m_cfg = match molecule {
        Some(tag) => cfg.molecule.iter().find(|m| m.tag == tag).ok_or_else(|| {
            VmiError::config(vec![format!("molecule: no molecule with tag `{tag}`")])
        })?,
        None => &cfg.molecule[0],
    };
    let sc = build_scenario(cfg)?;
    let model = sc
        .molecules
        .iter()
        .find(|m| m.tag == m_cfg.tag)
        .expect("configured molecule exists in the scenario");
    let space = build_superop_space(model);

    let mut out = String::new();
    out.push_str("kind,indices");
    for i in 1..=kind.arg_count() {
        out.push_str(&format!(",arg{i}"));
    }
    out.push_str(",re,im\n");

    for first in grid.values() {
        let v = match (kind, domain) {
            (ResponseKind::Alpha, Domain::Time) => {
                response::alpha_bar_time(&space, idx[0], idx[1], first)
            }
            (ResponseKind::Alpha, Domain::Freq) => {
                response::alpha_freq(&space, idx[0], idx[1], first)
            }
            (ResponseKind::Beta, Domain::Time) => {
                response::beta_bar_time(&space, idx[0], idx[1], idx[2], first, fixed_args[0])
            }
            (ResponseKind::Beta, Domain::Freq) => {
                response::beta_freq(&space, idx[0], idx[1], idx[2], first, fixed_args[0])
            }
            (ResponseKind::Gamma, Domain::Time) => response::gamma_bar_time(
                &space,
                idx[0],
                idx[1],
                idx[2],
                idx[3],
                first,
                fixed_args[0],
                fixed_args[1],
            ),
            (ResponseKind::Gamma, Domain::Freq) => response::gamma_freq(
                &space,
                idx[0],
                idx[1],
                idx[2],
                idx[3],
                first,
                fixed_args[0],
                fixed_args[1],
            ),
        };
        let mut fields = vec![kind.name().to_string(), indices_text.to_string()];
        fields.push(fmt_float(first));
        fields.extend(fixed_args.iter().map(|a| fmt_float(*a)));
        fields.push(fmt_float(v.re));
        fields.push(fmt_float(v.im));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Diagram descriptors
// ---------------------------------------------------------------------------

fn vertex_name(v: &VertexKind) -> String {
    match v {
        VertexKind::Field(i) => format!("field_{i}"),
        VertexKind::VacuumEmit => "vacuum_emit".to_string(),
        VertexKind::VacuumAbsorb => "vacuum_absorb".to_string(),
        VertexKind::Detection => "detection".to_string(),
    }
}

/// Enumerate the pair diagrams at an order and render them as a JSON list
/// of term descriptors (chronological field assignment, pulse permutation,
/// full vertex timeline, and, when `classify` is set, the local-field vs
/// cascading classification with the per-molecule interaction counts).
///
/// # Errors
/// [`VmiError::Unsupported`] for order 0.
pub fn diagrams_json(order: usize, include_permutations: bool, classify: bool) -> Result<String> {
    let terms = diagrams::enumerate_2vmi(order, include_permutations)?;
    let list: Vec<serde_json::Value> = terms
        .iter()
        .map(|t| {
            let assignment: Vec<&str> = t
                .assignment
                .iter()
                .map(|x| match x {
                    Target::A => "a",
                    Target::B => "b",
                })
                .collect();
            let timeline: Vec<String> = t.global_order.iter().map(vertex_name).collect();
            let mut obj = serde_json::json!({
                "order": t.order,
                "assignment": assignment,
                "permutation": t.permutation,
                "timeline": timeline,
            });
            if classify {
                obj["classification"] = serde_json::json!(match t.classification {
                    Classification::LocalField => "local_field",
                    Classification::Cascading => "cascading",
                });
                obj["interactions_detected"] = serde_json::json!(t.order_a);
                obj["interactions_partner"] = serde_json::json!(t.order_b);
                obj["equal_order_cascading"] = serde_json::json!(t.equal_order_cascading);
            }
            obj
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&list).expect("descriptors serialize");
    text.push('\n');
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn minimal_text() -> &'static str {
        r#"
[[molecule]]
tag = "a"
energies = [0.0, 1.0]
position = [0.0, 0.0, 0.0]
[[molecule.dephasing]]
levels = [0, 1]
rate = 0.05
[[molecule.dipole]]
levels = [0, 1]
mu_re = [0.0, 0.0, 1.0]

[[molecule]]
tag = "b"
energies = [0.0, 1.0]
position = [0.0, 0.0, 2.0]
[[molecule.dephasing]]
levels = [0, 1]
rate = 0.05
[[molecule.dipole]]
levels = [0, 1]
mu_re = [0.0, 0.0, 1.0]

[[pulse]]
amplitude_re = 1.0
center_time = 0.0
sigma = 5.0
carrier = 1.0
direction = [1.0, 0.0, 0.0]
polarization = [0.0, 0.0, 1.0]

[detection]
amplitude_re = 1.0
center_time = 0.0
sigma = 5.0
carrier = 1.0
direction = [1.0, 0.0, 0.0]
polarization = [0.0, 0.0, 1.0]
"#
    }

    #[test]
    fn minimal_config_fills_documented_defaults() {
        let cfg = parse_config(minimal_text()).unwrap();
        assert_eq!(cfg.version, "1");
        assert_eq!(cfg.scenario.speed_of_light, 1.0);
        assert_eq!(cfg.scenario.quad_rel_tol, 1e-6);
        assert_eq!(cfg.molecule.len(), 2);
        assert_eq!(cfg.detection.amplitude_im, 0.0);
        assert_eq!(cfg.molecule[0].dipole[0].mu_im, [0.0; 3]);
        assert_eq!(cfg.run.order, 1);
        assert_eq!(cfg.run.domain, "freq");
        assert!(cfg.run.vmi);
        assert!(!cfg.run.breakdown);
        assert!(!cfg.run.rwa);
        assert!(cfg.run.scan.is_none());
        assert!(cfg.run.output.is_none());
        build_scenario(&cfg).unwrap();
    }

    #[test]
    fn integers_are_accepted_where_floats_are_expected() {
        let text = minimal_text().replace("sigma = 5.0", "sigma = 5");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.pulse[0].sigma, 5.0);
    }

    #[test]
    fn two_detection_pulses_are_rejected_with_a_count() {
        let text = minimal_text().replace("[detection]", "[[detection]]")
            + "\n[[detection]]\namplitude_re = 1.0\ncenter_time = 0.0\nsigma = 5.0\ncarrier = 1.0\ndirection = [1.0, 0.0, 0.0]\npolarization = [0.0, 0.0, 1.0]\n";
        let err = parse_config(&text).unwrap_err();
        assert!(
            err.to_string()
                .contains("exactly one detection pulse required, found 2"),
            "{err}"
        );
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn all_violations_are_reported_not_just_the_first() {
        let text = r#"
typo_section = 1

[[molecule]]
tag = "a"
energies = [0.0, 1.0]
position = [0.0, 0.0, 0.0]
[[molecule.dephasing]]
levels = [0, 1]
rate = -0.05
[[molecule.dipole]]
levels = [0, 1]
mu_re = [0.0, 0.0, 1.0]

[[pulse]]
amplitude_re = 1.0
center_time = 0.0
sigma = 5.0
carrier = 1.0
direction = [1.0, 0.0, 0.0]
polarization = [0.0, 0.0, 1.0]
"#;
        let err = parse_config(text).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("unknown top-level key `typo_section`"),
            "{msg}"
        );
        assert!(
            msg.contains("missing required section [detection]"),
            "{msg}"
        );
        // The schema pass reports both problems at once; model-level checks
        // (the negative rate) run on the next pass once the shape is fixed.
        let fixed = text.replace("typo_section = 1", "")
            + "\n[detection]\namplitude_re = 1.0\ncenter_time = 0.0\nsigma = 5.0\ncarrier = 1.0\ndirection = [1.0, 0.0, 0.0]\npolarization = [0.0, 0.0, 1.0]\n[run]\ndomain = \"sideways\"\n";
        let err2 = parse_config(&fixed).unwrap_err();
        let msg2 = err2.to_string();
        assert!(
            msg2.contains("dephasing rate") && msg2.contains(">= 0"),
            "{msg2}"
        );
        assert!(msg2.contains("run.domain"), "{msg2}");
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let text = format!("version = \"7\"\n{}", minimal_text());
        let err = parse_config(&text).unwrap_err();
        assert!(
            err.to_string().contains("unsupported schema version"),
            "{err}"
        );
    }

    fn random_valid_config(rng: &mut impl Rng) -> RunConfig {
        let n_mol = rng.gen_range(1..=3usize);
        let molecule: Vec<MoleculeConfig> = (0..n_mol)
            .map(|i| {
                let levels = rng.gen_range(2..=3usize);
                let mut energies = vec![0.0];
                for k in 1..levels {
                    energies.push(energies[k - 1] + rng.gen_range(0.5..2.0));
                }
                let mut dephasing = Vec::new();
                let mut dipole = Vec::new();
                for a in 0..levels {
                    for b in (a + 1)..levels {
                        dephasing.push(DephasingConfig {
                            levels: [a, b],
                            rate: rng.gen_range(0.01..0.3),
                        });
                        dipole.push(DipoleConfig {
                            levels: [a, b],
                            mu_re: [
                                rng.gen_range(-1.0..1.0),
                                rng.gen_range(-1.0..1.0),
                                rng.gen_range(-1.0..1.0),
                            ],
                            mu_im: if rng.gen_bool(0.5) {
                                [0.0; 3]
                            } else {
                                [
                                    rng.gen_range(-0.5..0.5),
                                    rng.gen_range(-0.5..0.5),
                                    rng.gen_range(-0.5..0.5),
                                ]
                            },
                        });
                    }
                }
                MoleculeConfig {
                    tag: format!("mol{i}"),
                    energies,
                    position: [
                        i as f64 * rng.gen_range(0.5..3.0),
                        0.0,
                        rng.gen_range(-1.0..1.0),
                    ],
                    dephasing,
                    dipole,
                }
            })
            .collect();
        let n_pulse = rng.gen_range(1..=3usize);
        fn mk_pulse<R: Rng>(r: &mut R) -> PulseConfig {
            PulseConfig {
                amplitude_re: r.gen_range(0.2..2.0),
                amplitude_im: r.gen_range(-1.0..1.0),
                center_time: r.gen_range(-5.0..5.0),
                sigma: r.gen_range(0.5..10.0),
                carrier: r.gen_range(0.5..5.0),
                direction: [1.0, 0.0, 0.0],
                polarization: [0.0, r.gen_range(0.2..1.0), 0.0],
            }
        }
        let pulse: Vec<PulseConfig> = (0..n_pulse).map(|_| mk_pulse(rng)).collect();
        let detection = mk_pulse(rng);
        let scan = if rng.gen_bool(0.5) {
            Some(ScanConfig {
                axis: "omega_s".to_string(),
                start: rng.gen_range(0.5..1.0),
                stop: rng.gen_range(1.5..3.0),
                steps: rng.gen_range(1..20),
            })
        } else {
            None
        };
        RunConfig {
            version: "1".to_string(),
            scenario: ScenarioConfig {
                speed_of_light: rng.gen_range(1.0..3000.0),
                quad_rel_tol: rng.gen_range(1e-9..1e-3),
            },
            molecule,
            pulse,
            detection,
            run: RunBlock {
                order: n_pulse,
                domain: if rng.gen_bool(0.5) { "freq" } else { "time" }.to_string(),
                vmi: rng.gen_bool(0.5),
                breakdown: rng.gen_bool(0.5),
                rwa: rng.gen_bool(0.5),
                output: if rng.gen_bool(0.3) {
                    Some("grid.csv".to_string())
                } else {
                    None
                },
                scan,
            },
        }
    }

    #[test]
    fn round_trip_is_the_identity_on_randomized_configs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20_260_815);
        for trial in 0..20 {
            let cfg = random_valid_config(&mut rng);
            let text = serialize_config(&cfg);
            let back = parse_config(&text)
                .unwrap_or_else(|e| panic!("trial {trial}: rejected own output:\n{text}\n{e}"));
            assert_eq!(
                back, cfg,
                "trial {trial}: round trip changed the config\n{text}"
            );
        }
    }

    #[test]
    fn any_single_character_key_mutation_is_rejected() {
        let text = serialize_config(&preset("ladder_s2").unwrap());
        let mut mutated_count = 0;
        for (ln, line) in text.lines().enumerate() {
            let trimmed = line.trim_start();
            let mutated = if trimmed.starts_with('[') {
                // Table header: damage the last alphabetic character.
                let pos = line.rfind(|c: char| c.is_ascii_alphabetic());
                pos.map(|p| {
                    let mut s = line.to_string();
                    s.replace_range(p..=p, "q");
                    s
                })
            } else if let Some(eq) = line.find('=') {
                // Key-value line: damage the last letter of the key.
                let pos = line[..eq].rfind(|c: char| c.is_ascii_alphabetic());
                pos.map(|p| {
                    let mut s = line.to_string();
                    s.replace_range(p..=p, "q");
                    s
                })
            } else {
                None
            };
            if let Some(bad_line) = mutated {
                let mut lines: Vec<&str> = text.lines().collect();
                lines[ln] = &bad_line;
                let bad_text = lines.join("\n");
                assert!(
                    parse_config(&bad_text).is_err(),
                    "mutating line {ln} ({line:?} -> {bad_line:?}) was not rejected"
                );
                mutated_count += 1;
            }
        }
        assert!(
            mutated_count > 20,
            "expected to exercise many keys, got {mutated_count}"
        );
    }

    #[test]
    fn presets_parse_build_and_round_trip() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            let text = serialize_config(&cfg);
            let back = parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(back, cfg, "{name}");
            let sc = build_scenario(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(sc.drive.len(), cfg.run.order, "{name}");
        }
        assert!(preset("no_such").is_err());
    }

    #[test]
    fn lattice_preset_has_125_unique_sorted_tags() {
        let cfg = preset("lattice_pm").unwrap();
        assert_eq!(cfg.molecule.len(), 125);
        let tags: Vec<&str> = cfg.molecule.iter().map(|m| m.tag.as_str()).collect();
        let mut sorted = tags.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 125, "tags must be unique");
        assert_eq!(tags[0], "m000");
        assert_eq!(tags[124], "m444");
    }

    #[test]
    fn scan_axis_problems_are_rejected() {
        let mut cfg = parse_config(minimal_text()).unwrap();
        cfg.run.scan = Some(ScanConfig {
            axis: "sideways".into(),
            start: 1.0,
            stop: 2.0,
            steps: 3,
        });
        let err = parse_config(&serialize_config(&cfg)).unwrap_err();
        assert!(err.to_string().contains("unknown axis"), "{err}");

        cfg.run.scan = Some(ScanConfig {
            axis: "omega_s".into(),
            start: -1.0,
            stop: 2.0,
            steps: 3,
        });
        let err = parse_config(&serialize_config(&cfg)).unwrap_err();
        assert!(err.to_string().contains("positive"), "{err}");

        let mut one = cfg.clone();
        one.molecule.truncate(1);
        one.run.scan = Some(ScanConfig {
            axis: "separation".into(),
            start: 1.0,
            stop: 2.0,
            steps: 3,
        });
        let err = parse_config(&serialize_config(&one)).unwrap_err();
        assert!(err.to_string().contains("at least two molecules"), "{err}");
    }

    #[test]
    fn delay_and_separation_axes_transform_the_configuration() {
        let mut cfg = preset("ladder_s2").unwrap();
        cfg.pulse[1].center_time = 10.0;
        cfg.detection.center_time = 15.0;

        let shifted = config_at(&cfg, "delay", 4.0);
        assert_eq!(shifted.pulse[0].center_time, 0.0);
        assert_eq!(shifted.pulse[1].center_time, 14.0);
        assert_eq!(shifted.detection.center_time, 19.0);

        let moved = config_at(&cfg, "separation", 2.0);
        assert_eq!(moved.molecule[1].position, [0.0, 0.0, 2.0]);
        assert_eq!(moved.molecule[0].position, [0.0, 0.0, 0.0]);

        let retuned = config_at(&cfg, "omega_s", 3.7);
        assert_eq!(retuned.detection.carrier, 3.7);
        let retuned1 = config_at(&cfg, "omega_1", 1.3);
        assert_eq!(retuned1.pulse[0].carrier, 1.3);
        assert_eq!(retuned1.pulse[1].carrier, 3.0);

        // One-pulse configs shift only the detection.
        let single = parse_config(minimal_text()).unwrap();
        let shifted1 = config_at(&single, "delay", 2.5);
        assert_eq!(shifted1.pulse[0].center_time, 0.0);
        assert_eq!(shifted1.detection.center_time, 2.5);
    }

    #[test]
    fn csv_grid_has_header_and_one_line_per_point() {
        let mut cfg = parse_config(minimal_text()).unwrap();
        cfg.run.vmi = false;
        cfg.run.scan = Some(ScanConfig {
            axis: "omega_s".into(),
            start: 0.9,
            stop: 1.1,
            steps: 11,
        });
        let grid = run_signal(&cfg).unwrap();
        let csv = grid_to_csv(&grid);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 12, "{csv}");
        assert_eq!(lines[0], "omega_s,signal");
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 2);
            for f in fields {
                let v: f64 = f.parse().unwrap();
                assert!(v.is_finite());
                assert!(f.contains('e'), "expected scientific notation: {f}");
            }
        }
        // 17 significant digits: one leading digit plus 16 after the dot.
        let first = lines[1].split(',').next().unwrap();
        let mantissa = first.split('e').next().unwrap();
        let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
        assert_eq!(digits, 17, "unexpected mantissa width: {first}");
    }

    #[test]
    fn reruns_are_byte_identical() {
        let mut cfg = parse_config(minimal_text()).unwrap();
        cfg.run.scan = Some(ScanConfig {
            axis: "omega_s".into(),
            start: 0.95,
            stop: 1.05,
            steps: 3,
        });
        let a = grid_to_csv(&run_signal(&cfg).unwrap());
        let b = grid_to_csv(&run_signal(&cfg).unwrap());
        assert_eq!(a, b);
        assert!(a.lines().count() == 4);
    }

    #[test]
    fn breakdown_adds_exactly_the_term_columns() {
        let mut cfg = parse_config(minimal_text()).unwrap();
        cfg.run.breakdown = true;
        let grid = run_signal(&cfg).unwrap();
        assert_eq!(grid.columns, vec!["signal", "pair_coupling"]);
        assert_eq!(grid.rows.len(), 1);
        assert_eq!(grid.rows[0].len(), 2);
        assert!(grid.axis.is_none());
        let csv = grid_to_csv(&grid);
        assert!(csv.starts_with("signal,pair_coupling\n"), "{csv}");
    }

    #[test]
    fn config_digest_is_stable_and_input_sensitive() {
        let cfg = preset("dimer_linear").unwrap();
        let d1 = config_digest(&cfg);
        let d2 = config_digest(&cfg);
        assert_eq!(d1, d2);
        assert_eq!(d1.len(), 64);
        assert!(d1.chars().all(|c| c.is_ascii_hexdigit()));
        let mut other = cfg.clone();
        other.pulse[0].sigma += 1e-9;
        assert_ne!(config_digest(&other), d1);
    }

    #[test]
    fn output_files_and_sidecar_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = parse_config(minimal_text()).unwrap();
        cfg.run.vmi = false;
        let grid = run_signal(&cfg).unwrap();
        let raw = dir.path().join("out.csv");
        let path = write_grid_outputs(&grid, &cfg, raw.to_str().unwrap()).unwrap();
        let csv = std::fs::read_to_string(&path).unwrap();
        assert!(csv.starts_with("signal\n"));
        let meta: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(format!("{}.meta.json", path.display())).unwrap(),
        )
        .unwrap();
        assert_eq!(meta["rows"], 1);
        assert!(meta["scenario_digest"]
            .as_str()
            .unwrap()
            .starts_with("sha256:"));
        assert_eq!(
            meta["software_version"].as_str().unwrap(),
            env!("CARGO_PKG_VERSION")
        );
    }

    #[test]
    fn relative_output_paths_follow_the_override_directory() {
        let base = std::ffi::OsString::from("/tmp/vmi-out");
        let resolved = resolve_against(Some(base.as_os_str()), "grid.csv");
        assert_eq!(resolved, PathBuf::from("/tmp/vmi-out/grid.csv"));
        let absolute = resolve_against(Some(base.as_os_str()), "/data/grid.csv");
        assert_eq!(absolute, PathBuf::from("/data/grid.csv"));
        let none = resolve_against(None, "grid.csv");
        assert_eq!(none, PathBuf::from("grid.csv"));
    }

    #[test]
    fn respond_table_matches_direct_evaluation() {
        let cfg = parse_config(minimal_text()).unwrap();
        let grid = ScanConfig {
            axis: "omega".into(),
            start: 0.8,
            stop: 1.2,
            steps: 5,
        };
        let csv = respond_csv(
            &cfg,
            Some("b"),
            ResponseKind::Alpha,
            Domain::Freq,
            "zz",
            &grid,
            &[],
        )
        .unwrap();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines[0], "kind,indices,arg1,re,im");
        assert_eq!(lines.len(), 6);
        let sc = build_scenario(&cfg).unwrap();
        let space = build_superop_space(&sc.molecules[1]);
        let direct = response::alpha_freq(&space, 2, 2, 0.8);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "alpha");
        assert_eq!(fields[1], "zz");
        assert!((fields[3].parse::<f64>().unwrap() - direct.re).abs() <= 1e-12 * direct.norm());
        assert!((fields[4].parse::<f64>().unwrap() - direct.im).abs() <= 1e-12 * direct.norm());
    }

    #[test]
    fn respond_rejects_bad_indices_and_argument_counts() {
        let cfg = parse_config(minimal_text()).unwrap();
        let grid = ScanConfig {
            axis: "omega".into(),
            start: 0.8,
            stop: 1.2,
            steps: 3,
        };
        assert!(respond_csv(
            &cfg,
            None,
            ResponseKind::Alpha,
            Domain::Freq,
            "zq",
            &grid,
            &[]
        )
        .is_err());
        assert!(respond_csv(
            &cfg,
            None,
            ResponseKind::Alpha,
            Domain::Freq,
            "zzz",
            &grid,
            &[]
        )
        .is_err());
        assert!(respond_csv(
            &cfg,
            None,
            ResponseKind::Beta,
            Domain::Freq,
            "zzz",
            &grid,
            &[]
        )
        .is_err());
        assert!(respond_csv(
            &cfg,
            Some("nope"),
            ResponseKind::Alpha,
            Domain::Freq,
            "zz",
            &grid,
            &[]
        )
        .is_err());
        let t = ScanConfig {
            axis: "t".into(),
            start: -1.0,
            stop: 1.0,
            steps: 3,
        };
        assert!(respond_csv(&cfg, None, ResponseKind::Alpha, Domain::Time, "zz", &t, &[]).is_err());
    }

    #[test]
    fn diagram_descriptors_serialize_with_classification() {
        let text = diagrams_json(3, true, true).unwrap();
        let list: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
        assert_eq!(list.len(), 30);
        for item in &list {
            assert_eq!(item["order"], 3);
            let timeline = item["timeline"].as_array().unwrap();
            assert_eq!(timeline.last().unwrap(), "detection");
            assert!(
                item["classification"] == "local_field" || item["classification"] == "cascading"
            );
        }
        let plain: Vec<serde_json::Value> =
            serde_json::from_str(&diagrams_json(1, false, false).unwrap()).unwrap();
        assert_eq!(plain.len(), 1);
        assert!(plain[0].get("classification").is_none());
    }
}
