//! Run configuration: JSON file, flag overrides, validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use torobs_core::duhamel::PotentialSpec;
use torobs_core::observability::MultiplierSpec;
use torobs_core::tolerances::{
    DEFAULT_B, DEFAULT_EPSILON, DEFAULT_PLATEAU, DEFAULT_TAU, DEFAULT_TOL, MAX_ITERATIONS,
    MAX_TAU_HALVINGS,
};
use torobs_core::{AffineSublattice, CutoffSpec, IntVector, SpectrumField, Sublattice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Clusters,
    Orbits,
    Gram,
    Solve,
    Scan,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Strichartz,
    Ui,
    Ynorm,
    Obs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lattice,
    Clusters,
    Spectral,
    Duhamel,
    Observability,
    All,
}

/// `Γ = offset + span_ℤ(basis)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub offset: Vec<i64>,
    #[serde(default)]
    pub basis: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub kind: ScanKind,
    pub freq_bounds: Vec<i64>,
    pub samples: usize,
    /// Lebesgue exponent; even integers only for the Strichartz scan.
    pub p: f64,
    pub deltas: Vec<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            kind: ScanKind::Strichartz,
            freq_bounds: vec![4, 8, 16],
            samples: 200,
            p: 4.0,
            deltas: vec![0.01, 0.05, 0.1, 0.25, 0.5],
        }
    }
}

/// Everything a run depends on. Serialized verbatim (defaults filled in)
/// into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub d: usize,
    /// Defaults to `ℤ^d`.
    pub gamma: Option<GammaConfig>,
    /// Generators of `Λ` for `orbits`; defaults to the all-ones vector.
    pub lattice: Option<Vec<Vec<i64>>>,
    pub r: i64,
    pub f: i64,
    pub time_bound: Option<i64>,
    pub b: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub plateau: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub max_tau_halvings: usize,
    pub potential: Option<PotentialSpec>,
    /// `|χ|²`; defaults to the indicator of `x₁ ∈ [0, π)`.
    pub chi: Option<MultiplierSpec>,
    /// Overrides `tau`/`plateau` when present.
    pub cutoff: Option<CutoffSpec>,
    /// Initial data for `solve`; defaults to `e^{ix₁}`.
    pub initial: Option<SpectrumField>,
    pub scan: ScanConfig,
    pub suite: Suite,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            d: 1,
            gamma: None,
            lattice: None,
            r: 1,
            f: 16,
            time_bound: None,
            b: DEFAULT_B,
            epsilon: DEFAULT_EPSILON,
            tau: DEFAULT_TAU,
            plateau: DEFAULT_PLATEAU,
            tol: DEFAULT_TOL,
            max_iterations: MAX_ITERATIONS,
            max_tau_halvings: MAX_TAU_HALVINGS,
            potential: None,
            chi: None,
            cutoff: None,
            initial: None,
            scan: ScanConfig::default(),
            suite: Suite::All,
            seed: 0,
            out: PathBuf::from("torobs-out"),
        }
    }
}

/// A rejected configuration, located in its source when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: Option<PathBuf>,
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config")?;
        match (&self.source, self.line) {
            (Some(p), Some(l)) => write!(f, " ({}:{l})", p.display())?,
            (Some(p), None) => write!(f, " ({})", p.display())?,
            (None, Some(l)) => write!(f, " (line {l})")?,
            (None, None) => {}
        }
        if let Some(field) = &self.field {
            write!(f, ": field `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            source: None,
            line: None,
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

/// Extracts the field name serde reports for unknown or missing keys.
fn field_from_serde(msg: &str) -> Option<String> {
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            return rest.split('`').next().map(str::to_string);
        }
    }
    None
}

pub fn parse_config(text: &str, source: Option<&Path>) -> Result<RunConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let message = msg
            .rsplit_once(" at line ")
            .map(|(head, _)| head.to_string())
            .unwrap_or(msg.clone());
        ConfigError {
            source: source.map(Path::to_path_buf),
            line: Some(e.line()),
            field: field_from_serde(&msg),
            message,
        }
    })
}

/// First line of `text` holding the key of the last path segment.
pub fn locate_key(text: &str, field: &str) -> Option<usize> {
    let key = field.rsplit('.').next()?;
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
}

fn ints(v: &[i64]) -> IntVector {
    IntVector::new(v.to_vec())
}

impl RunConfig {
    /// Semantic checks; errors name the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn bad(field: &str, message: impl Into<String>) -> ConfigError {
            ConfigError::field(field, message)
        }
        if !(1..=6).contains(&self.d) {
            return Err(bad("d", format!("must lie in 1..=6, got {}", self.d)));
        }
        if self.r < 1 {
            return Err(bad("r", format!("must be positive, got {}", self.r)));
        }
        if self.f < 0 {
            return Err(bad("f", format!("must be nonnegative, got {}", self.f)));
        }
        if let Some(t) = self.time_bound {
            if t < 0 {
                return Err(bad("time_bound", format!("must be nonnegative, got {t}")));
            }
        }
        if !(self.b > 0.5 && self.b < 1.0) {
            return Err(bad("b", format!("must lie in (1/2, 1), got {}", self.b)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.b) {
            return Err(bad(
                "epsilon",
                format!("must lie in (0, b), got {}", self.epsilon),
            ));
        }
        if !(self.tau > 0.0 && self.tau < std::f64::consts::PI) {
            return Err(bad("tau", format!("must lie in (0, π), got {}", self.tau)));
        }
        if !(self.plateau > 0.0 && self.plateau < 1.0) {
            return Err(bad(
                "plateau",
                format!("must lie in (0, 1), got {}", self.plateau),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(bad("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iterations == 0 {
            return Err(bad("max_iterations", "must be positive"));
        }
        if self.scan.samples == 0 {
            return Err(bad("scan.samples", "must be positive"));
        }
        if self.scan.freq_bounds.is_empty() {
            return Err(bad("scan.freq_bounds", "must not be empty"));
        }
        if self.scan.freq_bounds.iter().any(|&f| f < 0) {
            return Err(bad("scan.freq_bounds", "entries must be nonnegative"));
        }
        if self.scan.freq_bounds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("scan.freq_bounds", "must be strictly increasing"));
        }
        if !(self.scan.p >= 1.0) {
            return Err(bad(
                "scan.p",
                format!("must be at least 1, got {}", self.scan.p),
            ));
        }
        if self.scan.deltas.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(bad("scan.deltas", "entries must lie in (0, 1]"));
        }
        if let Some(g) = &self.gamma {
            if g.offset.len() != self.d || g.basis.iter().any(|b| b.len() != self.d) {
                return Err(bad(
                    "gamma",
                    format!("vectors must have length d = {}", self.d),
                ));
            }
        }
        if let Some(l) = &self.lattice {
            if l.iter().any(|b| b.len() != self.d) {
                return Err(bad(
                    "lattice",
                    format!("vectors must have length d = {}", self.d),
                ));
            }
        }
        if let Some(p) = &self.potential {
            if p.dim() != self.d {
                return Err(bad(
                    "potential",
                    format!("dimension {} differs from d = {}", p.dim(), self.d),
                ));
            }
        }
        if let Some(u) = &self.initial {
            if u.dim() != self.d {
                return Err(bad(
                    "initial",
                    format!("dimension {} differs from d = {}", u.dim(), self.d),
                ));
            }
        }
        self.gamma_lattice()?;
        self.cutoff_spec()?;
        Ok(())
    }

    pub fn gamma_lattice(&self) -> Result<AffineSublattice, ConfigError> {
        let err = |e: torobs_core::Error| ConfigError::field("gamma", e.to_string());
        match &self.gamma {
            None => AffineSublattice::full(self.d).map_err(err),
            Some(g) => {
                let gens: Vec<IntVector> = g.basis.iter().map(|b| ints(b)).collect();
                let lat = Sublattice::from_generators(self.d, &gens).map_err(err)?;
                AffineSublattice::new(ints(&g.offset), lat).map_err(err)
            }
        }
    }

    pub fn orbit_lattice(&self) -> Result<Sublattice, ConfigError> {
        let gens: Vec<IntVector> = match &self.lattice {
            Some(l) => l.iter().map(|b| ints(b)).collect(),
            None => vec![ints(&vec![1; self.d])],
        };
        let lat = Sublattice::from_generators(self.d, &gens)
            .map_err(|e| ConfigError::field("lattice", e.to_string()))?;
        match lat.is_primitive() {
            Ok(true) => Ok(lat),
            Ok(false) => Err(ConfigError::field(
                "lattice",
                "must generate a primitive sublattice",
            )),
            Err(e) => Err(ConfigError::field("lattice", e.to_string())),
        }
    }

    pub fn potential_spec(&self) -> PotentialSpec {
        self.potential
            .clone()
            .unwrap_or_else(|| PotentialSpec::zero(self.d))
    }

    pub fn cutoff_spec(&self) -> Result<CutoffSpec, ConfigError> {
        match self.cutoff {
            Some(c) => CutoffSpec::new(c.half_width, c.plateau, c.fourier_truncation)
                .map_err(|e| ConfigError::field("cutoff", e.to_string())),
            None => CutoffSpec::automatic(
                self.tau,
                self.plateau,
                self.potential_spec().degree().max(0) as usize,
            )
            .map_err(|e| ConfigError::field("tau", e.to_string())),
        }
    }

    /// Default observed region: `x₁ ∈ [0, π)` for all `t`.
    pub fn chi_spec(&self) -> MultiplierSpec {
        self.chi.clone().unwrap_or_else(|| {
            let mut shape = vec![1, 2];
            shape.extend(std::iter::repeat_n(1, self.d - 1));
            let values = vec![1.0, 0.0];
            MultiplierSpec::Cells { shape, values }
        })
    }

    pub fn initial_data(&self) -> SpectrumField {
        self.initial.clone().unwrap_or_else(|| {
            SpectrumField::mode(
                0,
                IntVector::unit(self.d, 0),
                num_complex::Complex64::new(1.0, 0.0),
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        let mut c = RunConfig::default();
        c.d = 3;
        c.validate().unwrap();
    }

    #[test]
    fn unknown_key_is_located() {
        let text = "{\n  \"d\": 2,\n  \"radius\": 3\n}";
        let err = parse_config(text, None).unwrap_err();
        assert_eq!(err.line, Some(3));
        assert_eq!(err.field.as_deref(), Some("radius"));
    }

    #[test]
    fn negative_r_names_field() {
        let text = "{\n  \"r\": -1\n}";
        let cfg = parse_config(text, None).unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field.as_deref(), Some("r"));
        assert_eq!(locate_key(text, "r"), Some(2));
    }

    #[test]
    fn nested_scan_keys_are_checked() {
        let err = parse_config("{\"scan\": {\"kind\": \"ui\", \"bogus\": 1}}", None).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("bogus"));
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(parse_config(&text, None).unwrap(), c);
    }

    #[test]
    fn non_primitive_lattice_rejected() {
        let c = RunConfig {
            d: 2,
            lattice: Some(vec![vec![2, 2]]),
            ..RunConfig::default()
        };
        assert_eq!(
            c.orbit_lattice().unwrap_err().field.as_deref(),
            Some("lattice")
        );
    }
}
