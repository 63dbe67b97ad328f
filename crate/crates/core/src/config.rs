//! Run configuration: a TOML file with sections `[model]`, `[lattice]`,
//! `[weight]`, `[experiment]`, `[tolerances]` and `[output]`.
//!
//! ```toml
//! rng_seed = 7
//!
//! [model]
//! kind = "qi_wu_zhang"
//! u = 1.0
//!
//! [lattice]
//! l1 = 32
//! l2 = 32
//! n_orb = 2
//!
//! [experiment]
//! kind = "conductance"
//!
//! [tolerances]
//! gap = 1e-3
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Lattice, Site};
use crate::models::{ModelKind, ModelSpec};
use crate::weightfn::WeightParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Conductance,
    Equivalence,
    ScanEps,
    Bloch,
    Pump,
    VerifyAlgebra,
    Weight,
    LgaInvariance,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Conductance => "conductance",
            Experiment::Equivalence => "equivalence",
            Experiment::ScanEps => "scan-eps",
            Experiment::Bloch => "bloch",
            Experiment::Pump => "pump",
            Experiment::VerifyAlgebra => "verify-algebra",
            Experiment::Weight => "weight",
            Experiment::LgaInvariance => "lga-invariance",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Atomic,
    QiWuZhang,
    Haldane,
    Hofstadter,
    InteractingCluster,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default)]
    pub disorder: f64,
    /// Disorder seed; the run seed is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub fermi_level: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub l1: usize,
    pub l2: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_n_orb")]
    pub n_orb: usize,
    /// Column and row of the origin; the center when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[usize; 2]>,
}

fn default_boundary() -> Boundary {
    Boundary::Open
}
fn default_n_orb() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    /// Free fermions for quadratic models, many-body otherwise.
    Auto,
    Free,
    ManyBody,
}

/// Weight-function parameters; `g` defaults to `0.9` times the measured gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default = "default_gap_fraction")]
    pub gap_fraction: f64,
    #[serde(default = "default_order")]
    pub smoothness_order: usize,
    #[serde(default = "default_t_max_g")]
    pub t_max_g: f64,
    #[serde(default = "default_ds_g")]
    pub ds_g: f64,
    #[serde(default = "default_one")]
    pub scale: f64,
}

impl Default for WeightSection {
    fn default() -> Self {
        WeightSection {
            g: None,
            gap_fraction: default_gap_fraction(),
            smoothness_order: default_order(),
            t_max_g: default_t_max_g(),
            ds_g: default_ds_g(),
            scale: 1.0,
        }
    }
}

fn default_gap_fraction() -> f64 {
    0.9
}
fn default_order() -> usize {
    6
}
fn default_t_max_g() -> f64 {
    crate::weightfn::DEFAULT_T_G
}
fn default_ds_g() -> f64 {
    0.02
}
fn default_one() -> f64 {
    1.0
}

impl WeightSection {
    pub fn params(&self, gap: f64) -> WeightParams {
        WeightParams {
            g: self.g.unwrap_or(self.gap_fraction * gap),
            smoothness_order: self.smoothness_order,
            t_max_g: self.t_max_g,
            ds_g: self.ds_g,
            scale: self.scale,
        }
    }
}

/// Parameters of every experiment; each experiment reads the ones it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Must agree with the experiment named on the command line when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Experiment>,
    #[serde(default = "default_engine")]
    pub engine: EngineChoice,
    /// Switch-function origin relative to the lattice origin.
    #[serde(default)]
    pub origin: [i64; 2],
    /// Origin shifts compared against `origin`.
    #[serde(default)]
    pub shifts: Vec<[i64; 2]>,
    /// Smoothness orders of alternative weight functions for the
    /// W-independence check.
    #[serde(default)]
    pub alt_smoothness: Vec<usize>,
    /// Coefficients `c` of the parent Hamiltonians `H + c (H - E0)^2`.
    #[serde(default)]
    pub parent_coefficients: Vec<f64>,
    /// Brillouin-zone grid of the Chern oracle; 0 disables it.
    #[serde(default = "default_chern_grid")]
    pub chern_grid: usize,
    /// Box radius of the position conductivity.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Increments beyond this index must not grow.
    #[serde(default = "default_monotone_from")]
    pub monotone_from: usize,
    /// `eps` values as fractions of the gap.
    #[serde(default = "default_eps_fractions")]
    pub eps_fractions: Vec<f64>,
    /// Window radius of the current response.
    #[serde(default = "default_radius")]
    pub radius: usize,
    /// Half-width of the stripe.
    #[serde(default = "default_stripe_k")]
    pub stripe_k: usize,
    /// Columns excluded next to each side edge.
    #[serde(default = "default_margin")]
    pub margin: i64,
    /// `eps` of the contrast state, as a fraction of the gap.
    #[serde(default = "default_contrast_eps")]
    pub contrast_eps_fraction: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_etas")]
    pub etas: Vec<f64>,
    /// Random local samples for residuals and property checks.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_strength")]
    pub strength: f64,
    /// Number of random circuits.
    #[serde(default = "default_circuits")]
    pub circuits: usize,
    #[serde(default = "default_window_margin")]
    pub window_margin: i64,
    #[serde(default = "default_edge_margin")]
    pub edge_margin: i64,
}

fn default_engine() -> EngineChoice {
    EngineChoice::Auto
}
fn default_chern_grid() -> usize {
    64
}
fn default_k() -> usize {
    6
}
fn default_monotone_from() -> usize {
    2
}
fn default_eps_fractions() -> Vec<f64> {
    vec![0.005, 0.01, 0.02, 0.04]
}
fn default_radius() -> usize {
    10
}
fn default_stripe_k() -> usize {
    8
}
fn default_margin() -> i64 {
    4
}
fn default_contrast_eps() -> f64 {
    0.01
}
fn default_eps() -> f64 {
    0.05
}
fn default_etas() -> Vec<f64> {
    vec![0.1, 0.05]
}
fn default_samples() -> usize {
    24
}
fn default_depth() -> usize {
    2
}
fn default_strength() -> f64 {
    0.8
}
fn default_circuits() -> usize {
    2
}
fn default_window_margin() -> i64 {
    4
}
fn default_edge_margin() -> i64 {
    8
}

impl Default for ExperimentSection {
    fn default() -> Self {
        toml::from_str("").expect("every experiment field has a default")
    }
}

/// Acceptance tolerances. `gap` is required: the smallest spectral gap a run
/// accepts before reporting the system as gapless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub gap: f64,
    #[serde(default = "d_degeneracy")]
    pub degeneracy: f64,
    #[serde(default = "d_increment")]
    pub increment: f64,
    #[serde(default = "d_quantization")]
    pub quantization: f64,
    #[serde(default = "d_resummation")]
    pub resummation: f64,
    #[serde(default = "d_free_image")]
    pub free_image: f64,
    #[serde(default = "d_origin")]
    pub origin: f64,
    #[serde(default = "d_origin_mb")]
    pub origin_many_body: f64,
    #[serde(default = "d_weight_independence")]
    pub weight_independence: f64,
    #[serde(default = "d_parent_independence")]
    pub parent_independence: f64,
    #[serde(default = "d_equivalence")]
    pub equivalence: f64,
    #[serde(default = "d_linear_response")]
    pub linear_response: f64,
    #[serde(default = "d_min_exponent")]
    pub min_exponent: f64,
    #[serde(default = "d_stripe")]
    pub stripe: f64,
    #[serde(default = "d_contrast")]
    pub contrast: f64,
    #[serde(default = "d_exact_residual")]
    pub exact_residual: f64,
    #[serde(default = "d_halving_ratio")]
    pub halving_ratio: f64,
    #[serde(default = "d_pump")]
    pub pump: f64,
    #[serde(default = "d_fourier")]
    pub fourier: f64,
    #[serde(default = "d_lga")]
    pub lga: f64,
    #[serde(default = "d_gauge")]
    pub gauge: f64,
}

fn d_degeneracy() -> f64 {
    1e-8
}
fn d_increment() -> f64 {
    1e-6
}
fn d_quantization() -> f64 {
    1e-3
}
fn d_resummation() -> f64 {
    1e-9
}
fn d_free_image() -> f64 {
    1e-9
}
fn d_origin() -> f64 {
    1e-6
}
fn d_origin_mb() -> f64 {
    1e-9
}
fn d_weight_independence() -> f64 {
    1e-6
}
fn d_parent_independence() -> f64 {
    1e-8
}
fn d_equivalence() -> f64 {
    1e-2
}
fn d_linear_response() -> f64 {
    5e-3
}
fn d_min_exponent() -> f64 {
    3.0
}
fn d_stripe() -> f64 {
    1e-8
}
fn d_contrast() -> f64 {
    0.1
}
fn d_exact_residual() -> f64 {
    1e-9
}
fn d_halving_ratio() -> f64 {
    4.0
}
fn d_pump() -> f64 {
    1e-6
}
fn d_fourier() -> f64 {
    1e-6
}
fn d_lga() -> f64 {
    1e-6
}
fn d_gauge() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub plots: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir(), plots: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub rng_seed: u64,
    pub model: ModelSection,
    pub lattice: LatticeSection,
    #[serde(default)]
    pub weight: WeightSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSection,
}

/// 1-based line of `key = ...` inside `[section]`, if present.
fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn at_line(src: &str, section: &str, key: &str) -> String {
    match locate(src, section, key) {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

impl RunConfig {
    /// Parses and validates a config. Errors name the offending key and,
    /// where it appears in the text, its line.
    pub fn from_toml(src: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate(src)?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let src =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self, src: &str) -> Result<()> {
        self.model_spec().map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })?;
        let t = &self.tolerances;
        if !(t.gap > 0.0) {
            return Err(Error::Config(format!("tolerances.gap must be positive{}", at_line(src, "tolerances", "gap"))));
        }
        if self.lattice.l1 == 0 || self.lattice.l2 == 0 || self.lattice.n_orb == 0 {
            return Err(Error::Config("lattice.l1, lattice.l2 and lattice.n_orb must be positive".into()));
        }
        if self.experiment.eps_fractions.is_empty() {
            return Err(Error::Config(format!(
                "experiment.eps_fractions must not be empty{}",
                at_line(src, "experiment", "eps_fractions")
            )));
        }
        if self.experiment.etas.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config(format!(
                "experiment.etas must be positive{}",
                at_line(src, "experiment", "etas")
            )));
        }
        if self.model.disorder < 0.0 {
            return Err(Error::Config(format!(
                "model.disorder must be nonnegative{}",
                at_line(src, "model", "disorder")
            )));
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::Config(format!("model.{key} is required for model kind {:?}", m.kind)))
        };
        let needi = |v: Option<i64>, key: &str| {
            v.ok_or_else(|| Error::Config(format!("model.{key} is required for model kind {:?}", m.kind)))
        };
        let allowed: &[&str] = match m.kind {
            ModelName::Atomic => &[],
            ModelName::QiWuZhang => &["u"],
            ModelName::Haldane => &["t1", "t2", "phi", "m"],
            ModelName::Hofstadter => &["p", "q"],
            ModelName::InteractingCluster => &["t", "v", "mu"],
        };
        let given = [
            ("u", m.u.is_some()),
            ("t1", m.t1.is_some()),
            ("t2", m.t2.is_some()),
            ("phi", m.phi.is_some()),
            ("m", m.m.is_some()),
            ("p", m.p.is_some()),
            ("q", m.q.is_some()),
            ("t", m.t.is_some()),
            ("v", m.v.is_some()),
            ("mu", m.mu.is_some()),
        ];
        if let Some((k, _)) = given.iter().find(|(k, g)| *g && !allowed.contains(k)) {
            return Err(Error::Config(format!("model.{k} does not apply to model kind {:?}", m.kind)));
        }
        let kind = match m.kind {
            ModelName::Atomic => ModelKind::Atomic,
            ModelName::QiWuZhang => ModelKind::QiWuZhang { u: need(m.u, "u")? },
            ModelName::Haldane => ModelKind::Haldane {
                t1: need(m.t1, "t1")?,
                t2: need(m.t2, "t2")?,
                phi: need(m.phi, "phi")?,
                m: need(m.m, "m")?,
            },
            ModelName::Hofstadter => ModelKind::Hofstadter { p: needi(m.p, "p")?, q: needi(m.q, "q")? },
            ModelName::InteractingCluster => {
                ModelKind::InteractingCluster { t: need(m.t, "t")?, v: need(m.v, "v")?, mu: need(m.mu, "mu")? }
            }
        };
        Ok(ModelSpec::new(kind)
            .with_disorder(m.disorder, m.seed.unwrap_or(self.rng_seed))
            .with_fermi_level(m.fermi_level))
    }

    pub fn lattice(&self) -> Result<Lattice> {
        let l = &self.lattice;
        match l.origin {
            None => Lattice::new(l.l1, l.l2, l.boundary, l.n_orb),
            Some([a, b]) => Lattice::with_origin(l.l1, l.l2, l.boundary, l.n_orb, (a, b)),
        }
    }

    pub fn origin(&self) -> Site {
        Site::new(self.experiment.origin[0], self.experiment.origin[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
kind = "qi_wu_zhang"
u = 1.0

[lattice]
l1 = 8
l2 = 8
n_orb = 2

[tolerances]
gap = 1e-3
"#;

    #[test]
    fn minimal_config_round_trips() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.experiment.eps_fractions, vec![0.005, 0.01, 0.02, 0.04]);
        assert_eq!(c.tolerances.degeneracy, 1e-8);
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.model_spec().unwrap().kind, ModelKind::QiWuZhang { u: 1.0 });
    }

    #[test]
    fn missing_gap_tolerance_names_the_key() {
        let src = MINIMAL.replace("gap = 1e-3", "degeneracy = 1e-8");
        let e = RunConfig::from_toml(&src).unwrap_err().to_string();
        assert!(e.contains("gap"), "{e}");
        assert!(e.contains("line"), "{e}");
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let src = MINIMAL.replace("u = 1.0", "u = 1.0\nbogus = 2");
        let e = RunConfig::from_toml(&src).unwrap_err().to_string();
        assert!(e.contains("bogus") && e.contains("line 5"), "{e}");
    }

    #[test]
    fn model_parameters_are_checked() {
        let e = RunConfig::from_toml(&MINIMAL.replace("u = 1.0", "")).unwrap_err().to_string();
        assert!(e.contains("model.u"), "{e}");
        let e = RunConfig::from_toml(&MINIMAL.replace("u = 1.0", "u = 1.0\nt2 = 0.1")).unwrap_err().to_string();
        assert!(e.contains("model.t2"), "{e}");
    }

    #[test]
    fn experiment_names_are_kebab_case() {
        let src = format!("{MINIMAL}\n[experiment]\nkind = \"scan-eps\"\n");
        let c = RunConfig::from_toml(&src).unwrap();
        assert_eq!(c.experiment.kind, Some(Experiment::ScanEps));
    }
}
