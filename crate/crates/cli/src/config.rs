//! TOML run configuration and object spec files.

use std::path::{Path, PathBuf};

use fiocalc_core::classes::{AmplitudeSpec, DecayFlags, OrderPair, OrderTriple, PhaseProfile, PhaseSpec, SamplePlan, SymbolSpec};
use fiocalc_core::gridquant::Grid;
use fiocalc_core::oscoracle::QuadPlan;
use fiocalc_core::smoothlab::DispersionSpec;
use fiocalc_core::{parse, report};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub max_order: usize,
    pub cap: f64,
    pub sample: SamplePlan,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            max_order: fiocalc_core::classes::DEFAULT_MAX_ORDER,
            cap: fiocalc_core::classes::DEFAULT_CAP,
            sample: SamplePlan::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Amplitude,
    Symbol,
    Phase,
    Dispersion,
}

/// One amplitude, symbol, phase or dispersion relation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub kind: Option<ObjectKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<String>,
    pub expr: Option<String>,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orders: Vec<f64>,
    /// Blocks with improving decay: any of "x", "y", "xi".
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub improving: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<PhaseProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
}

fn one() -> usize {
    1
}

/// Either an inline table or a path to a spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectRef {
    File(PathBuf),
    Inline(ObjectSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandConfig {
    pub kind: String,
    #[serde(default = "three")]
    pub order: usize,
    #[serde(default = "yes")]
    pub validate: bool,
}

fn three() -> usize {
    3
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// "c_tp", "c_pt", "t", "c_tp_reduce" or "c_psido".
    pub target: String,
    /// `[x, z, ξ]` for c_tp/c_pt, `[x, ξ]` for the reductions, `[x]` for t.
    pub points: Vec<Vec<f64>>,
    /// Input function for the "t" target, in `x1`.
    pub u: Option<String>,
    /// When set, partial sums up to this order are compared with the oracle.
    pub compare_order: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Psido,
    Fio,
    Amplitude,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizeConfig {
    pub operator: OperatorKind,
    /// Input field in the x variables; when absent, seeded Gaussians are used.
    pub input: Option<String>,
    #[serde(default = "four")]
    pub count: usize,
    #[serde(default)]
    pub compare_dense: bool,
}

fn four() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpnormConfig {
    pub operator: OperatorKind,
    /// `(s1, s2)` for the weighted sandwich of an amplitude operator.
    pub weights: Option<[f64; 2]>,
    /// Grid sizes to sweep; defaults to the configured grid.
    #[serde(default)]
    pub points: Vec<usize>,
    #[serde(default = "iters")]
    pub iters: usize,
    #[serde(default)]
    pub th25: bool,
}

fn iters() -> usize {
    fiocalc_core::gridquant::DEFAULT_ITERS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    #[serde(default)]
    pub k: u32,
    pub s: f64,
    pub t_max: f64,
    /// Defaults to `8T/Δx`, rounded up to even.
    pub nt: Option<usize>,
    /// "gaussian75" or "seeded".
    #[serde(default = "family")]
    pub family: String,
    #[serde(default = "twenty")]
    pub count: usize,
    /// When set, the commutation residual at this time is reported per datum.
    pub commutator_t: Option<f64>,
}

fn family() -> String {
    "gaussian75".into()
}

fn twenty() -> usize {
    20
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub grid: Option<Grid>,
    #[serde(default)]
    pub plan: QuadPlan,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub amplitude: Option<ObjectRef>,
    pub symbol: Option<ObjectRef>,
    pub phase: Option<ObjectRef>,
    pub dispersion: Option<ObjectRef>,
    pub expand: Option<ExpandConfig>,
    pub oracle: Option<OracleConfig>,
    pub quantize: Option<QuantizeConfig>,
    pub opnorm: Option<OpnormConfig>,
    pub smoothing: Option<SmoothingConfig>,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn warn_schema(found: Option<&str>, source: &Path) {
    if found.is_some() {
        if let Some(w) = report::schema_warning(found) {
            eprintln!("warning: {}: {w}", source.display());
        }
    }
}

pub fn load_object(path: &Path) -> Result<ObjectSpec, Failure> {
    let spec: ObjectSpec = toml::from_str(&read(path)?).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    warn_schema(spec.schema_version.as_deref(), path);
    Ok(spec)
}

impl RunConfig {
    /// Parses a config file and inlines every referenced spec file, relative
    /// to the config's directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let mut cfg: RunConfig =
            toml::from_str(&read(path)?).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        warn_schema(cfg.schema_version.as_deref(), path);
        let base = path.parent().unwrap_or(Path::new("."));
        for slot in [&mut cfg.amplitude, &mut cfg.symbol, &mut cfg.phase, &mut cfg.dispersion] {
            if let Some(ObjectRef::File(f)) = slot {
                let full = base.join(&*f);
                *slot = Some(ObjectRef::Inline(load_object(&full)?));
            }
        }
        Ok(cfg)
    }

    fn object(&self, slot: &Option<ObjectRef>, name: &str) -> Result<ObjectSpec, Failure> {
        match slot {
            Some(ObjectRef::Inline(o)) => Ok(o.clone()),
            Some(ObjectRef::File(f)) => load_object(f),
            None => Err(Failure::Config(format!("missing [{name}] section"))),
        }
    }

    pub fn amplitude(&self) -> Result<AmplitudeSpec, Failure> {
        self.object(&self.amplitude, "amplitude")?.amplitude()
    }

    pub fn symbol(&self) -> Result<SymbolSpec, Failure> {
        self.object(&self.symbol, "symbol")?.symbol()
    }

    pub fn phase(&self) -> Result<PhaseSpec, Failure> {
        self.object(&self.phase, "phase")?.phase()
    }

    pub fn dispersion(&self) -> Result<DispersionSpec, Failure> {
        self.object(&self.dispersion, "dispersion")?.dispersion()
    }

    pub fn grid(&self) -> Result<Grid, Failure> {
        let g = self.grid.ok_or_else(|| Failure::Config("missing [grid] section".into()))?;
        Grid::new(g.dim, g.points, g.half_width).map_err(|e| Failure::Config(e.to_string()))
    }
}

fn flags(names: &[String]) -> Result<DecayFlags, Failure> {
    let mut f = DecayFlags::NONE;
    for n in names {
        match n.as_str() {
            "x" => f.improving_x = true,
            "y" => f.improving_y = true,
            "xi" => f.improving_xi = true,
            other => return Err(Failure::Config(format!("unknown improving block {other:?}"))),
        }
    }
    Ok(f)
}

fn cfg_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

impl ObjectSpec {
    fn text(&self) -> Result<&str, Failure> {
        self.expr.as_deref().ok_or_else(|| Failure::Config("object has no expr".into()))
    }

    fn parsed(&self, s: &str) -> Result<fiocalc_core::Expr, Failure> {
        parse(s, self.dim).map_err(cfg_err)
    }

    pub fn amplitude(&self) -> Result<AmplitudeSpec, Failure> {
        let [m1, m2, m3] = <[f64; 3]>::try_from(self.orders.as_slice())
            .map_err(|_| Failure::Config("amplitude orders must have three entries".into()))?;
        AmplitudeSpec::new(self.parsed(self.text()?)?, self.dim, OrderTriple::new(m1, m2, m3), flags(&self.improving)?)
            .map_err(cfg_err)
    }

    pub fn symbol(&self) -> Result<SymbolSpec, Failure> {
        let [t1, t2] = <[f64; 2]>::try_from(self.orders.as_slice())
            .map_err(|_| Failure::Config("symbol orders must have two entries".into()))?;
        SymbolSpec::new(self.parsed(self.text()?)?, self.dim, OrderPair::new(t1, t2), flags(&self.improving)?).map_err(cfg_err)
    }

    pub fn phase(&self) -> Result<PhaseSpec, Failure> {
        let profile = self.profile.ok_or_else(|| Failure::Config("phase needs a profile".into()))?;
        PhaseSpec::new(self.parsed(self.text()?)?, self.dim, profile).map_err(cfg_err)
    }

    pub fn dispersion(&self) -> Result<DispersionSpec, Failure> {
        if let Some(f) = &self.fixture {
            return DispersionSpec::fixture(f).map_err(cfg_err);
        }
        let a = self.parsed(self.text()?)?;
        let a1 = self.parsed(self.a1.as_deref().ok_or_else(|| Failure::Config("dispersion needs a1".into()))?)?;
        let a0 = self.parsed(self.a0.as_deref().ok_or_else(|| Failure::Config("dispersion needs a0".into()))?)?;
        DispersionSpec::new("custom", self.dim, a, a1, a0, self.rho0.unwrap_or(1.0)).map_err(cfg_err)
    }
}
