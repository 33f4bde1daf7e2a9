//! Command-line definitions. Every argument struct is also (de)serializable so
//! a JSON config file can override any flag by name.

use clap::{Args, Parser, Subcommand, ValueEnum};
use halfspace::flow::ScheduleSpec;
use halfspace::BoundaryKind;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const OUTPUT_DIR_ENV: &str = "HALFSPACE_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "halfspace", version, about = "Half-space φ⁴ flow toolkit: kernels, propagators, forests, lemma sweeps and one-loop flows")]
pub struct Cli {
    /// JSON file whose keys override the flags of the chosen subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory receiving JSON and CSV files.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Format written to stdout; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a heat kernel.
    Kernel(KernelArgs),
    /// Evaluate regularized propagators on a (p, z, z') grid.
    Prop(PropArgs),
    /// Enumerate, reduce, merge or validate trees and forests.
    #[command(subcommand)]
    Forest(ForestCommand),
    /// Run a seeded inequality sweep.
    Lemma(LemmaArgs),
    /// One-loop flow experiments.
    #[command(subcommand)]
    Flow(FlowCommand),
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum BcName {
    Bulk,
    Dirichlet,
    Neumann,
    Robin,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct BcArgs {
    #[arg(long, value_enum, default_value = "neumann")]
    pub bc: BcName,
    /// Robin parameter in `∂φ = cφ`.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

impl BcArgs {
    pub fn kind(&self) -> halfspace::Result<BoundaryKind> {
        Ok(match self.bc {
            BcName::Bulk => BoundaryKind::Bulk,
            BcName::Dirichlet => BoundaryKind::Dirichlet,
            BcName::Neumann => BoundaryKind::Neumann,
            BcName::Robin => BoundaryKind::robin(self.c)?,
        })
    }
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct KernelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub bc: BcArgs,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub z: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub zp: f64,
    /// Evaluate the surface part `p_★ − p_B` instead of `p_★`.
    #[arg(long)]
    pub surface: bool,
    /// Cross-check the Robin image term against quadrature.
    #[arg(long)]
    pub check: bool,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PartName {
    Full,
    Bulk,
    Surface,
}

impl From<PartName> for halfspace::Part {
    fn from(p: PartName) -> Self {
        match p {
            PartName::Full => halfspace::Part::Full,
            PartName::Bulk => halfspace::Part::Bulk,
            PartName::Surface => halfspace::Part::Surface,
        }
    }
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PropMethod {
    /// Proper-time integral between the cutoffs.
    Flow,
    /// Closed form without cutoffs.
    Closed,
    /// `∂_Λ` of the flowing propagator.
    Derivative,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct PropArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub bc: BcArgs,
    #[arg(long = "m", default_value_t = 1.0)]
    pub m: f64,
    /// Momentum magnitudes (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub z: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub zp: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e3)]
    pub lambda0: f64,
    #[arg(long, value_enum, default_value = "full")]
    pub part: PartName,
    #[arg(long, value_enum, default_value = "flow")]
    pub method: PropMethod,
}

#[derive(Subcommand, Debug)]
pub enum ForestCommand {
    /// List trees or forests of a family.
    Enumerate(EnumerateArgs),
    /// Cut two legs of a forest and prune.
    Reduce(ReduceArgs),
    /// Join a bulk tree to a forest.
    Merge(MergeArgs),
    /// Check membership of a tree or forest.
    Validate(ValidateArgs),
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Surface,
    Bulk,
    Rooted,
    Forest,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct EnumerateArgs {
    #[arg(long, value_enum, default_value = "surface")]
    pub family: FamilyName,
    #[arg(long)]
    pub s: u32,
    #[arg(long)]
    pub l: u32,
    #[arg(long, default_value_t = 8)]
    pub max_internal: usize,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct ReduceArgs {
    /// Forest JSON, `-` for stdin.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub a: u32,
    #[arg(long)]
    pub b: u32,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum MergeName {
    A,
    B,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct MergeArgs {
    #[arg(long, value_enum)]
    pub mode: MergeName,
    /// Bulk tree JSON.
    #[arg(long)]
    pub tree: PathBuf,
    /// Forest JSON.
    #[arg(long)]
    pub forest: PathBuf,
    #[arg(long)]
    pub t_label: u32,
    #[arg(long)]
    pub w_label: u32,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct ValidateArgs {
    /// Tree or forest JSON, `-` for stdin.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
pub enum LemmaChoice {
    #[value(name = "reduction")]
    #[serde(rename = "reduction")]
    Reduction,
    #[value(name = "ff-fusion")]
    #[serde(rename = "ff-fusion")]
    FfFusion,
    #[value(name = "tf-fusion")]
    #[serde(rename = "tf-fusion")]
    TfFusion,
    #[value(name = "chain")]
    #[serde(rename = "chain")]
    Chain,
    #[value(name = "chain-forest")]
    #[serde(rename = "chain-forest")]
    ChainForest,
    /// All three test-function bounds.
    #[value(name = "testfn")]
    #[serde(rename = "testfn")]
    Testfn,
    #[value(name = "testfn-6")]
    #[serde(rename = "testfn-6")]
    Testfn6,
    #[value(name = "testfn-7")]
    #[serde(rename = "testfn-7")]
    Testfn7,
    #[value(name = "testfn-8")]
    #[serde(rename = "testfn-8")]
    Testfn8,
    #[value(name = "monotonicity")]
    #[serde(rename = "monotonicity")]
    Monotonicity,
}

impl LemmaChoice {
    pub fn kinds(self) -> Vec<halfspace::weights::LemmaKind> {
        use halfspace::weights::LemmaKind as K;
        match self {
            LemmaChoice::Reduction => vec![K::Reduction],
            LemmaChoice::FfFusion => vec![K::FfFusion],
            LemmaChoice::TfFusion => vec![K::TfFusion],
            LemmaChoice::Chain => vec![K::Chain],
            LemmaChoice::ChainForest => vec![K::ChainForest],
            LemmaChoice::Testfn => vec![K::Testfn6, K::Testfn7, K::Testfn8],
            LemmaChoice::Testfn6 => vec![K::Testfn6],
            LemmaChoice::Testfn7 => vec![K::Testfn7],
            LemmaChoice::Testfn8 => vec![K::Testfn8],
            LemmaChoice::Monotonicity => vec![K::Monotonicity],
        }
    }
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct LemmaArgs {
    #[arg(long, value_enum)]
    pub lemma: LemmaChoice,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// External points of the reduction sweep.
    #[arg(long, default_value_t = 1)]
    pub s: u32,
    /// Loop order on the right-hand side.
    #[arg(long, default_value_t = 1)]
    pub l: u32,
    /// Internal-vertex cap per tree in global sums.
    #[arg(long, default_value_t = 2)]
    pub cap: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub u_rel_tol: f64,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct ScheduleArgs {
    /// RK4 steps per decade of Λ.
    #[arg(long, default_value_t = ScheduleSpec::default().steps_per_decade)]
    pub steps_per_decade: usize,
    /// Smallest positive checkpoint in units of the mass.
    #[arg(long, default_value_t = ScheduleSpec::default().floor_ratio)]
    pub floor_ratio: f64,
}

impl ScheduleArgs {
    pub fn spec(&self) -> ScheduleSpec {
        ScheduleSpec { steps_per_decade: self.steps_per_decade, floor_ratio: self.floor_ratio }
    }
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct FlowCommon {
    /// Coupling λ.
    #[arg(long, default_value_t = 1.0)]
    pub coupling: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
}

/// Leg kernel `(τ, y)` written `tau:y` on the command line.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq)]
pub struct Leg(pub f64, pub f64);

pub fn parse_leg(s: &str) -> Result<Leg, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected tau:y, got {s}"))?;
    let tau = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let y = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(Leg(tau, y))
}

#[derive(Subcommand, Debug)]
pub enum FlowCommand {
    /// One-loop surface two-point flow with BPHZ conditions at Λ = 0.
    Tadpole(TadpoleArgs),
    /// One-loop four-point fish diagram at zero external momenta.
    Fourpoint(FourpointArgs),
    /// Robin surface two-point object as c grows, against Dirichlet.
    RobinLimit(RobinLimitArgs),
    /// Boundary limits of the amputated two-point function.
    Amputation(AmputationArgs),
    /// Bulk against surface scaling exponents.
    PowerCounting(PowerCountingArgs),
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct TadpoleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: FlowCommon,
    #[command(flatten)]
    #[serde(flatten)]
    pub bc: BcArgs,
    #[arg(long, default_value_t = 50.0)]
    pub lambda0: f64,
    /// Number of z nodes of the profile grid on [0, 10/m].
    #[arg(long, default_value_t = 101)]
    pub grid_nodes: usize,
    /// Dirichlet only: kernels `tau:y` the object is folded with.
    #[arg(long, value_delimiter = ',', value_parser = parse_leg, default_value = "1:0.5,0.5:1")]
    pub kernels: Vec<Leg>,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct FourpointArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: FlowCommon,
    #[command(flatten)]
    #[serde(flatten)]
    pub bc: BcArgs,
    #[arg(long, default_value_t = 40.0)]
    pub lambda0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Four leg kernels `tau:y`.
    #[arg(long, value_delimiter = ',', value_parser = parse_leg, default_value = "0.5:0.5,0.7:0.8,0.6:0.3,0.9:1")]
    pub kernels: Vec<Leg>,
    /// Points z at which the relevant moment c(z) is reported.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2")]
    pub z: Vec<f64>,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct RobinLimitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: FlowCommon,
    #[arg(long, default_value_t = 10.0)]
    pub lambda0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
    pub c_list: Vec<f64>,
    /// Two leg kernels `tau:y`.
    #[arg(long, value_delimiter = ',', value_parser = parse_leg, default_value = "1:0.5,0.5:1")]
    pub kernels: Vec<Leg>,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct AmputationArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: FlowCommon,
    #[arg(long, default_value_t = 50.0)]
    pub lambda0: f64,
    /// Robin parameter of both the tadpole and the propagator.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Momentum magnitude of the propagator.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 0.3)]
    pub y1: f64,
    #[arg(long, default_value_t = 0.7)]
    pub y2: f64,
    /// Replace the computed e by zero.
    #[arg(long)]
    pub force_e_zero: bool,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct PowerCountingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: FlowCommon,
    #[command(flatten)]
    #[serde(flatten)]
    pub bc: BcArgs,
    /// Fit window [lo, hi] in units of the mass.
    #[arg(long, value_delimiter = ',', default_value = "2,20")]
    pub range: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    pub points: usize,
}
