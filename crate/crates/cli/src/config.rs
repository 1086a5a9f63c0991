//! Run configuration: flat `key = value` text with `[section]` headers.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use ini::Ini;
use singular_core::measure::DensityExpr;
use singular_core::{
    build_grid, Domain, FieldRole, Kernel, LerayLionsSpec, MatrixField, Principal, ProblemSpec,
    RadonMeasure, Scheme, SolveParams,
};

/// Printed by `--help`.
pub const KEYS_HELP: &str = "\
CONFIG FILE
  Flat `key = value` lines under [problem], [solver], [analysis] and
  [sweep] headers. Lines starting with # or ; are comments. Unknown
  sections and keys are errors.

  [problem]
    domain           unit-square | unit-disk | unit-ball-radial(N)   (unit-square)
    resolution       grid resolution, h = 1/resolution                (64)
    gamma            singularity exponent > 0                         (0.5)
    n                regularization index                             (256)
    datum            constant c | power coeff exponent |
                     indicator radius value                           (constant 1)
    operator         laplacian | matrix | p-laplacian                 (laplacian)
    a11, a12, a22    constant coefficient matrix for `matrix`         (1, 0, 1)
    p                exponent for `p-laplacian`                       (2)
    measure_file     measure file, relative to the config file
    atom             x,y,mass (repeatable)
    measure_density  density expression of the measure
    measure_r        declared summability of the density (`inf` allowed)
    kernel           tent | box                                       (tent)

  [solver]
    damping, outer_tol, max_outer, inner_tol, stabilization_tol
    schedule         comma-separated increasing n values
    scheme           picard | newton                                  (picard)
    sequence         true: solve along the schedule                   (false)

  [analysis]
    reports          comma-separated: sandwich, lower-bound,
                     truncation-energy, residual-decay, boundary-layer,
                     hopf-lax, regularity
    compact_delta    interior subset d(x) >= delta                    (0.25)
    k_levels         number of geometric levels from 1 to sup u       (8)
    layer_widths     comma-separated layer widths      (0.125,0.0625,0.03125,0.015625)
    regularity       `m r gamma` (repeatable), for the regularity report
    resolutions      increasing radial resolutions for regularity     (25600,51200,102400)

  [sweep]
    gamma, p, n, resolution, mass   comma-separated values; the sweep
                     runs the Cartesian product. `mass` scales the atoms.
";

const PROBLEM_KEYS: &[&str] = &[
    "domain",
    "resolution",
    "gamma",
    "n",
    "datum",
    "operator",
    "a11",
    "a12",
    "a22",
    "p",
    "measure_file",
    "atom",
    "measure_density",
    "measure_r",
    "kernel",
];
const SOLVER_KEYS: &[&str] = &[
    "damping",
    "outer_tol",
    "max_outer",
    "inner_tol",
    "stabilization_tol",
    "schedule",
    "scheme",
    "sequence",
];
const ANALYSIS_KEYS: &[&str] = &[
    "reports",
    "compact_delta",
    "k_levels",
    "layer_widths",
    "regularity",
    "resolutions",
];
const SWEEP_KEYS: &[&str] = &["gamma", "p", "n", "resolution", "mass"];
const REPEATABLE: &[&str] = &["atom", "regularity"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Laplacian,
    Matrix,
    PLaplacian,
}

/// Everything needed to build a [`ProblemSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub domain: Domain,
    pub resolution: usize,
    pub gamma: f64,
    pub n: u64,
    pub datum: DensityExpr,
    pub operator: OperatorKind,
    pub matrix: [f64; 3],
    pub p: f64,
    /// Measure file contents (`atom`, `density`, `r` lines).
    pub measure_text: String,
    pub mass_scale: f64,
    pub kernel: Kernel,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            domain: Domain::UnitSquare,
            resolution: 64,
            gamma: 0.5,
            n: 256,
            datum: DensityExpr::Constant(1.0),
            operator: OperatorKind::Laplacian,
            matrix: [1.0, 0.0, 1.0],
            p: 2.0,
            measure_text: String::new(),
            mass_scale: 1.0,
            kernel: Kernel::Tent,
        }
    }
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemSpec> {
        let grid = Arc::new(build_grid(self.domain, self.resolution)?);
        let f = self.datum.sample(&grid, FieldRole::Datum)?;
        let mut mu = RadonMeasure::parse(&self.measure_text, &grid).context("invalid measure")?;
        if self.mass_scale != 1.0 {
            mu = mu.scale_atoms(self.mass_scale)?;
        }
        let principal = match self.operator {
            OperatorKind::Laplacian => Principal::Linear(MatrixField::identity(&grid)),
            OperatorKind::Matrix => {
                let [a11, a12, a22] = self.matrix;
                Principal::Linear(MatrixField::constant(&grid, a11, a12, a22)?)
            }
            OperatorKind::PLaplacian => {
                Principal::LerayLions(LerayLionsSpec::p_laplacian(&grid, self.p)?)
            }
        };
        Ok(ProblemSpec::new(principal, f, mu, self.gamma, self.n)?.with_kernel(self.kernel))
    }
}

/// Which reports `solve` computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Sandwich,
    LowerBound,
    TruncationEnergy,
    ResidualDecay,
    BoundaryLayer,
    HopfLax,
    Regularity,
}

impl FromStr for ReportKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sandwich" => ReportKind::Sandwich,
            "lower-bound" => ReportKind::LowerBound,
            "truncation-energy" => ReportKind::TruncationEnergy,
            "residual-decay" => ReportKind::ResidualDecay,
            "boundary-layer" => ReportKind::BoundaryLayer,
            "hopf-lax" => ReportKind::HopfLax,
            "regularity" => ReportKind::Regularity,
            other => bail!("unknown report `{other}`"),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub reports: Vec<ReportKind>,
    pub compact_delta: f64,
    pub k_levels: usize,
    pub layer_widths: Vec<f64>,
    pub regularity: Vec<(f64, f64, f64)>,
    pub resolutions: Vec<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            reports: Vec::new(),
            compact_delta: 0.25,
            k_levels: 8,
            layer_widths: vec![0.125, 0.0625, 0.03125, 0.015625],
            regularity: Vec::new(),
            resolutions: vec![25_600, 51_200, 102_400],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepConfig {
    pub gamma: Vec<f64>,
    pub p: Vec<f64>,
    pub n: Vec<u64>,
    pub resolution: Vec<usize>,
    pub mass: Vec<f64>,
}

impl SweepConfig {
    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
            && self.p.is_empty()
            && self.n.is_empty()
            && self.resolution.is_empty()
            && self.mass.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub path: PathBuf,
    pub problem: ProblemConfig,
    pub solver: SolveParams,
    pub sequence: bool,
    pub analysis: AnalysisConfig,
    pub sweep: SweepConfig,
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| anyhow!("`{key}`: cannot parse `{value}`"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse_num(key, v)).collect()
}

fn increasing<T: PartialOrd>(key: &str, values: &[T]) -> Result<()> {
    if values.windows(2).any(|w| w[0] >= w[1]) {
        bail!("`{key}` must be strictly increasing");
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")), path)
    }

    /// Parses config text; `measure_file` is resolved against `base`.
    pub fn parse(text: &str, base: &Path, path: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| anyhow!("config syntax: {e}"))?;
        let mut problem = ProblemConfig::default();
        let mut solver = SolveParams::default();
        let mut sequence = false;
        let mut analysis = AnalysisConfig::default();
        let mut sweep = SweepConfig::default();
        let mut measure_lines = Vec::new();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            let allowed = match section {
                "problem" => PROBLEM_KEYS,
                "solver" => SOLVER_KEYS,
                "analysis" => ANALYSIS_KEYS,
                "sweep" => SWEEP_KEYS,
                "" if props.is_empty() => continue,
                "" => bail!("keys must appear under a section header"),
                other => bail!("unknown section [{other}]"),
            };
            let mut seen = Vec::new();
            for (key, value) in props.iter() {
                if !allowed.contains(&key) {
                    bail!("unknown key `{key}` in [{section}]");
                }
                if seen.contains(&key) && !REPEATABLE.contains(&key) {
                    bail!("key `{key}` given twice in [{section}]");
                }
                seen.push(key);
                let value = value.trim();
                match (section, key) {
                    ("problem", "domain") => problem.domain = value.parse()?,
                    ("problem", "resolution") => problem.resolution = parse_num(key, value)?,
                    ("problem", "gamma") => problem.gamma = parse_num(key, value)?,
                    ("problem", "n") => problem.n = parse_num(key, value)?,
                    ("problem", "datum") => problem.datum = DensityExpr::parse(value)?,
                    ("problem", "operator") => {
                        problem.operator = match value {
                            "laplacian" => OperatorKind::Laplacian,
                            "matrix" => OperatorKind::Matrix,
                            "p-laplacian" => OperatorKind::PLaplacian,
                            other => bail!("unknown operator `{other}`"),
                        }
                    }
                    ("problem", "a11") => problem.matrix[0] = parse_num(key, value)?,
                    ("problem", "a12") => problem.matrix[1] = parse_num(key, value)?,
                    ("problem", "a22") => problem.matrix[2] = parse_num(key, value)?,
                    ("problem", "p") => problem.p = parse_num(key, value)?,
                    ("problem", "measure_file") => {
                        let file = base.join(value);
                        let text = std::fs::read_to_string(&file).with_context(|| {
                            format!("cannot read measure file {}", file.display())
                        })?;
                        measure_lines.push(text);
                    }
                    ("problem", "atom") => measure_lines.push(format!("atom = {value}")),
                    ("problem", "measure_density") => {
                        measure_lines.push(format!("density = {value}"))
                    }
                    ("problem", "measure_r") => measure_lines.push(format!("r = {value}")),
                    ("problem", "kernel") => {
                        problem.kernel = match value {
                            "tent" => Kernel::Tent,
                            "box" => Kernel::Box,
                            other => bail!("unknown kernel `{other}`"),
                        }
                    }
                    ("solver", "damping") => solver.damping = parse_num(key, value)?,
                    ("solver", "outer_tol") => solver.outer_tol = parse_num(key, value)?,
                    ("solver", "max_outer") => solver.max_outer = parse_num(key, value)?,
                    ("solver", "inner_tol") => solver.inner_tol = parse_num(key, value)?,
                    ("solver", "stabilization_tol") => {
                        solver.stabilization_tol = parse_num(key, value)?
                    }
                    ("solver", "schedule") => solver.schedule = parse_list(key, value)?,
                    ("solver", "scheme") => {
                        solver.scheme = match value {
                            "picard" => Scheme::Picard,
                            "newton" => Scheme::Newton,
                            other => bail!("unknown scheme `{other}`"),
                        }
                    }
                    ("solver", "sequence") => sequence = parse_num(key, value)?,
                    ("analysis", "reports") => {
                        analysis.reports = value
                            .split(',')
                            .map(|s| s.trim().parse())
                            .collect::<Result<_>>()?
                    }
                    ("analysis", "compact_delta") => {
                        analysis.compact_delta = parse_num(key, value)?
                    }
                    ("analysis", "k_levels") => analysis.k_levels = parse_num(key, value)?,
                    ("analysis", "layer_widths") => analysis.layer_widths = parse_list(key, value)?,
                    ("analysis", "regularity") => {
                        let v: Vec<f64> = value
                            .split_whitespace()
                            .map(|s| parse_num(key, s))
                            .collect::<Result<_>>()?;
                        if v.len() != 3 {
                            bail!("`regularity` needs `m r gamma`, got `{value}`");
                        }
                        analysis.regularity.push((v[0], v[1], v[2]));
                    }
                    ("analysis", "resolutions") => analysis.resolutions = parse_list(key, value)?,
                    ("sweep", "gamma") => sweep.gamma = parse_list(key, value)?,
                    ("sweep", "p") => sweep.p = parse_list(key, value)?,
                    ("sweep", "n") => sweep.n = parse_list(key, value)?,
                    ("sweep", "resolution") => sweep.resolution = parse_list(key, value)?,
                    ("sweep", "mass") => sweep.mass = parse_list(key, value)?,
                    _ => unreachable!("key list and match arms disagree"),
                }
            }
        }
        problem.measure_text = measure_lines.join("\n");
        solver.validate()?;
        increasing("resolutions", &analysis.resolutions)?;
        increasing("schedule", &solver.schedule)?;
        if analysis.k_levels < 4 {
            bail!("`k_levels` must be at least 4");
        }
        if analysis.reports.contains(&ReportKind::Regularity) && analysis.regularity.is_empty() {
            bail!("the regularity report needs at least one `regularity = m r gamma` line");
        }
        Ok(RunConfig {
            path: path.to_path_buf(),
            problem,
            solver,
            sequence,
            analysis,
            sweep,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("."), Path::new("test.cfg"))
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg =
            parse("[problem]\ngamma = 2\natom = 0.5,0.5,1\n[solver]\nschedule = 4,16\n").unwrap();
        assert_eq!(cfg.problem.gamma, 2.0);
        assert_eq!(cfg.solver.schedule, vec![4, 16]);
        assert_eq!(cfg.problem.measure_text, "atom = 0.5,0.5,1");
        assert!(cfg.problem.build().is_ok());
    }

    #[test]
    fn unknown_keys_and_sections_fail() {
        assert!(parse("[problem]\ngama = 2\n").is_err());
        assert!(parse("[problme]\ngamma = 2\n").is_err());
        assert!(parse("gamma = 2\n").is_err());
        assert!(parse("[problem]\ngamma = 2\ngamma = 3\n").is_err());
    }

    #[test]
    fn lists_must_increase() {
        assert!(parse("[analysis]\nresolutions = 200,100\n").is_err());
        assert!(parse("[solver]\nschedule = 16,4\n").is_err());
    }
}
