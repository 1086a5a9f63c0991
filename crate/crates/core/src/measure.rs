//! Nonnegative bounded measures, their smooth approximations, data truncation
//! and weak-Lebesgue quasinorms.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{FieldRole, ScalarField};
use crate::grid::{Domain, Grid, GridKind};

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: [f64; 2],
    pub mass: f64,
}

/// Closed-form densities understood by the measure file format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityExpr {
    Constant(f64),
    /// `coeff * r^exponent`, `r` measured from the grid centre.
    RadialPower {
        coeff: f64,
        exponent: f64,
    },
    /// `value` on the ball of the given radius around the grid centre, 0 outside.
    Indicator {
        radius: f64,
        value: f64,
    },
}

impl DensityExpr {
    /// Parses `constant c`, `power coeff exponent` or `indicator radius value`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split_whitespace().collect();
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("`{s}` is not a number")))
        };
        let expr = match parts.as_slice() {
            ["constant", c] => DensityExpr::Constant(num(c)?),
            ["power", c, e] => DensityExpr::RadialPower {
                coeff: num(c)?,
                exponent: num(e)?,
            },
            ["indicator", r, v] => DensityExpr::Indicator {
                radius: num(r)?,
                value: num(v)?,
            },
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown density expression `{text}`"
                )))
            }
        };
        let ok = match expr {
            DensityExpr::Constant(c) => c >= 0.0,
            DensityExpr::RadialPower { coeff, .. } => coeff >= 0.0,
            DensityExpr::Indicator { radius, value } => radius > 0.0 && value >= 0.0,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "density `{text}` must be nonnegative"
            )));
        }
        Ok(expr)
    }

    /// Evaluates at distance `r` from the centre. At `r = 0` singular powers are
    /// sampled at half a cell, `r = h/2`.
    pub fn eval(&self, r: f64, h: f64) -> f64 {
        match *self {
            DensityExpr::Constant(c) => c,
            DensityExpr::RadialPower { coeff, exponent } => {
                if exponent == 0.0 {
                    coeff
                } else if r < 1e-12 && exponent < 0.0 {
                    coeff * (0.5 * h).powf(exponent)
                } else {
                    coeff * r.powf(exponent)
                }
            }
            DensityExpr::Indicator { radius, value } => {
                if r <= radius {
                    value
                } else {
                    0.0
                }
            }
        }
    }

    /// Samples the expression on the interior nodes of `grid`.
    pub fn sample(&self, grid: &Arc<Grid>, role: FieldRole) -> Result<ScalarField> {
        let values = (0..grid.len())
            .map(|n| {
                if grid.is_interior(n) {
                    self.eval(grid.radius(n), grid.h())
                } else {
                    0.0
                }
            })
            .collect();
        ScalarField::new(grid, values, role)
    }
}

/// Exact distance from a point to the boundary of the grid's domain
/// (nonpositive outside).
pub fn boundary_distance(grid: &Grid, p: [f64; 2]) -> f64 {
    match grid.domain() {
        Domain::UnitSquare => p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]),
        Domain::UnitDisk | Domain::UnitBallRadial { .. } => 1.0 - p[0].hypot(p[1]),
    }
}

/// A nonnegative bounded measure: atoms plus an absolutely continuous part.
#[derive(Debug, Clone, PartialEq)]
pub struct RadonMeasure {
    atoms: Vec<Atom>,
    density: ScalarField,
    /// Declared summability of the density, `r ∈ [1, ∞]`.
    summability: f64,
}

impl RadonMeasure {
    pub fn new(
        grid: &Arc<Grid>,
        atoms: Vec<Atom>,
        density: Option<ScalarField>,
        summability: f64,
    ) -> Result<Self> {
        if !(summability >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "summability {summability} must be at least 1"
            )));
        }
        for atom in &atoms {
            if !(atom.mass > 0.0 && atom.mass.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "atom mass {} must be positive",
                    atom.mass
                )));
            }
            if boundary_distance(grid, atom.location) <= 0.0 {
                return Err(Error::AtomOutsideDomain(atom.location[0], atom.location[1]));
            }
            if grid.kind() == GridKind::Radial && atom.location != [0.0, 0.0] {
                return Err(Error::Unsupported(
                    "radial grids only carry atoms at the origin".into(),
                ));
            }
        }
        let density = match density {
            Some(d) => {
                if !Arc::ptr_eq(d.grid(), grid) && **d.grid() != **grid {
                    return Err(Error::GridMismatch);
                }
                if d.role() == FieldRole::Solution {
                    return Err(Error::InvalidParameter(
                        "density must be a data field".into(),
                    ));
                }
                d
            }
            None => ScalarField::zeros(grid, FieldRole::Density),
        };
        Ok(RadonMeasure {
            atoms,
            density,
            summability,
        })
    }

    /// The zero measure.
    pub fn zero(grid: &Arc<Grid>) -> Self {
        RadonMeasure {
            atoms: Vec::new(),
            density: ScalarField::zeros(grid, FieldRole::Density),
            summability: f64::INFINITY,
        }
    }

    /// A single atom; the summability index of a Dirac mass is 1.
    pub fn dirac(grid: &Arc<Grid>, location: [f64; 2], mass: f64) -> Result<Self> {
        Self::new(grid, vec![Atom { location, mass }], None, 1.0)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> &ScalarField {
        &self.density
    }

    pub fn summability(&self) -> f64 {
        self.summability
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.density.grid()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.density.integral()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.values().iter().all(|&v| v == 0.0)
    }

    /// Same measure with every atom mass multiplied by `factor`.
    pub fn scale_atoms(&self, factor: f64) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                location: a.location,
                mass: a.mass * factor,
            })
            .collect();
        Self::new(
            self.grid(),
            atoms,
            Some(self.density.clone()),
            self.summability,
        )
    }

    /// Parses the `key = value` measure format:
    ///
    /// ```text
    /// atom = x,y,mass        (repeatable)
    /// density = power 1 -1.5 (constant c | power coeff exponent | indicator radius value)
    /// r = 2                  (declared summability, `inf` allowed)
    /// ```
    pub fn parse(text: &str, grid: &Arc<Grid>) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut density = None;
        let mut summability = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "atom" => {
                    let nums: Vec<f64> = value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| parse_err(format!("bad atom `{value}`")))?;
                    if nums.len() != 3 {
                        return Err(parse_err(format!("atom needs x,y,mass, got `{value}`")));
                    }
                    atoms.push(Atom {
                        location: [nums[0], nums[1]],
                        mass: nums[2],
                    });
                }
                "density" => {
                    if density.is_some() {
                        return Err(parse_err("density given twice".into()));
                    }
                    density =
                        Some(DensityExpr::parse(value).map_err(|e| parse_err(e.to_string()))?);
                }
                "r" => {
                    let r = if value == "inf" {
                        f64::INFINITY
                    } else {
                        value
                            .parse::<f64>()
                            .map_err(|_| parse_err(format!("bad summability `{value}`")))?
                    };
                    summability = Some(r);
                }
                other => return Err(parse_err(format!("unknown key `{other}`"))),
            }
        }
        let density = density
            .map(|d| d.sample(grid, FieldRole::Density))
            .transpose()?;
        let summability = summability.unwrap_or(if atoms.is_empty() { f64::INFINITY } else { 1.0 });
        Self::new(grid, atoms, density, summability)
    }
}

/// Kernel used to spread atoms over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// Piecewise-linear bump `max(0, 1 - |x - a| / ρ)`.
    #[default]
    Tent,
    /// Uniform weight on the ball of radius `ρ`.
    Box,
}

/// Spread radius for index `n`: `max(1/n, 2h)`.
pub fn spread_radius(n: u64, grid: &Grid) -> f64 {
    (1.0 / n as f64).max(2.0 * grid.h())
}

/// Smooth approximation `μ_n` of `μ` with the default tent kernel.
pub fn mollify(mu: &RadonMeasure, n: u64, grid: &Arc<Grid>) -> Result<ScalarField> {
    mollify_with(mu, n, grid, Kernel::Tent)
}

/// Smooth approximation `μ_n`: each atom is replaced by a kernel of radius
/// [`spread_radius`], renormalized so that the discrete mass is exact; the
/// absolutely continuous part is passed through.
pub fn mollify_with(
    mu: &RadonMeasure,
    n: u64,
    grid: &Arc<Grid>,
    kernel: Kernel,
) -> Result<ScalarField> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "regularization index must be at least 1".into(),
        ));
    }
    if !Arc::ptr_eq(mu.grid(), grid) && **mu.grid() != **grid {
        return Err(Error::GridMismatch);
    }
    let radius = spread_radius(n, grid);
    let mut values = mu.density().values().to_vec();
    for atom in mu.atoms() {
        let distance = boundary_distance(grid, atom.location);
        if distance < radius {
            return Err(Error::AtomTooCloseToBoundary { distance, radius });
        }
        let weights: Vec<(usize, f64)> = grid
            .interior_nodes()
            .iter()
            .filter_map(|&node| {
                let [x, y] = grid.coord(node);
                let dist = match grid.kind() {
                    GridKind::Radial => x,
                    GridKind::Planar => (x - atom.location[0]).hypot(y - atom.location[1]),
                };
                let w = match kernel {
                    Kernel::Tent => (1.0 - dist / radius).max(0.0),
                    Kernel::Box => {
                        if dist < radius {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                (w > 0.0).then_some((node, w))
            })
            .collect();
        let mass: f64 = weights
            .iter()
            .map(|&(node, w)| w * grid.measure(node))
            .sum();
        if mass <= 0.0 {
            return Err(Error::InvalidParameter(
                "atom spread covers no interior node".into(),
            ));
        }
        for (node, w) in weights {
            values[node] += atom.mass * w / mass;
        }
    }
    Ok(ScalarField::new(grid, values, FieldRole::Density)?.with_index(n))
}

/// `f_n = min(f, n)`, the level-`n` truncation of a nonnegative datum.
pub fn truncate_datum(f: &ScalarField, n: f64) -> Result<ScalarField> {
    if f.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParameter("datum must be nonnegative".into()));
    }
    let values = f.values().iter().map(|&v| v.min(n)).collect();
    ScalarField::new(f.grid(), values, f.role())
}

/// `T_k(s)`: clip to `[-k, k]`.
pub fn truncate(s: f64, k: f64) -> f64 {
    s.clamp(-k, k)
}

/// `G_k(s) = (|s| - k)^+ sign(s)`.
pub fn excess(s: f64, k: f64) -> f64 {
    (s.abs() - k).max(0.0) * s.signum()
}

/// Unit ramp between levels `k` and `k + 1` (defined for `s >= 0`).
pub fn ramp(s: f64, k: f64) -> Option<f64> {
    if s < 0.0 {
        None
    } else if s <= k {
        Some(0.0)
    } else if s <= k + 1.0 {
        Some(s - k)
    } else {
        Some(1.0)
    }
}

/// Values of the three truncation functions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncations {
    pub t: f64,
    pub g: f64,
    /// `None` for negative arguments.
    pub s: Option<f64>,
}

pub fn apply_truncations(s: f64, k: f64) -> Result<Truncations> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "truncation level {k} must be positive"
        )));
    }
    Ok(Truncations {
        t: truncate(s, k),
        g: excess(s, k),
        s: ramp(s, k),
    })
}

/// Dyadic levels `t0 * 2^j`, `j = 0..count`.
pub fn dyadic_levels(t0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| t0 * 2f64.powi(j as i32)).collect()
}

/// Default levels: `t0 = 1`, 20 dyadic levels.
pub fn default_levels() -> Vec<f64> {
    dyadic_levels(1.0, 20)
}

/// `t · m({|u| > t})^{1/q}` for every level.
pub fn marcinkiewicz_profile(
    field: &ScalarField,
    q: f64,
    levels: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("empty level grid".into()));
    }
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "exponent {q} must be positive"
        )));
    }
    if levels.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParameter("levels must be positive".into()));
    }
    let measures = field.grid().measures();
    Ok(levels
        .iter()
        .map(|&t| {
            let m: f64 = field
                .values()
                .iter()
                .zip(measures)
                .filter(|(v, _)| v.abs() > t)
                .map(|(_, m)| m)
                .sum();
            (t, t * m.powf(1.0 / q))
        })
        .collect())
}

/// Supremum over the levels of `t · m({|u| > t})^{1/q}`.
pub fn marcinkiewicz_quasinorm(field: &ScalarField, q: f64, levels: &[f64]) -> Result<f64> {
    Ok(marcinkiewicz_profile(field, q, levels)?
        .into_iter()
        .map(|(_, v)| v)
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(domain: Domain, res: usize) -> Arc<Grid> {
        Arc::new(build_grid(domain, res).unwrap())
    }

    #[test]
    fn truncation_examples() {
        let a = apply_truncations(3.0, 2.0).unwrap();
        assert_eq!((a.t, a.g, a.s), (2.0, 1.0, Some(1.0)));
        let b = apply_truncations(-5.0, 2.0).unwrap();
        assert_eq!((b.t, b.g, b.s), (-2.0, -3.0, None));
        let c = apply_truncations(2.5, 2.0).unwrap();
        assert_eq!(c.s, Some(0.5));
        assert!(c.s.unwrap() <= 2.5);
        assert!(apply_truncations(1.0, 0.0).is_err());
        assert!(apply_truncations(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn truncation_splits_identity(s in -1e3f64..1e3, k in 1e-3f64..1e2) {
            let t = apply_truncations(s, k).unwrap();
            prop_assert!((t.t + t.g - s).abs() <= 1e-12 * s.abs().max(1.0));
            prop_assert!(t.t.abs() <= k);
            if s >= 0.0 {
                let ramp = t.s.unwrap();
                prop_assert!((0.0..=1.0).contains(&ramp) && ramp <= s);
            }
        }

        #[test]
        fn quasinorm_is_monotone(scale in 1.0f64..3.0, q in 0.5f64..4.0) {
            let g = grid(Domain::UnitDisk, 16);
            let f = DensityExpr::RadialPower { coeff: 1.0, exponent: -1.0 }.sample(&g, FieldRole::Datum).unwrap();
            let bigger = ScalarField::new(&g, f.values().iter().map(|v| v * scale).collect(), FieldRole::Datum).unwrap();
            let levels = default_levels();
            prop_assert!(marcinkiewicz_quasinorm(&f, q, &levels).unwrap() <= marcinkiewicz_quasinorm(&bigger, q, &levels).unwrap());
        }
    }

    #[test]
    fn mollified_dirac_keeps_mass() {
        let g = grid(Domain::UnitDisk, 32);
        let mu = RadonMeasure::dirac(&g, [0.0, 0.0], 1.0).unwrap();
        for n in [1, 4, 16, 256] {
            let mu_n = mollify(&mu, n, &g).unwrap();
            assert_relative_eq!(mu_n.integral(), 1.0, max_relative = 1e-12);
            assert!(mu_n.values().iter().all(|&v| v >= 0.0));
            assert_eq!(mu_n.index(), Some(n));
        }
        let boxed = mollify_with(&mu, 8, &g, Kernel::Box).unwrap();
        assert_relative_eq!(boxed.integral(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn spread_shrinks_with_n() {
        let g = grid(Domain::UnitDisk, 128);
        let mu = RadonMeasure::dirac(&g, [0.0, 0.0], 1.0).unwrap();
        let support = |n| {
            mollify(&mu, n, &g)
                .unwrap()
                .values()
                .iter()
                .filter(|&&v| v > 0.0)
                .count()
        };
        assert!(support(4) > support(16) && support(16) > support(64));
    }

    #[test]
    fn density_passes_through() {
        let g = grid(Domain::UnitSquare, 16);
        let density = DensityExpr::Constant(1.0)
            .sample(&g, FieldRole::Density)
            .unwrap();
        let mu = RadonMeasure::new(&g, vec![], Some(density.clone()), f64::INFINITY).unwrap();
        let mu_n = mollify(&mu, 10, &g).unwrap();
        assert_eq!(mu_n.values(), density.values());
    }

    #[test]
    fn atom_near_boundary_is_rejected() {
        let g = grid(Domain::UnitSquare, 32);
        let mu = RadonMeasure::dirac(&g, [0.1, 0.5], 1.0).unwrap();
        assert!(mollify(&mu, 64, &g).is_ok());
        assert!(matches!(
            mollify(&mu, 4, &g),
            Err(Error::AtomTooCloseToBoundary { .. })
        ));
        assert!(matches!(
            RadonMeasure::dirac(&g, [1.5, 0.5], 1.0),
            Err(Error::AtomOutsideDomain(..))
        ));
    }

    #[test]
    fn truncate_datum_examples() {
        let g = grid(Domain::UnitBallRadial { dim: 3 }, 64);
        let half = ScalarField::constant(&g, FieldRole::Datum, 0.5).unwrap();
        assert_eq!(truncate_datum(&half, 1.0).unwrap().values(), half.values());

        let f = DensityExpr::RadialPower {
            coeff: 1.0,
            exponent: -1.0,
        }
        .sample(&g, FieldRole::Datum)
        .unwrap();
        let f4 = truncate_datum(&f, 4.0).unwrap();
        for n in 0..g.len() {
            assert_eq!(f4.value(n), f.value(n).min(4.0));
        }
    }

    #[test]
    fn truncated_integrals_increase_to_the_limit() {
        // ∫ r^{-1} over the unit ball of R^3 is 4π ∫ r dr = 2π.
        let g = grid(Domain::UnitBallRadial { dim: 3 }, 512);
        let f = DensityExpr::RadialPower {
            coeff: 1.0,
            exponent: -1.0,
        }
        .sample(&g, FieldRole::Datum)
        .unwrap();
        let masses: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|&n| truncate_datum(&f, n).unwrap().integral())
            .collect();
        assert!(masses.windows(2).all(|w| w[1] >= w[0]));
        assert!((masses[5] - 2.0 * PI).abs() < 0.01 * 2.0 * PI, "{masses:?}");
    }

    #[test]
    fn quasinorm_of_constant_above_levels_is_zero() {
        let g = grid(Domain::UnitSquare, 16);
        let one = ScalarField::constant(&g, FieldRole::Datum, 1.0).unwrap();
        assert_eq!(
            marcinkiewicz_quasinorm(&one, 2.0, &[2.0, 4.0]).unwrap(),
            0.0
        );
        assert!(marcinkiewicz_quasinorm(&one, 2.0, &[]).is_err());
    }

    #[test]
    fn quasinorm_of_inverse_distance_on_disk() {
        // m({|x|^{-1} > t}) = π t^{-2}, so t m^{1/2} = √π for every t >= 1.
        let g = grid(Domain::UnitDisk, 256);
        let f = DensityExpr::RadialPower {
            coeff: 1.0,
            exponent: -1.0,
        }
        .sample(&g, FieldRole::Datum)
        .unwrap();
        let value = marcinkiewicz_quasinorm(&f, 2.0, &default_levels()).unwrap();
        assert_relative_eq!(value, PI.sqrt(), max_relative = 0.05);
    }

    #[test]
    fn parses_measure_files() {
        let g = grid(Domain::UnitDisk, 16);
        let text =
            "# centre atom\natom = 0, 0, 1.5\natom = 0.25,0,0.5\ndensity = constant 2\nr = inf\n";
        let mu = RadonMeasure::parse(text, &g).unwrap();
        assert_eq!(mu.atoms().len(), 2);
        assert_eq!(mu.summability(), f64::INFINITY);
        assert_relative_eq!(
            mu.total_mass(),
            2.0 + 2.0 * g.total_measure(),
            max_relative = 1e-12
        );

        assert!(matches!(
            RadonMeasure::parse("mass = 1", &g),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(RadonMeasure::parse("atom = 0,0", &g).is_err());
        assert!(RadonMeasure::parse("density = gaussian 1", &g).is_err());
        assert!(RadonMeasure::parse("density = constant -1", &g).is_err());
    }
}
