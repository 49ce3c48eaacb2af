//! Domain types: the observed sample, the rectangular instrument grid and the
//! test configuration, plus validation of a sample against a grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a cell in the rectangular instrument support, `0..K`.
pub type CellId = usize;

/// Trimming values used for the reported ξ sweep.
pub const STANDARD_XI_GRID: [f64; 10] = [0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1, 1.0];

/// Outcome, treatment and an `L`-dimensional discrete instrument per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    d: Vec<f64>,
    z: Vec<i64>,
    dims: usize,
}

impl Dataset {
    pub fn new(y: Vec<f64>, d: Vec<f64>, z: Vec<Vec<i64>>) -> Result<Self> {
        let dims = z.first().map_or(0, Vec::len);
        if let Some((row, r)) = z.iter().enumerate().find(|(_, r)| r.len() != dims) {
            return Err(Error::LengthMismatch(format!(
                "instrument row {row} has {} coordinates, expected {dims}",
                r.len()
            )));
        }
        let flat = z.into_iter().flatten().collect();
        Self::from_flat(y, d, flat, dims)
    }

    /// Builds a dataset from row-major instrument codes (`z.len() == n * dims`).
    pub fn from_flat(y: Vec<f64>, d: Vec<f64>, z: Vec<i64>, dims: usize) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::LengthMismatch("dataset has no observations".into()));
        }
        if y.len() != d.len() || dims == 0 || z.len() != y.len() * dims {
            return Err(Error::LengthMismatch(format!(
                "y has {}, d has {}, z has {} entries over {dims} dimensions",
                y.len(),
                d.len(),
                z.len()
            )));
        }
        if dims < 2 {
            return Err(Error::InvalidGrid(format!(
                "instrument must have at least 2 dimensions, got {dims}"
            )));
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { column: "y", row });
        }
        if let Some(row) = d.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { column: "d", row });
        }
        Ok(Dataset { y, d, z, dims })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn z(&self, i: usize) -> &[i64] {
        &self.z[i * self.dims..(i + 1) * self.dims]
    }

    /// New dataset made of the observations at `indices`, repeats allowed.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut z = Vec::with_capacity(indices.len() * self.dims);
        for &i in indices {
            z.extend_from_slice(self.z(i));
        }
        Dataset {
            y: indices.iter().map(|&i| self.y[i]).collect(),
            d: indices.iter().map(|&i| self.d[i]).collect(),
            z,
            dims: self.dims,
        }
    }
}

/// Ordering of one instrument coordinate under the monotonicity hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Treatment is weakly increasing in the coordinate.
    #[default]
    Ascending,
    Descending,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "asc" | "ascending" | "+" => Ok(Direction::Ascending),
            "desc" | "descending" | "-" => Ok(Direction::Descending),
            other => Err(Error::InvalidConfig(format!("unknown direction '{other}'"))),
        }
    }
}

/// Rectangular instrument support `supp(Z_1) x ... x supp(Z_L)`.
///
/// Cells are numbered row-major with the first coordinate varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentGrid {
    supports: Vec<Vec<i64>>,
    directions: Vec<Direction>,
    strides: Vec<usize>,
    n_cells: usize,
}

impl InstrumentGrid {
    pub fn new(supports: Vec<Vec<i64>>, directions: Vec<Direction>) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::InvalidGrid("no instrument dimensions".into()));
        }
        if directions.len() != supports.len() {
            return Err(Error::InvalidGrid(format!(
                "{} directions for {} dimensions",
                directions.len(),
                supports.len()
            )));
        }
        let mut sorted = Vec::with_capacity(supports.len());
        for (l, mut s) in supports.into_iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidGrid(format!("dimension {l} has empty support")));
            }
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidGrid(format!("dimension {l} repeats a support value")));
            }
            sorted.push(s);
        }
        let mut strides = vec![1usize; sorted.len()];
        for l in (0..sorted.len().saturating_sub(1)).rev() {
            strides[l] = strides[l + 1] * sorted[l + 1].len();
        }
        let n_cells = strides[0] * sorted[0].len();
        Ok(InstrumentGrid { supports: sorted, directions, strides, n_cells })
    }

    /// Grid spanned by the values observed in each coordinate, all ascending.
    pub fn observed(data: &Dataset) -> Self {
        let supports = (0..data.dims())
            .map(|l| {
                let mut v: Vec<i64> = (0..data.len()).map(|i| data.z(i)[l]).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect::<Vec<_>>();
        let dirs = vec![Direction::Ascending; supports.len()];
        InstrumentGrid::new(supports, dirs).expect("observed supports are nonempty and distinct")
    }

    pub fn with_directions(self, directions: Vec<Direction>) -> Result<Self> {
        InstrumentGrid::new(self.supports, directions)
    }

    pub fn dims(&self) -> usize {
        self.supports.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn support(&self, dim: usize) -> &[i64] {
        &self.supports[dim]
    }

    pub fn direction(&self, dim: usize) -> Direction {
        self.directions[dim]
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn cell_of(&self, coords: &[i64]) -> Result<CellId> {
        if coords.len() != self.dims() {
            return Err(Error::LengthMismatch(format!(
                "instrument has {} coordinates, grid has {}",
                coords.len(),
                self.dims()
            )));
        }
        let mut cell = 0;
        for (l, &value) in coords.iter().enumerate() {
            let k = self.supports[l]
                .binary_search(&value)
                .map_err(|_| Error::UnknownInstrumentValue { dim: l, value })?;
            cell += k * self.strides[l];
        }
        Ok(cell)
    }

    /// Support position of each coordinate of `cell`.
    pub fn positions(&self, cell: CellId) -> Vec<usize> {
        (0..self.dims())
            .map(|l| (cell / self.strides[l]) % self.supports[l].len())
            .collect()
    }

    pub fn coords(&self, cell: CellId) -> Vec<i64> {
        self.positions(cell)
            .into_iter()
            .enumerate()
            .map(|(l, k)| self.supports[l][k])
            .collect()
    }
}

/// An adjacent pair `(g_1, g_2)` along one coordinate; under the null the
/// treatment at `upper` weakly dominates the treatment at `lower`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellPair {
    pub dim: usize,
    pub lower: CellId,
    pub upper: CellId,
}

/// All adjacent pairs of the grid, grouped by dimension, then by the values of
/// the other coordinates, then by position along the dimension.
pub fn enumerate_adjacent_pairs(grid: &InstrumentGrid) -> Vec<CellPair> {
    let mut pairs = Vec::new();
    for dim in 0..grid.dims() {
        let k = grid.support(dim).len();
        let stride = grid.strides[dim];
        for base in (0..grid.n_cells()).filter(|&c| (c / stride) % k == 0) {
            for step in 0..k - 1 {
                let a = base + step * stride;
                let b = a + stride;
                let (lower, upper) = match grid.direction(dim) {
                    Direction::Ascending => (a, b),
                    Direction::Descending => (b, a),
                };
                pairs.push(CellPair { dim, lower, upper });
            }
        }
    }
    pairs
}

/// Boundary treatment arm entering the interval-type candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreatmentClass {
    Max,
    Min,
}

impl TreatmentClass {
    /// Sign of the test function, chosen so that the null reads `phi <= 0`.
    pub fn sign(self) -> f64 {
        match self {
            TreatmentClass::Max => -1.0,
            TreatmentClass::Min => 1.0,
        }
    }
}

/// Sorted distinct treatment values seen in the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreatmentSupport {
    values: Vec<f64>,
}

impl TreatmentSupport {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn d_min(&self) -> f64 {
        self.values[0]
    }

    pub fn d_max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn value(&self, class: TreatmentClass) -> f64 {
        match class {
            TreatmentClass::Max => self.d_max(),
            TreatmentClass::Min => self.d_min(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyCellPolicy {
    #[default]
    Error,
    DropPair,
}

impl FromStr for EmptyCellPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(EmptyCellPolicy::Error),
            "drop-pair" => Ok(EmptyCellPolicy::DropPair),
            other => Err(Error::InvalidConfig(format!("unknown empty-cell policy '{other}'"))),
        }
    }
}

/// Measure over trimming values ξ in (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum XiMeasure {
    Dirac(f64),
    /// Atoms `(xi, weight)` with positive weights.
    Grid(Vec<(f64, f64)>),
}

impl XiMeasure {
    pub fn dirac(xi: f64) -> Result<Self> {
        check_xi(xi)?;
        Ok(XiMeasure::Dirac(xi))
    }

    /// Probability measure putting equal mass on each value.
    pub fn equal_weights(xis: &[f64]) -> Result<Self> {
        if xis.is_empty() {
            return Err(Error::InvalidConfig("grid measure needs at least one ξ".into()));
        }
        let w = 1.0 / xis.len() as f64;
        XiMeasure::weighted(xis.iter().map(|&x| (x, w)).collect())
    }

    pub fn weighted(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidConfig("grid measure needs at least one ξ".into()));
        }
        for &(xi, w) in &atoms {
            check_xi(xi)?;
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidConfig(format!("weight {w} must be positive")));
            }
        }
        Ok(XiMeasure::Grid(atoms))
    }

    /// Equal-probability measure over [`STANDARD_XI_GRID`].
    pub fn standard_grid() -> Self {
        XiMeasure::equal_weights(&STANDARD_XI_GRID).expect("constant grid is valid")
    }

    /// The ten Dirac measures of [`STANDARD_XI_GRID`] followed by [`XiMeasure::standard_grid`].
    pub fn standard_sweep() -> Vec<XiMeasure> {
        STANDARD_XI_GRID
            .iter()
            .map(|&x| XiMeasure::Dirac(x))
            .chain(std::iter::once(XiMeasure::standard_grid()))
            .collect()
    }

    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            XiMeasure::Dirac(xi) => vec![(*xi, 1.0)],
            XiMeasure::Grid(a) => a.clone(),
        }
    }

    /// Column label: the atom for a Dirac, `nu_bar` for the standard sweep grid.
    pub fn label(&self) -> String {
        match self {
            XiMeasure::Dirac(xi) => format!("{xi}"),
            g if *g == XiMeasure::standard_grid() => "nu_bar".to_string(),
            XiMeasure::Grid(_) => self.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            XiMeasure::Dirac(xi) => check_xi(*xi),
            XiMeasure::Grid(a) => XiMeasure::weighted(a.clone()).map(|_| ()),
        }
    }
}

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("ξ = {xi} is outside (0, 1]")))
    }
}

impl fmt::Display for XiMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XiMeasure::Dirac(xi) => write!(f, "dirac:{xi}"),
            XiMeasure::Grid(atoms) => {
                let equal = atoms.windows(2).all(|w| w[0].1 == w[1].1);
                let body: Vec<String> = if equal {
                    atoms.iter().map(|(x, _)| format!("{x}")).collect()
                } else {
                    atoms.iter().map(|(x, w)| format!("{x}@{w}")).collect()
                };
                write!(f, "grid:{}", body.join(","))
            }
        }
    }
}

impl FromStr for XiMeasure {
    type Err = Error;

    /// Parses `dirac:<xi>`, `grid:<xi_1,...,xi_m>` (equal weights) or
    /// `grid:<xi@w,...>` (explicit weights).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse ξ measure '{s}'"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let (kind, body) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "dirac" => XiMeasure::dirac(num(body)?),
            "grid" => {
                let parts: Vec<&str> = body.split(',').filter(|p| !p.trim().is_empty()).collect();
                if parts.iter().any(|p| p.contains('@')) {
                    let atoms = parts
                        .iter()
                        .map(|p| {
                            let (x, w) = p.split_once('@').ok_or_else(bad)?;
                            Ok((num(x)?, num(w)?))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    XiMeasure::weighted(atoms)
                } else {
                    let xis = parts.iter().map(|p| num(p)).collect::<Result<Vec<_>>>()?;
                    XiMeasure::equal_weights(&xis)
                }
            }
            _ => Err(bad()),
        }
    }
}

/// Tuning and reproducibility settings of one test run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub n_bootstrap: usize,
    /// Contact-set threshold; `f64::INFINITY` keeps every candidate.
    pub tau_n: f64,
    pub xi0: f64,
    pub xi_measure: XiMeasure,
    pub seed: u64,
    pub empty_cell_policy: EmptyCellPolicy,
    /// Full treatment support, when known to be wider than the observed one.
    pub treatment_support: Option<Vec<f64>>,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            alpha: 0.05,
            n_bootstrap: 1000,
            tau_n: 2.0,
            xi0: 1e-10,
            xi_measure: XiMeasure::Dirac(0.05),
            seed: 0,
            empty_cell_policy: EmptyCellPolicy::Error,
            treatment_support: None,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha = {} is outside (0, 1)", self.alpha)));
        }
        if self.n_bootstrap == 0 {
            return Err(Error::InvalidConfig("n_bootstrap must be positive".into()));
        }
        if !(self.tau_n >= 0.0) {
            return Err(Error::InvalidConfig(format!("tau_n = {} must be nonnegative", self.tau_n)));
        }
        if !(self.xi0 > 0.0 && self.xi0.is_finite()) {
            return Err(Error::InvalidConfig(format!("xi0 = {} must be positive", self.xi0)));
        }
        self.xi_measure.validate()
    }
}

/// A dataset checked against its instrument grid, with the per-observation cell
/// assignment and the adjacent pairs that enter the test.
#[derive(Debug, Clone)]
pub struct ValidatedData {
    pub dataset: Dataset,
    pub grid: InstrumentGrid,
    pub cells: Vec<CellId>,
    pub counts: Vec<usize>,
    pub treatment: TreatmentSupport,
    pub pairs: Vec<CellPair>,
    pub dropped_pairs: Vec<CellPair>,
    pub warnings: Vec<String>,
}

impl ValidatedData {
    pub fn n(&self) -> usize {
        self.dataset.len()
    }

    /// Cells with at least one observation; these enter the `T_n` product.
    pub fn occupied(&self) -> Vec<bool> {
        self.counts.iter().map(|&c| c > 0).collect()
    }
}

pub fn validate_dataset(
    raw: Dataset,
    grid: &InstrumentGrid,
    config: &TestConfig,
) -> Result<ValidatedData> {
    if raw.dims() != grid.dims() {
        return Err(Error::LengthMismatch(format!(
            "dataset has {} instrument dimensions, grid has {}",
            raw.dims(),
            grid.dims()
        )));
    }
    let cells = (0..raw.len())
        .map(|i| grid.cell_of(raw.z(i)))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0usize; grid.n_cells()];
    for &c in &cells {
        counts[c] += 1;
    }

    let mut values = raw.d().to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.len() < 2 {
        return Err(Error::DegenerateTreatment(format!("observed {values:?}")));
    }
    if let Some(declared) = &config.treatment_support {
        let mut declared = declared.clone();
        declared.sort_by(f64::total_cmp);
        declared.dedup();
        if let Some(v) = values.iter().find(|v| !declared.contains(v)) {
            return Err(Error::InvalidConfig(format!(
                "treatment value {v} is not in the declared support"
            )));
        }
        for edge in [declared[0], declared[declared.len() - 1]] {
            if !values.contains(&edge) {
                return Err(Error::UnobservedTreatmentArm(edge));
            }
        }
    }

    let all_pairs = enumerate_adjacent_pairs(grid);
    let empty: Vec<CellId> = (0..grid.n_cells()).filter(|&c| counts[c] == 0).collect();
    let mut warnings = Vec::new();
    let (pairs, dropped_pairs) = if empty.is_empty() {
        (all_pairs, Vec::new())
    } else {
        match config.empty_cell_policy {
            EmptyCellPolicy::Error => {
                return Err(Error::EmptyInstrumentCell { cell: grid.coords(empty[0]) })
            }
            EmptyCellPolicy::DropPair => {
                let (keep, drop): (Vec<_>, Vec<_>) = all_pairs
                    .into_iter()
                    .partition(|p| counts[p.lower] > 0 && counts[p.upper] > 0);
                for p in &drop {
                    warnings.push(format!(
                        "dropped pair {:?} -> {:?} (empty cell)",
                        grid.coords(p.lower),
                        grid.coords(p.upper)
                    ));
                }
                warnings.push(format!(
                    "T_n uses the {} occupied cells out of {}",
                    grid.n_cells() - empty.len(),
                    grid.n_cells()
                ));
                (keep, drop)
            }
        }
    };
    if pairs.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }

    Ok(ValidatedData {
        dataset: raw,
        grid: grid.clone(),
        cells,
        counts,
        treatment: TreatmentSupport { values },
        pairs,
        dropped_pairs,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_grid() -> InstrumentGrid {
        InstrumentGrid::new(vec![vec![0, 1], vec![0, 1]], vec![Direction::Ascending; 2]).unwrap()
    }

    fn coords(grid: &InstrumentGrid, p: &CellPair) -> (Vec<i64>, Vec<i64>) {
        (grid.coords(p.lower), grid.coords(p.upper))
    }

    #[test]
    fn counts_one_per_cell() {
        let data = Dataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
        )
        .unwrap();
        let v = validate_dataset(data, &binary_grid(), &TestConfig::default()).unwrap();
        assert_eq!(v.counts, vec![1, 1, 1, 1]);
        assert_eq!(v.treatment.d_min(), 0.0);
        assert_eq!(v.treatment.d_max(), 1.0);
    }

    #[test]
    fn empty_cell_is_an_error_by_default() {
        let data = Dataset::new(
            vec![1.0, 2.0, 3.0],
            vec![0.0, 1.0, 0.0],
            vec![vec![0, 0], vec![0, 1], vec![1, 0]],
        )
        .unwrap();
        let err = validate_dataset(data, &binary_grid(), &TestConfig::default()).unwrap_err();
        match err {
            Error::EmptyInstrumentCell { cell } => assert_eq!(cell, vec![1, 1]),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn drop_pair_policy_removes_touching_pairs() {
        let data = Dataset::new(
            vec![1.0, 2.0, 3.0],
            vec![0.0, 1.0, 0.0],
            vec![vec![0, 0], vec![0, 1], vec![1, 0]],
        )
        .unwrap();
        let config = TestConfig { empty_cell_policy: EmptyCellPolicy::DropPair, ..Default::default() };
        let v = validate_dataset(data, &binary_grid(), &config).unwrap();
        assert_eq!(v.pairs.len(), 2);
        assert_eq!(v.dropped_pairs.len(), 2);
        assert!(v.dropped_pairs.iter().all(|p| p.upper == 3));
        assert!(!v.warnings.is_empty());
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            Dataset::new(vec![1.0], vec![0.0, 1.0], vec![vec![0, 0]]),
            Err(Error::LengthMismatch(_))
        ));
        let data = Dataset::new(vec![1.0, 2.0], vec![1.0, 1.0], vec![vec![0, 0], vec![1, 1]]).unwrap();
        assert!(matches!(
            validate_dataset(data, &binary_grid(), &TestConfig::default()),
            Err(Error::DegenerateTreatment(_))
        ));
        let data = Dataset::new(vec![1.0, 2.0], vec![0.0, 1.0], vec![vec![0, 2], vec![1, 1]]).unwrap();
        assert!(matches!(
            validate_dataset(data, &binary_grid(), &TestConfig::default()),
            Err(Error::UnknownInstrumentValue { dim: 1, value: 2 })
        ));
    }

    #[test]
    fn declared_support_requires_boundary_arms() {
        let data = Dataset::new(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
        )
        .unwrap();
        let config = TestConfig { treatment_support: Some(vec![0.0, 1.0, 2.0]), ..Default::default() };
        assert!(matches!(
            validate_dataset(data, &binary_grid(), &config),
            Err(Error::UnobservedTreatmentArm(v)) if v == 2.0
        ));
    }

    #[test]
    fn binary_pairs_in_documented_order() {
        let grid = binary_grid();
        let pairs: Vec<_> = enumerate_adjacent_pairs(&grid).iter().map(|p| coords(&grid, p)).collect();
        assert_eq!(
            pairs,
            vec![
                (vec![0, 0], vec![1, 0]),
                (vec![0, 1], vec![1, 1]),
                (vec![0, 0], vec![0, 1]),
                (vec![1, 0], vec![1, 1]),
            ]
        );
    }

    #[test]
    fn pair_counts() {
        let grid =
            InstrumentGrid::new(vec![vec![0, 1, 2], vec![0, 1]], vec![Direction::Ascending; 2]).unwrap();
        assert_eq!(enumerate_adjacent_pairs(&grid).len(), 7);

        let cube = InstrumentGrid::new(vec![vec![0, 1]; 3], vec![Direction::Ascending; 3]).unwrap();
        let pairs = enumerate_adjacent_pairs(&cube);
        // brute force: cells differing by one step in exactly one coordinate
        let mut brute = 0;
        for a in 0..8 {
            for b in 0..8 {
                let (ca, cb) = (cube.coords(a), cube.coords(b));
                let diff: Vec<i64> = ca.iter().zip(&cb).map(|(x, y)| y - x).collect();
                if diff.iter().filter(|&&x| x != 0).count() == 1 && diff.iter().sum::<i64>() == 1 {
                    brute += 1;
                    assert!(pairs.iter().any(|p| p.lower == a && p.upper == b));
                }
            }
        }
        assert_eq!(brute, 12);
        assert_eq!(pairs.len(), 12);
    }

    #[test]
    fn measure_parsing() {
        assert_eq!("dirac:0.05".parse::<XiMeasure>().unwrap(), XiMeasure::Dirac(0.05));
        let g: XiMeasure = "grid:0.1,1".parse().unwrap();
        assert_eq!(g.atoms(), vec![(0.1, 0.5), (1.0, 0.5)]);
        assert_eq!(g.to_string(), "grid:0.1,1");
        assert!("dirac:0".parse::<XiMeasure>().is_err());
        assert!("dirac:1.5".parse::<XiMeasure>().is_err());
        assert!("uniform:0.1".parse::<XiMeasure>().is_err());
        assert_eq!(XiMeasure::standard_grid().label(), "nu_bar");
        let s = XiMeasure::standard_grid().to_string();
        assert_eq!(s.parse::<XiMeasure>().unwrap(), XiMeasure::standard_grid());
    }
}
