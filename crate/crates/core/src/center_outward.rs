//! Empirical center-outward distribution function, ranks and signs.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::assignment::{solve_assignment, squared_cost};
use crate::error::{CorankError, Result};
use crate::sphere_grid::{build_grid, Grid, GridSpec, PointKind};

/// Optimal pairing of a sample with a grid: observation `i` is sent to
/// gridpoint `assignment[i]`.
#[derive(Debug, Clone)]
pub struct CenterOutwardMap {
    pub grid: Grid,
    pub assignment: Vec<usize>,
    pub total_cost: f64,
}

impl CenterOutwardMap {
    /// `F_i`, the gridpoint assigned to observation `i`.
    pub fn value(&self, i: usize) -> DVector<f64> {
        self.grid.points.row(self.assignment[i]).transpose()
    }

    /// All `F_i` as an `n x d` matrix.
    pub fn values(&self) -> DMatrix<f64> {
        let n = self.assignment.len();
        DMatrix::from_fn(n, self.grid.dim(), |i, k| self.grid.points[(self.assignment[i], k)])
    }

    pub fn spec(&self) -> &GridSpec {
        &self.grid.spec
    }
}

/// A center-outward rank, kept as the construction index rather than a
/// float so that equal ranks compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rank {
    /// Mapped to the origin.
    Zero,
    /// Mapped to a tie-break point.
    Half,
    /// Mapped to radius index `r` in `1..=n_R`.
    Integer(usize),
}

impl Rank {
    pub fn value(self) -> f64 {
        match self {
            Rank::Zero => 0.0,
            Rank::Half => 0.5,
            Rank::Integer(r) => r as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RanksSigns {
    pub ranks: Vec<Rank>,
    /// `n x d`; rows are unit vectors, or zero for the origin.
    pub signs: DMatrix<f64>,
    pub n_r: usize,
}

impl RanksSigns {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.signs.ncols()
    }

    /// CSV dump with columns `obs_index, rank, s1..sd, fx1..fxd`.
    pub fn write_csv<W: Write>(&self, map: &CenterOutwardMap, out: W) -> Result<()> {
        let d = self.dim();
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["obs_index".to_string(), "rank".to_string()];
        header.extend((1..=d).map(|k| format!("s{k}")));
        header.extend((1..=d).map(|k| format!("fx{k}")));
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![(i + 1).to_string(), self.ranks[i].value().to_string()];
            rec.extend(self.signs.row(i).iter().map(|v| v.to_string()));
            rec.extend(map.value(i).iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_sample(sample: &DMatrix<f64>) -> Result<()> {
    if sample.ncols() < 2 {
        return Err(CorankError::InvalidSpec(format!(
            "center-outward ranks need dimension d >= 2, got {}",
            sample.ncols()
        )));
    }
    if sample.nrows() < 2 {
        return Err(CorankError::InvalidInput("need at least two observations".into()));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(CorankError::InvalidInput("sample contains non-finite values".into()));
    }
    Ok(())
}

/// Builds the grid for `spec` and pairs it optimally with `sample` (`n x d`).
pub fn empirical_map(sample: &DMatrix<f64>, spec: &GridSpec) -> Result<CenterOutwardMap> {
    check_sample(sample)?;
    if spec.n != sample.nrows() || spec.d != sample.ncols() {
        return Err(CorankError::InvalidInput(format!(
            "sample is {}x{} but grid spec is for n = {}, d = {}",
            sample.nrows(),
            sample.ncols(),
            spec.n,
            spec.d
        )));
    }
    let grid = build_grid(spec)?;
    empirical_map_with_grid(sample, grid)
}

/// Pairs `sample` with a prebuilt (for instance, rotated) grid.
pub fn empirical_map_with_grid(sample: &DMatrix<f64>, grid: Grid) -> Result<CenterOutwardMap> {
    check_sample(sample)?;
    let cost = squared_cost(sample, &grid.points)?;
    let pairing = solve_assignment(&cost)?;
    Ok(CenterOutwardMap { grid, assignment: pairing.assignment, total_cost: pairing.total_cost })
}

/// Ranks from the radius indices of the assigned points, signs as the
/// normalized assigned points.
pub fn ranks_signs(map: &CenterOutwardMap) -> RanksSigns {
    let n = map.assignment.len();
    let d = map.grid.dim();
    let mut ranks = Vec::with_capacity(n);
    let mut signs = DMatrix::zeros(n, d);
    for (i, &g) in map.assignment.iter().enumerate() {
        let rank = match map.grid.kinds[g] {
            PointKind::Regular { radius, .. } => Rank::Integer(radius),
            PointKind::Origin => Rank::Zero,
            PointKind::TieBreak { .. } => Rank::Half,
        };
        ranks.push(rank);
        if rank != Rank::Zero {
            let point = map.grid.points.row(g);
            let norm = point.norm();
            signs.row_mut(i).copy_from(&(point / norm));
        }
    }
    RanksSigns { ranks, signs, n_r: map.grid.spec.n_r }
}

/// Convenience: map, then extract ranks and signs.
pub fn center_outward_ranks(sample: &DMatrix<f64>, spec: &GridSpec) -> Result<(CenterOutwardMap, RanksSigns)> {
    let map = empirical_map(sample, spec)?;
    let rs = ranks_signs(&map);
    Ok((map, rs))
}
