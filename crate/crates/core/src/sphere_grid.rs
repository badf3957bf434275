//! Regular grids of the closed unit ball.
//!
//! A grid of `n` points is `n_R` concentric spheres of radii
//! `r / (n_R + 1)` times a common set of `n_S` unit directions, plus `n_0`
//! extra points: a single origin when `n_0 == 1`, or `n_0` points at radius
//! `1 / (2 (n_R + 1))` along randomly selected directions when `n_0 >= 2`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CorankError, Result};
use crate::special::normal_quantile;

/// How `n` is split into `n_R * n_S + n_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    /// Scan `n_R` downward from `floor(sqrt(n))`.
    Balanced,
    Explicit { n_r: usize, n_s: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct GridSpec {
    pub n: usize,
    pub d: usize,
    pub n_r: usize,
    pub n_s: usize,
    pub n_0: usize,
    pub symmetrize: bool,
    pub tie_break_seed: u64,
}

/// Splits `n` into `(n_R, n_S, n_0)` with `n = n_R n_S + n_0` and
/// `0 <= n_0 < min(n_R, n_S)`.
///
/// With `even_directions` the balanced scan only considers even `n_S`
/// (the largest even value not exceeding `n / n_R`).
pub fn factorize(n: usize, policy: Factorization, even_directions: bool) -> Result<(usize, usize, usize)> {
    if n < 2 {
        return Err(CorankError::InvalidSpec(format!("sample size must be at least 2, got {n}")));
    }
    match policy {
        Factorization::Explicit { n_r, n_s } => {
            if n_r == 0 || n_s == 0 || n_r * n_s > n {
                return Err(CorankError::InvalidSpec(format!(
                    "n_R = {n_r}, n_S = {n_s} does not fit n = {n}"
                )));
            }
            let n_0 = n - n_r * n_s;
            if n_0 >= n_r.min(n_s) {
                return Err(CorankError::InvalidSpec(format!(
                    "n = {n} = {n_r}*{n_s} + {n_0} violates n_0 < min(n_R, n_S)"
                )));
            }
            if even_directions && n_s % 2 != 0 {
                return Err(CorankError::InvalidSpec(format!(
                    "a symmetric direction set needs an even n_S, got {n_s}"
                )));
            }
            Ok((n_r, n_s, n_0))
        }
        Factorization::Balanced => {
            let start = (n as f64).sqrt().floor() as usize;
            // an even n_S can rule out every n_R <= sqrt(n) (e.g. n = 7); the
            // scan then continues upward with fewer directions than radii
            let upward = (start + 1..=n / 2).filter(|_| even_directions);
            for n_r in (1..=start.max(1)).rev().chain(upward) {
                let mut n_s = n / n_r;
                if even_directions {
                    n_s -= n_s % 2;
                }
                if n_s == 0 {
                    continue;
                }
                let n_0 = n - n_r * n_s;
                if n_0 < n_r.min(n_s) {
                    return Ok((n_r, n_s, n_0));
                }
            }
            Err(CorankError::InvalidSpec(format!(
                "no balanced factorization of n = {n}{}",
                if even_directions { " with even n_S" } else { "" }
            )))
        }
    }
}

impl GridSpec {
    pub fn new(n: usize, d: usize, policy: Factorization, symmetrize: bool, tie_break_seed: u64) -> Result<Self> {
        if d < 1 {
            return Err(CorankError::InvalidSpec("dimension must be at least 1".into()));
        }
        let (n_r, n_s, n_0) = factorize(n, policy, symmetrize)?;
        Ok(GridSpec { n, d, n_r, n_s, n_0, symmetrize, tie_break_seed })
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(CorankError::InvalidSpec("dimension must be at least 1".into()));
        }
        if self.n_r == 0 || self.n_s == 0 || self.n_r * self.n_s + self.n_0 != self.n {
            return Err(CorankError::InvalidSpec(format!(
                "n = {} is not n_R*n_S + n_0 = {}*{} + {}",
                self.n, self.n_r, self.n_s, self.n_0
            )));
        }
        if self.n_0 >= self.n_r.min(self.n_s) {
            return Err(CorankError::InvalidSpec("n_0 must be below min(n_R, n_S)".into()));
        }
        if self.symmetrize && self.n_s % 2 != 0 {
            return Err(CorankError::InvalidSpec("symmetrize requires an even n_S".into()));
        }
        Ok(())
    }

    /// True when the vector scores of any spherical score sum to zero over
    /// the grid: antipodal directions and no tie-break points.
    pub fn scores_sum_to_zero(&self) -> bool {
        self.symmetrize && self.n_0 <= 1
    }
}

/// What a gridpoint is, by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    /// `(radius / (n_R + 1)) * directions[direction]`, both indices 1-based.
    Regular { radius: usize, direction: usize },
    Origin,
    /// Point at radius `1 / (2 (n_R + 1))` along `directions[direction]`.
    TieBreak { direction: usize },
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: GridSpec,
    /// `n x d`, one gridpoint per row.
    pub points: DMatrix<f64>,
    pub kinds: Vec<PointKind>,
}

/// `n_s` unit directions in dimension `d`.
///
/// * `d == 2`: equispaced angles `2 pi k / n_s`.
/// * `d == 3`: a golden-angle (Fibonacci) spiral.
/// * `d >= 4`: a Halton sequence pushed through the Gaussian quantile
///   function and normalized.
///
/// With `symmetrize`, the second half of the set is the exact negation of
/// the first half, so the directions sum to the zero vector.
pub fn unit_directions(n_s: usize, d: usize, symmetrize: bool) -> Result<Vec<DVector<f64>>> {
    if d < 1 {
        return Err(CorankError::InvalidSpec("dimension must be at least 1".into()));
    }
    if n_s == 0 {
        return Err(CorankError::InvalidSpec("need at least one direction".into()));
    }
    if symmetrize && n_s % 2 != 0 {
        return Err(CorankError::InvalidSpec(format!(
            "symmetric direction sets need an even count, got {n_s}"
        )));
    }

    if symmetrize {
        let half = n_s / 2;
        let mut dirs = match d {
            1 => vec![DVector::from_element(1, 1.0); half],
            2 => (0..half)
                .map(|k| angle(std::f64::consts::PI * k as f64 / half as f64))
                .collect(),
            3 => spiral(half, true),
            _ => halton_directions(half, d),
        };
        let negated: Vec<_> = dirs.iter().map(|s| -s).collect();
        dirs.extend(negated);
        return Ok(dirs);
    }

    Ok(match d {
        1 => (0..n_s)
            .map(|k| DVector::from_element(1, if k % 2 == 0 { 1.0 } else { -1.0 }))
            .collect(),
        2 => (0..n_s)
            .map(|k| angle(2.0 * std::f64::consts::PI * k as f64 / n_s as f64))
            .collect(),
        3 => spiral(n_s, false),
        _ => halton_directions(n_s, d),
    })
}

fn angle(theta: f64) -> DVector<f64> {
    DVector::from_vec(vec![theta.cos(), theta.sin()])
}

// Golden-angle spiral, uniform in height over the sphere (or the upper
// hemisphere), which is uniform in area by Archimedes' theorem.
fn spiral(count: usize, hemisphere: bool) -> Vec<DVector<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let frac = (k as f64 + 0.5) / count as f64;
            let z = if hemisphere { 1.0 - frac } else { 1.0 - 2.0 * frac };
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            DVector::from_vec(vec![rho * phi.cos(), rho * phi.sin(), z])
        })
        .collect()
}

fn first_primes(k: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(k);
    let mut candidate = 2u64;
    while primes.len() < k {
        if primes.iter().all(|p| candidate % p != 0) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * factor;
        index /= base;
        factor *= inv;
    }
    out
}

fn halton_directions(count: usize, d: usize) -> Vec<DVector<f64>> {
    let primes = first_primes(d);
    (0..count)
        .map(|k| {
            let v = DVector::from_iterator(
                d,
                primes.iter().map(|&b| normal_quantile(radical_inverse(k as u64 + 1, b))),
            );
            let norm = v.norm();
            v / norm
        })
        .collect()
}

/// Builds the grid described by `spec`.
pub fn build_grid(spec: &GridSpec) -> Result<Grid> {
    spec.validate()?;
    let dirs = unit_directions(spec.n_s, spec.d, spec.symmetrize)?;
    let scale = 1.0 / (spec.n_r as f64 + 1.0);

    let mut points = DMatrix::zeros(spec.n, spec.d);
    let mut kinds = Vec::with_capacity(spec.n);
    let mut row = 0;
    for r in 1..=spec.n_r {
        let radius = r as f64 * scale;
        for (s, dir) in dirs.iter().enumerate() {
            points.row_mut(row).copy_from(&(dir * radius).transpose());
            kinds.push(PointKind::Regular { radius: r, direction: s + 1 });
            row += 1;
        }
    }

    match spec.n_0 {
        0 => {}
        1 => kinds.push(PointKind::Origin),
        n_0 => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.tie_break_seed);
            let chosen = index::sample(&mut rng, spec.n_s, n_0);
            for s in chosen.iter() {
                points.row_mut(row).copy_from(&(&dirs[s] * (0.5 * scale)).transpose());
                kinds.push(PointKind::TieBreak { direction: s + 1 });
                row += 1;
            }
        }
    }
    debug_assert_eq!(kinds.len(), spec.n);
    Ok(Grid { spec: *spec, points, kinds })
}

impl Grid {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// The grid with every point replaced by `rotation * point`.
    pub fn rotated(&self, rotation: &DMatrix<f64>) -> Result<Grid> {
        if rotation.nrows() != self.dim() || rotation.ncols() != self.dim() {
            return Err(CorankError::InvalidInput(format!(
                "rotation must be {d}x{d}",
                d = self.dim()
            )));
        }
        Ok(Grid {
            spec: self.spec,
            points: &self.points * rotation.transpose(),
            kinds: self.kinds.clone(),
        })
    }

    /// CSV dump: `x1..xd, radius_index, direction_index, is_tiebreak`.
    ///
    /// The origin point has radius and direction index 0; tie-break points
    /// have radius index 0.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim()).map(|k| format!("x{k}")).collect();
        header.extend(["radius_index", "direction_index", "is_tiebreak"].map(String::from));
        wtr.write_record(&header)?;
        for (i, kind) in self.kinds.iter().enumerate() {
            let mut rec: Vec<String> = self.points.row(i).iter().map(|v| v.to_string()).collect();
            let (r, s, tb) = match *kind {
                PointKind::Regular { radius, direction } => (radius, direction, false),
                PointKind::Origin => (0, 0, false),
                PointKind::TieBreak { direction } => (0, direction, true),
            };
            rec.push(r.to_string());
            rec.push(s.to_string());
            rec.push(tb.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads back a grid dump. The returned points and kinds are exactly
    /// those written; `spec` is reconstructed from the counts, with the
    /// symmetry flag inferred from whether the directions come in
    /// antipodal pairs and the tie-break seed unknown (set to 0).
    pub fn read_csv<R: Read>(input: R) -> Result<Grid> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.len() < 4 {
            return Err(CorankError::Data("grid dump needs at least 4 columns".into()));
        }
        let d = headers.len() - 3;
        let mut coords = Vec::new();
        let mut kinds = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = line + 2;
            let parse_f = |k: usize| -> Result<f64> {
                rec[k].trim().parse::<f64>().map_err(|_| {
                    CorankError::Data(format!("row {row}: non-numeric value {:?}", &rec[k]))
                })
            };
            let parse_u = |k: usize| -> Result<usize> {
                rec[k].trim().parse::<usize>().map_err(|_| {
                    CorankError::Data(format!("row {row}: bad index {:?}", &rec[k]))
                })
            };
            for k in 0..d {
                coords.push(parse_f(k)?);
            }
            let r = parse_u(d)?;
            let s = parse_u(d + 1)?;
            let tb: bool = rec[d + 2].trim().parse().map_err(|_| {
                CorankError::Data(format!("row {row}: bad is_tiebreak flag {:?}", &rec[d + 2]))
            })?;
            kinds.push(match (r, tb) {
                (_, true) => PointKind::TieBreak { direction: s },
                (0, false) => PointKind::Origin,
                (r, false) => PointKind::Regular { radius: r, direction: s },
            });
        }
        let n = kinds.len();
        if n == 0 {
            return Err(CorankError::Data("grid dump has no points".into()));
        }
        let points = DMatrix::from_row_slice(n, d, &coords);
        let n_r = kinds
            .iter()
            .filter_map(|k| match k {
                PointKind::Regular { radius, .. } => Some(*radius),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let n_s = kinds
            .iter()
            .filter_map(|k| match k {
                PointKind::Regular { direction, .. } => Some(*direction),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let n_0 = n - n_r * n_s;
        let symmetrize = n_s % 2 == 0 && {
            let half = n_s / 2;
            (0..half).all(|s| {
                (0..d).all(|k| points[(s, k)] == -points[(s + half, k)])
            })
        };
        let spec = GridSpec { n, d, n_r, n_s, n_0, symmetrize, tie_break_seed: 0 };
        Ok(Grid { spec, points, kinds })
    }
}
