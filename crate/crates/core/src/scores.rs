//! Score functions and the vector scores they induce on ranks and signs.
//!
//! A spherical score is a scalar `J` on `[0, 1)`; applied to a rank and a
//! sign it gives `J(R / (n_R + 1)) S`. The standard kinds carry their exact
//! `int_0^1 J^2` constants; custom scores get theirs by quadrature.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::center_outward::{Rank, RanksSigns};
use crate::error::{CorankError, Result};
use crate::special::integrate_unit;
pub use crate::special::{chi_sq_quantile, chi_sq_sf};
use crate::sphere_grid::Grid;

/// Van der Waerden evaluation is clamped to this argument.
pub const VDW_CLAMP: f64 = 1.0 - 1e-12;

const NORM_SQ_REL_TOL: f64 = 1e-10;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// A user-supplied scalar score with its precomputed squared norm.
#[derive(Clone)]
pub struct CustomScore {
    name: String,
    j: ScalarFn,
    norm_sq: f64,
}

impl CustomScore {
    /// Wraps `j`, integrating `j^2` over `[0, 1)`. Fails when the integral
    /// is zero, diverges, or does not converge.
    pub fn new<F>(name: impl Into<String>, j: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let norm_sq = integrate_unit(|u| j(u).powi(2), NORM_SQ_REL_TOL)?;
        if !(norm_sq > 0.0 && norm_sq.is_finite()) {
            return Err(CorankError::InvalidScore(format!(
                "int J^2 must be positive and finite, got {norm_sq}"
            )));
        }
        Ok(CustomScore { name: name.into(), j: Arc::new(j), norm_sq })
    }
}

#[derive(Clone)]
pub enum ScoreFunction {
    /// `J(r) = 1`.
    Sign,
    /// `J(r) = r`.
    Wilcoxon,
    /// `J(r) = sqrt(Psi_d^{-1}(r))`, `Psi_d` the chi-square(d) CDF.
    VanDerWaerden { d: usize },
    Custom(CustomScore),
}

impl fmt::Debug for ScoreFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl ScoreFunction {
    /// Parses `sign`, `wilcoxon` or `vdw`; the van der Waerden score takes
    /// its dimension from `d`.
    pub fn from_name(name: &str, d: usize) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "sign" => Ok(ScoreFunction::Sign),
            "wilcoxon" => Ok(ScoreFunction::Wilcoxon),
            "vdw" | "van-der-waerden" | "vanderwaerden" => Ok(ScoreFunction::VanDerWaerden { d }),
            other => Err(CorankError::InvalidScore(format!(
                "unknown score {other:?} (expected sign, wilcoxon or vdw)"
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ScoreFunction::Sign => "sign".into(),
            ScoreFunction::Wilcoxon => "wilcoxon".into(),
            ScoreFunction::VanDerWaerden { .. } => "vdw".into(),
            ScoreFunction::Custom(c) => c.name.clone(),
        }
    }

    /// `J(r)` for `r` in `[0, 1)`.
    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&r) {
            return Err(CorankError::InvalidInput(format!("score argument must lie in [0, 1), got {r}")));
        }
        Ok(match self {
            ScoreFunction::Sign => 1.0,
            ScoreFunction::Wilcoxon => r,
            ScoreFunction::VanDerWaerden { d } => {
                if r == 0.0 {
                    return Ok(0.0);
                }
                let r = if r > VDW_CLAMP {
                    log::warn!("van der Waerden score clamped at r = {VDW_CLAMP}");
                    VDW_CLAMP
                } else {
                    r
                };
                chi_sq_quantile(*d as f64, r)?.sqrt()
            }
            ScoreFunction::Custom(c) => (c.j)(r),
        })
    }

    /// `int_0^1 J^2(u) du`.
    pub fn norm_sq(&self) -> f64 {
        match self {
            ScoreFunction::Sign => 1.0,
            ScoreFunction::Wilcoxon => 1.0 / 3.0,
            ScoreFunction::VanDerWaerden { d } => *d as f64,
            ScoreFunction::Custom(c) => c.norm_sq,
        }
    }

    /// `J(rank / (n_R + 1)) * sign`; the zero vector when the sign is zero.
    pub fn vector_score(&self, rank: Rank, sign: &DVector<f64>, n_r: usize) -> Result<DVector<f64>> {
        if rank == Rank::Zero || sign.iter().all(|v| *v == 0.0) {
            return Ok(DVector::zeros(sign.len()));
        }
        let j = self.evaluate(rank.value() / (n_r as f64 + 1.0))?;
        Ok(sign * j)
    }

    /// Vector scores of every observation, `n x d`.
    pub fn vector_scores(&self, rs: &RanksSigns) -> Result<DMatrix<f64>> {
        let n = rs.len();
        let d = rs.dim();
        let mut out = DMatrix::zeros(n, d);
        // one evaluation per distinct rank value
        let mut cache: Vec<(Rank, f64)> = Vec::new();
        for i in 0..n {
            let rank = rs.ranks[i];
            if rank == Rank::Zero {
                continue;
            }
            let j = match cache.iter().find(|(r, _)| *r == rank) {
                Some(&(_, j)) => j,
                None => {
                    let j = self.evaluate(rank.value() / (rs.n_r as f64 + 1.0))?;
                    cache.push((rank, j));
                    j
                }
            };
            for k in 0..d {
                out[(i, k)] = j * rs.signs[(i, k)];
            }
        }
        Ok(out)
    }
}

/// A general (not necessarily spherical) vector score `J(u)` on the unit
/// ball, with its information matrix `int J J' dU_d`.
#[derive(Clone)]
pub struct VectorScore {
    name: String,
    f: VectorFn,
    info: Option<DMatrix<f64>>,
}

impl fmt::Debug for VectorScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorScore").field("name", &self.name).field("info", &self.info).finish()
    }
}

impl VectorScore {
    /// `info` is the user-supplied `d x d` matrix `int J J' dU_d`; its full
    /// rank is assumed, not checked here. Pass `None` to have it estimated
    /// as the average of `J(g) J(g)'` over the gridpoints.
    pub fn new<F>(name: impl Into<String>, f: F, info: Option<DMatrix<f64>>) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        VectorScore { name: name.into(), f: Arc::new(f), info }
    }

    /// The general form of a spherical score, with its exact information
    /// matrix `(int J^2 / d) I_d`.
    pub fn from_spherical(score: ScoreFunction, d: usize) -> Self {
        let info = DMatrix::identity(d, d) * (score.norm_sq() / d as f64);
        let name = score.name();
        VectorScore::new(
            name,
            move |u: &DVector<f64>| {
                let r = u.norm();
                if r == 0.0 {
                    return DVector::zeros(u.len());
                }
                let j = score.evaluate(r).unwrap_or(f64::NAN);
                u * (j / r)
            },
            Some(info),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.f)(u)
    }

    pub fn info_matrix(&self, grid: &Grid) -> DMatrix<f64> {
        if let Some(info) = &self.info {
            return info.clone();
        }
        let d = grid.dim();
        let mut acc = DMatrix::zeros(d, d);
        for row in grid.points.row_iter() {
            let j = self.apply(&row.transpose());
            acc += &j * j.transpose();
        }
        acc / grid.len() as f64
    }

    /// `J(F_i)` for every observation, where `F_i = (R_i / (n_R + 1)) S_i`
    /// is the assigned gridpoint.
    pub fn vector_scores(&self, rs: &RanksSigns) -> DMatrix<f64> {
        let n = rs.len();
        let d = rs.dim();
        let mut out = DMatrix::zeros(n, d);
        for i in 0..n {
            let u = rs.signs.row(i).transpose() * (rs.ranks[i].value() / (rs.n_r as f64 + 1.0));
            out.row_mut(i).copy_from(&self.apply(&u).transpose());
        }
        out
    }
}
