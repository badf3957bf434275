//! Comparison tests: Hotelling's two-sample T², Pillai's trace MANOVA,
//! Mahalanobis (elliptical) rank tests, and sphericized center-outward tests.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{CorankError, Result};
use crate::rank_tests::{group_statistic, manova_test, two_sample_test, GridOptions, TestResult};
use crate::scores::ScoreFunction;
use crate::special::f_sf;

const TYLER_TOL: f64 = 1e-9;
const TYLER_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScatterKind {
    #[default]
    #[serde(alias = "sample_covariance")]
    Sample,
    Tyler,
}

impl ScatterKind {
    pub fn name(self) -> &'static str {
        match self {
            ScatterKind::Sample => "sample",
            ScatterKind::Tyler => "tyler",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterEstimate {
    pub matrix: DMatrix<f64>,
    pub kind: ScatterKind,
    pub location: DVector<f64>,
}

pub fn column_mean(z: &DMatrix<f64>) -> DVector<f64> {
    z.row_mean().transpose()
}

fn centered(z: &DMatrix<f64>, loc: &DVector<f64>) -> DMatrix<f64> {
    let mut out = z.clone();
    for mut row in out.row_iter_mut() {
        row -= loc.transpose();
    }
    out
}

/// Mean-centered covariance with the `1/(n-1)` normalization, no rank check.
pub fn covariance_matrix(z: &DMatrix<f64>) -> DMatrix<f64> {
    let zc = centered(z, &column_mean(z));
    let cov = zc.transpose() * &zc / (z.nrows() as f64 - 1.0);
    (&cov + cov.transpose()) * 0.5
}

fn require_pd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    if !(max > 0.0) || eig.eigenvalues.min() <= 1e-12 * max {
        return Err(CorankError::DegenerateInput(format!("{what} is singular")));
    }
    Ok(())
}

pub fn sample_covariance(z: &DMatrix<f64>) -> Result<ScatterEstimate> {
    if z.nrows() < 2 || z.ncols() == 0 {
        return Err(CorankError::InvalidInput("sample covariance needs at least two rows".into()));
    }
    let matrix = covariance_matrix(z);
    require_pd(&matrix, "sample covariance")?;
    Ok(ScatterEstimate { matrix, kind: ScatterKind::Sample, location: column_mean(z) })
}

/// Tyler's shape matrix around a fixed location, normalized to trace `d`.
pub fn tyler_scatter(z: &DMatrix<f64>, location: &DVector<f64>) -> Result<ScatterEstimate> {
    let (n, d) = z.shape();
    if location.len() != d {
        return Err(CorankError::InvalidInput("location has the wrong dimension".into()));
    }
    if n <= d {
        return Err(CorankError::DegenerateInput(format!("Tyler scatter needs more than {d} rows")));
    }
    let zc = centered(z, location);
    if zc.row_iter().any(|row| row.iter().all(|&v| v == 0.0)) {
        return Err(CorankError::DegenerateInput("an observation coincides with the location".into()));
    }
    let mut sigma = DMatrix::<f64>::identity(d, d);
    for _ in 0..TYLER_MAX_ITER {
        let inv = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| CorankError::Numerical("Tyler iterate lost positive definiteness".into()))?
            .inverse();
        let mut next = DMatrix::zeros(d, d);
        for row in zc.row_iter() {
            let x = row.transpose();
            let q = (x.transpose() * &inv * &x)[(0, 0)];
            next += &x * x.transpose() / q;
        }
        next = (&next + next.transpose()) * 0.5;
        let trace = next.trace();
        if !(trace > 0.0) || !trace.is_finite() {
            return Err(CorankError::Numerical("Tyler iterate degenerated".into()));
        }
        next *= d as f64 / trace;
        let diff = (&next - &sigma).amax();
        sigma = next;
        if diff < TYLER_TOL {
            require_pd(&sigma, "Tyler scatter")?;
            return Ok(ScatterEstimate { matrix: sigma, kind: ScatterKind::Tyler, location: location.clone() });
        }
    }
    Err(CorankError::Numerical(format!("Tyler iteration did not converge in {TYLER_MAX_ITER} steps")))
}

/// Scatter of the requested kind around the sample mean.
pub fn estimate_scatter(z: &DMatrix<f64>, kind: ScatterKind) -> Result<ScatterEstimate> {
    match kind {
        ScatterKind::Sample => sample_covariance(z),
        ScatterKind::Tyler => tyler_scatter(z, &column_mean(z)),
    }
}

fn inverse_sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(CorankError::DegenerateInput("scatter matrix is not positive definite".into()));
    }
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose())
}

/// Rows `Sigma^{-1/2} (z_i - location)` with the symmetric inverse root.
pub fn sphericize(z: &DMatrix<f64>, scatter: &ScatterEstimate) -> Result<DMatrix<f64>> {
    if scatter.matrix.nrows() != z.ncols() {
        return Err(CorankError::InvalidInput("scatter dimension does not match the data".into()));
    }
    let root = inverse_sqrt_spd(&scatter.matrix)?;
    Ok(centered(z, &scatter.location) * root)
}

/// Ranks of the moduli (1-based, ties by input order) and unit signs.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticalRanksSigns {
    pub ranks: Vec<usize>,
    pub signs: DMatrix<f64>,
    pub moduli: Vec<f64>,
}

impl EllipticalRanksSigns {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// `J(R_i / (n + 1)) S_i` for every observation.
    pub fn vector_scores(&self, score: &ScoreFunction) -> Result<DMatrix<f64>> {
        let n = self.len();
        let mut out = DMatrix::zeros(n, self.signs.ncols());
        for i in 0..n {
            let j = score.evaluate(self.ranks[i] as f64 / (n as f64 + 1.0))?;
            out.row_mut(i).copy_from(&(self.signs.row(i) * j));
        }
        Ok(out)
    }
}

pub fn elliptical_ranks_signs(z_ell: &DMatrix<f64>) -> EllipticalRanksSigns {
    let n = z_ell.nrows();
    let moduli: Vec<f64> = z_ell.row_iter().map(|r| r.norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| moduli[a].total_cmp(&moduli[b]));
    let mut ranks = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    let mut signs = z_ell.clone();
    for (i, mut row) in signs.row_iter_mut().enumerate() {
        if moduli[i] > 0.0 {
            row /= moduli[i];
        }
    }
    EllipticalRanksSigns { ranks, signs, moduli }
}

pub fn stack_rows(groups: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let Some(first) = groups.first() else {
        return Err(CorankError::InvalidInput("no groups supplied".into()));
    };
    let d = first.ncols();
    if groups.iter().any(|g| g.ncols() != d) {
        return Err(CorankError::InvalidInput("all groups must have the same dimension".into()));
    }
    let n = groups.iter().map(|g| g.nrows()).sum();
    let mut out = DMatrix::zeros(n, d);
    let mut start = 0;
    for g in groups {
        out.rows_mut(start, g.nrows()).copy_from(*g);
        start += g.nrows();
    }
    Ok(out)
}

pub fn split_rows(pooled: &DMatrix<f64>, sizes: &[usize]) -> Vec<DMatrix<f64>> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&size| {
            let g = pooled.rows(start, size).into_owned();
            start += size;
            g
        })
        .collect()
}

fn check_groups(groups: &[&DMatrix<f64>], min_size: usize) -> Result<Vec<usize>> {
    if groups.len() < 2 {
        return Err(CorankError::InvalidInput("need at least two groups".into()));
    }
    let sizes: Vec<usize> = groups.iter().map(|g| g.nrows()).collect();
    if let Some(k) = sizes.iter().position(|&s| s < min_size) {
        return Err(CorankError::InvalidInput(format!("group {} has fewer than {min_size} observations", k + 1)));
    }
    Ok(sizes)
}

/// Mahalanobis rank test of equal location over `K >= 2` groups, using the
/// pooled mean and scatter; chi-square with `(K - 1) d` degrees of freedom.
pub fn elliptical_rank_test(groups: &[&DMatrix<f64>], score: &ScoreFunction, kind: ScatterKind) -> Result<TestResult> {
    let sizes = check_groups(groups, 2)?;
    let pooled = stack_rows(groups)?;
    let scatter = estimate_scatter(&pooled, kind)?;
    let ers = elliptical_ranks_signs(&sphericize(&pooled, &scatter)?);
    let scores = ers.vector_scores(score)?;
    // elliptical scores are not centered, so the full design form is used
    Ok(group_statistic(&scores, &sizes, score, false)?.with_method("elliptical"))
}

pub fn elliptical_two_sample_test(
    sample1: &DMatrix<f64>,
    sample2: &DMatrix<f64>,
    score: &ScoreFunction,
    kind: ScatterKind,
) -> Result<TestResult> {
    elliptical_rank_test(&[sample1, sample2], score, kind)
}

/// Center-outward test on residuals sphericized by the pooled mean and
/// scatter. Groups of size two are required, as for the unsphericized test.
pub fn sphericized_center_outward_test(
    groups: &[&DMatrix<f64>],
    score: &ScoreFunction,
    opts: &GridOptions,
    kind: ScatterKind,
) -> Result<TestResult> {
    let sizes = check_groups(groups, 2)?;
    let pooled = stack_rows(groups)?;
    let scatter = estimate_scatter(&pooled, kind)?;
    let split = split_rows(&sphericize(&pooled, &scatter)?, &sizes);
    let result = if split.len() == 2 {
        two_sample_test(&split[0], &split[1], score, opts)?
    } else {
        manova_test(&split, score, opts)?
    };
    Ok(result.with_method(format!("co-sphericized-{}", kind.name())))
}

fn pooled_within(groups: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let d = groups[0].ncols();
    let mut e = DMatrix::zeros(d, d);
    for g in groups {
        let gc = centered(g, &column_mean(g));
        e += gc.transpose() * &gc;
    }
    (&e + e.transpose()) * 0.5
}

/// Two-sample Hotelling T², referred to `F(d, n - d - 1)` after scaling by
/// `(n - d - 1) / (d (n - 2))`. The reported statistic is T².
pub fn hotelling_two_sample(sample1: &DMatrix<f64>, sample2: &DMatrix<f64>) -> Result<TestResult> {
    let sizes = check_groups(&[sample1, sample2], 1)?;
    let d = sample1.ncols();
    if sample2.ncols() != d {
        return Err(CorankError::InvalidInput("samples must have the same dimension".into()));
    }
    let (n1, n2) = (sizes[0] as f64, sizes[1] as f64);
    let n = sizes[0] + sizes[1];
    if n < d + 2 {
        return Err(CorankError::InvalidInput(format!("Hotelling needs n >= d + 2, got n = {n}, d = {d}")));
    }
    let s_pooled = pooled_within(&[sample1, sample2]) / (n as f64 - 2.0);
    let diff = column_mean(sample1) - column_mean(sample2);
    let chol = s_pooled
        .cholesky()
        .ok_or_else(|| CorankError::DegenerateInput("pooled covariance is singular".into()))?;
    let t2 = n1 * n2 / n as f64 * diff.dot(&chol.solve(&diff));
    let df2 = (n - d - 1) as f64;
    let f = df2 / (d as f64 * (n as f64 - 2.0)) * t2;
    let p_value = f_sf(d as f64, df2, f)?;
    Ok(TestResult {
        method: "hotelling".into(),
        statistic: t2,
        dof: d as f64,
        dof_denominator: Some(df2),
        p_value,
        n,
        d,
        n_r: None,
        n_s: None,
        n_0: None,
        score: None,
        seed: None,
    })
}

/// Between-group (`H`) and within-group (`E`) SSCP matrices.
pub fn sscp(groups: &[&DMatrix<f64>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let pooled = stack_rows(groups)?;
    let grand = column_mean(&pooled);
    let d = pooled.ncols();
    let mut h = DMatrix::zeros(d, d);
    for g in groups {
        let diff = column_mean(g) - &grand;
        h += &diff * diff.transpose() * g.nrows() as f64;
    }
    Ok(((&h + h.transpose()) * 0.5, pooled_within(groups)))
}

/// Pillai's trace `V = tr(H (H + E)^{-1})` with the usual F approximation.
/// The reported statistic is `V`.
pub fn pillai_manova(groups: &[&DMatrix<f64>]) -> Result<TestResult> {
    let sizes = check_groups(groups, 1)?;
    let (h, e) = sscp(groups)?;
    let p = h.nrows();
    let k = sizes.len();
    let n: usize = sizes.iter().sum();
    if n < k + p + 1 {
        return Err(CorankError::InvalidInput(format!("Pillai needs n > K + d, got n = {n}")));
    }
    let total = &h + &e;
    let chol = total
        .cholesky()
        .ok_or_else(|| CorankError::DegenerateInput("total SSCP matrix is singular".into()))?;
    // tr(H T^{-1}) = tr(T^{-1} H)
    let v = chol.solve(&h).trace();
    let q = (k - 1) as f64;
    let pf = p as f64;
    let s = pf.min(q);
    let m = ((pf - q).abs() - 1.0) / 2.0;
    let nn = (n as f64 - k as f64 - pf - 1.0) / 2.0;
    let df1 = s * (2.0 * m + s + 1.0);
    let df2 = s * (2.0 * nn + s + 1.0);
    let f = (2.0 * nn + s + 1.0) / (2.0 * m + s + 1.0) * v / (s - v);
    let p_value = if v >= s { 0.0 } else { f_sf(df1, df2, f)? };
    Ok(TestResult {
        method: "pillai".into(),
        statistic: v,
        dof: df1,
        dof_denominator: Some(df2),
        p_value,
        n,
        d: p,
        n_r: None,
        n_s: None,
        n_0: None,
        score: None,
        seed: None,
    })
}
