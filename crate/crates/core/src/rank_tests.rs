//! Center-outward rank tests for multiple-output regression, two-sample
//! location and one-way MANOVA.
//!
//! Every test is a quadratic form in
//! `Lambda = n^{-1} sum_i K' (c_i - c_bar) J_i'`, where `J_i` is the vector
//! score of observation `i` and `K = V_c^{-1/2}` standardizes the
//! covariates. For group designs on a grid whose vector scores sum to zero
//! the form collapses to weighted squared norms of group score sums.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::center_outward::{center_outward_ranks, empirical_map_with_grid, ranks_signs, RanksSigns};
use crate::error::{CorankError, Result};
use crate::scores::{chi_sq_sf, ScoreFunction, VectorScore};
use crate::sphere_grid::{build_grid, Factorization, Grid, GridSpec};

pub const DEFAULT_SEED: u64 = 0x00C0_FFEE;

/// Relative eigenvalue floor below which a covariate design is rejected.
const DESIGN_RCOND: f64 = 1e-10;

/// Outcome of a test, with enough provenance to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: String,
    pub statistic: f64,
    pub dof: f64,
    /// Denominator degrees of freedom, for F-referred tests.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof_denominator: Option<f64>,
    pub p_value: f64,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "n_R")]
    pub n_r: Option<usize>,
    #[serde(rename = "n_S")]
    pub n_s: Option<usize>,
    pub n_0: Option<usize>,
    pub score: Option<String>,
    pub seed: Option<u64>,
}

impl TestResult {
    /// A chi-square referred result without provenance.
    pub fn chi_square(method: impl Into<String>, statistic: f64, dof: usize, n: usize, d: usize) -> Result<Self> {
        let p_value = chi_sq_sf(dof as f64, statistic.max(0.0))?;
        Ok(TestResult {
            method: method.into(),
            statistic,
            dof: dof as f64,
            dof_denominator: None,
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

    pub fn with_grid(mut self, spec: &GridSpec) -> Self {
        self.n_r = Some(spec.n_r);
        self.n_s = Some(spec.n_s);
        self.n_0 = Some(spec.n_0);
        self.seed = Some(spec.tie_break_seed);
        self
    }

    pub fn with_score(mut self, name: impl Into<String>) -> Self {
        self.score = Some(name.into());
        self
    }

    pub fn with_method(mut self, method: impl Into<String>) -> Self {
        self.method = method.into();
        self
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// How the grid is chosen for a given pooled sample size and dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridOptions {
    pub factorization: Factorization,
    pub symmetrize: bool,
    pub seed: u64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { factorization: Factorization::Balanced, symmetrize: true, seed: DEFAULT_SEED }
    }
}

impl GridOptions {
    pub fn explicit(n_r: usize, n_s: usize) -> Self {
        GridOptions { factorization: Factorization::Explicit { n_r, n_s }, ..Default::default() }
    }

    pub fn spec(&self, n: usize, d: usize) -> Result<GridSpec> {
        GridSpec::new(n, d, self.factorization, self.symmetrize, self.seed)
    }
}

/// Centered and standardized covariates.
#[derive(Debug, Clone)]
pub struct CovariateDesign {
    /// `n x m` raw covariates.
    pub c: DMatrix<f64>,
    pub c_bar: DVector<f64>,
    /// `n^{-1} sum (c_i - c_bar)(c_i - c_bar)'`.
    pub v_c: DMatrix<f64>,
    /// Symmetric inverse square root of `v_c`.
    pub k_n: DMatrix<f64>,
}

impl CovariateDesign {
    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn m(&self) -> usize {
        self.c.ncols()
    }

    fn centered(&self) -> DMatrix<f64> {
        let mut cc = self.c.clone();
        for mut row in cc.row_iter_mut() {
            row -= self.c_bar.transpose();
        }
        cc
    }
}

/// `Z_i = Y_i - beta0' c_i`; the intercept is left in place.
pub fn residuals(y: &DMatrix<f64>, c: &DMatrix<f64>, beta0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.nrows() != y.nrows() {
        return Err(CorankError::InvalidInput(format!(
            "responses have {} rows but covariates have {}",
            y.nrows(),
            c.nrows()
        )));
    }
    if beta0.nrows() != c.ncols() || beta0.ncols() != y.ncols() {
        return Err(CorankError::InvalidInput(format!(
            "beta0 must be {}x{}, got {}x{}",
            c.ncols(),
            y.ncols(),
            beta0.nrows(),
            beta0.ncols()
        )));
    }
    Ok(y - c * beta0)
}

/// Symmetric inverse square root via the eigendecomposition, with the
/// relative eigenvalue floor check used for designs.
fn inverse_sqrt_psd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min < DESIGN_RCOND * max {
        return None;
    }
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    Some(&eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose())
}

pub fn standardize_design(c: &DMatrix<f64>) -> Result<CovariateDesign> {
    let n = c.nrows();
    let m = c.ncols();
    if m == 0 {
        return Err(CorankError::InvalidInput("design needs at least one covariate".into()));
    }
    if n <= m {
        return Err(CorankError::InvalidInput(format!("need more observations ({n}) than covariates ({m})")));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(CorankError::InvalidInput("covariates contain non-finite values".into()));
    }
    let c_bar = c.row_mean().transpose();
    let mut cc = c.clone();
    for mut row in cc.row_iter_mut() {
        row -= c_bar.transpose();
    }
    let v_c = (cc.transpose() * &cc) / n as f64;
    let v_c = (&v_c + v_c.transpose()) * 0.5;
    let k_n = inverse_sqrt_psd(&v_c).ok_or_else(|| {
        CorankError::DegenerateDesign("covariate cross-product matrix is numerically singular".into())
    })?;
    Ok(CovariateDesign { c: c.clone(), c_bar, v_c, k_n })
}

/// `Lambda = n^{-1} K' sum_i (c_i - c_bar) J_i'` from precomputed vector
/// scores (`n x d`).
pub fn lambda_from_scores(design: &CovariateDesign, scores: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if scores.nrows() != design.n() {
        return Err(CorankError::InvalidInput(format!(
            "{} vector scores for a design with {} rows",
            scores.nrows(),
            design.n()
        )));
    }
    Ok(design.k_n.transpose() * design.centered().transpose() * scores / design.n() as f64)
}

pub fn lambda_tilde(design: &CovariateDesign, rs: &RanksSigns, score: &ScoreFunction) -> Result<DMatrix<f64>> {
    lambda_from_scores(design, &score.vector_scores(rs)?)
}

/// `n vec(Lambda)' (I_J^{-1} kron I_m) vec(Lambda)`, which equals
/// `n tr(I_J^{-1} Lambda' Lambda)`; chi-square with `m d` degrees of freedom.
pub fn q_general(lambda: &DMatrix<f64>, score_info: &DMatrix<f64>, n: usize) -> Result<TestResult> {
    let (m, d) = lambda.shape();
    if score_info.shape() != (d, d) {
        return Err(CorankError::InvalidInput(format!("score information must be {d}x{d}")));
    }
    let inv = score_info
        .clone()
        .cholesky()
        .ok_or_else(|| CorankError::InvalidScore("score information matrix is not positive definite".into()))?
        .inverse();
    let gram = lambda.transpose() * lambda;
    let statistic = n as f64 * (inv * gram).trace();
    TestResult::chi_square("q-general", statistic, m * d, n, d)
}

/// `(n d / int J^2) ||vec Lambda||^2`; chi-square with `m d` degrees of freedom.
pub fn q_spherical(lambda: &DMatrix<f64>, score: &ScoreFunction, n: usize) -> Result<TestResult> {
    let (m, d) = lambda.shape();
    let statistic = n as f64 * d as f64 / score.norm_sq() * lambda.norm_squared();
    Ok(TestResult::chi_square("q-spherical", statistic, m * d, n, d)?.with_score(score.name()))
}

fn stack(groups: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let d = groups[0].ncols();
    if groups.iter().any(|g| g.ncols() != d) {
        return Err(CorankError::InvalidInput("all groups must have the same dimension".into()));
    }
    let n: usize = groups.iter().map(|g| g.nrows()).sum();
    let mut pooled = DMatrix::zeros(n, d);
    let mut row = 0;
    for g in groups {
        pooled.rows_mut(row, g.nrows()).copy_from(*g);
        row += g.nrows();
    }
    Ok(pooled)
}

/// `n x (K-1)` group indicator covariates.
pub fn group_dummies(sizes: &[usize]) -> DMatrix<f64> {
    let n: usize = sizes.iter().sum();
    let k = sizes.len();
    let mut c = DMatrix::zeros(n, k.saturating_sub(1));
    let mut row = 0;
    for (g, &size) in sizes.iter().enumerate() {
        if g + 1 < k {
            c.rows_mut(row, size).column_mut(g).fill(1.0);
        }
        row += size;
    }
    c
}

fn group_sums(scores: &DMatrix<f64>, sizes: &[usize]) -> Vec<DVector<f64>> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&size| {
            let sum = scores.rows(start, size).row_sum().transpose();
            start += size;
            sum
        })
        .collect()
}

/// Group-location statistic from pooled vector scores (rows ordered by
/// group). With `scores_sum_to_zero` the simplified weighted-norm form is
/// used; otherwise the dummy-covariate design path.
pub fn group_statistic(
    scores: &DMatrix<f64>,
    sizes: &[usize],
    score: &ScoreFunction,
    scores_sum_to_zero: bool,
) -> Result<TestResult> {
    let n = scores.nrows();
    let d = scores.ncols();
    let k = sizes.len();
    let dof = (k - 1) * d;
    if scores_sum_to_zero {
        let sums = group_sums(scores, sizes);
        let statistic = if k == 2 {
            let (n1, n2) = (sizes[0] as f64, sizes[1] as f64);
            n as f64 * d as f64 / (n1 * n2 * score.norm_sq()) * sums[0].norm_squared()
        } else {
            d as f64 / score.norm_sq()
                * sums.iter().zip(sizes).map(|(s, &nk)| s.norm_squared() / nk as f64).sum::<f64>()
        };
        return Ok(TestResult::chi_square("group", statistic, dof, n, d)?.with_score(score.name()));
    }
    let design = standardize_design(&group_dummies(sizes))?;
    let lambda = lambda_from_scores(&design, scores)?;
    q_spherical(&lambda, score, n)
}

fn check_groups(groups: &[&DMatrix<f64>]) -> Result<()> {
    if groups.len() < 2 {
        return Err(CorankError::InvalidInput("need at least two groups".into()));
    }
    for (k, g) in groups.iter().enumerate() {
        if g.nrows() < 2 {
            return Err(CorankError::InvalidInput(format!("group {} has fewer than two observations", k + 1)));
        }
    }
    Ok(())
}

/// Ranks and signs of the pooled groups, plus the grid spec used.
pub fn pooled_ranks(groups: &[&DMatrix<f64>], opts: &GridOptions) -> Result<(GridSpec, RanksSigns)> {
    let pooled = stack(groups)?;
    let spec = opts.spec(pooled.nrows(), pooled.ncols())?;
    let (_, rs) = center_outward_ranks(&pooled, &spec)?;
    Ok((spec, rs))
}

/// Location test of `K >= 2` groups against an already built grid of the
/// pooled size (for instance a rotated one).
pub fn location_test_with_grid(groups: &[&DMatrix<f64>], score: &ScoreFunction, grid: Grid) -> Result<TestResult> {
    check_groups(groups)?;
    let pooled = stack(groups)?;
    let spec = grid.spec;
    let rs = ranks_signs(&empirical_map_with_grid(&pooled, grid)?);
    let scores = score.vector_scores(&rs)?;
    let sizes: Vec<usize> = groups.iter().map(|g| g.nrows()).collect();
    Ok(group_statistic(&scores, &sizes, score, spec.scores_sum_to_zero())?
        .with_method(if groups.len() == 2 { "co-two-sample" } else { "co-manova" })
        .with_grid(&spec))
}

/// Center-outward test of equal location for two samples; chi-square with
/// `d` degrees of freedom.
pub fn two_sample_test(
    sample1: &DMatrix<f64>,
    sample2: &DMatrix<f64>,
    score: &ScoreFunction,
    opts: &GridOptions,
) -> Result<TestResult> {
    let groups = [sample1, sample2];
    check_groups(&groups)?;
    let (spec, rs) = pooled_ranks(&groups, opts)?;
    let scores = score.vector_scores(&rs)?;
    let sizes = [sample1.nrows(), sample2.nrows()];
    Ok(group_statistic(&scores, &sizes, score, spec.scores_sum_to_zero())?
        .with_method("co-two-sample")
        .with_grid(&spec))
}

/// Center-outward one-way MANOVA test of no treatment effect over `K`
/// groups; chi-square with `(K - 1) d` degrees of freedom. For `K = 2` it
/// is the two-sample test.
pub fn manova_test(groups: &[DMatrix<f64>], score: &ScoreFunction, opts: &GridOptions) -> Result<TestResult> {
    let refs: Vec<&DMatrix<f64>> = groups.iter().collect();
    check_groups(&refs)?;
    let (spec, rs) = pooled_ranks(&refs, opts)?;
    let scores = score.vector_scores(&rs)?;
    let sizes: Vec<usize> = groups.iter().map(|g| g.nrows()).collect();
    Ok(group_statistic(&scores, &sizes, score, spec.scores_sum_to_zero())?
        .with_method("co-manova")
        .with_grid(&spec))
}

fn regression_ranks(
    y: &DMatrix<f64>,
    c: &DMatrix<f64>,
    beta0: &DMatrix<f64>,
    opts: &GridOptions,
) -> Result<(CovariateDesign, GridSpec, RanksSigns)> {
    if c.ncols() == 0 {
        return Err(CorankError::InvalidInput("regression needs at least one covariate".into()));
    }
    let z = residuals(y, c, beta0)?;
    let design = standardize_design(c)?;
    let spec = opts.spec(z.nrows(), z.ncols())?;
    let (_, rs) = center_outward_ranks(&z, &spec)?;
    Ok((design, spec, rs))
}

/// Test of `beta = beta0` in `Y_i = beta_0 + beta' c_i + e_i` with a
/// spherical score; chi-square with `m d` degrees of freedom.
pub fn regression_test(
    y: &DMatrix<f64>,
    c: &DMatrix<f64>,
    beta0: &DMatrix<f64>,
    score: &ScoreFunction,
    opts: &GridOptions,
) -> Result<TestResult> {
    let (design, spec, rs) = regression_ranks(y, c, beta0, opts)?;
    let lambda = lambda_tilde(&design, &rs, score)?;
    Ok(q_spherical(&lambda, score, y.nrows())?.with_method("co-regression").with_grid(&spec))
}

/// Regression test with a general vector score and its information matrix.
pub fn regression_test_general(
    y: &DMatrix<f64>,
    c: &DMatrix<f64>,
    beta0: &DMatrix<f64>,
    score: &VectorScore,
    opts: &GridOptions,
) -> Result<TestResult> {
    let (design, spec, rs) = regression_ranks(y, c, beta0, opts)?;
    let lambda = lambda_from_scores(&design, &score.vector_scores(&rs))?;
    let info = score.info_matrix(&build_grid(&spec)?);
    Ok(q_general(&lambda, &info, y.nrows())?
        .with_method("co-regression")
        .with_score(score.name())
        .with_grid(&spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::center_outward::Rank;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn residuals_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = normal(6, 2, &mut rng);
        let c = normal(6, 3, &mut rng);
        assert_eq!(residuals(&y, &c, &DMatrix::zeros(3, 2)).unwrap(), y);

        let c1 = DMatrix::from_element(6, 1, 2.0);
        let beta = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let z = residuals(&y, &c1, &beta).unwrap();
        assert_eq!(z, y.map(|v| v - 2.0));

        let beta = normal(3, 2, &mut rng);
        let back = residuals(&(&y + &c * &beta), &c, &beta).unwrap();
        assert!((back - &y).amax() < 1e-12);

        assert!(residuals(&y, &c, &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn two_sample_design_standardizer() {
        let design = standardize_design(&group_dummies(&[5, 5])).unwrap();
        assert_abs_diff_eq!(design.c_bar[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(design.v_c[(0, 0)], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(design.k_n[(0, 0)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn orthonormal_design_has_identity_standardizer() {
        // centered columns with n^{-1} C'C = I
        let c = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let design = standardize_design(&c).unwrap();
        assert!((&design.k_n - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn balanced_three_group_design() {
        let design = standardize_design(&group_dummies(&[4, 4, 4])).unwrap();
        let v = DVector::from_vec(vec![1.0 / 3.0, 1.0 / 3.0]);
        let expected = DMatrix::from_diagonal(&v) - &v * v.transpose();
        assert!((&design.v_c - expected).amax() < 1e-15);
        let whitened = design.k_n.transpose() * &design.v_c * &design.k_n;
        assert!((whitened - DMatrix::identity(2, 2)).amax() < 1e-8);
    }

    #[test]
    fn degenerate_designs_are_rejected() {
        assert!(matches!(
            standardize_design(&DMatrix::from_element(5, 1, 3.0)),
            Err(CorankError::DegenerateDesign(_))
        ));
        let mut c = DMatrix::zeros(6, 2);
        for i in 0..6 {
            c[(i, 0)] = i as f64;
            c[(i, 1)] = 2.0 * i as f64;
        }
        assert!(matches!(standardize_design(&c), Err(CorankError::DegenerateDesign(_))));
        assert!(standardize_design(&DMatrix::zeros(3, 0)).is_err());
        assert!(standardize_design(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn lambda_hand_computation() {
        // n = 2, m = 1: K = 2, c = (1, 0), scores (a, b) and (-a, -b)
        let (a, b) = (0.3, -0.7);
        let design = standardize_design(&DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let scores = DMatrix::from_row_slice(2, 2, &[a, b, -a, -b]);
        let lambda = lambda_from_scores(&design, &scores).unwrap();
        assert_abs_diff_eq!(lambda[(0, 0)], a, epsilon = 1e-12);
        assert_abs_diff_eq!(lambda[(0, 1)], b, epsilon = 1e-12);

        let zero = lambda_from_scores(&design, &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(zero, DMatrix::zeros(1, 2));
    }

    #[test]
    fn lambda_ignores_covariate_shift_when_scores_are_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = normal(10, 2, &mut rng);
        let mut scores = normal(10, 3, &mut rng);
        let mean = scores.row_mean();
        for mut row in scores.row_iter_mut() {
            row -= &mean;
        }
        let shifted = c.map(|v| v + 5.0);
        let l1 = lambda_from_scores(&standardize_design(&c).unwrap(), &scores).unwrap();
        let l2 = lambda_from_scores(&standardize_design(&shifted).unwrap(), &scores).unwrap();
        assert!((l1 - l2).amax() < 1e-12);
    }

    #[test]
    fn q_examples() {
        let zero = DMatrix::zeros(2, 3);
        let r = q_general(&zero, &DMatrix::identity(3, 3), 50).unwrap();
        assert_eq!((r.statistic, r.p_value, r.dof), (0.0, 1.0, 6.0));
        assert_eq!(q_spherical(&zero, &ScoreFunction::Sign, 50).unwrap().statistic, 0.0);

        let lambda = DMatrix::from_row_slice(1, 2, &[0.1, -0.2]);
        let r = q_spherical(&lambda, &ScoreFunction::Wilcoxon, 100).unwrap();
        assert_abs_diff_eq!(r.statistic, 30.0, epsilon = 1e-12);
        assert_eq!(r.dof, 2.0);

        let scalar = DMatrix::from_element(1, 1, 0.4);
        let info = DMatrix::from_element(1, 1, 0.5);
        assert_abs_diff_eq!(q_general(&scalar, &info, 20).unwrap().statistic, 20.0 * 0.16 / 0.5, epsilon = 1e-12);

        assert!(matches!(
            q_general(&lambda, &DMatrix::zeros(2, 2), 10),
            Err(CorankError::InvalidScore(_))
        ));
    }

    #[test]
    fn q_general_matches_explicit_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (m, d, n) = (3, 2, 40);
        let lambda = normal(m, d, &mut rng);
        let a = normal(d, d, &mut rng);
        let info = &a * a.transpose() + DMatrix::identity(d, d);
        let inv = info.clone().try_inverse().unwrap();
        // vec stacks columns; (I^{-1} kron I_m)[(j, a), (k, b)] = I^{-1}[j, k] delta_ab
        let vec = DVector::from_iterator(m * d, lambda.iter().copied());
        let mut kron = DMatrix::zeros(m * d, m * d);
        for j in 0..d {
            for k in 0..d {
                for row in 0..m {
                    kron[(j * m + row, k * m + row)] = inv[(j, k)];
                }
            }
        }
        let oracle = n as f64 * (vec.transpose() * kron * &vec)[(0, 0)];
        assert_abs_diff_eq!(q_general(&lambda, &info, n).unwrap().statistic, oracle, epsilon = 1e-10);
    }

    #[test]
    fn q_general_reduces_to_q_spherical() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for score in [ScoreFunction::Sign, ScoreFunction::Wilcoxon, ScoreFunction::VanDerWaerden { d: 3 }] {
            let lambda = normal(2, 3, &mut rng);
            let info = DMatrix::identity(3, 3) * (score.norm_sq() / 3.0);
            let g = q_general(&lambda, &info, 77).unwrap().statistic;
            let s = q_spherical(&lambda, &score, 77).unwrap().statistic;
            assert_abs_diff_eq!(g, s, epsilon = 1e-10 * s.max(1.0));
        }
    }

    #[test]
    fn worked_two_sample_example() {
        // pooled n = 4 on the collinear grid; first group holds ranks 1 and 2 on the +x ray
        let rs = RanksSigns {
            ranks: vec![Rank::Integer(1), Rank::Integer(2), Rank::Integer(1), Rank::Integer(2)],
            signs: DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, -1.0, 0.0, -1.0, 0.0]),
            n_r: 2,
        };
        let scores = ScoreFunction::Wilcoxon.vector_scores(&rs).unwrap();
        let r = group_statistic(&scores, &[2, 2], &ScoreFunction::Wilcoxon, true).unwrap();
        assert_abs_diff_eq!(r.statistic, 6.0, epsilon = 1e-12);
        let via_design = group_statistic(&scores, &[2, 2], &ScoreFunction::Wilcoxon, false).unwrap();
        assert_abs_diff_eq!(via_design.statistic, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_first_group_sum_gives_zero_statistic() {
        let rs = RanksSigns {
            ranks: vec![Rank::Integer(1); 4],
            signs: DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]),
            n_r: 1,
        };
        let scores = ScoreFunction::Sign.vector_scores(&rs).unwrap();
        let r = group_statistic(&scores, &[2, 2], &ScoreFunction::Sign, true).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn sign_test_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = normal(20, 2, &mut rng);
        let b = normal(30, 2, &mut rng);
        let opts = GridOptions::explicit(5, 10);
        let r = two_sample_test(&a, &b, &ScoreFunction::Sign, &opts).unwrap();
        let (_, rs) = pooled_ranks(&[&a, &b], &opts).unwrap();
        let s1 = rs.signs.rows(0, 20).row_sum();
        let expected = 50.0 * 2.0 / (20.0 * 30.0) * s1.norm_squared();
        assert_abs_diff_eq!(r.statistic, expected, epsilon = 1e-12);
        assert_eq!(r.dof, 2.0);
        assert_eq!(r.n_r, Some(5));
    }

    #[test]
    fn regression_with_two_sample_design_matches_two_sample_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for opts in [GridOptions::default(), GridOptions { symmetrize: false, ..Default::default() }] {
            let a = normal(25, 2, &mut rng);
            let b = normal(25, 2, &mut rng).map(|v| v + 0.3);
            let y = stack(&[&a, &b]).unwrap();
            let c = group_dummies(&[25, 25]);
            let two = two_sample_test(&a, &b, &ScoreFunction::Wilcoxon, &opts).unwrap();
            let reg = regression_test(&y, &c, &DMatrix::zeros(1, 2), &ScoreFunction::Wilcoxon, &opts).unwrap();
            assert_abs_diff_eq!(two.statistic, reg.statistic, epsilon = 1e-8);
        }
    }

    #[test]
    fn general_regression_with_spherical_score_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = normal(40, 2, &mut rng);
        let c = normal(40, 2, &mut rng);
        let beta = DMatrix::zeros(2, 2);
        let opts = GridOptions::default();
        let score = ScoreFunction::VanDerWaerden { d: 2 };
        let spherical = regression_test(&y, &c, &beta, &score, &opts).unwrap();
        let general =
            regression_test_general(&y, &c, &beta, &VectorScore::from_spherical(score, 2), &opts).unwrap();
        assert_abs_diff_eq!(spherical.statistic, general.statistic, epsilon = 1e-9);
        assert_eq!(general.dof, 4.0);
    }

    #[test]
    fn estimated_information_is_used_when_not_supplied() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let y = normal(30, 2, &mut rng);
        let c = normal(30, 1, &mut rng);
        let score = VectorScore::new("identity", |u: &DVector<f64>| u.clone(), None);
        let r = regression_test_general(&y, &c, &DMatrix::zeros(1, 2), &score, &GridOptions::default()).unwrap();
        assert!(r.statistic.is_finite() && r.statistic >= 0.0);
    }

    #[test]
    fn supplied_grid_reproduces_two_sample_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = normal(24, 2, &mut rng);
        let b = normal(26, 2, &mut rng);
        let opts = GridOptions::default();
        let grid = build_grid(&opts.spec(50, 2).unwrap()).unwrap();
        let direct = two_sample_test(&a, &b, &ScoreFunction::Wilcoxon, &opts).unwrap();
        let supplied = location_test_with_grid(&[&a, &b], &ScoreFunction::Wilcoxon, grid).unwrap();
        assert_eq!(direct, supplied);
    }

    #[test]
    fn regression_guards() {
        let y = DMatrix::zeros(10, 2);
        let c = DMatrix::zeros(10, 0);
        assert!(matches!(
            regression_test(&y, &c, &DMatrix::zeros(0, 2), &ScoreFunction::Sign, &GridOptions::default()),
            Err(CorankError::InvalidInput(_))
        ));
    }

    #[test]
    fn groups_need_two_observations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = normal(1, 2, &mut rng);
        let b = normal(10, 2, &mut rng);
        assert!(two_sample_test(&a, &b, &ScoreFunction::Sign, &GridOptions::default()).is_err());
        assert!(manova_test(&[b.clone()], &ScoreFunction::Sign, &GridOptions::default()).is_err());
        let c = DMatrix::from_fn(10, 3, |_, _| rng.random::<f64>());
        assert!(two_sample_test(&b, &c, &ScoreFunction::Sign, &GridOptions::default()).is_err());
    }
}
