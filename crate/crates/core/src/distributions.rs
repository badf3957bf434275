//! Bivariate error laws for simulation studies: Gaussian, Student t,
//! Gaussian and Cauchy mixtures, and skew-t, plus the diagonal shift.

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{CorankError, Result};

/// Generator for replication `stream` of a study seeded with `master`.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Normal (`nu = None`) or multivariate t (`nu = Some(_)`) with location
/// `mean` and scale matrix `L L'`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticalComponent {
    pub nu: Option<f64>,
    pub mean: Vector2<f64>,
    chol: Matrix2<f64>,
}

impl EllipticalComponent {
    pub fn new(nu: Option<f64>, mean: [f64; 2], scale: [[f64; 2]; 2]) -> Result<Self> {
        if let Some(nu) = nu {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(CorankError::InvalidSpec(format!("degrees of freedom must be positive, got {nu}")));
            }
        }
        let chol = cholesky(scale)?;
        Ok(EllipticalComponent { nu, mean: Vector2::from(mean), chol })
    }

    pub fn scale(&self) -> Matrix2<f64> {
        self.chol * self.chol.transpose()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<f64> {
        let zeta = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let radial = match self.nu {
            None => 1.0,
            Some(nu) => {
                let s: f64 = ChiSquared::new(nu).expect("validated dof").sample(rng);
                (nu / s).sqrt()
            }
        };
        self.mean + self.chol * zeta * radial
    }
}

fn cholesky(m: [[f64; 2]; 2]) -> Result<Matrix2<f64>> {
    let m = Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
    if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-12 {
        return Err(CorankError::InvalidSpec("scale matrix is not symmetric".into()));
    }
    m.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| CorankError::InvalidSpec("scale matrix is not positive definite".into()))
}

/// Azzalini skew-t: `xi + omega Z / sqrt(V / nu)` with `Z` skew-normal with
/// correlation `Omega_bar` and shape `alpha`, `V ~ chi2(nu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewT {
    pub nu: f64,
    pub alpha: Vector2<f64>,
    pub xi: Vector2<f64>,
    omega: Vector2<f64>,
    delta: Vector2<f64>,
    // Cholesky factor of Omega_bar - delta delta'
    resid_chol: Matrix2<f64>,
}

impl SkewT {
    pub fn new(nu: f64, alpha: [f64; 2], scale: [[f64; 2]; 2], xi: [f64; 2]) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(CorankError::InvalidSpec(format!("degrees of freedom must be positive, got {nu}")));
        }
        let full = cholesky(scale)?;
        let big = full * full.transpose();
        let omega = Vector2::new(big[(0, 0)].sqrt(), big[(1, 1)].sqrt());
        let inv_w = Matrix2::from_diagonal(&omega.map(|w| 1.0 / w));
        let bar = inv_w * big * inv_w;
        let alpha = Vector2::from(alpha);
        let delta = bar * alpha / (1.0 + (alpha.transpose() * bar * alpha)[(0, 0)]).sqrt();
        let resid = bar - delta * delta.transpose();
        let resid = [[resid[(0, 0)], resid[(0, 1)]], [resid[(1, 0)], resid[(1, 1)]]];
        Ok(SkewT { nu, alpha, xi: Vector2::from(xi), omega, delta, resid_chol: cholesky(resid)? })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<f64> {
        let x0: f64 = rng.sample(StandardNormal);
        let eps = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let x = self.delta * x0 + self.resid_chol * eps;
        let z = if x0 > 0.0 { x } else { -x };
        let v: f64 = ChiSquared::new(self.nu).expect("validated dof").sample(rng);
        self.xi + self.omega.component_mul(&z) / (v / self.nu).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ErrorLaw {
    Elliptical(EllipticalComponent),
    Mixture { weights: Vec<f64>, components: Vec<EllipticalComponent> },
    SkewT(SkewT),
}

const RHO_QUARTER: [[f64; 2]; 2] = [[1.0, 0.25], [0.25, 1.0]];

impl ErrorLaw {
    pub fn mixture(weights: Vec<f64>, components: Vec<EllipticalComponent>) -> Result<Self> {
        if weights.len() != components.len() || weights.is_empty() {
            return Err(CorankError::InvalidSpec("mixture needs one weight per component".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(CorankError::InvalidSpec("mixture weights must be positive and sum to one".into()));
        }
        Ok(ErrorLaw::Mixture { weights, components })
    }

    /// Centered normal with unit variances and correlation 1/4.
    pub fn gauss() -> Self {
        ErrorLaw::Elliptical(EllipticalComponent::new(None, [0.0, 0.0], RHO_QUARTER).expect("constant law"))
    }

    /// Centered t with `nu` degrees of freedom and the scale matrix of `gauss`.
    pub fn student_t(nu: f64) -> Result<Self> {
        Ok(ErrorLaw::Elliptical(EllipticalComponent::new(Some(nu), [0.0, 0.0], RHO_QUARTER)?))
    }

    /// Two-component mixture with weights 1/4, 3/4 and opposite correlations.
    pub fn mix2(nu: Option<f64>) -> Result<Self> {
        let s1 = [[1.0, 2.0 / 3.0], [2.0 / 3.0, 1.0]];
        let s2 = [[1.0, -2.0 / 3.0], [-2.0 / 3.0, 1.0]];
        Self::mixture(
            vec![0.25, 0.75],
            vec![EllipticalComponent::new(nu, [0.75, 0.0], s1)?, EllipticalComponent::new(nu, [-0.25, 0.0], s2)?],
        )
    }

    pub fn ushape() -> Self {
        Self::mixture(
            vec![0.5, 0.25, 0.25],
            vec![
                EllipticalComponent::new(None, [0.0, 0.0], [[2.0, 0.0], [0.0, 0.125]]).expect("constant law"),
                EllipticalComponent::new(None, [-3.0, 1.0], [[0.5, -1.0 / 3.0], [-1.0 / 3.0, 0.5]]).expect("constant law"),
                EllipticalComponent::new(None, [3.0, 1.0], [[0.5, 1.0 / 3.0], [1.0 / 3.0, 0.5]]).expect("constant law"),
            ],
        )
        .expect("constant law")
    }

    pub fn sshape() -> Self {
        let r = (3.0f64 / 8.0).sqrt();
        let s4 = [[1.5, -r], [-r, 1.0]];
        let s5 = [[1.5, r], [r, 1.0]];
        let w = 1.0 / 3.0;
        Self::mixture(
            vec![w, w, 1.0 - 2.0 * w],
            vec![
                EllipticalComponent::new(None, [-4.5, -0.5], s4).expect("constant law"),
                EllipticalComponent::new(None, [0.0, -0.5], s5).expect("constant law"),
                EllipticalComponent::new(None, [4.5, 1.0], s4).expect("constant law"),
            ],
        )
        .expect("constant law")
    }

    pub fn skew_t(nu: f64) -> Result<Self> {
        Ok(ErrorLaw::SkewT(SkewT::new(nu, [5.0, -3.0], [[1.0, -0.5], [-0.5, 1.0]], [0.0, 0.0])?))
    }

    /// Laws by name: `gauss`, `t<nu>`, `mix2gauss`, `mix2cauchy`, `ushape`,
    /// `sshape`, `skewt<nu>` (e.g. `t3`, `skewt1.1`).
    pub fn from_name(name: &str) -> Result<Self> {
        let parse_nu = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| CorankError::InvalidSpec(format!("unknown error law '{name}'")))
        };
        match name {
            "gauss" => Ok(Self::gauss()),
            "mix2gauss" => Self::mix2(None),
            "mix2cauchy" => Self::mix2(Some(1.0)),
            "ushape" => Ok(Self::ushape()),
            "sshape" => Ok(Self::sshape()),
            _ => {
                if let Some(nu) = name.strip_prefix("skewt") {
                    Self::skew_t(parse_nu(nu)?)
                } else if let Some(nu) = name.strip_prefix('t') {
                    Self::student_t(parse_nu(nu)?)
                } else {
                    Err(CorankError::InvalidSpec(format!("unknown error law '{name}'")))
                }
            }
        }
    }

    /// `n` draws together with the mixture component of each (0 for
    /// non-mixtures).
    pub fn sample_with_components<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (DMatrix<f64>, Vec<usize>) {
        let mut out = DMatrix::zeros(n, 2);
        let mut labels = vec![0; n];
        for i in 0..n {
            let x = match self {
                ErrorLaw::Elliptical(c) => c.draw(rng),
                ErrorLaw::SkewT(s) => s.draw(rng),
                ErrorLaw::Mixture { weights, components } => {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut k = components.len() - 1;
                    for (j, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            k = j;
                            break;
                        }
                    }
                    labels[i] = k;
                    components[k].draw(rng)
                }
            };
            out[(i, 0)] = x[0];
            out[(i, 1)] = x[1];
        }
        (out, labels)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        self.sample_with_components(n, rng).0
    }

    pub fn sample_seeded(&self, n: usize, seed: u64) -> DMatrix<f64> {
        self.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Adds `(delta, ..., delta)` to every row.
pub fn shift(sample: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    sample.map(|v| v + delta)
}
