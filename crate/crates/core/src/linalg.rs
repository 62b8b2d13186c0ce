//! Dense symmetric linear algebra: Jacobi eigendecomposition, principal
//! matrix square root, Pearson correlation and PSD repair.
//!
//! Matrices here are small (a forecast horizon of a few dozen lead times),
//! so a cyclic Jacobi sweep is accurate and fast enough. Everything is f64.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Relative asymmetry tolerated when wrapping a matrix as symmetric.
const SYMMETRY_TOL: f64 = 1e-12;
/// Convergence threshold for the Jacobi sweep, relative to the Frobenius norm.
const JACOBI_TOL: f64 = 1e-12;
/// Maximum number of full Jacobi sweeps.
const JACOBI_MAX_SWEEPS: usize = 100;
/// Eigenvalues are clipped to this floor when repairing a correlation matrix.
const PSD_CLIP: f64 = 1e-8;

/// A dense real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    data: Array2<f64>,
}

impl SymmetricMatrix {
    /// Wrap `data`, checking squareness, finiteness and symmetry to
    /// `1e-12` relative to the largest entry.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {r}x{c}"
            )));
        }
        let mut scale = 0.0f64;
        for ((i, j), &v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "symmetric matrix",
                    row: i,
                    col: j,
                });
            }
            scale = scale.max(v.abs());
        }
        for i in 0..r {
            for j in (i + 1)..r {
                if (data[(i, j)] - data[(j, i)]).abs() > SYMMETRY_TOL * scale.max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { data })
    }

    /// Constructor for matrices that are symmetric by construction.
    pub(crate) fn from_symmetric_unchecked(data: Array2<f64>) -> Self {
        Self { data }
    }

    pub fn identity(n: usize) -> Self {
        Self { data: Array2::eye(n) }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    /// Exact (bitwise) comparison against the identity matrix.
    pub fn is_identity(&self) -> bool {
        self.data
            .indexed_iter()
            .all(|((i, j), &v)| v == if i == j { 1.0 } else { 0.0 })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Result of a symmetric eigendecomposition: `A = U diag(lambda) U^T` with
/// eigenvalues ascending and eigenvectors in the matching columns of `U`.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    s.sqrt()
}

/// Eigendecomposition by cyclic Jacobi rotations.
pub fn eigh(m: &SymmetricMatrix) -> Result<Eigh> {
    let n = m.dim();
    let mut a = m.as_array().clone();
    let mut u = Array2::<f64>::eye(n);

    let norm = m.frobenius_norm();
    let tol = JACOBI_TOL * norm;
    let mut sweeps = 0;
    while norm > 0.0 && off_diagonal_norm(&a) > tol {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence {
                residual: off_diagonal_norm(&a) / norm,
                sweeps,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                // For huge |theta| the stable formula underflows to the
                // small-angle limit t ~ 1/(2 theta).
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = a[(p, p)];
                let aqq = a[(q, q)];
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let aip = a[(i, p)];
                        let aiq = a[(i, q)];
                        a[(i, p)] = aip - s * (aiq + tau * aip);
                        a[(p, i)] = a[(i, p)];
                        a[(i, q)] = aiq + s * (aip - tau * aiq);
                        a[(q, i)] = a[(i, q)];
                    }
                }
                for i in 0..n {
                    let uip = u[(i, p)];
                    let uiq = u[(i, q)];
                    u[(i, p)] = uip - s * (uiq + tau * uip);
                    u[(i, q)] = uiq + s * (uip - tau * uiq);
                }
            }
        }
        sweeps += 1;
    }

    // Sort ascending, carrying eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, dst)] = u[(i, src)];
        }
    }
    Ok(Eigh {
        eigenvalues,
        eigenvectors,
    })
}

/// Principal square root of a positive semidefinite symmetric matrix,
/// `U diag(sqrt(lambda)) U^T`.
///
/// Eigenvalues in `[-1e-8, 0)` are treated as rounding noise and clipped to
/// zero; anything below that is rejected so the caller repairs first. The
/// identity is returned unchanged so downstream reduction identities hold
/// bit-exactly.
pub fn sqrt_psd(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if m.is_identity() {
        return Ok(SymmetricMatrix::identity(m.dim()));
    }
    let Eigh {
        eigenvalues,
        eigenvectors,
    } = eigh(m)?;
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_CLIP {
        return Err(Error::NotPositiveSemidefinite(min));
    }
    let roots: Vec<f64> = eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let n = m.dim();
    let mut s = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let mut v = 0.0;
            for k in 0..n {
                v += eigenvectors[(i, k)] * roots[k] * eigenvectors[(j, k)];
            }
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(SymmetricMatrix::from_symmetric_unchecked(s))
}

/// Pearson product-moment correlation over paired samples, clamped to
/// `[-1, 1]`.
///
/// Returns `None` when fewer than two pairs are given or either variance is
/// zero; the caller decides how to treat an undefined correlation.
pub fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean_u = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_v = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut suu = 0.0;
    let mut svv = 0.0;
    let mut suv = 0.0;
    for &(u, v) in pairs {
        let du = u - mean_u;
        let dv = v - mean_v;
        suu += du * du;
        svv += dv * dv;
        suv += du * dv;
    }
    if suu <= 0.0 || svv <= 0.0 {
        return None;
    }
    Some((suv / (suu * svv).sqrt()).clamp(-1.0, 1.0))
}

/// Repair an estimated correlation matrix to positive definiteness:
/// eigenvalues clipped at `1e-8`, then rescaled back to a unit diagonal.
///
/// Matrices that are already comfortably PSD are returned unchanged.
pub fn repair_correlation(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let Eigh {
        eigenvalues,
        eigenvectors,
    } = eigh(m)?;
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= PSD_CLIP {
        return Ok(m.clone());
    }
    let clipped: Vec<f64> = eigenvalues.iter().map(|&l| l.max(PSD_CLIP)).collect();
    let n = m.dim();
    let mut b = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let mut v = 0.0;
            for k in 0..n {
                v += eigenvectors[(i, k)] * clipped[k] * eigenvectors[(j, k)];
            }
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let scale: Vec<f64> = (0..n).map(|i| b[(i, i)].sqrt()).collect();
    let mut r = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        r[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let v = (b[(i, j)] / (scale[i] * scale[j])).clamp(-1.0, 1.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(SymmetricMatrix::from_symmetric_unchecked(r))
}
