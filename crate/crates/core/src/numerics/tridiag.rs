//! Tridiagonal linear algebra: LU solves (pivoted and unpivoted, real and
//! complex), Sturm-sequence eigenvalue counts, bisection and inverse iteration.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored by its diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::InvalidParameter(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let m = self.dim();
        for i in 0..m {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < m {
                v += self.off[i] * x[i + 1];
            }
            y[i] = v;
        }
    }

    /// `x^T A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        let m = self.dim();
        let mut acc = 0.0;
        for i in 0..m {
            acc += x[i] * self.diag[i] * y[i];
            if i + 1 < m {
                acc += self.off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
            }
        }
        acc
    }

    /// `A - sigma * B` for another symmetric tridiagonal `B` of the same size.
    pub fn shifted_by(&self, sigma: f64, other: &SymTridiag) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a - sigma * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a - sigma * b).collect(),
        }
    }

    /// Interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let m = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < m { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `sigma` (Sylvester inertia of `A - sigma I`).
    pub fn sturm_count(&self, sigma: f64) -> usize {
        let pivmin = f64::MIN_POSITIVE * self.off.iter().fold(1.0f64, |m, b| m.max(b * b));
        let mut count = 0;
        let mut d = self.diag[0] - sigma;
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
        for i in 1..self.dim() {
            d = self.diag[i] - sigma - self.off[i - 1] * self.off[i - 1] / d;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by Sturm bisection to full precision.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.dim() {
            return Err(Error::InvalidParameter(format!("eigenvalue index {k} out of range")));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs().max(hi.abs()) + 1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Eigenvector for a (converged) eigenvalue by inverse iteration, Euclidean-normalised.
    ///
    /// `previous` vectors are projected out each sweep, which separates close eigenvalues.
    pub fn eigenvector(&self, value: f64, previous: &[Vec<f64>]) -> Result<Vec<f64>> {
        let m = self.dim();
        let scale = self.gershgorin().1.abs().max(self.gershgorin().0.abs()).max(1.0);
        let shift = value + 4.0 * f64::EPSILON * scale;
        let sub = self.off.clone();
        let sup = self.off.clone();
        let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let lu = TridiagLu::factor_perturbed(&sub, &diag, &sup, f64::EPSILON * scale)?;
        let mut x: Vec<f64> = (0..m).map(|i| 1.0 + 0.25 * ((i as f64) * 0.7549).sin()).collect();
        let mut last_norm = 0.0;
        for it in 0..8 {
            for p in previous {
                let c: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
            }
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::NotConverged("inverse iteration produced a degenerate vector".into()));
            }
            x.iter_mut().for_each(|v| *v /= norm);
            if it >= 2 && norm > 1e8 && (norm - last_norm).abs() <= 1e-6 * norm {
                break;
            }
            last_norm = norm;
            lu.solve(&mut x);
        }
        for p in previous {
            let c: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        Ok(x)
    }
}

/// LU factorisation of a general tridiagonal matrix with partial pivoting.
#[derive(Debug, Clone)]
pub struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    /// Factor the matrix with sub-diagonal `sub`, diagonal `diag`, super-diagonal `sup`.
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self> {
        let lu = Self::factor_perturbed(sub, diag, sup, 0.0)?;
        if lu.d.contains(&0.0) {
            return Err(Error::SingularSystem("zero pivot in tridiagonal LU".into()));
        }
        Ok(lu)
    }

    /// As [`TridiagLu::factor`], replacing zero pivots by `tiny` (used by inverse iteration).
    pub fn factor_perturbed(sub: &[f64], diag: &[f64], sup: &[f64], tiny: f64) -> Result<Self> {
        let n = diag.len();
        if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(Error::InvalidParameter("tridiagonal LU shape mismatch".into()));
        }
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Ok(Self { dl, d, du, du2, swapped })
    }

    pub fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Thomas factorisation (no pivoting) of a symmetric positive definite tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct SpdTridiagSolver {
    off: Vec<f64>,
    inv_pivot: Vec<f64>,
    factor: Vec<f64>,
}

impl SpdTridiagSolver {
    pub fn new(matrix: &SymTridiag) -> Result<Self> {
        let m = matrix.dim();
        let mut inv_pivot = vec![0.0; m];
        let mut factor = vec![0.0; m.saturating_sub(1)];
        let mut pivot = matrix.diag[0];
        for i in 0..m {
            if i > 0 {
                factor[i - 1] = matrix.off[i - 1] * inv_pivot[i - 1];
                pivot = matrix.diag[i] - factor[i - 1] * matrix.off[i - 1];
            }
            if !(pivot > 0.0) {
                return Err(Error::SingularSystem(format!("matrix is not positive definite (pivot {pivot:e})")));
            }
            inv_pivot[i] = 1.0 / pivot;
        }
        Ok(Self { off: matrix.off.clone(), inv_pivot, factor })
    }

    pub fn solve(&self, b: &mut [f64]) {
        let m = self.inv_pivot.len();
        for i in 1..m {
            b[i] -= self.factor[i - 1] * b[i - 1];
        }
        b[m - 1] *= self.inv_pivot[m - 1];
        for i in (0..m - 1).rev() {
            b[i] = (b[i] - self.off[i] * b[i + 1]) * self.inv_pivot[i];
        }
    }
}

/// Unpivoted LU of a complex tridiagonal matrix with constant symmetric off-diagonals
/// `diag[i]` on the diagonal and `off[i]` coupling `i` and `i+1`.
///
/// Stable for matrices of the form `I + i B` with `B` real symmetric (positive definite
/// Hermitian part), which covers the Crank–Nicolson systems.
#[derive(Debug, Clone)]
pub struct ComplexTridiagSolver {
    off: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
    factor: Vec<Complex64>,
}

impl ComplexTridiagSolver {
    pub fn new(diag: &[Complex64], off: &[Complex64]) -> Result<Self> {
        let m = diag.len();
        if m == 0 || off.len() + 1 != m {
            return Err(Error::InvalidParameter("complex tridiagonal shape mismatch".into()));
        }
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); m];
        let mut factor = vec![Complex64::new(0.0, 0.0); m - 1];
        let mut pivot = diag[0];
        for i in 0..m {
            if i > 0 {
                factor[i - 1] = off[i - 1] * inv_pivot[i - 1];
                pivot = diag[i] - factor[i - 1] * off[i - 1];
            }
            if pivot.norm() == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularSystem("zero pivot in complex tridiagonal solve".into()));
            }
            inv_pivot[i] = pivot.inv();
        }
        Ok(Self { off: off.to_vec(), inv_pivot, factor })
    }

    pub fn solve(&self, b: &mut [Complex64]) {
        let m = self.inv_pivot.len();
        for i in 1..m {
            let f = self.factor[i - 1];
            b[i] -= f * b[i - 1];
        }
        b[m - 1] *= self.inv_pivot[m - 1];
        for i in (0..m - 1).rev() {
            b[i] = (b[i] - self.off[i] * b[i + 1]) * self.inv_pivot[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(m: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; m], vec![-1.0; m - 1]).unwrap()
    }

    #[test]
    fn bisection_recovers_dirichlet_laplacian_spectrum() {
        let m = 50;
        let a = laplacian(m);
        for k in 0..5 {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (m + 1) as f64).cos();
            assert!((a.eigenvalue(k).unwrap() - exact).abs() < 1e-13);
        }
        assert_eq!(a.sturm_count(0.0), 0);
        assert_eq!(a.sturm_count(4.0), m);
    }

    #[test]
    fn inverse_iteration_gives_sine_modes() {
        let m = 40;
        let a = laplacian(m);
        let mut prev = Vec::new();
        for k in 0..3 {
            let lam = a.eigenvalue(k).unwrap();
            let v = a.eigenvector(lam, &prev).unwrap();
            let mut av = vec![0.0; m];
            a.matvec(&v, &mut av);
            let res: f64 = av.iter().zip(&v).map(|(x, y)| (x - lam * y).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-12, "residual {res}");
            prev.push(v);
        }
    }

    #[test]
    fn pivoted_lu_solves_indefinite_system() {
        let sub = vec![1.0, 3.0, -2.0, 0.5];
        let diag = vec![0.0, 1e-3, 4.0, -1.0, 2.0];
        let sup = vec![2.0, -1.0, 1.0, 1.5];
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b = vec![0.0; 5];
        for i in 0..5 {
            b[i] = diag[i] * x[i];
            if i > 0 {
                b[i] += sub[i - 1] * x[i - 1];
            }
            if i < 4 {
                b[i] += sup[i] * x[i + 1];
            }
        }
        let lu = TridiagLu::factor(&sub, &diag, &sup).unwrap();
        lu.solve(&mut b);
        for i in 0..5 {
            assert!((b[i] - x[i]).abs() < 1e-12, "{b:?}");
        }
    }

    #[test]
    fn spd_solver_matches_matvec() {
        let m = 30;
        let a = SymTridiag::new((0..m).map(|i| 3.0 + (i as f64).sin()).collect(), vec![-1.0; m - 1]).unwrap();
        let x: Vec<f64> = (0..m).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut b = vec![0.0; m];
        a.matvec(&x, &mut b);
        SpdTridiagSolver::new(&a).unwrap().solve(&mut b);
        for i in 0..m {
            assert!((b[i] - x[i]).abs() < 1e-13);
        }
        assert!(SpdTridiagSolver::new(
            &laplacian(5).shifted_by(1.0, &SymTridiag::new(vec![1.0; 5], vec![0.0; 4]).unwrap())
        )
        .is_err());
    }

    #[test]
    fn complex_solver_inverts_cayley_system() {
        let m = 25;
        let i = Complex64::new(0.0, 1.0);
        let diag: Vec<Complex64> = (0..m).map(|k| 1.0 + i * (50.0 + k as f64)).collect();
        let off: Vec<Complex64> = vec![-25.0 * i; m - 1];
        let x: Vec<Complex64> = (0..m).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        let mut b = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..m {
            b[k] = diag[k] * x[k];
            if k > 0 {
                b[k] += off[k - 1] * x[k - 1];
            }
            if k + 1 < m {
                b[k] += off[k] * x[k + 1];
            }
        }
        ComplexTridiagSolver::new(&diag, &off).unwrap().solve(&mut b);
        for k in 0..m {
            assert!((b[k] - x[k]).norm() < 1e-12);
        }
    }
}
