//! Tridiagonal realisations of the linearised operators
//!
//! ```text
//! L_+ = -∂² + omega - gamma delta - p Q^{p-1},   L_- = -∂² + omega - gamma delta - Q^{p-1},
//! ```
//!
//! their low-lying spectrum, the negative/kernel/positive structure check and
//! the constrained coercivity constant.
//!
//! Matrices act on the interior nodes (Dirichlet closure). The delta is the
//! centre diagonal entry `-gamma/h`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::grid::{dot_real, inner_product, ComplexField, Grid, RealField};
use crate::numerics::tridiag::{SpdTridiagSolver, SymTridiag};
use crate::profiles::ProfileSet;
use crate::soliton::ModelParams;

/// Largest number of eigenpairs [`lowest_eigenpairs`] returns.
pub const MAX_EIGENPAIRS: usize = 6;

/// `-D² - gamma delta_h` on the interior nodes of `grid`.
pub fn linear_operator(grid: &Grid, gamma: f64) -> SymTridiag {
    let m = grid.n() - 2;
    let h2 = grid.h() * grid.h();
    let mut diag = vec![2.0 / h2; m];
    diag[grid.center() - 1] -= gamma / grid.h();
    SymTridiag { diag, off: vec![-1.0 / h2; m - 1] }
}

/// Interior Gram matrix of the discrete H¹ inner product (divided by `h`): `-D² + I`.
pub fn h1_gram(grid: &Grid) -> SymTridiag {
    let m = grid.n() - 2;
    let h2 = grid.h() * grid.h();
    SymTridiag { diag: vec![2.0 / h2 + 1.0; m], off: vec![-1.0 / h2; m - 1] }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    /// Real-part operator with potential `p Q^{p-1}`.
    Plus,
    /// Imaginary-part operator with potential `Q^{p-1}`.
    Minus,
    /// `-∂² + shift - gamma delta` with the nonlinear potential switched off.
    LinearOnly,
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    grid: Grid,
    which: Which,
    matrix: SymTridiag,
}

impl OperatorMatrix {
    /// `L_±` around the closed-form profile at `omega`.
    pub fn assemble(params: &ModelParams, omega: f64, which: Which, grid: &Grid) -> Result<Self> {
        let profiles = ProfileSet::closed_form(params, omega, grid)?;
        Self::around(params, omega, which, profiles.q())
    }

    /// `L_±` around an arbitrary real profile `q`.
    pub fn around(params: &ModelParams, omega: f64, which: Which, q: &RealField) -> Result<Self> {
        let grid = *q.grid();
        let mut matrix = linear_operator(&grid, params.gamma());
        let p = params.p();
        let factor = match which {
            Which::Plus => p,
            Which::Minus => 1.0,
            Which::LinearOnly => 0.0,
        };
        for (j, d) in matrix.diag.iter_mut().enumerate() {
            *d += omega - factor * q.values()[j + 1].abs().powf(p - 1.0);
        }
        Ok(Self { grid, which, matrix })
    }

    /// `-∂² + shift - gamma delta` (no nonlinear potential).
    pub fn linear_only(grid: &Grid, gamma: f64, shift: f64) -> Self {
        let mut matrix = linear_operator(grid, gamma);
        matrix.diag.iter_mut().for_each(|d| *d += shift);
        Self { grid: *grid, which: Which::LinearOnly, matrix }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn which(&self) -> Which {
        self.which
    }

    pub fn matrix(&self) -> &SymTridiag {
        &self.matrix
    }

    /// Matrix-vector product; boundary values of the result are zero.
    pub fn apply(&self, u: &RealField) -> RealField {
        let n = self.grid.n();
        let mut out = vec![0.0; n];
        self.matrix.matvec(&u.values()[1..n - 1], &mut out[1..n - 1]);
        RealField::from_vec_unchecked(self.grid, out)
    }

    /// Number of negative eigenvalues (Sturm inertia count).
    pub fn negative_count(&self) -> usize {
        self.matrix.sturm_count(0.0)
    }

    /// Discrete H⁻¹ norm of the residual functional `v -> <A u, v>`.
    pub fn dual_norm_of_image(&self, u: &RealField) -> Result<f64> {
        let n = self.grid.n();
        let mut r = vec![0.0; n - 2];
        self.matrix.matvec(&u.values()[1..n - 1], &mut r);
        let mut y = r.clone();
        SpdTridiagSolver::new(&h1_gram(&self.grid))?.solve(&mut y);
        let value: f64 = r.iter().zip(&y).map(|(a, b)| a * b).sum();
        Ok((self.grid.h() * value).sqrt())
    }
}

/// Eigenpair with a trapezoid-normalised eigenvector.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: RealField,
}

/// The `k <= 6` smallest eigenpairs, sorted; vectors have unit trapezoid L² norm and
/// their largest-magnitude entry positive.
pub fn lowest_eigenpairs(matrix: &OperatorMatrix, k: usize) -> Result<Vec<Eigenpair>> {
    if k == 0 || k > MAX_EIGENPAIRS {
        return Err(Error::InvalidParameter(format!("k must lie in 1..={MAX_EIGENPAIRS}, got {k}")));
    }
    let grid = matrix.grid;
    let a = &matrix.matrix;
    let mut pairs = Vec::with_capacity(k);
    let mut previous: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let value = a.eigenvalue(j)?;
        let v = a.eigenvector(value, &previous)?;
        let mut av = vec![0.0; v.len()];
        a.matvec(&v, &mut av);
        let residual = av.iter().zip(&v).map(|(x, y)| (x - value * y).powi(2)).sum::<f64>().sqrt();
        let scale = a.gershgorin().0.abs().max(a.gershgorin().1.abs());
        if !(residual <= 1e-8 * scale) {
            return Err(Error::NotConverged(format!("eigenvector {j}: residual {residual:e}")));
        }
        previous.push(v.clone());
        let norm = (grid.h() * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        let peak = v.iter().fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m });
        let sign = if peak < 0.0 { -1.0 } else { 1.0 };
        let mut values = Vec::with_capacity(grid.n());
        values.push(0.0);
        values.extend(v.iter().map(|x| sign * x / norm));
        values.push(0.0);
        pairs.push(Eigenpair { value, vector: RealField::from_vec_unchecked(grid, values) });
    }
    Ok(pairs)
}

#[derive(Debug, Clone)]
pub struct SpectralStructure {
    pub omega: f64,
    /// Sturm inertia count of `L_+`.
    pub n_negative: usize,
    /// The negative eigenvalue `-mu^2` of `L_+`.
    pub lambda_neg: f64,
    /// Normalised negative eigenvector, `chi(0) > 0`.
    pub chi: RealField,
    /// `‖L_- Q‖_{H⁻¹} / ‖Q‖₂`.
    pub kernel_residual: f64,
    /// `‖L_- Q‖₂ / ‖Q‖₂` with the strong (pointwise) residual, for comparison.
    pub kernel_residual_strong: f64,
    /// `<chi, phi>`.
    pub chi_phi_pairing: f64,
    /// `|<chi, phi>| / (‖chi‖ ‖phi‖)`.
    pub chi_phi_cosine: f64,
    /// Smallest eigenvalue of `L_-`.
    pub minus_lowest: f64,
    /// Cosine similarity of the lowest `L_-` eigenvector with `Q`.
    pub minus_q_cosine: f64,
    /// Sturm inertia count of `L_-`.
    pub minus_negative: usize,
}

/// Structure check around the closed-form profile at `omega`.
pub fn spectral_structure(params: &ModelParams, omega: f64, grid: &Grid) -> Result<SpectralStructure> {
    let profiles = ProfileSet::closed_form(params, omega, grid)?;
    spectral_structure_of(&profiles)
}

pub fn spectral_structure_of(profiles: &ProfileSet) -> Result<SpectralStructure> {
    let params = profiles.params();
    let omega = profiles.omega();
    let grid = *profiles.grid();
    let plus = OperatorMatrix::around(params, omega, Which::Plus, profiles.q())?;
    let minus = OperatorMatrix::around(params, omega, Which::Minus, profiles.q())?;
    let n_negative = plus.negative_count();
    if n_negative != 1 {
        return Err(Error::StructureViolation { n_negative });
    }
    let neg = lowest_eigenpairs(&plus, 1)?.remove(0);
    let mut chi = neg.vector;
    if chi.at_zero() < 0.0 {
        chi = chi.scaled(-1.0);
    }
    let q_norm = profiles.q_norm2().sqrt();
    let kernel_residual = minus.dual_norm_of_image(profiles.q())? / q_norm;
    let strong = minus.apply(profiles.q());
    let kernel_residual_strong = dot_real(&grid, strong.values(), strong.values()).sqrt() / q_norm;
    let chi_phi_pairing = inner_product(&chi, profiles.phi())?;
    let chi_norm = dot_real(&grid, chi.values(), chi.values()).sqrt();
    let chi_phi_cosine = chi_phi_pairing.abs() / (chi_norm * profiles.phi_norm2().sqrt());
    let low = lowest_eigenpairs(&minus, 1)?.remove(0);
    let minus_q_cosine = inner_product(&low.vector, profiles.q())?.abs()
        / (q_norm * dot_real(&grid, low.vector.values(), low.vector.values()).sqrt());
    Ok(SpectralStructure {
        omega,
        n_negative,
        lambda_neg: neg.value,
        chi,
        kernel_residual,
        kernel_residual_strong,
        chi_phi_pairing,
        chi_phi_cosine,
        minus_lowest: low.value,
        minus_q_cosine,
        minus_negative: minus.negative_count(),
    })
}

/// Orthogonality conditions imposed on `epsilon` in the coercivity problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// `<epsilon, iQ> = 0` (acts on the imaginary part).
    IQ,
    /// `<epsilon, phi> = 0` (acts on the real part).
    Phi,
    /// `<epsilon, Q> = 0` (acts on the real part).
    Q,
}

/// The full constraint set `{iQ, phi, Q}`.
pub const ALL_CONSTRAINTS: [Constraint; 3] = [Constraint::IQ, Constraint::Phi, Constraint::Q];

#[derive(Debug, Clone)]
pub struct CoercivityEstimate {
    /// `min S''(e, e) / ‖e‖²_{H¹}` over the constrained subspace.
    pub kappa: f64,
    /// Minimum over real-part perturbations (operator `L_+`).
    pub kappa_real: f64,
    /// Minimum over imaginary-part perturbations (operator `L_-`).
    pub kappa_imag: f64,
    /// Minimiser, normalised to unit H¹ norm.
    pub minimizer: ComplexField,
    /// `<e, iQ>`, `<e, phi>`, `<e, Q>` at the minimiser.
    pub constraint_residuals: [f64; 3],
    pub constraints: Vec<Constraint>,
}

/// Constrained coercivity constant around the closed-form profile at `omega`.
pub fn coercivity_constant(
    params: &ModelParams,
    omega: f64,
    orth_set: &[Constraint],
    grid: &Grid,
) -> Result<CoercivityEstimate> {
    let profiles = ProfileSet::closed_form(params, omega, grid)?;
    coercivity_constant_of(&profiles, orth_set)
}

pub fn coercivity_constant_of(profiles: &ProfileSet, orth_set: &[Constraint]) -> Result<CoercivityEstimate> {
    let params = profiles.params();
    let omega = profiles.omega();
    let grid = *profiles.grid();
    let n = grid.n();
    let interior = |f: &RealField| f.values()[1..n - 1].to_vec();
    let gram = h1_gram(&grid);

    let mut real_constraints = Vec::new();
    if orth_set.contains(&Constraint::Phi) {
        real_constraints.push(interior(profiles.phi()));
    }
    if orth_set.contains(&Constraint::Q) {
        real_constraints.push(interior(profiles.q()));
    }
    let mut imag_constraints = Vec::new();
    if orth_set.contains(&Constraint::IQ) {
        imag_constraints.push(interior(profiles.q()));
    }

    let plus = OperatorMatrix::around(params, omega, Which::Plus, profiles.q())?;
    let minus = OperatorMatrix::around(params, omega, Which::Minus, profiles.q())?;
    let (kappa_real, x_real) = constrained_min_eigen(&plus.matrix, &gram, &real_constraints)?;
    let (kappa_imag, x_imag) = constrained_min_eigen(&minus.matrix, &gram, &imag_constraints)?;

    let (kappa, x, imaginary) =
        if kappa_real <= kappa_imag { (kappa_real, x_real, false) } else { (kappa_imag, x_imag, true) };
    let h1 = (grid.h() * gram.form(&x, &x)).sqrt();
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for (j, v) in x.iter().enumerate() {
        values[j + 1] = if imaginary { Complex64::new(0.0, v / h1) } else { Complex64::new(v / h1, 0.0) };
    }
    let minimizer = ComplexField::from_vec_unchecked(grid, values);
    let iq = profiles.q().to_complex().scaled(Complex64::new(0.0, 1.0));
    let constraint_residuals = [
        inner_product(&minimizer, &iq)?,
        inner_product(&minimizer, profiles.phi())?,
        inner_product(&minimizer, profiles.q())?,
    ];
    Ok(CoercivityEstimate {
        kappa,
        kappa_real,
        kappa_imag,
        minimizer,
        constraint_residuals,
        constraints: orth_set.to_vec(),
    })
}

/// Like [`coercivity_constant_of`], failing with a coercivity violation when `kappa <= 0`.
pub fn require_coercive(profiles: &ProfileSet, orth_set: &[Constraint]) -> Result<CoercivityEstimate> {
    let estimate = coercivity_constant_of(profiles, orth_set)?;
    if estimate.kappa > 0.0 {
        Ok(estimate)
    } else {
        Err(Error::CoercivityViolation { kappa: estimate.kappa })
    }
}

const LANCZOS_BASIS: usize = 60;
const LANCZOS_RESTARTS: usize = 60;
const LANCZOS_TOL: f64 = 1e-11;

/// Smallest eigenvalue of `K x = mu G x` on `{x : c_j^T x = 0}` (G symmetric positive
/// definite), by shift-and-invert Lanczos in the G inner product with explicit restarts.
///
/// Returns `mu` as the Rayleigh quotient at the exactly projected minimiser.
pub fn constrained_min_eigen(k: &SymTridiag, g: &SymTridiag, constraints: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let m = k.dim();
    let lowest = k.eigenvalue(0)?;
    let sigma = lowest.min(0.0) - 1.0;
    let shifted = k.shifted_by(sigma, g);
    let solver = SpdTridiagSolver::new(&shifted)?;

    // Z = M^{-1} C and the small Schur complement S = C^T Z.
    let nc = constraints.len();
    let z: Vec<Vec<f64>> = constraints
        .iter()
        .map(|c| {
            let mut v = c.clone();
            solver.solve(&mut v);
            v
        })
        .collect();
    let mut schur = vec![vec![0.0; nc]; nc];
    for i in 0..nc {
        for j in 0..nc {
            schur[i][j] = dot(&constraints[i], &z[j]);
        }
    }
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; m];
        g.matvec(v, &mut r);
        solver.solve(&mut r);
        if nc > 0 {
            let rhs: Vec<f64> = constraints.iter().map(|c| dot(c, &r)).collect();
            let y = solve_small(&schur, &rhs);
            for (zj, yj) in z.iter().zip(&y) {
                r.iter_mut().zip(zj).for_each(|(a, b)| *a -= yj * b);
            }
        }
        r
    };
    let project = |v: &mut Vec<f64>| {
        if nc == 0 {
            return;
        }
        let mut gram = vec![vec![0.0; nc]; nc];
        for i in 0..nc {
            for j in 0..nc {
                gram[i][j] = dot(&constraints[i], &constraints[j]);
            }
        }
        for _ in 0..2 {
            let rhs: Vec<f64> = constraints.iter().map(|c| dot(c, v)).collect();
            let y = solve_small(&gram, &rhs);
            for (c, yj) in constraints.iter().zip(&y) {
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= yj * b);
            }
        }
    };

    let mut start: Vec<f64> = (0..m).map(|i| 1.0 + 0.3 * ((i as f64) * 0.618_034).sin()).collect();
    project(&mut start);
    let mut theta_prev = f64::NAN;
    let mut best = start;
    for _ in 0..LANCZOS_RESTARTS {
        let (theta, ritz, residual) = lanczos_top(&apply, g, &best, LANCZOS_BASIS)?;
        best = ritz;
        project(&mut best);
        let converged = residual <= LANCZOS_TOL * theta.abs()
            || (theta_prev.is_finite() && (theta - theta_prev).abs() <= 1e-14 * theta.abs());
        theta_prev = theta;
        if converged {
            break;
        }
    }
    let mu = k.form(&best, &best) / g.form(&best, &best);
    Ok((mu, best))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting for the (at most 3x3) constraint systems.
fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        let (top, bottom) = m.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for r in bottom.iter_mut() {
            let f = r[col] / pivot_row[col];
            r[col..].iter_mut().zip(&pivot_row[col..]).for_each(|(a, b)| *a -= f * b);
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (m[row][n] - s) / m[row][row];
    }
    x
}

/// One Lanczos cycle of length `basis` in the G inner product; returns the largest Ritz
/// value, its Ritz vector and the residual estimate `beta_m |s_m|`.
fn lanczos_top<F: Fn(&[f64]) -> Vec<f64>>(
    apply: &F,
    g: &SymTridiag,
    start: &[f64],
    basis: usize,
) -> Result<(f64, Vec<f64>, f64)> {
    let m = start.len();
    let g_norm = |v: &[f64]| -> (f64, Vec<f64>) {
        let mut gv = vec![0.0; m];
        g.matvec(v, &mut gv);
        (dot(v, &gv).sqrt(), gv)
    };
    let (n0, _) = g_norm(start);
    if !(n0 > 0.0) {
        return Err(Error::NotConverged("Lanczos start vector vanishes in the constraint subspace".into()));
    }
    let mut vs: Vec<Vec<f64>> = vec![start.iter().map(|x| x / n0).collect()];
    let mut gvs: Vec<Vec<f64>> = vec![{
        let mut gv = vec![0.0; m];
        g.matvec(&vs[0], &mut gv);
        gv
    }];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last_beta = 0.0;
    for j in 0..basis.min(m) {
        let mut w = apply(&vs[j]);
        let alpha = dot(&w, &gvs[j]);
        alphas.push(alpha);
        // Full reorthogonalisation (twice) against the stored basis.
        for _ in 0..2 {
            for (v, gv) in vs.iter().zip(&gvs) {
                let c = dot(&w, gv);
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
        }
        let (beta, gw) = g_norm(&w);
        last_beta = beta;
        if j + 1 == basis.min(m) || beta <= 1e-14 * alpha.abs() {
            break;
        }
        betas.push(beta);
        vs.push(w.iter().map(|x| x / beta).collect());
        gvs.push(gw.iter().map(|x| x / beta).collect());
    }
    let dim = alphas.len();
    let t = SymTridiag::new(alphas, betas)?;
    let theta = t.eigenvalue(dim - 1)?;
    let s = t.eigenvector(theta, &[])?;
    let mut ritz = vec![0.0; m];
    for (v, sj) in vs.iter().zip(&s) {
        ritz.iter_mut().zip(v).for_each(|(a, b)| *a += sj * b);
    }
    Ok((theta, ritz, last_beta * s[dim - 1].abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::critical_frequency;

    fn p7() -> ModelParams {
        ModelParams::new(7.0, 1.0).unwrap()
    }

    #[test]
    fn delta_operator_bound_state() {
        let gamma = 1.0;
        let grid = Grid::new(40.0, 8001).unwrap();
        let op = OperatorMatrix::linear_only(&grid, gamma, 0.0);
        assert_eq!(op.negative_count(), 1);
        let pair = lowest_eigenpairs(&op, 1).unwrap().remove(0);
        assert!((pair.value + 0.25).abs() < 1e-4, "{}", pair.value);
        let exact = grid.sample(|x| (gamma / 2.0).sqrt() * (-gamma * x.abs() / 2.0).exp());
        let diff = pair.vector.combine(1.0, &exact, -1.0).unwrap();
        assert!(crate::numerics::grid::l2_norm(&diff) < 1e-3);
    }

    #[test]
    fn free_dirichlet_ground_state() {
        let grid = Grid::new(10.0, 4001).unwrap();
        let omega = 1.5;
        let op = OperatorMatrix::linear_only(&grid, 0.0, omega);
        let value = lowest_eigenpairs(&op, 1).unwrap()[0].value;
        let exact = omega + (std::f64::consts::PI / 20.0).powi(2);
        assert!((value - exact).abs() < 1e-6, "{value} vs {exact}");
    }

    #[test]
    fn lowest_eigenpairs_are_sorted_and_orthonormal() {
        let params = p7();
        let grid = Grid::new(40.0, 4001).unwrap();
        let op = OperatorMatrix::assemble(&params, 1.2, Which::Plus, &grid).unwrap();
        let pairs = lowest_eigenpairs(&op, 4).unwrap();
        for w in pairs.windows(2) {
            assert!(w[0].value < w[1].value);
        }
        for i in 0..4 {
            for j in 0..4 {
                let ip = inner_product(&pairs[i].vector, &pairs[j].vector).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-9, "({i},{j}) {ip}");
            }
        }
        let negatives = pairs.iter().filter(|p| p.value < 0.0).count();
        assert_eq!(negatives, op.negative_count());
        assert!(lowest_eigenpairs(&op, 7).is_err());
    }

    #[test]
    fn structure_at_critical_and_stable_frequencies() {
        let params = p7();
        let omega = critical_frequency(&params).unwrap().omega_star;
        for &w in &[omega, 0.8 * omega] {
            let grid = Grid::new(40.0, 8001).unwrap();
            let s = spectral_structure(&params, w, &grid).unwrap();
            assert_eq!(s.n_negative, 1);
            assert!(s.lambda_neg < 0.0);
            assert!(s.chi.at_zero() > 0.0);
            assert!(s.chi_phi_cosine >= 1e-3);
            assert!(s.minus_q_cosine >= 1.0 - 1e-6, "{}", s.minus_q_cosine);
            assert!(s.minus_lowest.abs() < 1e-3);
        }
    }

    #[test]
    fn kernel_residual_converges_at_second_order() {
        let params = p7();
        let omega = critical_frequency(&params).unwrap().omega_star;
        let r: Vec<f64> = [4001, 8001, 16_001]
            .iter()
            .map(|&n| spectral_structure(&params, omega, &Grid::new(40.0, n).unwrap()).unwrap().kernel_residual)
            .collect();
        assert!((r[0] / r[1]).log2() >= 1.9 && (r[1] / r[2]).log2() >= 1.9, "{r:?}");
    }

    #[test]
    fn coercivity_is_positive_with_three_constraints() {
        let params = p7();
        let omega = critical_frequency(&params).unwrap().omega_star;
        let grid = Grid::new(40.0, 4001).unwrap();
        let full = coercivity_constant(&params, omega, &ALL_CONSTRAINTS, &grid).unwrap();
        assert!(full.kappa > 0.0, "{}", full.kappa);
        for r in full.constraint_residuals {
            assert!(r.abs() < 1e-10);
        }
        let h1 = crate::numerics::grid::h1_norm(&full.minimizer);
        assert!((h1 - 1.0).abs() < 1e-12);
        let quotient = crate::functionals::bilinear_s2(
            &params,
            omega,
            &ProfileSet::closed_form(&params, omega, &grid).unwrap().q().clone(),
            &full.minimizer,
            &full.minimizer,
        )
        .unwrap();
        assert!((quotient - full.kappa).abs() < 1e-9 * full.kappa.abs().max(1.0), "{quotient} vs {}", full.kappa);
        let relaxed = coercivity_constant(&params, omega, &[Constraint::IQ, Constraint::Phi], &grid).unwrap();
        assert!(relaxed.kappa <= full.kappa + 1e-12);
    }

    #[test]
    fn constrained_eigen_matches_dense_oracle_on_small_problem() {
        // K = diag(-1, 1, 2, 3, 4), G = I, constraint e_0: answer 1.
        let k = SymTridiag::new(vec![-1.0, 1.0, 2.0, 3.0, 4.0], vec![0.0; 4]).unwrap();
        let g = SymTridiag::new(vec![1.0; 5], vec![0.0; 4]).unwrap();
        let c = vec![vec![1.0, 0.0, 0.0, 0.0, 0.0]];
        let (mu, x) = constrained_min_eigen(&k, &g, &c).unwrap();
        assert!((mu - 1.0).abs() < 1e-12, "{mu}");
        assert!(x[0].abs() < 1e-14);
        let (mu0, _) = constrained_min_eigen(&k, &g, &[]).unwrap();
        assert!((mu0 + 1.0).abs() < 1e-12);
    }
}
