//! Symmetric tridiagonal solves (Thomas algorithm). The Jacobians and the mass
//! matrix of the ladder are symmetric and diagonally dominant, so no pivoting
//! is needed.

/// One-off solve of `A x = rhs` in place, where `A` has main diagonal `diag`
/// and `off[i] = A[i][i+1] = A[i+1][i]`.
pub fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &mut [f64]) {
    FactoredTridiag::new(diag, off).solve(rhs);
}

/// Thomas factorisation of a symmetric tridiagonal matrix, reused for many
/// right-hand sides.
#[derive(Debug, Clone)]
pub struct FactoredTridiag {
    off: Vec<f64>,
    inv_denom: Vec<f64>,
    c_prime: Vec<f64>,
}

impl FactoredTridiag {
    pub fn new(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        let mut f = Self {
            off: vec![0.0; n.saturating_sub(1)],
            inv_denom: vec![0.0; n],
            c_prime: vec![0.0; n],
        };
        f.refactor(diag, off);
        f
    }

    /// Replaces the factorised matrix by one of the same size.
    pub fn refactor(&mut self, diag: &[f64], off: &[f64]) {
        let n = diag.len();
        debug_assert_eq!(n, self.inv_denom.len());
        debug_assert_eq!(off.len() + 1, n);
        self.off.copy_from_slice(off);
        let mut denom = diag[0];
        self.inv_denom[0] = 1.0 / denom;
        for i in 1..n {
            self.c_prime[i - 1] = off[i - 1] * self.inv_denom[i - 1];
            denom = diag[i] - off[i - 1] * self.c_prime[i - 1];
            self.inv_denom[i] = 1.0 / denom;
        }
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        rhs[0] *= self.inv_denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off[i - 1] * rhs[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}
