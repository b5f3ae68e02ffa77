use alloc::vec;
use alloc::vec::Vec;

/// Dense LU factorization with partial pivoting, `P·M = L·U`.
#[derive(Debug, Clone, Default)]
pub(crate) struct DenseLu {
    k: usize,
    /// Row-major; unit lower triangle below the diagonal, U on and above.
    lu: Vec<f64>,
    /// `perm[i]` is the original row placed at position `i`.
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factorizes the row-major `k×k` matrix. `None` when a pivot falls
    /// below `tol` relative to the largest entry of its column.
    pub(crate) fn factorize(mut a: Vec<f64>, k: usize, tol: f64) -> Option<Self> {
        debug_assert_eq!(a.len(), k * k);
        let mut perm: Vec<usize> = (0..k).collect();
        for col in 0..k {
            let mut best = col;
            let mut best_abs = a[col * k + col].abs();
            for r in col + 1..k {
                let v = a[r * k + col].abs();
                if v > best_abs {
                    best = r;
                    best_abs = v;
                }
            }
            if best_abs <= tol {
                return None;
            }
            if best != col {
                for c in 0..k {
                    a.swap(col * k + c, best * k + c);
                }
                perm.swap(col, best);
            }
            let pivot = a[col * k + col];
            for r in col + 1..k {
                let f = a[r * k + col] / pivot;
                if f == 0.0 {
                    continue;
                }
                a[r * k + col] = f;
                let (head, tail) = a.split_at_mut(r * k);
                let prow = &head[col * k + col + 1..col * k + k];
                let rrow = &mut tail[col + 1..k];
                for (x, p) in rrow.iter_mut().zip(prow) {
                    *x -= f * p;
                }
            }
        }
        Some(DenseLu { k, lu: a, perm })
    }

    /// Solves `M z = rhs` in place.
    pub(crate) fn solve(&self, rhs: &mut [f64]) {
        let k = self.k;
        let mut z: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..k {
            let row = &self.lu[i * k..i * k + i];
            let s: f64 = row.iter().zip(&z[..i]).map(|(l, v)| l * v).sum();
            z[i] -= s;
        }
        for i in (0..k).rev() {
            let row = &self.lu[i * k + i + 1..i * k + k];
            let s: f64 = row.iter().zip(&z[i + 1..]).map(|(u, v)| u * v).sum();
            z[i] = (z[i] - s) / self.lu[i * k + i];
        }
        rhs[..k].copy_from_slice(&z);
    }

    /// Solves `Mᵀ y = rhs` in place.
    pub(crate) fn solve_transposed(&self, rhs: &mut [f64]) {
        let k = self.k;
        // Mᵀ = Uᵀ Lᵀ P, so solve Uᵀ w = rhs, Lᵀ v = w, then y = Pᵀ v.
        let mut w = rhs[..k].to_vec();
        for i in 0..k {
            let d = self.lu[i * k + i];
            w[i] /= d;
            let wi = w[i];
            if wi != 0.0 {
                for c in i + 1..k {
                    w[c] -= self.lu[i * k + c] * wi;
                }
            }
        }
        for i in (0..k).rev() {
            let wi = w[i];
            if wi != 0.0 {
                for c in 0..i {
                    w[c] -= self.lu[i * k + c] * wi;
                }
            }
        }
        let mut y = vec![0.0; k];
        for (i, &p) in self.perm.iter().enumerate() {
            y[p] = w[i];
        }
        rhs[..k].copy_from_slice(&y);
    }
}
