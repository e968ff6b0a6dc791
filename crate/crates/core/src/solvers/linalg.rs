//! Small dense linear algebra on row-major square matrices.

/// Inverts the `n×n` row-major matrix `a` by Gauss-Jordan elimination with
/// partial pivoting. Returns `None` when a pivot falls below `1e-13` times the
/// largest entry.
pub fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut work = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&x, &y| work[x * n + col].abs().total_cmp(&work[y * n + col].abs()))?;
        let pivot = work[pivot_row * n + col];
        if pivot.abs() <= 1e-13 * scale {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                work.swap(col * n + k, pivot_row * n + k);
                inv.swap(col * n + k, pivot_row * n + k);
            }
        }
        let p = 1.0 / pivot;
        for k in 0..n {
            work[col * n + k] *= p;
            inv[col * n + k] *= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = work[row * n + col];
            if factor == 0.0 {
                continue;
            }
            for k in 0..n {
                work[row * n + k] -= factor * work[col * n + k];
                inv[row * n + k] -= factor * inv[col * n + k];
            }
        }
    }
    Some(inv)
}

/// `y = M x` for row-major `n×n` `M`.
pub fn mat_vec(m: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (0..n).map(|k| m[i * n + k] * x[k]).sum())
        .collect()
}

/// `y = Mᵀ x` for row-major `n×n` `M`.
pub fn mat_t_vec(m: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (0..n).map(|i| m[i * n + k] * x[i]).sum())
        .collect()
}

/// Solves `H x = b` for symmetric positive definite `H` by Cholesky.
/// Returns `None` if a diagonal pivot drops below `rel_tol·max diag`.
pub fn cholesky_solve(h: &[f64], b: &[f64], n: usize, rel_tol: f64) -> Option<Vec<f64>> {
    let max_diag = (0..n).fold(0.0f64, |m, i| m.max(h[i * n + i]));
    if max_diag <= 0.0 {
        return None;
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = h[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= rel_tol * max_diag {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let a = [0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let inv = invert(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - f64::from(u8::from(i == j))).abs() < 1e-14);
            }
        }
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn cholesky_matches_direct_solve() {
        let h = [4.0, 1.0, 1.0, 3.0];
        let x = cholesky_solve(&h, &[1.0, 2.0], 2, 1e-12).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
        assert!(cholesky_solve(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0], 2, 1e-12).is_none());
    }
}
