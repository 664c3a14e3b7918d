//! Small dense linear algebra. Pose counts are in the dozens at most, so
//! Gaussian elimination with partial pivoting is all that is needed.

use crate::mdp::Matrix;

/// Pivots smaller than this are treated as zero.
const PIVOT_TOL: f64 = 1e-13;

/// Solves `a · x = b`. Returns `None` when the system is (numerically) singular.
pub fn solve(mut a: Matrix, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < PIVOT_TOL {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Stationary distribution `π` of a row-stochastic `p`: `π·P = π`, `Σπ = 1`.
///
/// Solves `(Pᵀ − I)π = 0` with the last balance equation replaced by the
/// normalization constraint. `None` if the chain has more than one closed
/// class.
pub fn stationary_distribution(p: &Matrix) -> Option<Vec<f64>> {
    let n = p.len();
    let mut a: Matrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| p[j][i] - if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut pi = solve(a, b)?;
    // clean round-off so the vector is a proper distribution
    pi.iter_mut().for_each(|x| *x = x.max(0.0));
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    Some(pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_row_swaps() {
        let a = vec![vec![0.0, 2.0], vec![3.0, 1.0]];
        let x = solve(a, vec![4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_system_is_reported() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve(a, vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn two_state_stationary() {
        let p = vec![vec![0.9, 0.1], vec![0.3, 0.7]];
        let pi = stationary_distribution(&p).unwrap();
        assert!((pi[0] - 0.75).abs() < 1e-12);
        assert!((pi[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn two_closed_classes_have_no_unique_stationary() {
        let p = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(stationary_distribution(&p).is_none());
    }
}
