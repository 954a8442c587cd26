use ndarray::{Array1, Array2, ArrayView2};

use crate::parallel;

/// Squared Euclidean norm of every row.
pub fn row_sq_norms(z: &ArrayView2<'_, f64>) -> Array1<f64> {
    z.rows().into_iter().map(|r| r.dot(&r)).collect()
}

/// Dense pairwise distances between the rows of `z`.
///
/// Uses `‖a‖² + ‖b‖² − 2⟨a, b⟩` with negative round-off clamped to zero; the
/// result is exactly symmetric with a zero diagonal.
pub fn pairwise_dist(z: &ArrayView2<'_, f64>, squared: bool) -> Array2<f64> {
    let n = z.nrows();
    let gram = parallel::dot(z, &z.t());
    // Norms from the Gram diagonal: identical rows then cancel exactly.
    let norms: Array1<f64> = gram.diag().to_owned();
    let mut d = Array2::<f64>::zeros((n, n));
    parallel::for_each_row_mut(&mut d, |i, mut row| {
        for j in 0..n {
            if i == j {
                continue;
            }
            // Evaluate the (min, max) ordered pair so d[i][j] == d[j][i] bitwise.
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            let sq = (norms[a] + norms[b] - 2.0 * gram[[a, b]]).max(0.0);
            row[j] = if squared { sq } else { sq.sqrt() };
        }
    });
    d
}
