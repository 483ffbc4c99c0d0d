use nalgebra::{DMatrix, DVector};

/// Minimum-norm least-squares solution of `A w ≈ y` (rows of `A` are augmented
/// inputs). `None` when there are no rows.
pub fn least_squares<'a, I>(rows: I, ys: &[f64]) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let rows: Vec<&[f64]> = rows.into_iter().collect();
    let cols = rows.first()?.len();
    let a = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]);
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let sol = svd.solve(&b, 1e-12).ok()?;
    Some(sol.iter().copied().collect())
}

/// Solve a square system, `None` when (numerically) singular.
pub fn solve_square(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    let scale = a.amax().max(1.0);
    let n = a.nrows() as i32;
    let lu = a.full_piv_lu();
    let det = lu.determinant();
    if !det.is_finite() || det.abs() <= 1e-12 * scale.powi(n) {
        return None;
    }
    lu.solve(&b)
}
