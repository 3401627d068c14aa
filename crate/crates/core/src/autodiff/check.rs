//! Finite-difference gradient checking used throughout the test suites.

use ndarray::Array2;

/// Central-difference gradient of `f` w.r.t. each parameter array.
pub fn numeric_grad<F>(f: &F, params: &[Array2<f64>], h: f64) -> Vec<Array2<f64>>
where
    F: Fn(&[Array2<f64>]) -> f64,
{
    let mut grads = Vec::with_capacity(params.len());
    let mut work: Vec<Array2<f64>> = params.to_vec();
    for pi in 0..params.len() {
        let mut grad = Array2::zeros(params[pi].dim());
        for idx in 0..params[pi].len() {
            let (r, c) = (idx / params[pi].ncols(), idx % params[pi].ncols());
            let orig = work[pi][(r, c)];
            work[pi][(r, c)] = orig + h;
            let up = f(&work);
            work[pi][(r, c)] = orig - h;
            let down = f(&work);
            work[pi][(r, c)] = orig;
            grad[(r, c)] = (up - down) / (2.0 * h);
        }
        grads.push(grad);
    }
    grads
}

/// Largest entrywise relative error, `|a−b| / max(1, |a|, |b|)`.
pub fn max_rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "max_rel_err: shapes differ");
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}
