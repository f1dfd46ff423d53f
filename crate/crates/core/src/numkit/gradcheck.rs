use crate::numkit::Params;

pub const DEFAULT_STEP: f64 = 1e-4;

/// Compares the analytic gradient returned by `loss_fn` against central
/// differences with step `h`.
///
/// Returns `max |analytic - numeric| / max(1, |numeric|)` over every parameter.
/// A non-finite loss or gradient yields `f64::INFINITY`.
pub fn grad_check<P, G, F>(params: &P, h: f64, mut loss_fn: F) -> f64
where
    P: Params + Clone,
    G: Params,
    F: FnMut(&P) -> (f64, G),
{
    let (_, analytic) = loss_fn(params);
    let analytic: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.to_vec()).collect();
    let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    if analytic.len() != shapes.len()
        || analytic.iter().zip(&shapes).any(|(a, &n)| a.len() != n)
    {
        return f64::INFINITY;
    }

    let mut worst = 0.0f64;
    for (ti, &len) in shapes.iter().enumerate() {
        for j in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[ti][j] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[ti][j] -= h;
            let numeric = (loss_fn(&plus).0 - loss_fn(&minus).0) / (2.0 * h);
            let err = (analytic[ti][j] - numeric).abs() / numeric.abs().max(1.0);
            if !err.is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(err);
        }
    }
    worst
}
