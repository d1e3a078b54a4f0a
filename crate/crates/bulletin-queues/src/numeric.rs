//! Small numeric kernels shared across modules: Poisson partial sums (the
//! building block of every Erlang tail here), the logistic function, log
//! factorials, and an adaptive Simpson integrator.

use crate::error::Error;

/// Partial Poisson sum `sum_{v=0}^{terms-1} x^v e^-x / v!`, the CDF mass an
/// Erlang tail is built from. Returns 0 for `terms == 0` and is clamped to
/// [0, 1] against rounding drift so complements stay exact.
pub fn poisson_partial_sum(x: f64, terms: usize) -> f64 {
    if terms == 0 {
        return 0.0;
    }
    if x == 0.0 {
        return 1.0; // v = 0 term is 1, all higher terms vanish
    }
    let mut term = (-x).exp();
    let mut sum = term;
    for v in 1..terms {
        term *= x / v as f64;
        sum += term;
    }
    sum.clamp(0.0, 1.0)
}

/// Logistic sigmoid. Saturates cleanly at the f64 limits so that
/// `sigmoid(x) + sigmoid(-x) == 1` holds to machine precision.
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Derivative of the logistic sigmoid.
pub fn sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// ln(n!) by direct summation; call sites stay in the low hundreds.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|v| (v as f64).ln()).sum()
}

/// Adaptive Simpson quadrature on [a, b] to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64, Error> {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        force: u32,
    ) -> Result<f64, Error> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let err = left + right - whole;
        // The acceptance test is only trustworthy once the panels are finer
        // than the integrand's features, so a minimum subdivision depth is
        // forced before any early exit (sharply peaked integrands would
        // otherwise be judged from probe points that all miss the peak).
        if force == 0 && err.abs() <= 15.0 * tol {
            return Ok(left + right + err / 15.0);
        }
        if depth == 0 {
            return Err(Error::QuadratureFailure {
                tol,
                err: err.abs() / 15.0,
            });
        }
        let next_force = force.saturating_sub(1);
        let l = recurse(f, a, fa, m, fm, flm, left, tol * 0.5, depth - 1, next_force)?;
        let r = recurse(f, m, fm, b, fb, frm, right, tol * 0.5, depth - 1, next_force)?;
        Ok(l + r)
    }

    if a >= b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 48, 6)
}

/// Arithmetic mean; callers guarantee a nonempty slice.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n−1 denominator); `None` below two samples.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Median of an ascending slice; `None` when empty.
pub fn median_sorted(xs: &[f64]) -> Option<f64> {
    match xs.len() {
        0 => None,
        n if n % 2 == 1 => Some(xs[n / 2]),
        n => Some(0.5 * (xs[n / 2 - 1] + xs[n / 2])),
    }
}

/// Linear-interpolation quantile of an ascending slice, q in [0, 1].
pub fn quantile_sorted(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(xs[lo] + (pos - lo as f64) * (xs[hi] - xs[lo]))
}
