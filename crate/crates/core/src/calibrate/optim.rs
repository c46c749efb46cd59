//! Nelder–Mead minimization.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmOptions {
    /// Stop once the simplex fits in a ball of this diameter (infinity norm).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 5_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with initial simplex edges `step`.
///
/// Non-finite values count as `+∞`, so infeasible regions can be signalled
/// by returning NaN or infinity.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: &[f64], opts: &NmOptions) -> NmResult {
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if step[i] != 0.0 { step[i] } else { 1e-3 };
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .flat_map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.tol && values[0].is_finite() {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let x: Vec<f64> = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
            values[i] = eval(&x);
            simplex[i] = x;
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    NmResult { x: simplex[best].clone(), value: values[best], iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], &NmOptions { tol: 1e-10, max_iter: 10_000 });
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn quadratic_in_four_dimensions() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let f = |x: &[f64]| x.iter().zip(&c).enumerate().map(|(i, (a, b))| (i + 1) as f64 * (a - b).powi(2)).sum();
        let r = nelder_mead(f, &[0.0; 4], &[1.0; 4], &NmOptions::default());
        assert!(r.converged);
        for (a, b) in r.x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| if x[0] > 0.3 { f64::NAN } else { (x[0] - 1.0).powi(2) };
        let r = nelder_mead(f, &[0.0], &[0.1], &NmOptions::default());
        assert!(r.value <= 1.0);
        assert!(r.x[0] <= 0.3);
    }

    #[test]
    fn iteration_cap() {
        let f = |x: &[f64]| x[0].abs();
        let r = nelder_mead(f, &[100.0], &[1.0], &NmOptions { tol: 0.0, max_iter: 3 });
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
