//! Projected BFGS for smooth objectives under box constraints.

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Stop when the relative objective improvement of an accepted step drops below this.
    pub rel_tol: f64,
    /// Stop when the projected gradient sup-norm is below `grad_tol * max(1, |f|)`.
    pub grad_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            rel_tol: 1e-10,
            grad_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    RelativeImprovement,
    LineSearchFailed,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub reason: StopReason,
}

impl OptimOutcome {
    pub fn converged(&self) -> bool {
        matches!(
            self.reason,
            StopReason::Gradient | StopReason::RelativeImprovement
        )
    }
}

/// Minimizes `f` over the box `[lower, upper]`.
///
/// `eval` returns the objective and its gradient, or `None` where the objective
/// is undefined (treated as +∞ by the line search). Coordinates sitting on a
/// bound with the gradient pushing outward are frozen for the step.
pub fn minimize_box<F>(
    mut eval: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: OptimOptions,
) -> Option<OptimOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let project = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut f, mut g) = eval(&x).filter(|(f, g)| f.is_finite() && g.iter().all(|v| v.is_finite()))?;
    let mut h = identity(n);
    let mut fresh_h = true;
    let mut iterations = 0;
    let reason = loop {
        if iterations >= opts.max_iter {
            break StopReason::IterationLimit;
        }
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)))
            .collect();
        let pg: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm <= opts.grad_tol * f.abs().max(1.0) {
            break StopReason::Gradient;
        }
        let mut d: Vec<f64> = (0..n)
            .map(|i| {
                if free[i] {
                    -(0..n).filter(|&j| free[j]).map(|j| h[i][j] * g[j]).sum::<f64>()
                } else {
                    0.0
                }
            })
            .collect();
        if dot(&d, &pg) >= 0.0 {
            h = identity(n);
            fresh_h = true;
            d = pg.iter().map(|v| -v).collect();
        }

        let mut accepted = None;
        let mut step = 1.0;
        for _ in 0..60 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            project(&mut xn);
            let decrease: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if let Some((fn_, gn)) = eval(&xn) {
                if fn_.is_finite()
                    && gn.iter().all(|v| v.is_finite())
                    && fn_ <= f + 1e-4 * decrease
                {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((xn, fn_, gn)) = accepted else {
            if fresh_h {
                break StopReason::LineSearchFailed;
            }
            h = identity(n);
            fresh_h = true;
            continue;
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if fresh_h {
                let scale = sy / dot(&y, &y);
                h = identity(n);
                for (i, row) in h.iter_mut().enumerate() {
                    row[i] = scale;
                }
            }
            bfgs_update(&mut h, &s, &y, sy);
            fresh_h = false;
        }
        let improvement = f - fn_;
        let stop = improvement.abs() <= opts.rel_tol * f.abs().max(1.0);
        x = xn;
        f = fn_;
        g = gn;
        if stop {
            break StopReason::RelativeImprovement;
        }
    };
    Some(OptimOutcome {
        x,
        f,
        grad: g,
        iterations,
        reason,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

// inverse-Hessian update: H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
