//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use ppgof::{EventSequence, ModelSpec, ObservationWindow};

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn gl_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    rule.iter().map(|&(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Adaptive Gauss–Legendre integration; never evaluates `f` at `a` or `b`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let rule = gauss_legendre(10);
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        rule: &[(f64, f64)],
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = gl_panel(f, a, m, rule);
        let right = gl_panel(f, m, b, rule);
        if depth == 0 || (left + right - whole).abs() <= tol {
            left + right
        } else {
            rec(f, a, m, left, 0.5 * tol, depth - 1, rule)
                + rec(f, m, b, right, 0.5 * tol, depth - 1, rule)
        }
    }
    if a == b {
        return 0.0;
    }
    let whole = gl_panel(f, a, b, &rule);
    let tol = (rel_tol * whole.abs()).max(1e-300);
    rec(f, a, b, whole, tol, 40, &rule)
}

/// `∫_{t_start}^t λ(s) ds` by quadrature of `intensity_at`, split at events.
pub fn compensator_by_quadrature(model: &ModelSpec, history: &EventSequence, t: f64) -> f64 {
    let w = history.window();
    let mut cuts = vec![w.t_start];
    cuts.extend(history.times().iter().copied().filter(|&x| x < t));
    cuts.push(t);
    let f = |s: f64| model.intensity_at(history, s).unwrap();
    cuts.windows(2)
        .map(|p| integrate(&f, p[0], p[1], 1e-14))
        .sum()
}

/// `Λ(t_n)` for a Hawkes model by the direct O(n²) double sum.
pub fn hawkes_compensator_direct(mu: f64, alpha: f64, beta: f64, times: &[f64], t0: f64, t: f64) -> f64 {
    let mut s = mu * (t - t0);
    for &ti in times.iter().filter(|&&x| x < t) {
        s += alpha / beta * (1.0 - (-beta * (t - ti)).exp());
    }
    s
}

/// Mean count `∫_0^T η` where `η(t) = μ + ∫_0^t α e^{-β(t-s)} η(s) ds`, by the
/// trapezoidal rule on a grid of `steps` intervals.
pub fn volterra_mean_count(mu: f64, alpha: f64, beta: f64, t_end: f64, steps: usize) -> f64 {
    let h = t_end / steps as f64;
    let mut eta = vec![mu; steps + 1];
    for i in 1..=steps {
        let ti = i as f64 * h;
        let mut acc = 0.5 * (-beta * ti).exp() * eta[0];
        for (j, e) in eta.iter().enumerate().take(i).skip(1) {
            acc += (-beta * (ti - j as f64 * h)).exp() * e;
        }
        // the j = i term carries η(t_i) itself with weight h/2
        eta[i] = (mu + alpha * h * acc) / (1.0 - 0.5 * alpha * h);
    }
    h * (eta.iter().sum::<f64>() - 0.5 * (eta[0] + eta[steps]))
}

/// Anderson–Darling statistic of a sample against U(0, 1).
pub fn anderson_darling_uniform(p: &[f64]) -> f64 {
    let mut u: Vec<f64> = p.iter().map(|&x| x.clamp(1e-15, 1.0 - 1e-15)).collect();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let s: f64 = u
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let k = (2 * i + 1) as f64;
            k * (x.ln() + (1.0 - u[u.len() - 1 - i]).ln())
        })
        .sum();
    -n - s / n
}

/// Upper 1% point of the Anderson–Darling statistic for a fully specified null.
pub const AD_CRITICAL_1PCT: f64 = 3.857;

/// Sup-norm distance between the empirical CDF of `p` and the U(0, 1) CDF.
pub fn uniform_sup_distance(p: &[f64]) -> f64 {
    let mut u = p.to_vec();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn quantile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn unit() -> ObservationWindow {
    ObservationWindow::unit()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
