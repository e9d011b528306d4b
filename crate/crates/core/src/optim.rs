//! Unconstrained quasi-Newton minimisation (BFGS with Armijo backtracking).

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop once the gradient infinity-norm falls below `gtol · max(1, |f|)`.
    pub gtol: f64,
    /// A run counts as converged if it ends (for any reason) with the
    /// gradient below `accept_gtol · max(1, |f|)`, or its last full step
    /// improved `f` by less than `ftol`.
    pub accept_gtol: f64,
    pub ftol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iterations: 10_000,
            gtol: 1e-11,
            accept_gtol: 1e-6,
            ftol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimise `f`, where `eval(x, grad)` returns `f(x)` and writes the gradient.
pub fn minimize<F>(mut eval: F, x0: &[f64], opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = eval(&x, &mut g);
    let mut h = identity(n);
    let mut last_improvement = f64::INFINITY;
    let mut iterations = 0;

    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut d = vec![0.0; n];

    while iterations < opts.max_iterations {
        if !f.is_finite() {
            break;
        }
        let scale = f.abs().max(1.0);
        if inf_norm(&g) <= opts.gtol * scale {
            break;
        }
        iterations += 1;

        mat_vec_neg(&h, &g, &mut d);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            reset(&mut h);
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = dot(&g, &d);
        }

        // Armijo backtracking; on failure fall back to steepest descent once.
        let mut accepted = None;
        for attempt in 0..2 {
            let mut t = 1.0;
            for _ in 0..60 {
                for i in 0..n {
                    x_new[i] = x[i] + t * d[i];
                }
                let f_new = eval(&x_new, &mut g_new);
                if f_new.is_finite() && f_new <= f + 1e-4 * t * slope {
                    accepted = Some(f_new);
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() || attempt == 1 {
                break;
            }
            if is_identity(&h) {
                break;
            }
            reset(&mut h);
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = dot(&g, &d);
        }
        let Some(f_new) = accepted else {
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            bfgs_update(&mut h, &s, &y, sy);
        }
        last_improvement = f - f_new;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        f = f_new;
        if last_improvement == 0.0 && inf_norm(&s) == 0.0 {
            break;
        }
    }

    let grad_norm = inf_norm(&g);
    let scale = f.abs().max(1.0);
    BfgsResult {
        converged: f.is_finite()
            && (grad_norm <= opts.accept_gtol * scale
                || (last_improvement < opts.ftol && grad_norm <= 1e3 * opts.accept_gtol * scale)),
        x,
        f,
        grad_norm,
        iterations,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn reset(h: &mut [Vec<f64>]) {
    for (i, row) in h.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j { 1.0 } else { 0.0 };
        }
    }
}

fn is_identity(h: &[Vec<f64>]) -> bool {
    h.iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(j, &v)| v == if i == j { 1.0 } else { 0.0 }))
}

fn mat_vec_neg(h: &[Vec<f64>], g: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(h) {
        *o = -dot(row, g);
    }
}

/// H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
