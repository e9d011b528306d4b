//! Maximum-likelihood meta-d′ under the equal-variance model.
//!
//! Evidence is Normal(+meta_d/2, 1) for correct trials and Normal(−meta_d/2, 1)
//! for incorrect ones. The Type-1 criterion is tied to meta_d through
//! `meta_c = c · meta_d / d′`, and the 2·(n_ratings − 1) confidence criteria
//! sit below (response R1) and above (response R2) it. Only the rating
//! distribution conditional on the response is scored, which is what makes
//! meta_d a Type-2 quantity.
//!
//! The optimiser works on unconstrained coordinates
//! `θ = [u, a_0.., b_0..]` with `meta_d = u²`,
//! `r1[j] = meta_c − Σ_{i≤j} exp(a_i)` and `r2[j] = meta_c + Σ_{i≤j} exp(b_i)`,
//! so every point of θ-space is a valid, ordered parameter set.

use crate::binning::CountTable;
use crate::error::{Error, Result};
use crate::optim::{minimize, BfgsOptions, BfgsResult};

use super::normal::{interval_mass, pdf, phi, phi_inv_clamped, phi_upper, PROB_FLOOR};
use super::{SdtFit, Type1, LOW_DPRIME};

const MIN_GAP: f64 = 1e-3;

/// Natural-scale meta-d′ parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaParams {
    pub meta_d: f64,
    /// Descending criteria below meta_c.
    pub r1: Vec<f64>,
    /// Ascending criteria above meta_c.
    pub r2: Vec<f64>,
}

/// The Type-2 likelihood for one padded count table and its Type-1 fit.
#[derive(Debug, Clone)]
pub struct MetaModel<'a> {
    table: &'a CountTable,
    n: usize,
    /// c / d′, the rate at which meta_c moves with meta_d.
    c_ratio: f64,
}

impl<'a> MetaModel<'a> {
    pub fn new(table: &'a CountTable, type1: &Type1) -> Result<Self> {
        if type1.d_prime == 0.0 || !type1.d_prime.is_finite() {
            return Err(Error::ZeroDPrime);
        }
        Ok(MetaModel {
            table,
            n: table.n_ratings,
            c_ratio: type1.criterion_c / type1.d_prime,
        })
    }

    pub fn meta_c(&self, meta_d: f64) -> f64 {
        self.c_ratio * meta_d
    }

    /// Log-likelihood at natural parameters. Criteria must be strictly ordered around meta_c.
    pub fn log_likelihood(&self, p: &MetaParams) -> f64 {
        let edges = self.edges_from(p.meta_d, &p.r1, &p.r2);
        self.score(&edges, p.meta_d, None)
    }

    /// Predicted response-conditional rating probabilities, indexed by bin - 1:
    /// `(incorrect, correct)`.
    pub fn conditional_probs(&self, p: &MetaParams) -> (Vec<f64>, Vec<f64>) {
        let edges = self.edges_from(p.meta_d, &p.r1, &p.r2);
        let cond = |mu: f64| -> Vec<f64> {
            let z_lo = phi(edges[self.n] - mu);
            let z_hi = phi_upper(edges[self.n] - mu);
            (1..=2 * self.n)
                .map(|b| interval_mass(edges[b - 1], edges[b], mu) / if b <= self.n { z_lo } else { z_hi })
                .collect()
        };
        (cond(-p.meta_d / 2.0), cond(p.meta_d / 2.0))
    }

    fn edges_from(&self, meta_d: f64, r1: &[f64], r2: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut e = vec![0.0; 2 * n + 1];
        e[0] = f64::NEG_INFINITY;
        e[2 * n] = f64::INFINITY;
        e[n] = self.meta_c(meta_d);
        for j in 0..n - 1 {
            e[n - 1 - j] = r1[j];
            e[n + 1 + j] = r2[j];
        }
        e
    }

    fn params_from_theta(&self, theta: &[f64]) -> MetaParams {
        let n = self.n;
        let meta_d = theta[0] * theta[0];
        let mc = self.meta_c(meta_d);
        let mut r1 = Vec::with_capacity(n - 1);
        let mut r2 = Vec::with_capacity(n - 1);
        let (mut sa, mut sb) = (0.0, 0.0);
        for j in 0..n - 1 {
            sa += theta[1 + j].exp();
            sb += theta[n + j].exp();
            r1.push(mc - sa);
            r2.push(mc + sb);
        }
        MetaParams { meta_d, r1, r2 }
    }

    /// Log-likelihood over the ordered edge vector; with `grad`, also
    /// accumulates ∂LL/∂edge (first `2n + 1` slots) and ∂LL/∂meta_d (last slot,
    /// holding only the direct effect through the class means).
    fn score(&self, edges: &[f64], meta_d: f64, mut grad: Option<&mut [f64]>) -> f64 {
        let mut ll = 0.0;
        // dμ/dmeta_d is −1/2 for incorrect, +1/2 for correct
        for (counts, sign) in [(&self.table.counts_incorrect, -0.5), (&self.table.counts_correct, 0.5)] {
            let mu = sign * meta_d;
            let mut g_mu = 0.0;
            ll += class_terms(counts, edges, mu, self.n, grad.as_deref_mut(), &mut g_mu);
            if let Some(g) = grad.as_deref_mut() {
                g[2 * self.n + 1] += sign * g_mu;
            }
        }
        ll
    }

    /// Negative log-likelihood and its θ-gradient.
    fn objective(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        self.objective_parts(theta, grad).0
    }

    /// As [`Self::objective`], also returning ∂LL/∂meta_d (natural scale).
    fn objective_parts(&self, theta: &[f64], grad: &mut [f64]) -> (f64, f64) {
        let n = self.n;
        let p = self.params_from_theta(theta);
        let edges = self.edges_from(p.meta_d, &p.r1, &p.r2);
        let mut g = vec![0.0; 2 * n + 2];
        let ll = self.score(&edges, p.meta_d, Some(&mut g));

        // every finite edge shifts with meta_c
        let d_edges: f64 = g[1..2 * n].iter().sum();
        let d_meta = g[2 * n + 1] + d_edges * self.c_ratio;
        grad[0] = -2.0 * theta[0] * d_meta;
        let (mut tail_a, mut tail_b) = (0.0, 0.0);
        for i in (0..n - 1).rev() {
            tail_a += g[n - 1 - i];
            tail_b += g[n + 1 + i];
            grad[1 + i] = theta[1 + i].exp() * tail_a;
            grad[n + i] = -theta[n + i].exp() * tail_b;
        }
        (-ll, d_meta)
    }

    /// Best criteria with meta_d held at 0, and the slope ∂LL/∂meta_d there.
    fn boundary_fit(&self, opts: &BfgsOptions) -> (BfgsResult, f64) {
        let full = |crit: &[f64]| {
            let mut th = Vec::with_capacity(crit.len() + 1);
            th.push(0.0);
            th.extend_from_slice(crit);
            th
        };
        let mut g = vec![0.0; 2 * self.n - 1];
        let start = self.initial_theta(0.0);
        let res = minimize(
            |c, gc| {
                let f = self.objective(&full(c), &mut g);
                gc.copy_from_slice(&g[1..]);
                f
            },
            &start[1..],
            opts,
        );
        let (_, slope) = self.objective_parts(&full(&res.x), &mut g);
        (res, slope)
    }

    /// Starting point: meta_d = |d′| and criterion gaps from pooled rating quantiles.
    fn initial_theta(&self, meta_d0: f64) -> Vec<f64> {
        let n = self.n;
        let t = self.table;
        let total: f64 = t.total_correct() + t.total_incorrect();
        let mut z = vec![0.0; 2 * n + 1];
        let mut cum = 0.0;
        for k in 1..2 * n {
            cum += t.counts_correct[k - 1] + t.counts_incorrect[k - 1];
            z[k] = phi_inv_clamped(cum / total);
        }
        let mut theta = vec![0.0; 2 * n - 1];
        theta[0] = meta_d0.max(0.0).sqrt();
        for j in 0..n - 1 {
            theta[1 + j] = (z[n - j] - z[n - 1 - j]).max(MIN_GAP).ln();
            theta[n + j] = (z[n + 1 + j] - z[n + j]).max(MIN_GAP).ln();
        }
        theta
    }
}

fn class_terms(
    counts: &[f64],
    edges: &[f64],
    mu: f64,
    n: usize,
    mut grad: Option<&mut [f64]>,
    g_mu: &mut f64,
) -> f64 {
    let x_mid = edges[n] - mu;
    let z_lo = phi(x_mid).max(f64::MIN_POSITIVE);
    let z_hi = phi_upper(x_mid).max(f64::MIN_POSITIVE);
    let pd_mid = pdf(x_mid);
    let mut ll = 0.0;
    let mut pd_prev = 0.0; // density at −∞
    for b in 1..=2 * n {
        let cnt = counts[b - 1];
        let pd_b = pdf(edges[b] - mu);
        let mass = interval_mass(edges[b - 1], edges[b], mu);
        let z = if b <= n { z_lo } else { z_hi };
        let q = (mass / z).min(1.0);
        if cnt != 0.0 {
            if q < PROB_FLOOR {
                ll += cnt * PROB_FLOOR.ln();
            } else {
                ll += cnt * q.ln();
                if let Some(g) = grad.as_deref_mut() {
                    let w = cnt / mass;
                    g[b] += w * pd_b;
                    g[b - 1] -= w * pd_prev;
                    *g_mu -= w * (pd_b - pd_prev);
                    let wz = cnt / z;
                    if b <= n {
                        g[n] -= wz * pd_mid;
                        *g_mu += wz * pd_mid;
                    } else {
                        g[n] += wz * pd_mid;
                        *g_mu -= wz * pd_mid;
                    }
                }
            }
        }
        pd_prev = pd_b;
    }
    ll
}

/// Fit meta-d′ with default optimiser settings.
pub fn meta_d_fit(table: &CountTable, type1: &Type1) -> Result<SdtFit> {
    meta_d_fit_with(table, type1, &BfgsOptions::default())
}

pub fn meta_d_fit_with(table: &CountTable, type1: &Type1, opts: &BfgsOptions) -> Result<SdtFit> {
    let model = MetaModel::new(table, type1)?;
    let n = table.n_ratings;

    let run = |start: f64, opts: &BfgsOptions| {
        minimize(|th, g| model.objective(th, g), &model.initial_theta(start), opts)
    };
    // With u² = meta_d the optimiser crawls toward a boundary optimum, so
    // settle the boundary first: if the likelihood falls as meta_d leaves 0,
    // only a clearly better interior point can displace it.
    let (edge, slope) = model.boundary_fit(opts);
    let mut total_iters = edge.iterations;
    let res = if slope <= 0.0 {
        let capped = BfgsOptions {
            max_iterations: opts.max_iterations.min(200),
            ..*opts
        };
        let inner = run(type1.d_prime.abs(), &capped);
        total_iters += inner.iterations;
        if inner.converged && inner.f < edge.f - 1e-9 && inner.x[0] * inner.x[0] > 1e-3 {
            inner
        } else {
            let mut x = vec![0.0];
            x.extend_from_slice(&edge.x);
            BfgsResult { x, ..edge }
        }
    } else {
        let mut res = run(type1.d_prime.abs(), opts);
        total_iters += res.iterations;
        // A second start guards against stalls.
        if !res.converged || res.x[0] * res.x[0] < 1e-3 {
            let alt = run(0.25, opts);
            total_iters += alt.iterations;
            if alt.f < res.f || (alt.converged && !res.converged && alt.f <= res.f + 1e-9) {
                res = alt;
            }
        }
        res
    };
    let p = model.params_from_theta(&res.x);

    let pad_cells = if table.padded { table.pad_value * n as f64 * 2.0 } else { 0.0 };
    let lower: f64 = table.counts_correct[..n].iter().chain(&table.counts_incorrect[..n]).sum();
    let upper: f64 = table.counts_correct[n..].iter().chain(&table.counts_incorrect[n..]).sum();
    let degenerate_response = lower - pad_cells <= 0.0 || upper - pad_cells <= 0.0;

    let meta_c = model.meta_c(p.meta_d);
    Ok(SdtFit {
        d_prime: type1.d_prime,
        criterion_c: type1.criterion_c,
        meta_d: p.meta_d,
        meta_c,
        m_ratio: p.meta_d / type1.d_prime,
        t2_criteria_r1: p.r1,
        t2_criteria_r2: p.r2,
        log_likelihood: -res.f,
        converged: res.converged,
        iterations: total_iters,
        low_dprime_warning: type1.d_prime < LOW_DPRIME,
        degenerate_response,
        meta_d_at_zero: p.meta_d < 1e-4,
    })
}
