//! Equal-variance Gaussian signal detection: Type-1 sensitivity and the
//! maximum-likelihood meta-d′ fit.

mod meta;
pub mod normal;

use serde::{Deserialize, Serialize};

use crate::binning::CountTable;
use crate::error::{Error, Result};

pub use meta::{meta_d_fit, meta_d_fit_with, MetaModel, MetaParams};
pub use normal::{phi, phi_inv, phi_inv_clamped, phi_upper};

/// M-ratio is unstable below this d′.
pub const LOW_DPRIME: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Type1 {
    pub d_prime: f64,
    pub criterion_c: f64,
    pub hit_rate: f64,
    pub false_alarm_rate: f64,
    /// A correctness class had no raw trials; rates come from padding alone.
    pub degenerate_table: bool,
}

/// Fitted Type-1 and Type-2 parameters for one count table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdtFit {
    pub d_prime: f64,
    pub criterion_c: f64,
    pub meta_d: f64,
    pub meta_c: f64,
    /// Descending, all below `meta_c`.
    pub t2_criteria_r1: Vec<f64>,
    /// Ascending, all above `meta_c`.
    pub t2_criteria_r2: Vec<f64>,
    pub m_ratio: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub low_dprime_warning: bool,
    /// All raw responses fell on one side of the median split.
    pub degenerate_response: bool,
    /// Fit sits on the meta_d = 0 boundary; confidence is uninformative or anti-informative.
    pub meta_d_at_zero: bool,
}

impl SdtFit {
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.low_dprime_warning {
            w.push(format!("d' = {:.3} < {LOW_DPRIME}: M-ratio unstable", self.d_prime));
        }
        if !self.converged {
            w.push(format!("meta-d' fit did not converge after {} iterations", self.iterations));
        }
        if self.degenerate_response {
            w.push("all responses on one side of the median split".into());
        }
        if self.meta_d_at_zero {
            w.push("meta-d' at the zero boundary (uninformative or anti-informative confidence)".into());
        }
        w
    }
}

/// Hit and false-alarm rates from the upper half of the scale, then z-transformed.
pub fn type1_fit(table: &CountTable) -> Result<Type1> {
    let n = table.n_ratings;
    let total_c = table.total_correct();
    let total_i = table.total_incorrect();
    if !(total_c > 0.0 && total_i > 0.0) {
        return Err(Error::OneClassOnly);
    }
    let (raw_i, raw_c) = table.raw_class_totals();
    let hr = table.counts_correct[n..].iter().sum::<f64>() / total_c;
    let far = table.counts_incorrect[n..].iter().sum::<f64>() / total_i;
    let zh = phi_inv_clamped(hr);
    let zf = phi_inv_clamped(far);
    Ok(Type1 {
        d_prime: zh - zf,
        criterion_c: -0.5 * (zh + zf),
        hit_rate: hr,
        false_alarm_rate: far,
        degenerate_table: raw_i <= 0.0 || raw_c <= 0.0,
    })
}

/// meta-d′ / d′.
pub fn m_ratio(fit: &SdtFit) -> Result<f64> {
    if fit.d_prime == 0.0 {
        return Err(Error::ZeroDPrime);
    }
    Ok(fit.meta_d / fit.d_prime)
}

/// Pad, Type-1 fit, then meta-d′ fit: the full per-table pipeline.
pub fn fit_table(raw: &CountTable, pad_value: f64) -> Result<SdtFit> {
    let padded = if raw.padded { raw.clone() } else { raw.pad(pad_value)? };
    let t1 = type1_fit(&padded)?;
    meta_d_fit(&padded, &t1)
}
