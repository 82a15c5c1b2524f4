//! Affine diffusion coefficients `a(y) = abar + sum_j y_j psi_j` for the
//! three experiment families (disjoint inclusions, global Fourier modes, Haar
//! wavelets), together with their ellipticity constants and the weight
//! sequences used by the summability bounds.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fem1d::WeightFn;

/// Which construction produced the field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FamilyTag {
    DisjointInclusions { beta: f64, theta: f64 },
    FourierSines { beta: f64, theta: f64 },
    HaarWavelets { alpha: f64, theta: f64, l_max: u32 },
    Custom,
}

/// The affine coefficient family truncated to `J` terms.
///
/// `theta` is the reported value of `|| sum_j |psi_j| / abar ||_inf`: exact
/// when everything is piecewise constant, otherwise the rigorous upper bound
/// `sum_j ||psi_j||_inf / abar_min` (a grid-sampled lower bound is kept
/// alongside).
#[derive(Clone, Debug)]
pub struct CoefficientField {
    abar: WeightFn,
    psis: Vec<WeightFn>,
    family: FamilyTag,
    theta: f64,
    theta_lower: Option<f64>,
}

impl CoefficientField {
    pub fn abar(&self) -> &WeightFn {
        &self.abar
    }

    pub fn psis(&self) -> &[WeightFn] {
        &self.psis
    }

    pub fn psi(&self, j: usize) -> &WeightFn {
        &self.psis[j]
    }

    /// Truncation size `J`.
    pub fn j_count(&self) -> usize {
        self.psis.len()
    }

    pub fn family(&self) -> &FamilyTag {
        &self.family
    }

    /// Reported ellipticity constant (upper bound for sine families).
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Grid-sampled lower bound on theta, when the exact value is unavailable.
    pub fn theta_lower(&self) -> Option<f64> {
        self.theta_lower
    }

    pub fn abar_min(&self) -> f64 {
        self.abar.min_value()
    }

    pub fn abar_max(&self) -> f64 {
        self.abar.bounds().1
    }

    /// Builds a custom field, enforcing the uniform ellipticity condition
    /// `theta < 1`.
    pub fn custom(abar: WeightFn, psis: Vec<WeightFn>) -> Result<Self, Error> {
        let field = Self::custom_unchecked(abar, psis)?;
        if field.theta >= 1.0 {
            return Err(Error::UeaViolation { theta: field.theta });
        }
        Ok(field)
    }

    /// Builds a custom field without gating on `theta < 1`. Individual Taylor
    /// coefficients stay well defined as long as `abar` is elliptic, so
    /// boundary cases with `theta = 1` are still usable for finitely many
    /// coefficients.
    pub fn custom_unchecked(abar: WeightFn, psis: Vec<WeightFn>) -> Result<Self, Error> {
        if abar.min_value() <= 0.0 {
            return Err(Error::Validation(
                "background coefficient must be bounded below by a positive constant".into(),
            ));
        }
        let mut field = CoefficientField {
            abar,
            psis,
            family: FamilyTag::Custom,
            theta: 0.0,
            theta_lower: None,
        };
        let report = compute_theta_report(&field);
        field.theta = report.value;
        field.theta_lower = report.lower_bound;
        Ok(field)
    }
}

/// Kahan-compensated sum of `k^{-1} log^{-2}(1+k)` for `k = 1..=K`, plus a
/// midpoint-rule tail estimate `1/log(K + 3/2)`. Determines the normalizer
/// making the inclusion breakpoints accumulate to 1.
fn inclusion_partition_sum() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        const K: u64 = 100_000_000;
        let mut sum = 0.0_f64;
        let mut comp = 0.0_f64;
        for k in (1..=K).rev() {
            let kf = k as f64;
            let term = 1.0 / (kf * (1.0 + kf).ln().powi(2));
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum + 1.0 / (K as f64 + 1.5).ln()
    })
}

/// Breakpoints `x_0 = 0 < x_1 < ... < x_J < 1` of the inclusion partition,
/// `x_j = c sum_{k<=j} k^{-1} log^{-2}(1+k)` with `c` normalizing the full
/// series to 1.
pub fn inclusion_breakpoints(j_count: usize) -> Vec<f64> {
    let c = 1.0 / inclusion_partition_sum();
    let mut points = Vec::with_capacity(j_count + 1);
    let mut acc = 0.0;
    points.push(0.0);
    for k in 1..=j_count {
        let kf = k as f64;
        acc += 1.0 / (kf * (1.0 + kf).ln().powi(2));
        points.push(c * acc);
    }
    points
}

/// Disjoint inclusions: `psi_j = theta j^{-beta}` on the `j`-th cell of the
/// slowly decaying partition of `]0,1[`.
pub fn make_disjoint_inclusions(
    beta: f64,
    theta: f64,
    j_count: usize,
) -> Result<CoefficientField, Error> {
    if !(beta > 0.0) {
        return Err(Error::Validation("beta must be positive".into()));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Validation("theta must lie in (0,1)".into()));
    }
    if j_count < 1 {
        return Err(Error::Validation("need at least one term".into()));
    }
    let points = inclusion_breakpoints(j_count);
    let psis = (1..=j_count)
        .map(|j| WeightFn::PiecewiseConstant {
            breakpoints: vec![points[j - 1], points[j]],
            values: vec![theta * (j as f64).powf(-beta)],
        })
        .collect();
    let mut field = CoefficientField::custom(WeightFn::Constant(1.0), psis)?;
    field.family = FamilyTag::DisjointInclusions { beta, theta };
    Ok(field)
}

/// Globally supported Fourier family `psi_j = theta c j^{-beta} sin(j pi x)`.
///
/// The normalizer `c` makes the realized ellipticity constant equal to the
/// `theta` parameter: the sines never peak simultaneously, so normalizing by
/// `sum_j j^{-beta}` alone would leave `|| sum_j |psi_j| ||_inf` well below
/// `theta` (only 56%..82% of it for the experiment exponents). `c` is
/// therefore taken as the reciprocal of the grid-evaluated supremum of
/// `sum_j j^{-beta} |sin(j pi x)|`.
pub fn make_fourier(beta: f64, theta: f64, j_count: usize) -> Result<CoefficientField, Error> {
    if !(beta > 1.0) {
        return Err(Error::Validation(
            "fourier family needs beta > 1 for a convergent normalizer".into(),
        ));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Validation("theta must lie in (0,1)".into()));
    }
    if j_count < 1 {
        return Err(Error::Validation("need at least one term".into()));
    }
    let c = 1.0 / fourier_envelope_sup(beta, j_count);
    let psis = (1..=j_count)
        .map(|j| WeightFn::Sine {
            amplitude: theta * c * (j as f64).powf(-beta),
            frequency: j as u32,
        })
        .collect();
    let mut field = CoefficientField::custom_unchecked(WeightFn::Constant(1.0), psis)?;
    if field
        .theta_lower
        .expect("sine fields carry a sampled bound")
        >= 1.0
    {
        return Err(Error::UeaViolation { theta: field.theta });
    }
    field.family = FamilyTag::FourierSines { beta, theta };
    Ok(field)
}

/// Grid-evaluated supremum of `sum_{j<=J} j^{-beta} |sin(j pi x)|`, including
/// the (tiny) tail of excluded terms so the value upper-bounds the full
/// series envelope.
fn fourier_envelope_sup(beta: f64, j_count: usize) -> f64 {
    const SAMPLES: usize = 10_000;
    let mut sup = 0.0_f64;
    for i in 0..SAMPLES {
        let x = (i as f64 + 0.5) / SAMPLES as f64;
        let total: f64 = (1..=j_count)
            .map(|j| (j as f64).powf(-beta) * (j as f64 * std::f64::consts::PI * x).sin().abs())
            .sum();
        sup = sup.max(total);
    }
    // tail of the omitted terms, bounded by their amplitudes
    let tail = zeta(beta) - (1..=j_count).map(|j| (j as f64).powf(-beta)).sum::<f64>();
    sup + tail
}

/// Haar wavelet family over levels `0..=l_max`, ordered level-major then by
/// shift: `psi_(l,k) = c_l h(2^l x - k)` with `h = 1` on `[0,1/2)`, `-1` on
/// `[1/2,1)`, and `c_l = theta (1 - 2^{-alpha}) 2^{-alpha l}`.
pub fn make_haar(alpha: f64, theta: f64, l_max: u32) -> Result<CoefficientField, Error> {
    if !(alpha > 0.0) {
        return Err(Error::Validation("alpha must be positive".into()));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Validation("theta must lie in (0,1)".into()));
    }
    let mut psis = Vec::with_capacity((1usize << (l_max + 1)) - 1);
    for l in 0..=l_max {
        let scale = f64::from(1u32 << l);
        let c_l = theta * (1.0 - 2f64.powf(-alpha)) * 2f64.powf(-alpha * f64::from(l));
        for k in 0..(1u32 << l) {
            let left = f64::from(k) / scale;
            let mid = (f64::from(k) + 0.5) / scale;
            let right = (f64::from(k) + 1.0) / scale;
            psis.push(WeightFn::PiecewiseConstant {
                breakpoints: vec![left, mid, right],
                values: vec![c_l, -c_l],
            });
        }
    }
    let mut field = CoefficientField::custom(WeightFn::Constant(1.0), psis)?;
    field.family = FamilyTag::HaarWavelets {
        alpha,
        theta,
        l_max,
    };
    Ok(field)
}

/// Riemann zeta for real `s > 1` by Euler-Maclaurin; accurate to ~1e-13.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0);
    const K: u64 = 1000;
    let mut sum = 0.0_f64;
    for k in (1..=K).rev() {
        sum += (k as f64).powf(-s);
    }
    let kf = K as f64;
    sum + kf.powf(1.0 - s) / (s - 1.0) - 0.5 * kf.powf(-s) + s * kf.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * kf.powf(-s - 3.0) / 720.0
}

/// Outcome of evaluating `|| sum_j w_j |psi_j| / abar ||_inf`.
#[derive(Clone, Copy, Debug)]
pub struct SupEstimate {
    /// The reported value: exact for piecewise-constant data, otherwise the
    /// rigorous upper bound.
    pub value: f64,
    /// Grid-sampled lower bound when the value is not exact.
    pub lower_bound: Option<f64>,
    pub exact: bool,
}

fn weighted_sup(field: &CoefficientField, weights: Option<&[f64]>) -> SupEstimate {
    let weight = |j: usize| weights.map_or(1.0, |w| w[j]);
    let piecewise = field.abar.is_piecewise_constant()
        && field.psis.iter().all(|p| p.is_piecewise_constant());
    if piecewise {
        let mut points = vec![0.0, 1.0];
        field.abar.collect_breakpoints(&mut points);
        for psi in &field.psis {
            psi.collect_breakpoints(&mut points);
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        let mut sup = 0.0_f64;
        for cell in points.windows(2) {
            let x = 0.5 * (cell[0] + cell[1]);
            let total: f64 = field
                .psis
                .iter()
                .enumerate()
                .map(|(j, psi)| weight(j) * psi.eval(x).abs())
                .sum();
            sup = sup.max(total / field.abar.eval(x));
        }
        SupEstimate {
            value: sup,
            lower_bound: None,
            exact: true,
        }
    } else {
        const SAMPLES: usize = 10_000;
        let mut sampled = 0.0_f64;
        for i in 0..SAMPLES {
            let x = (i as f64 + 0.5) / SAMPLES as f64;
            let total: f64 = field
                .psis
                .iter()
                .enumerate()
                .map(|(j, psi)| weight(j) * psi.eval(x).abs())
                .sum();
            sampled = sampled.max(total / field.abar.eval(x));
        }
        let upper: f64 = field
            .psis
            .iter()
            .enumerate()
            .map(|(j, psi)| weight(j) * psi.sup_norm())
            .sum::<f64>()
            / field.abar_min();
        SupEstimate {
            value: upper,
            lower_bound: Some(sampled),
            exact: false,
        }
    }
}

fn compute_theta_report(field: &CoefficientField) -> SupEstimate {
    weighted_sup(field, None)
}

/// `theta = || sum_j |psi_j| / abar ||_inf`, as cached at construction:
/// exact on the common refinement for piecewise-constant fields, the upper
/// bound `sum ||psi_j||_inf / abar_min` otherwise.
pub fn compute_theta(field: &CoefficientField) -> f64 {
    field.theta()
}

/// `delta = || sum_j rho_j |psi_j| / abar ||_inf` for a weight sequence;
/// values `>= 1` are returned as is (callers gate on them).
pub fn compute_delta(field: &CoefficientField, rho: &[f64]) -> f64 {
    assert_eq!(rho.len(), field.j_count(), "one weight per expansion term");
    weighted_sup(field, Some(rho)).value
}

/// A weight sequence `rho_j >= 1` with its cached weighted ellipticity value.
#[derive(Clone, Debug)]
pub struct WeightSequence {
    pub rho: Vec<f64>,
    pub delta: f64,
}

/// Summability diagnostic reported alongside finite-overlap weights: the
/// critical exponent `q(p) = 2p/(2-p)`, the tail decay rate fitted to
/// `rho_j^{-1}`, and whether `(rho_j^{-1})` is in `l^q` by that estimate.
#[derive(Clone, Copy, Debug)]
pub struct SummabilityDiagnostic {
    pub q: f64,
    pub fitted_decay: f64,
    pub summable: bool,
}

/// Weights for families with at most `m_overlap` overlapping supports:
/// `rho_j = 1 + abar_min (1-theta) / (2 M ||psi_j||_inf)`, which guarantees
/// `delta <= (1+theta)/2`.
pub fn weights_finite_overlap(
    field: &CoefficientField,
    m_overlap: usize,
    p: f64,
) -> Result<(WeightSequence, SummabilityDiagnostic), Error> {
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::Validation("p must lie in (0,2)".into()));
    }
    let theta = field.theta();
    if theta >= 1.0 {
        return Err(Error::UeaViolation { theta });
    }
    let amin = field.abar_min();
    let factor = amin * (1.0 - theta) / (2.0 * m_overlap as f64);
    let rho: Vec<f64> = field
        .psis
        .iter()
        .map(|psi| 1.0 + factor / psi.sup_norm())
        .collect();
    let delta = compute_delta(field, &rho);
    if delta >= 1.0 {
        return Err(Error::DeltaViolation { delta });
    }

    let q = 2.0 * p / (2.0 - p);
    let j = rho.len();
    let fitted_decay = if j >= 4 {
        let half = j / 2;
        let inv_half = 1.0 / rho[half - 1];
        let inv_last = 1.0 / rho[j - 1];
        (inv_half / inv_last).ln() / (j as f64 / half as f64).ln()
    } else {
        0.0
    };
    let diag = SummabilityDiagnostic {
        q,
        fitted_decay,
        summable: q * fitted_decay > 1.0,
    };
    Ok((WeightSequence { rho, delta }, diag))
}

/// Level-dependent weights for the Haar family:
/// `rho_lambda = 1 + abar_min (1-theta) (1 - 2^{beta-alpha}) 2^{beta l} / (2 C M)`
/// with `C` the level-0 amplitude and `M = 1`; requires `0 < beta < alpha`.
///
/// The geometric factor sits in the numerator: summing `rho_lambda |psi_lambda|`
/// over one wavelet per level then telescopes to exactly
/// `abar_min (1-theta) / 2`, which is what guarantees `delta <= (1+theta)/2`.
pub fn weights_wavelet(field: &CoefficientField, beta: f64) -> Result<WeightSequence, Error> {
    let FamilyTag::HaarWavelets { alpha, l_max, .. } = *field.family() else {
        return Err(Error::Validation(
            "wavelet weights require a Haar family".into(),
        ));
    };
    if !(beta > 0.0 && beta < alpha) {
        return Err(Error::Validation(format!(
            "wavelet weight exponent must satisfy 0 < beta < alpha = {alpha}"
        )));
    }
    let theta = field.theta();
    let amin = field.abar_min();
    let c_level0 = field.psis[0].sup_norm();
    let m_overlap = 1.0;
    let factor =
        amin * (1.0 - theta) * (1.0 - 2f64.powf(beta - alpha)) / (2.0 * c_level0 * m_overlap);
    let mut rho = Vec::with_capacity(field.j_count());
    for l in 0..=l_max {
        let value = 1.0 + factor * 2f64.powf(beta * f64::from(l));
        for _ in 0..(1u32 << l) {
            rho.push(value);
        }
    }
    let delta = compute_delta(field, &rho);
    if delta >= 1.0 {
        return Err(Error::DeltaViolation { delta });
    }
    Ok(WeightSequence { rho, delta })
}

/// Config-file schema for the experiment families. `custom` accepts
/// explicit weight functions for extension tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FamilyConfig {
    Inclusions {
        beta: f64,
        theta: f64,
        #[serde(default = "default_j")]
        j: usize,
    },
    Fourier {
        beta: f64,
        theta: f64,
        #[serde(default = "default_j")]
        j: usize,
    },
    Haar {
        alpha: f64,
        theta: f64,
        #[serde(default = "default_l_max")]
        l_max: u32,
    },
    Custom {
        #[serde(default = "default_abar")]
        abar: WeightFn,
        psis: Vec<WeightFn>,
    },
}

fn default_j() -> usize {
    256
}

fn default_l_max() -> u32 {
    7
}

fn default_abar() -> WeightFn {
    WeightFn::Constant(1.0)
}

impl FamilyConfig {
    pub fn build(&self) -> Result<CoefficientField, Error> {
        match self {
            FamilyConfig::Inclusions { beta, theta, j } => {
                make_disjoint_inclusions(*beta, *theta, *j)
            }
            FamilyConfig::Fourier { beta, theta, j } => make_fourier(*beta, *theta, *j),
            FamilyConfig::Haar {
                alpha,
                theta,
                l_max,
            } => make_haar(*alpha, *theta, *l_max),
            FamilyConfig::Custom { abar, psis } => {
                CoefficientField::custom(abar.clone(), psis.clone())
            }
        }
    }

    /// Predicted limiting decay rate `1/pbar` of the coefficient norms,
    /// where the family has one.
    pub fn predicted_rate(&self) -> Option<f64> {
        match *self {
            FamilyConfig::Inclusions { beta, .. } => Some(beta + 0.5),
            FamilyConfig::Fourier { beta, .. } => Some(beta),
            FamilyConfig::Haar { alpha, .. } => Some(alpha + 0.5),
            FamilyConfig::Custom { .. } => None,
        }
    }
}
