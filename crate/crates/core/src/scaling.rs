//! Parametric loss curves `L(N, D') = A0 + A1 / N^a1 + A2 / D'^a2`, robust
//! fitting in log space, and compute-constrained frontiers.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pauli::{search_space_size, PauliError};
use crate::vmc::cosine_lr;

/// Absolute errors below this are treated as this value.
pub const ABS_ERROR_FLOOR: f64 = 1e-5;
/// V-scores below this are treated as this value.
pub const VSCORE_FLOOR: f64 = 1e-8;
pub const HUBER_DELTA: f64 = 1e-3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScalingError {
    #[error("metric value must be positive and finite, got {0}")]
    NonPositiveMetric(f64),
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("degenerate data: all points share one {0} value")]
    Degenerate(&'static str),
    #[error("no data points")]
    Empty,
    #[error("curve has non-positive {0}")]
    InvalidCurve(&'static str),
    #[error("unknown metric {0:?} (expected vscore or abserr)")]
    UnknownMetric(String),
    #[error("curve document: {0}")]
    Document(String),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "vscore")]
    VScore,
    #[serde(rename = "abserr")]
    AbsError,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::VScore => "vscore",
            Metric::AbsError => "abserr",
        }
    }

    /// Lower truncation applied before fitting and binning.
    pub fn floor(self) -> f64 {
        match self {
            Metric::VScore => VSCORE_FLOOR,
            Metric::AbsError => ABS_ERROR_FLOOR,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = ScalingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vscore" | "v-score" => Ok(Metric::VScore),
            "abserr" | "abs_error" | "absolute_error" => Ok(Metric::AbsError),
            _ => Err(ScalingError::UnknownMetric(s.to_string())),
        }
    }
}

/// One observation: model size `n_k` (thousands of parameters), scaled
/// iterations `d_prime`, and the metric value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint {
    pub n_k: f64,
    pub d_prime: f64,
    pub value: f64,
    pub flops: f64,
}

impl DataPoint {
    pub fn new(n_k: f64, d_prime: f64, value: f64) -> Self {
        Self { n_k, d_prime, value, flops: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub ansatz: String,
    pub metric: Metric,
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Coefficient of determination of log10 predictions; NaN when unknown.
    pub r2_log: f64,
}

impl ScalingCurve {
    pub fn new(ansatz: &str, metric: Metric, a: [f64; 3], alpha: [f64; 2]) -> Self {
        Self {
            ansatz: ansatz.to_string(),
            metric,
            a0: a[0],
            a1: a[1],
            a2: a[2],
            alpha1: alpha[0],
            alpha2: alpha[1],
            r2_log: f64::NAN,
        }
    }

    pub fn predict(&self, n_k: f64, d_prime: f64) -> f64 {
        self.a0 + self.a1 * n_k.powf(-self.alpha1) + self.a2 * d_prime.powf(-self.alpha2)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("curve fields are plain scalars")
    }

    pub fn from_toml(text: &str) -> Result<Self, ScalingError> {
        toml::from_str(text).map_err(|e| ScalingError::Document(e.to_string()))
    }
}

/// Search fraction and scaled iterations for a run.
pub fn compute_scaled_iterations(
    steps: f64,
    b_mean: f64,
    n_qubits: usize,
    n_electrons: usize,
    multiplicity: usize,
) -> Result<(f64, f64), ScalingError> {
    if !(steps > 0.0 && steps.is_finite()) {
        return Err(ScalingError::NonPositive("T"));
    }
    if !(b_mean > 0.0 && b_mean.is_finite()) {
        return Err(ScalingError::NonPositive("B_mean"));
    }
    let space = search_space_size(n_qubits, n_electrons, multiplicity)? as f64;
    Ok(scaled_iterations(steps, b_mean, space))
}

/// `(SF, D')` from a known search-space size.
pub fn scaled_iterations(steps: f64, b_mean: f64, space: f64) -> (f64, f64) {
    let sf = b_mean / space;
    (sf, steps * sf)
}

pub fn huber(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        0.5 * r * r
    } else {
        delta * (r.abs() - 0.5 * delta)
    }
}

fn huber_slope(r: f64, delta: f64) -> f64 {
    r.clamp(-delta, delta)
}

/// Huber loss of the log residual `ln(prediction) - ln(value)`.
pub fn huber_log_residual(curve: &ScalingCurve, point: &DataPoint, delta: f64) -> Result<f64, ScalingError> {
    if !(point.value > 0.0 && point.value.is_finite()) {
        return Err(ScalingError::NonPositiveMetric(point.value));
    }
    let r = curve.predict(point.n_k, point.d_prime).ln() - point.value.ln();
    Ok(huber(r, delta))
}

/// Mean Huber-log objective over `points` (values used as given).
pub fn objective(curve: &ScalingCurve, points: &[DataPoint], delta: f64) -> Result<f64, ScalingError> {
    if points.is_empty() {
        return Err(ScalingError::Empty);
    }
    let mut total = 0.0;
    for p in points {
        total += huber_log_residual(curve, p, delta)?;
    }
    Ok(total / points.len() as f64)
}

/// Coefficient of determination between log10 predictions and log10 values.
pub fn log_r2(curve: &ScalingCurve, points: &[DataPoint]) -> f64 {
    let obs: Vec<f64> = points.iter().map(|p| p.value.log10()).collect();
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (p, o) in points.iter().zip(&obs) {
        ss_res += (curve.predict(p.n_k, p.d_prime).log10() - o).powi(2);
        ss_tot += (o - mean).powi(2);
    }
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { f64::NAN };
    }
    1.0 - ss_res / ss_tot
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub steps: usize,
    /// Adam steps given to every grid start before selecting finalists.
    pub screen_steps: usize,
    /// Number of best screened starts refined for the full `steps`.
    pub finalists: usize,
    pub lr_peak: f64,
    pub lr_floor: f64,
    pub delta: f64,
    /// Half-width of the random offset applied to each grid start.
    pub jitter: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            steps: 50_000,
            screen_steps: 500,
            finalists: 8,
            lr_peak: 0.05,
            lr_floor: 1e-6,
            delta: HUBER_DELTA,
            jitter: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub curve: ScalingCurve,
    pub objective: f64,
    /// Points whose value was raised to the metric floor.
    pub clamped: usize,
    pub warnings: Vec<String>,
}

const GRID_ALPHA: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
const GRID_LOG10_A: [f64; 5] = [-5.0, -3.0, -1.0, 0.0, 1.0];

/// Unconstrained parameters: `[softplus^-1(A0), ln A1, ln A2, a1, a2]`.
type Theta = [f64; 5];

fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u
    } else {
        u.exp().ln_1p()
    }
}

fn softplus_inv(v: f64) -> f64 {
    if v > 30.0 {
        v
    } else {
        v.exp_m1().ln()
    }
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn decode(theta: &Theta) -> [f64; 5] {
    [softplus(theta[0]), theta[1].exp(), theta[2].exp(), theta[3], theta[4]]
}

/// Log-space point data: `(ln N, ln D', ln value)`.
struct LogData(Vec<[f64; 3]>);

impl LogData {
    fn loss_and_grad(&self, theta: &Theta, delta: f64) -> (f64, Theta) {
        let [a0, a1, a2, al1, al2] = decode(theta);
        let da0 = sigmoid(theta[0]);
        let mut loss = 0.0;
        let mut g = [0.0; 5];
        for &[ln_n, ln_d, ln_y] in &self.0 {
            let t1 = a1 * (-al1 * ln_n).exp();
            let t2 = a2 * (-al2 * ln_d).exp();
            let p = a0 + t1 + t2;
            let r = p.ln() - ln_y;
            loss += huber(r, delta);
            let s = huber_slope(r, delta) / p;
            g[0] += s * da0;
            g[1] += s * t1;
            g[2] += s * t2;
            g[3] -= s * t1 * ln_n;
            g[4] -= s * t2 * ln_d;
        }
        let m = self.0.len() as f64;
        g.iter_mut().for_each(|v| *v /= m);
        (loss / m, g)
    }

    fn run(&self, mut theta: Theta, steps: usize, opts: &FitOptions) -> (f64, Theta) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-12;
        let mut m = [0.0; 5];
        let mut v = [0.0; 5];
        let mut best = (f64::INFINITY, theta);
        for step in 0..steps {
            let (loss, g) = self.loss_and_grad(&theta, opts.delta);
            if !loss.is_finite() {
                break;
            }
            if loss < best.0 {
                best = (loss, theta);
            }
            let lr = cosine_lr(step, steps, opts.lr_peak, opts.lr_floor, 0.0);
            let t = (step + 1) as i32;
            for i in 0..5 {
                m[i] = B1 * m[i] + (1.0 - B1) * g[i];
                v[i] = B2 * v[i] + (1.0 - B2) * g[i] * g[i];
                let mh = m[i] / (1.0 - B1.powi(t));
                let vh = v[i] / (1.0 - B2.powi(t));
                theta[i] -= lr * mh / (vh.sqrt() + EPS);
            }
        }
        let (loss, _) = self.loss_and_grad(&theta, opts.delta);
        if loss.is_finite() && loss < best.0 {
            best = (loss, theta);
        }
        best
    }
}

fn decades(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    (hi / lo).log10()
}

/// Fits the curve with default options.
pub fn fit_curve(points: &[DataPoint], metric: Metric, ansatz: &str, seed: u64) -> Result<FitReport, ScalingError> {
    fit_curve_with(points, metric, ansatz, seed, &FitOptions::default())
}

/// Multi-start fit: every start of the `5^4` grid over `(a1, a2, log10 A1,
/// log10 A2)` is screened with a short run, then the best `finalists` are
/// trained for the full schedule. Starts are jittered by `seed`.
pub fn fit_curve_with(
    points: &[DataPoint],
    metric: Metric,
    ansatz: &str,
    seed: u64,
    opts: &FitOptions,
) -> Result<FitReport, ScalingError> {
    if points.is_empty() {
        return Err(ScalingError::Empty);
    }
    let floor = metric.floor();
    let mut clamped = 0;
    let mut data = Vec::with_capacity(points.len());
    for p in points {
        if !(p.n_k > 0.0 && p.n_k.is_finite()) {
            return Err(ScalingError::NonPositive("N"));
        }
        if !(p.d_prime > 0.0 && p.d_prime.is_finite()) {
            return Err(ScalingError::NonPositive("D'"));
        }
        if !(p.value >= 0.0 && p.value.is_finite()) {
            return Err(ScalingError::NonPositiveMetric(p.value));
        }
        if p.value < floor {
            clamped += 1;
        }
        data.push(DataPoint { value: p.value.max(floor), ..*p });
    }
    let n_span = decades(data.iter().map(|p| p.n_k));
    let d_span = decades(data.iter().map(|p| p.d_prime));
    if n_span == 0.0 {
        return Err(ScalingError::Degenerate("N"));
    }
    if d_span == 0.0 {
        return Err(ScalingError::Degenerate("D'"));
    }
    let mut warnings = Vec::new();
    if data.len() < 10 {
        warnings.push(format!("only {} points (10 recommended)", data.len()));
    }
    if n_span < 1.0 || d_span < 1.0 {
        warnings.push(format!("data span {n_span:.2} decades in N and {d_span:.2} in D' (1 recommended)"));
    }

    let logs = LogData(data.iter().map(|p| [p.n_k.ln(), p.d_prime.ln(), p.value.ln()]).collect());
    let min_value = data.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    let u0 = softplus_inv(0.5 * min_value);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<Theta> = Vec::with_capacity(625);
    for &al1 in &GRID_ALPHA {
        for &al2 in &GRID_ALPHA {
            for &la1 in &GRID_LOG10_A {
                for &la2 in &GRID_LOG10_A {
                    let mut j = || opts.jitter * (2.0 * rng.random::<f64>() - 1.0);
                    starts.push([
                        u0,
                        la1 * std::f64::consts::LN_10 + j(),
                        la2 * std::f64::consts::LN_10 + j(),
                        al1 * (1.0 + j()),
                        al2 * (1.0 + j()),
                    ]);
                }
            }
        }
    }

    let pick = |results: Vec<(f64, Theta)>, keep: usize| -> Vec<(f64, Theta)> {
        let mut indexed: Vec<(usize, (f64, Theta))> = results.into_iter().enumerate().collect();
        indexed.sort_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)));
        indexed.into_iter().take(keep).map(|(_, r)| r).collect()
    };
    let screened: Vec<(f64, Theta)> = starts.par_iter().map(|s| logs.run(*s, opts.screen_steps, opts)).collect();
    let finalists = pick(screened, opts.finalists.max(1));
    let refined: Vec<(f64, Theta)> = finalists.par_iter().map(|(_, s)| logs.run(*s, opts.steps, opts)).collect();
    let (best_loss, theta) = pick(refined, 1).pop().filter(|r| r.0.is_finite()).ok_or(ScalingError::Degenerate("fit"))?;

    let [a0, a1, a2, alpha1, alpha2] = decode(&theta);
    let mut curve = ScalingCurve::new(ansatz, metric, [a0, a1, a2], [alpha1, alpha2]);
    curve.r2_log = log_r2(&curve, &data);
    if alpha1 <= 0.0 || alpha2 <= 0.0 {
        warnings.push(format!("fitted exponents not positive (alpha1 = {alpha1}, alpha2 = {alpha2})"));
    }
    Ok(FitReport { curve, objective: best_loss, clamped, warnings })
}

/// Compute-optimal growth `D' = a N^b` for budgets of the form `C = k N D'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierResult {
    pub coefficient: f64,
    pub exponent: f64,
    alpha1: f64,
    alpha2: f64,
    /// `a1 A1 / (a2 A2)`.
    ratio: f64,
}

impl FrontierResult {
    pub fn n_opt(&self, c: f64, k: f64) -> f64 {
        let s = self.alpha1 + self.alpha2;
        self.ratio.powf(-1.0 / s) * (c / k).powf(self.alpha2 / s)
    }

    pub fn d_opt(&self, c: f64, k: f64) -> f64 {
        let s = self.alpha1 + self.alpha2;
        self.ratio.powf(1.0 / s) * (c / k).powf(self.alpha1 / s)
    }

    pub fn d_on_frontier(&self, n_k: f64) -> f64 {
        self.coefficient * n_k.powf(self.exponent)
    }
}

fn check_curve(curve: &ScalingCurve) -> Result<(), ScalingError> {
    let positive = |v: f64| v > 0.0 && v.is_finite();
    for (v, name) in [(curve.a1, "A1"), (curve.a2, "A2"), (curve.alpha1, "alpha1"), (curve.alpha2, "alpha2")] {
        if !positive(v) {
            return Err(ScalingError::InvalidCurve(name));
        }
    }
    Ok(())
}

/// Frontier `b = a1 / a2`, `a = (a1 A1 / (a2 A2))^(1/a2)`.
pub fn efficient_frontier(curve: &ScalingCurve) -> Result<FrontierResult, ScalingError> {
    check_curve(curve)?;
    let ratio = curve.alpha1 * curve.a1 / (curve.alpha2 * curve.a2);
    Ok(FrontierResult {
        coefficient: ratio.powf(1.0 / curve.alpha2),
        exponent: curve.alpha1 / curve.alpha2,
        alpha1: curve.alpha1,
        alpha2: curve.alpha2,
        ratio,
    })
}

/// `(N*, D'*)` on the frontier with `k N* D'* = C`.
pub fn optimal_allocation(curve: &ScalingCurve, c: f64, k: f64) -> Result<(f64, f64), ScalingError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(ScalingError::NonPositive("C"));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(ScalingError::NonPositive("k"));
    }
    let f = efficient_frontier(curve)?;
    let n = f.n_opt(c, k);
    Ok((n, c / (k * n)))
}

/// The `(N, D')` minimizing the predicted loss subject to `k N D' = C`.
///
/// Stationarity of `A1 N^-a1 + A2 (k N / C)^a2` gives
/// `N^(a1+a2) = (a1 A1 / (a2 A2)) (C/k)^a2`, the reciprocal ratio of the
/// one used by [`efficient_frontier`]. Both coincide when `a1 A1 = a2 A2`.
pub fn constrained_minimum(curve: &ScalingCurve, c: f64, k: f64) -> Result<(f64, f64), ScalingError> {
    let (n_frontier, _) = optimal_allocation(curve, c, k)?;
    let f = efficient_frontier(curve)?;
    let s = curve.alpha1 + curve.alpha2;
    let n = n_frontier * f.ratio.powf(2.0 / s);
    Ok((n, c / (k * n)))
}
