//! Pass/fail verdicts over a recorded trajectory.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TokenId, Vocabulary, COMMON, SIGNAL_1, SIGNAL_2};
use crate::dynamics::{AttentionCoeffs, DynamicsSnapshot};
use crate::error::{Error, Result};
use crate::gradients::{dynamics_rhs, Quantity};
use crate::model::ModelParams;

/// Numeric thresholds for every check. The defaults are testable stand-ins
/// for asymptotic constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub margin_threshold: f64,
    /// Latest allowed end of the first phase, as a fraction of the run.
    pub t1_max_frac: f64,
    pub g_min: f64,
    pub phase1_loss_min: f64,
    pub quiescence_frac: f64,
    pub trend_floor: f64,
    pub combo_c: f64,
    pub balance_fraction: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub r2_min: f64,
    pub intercept_tol: f64,
    pub min_fit_points: usize,
    pub sep_factor: f64,
    /// Slack in the signal/common-token derivative bracket (informational).
    pub head_ratio_c: f64,
    /// Stop the analysis window at the first step with `L̂ ≤ loss_target`.
    pub loss_target: Option<f64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            margin_threshold: 0.05,
            t1_max_frac: 0.1,
            g_min: 0.1,
            phase1_loss_min: 0.1,
            quiescence_frac: 0.1,
            trend_floor: 1e-6,
            combo_c: 0.1,
            balance_fraction: 0.95,
            ratio_lo: 0.5,
            ratio_hi: 2.0,
            r2_min: 0.98,
            intercept_tol: 0.25,
            min_fit_points: 10,
            sep_factor: 5.0,
            head_ratio_c: 0.05,
            loss_target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, pass: bool, measured: f64, threshold: f64) -> Self {
        CheckRecord {
            name: name.into(),
            pass,
            measured,
            threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured >= threshold, measured, threshold)
    }

    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured <= threshold, measured, threshold)
    }
}

impl fmt::Display for CheckRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{:.6e},{:.6e}",
            self.name,
            if self.pass { "pass" } else { "fail" },
            self.measured,
            self.threshold
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub t1: Option<u64>,
    pub t_star: u64,
    pub records: Vec<CheckRecord>,
    /// Diagnostics printed with the table but never gating the verdict.
    #[serde(default)]
    pub info: Vec<CheckRecord>,
}

impl PhaseReport {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    /// True when every record whose name starts with `prefix` passes (and
    /// at least one exists).
    pub fn group_pass(&self, prefix: &str) -> bool {
        let mut any = false;
        for r in self.records.iter().filter(|r| r.name.starts_with(prefix)) {
            any = true;
            if !r.pass {
                return false;
            }
        }
        any
    }

    pub fn table(&self) -> String {
        let mut out = String::from("check,pass,measured,threshold\n");
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        for r in &self.info {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseEnd {
    Reached(u64),
    NotReached { max_margin: f64 },
}

/// First logged step whose minimum margin reaches `margin_threshold`.
pub fn detect_phase1_end(snaps: &[DynamicsSnapshot], margin_threshold: f64) -> Result<PhaseEnd> {
    if snaps.is_empty() {
        return Err(Error::input("empty trajectory"));
    }
    match snaps.iter().find(|s| s.min_margin >= margin_threshold) {
        Some(s) => Ok(PhaseEnd::Reached(s.t)),
        None => Ok(PhaseEnd::NotReached {
            max_margin: snaps.iter().map(|s| s.min_margin).fold(f64::NEG_INFINITY, f64::max),
        }),
    }
}

/// Last logged step, or the first one with `L̂ ≤ loss_target`.
pub fn t_star(snaps: &[DynamicsSnapshot], loss_target: Option<f64>) -> u64 {
    let last = snaps.last().map_or(0, |s| s.t);
    match loss_target {
        Some(target) => snaps
            .iter()
            .find(|s| s.train_loss <= target)
            .map_or(last, |s| s.t),
        None => last,
    }
}

/// Snapshots with `t1 ≤ t ≤ t_star`.
pub fn window(snaps: &[DynamicsSnapshot], t1: u64, t_star: u64) -> &[DynamicsSnapshot] {
    let lo = snaps.partition_point(|s| s.t < t1);
    let hi = snaps.partition_point(|s| s.t <= t_star);
    &snaps[lo..hi.max(lo)]
}

fn at(snaps: &[DynamicsSnapshot], t: u64) -> Option<&DynamicsSnapshot> {
    snaps.iter().find(|s| s.t == t)
}

pub fn check_phase1(snaps: &[DynamicsSnapshot], t1: u64, t_star: u64, cfg: &CheckConfig) -> Vec<CheckRecord> {
    let (Some(s1), Some(se)) = (at(snaps, t1), at(snaps, t_star)) else {
        return vec![CheckRecord::new("phase1_state", false, f64::NAN, f64::NAN)];
    };
    let quiet = |name: &str, a: f64, b: f64| {
        let ratio = if b > 0.0 {
            a / b
        } else if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        CheckRecord::at_most(name, ratio, cfg.quiescence_frac)
    };
    vec![
        CheckRecord::at_least("phase1_G1", s1.g(1), cfg.g_min),
        CheckRecord::at_least("phase1_G2", s1.g(2), cfg.g_min),
        CheckRecord::at_most("phase1_G3", s1.g(3), -cfg.g_min),
        CheckRecord::at_least("phase1_loss", s1.train_loss, cfg.phase1_loss_min),
        quiet("phase1_quiet_RS", s1.radius_s, se.radius_s),
        quiet("phase1_quiet_RK", s1.radius_k, se.radius_k),
        quiet("phase1_quiet_RQ", s1.radius_q, se.radius_q),
        quiet("phase1_quiet_RP", s1.radius_p, se.radius_p),
    ]
}

/// Ordinary least squares `y ≈ slope·x + intercept`, returning
/// `(slope, intercept, R²)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    (slope, intercept, r2)
}

type Series = (&'static str, i8, fn(&DynamicsSnapshot) -> f64);

/// The ten monotone series, with the sign of their expected trend.
pub const TREND_SERIES: [Series; 10] = [
    ("S12", 1, |s| s.s(1, 2)),
    ("S21", 1, |s| s.s(2, 1)),
    ("S31", -1, |s| s.s(3, 1)),
    ("S32", -1, |s| s.s(3, 2)),
    ("V12", 1, |s| s.v(1, 2)),
    ("V13", -1, |s| s.v(1, 3)),
    ("V23", -1, |s| s.v(2, 3)),
    ("G1", 1, |s| s.g(1)),
    ("G2", 1, |s| s.g(2)),
    ("G3", -1, |s| s.g(3)),
];

/// A trend passes when both the fitted slope and the net change have the
/// expected sign and the net change is at least `trend_floor` in size.
pub fn trend_record(name: &str, sign: i8, t: &[f64], values: &[f64], floor: f64) -> CheckRecord {
    let label = format!("trend_{name}_{}", if sign > 0 { "up" } else { "down" });
    if values.len() < 2 {
        return CheckRecord::new(label, false, f64::NAN, floor);
    }
    let (slope, _, _) = ols(t, values);
    let net = values[values.len() - 1] - values[0];
    let s = sign as f64;
    let pass = s * slope > 0.0 && s * net > 0.0 && net.abs() >= floor;
    CheckRecord::new(label, pass, net, s * floor)
}

pub fn check_phase2_trends(snaps: &[DynamicsSnapshot], t1: u64, t_star: u64, cfg: &CheckConfig) -> Vec<CheckRecord> {
    let win = window(snaps, t1, t_star);
    let t: Vec<f64> = win.iter().map(|s| s.t as f64).collect();
    let mut records: Vec<CheckRecord> = TREND_SERIES
        .iter()
        .map(|(name, sign, get)| {
            let v: Vec<f64> = win.iter().map(get).collect();
            trend_record(name, *sign, &t, &v, cfg.trend_floor)
        })
        .collect();
    match at(snaps, t_star) {
        Some(e) => {
            let (g1, g2, g3) = (e.g(1), e.g(2), e.g(3));
            records.push(CheckRecord::at_least("combo_G1+G2+G3", g1 + g2 + g3, cfg.combo_c));
            records.push(CheckRecord::at_most("combo_G1+G3", g1 + g3, -cfg.combo_c));
            records.push(CheckRecord::at_most("combo_G2+G3", g2 + g3, -cfg.combo_c));
        }
        None => records.push(CheckRecord::new("combo_state", false, f64::NAN, cfg.combo_c)),
    }
    records
}

/// Ratio test on `gsum_I2 / gsum_I3` and the ordering
/// `I4 ≤ min(I2, I3) ≤ max(I2, I3) ≤ I1 ≤ I2 + I3 + I4`.
pub fn balance_conditions(gs: &[f64; 4], lo: f64, hi: f64) -> (bool, bool) {
    let [g1, g2, g3, g4] = *gs;
    let ratio = g2 / g3;
    let ratio_ok = ratio.is_finite() && ratio >= lo && ratio <= hi;
    let order_ok = g4 <= g2.min(g3) && g2.max(g3) <= g1 && g1 <= g2 + g3 + g4;
    (ratio_ok, order_ok)
}

pub fn check_gradient_balancing(
    snaps: &[DynamicsSnapshot],
    t1: u64,
    t_star: u64,
    cfg: &CheckConfig,
) -> Vec<CheckRecord> {
    let win = window(snaps, t1, t_star);
    if win.is_empty() {
        return vec![
            CheckRecord::new("balance_ratio", false, f64::NAN, cfg.balance_fraction),
            CheckRecord::new("balance_order", false, f64::NAN, cfg.balance_fraction),
        ];
    }
    let (mut ratio, mut order) = (0usize, 0usize);
    for s in win {
        let (r, o) = balance_conditions(&s.group_gsum, cfg.ratio_lo, cfg.ratio_hi);
        ratio += r as usize;
        order += o as usize;
    }
    let n = win.len() as f64;
    vec![
        CheckRecord::at_least("balance_ratio", ratio as f64 / n, cfg.balance_fraction),
        CheckRecord::at_least("balance_order", order as f64 / n, cfg.balance_fraction),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub c1: f64,
    pub c2: f64,
    pub r2: f64,
    pub points: usize,
    /// `1/L̂` at the start of the window.
    pub inv_loss_start: f64,
}

/// Fits `1/L̂(t) ≈ C1 (t − t1) + C2` on the window.
pub fn fit_loss_decay(snaps: &[DynamicsSnapshot], t1: u64, t_star: u64, min_points: usize) -> Result<DecayFit> {
    let win = window(snaps, t1, t_star);
    if win.len() < min_points.max(2) {
        return Err(Error::input(format!(
            "loss fit needs {} points in the window, found {}",
            min_points.max(2),
            win.len()
        )));
    }
    let x: Vec<f64> = win.iter().map(|s| (s.t - t1) as f64).collect();
    let y: Vec<f64> = win.iter().map(|s| 1.0 / s.train_loss).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("loss fit", "training loss reached zero or became non-finite"));
    }
    let (c1, c2, r2) = ols(&x, &y);
    Ok(DecayFit {
        c1,
        c2,
        r2,
        points: win.len(),
        inv_loss_start: y[0],
    })
}

pub fn check_loss_decay(snaps: &[DynamicsSnapshot], t1: u64, t_star: u64, cfg: &CheckConfig) -> Vec<CheckRecord> {
    match fit_loss_decay(snaps, t1, t_star, cfg.min_fit_points) {
        Ok(fit) => {
            let rel = (fit.c2 - fit.inv_loss_start).abs() / fit.inv_loss_start;
            vec![
                CheckRecord::new("decay_slope", fit.c1 > 0.0, fit.c1, 0.0),
                CheckRecord::at_least("decay_r2", fit.r2, cfg.r2_min),
                CheckRecord::at_most("decay_intercept", rel, cfg.intercept_tol),
            ]
        }
        Err(_) => vec![CheckRecord::new(
            "decay_fit",
            false,
            window(snaps, t1, t_star).len() as f64,
            cfg.min_fit_points as f64,
        )],
    }
}

pub fn check_attention_structure(coeffs: &AttentionCoeffs, cfg: &CheckConfig) -> Vec<CheckRecord> {
    let c = |a, b| coeffs.get(a, b).unwrap_or(f64::NAN);
    let (c12, c21, c31, c32) = (c(1, 2), c(2, 1), c(3, 1), c(3, 2));
    let special = c12.abs().min(c21.abs()).min(c31.abs()).min(c32.abs());
    let random = coeffs.max_abs_random();
    let sep = if random > 0.0 {
        special / random
    } else if special > 0.0 {
        f64::INFINITY
    } else {
        f64::NAN
    };
    vec![
        CheckRecord::new("attn_C12_pos", c12 > 0.0, c12, 0.0),
        CheckRecord::new("attn_C21_pos", c21 > 0.0, c21, 0.0),
        CheckRecord::new("attn_C31_neg", c31 < 0.0, c31, 0.0),
        CheckRecord::new("attn_C32_neg", c32 < 0.0, c32, 0.0),
        CheckRecord::at_least("attn_separation", sep, cfg.sep_factor),
    ]
}

/// `dG(μ)/dt`, summing the per-neuron right-hand sides with their signs.
pub fn head_derivative(params: &ModelParams, dataset: &Dataset, vocab: &Vocabulary, mu: TokenId) -> Result<f64> {
    let mut total = 0.0;
    for (j, &a) in params.a.iter().enumerate() {
        total += a * dynamics_rhs(params, dataset, vocab, Quantity::Mlp { j, mu })?;
    }
    Ok(total)
}

/// Whether the common token's head falls at a rate bracketed by the signal
/// heads: `(1+c)·max(G1', G2') ≤ −G3' ≤ (1−c)·(G1' + G2')`.
///
/// Measured is `−G3' / (G1' + G2')`; the threshold column shows the upper
/// end `1 − c` of the bracket.
pub fn head_ratio_record(
    name: &str,
    params: &ModelParams,
    dataset: &Dataset,
    vocab: &Vocabulary,
    c: f64,
) -> Result<CheckRecord> {
    let d1 = head_derivative(params, dataset, vocab, SIGNAL_1)?;
    let d2 = head_derivative(params, dataset, vocab, SIGNAL_2)?;
    let d3 = head_derivative(params, dataset, vocab, COMMON)?;
    let lower = (1.0 + c) * d1.max(d2);
    let upper = (1.0 - c) * (d1 + d2);
    let pass = lower <= -d3 && -d3 <= upper;
    let ratio = -d3 / (d1 + d2);
    Ok(CheckRecord::new(name, pass, ratio, 1.0 - c))
}

/// Runs every trajectory check in a fixed order, plus the attention checks
/// when coefficients are supplied.
pub fn verify(snaps: &[DynamicsSnapshot], coeffs: Option<&AttentionCoeffs>, cfg: &CheckConfig) -> Result<PhaseReport> {
    let end = t_star(snaps, cfg.loss_target);
    let total = snaps.last().map_or(0, |s| s.t);
    let mut records = Vec::new();
    let t1 = match detect_phase1_end(snaps, cfg.margin_threshold)? {
        PhaseEnd::Reached(t1) => {
            let frac = if total > 0 { t1 as f64 / total as f64 } else { 0.0 };
            records.push(CheckRecord::at_most("phase1_end", frac, cfg.t1_max_frac));
            Some(t1)
        }
        PhaseEnd::NotReached { max_margin } => {
            records.push(CheckRecord::new("phase1_end", false, max_margin, cfg.margin_threshold));
            None
        }
    };
    if let Some(t1) = t1 {
        let window_end = end.max(t1);
        records.extend(check_phase1(snaps, t1, window_end, cfg));
        records.extend(check_phase2_trends(snaps, t1, window_end, cfg));
        records.extend(check_gradient_balancing(snaps, t1, window_end, cfg));
        records.extend(check_loss_decay(snaps, t1, window_end, cfg));
    }
    if let Some(coeffs) = coeffs {
        records.extend(check_attention_structure(coeffs, cfg));
    }
    Ok(PhaseReport {
        t1,
        t_star: end,
        records,
        info: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    fn snap(t: u64) -> DynamicsSnapshot {
        DynamicsSnapshot {
            t,
            train_loss: 1.0,
            test_loss: None,
            group_losses: [0.0; 4],
            group_gsum: [0.0; 4],
            min_margin: 0.0,
            g_special: [0.0; 3],
            g_max_rand: 0.0,
            score: [0.0; 9],
            score_max_rand: 0.0,
            value_corr: [0.0; 9],
            kself: [0.0; 9],
            qself: [0.0; 9],
            neuron_sum: 0.0,
            softmax_probe: [0.0; 3],
            radius_k: 0.0,
            radius_q: 0.0,
            radius_s: 0.0,
            radius_p: 0.0,
        }
    }

    #[test]
    fn phase_end_detection() {
        let snaps: Vec<_> = [-0.1, 0.01, 0.06, 0.2]
            .iter()
            .enumerate()
            .map(|(i, &m)| DynamicsSnapshot {
                min_margin: m,
                ..snap(i as u64 * 10)
            })
            .collect();
        assert_eq!(detect_phase1_end(&snaps, 0.05).unwrap(), PhaseEnd::Reached(20));
        let neg: Vec<_> = snaps
            .iter()
            .map(|s| DynamicsSnapshot {
                min_margin: -1.0 - s.t as f64,
                ..s.clone()
            })
            .collect();
        assert_eq!(
            detect_phase1_end(&neg, 0.05).unwrap(),
            PhaseEnd::NotReached { max_margin: -1.0 }
        );
        assert!(detect_phase1_end(&[], 0.05).is_err());
    }

    #[test]
    fn phase1_records() {
        let mut a = snap(10);
        a.g_special = [0.5, 0.5, -0.4];
        a.radius_s = 0.001;
        let mut b = snap(100);
        b.radius_s = 0.1;
        let snaps = vec![a.clone(), b.clone()];
        let recs = check_phase1(&snaps, 10, 100, &CheckConfig::default());
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");

        a.g_special[2] = 0.2;
        let recs = check_phase1(&[a, b], 10, 100, &CheckConfig::default());
        let failed: Vec<_> = recs.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
        assert_eq!(failed, ["phase1_G3"]);
    }

    #[test]
    fn trends() {
        let t: Vec<f64> = (0..10).map(|v| v as f64).collect();
        let up: Vec<f64> = t.iter().map(|v| v * 0.1).collect();
        assert!(trend_record("x", 1, &t, &up, 1e-6).pass);
        assert!(!trend_record("x", -1, &t, &up, 1e-6).pass);
        let flat = vec![2.0; 10];
        let r = trend_record("x", 1, &t, &flat, 1e-6);
        assert!(!r.pass);
        assert_eq!(r.measured, 0.0);
    }

    #[test]
    fn balancing_examples() {
        assert_eq!(balance_conditions(&[3.0, 1.2, 1.0, 0.5], 0.5, 2.0), (true, false));
        assert_eq!(balance_conditions(&[2.0, 1.1, 1.0, 0.5], 0.5, 2.0), (true, true));
    }

    #[test]
    fn hyperbolic_decay_is_recovered() {
        let snaps: Vec<_> = (0..50)
            .map(|t| DynamicsSnapshot {
                train_loss: 1.0 / (2.0 * t as f64 + 4.0),
                ..snap(t)
            })
            .collect();
        let fit = fit_loss_decay(&snaps, 0, 49, 10).unwrap();
        assert!((fit.c1 - 2.0).abs() < 1e-10);
        assert!((fit.c2 - 4.0).abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(check_loss_decay(&snaps, 0, 49, &CheckConfig::default()).iter().all(|r| r.pass));
    }

    #[test]
    fn exponential_decay_is_rejected() {
        let snaps: Vec<_> = (0..=100)
            .map(|k| DynamicsSnapshot {
                train_loss: (-(k as f64) / 10.0).exp(),
                ..snap(k)
            })
            .collect();
        let fit = fit_loss_decay(&snaps, 0, 100, 10).unwrap();
        assert!(fit.r2 < 0.98, "r2 = {}", fit.r2);
        assert!(check_loss_decay(&snaps, 0, 100, &CheckConfig::default()).iter().any(|r| !r.pass));
    }

    #[test]
    fn too_few_points_fail_without_panicking() {
        let snaps: Vec<_> = (0..3).map(snap).collect();
        let recs = check_loss_decay(&snaps, 0, 2, &CheckConfig::default());
        assert_eq!(recs.len(), 1);
        assert!(!recs[0].pass);
    }

    fn coeffs(c12: f64, c21: f64, c31: f64, c32: f64, random: f64) -> AttentionCoeffs {
        let tracked = vec![1, 2, 3, 7];
        let mut c = Mat::zeros(4, 4);
        c.row_mut(0)[1] = c12;
        c.row_mut(1)[0] = c21;
        c.row_mut(2)[0] = c31;
        c.row_mut(2)[1] = c32;
        c.row_mut(3)[0] = random;
        AttentionCoeffs { tracked, c }
    }

    #[test]
    fn attention_examples() {
        let cfg = CheckConfig::default();
        let ok = check_attention_structure(&coeffs(0.4, 0.38, -0.35, -0.33, 0.02), &cfg);
        assert!(ok.iter().all(|r| r.pass), "{ok:?}");
        let bad = check_attention_structure(&coeffs(-0.4, 0.38, -0.35, -0.33, 0.02), &cfg);
        assert!(!bad[0].pass);
        assert!(bad[1..].iter().all(|r| r.pass));
    }

    #[test]
    fn window_and_t_star() {
        let snaps: Vec<_> = (0..10)
            .map(|k| DynamicsSnapshot {
                train_loss: 1.0 / (k + 1) as f64,
                ..snap(k * 10)
            })
            .collect();
        assert_eq!(t_star(&snaps, None), 90);
        assert_eq!(t_star(&snaps, Some(0.2)), 40);
        assert_eq!(window(&snaps, 15, 45).len(), 3);
    }
}
