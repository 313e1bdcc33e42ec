//! Independent reference implementations and fleet helpers shared by the
//! integration tests. Nothing here calls into the code under test except to
//! build inputs.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use sensorprint::classifier::{BinarySvmModel, LabeledDataset, MulticlassSvmModel};
use sensorprint::signal::{extract_noise, NoiseSeries, TimeSeries};
use sensorprint::simulator::{generate, FleetSampler, SensorProfile};

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Relative error scaled by `scale` instead of the values themselves, for
/// quantities that can legitimately be near zero.
pub fn scaled_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

/// `O(P²)` DFT of `x` zero-padded to the next power of two.
pub fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let p = x.len().next_power_of_two();
    (0..p)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (n, &v) in x.iter().enumerate() {
                // reduce the phase index exactly before converting to an angle
                let idx = (k * n) % p;
                let ang = -2.0 * PI * idx as f64 / p as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re, im)
        })
        .collect()
}

pub fn naive_magnitudes(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dft = naive_dft(x);
    let p = dft.len();
    let mags = dft[..=p / 2].iter().map(|(r, i)| (r * r + i * i).sqrt()).collect();
    let freqs = (0..=p / 2).map(|i| i as f64 / p as f64).collect();
    (freqs, mags)
}

pub struct NaiveTime {
    pub mean: f64,
    pub std: f64,
    pub mad: f64,
    pub skew: f64,
    pub kurt: f64,
}

pub fn naive_time(x: &[f64]) -> NaiveTime {
    let n = x.len() as f64;
    let mut mean = 0.0;
    for v in x {
        mean += v;
    }
    mean /= n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    let mut mad = 0.0;
    for v in x {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        mad += d.abs();
    }
    let std = (m2 / (n - 1.0)).sqrt();
    NaiveTime {
        mean,
        std,
        mad: mad / n,
        skew: (m3 / n) / std.powi(3),
        kurt: (m4 / n) / std.powi(4) - 3.0,
    }
}

/// (spectral std, centroid, dc) from bin frequencies and magnitudes.
pub fn naive_spectral(freqs: &[f64], mags: &[f64]) -> (f64, f64, f64) {
    let total: f64 = mags.iter().sum();
    let c = freqs.iter().zip(mags).map(|(f, m)| f * m).sum::<f64>() / total;
    let s = (freqs.iter().zip(mags).map(|(f, m)| f * f * m).sum::<f64>() / total).sqrt();
    (s, c, mags[0])
}

pub fn naive_energy(x: &[f64], dt: f64) -> f64 {
    let mut e = 0.0;
    for v in x {
        e += v * v * dt;
    }
    e
}

/// Eq-1 accuracy, plain accuracy, and per-class (TPR, FPR) from a matrix
/// indexed `[predicted][actual]`.
pub fn naive_metrics(m: &[Vec<u64>]) -> (f64, f64, Vec<(f64, f64)>) {
    let k = m.len();
    let total: u64 = m.iter().flatten().sum();
    let mut num = 0u64;
    let mut den = 0u64;
    let mut rates = Vec::new();
    for c in 0..k {
        let tp = m[c][c];
        let fp: u64 = (0..k).filter(|&a| a != c).map(|a| m[c][a]).sum();
        let fn_: u64 = (0..k).filter(|&p| p != c).map(|p| m[p][c]).sum();
        let tn = total - tp - fp - fn_;
        num += tp + tn;
        den += tp + tn + fp + fn_;
        let tpr = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let fpr = if fp + tn == 0 { 0.0 } else { fp as f64 / (fp + tn) as f64 };
        rates.push((tpr, fpr));
    }
    let trace: u64 = (0..k).map(|i| m[i][i]).sum();
    (num as f64 / den as f64, trace as f64 / total as f64, rates)
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

pub fn dual_value(points: &[Vec<f64>], y: &[f64], alpha: &[f64], gamma: f64) -> f64 {
    let n = points.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * rbf(&points[i], &points[j], gamma);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 ≤ α ≤ C, Σ α y = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c)).collect() };
    let g = |lam: f64| -> f64 { at(lam).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        // g is non-increasing in lambda
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Maximum of the soft-margin dual by accelerated projected gradient ascent
/// with adaptive restart.
pub fn qp_oracle(points: &[Vec<f64>], y: &[f64], c: f64, gamma: f64) -> f64 {
    let n = points.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * rbf(&points[i], &points[j], gamma)).collect())
        .collect();
    let objective = |a: &[f64]| {
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| a[i] * q[i][j] * a[j]).sum::<f64>()).sum();
        a.iter().sum::<f64>() - 0.5 * quad
    };
    // trace(Q) = n bounds the largest eigenvalue
    let step = 1.0 / n as f64;
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut best = objective(&a);
    for _ in 0..200_000 {
        let grad: Vec<f64> = (0..n).map(|i| 1.0 - (0..n).map(|j| q[i][j] * z[j]).sum::<f64>()).collect();
        let v: Vec<f64> = z.iter().zip(&grad).map(|(zi, gi)| zi + step * gi).collect();
        let next = project(&v, y, c);
        let value = objective(&next);
        if value < best {
            // momentum overshot: restart from the last iterate
            z = a.clone();
            t = 1.0;
            continue;
        }
        let moved = next.iter().zip(&a).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next
            .iter()
            .zip(&a)
            .map(|(ni, ai)| ni + (t - 1.0) / t_next * (ni - ai))
            .collect();
        a = next;
        t = t_next;
        best = value;
        if moved < 1e-13 {
            break;
        }
    }
    dual_value(points, y, &a, gamma)
}

/// Worst KKT slack of `model` over the points it was trained on, in units of
/// the margin. Zero means every condition holds exactly.
pub fn kkt_violation(model: &BinarySvmModel, points: &[Vec<f64>], y: &[f64]) -> f64 {
    let mut sv = 0;
    let mut worst: f64 = 0.0;
    let c = model.penalty;
    for (x, &yi) in points.iter().zip(y) {
        let alpha = if sv < model.support_vectors.len() && model.support_vectors[sv] == *x {
            sv += 1;
            model.alphas_signed[sv - 1].abs()
        } else {
            0.0
        };
        let margin = yi * model.decision(x);
        let slack = if alpha == 0.0 {
            1.0 - margin
        } else if alpha >= c * (1.0 - 1e-12) {
            margin - 1.0
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(slack);
    }
    assert_eq!(sv, model.support_vectors.len(), "support vectors must come from the training points");
    worst
}

/// Worst KKT slack over every pairwise machine of a multiclass model trained
/// on `data`.
pub fn multiclass_kkt_violation(model: &MulticlassSvmModel, data: &LabeledDataset) -> f64 {
    let scaled: Vec<Vec<f64>> = data.vectors.iter().map(|v| model.scaling.apply(v)).collect();
    let mut worst: f64 = 0.0;
    for b in &model.binaries {
        let (pos, neg) = &b.label_pair;
        // pairwise subproblems list the positive class first
        let mut pts = Vec::new();
        let mut ys = Vec::new();
        for (label, sign) in [(pos, 1.0), (neg, -1.0)] {
            for (x, l) in scaled.iter().zip(&data.labels) {
                if l == label {
                    pts.push(x.clone());
                    ys.push(sign);
                }
            }
        }
        worst = worst.max(kkt_violation(b, &pts, &ys));
    }
    worst
}

pub const FLEET_DURATION: usize = 3 * 3600;

pub struct SimFleet {
    pub profiles: Vec<SensorProfile>,
    pub series: Vec<TimeSeries>,
}

impl SimFleet {
    pub fn new(count: usize, master_seed: u64) -> Self {
        let profiles = FleetSampler::default().sample(count, master_seed).unwrap();
        let series = profiles.iter().map(|p| generate(p, FLEET_DURATION).unwrap()).collect();
        SimFleet { profiles, series }
    }

    /// Noise series referenced to each sensor's setpoint.
    pub fn noise(&self) -> BTreeMap<String, NoiseSeries> {
        self.noise_of(&(0..self.profiles.len()).collect::<Vec<_>>())
    }

    pub fn noise_of(&self, members: &[usize]) -> BTreeMap<String, NoiseSeries> {
        members
            .iter()
            .map(|&i| {
                let p = &self.profiles[i];
                (p.sensor_id.clone(), extract_noise(&self.series[i], Some(p.baseline)).unwrap())
            })
            .collect()
    }
}
