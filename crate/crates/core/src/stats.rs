//! Rank and goodness-of-fit statistics used by the samplers' checks and the
//! τ-correspondence curve.

use crate::error::{Error, Result};

/// Kendall's τ_b in O(n log n) (Knight's merge-sort algorithm). Equals τ_a
/// when neither margin has ties.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::domain("kendall_tau needs two equal-length samples of size >= 2"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::domain("kendall_tau got NaN"));
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut tied_x = 0u64;
    let mut tied_xy = 0u64;
    let mut run_x = 1u64;
    let mut run_xy = 1u64;
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            run_x += 1;
            if w[0].1 == w[1].1 {
                run_xy += 1;
            } else {
                tied_xy += run_xy * (run_xy - 1) / 2;
                run_xy = 1;
            }
        } else {
            tied_x += run_x * (run_x - 1) / 2;
            tied_xy += run_xy * (run_xy - 1) / 2;
            run_x = 1;
            run_xy = 1;
        }
    }
    tied_x += run_x * (run_x - 1) / 2;
    tied_xy += run_xy * (run_xy - 1) / 2;

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut tied_y = 0u64;
    let mut run_y = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            tied_y += run_y * (run_y - 1) / 2;
            run_y = 1;
        }
    }
    tied_y += run_y * (run_y - 1) / 2;

    let total = (n as u64) * (n as u64 - 1) / 2;
    let numer = total as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * swaps as f64;
    let denom = ((total - tied_x) as f64 * (total - tied_y) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::domain("kendall_tau undefined for a constant sample"));
    }
    Ok(numer / denom)
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Counts of a 2×2 table of binary pairs, indexed `[y1][y2]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BinaryPairCounts(pub [[u64; 2]; 2]);

impl BinaryPairCounts {
    pub fn add(&mut self, y1: u8, y2: u8) {
        self.0[y1 as usize][y2 as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    /// τ_a: (concordant − discordant) over all `n(n−1)/2` pairs, ties counted
    /// in the denominator.
    pub fn tau_a(&self) -> f64 {
        let [[n00, n01], [n10, n11]] = self.0;
        let n = self.total() as f64;
        let conc = n11 as f64 * n00 as f64;
        let disc = n10 as f64 * n01 as f64;
        (conc - disc) / (0.5 * n * (n - 1.0))
    }

    /// τ_b: τ_a rescaled by the untied pairs in each margin.
    pub fn tau_b(&self) -> f64 {
        let [[n00, n01], [n10, n11]] = self.0;
        let (r0, r1) = ((n00 + n01) as f64, (n10 + n11) as f64);
        let (c0, c1) = ((n00 + n10) as f64, (n01 + n11) as f64);
        let conc = n11 as f64 * n00 as f64;
        let disc = n10 as f64 * n01 as f64;
        (conc - disc) / (r0 * r1 * c0 * c1).sqrt()
    }

    /// Goodman–Kruskal γ (Yule's Q for a 2×2 table): ties excluded entirely.
    pub fn gamma(&self) -> f64 {
        let [[n00, n01], [n10, n11]] = self.0;
        let conc = n11 as f64 * n00 as f64;
        let disc = n10 as f64 * n01 as f64;
        (conc - disc) / (conc + disc)
    }
}

/// Kolmogorov–Smirnov statistic of a sample against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

/// Mean, unbiased variance, and standard error of the mean.
pub fn mean_var(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var, (var / n).sqrt())
}
