//! Shared numerical helpers: quadrature, special functions, KS statistics,
//! least squares, and error estimation.

/// Composite Simpson rule with `panels` subintervals (rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = if panels % 2 == 0 { panels } else { panels + 1 };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        s += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Error function via the all-positive convergent series
/// erf(x) = (2x/sqrt(pi)) e^(-x^2) sum_n (2x^2)^n / (2n+1)!!,
/// accurate to ~1e-15 on the range where erfc is representable.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x > 5.9 {
        return 1.0; // erfc < 1e-16
    }
    let x2 = x * x;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut n = 1.0f64;
    loop {
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        n += 1.0;
        if term < sum * 1e-17 || n > 300.0 {
            break;
        }
    }
    (2.0 * x / std::f64::consts::PI.sqrt()) * (-x2).exp() * sum
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// One-sample Kolmogorov-Smirnov distance against a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let fx = cdf(x);
        d = d.max(((i + 1) as f64 / n - fx).abs());
        d = d.max((fx - i as f64 / n).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Standard error by batch means; robust for weakly correlated sequences.
/// Uses max(n_batches, 20) batches when the data allows it.
pub fn batch_means_se(xs: &[f64], n_batches: usize) -> (f64, f64) {
    let nb = n_batches.max(20).min(xs.len().max(1));
    if xs.len() < 2 * nb {
        return mean_se(xs);
    }
    let per = xs.len() / nb;
    let means: Vec<f64> = (0..nb)
        .map(|b| xs[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let (m, se) = mean_se(&means);
    (m, se)
}

/// Weighted least-squares line fit: returns (slope, intercept, slope_se).
/// Weights are inverse variances of the y values.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), w.len());
    let sw: f64 = w.iter().sum();
    let sx: f64 = x.iter().zip(w).map(|(x, w)| x * w).sum();
    let sy: f64 = y.iter().zip(w).map(|(y, w)| y * w).sum();
    let xb = sx / sw;
    let yb = sy / sw;
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * (x - xb) * (x - xb)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y.iter())
        .zip(w)
        .map(|((x, y), w)| w * (x - xb) * (y - yb))
        .sum();
    let slope = sxy / sxx;
    let intercept = yb - slope * xb;
    let slope_se = (1.0 / sxx).sqrt();
    (slope, intercept, slope_se)
}

/// Fixed-edge histogram.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        let edges = (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect();
        Histogram {
            edges,
            counts: vec![0; bins],
            total: 0,
        }
    }

    pub fn add(&mut self, x: f64) {
        self.total += 1;
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap();
        if x < lo || x >= hi {
            return;
        }
        let bins = self.counts.len();
        let idx = (((x - lo) / (hi - lo)) * bins as f64) as usize;
        self.counts[idx.min(bins - 1)] += 1;
    }

    /// Probability density per bin (normalized by total count, not in-range count).
    pub fn density(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 / (t * (self.edges[i + 1] - self.edges[i])))
            .collect()
    }
}
