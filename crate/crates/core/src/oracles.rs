//! Independent references: exact 2x2 laws, the Wigner surmise, Metropolis
//! samplers for the log-gas measures, and a small Fokker-Planck solver that
//! measures entropy decay of the regularized gap dynamics.

use crate::ensembles::{sample_wigner, EnsembleConfig, EntryDistribution, SymmetryClass};
use crate::error::{Error, Result};
use crate::flows::{relaxation_potential_oracle, RelaxationPotential};
use crate::numeric::erf;
use crate::rng::StreamRng;
use crate::spectral::classical_locations;

// ---------------------------------------------------------------------------
// Wigner surmise and the 2x2 brute-force law behind it
// ---------------------------------------------------------------------------

/// Wigner surmise density at normalized spacing s.
/// beta=1: (pi s/2) exp(-pi s^2/4); beta=2: (32 s^2/pi^2) exp(-4 s^2/pi).
pub fn wigner_surmise(beta: u8, s: f64) -> Result<f64> {
    use std::f64::consts::PI;
    if s < 0.0 {
        return Err(Error::Domain(format!("spacing must be >= 0, got {s}")));
    }
    match beta {
        1 => Ok(0.5 * PI * s * (-0.25 * PI * s * s).exp()),
        2 => Ok(32.0 * s * s / (PI * PI) * (-4.0 * s * s / PI).exp()),
        b => Err(Error::Config(format!("beta must be 1 or 2, got {b}"))),
    }
}

/// CDF of the surmise, in closed form.
pub fn surmise_cdf(beta: u8, s: f64) -> Result<f64> {
    use std::f64::consts::PI;
    if s < 0.0 {
        return Ok(0.0);
    }
    match beta {
        1 => Ok(1.0 - (-0.25 * PI * s * s).exp()),
        2 => {
            let a = 2.0 * s / PI.sqrt();
            Ok(erf(a) - (4.0 * s / PI) * (-4.0 * s * s / PI).exp())
        }
        b => Err(Error::Config(format!("beta must be 1 or 2, got {b}"))),
    }
}

/// Closed-form gap of a 2x2 self-adjoint matrix: sqrt((a-c)^2 + 4|b|^2).
pub fn two_by_two_gap(a: f64, c: f64, b_re: f64, b_im: f64) -> f64 {
    ((a - c) * (a - c) + 4.0 * (b_re * b_re + b_im * b_im)).sqrt()
}

/// Gaps of directly sampled 2x2 Gaussian matrices, normalized to unit mean
/// using the exact mean of the induced Rayleigh/Maxwell law. This is the
/// brute-force oracle the surmise numbers are checked against.
pub fn small_n_gap_law(symmetry: SymmetryClass, n_samples: usize, seed: u64) -> Vec<f64> {
    use std::f64::consts::PI;
    let cfg = EnsembleConfig {
        symmetry,
        n: 2,
        dist: EntryDistribution::gaussian(),
        seed,
    };
    // exact means of the raw gap under the sampler normalization:
    // beta=1: Rayleigh(sigma^2=2) -> sqrt(pi); beta=2: Maxwell(1) -> 2 sqrt(2/pi)
    let mean = match symmetry {
        SymmetryClass::Symmetric => PI.sqrt(),
        SymmetryClass::Hermitian => 2.0 * (2.0 / PI).sqrt(),
    };
    (0..n_samples)
        .map(|s| {
            let h = sample_wigner(&cfg, s as u64).expect("2x2 sample");
            let a = h.entry(0, 0).re;
            let c = h.entry(1, 1).re;
            let b = h.entry(0, 1);
            two_by_two_gap(a, c, b.re, b.im) / mean
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Gibbs measures and Metropolis sampling
// ---------------------------------------------------------------------------

/// Which log-gas measure to target.
#[derive(Debug, Clone)]
pub enum GibbsKind {
    /// Equilibrium of the eigenvalue SDE.
    Mu,
    /// Local relaxation measure with regularization eta.
    Omega { eta: f64 },
}

/// A Gibbs target on the ordered simplex.
#[derive(Debug, Clone)]
pub struct GibbsSpec {
    pub beta: f64,
    pub n: usize,
    pub kind: GibbsKind,
    /// Classical locations (always cached; the omega Hamiltonian needs them).
    pub gamma: Vec<f64>,
    pot: Option<RelaxationPotential>,
}

impl GibbsSpec {
    pub fn mu(beta: f64, n: usize) -> Result<Self> {
        if beta < 1.0 {
            return Err(Error::Config(format!("beta must be >= 1, got {beta}")));
        }
        Ok(GibbsSpec {
            beta,
            n,
            kind: GibbsKind::Mu,
            gamma: classical_locations(n),
            pot: None,
        })
    }

    pub fn omega(beta: f64, n: usize, eta: f64) -> Result<Self> {
        if beta < 1.0 {
            return Err(Error::Config(format!("beta must be >= 1, got {beta}")));
        }
        let pot = relaxation_potential_oracle(n, eta)?;
        Ok(GibbsSpec {
            beta,
            n,
            kind: GibbsKind::Omega { eta },
            gamma: pot.gamma.clone(),
            pot: Some(pot),
        })
    }

    pub fn potential(&self) -> Option<&RelaxationPotential> {
        self.pot.as_ref()
    }

    /// Hamiltonian on the ordered simplex; +infinity at collisions.
    ///
    /// mu:    (N beta/4) sum x^2 - beta sum_{i<j} log(x_j - x_i)
    /// omega: mu-part + 2 sum_{far pairs} log(x_j - x_i + eta)
    ///        + 2N sum_j W_j(x_j)
    /// The omega weights are chosen so that -(1/2N) grad H is exactly the
    /// local relaxation drift, making this sampler the stationarity oracle
    /// for the flow integrator.
    pub fn hamiltonian(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        let nf = self.n as f64;
        let mut h = 0.25 * nf * self.beta * x.iter().map(|v| v * v).sum::<f64>();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let gap = x[j] - x[i];
                if gap <= 0.0 {
                    return f64::INFINITY;
                }
                h -= self.beta * gap.ln();
            }
        }
        if let GibbsKind::Omega { eta } = self.kind {
            let pot = self.pot.as_ref().expect("omega carries its potential");
            let w = pot.window;
            for i in 0..self.n {
                for j in (i + w).min(self.n)..self.n {
                    h += 2.0 * (x[j] - x[i] + eta).ln();
                }
            }
            for j in 0..self.n {
                h += 2.0 * nf * pot.value(j, x[j]);
            }
        }
        h
    }

    /// Hamiltonian change when coordinate j moves to xj_new, O(N).
    pub fn delta_hamiltonian(&self, x: &[f64], j: usize, xj_new: f64) -> f64 {
        let nf = self.n as f64;
        let old = x[j];
        let mut dh = 0.25 * nf * self.beta * (xj_new * xj_new - old * old);
        for k in 0..self.n {
            if k == j {
                continue;
            }
            let new_gap = (xj_new - x[k]).abs();
            let old_gap = (old - x[k]).abs();
            if new_gap <= 0.0 {
                return f64::INFINITY;
            }
            dh -= self.beta * (new_gap.ln() - old_gap.ln());
        }
        if let GibbsKind::Omega { eta } = self.kind {
            let pot = self.pot.as_ref().expect("omega carries its potential");
            let w = pot.window;
            for k in 0..self.n {
                if k + w <= j || k >= j + w {
                    let new_d = (xj_new - x[k]).abs() + eta;
                    let old_d = (old - x[k]).abs() + eta;
                    dh += 2.0 * (new_d.ln() - old_d.ln());
                }
            }
            dh += 2.0 * nf * (pot.value(j, xj_new) - pot.value(j, old));
        }
        dh
    }
}

/// Output of one Metropolis run.
#[derive(Debug, Clone)]
pub struct MetropolisRun {
    pub samples: Vec<Vec<f64>>,
    pub acceptance: f64,
    pub sigma: f64,
    /// Integrated-autocorrelation estimate of the effective sample size
    /// (based on the mean-gap observable).
    pub ess: f64,
}

impl MetropolisRun {
    /// All nearest-neighbor gaps pooled over the kept samples.
    pub fn gaps(&self) -> Vec<f64> {
        self.samples
            .iter()
            .flat_map(|x| x.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>())
            .collect()
    }

    /// Stationarity sanity check: KS distance between first- and second-half
    /// gap samples against twice the expected sampling fluctuation.
    pub fn stationarity_check(&self) -> (f64, f64, bool) {
        let gaps = self.gaps();
        let half = gaps.len() / 2;
        let d = crate::numeric::ks_two_sample(&gaps[..half], &gaps[half..]);
        // the pooled gaps are correlated within a configuration; allow an
        // extra factor sqrt(N-1) of effective-sample reduction
        let m = (half as f64 / (self.samples[0].len() as f64 - 1.0)).max(1.0);
        let threshold = 2.0 * 1.36 * (2.0 / m).sqrt();
        (d, threshold, d < threshold)
    }
}

/// Random-walk Metropolis on the ordered simplex with per-coordinate
/// proposals. Crossing proposals are rejected outright; the proposal width is
/// tuned during burn-in and frozen afterwards.
pub fn metropolis_sample(
    spec: &GibbsSpec,
    n_samples: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> Result<MetropolisRun> {
    if spec.n > 64 {
        return Err(Error::Config(format!(
            "Metropolis oracle is for N <= 64, got {}",
            spec.n
        )));
    }
    let n = spec.n;
    let thinning = thinning.max(1);
    let mut rng = StreamRng::new(seed, 0, 0);
    let mut x = spec.gamma.clone();
    let mut sigma = 2.0 / n as f64;

    let mut accepted = 0u64;
    let mut attempted = 0u64;

    // burn-in with width tuning every 25 sweeps
    let mut tune_acc = 0u64;
    let mut tune_att = 0u64;
    for sweep in 0..burn_in {
        let (a, t) = metropolis_sweep(spec, &mut x, sigma, &mut rng);
        tune_acc += a;
        tune_att += t;
        if (sweep + 1) % 25 == 0 {
            let rate = tune_acc as f64 / tune_att.max(1) as f64;
            if rate < 0.25 {
                sigma *= 0.7;
            } else if rate > 0.5 {
                sigma *= 1.3;
            }
            tune_acc = 0;
            tune_att = 0;
        }
    }

    let mut samples = Vec::with_capacity(n_samples);
    while samples.len() < n_samples {
        for _ in 0..thinning {
            let (a, t) = metropolis_sweep(spec, &mut x, sigma, &mut rng);
            accepted += a;
            attempted += t;
        }
        samples.push(x.clone());
    }
    let acceptance = accepted as f64 / attempted.max(1) as f64;
    if !(0.1..=0.7).contains(&acceptance) {
        return Err(Error::Tuning { rate: acceptance });
    }

    // crude integrated autocorrelation of the mean gap
    let obs: Vec<f64> = samples
        .iter()
        .map(|x| (x[n - 1] - x[0]) / (n as f64 - 1.0))
        .collect();
    let ess = effective_sample_size(&obs);

    Ok(MetropolisRun {
        samples,
        acceptance,
        sigma,
        ess,
    })
}

fn metropolis_sweep(
    spec: &GibbsSpec,
    x: &mut [f64],
    sigma: f64,
    rng: &mut StreamRng,
) -> (u64, u64) {
    let n = x.len();
    let mut accepted = 0;
    for j in 0..n {
        let step = sigma * rng.next_normal();
        let u: f64 = rng.next_uniform();
        let proposal = x[j] + step;
        // reject collision-crossing proposals
        if j > 0 && proposal <= x[j - 1] {
            continue;
        }
        if j + 1 < n && proposal >= x[j + 1] {
            continue;
        }
        let dh = spec.delta_hamiltonian(x, j, proposal);
        if dh <= 0.0 || u < (-dh).exp() {
            x[j] = proposal;
            accepted += 1;
        }
    }
    (accepted, n as u64)
}

fn effective_sample_size(obs: &[f64]) -> f64 {
    let m = obs.len();
    if m < 10 {
        return m as f64;
    }
    let mean = obs.iter().sum::<f64>() / m as f64;
    let var: f64 = obs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64;
    if var == 0.0 {
        return m as f64;
    }
    let mut tau = 1.0;
    for lag in 1..(m / 4) {
        let mut c = 0.0;
        for i in 0..m - lag {
            c += (obs[i] - mean) * (obs[i + lag] - mean);
        }
        c /= (m - lag) as f64 * var;
        if c <= 0.0 {
            break;
        }
        tau += 2.0 * c;
    }
    m as f64 / tau
}

// ---------------------------------------------------------------------------
// N = 2 gap-coordinate Fokker-Planck solver
// ---------------------------------------------------------------------------

/// The N=2 measure reduced to the gap coordinate along the frozen-center
/// slice x = (c - g/2, c + g/2), c = (gamma_1 + gamma_2)/2. The slice drift
/// is the projection of the full drift, so the reduced flow
///   dq/dt = (1/N) (1/w) d/dg ( w dq/dg ),  w = exp(-U(g))
/// is the gap dynamics of the relaxation flow with the center mode frozen.
#[derive(Debug, Clone)]
pub struct GapModel {
    pub beta: f64,
    pub eta: f64,
    /// Grid nodes in the gap coordinate.
    pub nodes: Vec<f64>,
    /// Normalized reference density at the nodes (the "omega" weight).
    pub weight: Vec<f64>,
    /// Trapezoid cell measures (dg weights).
    pub cell: Vec<f64>,
    /// Unnormalized log-weight, kept for diagnostics.
    pub log_weight: Vec<f64>,
}

/// Grid on [1e-4, 6]: one stub cell to 1e-3, geometric refinement through the
/// repulsion region, uniform beyond.
pub fn gap_grid() -> Vec<f64> {
    let mut g = vec![1e-4];
    let mut x: f64 = 1e-3;
    while x < 0.5 {
        g.push(x);
        x *= 1.5;
    }
    let start = *g.last().unwrap() + 0.01;
    let mut x = start;
    while x <= 6.0 + 1e-12 {
        g.push(x);
        x += 0.01;
    }
    g
}

/// Coarser variant for the quick tier: same domain, larger cells, so the
/// explicit CFL step is ~100x bigger.
pub fn gap_grid_coarse() -> Vec<f64> {
    let mut g = vec![1e-4];
    let mut x: f64 = 1e-2;
    while x < 0.5 {
        g.push(x);
        x *= 1.5;
    }
    let start = *g.last().unwrap() + 0.04;
    let mut x = start;
    while x <= 6.0 + 1e-12 {
        g.push(x);
        x += 0.04;
    }
    g
}

impl GapModel {
    /// Build the reduced model from a Gibbs spec with N = 2.
    pub fn new(spec: &GibbsSpec, nodes: Vec<f64>) -> Result<Self> {
        if spec.n != 2 {
            return Err(Error::Config(format!(
                "gap reduction is defined for N = 2, got {}",
                spec.n
            )));
        }
        let eta = match spec.kind {
            GibbsKind::Omega { eta } => eta,
            GibbsKind::Mu => 0.0,
        };
        let c = 0.5 * (spec.gamma[0] + spec.gamma[1]);
        let log_weight: Vec<f64> = nodes
            .iter()
            .map(|&g| -spec.hamiltonian(&[c - 0.5 * g, c + 0.5 * g]))
            .collect();
        let max_lw = log_weight.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut weight: Vec<f64> = log_weight.iter().map(|lw| (lw - max_lw).exp()).collect();
        let cell = trapezoid_cells(&nodes);
        let z: f64 = weight.iter().zip(&cell).map(|(w, c)| w * c).sum();
        for w in weight.iter_mut() {
            *w /= z;
        }
        Ok(GapModel {
            beta: spec.beta,
            eta,
            nodes,
            weight,
            cell,
            log_weight,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn trapezoid_cells(nodes: &[f64]) -> Vec<f64> {
    let m = nodes.len();
    let mut cell = vec![0.0; m];
    for i in 0..m {
        let left = if i > 0 { nodes[i] - nodes[i - 1] } else { 0.0 };
        let right = if i + 1 < m { nodes[i + 1] - nodes[i] } else { 0.0 };
        cell[i] = 0.5 * (left + right);
    }
    cell
}

/// A density q relative to the model weight, with its time stamp.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub q: Vec<f64>,
    pub time: f64,
}

impl DensityGrid {
    /// Equilibrium start q = 1.
    pub fn equilibrium(model: &GapModel) -> Self {
        DensityGrid {
            q: vec![1.0; model.len()],
            time: 0.0,
        }
    }

    /// The mu gap law relative to omega: q0 = (w_mu / w_omega), normalized.
    /// Bounded because the log singularities cancel.
    pub fn mu_relative(model: &GapModel, spec_omega: &GibbsSpec) -> Result<Self> {
        let mu = GibbsSpec::mu(spec_omega.beta, 2)?;
        let c = 0.5 * (spec_omega.gamma[0] + spec_omega.gamma[1]);
        let log_mu: Vec<f64> = model
            .nodes
            .iter()
            .map(|&g| -mu.hamiltonian(&[c - 0.5 * g, c + 0.5 * g]))
            .collect();
        let mut q: Vec<f64> = log_mu
            .iter()
            .zip(&model.log_weight)
            .map(|(lm, lw)| (lm - lw).exp())
            .collect();
        let z: f64 = q
            .iter()
            .zip(&model.weight)
            .zip(&model.cell)
            .map(|((q, w), c)| q * w * c)
            .sum();
        for v in q.iter_mut() {
            *v /= z;
        }
        Ok(DensityGrid { q, time: 0.0 })
    }

    /// Gaussian bump perturbation of equilibrium, normalized.
    pub fn bump(model: &GapModel, center: f64, width: f64, amplitude: f64) -> Self {
        let mut q: Vec<f64> = model
            .nodes
            .iter()
            .map(|&g| 1.0 + amplitude * (-0.5 * ((g - center) / width).powi(2)).exp())
            .collect();
        let z: f64 = q
            .iter()
            .zip(&model.weight)
            .zip(&model.cell)
            .map(|((q, w), c)| q * w * c)
            .sum();
        for v in q.iter_mut() {
            *v /= z;
        }
        DensityGrid { q, time: 0.0 }
    }

    /// Mass with respect to the model weight (should stay 1).
    pub fn mass(&self, model: &GapModel) -> f64 {
        self.q
            .iter()
            .zip(&model.weight)
            .zip(&model.cell)
            .map(|((q, w), c)| q * w * c)
            .sum()
    }

    /// Relative entropy S = int q log q d omega (0 log 0 = 0).
    pub fn entropy(&self, model: &GapModel) -> f64 {
        self.q
            .iter()
            .zip(&model.weight)
            .zip(&model.cell)
            .map(|((&q, w), c)| if q > 0.0 { q * q.ln() * w * c } else { 0.0 })
            .sum()
    }
}

/// Dirichlet form D(sqrt q) = (1/N) int (d sqrt(q)/dg)^2 d omega on the grid
/// (central differences; N = 2). This matches sum_j (1/2N) int (d_j f)^2 with
/// both coordinates collapsed onto the gap.
pub fn dirichlet_form(grid: &DensityGrid, model: &GapModel) -> f64 {
    let m = model.len();
    let root: Vec<f64> = grid.q.iter().map(|&q| q.max(0.0).sqrt()).collect();
    let mut total = 0.0;
    for i in 0..m {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == m - 1 {
            (m - 2, m - 1)
        } else {
            (i - 1, i + 1)
        };
        let slope = (root[hi] - root[lo]) / (model.nodes[hi] - model.nodes[lo]);
        total += 0.5 * slope * slope * model.weight[i] * model.cell[i];
    }
    total
}

/// Entropy-decay record of one Fokker-Planck run.
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub eta: f64,
    pub beta: f64,
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub dirichlet: Vec<f64>,
    pub mass_error: f64,
    /// Fitted exponential decay rate of the entropy tail.
    pub rate: f64,
    pub dt: f64,
    pub steps: u64,
}

/// Evolve dq/dt = (1/N)(1/w)(w q')' by conservative explicit finite
/// differences until `t_max` or until the entropy has decayed by e^-4,
/// recording (t, S, D) at `n_outputs` checkpoints.
///
/// `dt_request` of None picks 0.9x the stability bound; an explicit request
/// above the bound is a step-size error.
pub fn fokker_planck_decay(
    model: &GapModel,
    q0: &DensityGrid,
    t_max: f64,
    n_outputs: usize,
    dt_request: Option<f64>,
) -> Result<DecayReport> {
    let m = model.len();
    assert_eq!(q0.q.len(), m);
    let nf = 2.0; // N = 2 reduction
    let w = &model.weight;
    let g = &model.nodes;

    // interface conductances c_{i+1/2} = w_{i+1/2} / dg_{i+1/2}
    let mut cond = vec![0.0; m - 1];
    for i in 0..m - 1 {
        let wmid = 0.5 * (w[i] + w[i + 1]);
        cond[i] = wmid / (g[i + 1] - g[i]);
    }
    // stability: dt * max_i (sum of neighbor conductances)/(N w_i cell_i) <= 1
    let mut max_diag: f64 = 0.0;
    for i in 0..m {
        let mut s = 0.0;
        if i > 0 {
            s += cond[i - 1];
        }
        if i < m - 1 {
            s += cond[i];
        }
        max_diag = max_diag.max(s / (nf * w[i] * model.cell[i]));
    }
    let bound = 1.0 / max_diag;
    let dt = match dt_request {
        Some(dt) if dt > bound => return Err(Error::Cfl { dt, bound }),
        Some(dt) => dt,
        None => 0.9 * bound,
    };

    let mut q = q0.q.clone();
    let mut time = 0.0;
    let s0 = DensityGrid { q: q.clone(), time }.entropy(model);
    let mass0 = DensityGrid { q: q.clone(), time }.mass(model);

    let out_every = (t_max / n_outputs.max(2) as f64).max(dt);
    let mut times = Vec::new();
    let mut entropy = Vec::new();
    let mut dirichlet = Vec::new();
    let mut mass_error: f64 = 0.0;
    let mut steps = 0u64;
    let mut next_out = 0.0;
    let mut flux = vec![0.0; m - 1];

    loop {
        if time >= next_out - 1e-12 {
            let grid = DensityGrid { q: q.clone(), time };
            let s = grid.entropy(model);
            times.push(time);
            entropy.push(s);
            dirichlet.push(dirichlet_form(&grid, model));
            mass_error = mass_error.max((grid.mass(model) - mass0).abs());
            next_out += out_every;
            if s < s0 * 1.8e-2 || time >= t_max {
                break;
            }
        }
        for i in 0..m - 1 {
            flux[i] = cond[i] * (q[i + 1] - q[i]);
        }
        for i in 0..m {
            let mut div = 0.0;
            if i < m - 1 {
                div += flux[i];
            }
            if i > 0 {
                div -= flux[i - 1];
            }
            q[i] += dt * div / (nf * w[i] * model.cell[i]);
        }
        time += dt;
        steps += 1;
    }

    // fit the exponential tail: ln S linear in t over S/S0 in [e^-4, e^-1]
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, s) in times.iter().zip(&entropy) {
        if *s > 0.0 && *s < s0 * (-1.0f64).exp() && *s > s0 * (-4.0f64).exp() {
            xs.push(*t);
            ys.push(s.ln());
        }
    }
    let rate = if xs.len() >= 3 {
        let wts = vec![1.0; xs.len()];
        let (slope, _, _) = crate::numeric::weighted_line_fit(&xs, &ys, &wts);
        -slope
    } else {
        f64::NAN
    };

    Ok(DecayReport {
        eta: model.eta,
        beta: model.beta,
        times,
        entropy,
        dirichlet,
        mass_error,
        rate,
        dt,
        steps,
    })
}
