//! Trajectory ensembles: observable accumulation on a time grid, series
//! comparison and the Δt scan of the sampling variance.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{sample_initial, InitialStateSpec, Representation, StepConfig, Stepper};
use crate::model::{ModelParams, PhasePoint};
use crate::noise::{RngStream, SigmaParams};

/// Observables recorded on the grid, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    /// Re(α + α†), the signal quadrature.
    Xa,
    /// Re(α†α). Symmetrically ordered (⟨a†a⟩ + 1/2) in the Wigner family.
    Na,
    /// Re(β + β†)
    Xb,
}

impl Observable {
    pub const ALL: [Observable; 3] = [Observable::Xa, Observable::Na, Observable::Xb];

    pub fn index(self) -> usize {
        self as usize
    }

    fn evaluate(x: &PhasePoint) -> [f64; 3] {
        [x.quadrature_a().re, x.photon_number_a().re, x.quadrature_b().re]
    }
}

/// Exact fixed-point sum: every added value is split into a coarse part in
/// units of 2^32 and a fine part in units of 2^-64, both accumulated in
/// integers, so addition is associative and commutative bit-for-bit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct ExactSum {
    coarse: i128,
    fine: i128,
}

const TWO_32: f64 = 4_294_967_296.0;
const TWO_64: f64 = 18_446_744_073_709_551_616.0;

impl ExactSum {
    #[inline]
    fn add(&mut self, x: f64) {
        debug_assert!(x.is_finite() && x.abs() < 2f64.powi(100));
        let coarse = (x / TWO_32).trunc();
        // exact: |rem| < 2^32 and shares the ulp grid of x
        let rem = x - coarse * TWO_32;
        self.coarse += coarse as i128;
        self.fine += (rem * TWO_64).round() as i128;
    }

    fn merge(&mut self, other: &ExactSum) {
        self.coarse += other.coarse;
        self.fine += other.fine;
    }

    fn value(&self) -> f64 {
        self.coarse as f64 * TWO_32 + self.fine as f64 / TWO_64
    }
}

/// Mergeable per-grid-point statistics of the three observables.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    times: Vec<f64>,
    n_traj: u64,
    count: Vec<u64>,
    sum: Vec<[ExactSum; 3]>,
    sum_sq: Vec<[ExactSum; 3]>,
    /// Trajectories that diverged at or before each grid point.
    diverged: Vec<u64>,
}

impl Accumulator {
    pub fn new(times: Vec<f64>) -> Self {
        let n = times.len();
        Accumulator {
            times,
            n_traj: 0,
            count: vec![0; n],
            sum: vec![[ExactSum::default(); 3]; n],
            sum_sq: vec![[ExactSum::default(); 3]; n],
            diverged: vec![0; n],
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_traj(&self) -> u64 {
        self.n_traj
    }

    pub fn count(&self, k: usize) -> u64 {
        self.count[k]
    }

    pub fn diverged_count(&self, k: usize) -> u64 {
        self.diverged[k]
    }

    /// Starts a new trajectory.
    pub fn begin_trajectory(&mut self) {
        self.n_traj += 1;
    }

    pub fn record(&mut self, k: usize, x: &PhasePoint) {
        self.record_values(k, Observable::evaluate(x));
    }

    pub fn record_values(&mut self, k: usize, values: [f64; 3]) {
        self.count[k] += 1;
        for (o, v) in values.into_iter().enumerate() {
            self.sum[k][o].add(v);
            self.sum_sq[k][o].add(v * v);
        }
    }

    /// Freezes the current trajectory out of grid point `k` and beyond.
    pub fn mark_diverged_from(&mut self, k: usize) {
        for d in &mut self.diverged[k..] {
            *d += 1;
        }
    }

    pub fn merge(&mut self, other: &Accumulator) -> Result<()> {
        if self.times != other.times {
            return Err(Error::Contract(format!(
                "cannot merge accumulators on different grids ({} vs {} points)",
                self.times.len(),
                other.times.len()
            )));
        }
        self.n_traj += other.n_traj;
        for k in 0..self.times.len() {
            self.count[k] += other.count[k];
            self.diverged[k] += other.diverged[k];
            for o in 0..3 {
                self.sum[k][o].merge(&other.sum[k][o]);
                self.sum_sq[k][o].merge(&other.sum_sq[k][o]);
            }
        }
        Ok(())
    }

    pub fn merged(mut self, other: &Accumulator) -> Result<Self> {
        self.merge(other)?;
        Ok(self)
    }

    /// Means and standard errors over the live trajectories at each grid
    /// point. Points where nothing survives are cut off and flagged.
    pub fn finish(&self, label: &str) -> ObservableSeries {
        let mut series = ObservableSeries {
            label: label.to_string(),
            times: Vec::new(),
            mean: Default::default(),
            stderr: Default::default(),
            n_effective: Vec::new(),
            diverged_fraction: Vec::new(),
            truncated: false,
        };
        for k in 0..self.times.len() {
            let n = self.count[k];
            if n == 0 {
                series.truncated = true;
                break;
            }
            let nf = n as f64;
            series.times.push(self.times[k]);
            for o in 0..3 {
                let mean = self.sum[k][o].value() / nf;
                let var = if n > 1 {
                    ((self.sum_sq[k][o].value() / nf - mean * mean) * nf / (nf - 1.0)).max(0.0)
                } else {
                    0.0
                };
                series.mean[o].push(mean);
                series.stderr[o].push((var / nf).sqrt());
            }
            series.n_effective.push(n);
            series.diverged_fraction.push(self.diverged[k] as f64 / self.n_traj.max(1) as f64);
        }
        series
    }
}

/// Means and standard errors of the observables on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub label: String,
    pub times: Vec<f64>,
    /// Indexed by [`Observable::index`], then by grid point.
    pub mean: [Vec<f64>; 3],
    pub stderr: [Vec<f64>; 3],
    pub n_effective: Vec<u64>,
    pub diverged_fraction: Vec<f64>,
    /// Set when every trajectory diverged before the end of the grid.
    pub truncated: bool,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mean(&self, o: Observable) -> &[f64] {
        &self.mean[o.index()]
    }

    pub fn stderr(&self, o: Observable) -> &[f64] {
        &self.stderr[o.index()]
    }

    /// Diverged fraction at the last grid point.
    pub fn final_diverged_fraction(&self) -> f64 {
        self.diverged_fraction.last().copied().unwrap_or(1.0)
    }

    /// Grid points with t ≤ `t_max` (plus a relative slack of 1e-9).
    pub fn window(&self, t_max: f64) -> ObservableSeries {
        let keep = self.times.iter().take_while(|&&t| t <= t_max * (1.0 + 1e-9) + 1e-12).count();
        let cut = |v: &Vec<f64>| v[..keep].to_vec();
        ObservableSeries {
            label: self.label.clone(),
            times: cut(&self.times),
            mean: [cut(&self.mean[0]), cut(&self.mean[1]), cut(&self.mean[2])],
            stderr: [cut(&self.stderr[0]), cut(&self.stderr[1]), cut(&self.stderr[2])],
            n_effective: self.n_effective[..keep].to_vec(),
            diverged_fraction: cut(&self.diverged_fraction),
            truncated: self.truncated,
        }
    }
}

/// Everything one ensemble run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub step: StepConfig,
    /// Required for positive-W, ignored otherwise.
    pub sigma: Option<SigmaParams>,
    pub initial: InitialStateSpec,
    pub n_traj: u64,
    pub t_end: f64,
    pub record_every: u64,
    pub seed: u64,
    pub chi: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::InvalidParameter("n_traj must be >= 1".into()));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("t_end must be > 0, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        if !(self.chi.is_finite() && self.chi > 0.0) {
            return Err(Error::InvalidParameter(format!("chi must be > 0, got {}", self.chi)));
        }
        Stepper::new(self.model, self.sigma, self.step)?;
        Ok(())
    }

    /// floor(t_end / (dt·record_every)) + 1
    pub fn n_points(&self) -> usize {
        let ratio = self.t_end / (self.step.dt() * self.record_every as f64);
        (ratio * (1.0 + 1e-12)).floor() as usize + 1
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.step.dt() * self.record_every as f64;
        (0..self.n_points()).map(|k| k as f64 * h).collect()
    }

    pub fn representation(&self) -> Representation {
        self.step.representation()
    }
}

const CHUNK: u64 = 2048;

/// Integrates trajectories `range` (trajectory index = stream id) into an
/// accumulator. Any partition of the index range merges back to exactly the
/// same statistics.
pub fn run_trajectories(cfg: &RunConfig, range: Range<u64>) -> Result<Accumulator> {
    cfg.validate()?;
    let stepper = Stepper::new(cfg.model, cfg.sigma, cfg.step)?;
    let times = cfg.times();
    let n_chunks = (range.end.saturating_sub(range.start)).div_ceil(CHUNK);
    let parts: Vec<Accumulator> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = range.start + c * CHUNK;
            let hi = (lo + CHUNK).min(range.end);
            let mut acc = Accumulator::new(times.clone());
            for idx in lo..hi {
                integrate_one(cfg, &stepper, idx, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = Accumulator::new(times);
    for p in &parts {
        total.merge(p)?;
    }
    Ok(total)
}

fn integrate_one(cfg: &RunConfig, stepper: &Stepper, idx: u64, acc: &mut Accumulator) {
    let mut rng = RngStream::new(cfg.seed, idx);
    let mut x = sample_initial(&cfg.initial, cfg.representation(), &mut rng);
    acc.begin_trajectory();
    if !x.is_finite() || x.max_norm() > crate::integrators::DIVERGENCE_BOUND {
        acc.mark_diverged_from(0);
        return;
    }
    acc.record(0, &x);
    for k in 1..acc.times().len() {
        for _ in 0..cfg.record_every {
            match stepper.step(&x, &mut rng) {
                Ok(y) => x = y,
                Err(_) => {
                    acc.mark_diverged_from(k);
                    return;
                }
            }
        }
        acc.record(k, &x);
    }
}

/// Runs the whole ensemble and reduces it to means and standard errors of
/// Re(α + α†), Re(α†α) and Re(β + β†).
pub fn run_ensemble(cfg: &RunConfig) -> Result<ObservableSeries> {
    let acc = run_trajectories(cfg, 0..cfg.n_traj)?;
    Ok(acc.finish(cfg.representation().as_str()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// max_t |a − b| / sqrt(se_a² + se_b²)
    pub max_deviation: f64,
    pub t_at_max: f64,
    pub index: usize,
}

/// Points where both standard errors vanish (deterministic starts, oracle
/// series) count as agreeing when their means match to this relative
/// tolerance, and as infinitely far apart otherwise.
pub const EXACT_POINT_RTOL: f64 = 1e-12;

/// Normalized per-point deviations |a − b|/sqrt(se_a² + se_b²) of one
/// observable. Fails unless both series sit on the same grid.
pub fn normalized_deviations(
    a: &ObservableSeries,
    b: &ObservableSeries,
    obs: Observable,
) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "series grids differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    for (ta, tb) in a.times.iter().zip(&b.times) {
        if (ta - tb).abs() > 1e-9 * ta.abs().max(1.0) {
            return Err(Error::Contract(format!("series grids differ: t = {ta} vs {tb}")));
        }
    }
    let (ma, sa) = (a.mean(obs), a.stderr(obs));
    let (mb, sb) = (b.mean(obs), b.stderr(obs));
    Ok((0..a.len())
        .map(|k| {
            let diff = (ma[k] - mb[k]).abs();
            let se = sa[k].hypot(sb[k]);
            if se > 0.0 {
                diff / se
            } else if diff <= EXACT_POINT_RTOL * ma[k].abs().max(mb[k].abs()).max(1.0) {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect())
}

pub fn compare_series(a: &ObservableSeries, b: &ObservableSeries, obs: Observable) -> Result<Comparison> {
    let dev = normalized_deviations(a, b, obs)?;
    let (index, max_deviation) = dev
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |best, (k, d)| if d > best.1 { (k, d) } else { best });
    Ok(Comparison {
        max_deviation,
        t_at_max: a.times.get(index).copied().unwrap_or(0.0),
        index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub dt: f64,
    /// Sample variance of Re(α + α†) at t_end, i.e. n × the variance of the
    /// ensemble-mean estimator.
    pub variance: f64,
    pub diverged_fraction: f64,
    /// Set when the run diverged completely; such points are not fitted.
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceScan {
    pub points: Vec<ScanPoint>,
    /// Least-squares slope of ln(variance) against ln(dt).
    pub slope: f64,
}

impl DivergenceScan {
    /// Variance does not increase as dt grows (points ordered by dt).
    pub fn is_monotone(&self) -> bool {
        let mut pts: Vec<&ScanPoint> = self.points.iter().filter(|p| !p.excluded).collect();
        pts.sort_by(|a, b| a.dt.total_cmp(&b.dt));
        pts.windows(2).all(|w| w[1].variance <= w[0].variance)
    }
}

/// Repeats a positive-W run at each dt (same n_traj, t_end, seed) and fits
/// how the sampling variance of the quadrature at t_end scales with dt.
pub fn divergence_scan(base: &RunConfig, dt_list: &[f64]) -> Result<DivergenceScan> {
    if dt_list.len() < 4 {
        return Err(Error::Contract(format!("need at least 4 dt values, got {}", dt_list.len())));
    }
    if base.representation() != Representation::PositiveW {
        return Err(Error::Contract("divergence_scan needs the positive_w representation".into()));
    }
    let mut points = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let steps = base.t_end / dt;
        let rounded = steps.round();
        if rounded < 1.0 || (steps - rounded).abs() > 1e-9 * rounded {
            return Err(Error::InvalidParameter(format!(
                "t_end = {} is not a whole number of steps of dt = {dt}",
                base.t_end
            )));
        }
        let step = StepConfig::new(dt, Representation::PositiveW)?.with_noise(base.step.noise());
        let cfg = RunConfig {
            step,
            record_every: rounded as u64,
            ..base.clone()
        };
        let series = run_ensemble(&cfg)?;
        let last = series.len().saturating_sub(1);
        let excluded = series.truncated || series.is_empty();
        let variance = if excluded {
            f64::NAN
        } else {
            let se = series.stderr(Observable::Xa)[last];
            se * se * series.n_effective[last] as f64
        };
        points.push(ScanPoint {
            dt,
            variance,
            diverged_fraction: if excluded { 1.0 } else { series.diverged_fraction[last] },
            excluded,
        });
    }
    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !p.excluded && p.variance > 0.0)
        .map(|p| (p.dt.ln(), p.variance.ln()))
        .collect();
    if fit.len() < 2 {
        return Err(Error::AllDiverged {
            n_traj: base.n_traj,
            t: base.t_end,
        });
    }
    Ok(DivergenceScan {
        slope: least_squares_slope(&fit),
        points,
    })
}

fn least_squares_slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
