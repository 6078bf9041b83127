//! Batched Monte Carlo estimation of chain observables.
//!
//! Trials are cut into fixed-size batches. Batch `b` of a cell draws from the
//! stream `mix64(cell_key ^ mix64(b))` under the run seed, and batch statistics
//! are merged in batch order, so a result depends only on `(cell, trials, seed)`
//! and never on how many worker threads ran it.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::ChainRecord;
use crate::error::{Error, Result};
use crate::nspin::{Encoding, NSpinChain};
use crate::qubit::{simulate_chain_single, AzimuthPolicy, MeasurementScheme, QubitKrausFamily};
use crate::rng::{fnv1a, mix64, RandomStream};

pub const BATCH_SIZE: usize = 4096;

/// A chain of observers to be simulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    SingleQubit {
        family: QubitKrausFamily,
        scheme: MeasurementScheme,
    },
    NSpin {
        spins: usize,
        encoding: Encoding,
    },
}

impl Model {
    pub fn optimal_qubit() -> Self {
        Model::SingleQubit {
            family: QubitKrausFamily::optimal(),
            scheme: MeasurementScheme::Covariant,
        }
    }

    /// Canonical text used to derive the random-stream key of a cell.
    fn key_text(&self, k: usize) -> String {
        match self {
            Model::SingleQubit { family, scheme } => {
                let policy = match family.azimuth_policy() {
                    AzimuthPolicy::Fixed(a) => format!("fixed:{:016x}", a.to_bits()),
                    AzimuthPolicy::Random => "random".to_string(),
                };
                format!(
                    "single_qubit|{scheme:?}|{:016x}|{policy}|k={k}",
                    family.offset_angle().to_bits()
                )
            }
            Model::NSpin { spins, encoding } => format!("nspin|{encoding:?}|N={spins}|k={k}"),
        }
    }

    pub fn stream_key(&self, k: usize) -> u64 {
        mix64(fnv1a(self.key_text(k).as_bytes()))
    }
}

enum Simulator {
    Qubit {
        family: QubitKrausFamily,
        scheme: MeasurementScheme,
    },
    NSpin(NSpinChain),
}

impl Simulator {
    fn new(model: &Model) -> Result<Self> {
        Ok(match *model {
            Model::SingleQubit { family, scheme } => Simulator::Qubit { family, scheme },
            Model::NSpin { spins, encoding } => Simulator::NSpin(NSpinChain::new(spins, encoding)?),
        })
    }

    fn run(&self, k: usize, rng: &mut RandomStream) -> Result<ChainRecord> {
        match self {
            Simulator::Qubit { family, scheme } => simulate_chain_single(k, family, *scheme, rng),
            Simulator::NSpin(chain) => chain.simulate(k, rng),
        }
    }
}

/// Running mean and co-moment matrix of a fixed-width sample vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    count: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl Moments {
    pub fn new(width: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; width],
            comoment: vec![0.0; width * width],
        }
    }

    fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn push(&mut self, x: &[f64]) {
        let w = self.width();
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for (i, (xi, mi)) in x.iter().zip(&self.mean).enumerate() {
            let di = xi - mi;
            for (c, dj) in self.comoment[i * w..(i + 1) * w].iter_mut().zip(&delta) {
                *c += dj * di;
            }
        }
    }

    /// Chan et al. pairwise merge.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let w = self.width();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other
            .mean
            .iter()
            .zip(&self.mean)
            .map(|(b, a)| b - a)
            .collect();
        for i in 0..w {
            self.mean[i] += delta[i] * nb / n;
            for j in 0..w {
                self.comoment[i * w + j] +=
                    other.comoment[i * w + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    /// Sample covariance; `None` below two samples.
    pub fn covariance(&self, i: usize, j: usize) -> Option<f64> {
        (self.count >= 2).then(|| self.comoment[i * self.width() + j] / (self.count as f64 - 1.0))
    }

    /// Sample standard deviation over `√trials`.
    pub fn stderr(&self, i: usize) -> Option<f64> {
        self.covariance(i, i)
            .map(|v| (v.max(0.0) / self.count as f64).sqrt())
    }
}

/// Mean of one observable with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// `None` when `trials < 2`.
    pub stderr: Option<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl McEstimate {
    /// `(mean − expected)/stderr`; `None` when the standard error is missing or zero.
    pub fn z_score(&self, expected: f64) -> Option<f64> {
        match self.stderr {
            Some(se) if se > 0.0 => Some((self.mean - expected) / se),
            Some(_) if self.mean == expected => Some(0.0),
            _ => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.stderr.is_none()
    }
}

/// Per-observer statistics of a simulated chain.
///
/// Sample slot `j` holds `n̂·m̂_{j+1}`; slot `k + j` holds the overlap of the
/// axis handed on by observer `j+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStats {
    pub k: usize,
    pub seed: u64,
    pub moments: Moments,
}

impl ChainStats {
    fn estimate_at(&self, slot: usize) -> McEstimate {
        McEstimate {
            mean: self.moments.mean(slot),
            stderr: self.moments.stderr(slot),
            trials: self.moments.count(),
            seed: self.seed,
        }
    }

    /// `Δ̂_j` for observer `j` (1-based).
    pub fn delta(&self, observer: usize) -> McEstimate {
        self.estimate_at(observer - 1)
    }

    /// Projection of the mean handed-on state after observer `j` on `n̂`.
    pub fn state_shrink(&self, observer: usize) -> McEstimate {
        self.estimate_at(self.k + observer - 1)
    }

    /// `Δ̂_j / Δ̂_{j−1}` with a delta-method standard error from the paired samples.
    pub fn step_ratio(&self, observer: usize) -> Option<(f64, f64)> {
        if observer < 2 {
            return None;
        }
        let (a, b) = (observer - 1, observer - 2);
        let (ma, mb) = (self.moments.mean(a), self.moments.mean(b));
        let ratio = ma / mb;
        let var = (self.moments.covariance(a, a)? - 2.0 * ratio * self.moments.covariance(a, b)?
            + ratio * ratio * self.moments.covariance(b, b)?)
            / (mb * mb * self.moments.count() as f64);
        Some((ratio, var.max(0.0).sqrt()))
    }
}

/// Execution knobs shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Workers(pub Option<usize>);

impl Workers {
    pub fn install<R: Send>(&self, job: impl FnOnce() -> R + Send) -> Result<R> {
        match self.0 {
            None | Some(0) => Ok(job()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                Ok(pool.install(job))
            }
        }
    }
}

/// One unit of work: a cell and its batches.
#[derive(Debug, Clone, Copy)]
pub struct CellJob {
    pub model: Model,
    pub k: usize,
    pub trials: u64,
}

fn batch_count(trials: u64) -> u64 {
    trials.div_ceil(BATCH_SIZE as u64)
}

fn run_batch(sim: &Simulator, job: &CellJob, seed: u64, batch: u64) -> Result<Moments> {
    let key = job.model.stream_key(job.k);
    let mut rng = RandomStream::new(seed, mix64(key ^ mix64(batch)));
    let start = batch * BATCH_SIZE as u64;
    let size = (job.trials - start).min(BATCH_SIZE as u64);
    let mut moments = Moments::new(2 * job.k);
    let mut sample = vec![0.0; 2 * job.k];
    for _ in 0..size {
        let record = sim.run(job.k, &mut rng)?;
        sample[..job.k].copy_from_slice(&record.dots);
        sample[job.k..].copy_from_slice(&record.prepared_dots);
        moments.push(&sample);
    }
    Ok(moments)
}

/// Runs several cells, all batches in parallel, merging in deterministic order.
pub fn run_cells(jobs: &[CellJob], seed: u64, workers: Workers) -> Result<Vec<ChainStats>> {
    for job in jobs {
        if job.k == 0 {
            return Err(Error::NoObservers);
        }
        if job.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
    }
    let sims = jobs
        .iter()
        .map(|j| Simulator::new(&j.model))
        .collect::<Result<Vec<_>>>()?;
    let units: Vec<(usize, u64)> = jobs
        .iter()
        .enumerate()
        .flat_map(|(c, j)| (0..batch_count(j.trials)).map(move |b| (c, b)))
        .collect();

    let batches: Vec<Result<Moments>> = workers.install(|| {
        units
            .par_iter()
            .map(|&(c, b)| run_batch(&sims[c], &jobs[c], seed, b))
            .collect()
    })?;

    let mut out: Vec<ChainStats> = jobs
        .iter()
        .map(|j| ChainStats {
            k: j.k,
            seed,
            moments: Moments::new(2 * j.k),
        })
        .collect();
    for (&(c, _), batch) in units.iter().zip(batches) {
        out[c].moments.merge(&batch?);
    }
    Ok(out)
}

pub fn run_chain(
    model: Model,
    k: usize,
    trials: u64,
    seed: u64,
    workers: Workers,
) -> Result<ChainStats> {
    Ok(run_cells(&[CellJob { model, k, trials }], seed, workers)?.remove(0))
}

/// Monte Carlo estimate of `Δ_k = E[n̂·m̂_k]`.
pub fn mc_estimate_delta(
    model: Model,
    k: usize,
    trials: u64,
    seed: u64,
    workers: Workers,
) -> Result<McEstimate> {
    Ok(run_chain(model, k, trials, seed, workers)?.delta(k))
}

/// Single-qubit covariant chain with preparation offset `phi`.
pub fn kraus_model(phi: f64) -> Result<Model> {
    let family = if phi == PI {
        QubitKrausFamily::worst()
    } else {
        QubitKrausFamily::new(phi)?
    };
    Ok(Model::SingleQubit {
        family,
        scheme: MeasurementScheme::Covariant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_single_pass() {
        let data: Vec<[f64; 2]> = (0..1000)
            .map(|i| {
                let x = (i as f64 * 0.37).sin();
                [x, x * x - 0.2 * (i as f64).cos()]
            })
            .collect();
        let mut whole = Moments::new(2);
        data.iter().for_each(|d| whole.push(d));
        let mut merged = Moments::new(2);
        for chunk in data.chunks(77) {
            let mut part = Moments::new(2);
            chunk.iter().for_each(|d| part.push(d));
            merged.merge(&part);
        }
        for i in 0..2 {
            assert!((whole.mean(i) - merged.mean(i)).abs() < 1e-14);
            for j in 0..2 {
                let (a, b) = (
                    whole.covariance(i, j).unwrap(),
                    merged.covariance(i, j).unwrap(),
                );
                assert!((a - b).abs() < 1e-12);
            }
        }
        // direct two-pass check
        let m0 = data.iter().map(|d| d[0]).sum::<f64>() / 1000.0;
        let v0 = data.iter().map(|d| (d[0] - m0).powi(2)).sum::<f64>() / 999.0;
        assert!((whole.covariance(0, 0).unwrap() - v0).abs() < 1e-13);
    }

    #[test]
    fn single_trial_has_no_stderr() {
        let est = mc_estimate_delta(Model::optimal_qubit(), 1, 1, 42, Workers::default()).unwrap();
        assert_eq!(est.trials, 1);
        assert!(est.is_degenerate());
        assert_eq!(est.z_score(1.0 / 3.0), None);
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let model = Model::NSpin {
            spins: 4,
            encoding: Encoding::Optimal,
        };
        let a = run_chain(model, 3, 20_000, 7, Workers(Some(1))).unwrap();
        let b = run_chain(model, 3, 20_000, 7, Workers(Some(4))).unwrap();
        let c = run_chain(model, 3, 20_000, 7, Workers(None)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn seeds_change_result() {
        let a = mc_estimate_delta(Model::optimal_qubit(), 2, 5000, 1, Workers::default()).unwrap();
        let b = mc_estimate_delta(Model::optimal_qubit(), 2, 5000, 2, Workers::default()).unwrap();
        assert_ne!(a.mean, b.mean);
    }

    #[test]
    fn rejects_empty_jobs() {
        assert!(mc_estimate_delta(Model::optimal_qubit(), 0, 10, 1, Workers::default()).is_err());
        assert!(mc_estimate_delta(Model::optimal_qubit(), 1, 0, 1, Workers::default()).is_err());
    }

    #[test]
    fn delta_single_qubit() {
        let est =
            mc_estimate_delta(Model::optimal_qubit(), 1, 100_000, 42, Workers::default()).unwrap();
        assert!(est.z_score(1.0 / 3.0).unwrap().abs() < 3.0);
    }

    #[test]
    fn delta_two_spin_optimal() {
        let model = Model::NSpin {
            spins: 2,
            encoding: Encoding::Optimal,
        };
        let est = mc_estimate_delta(model, 1, 100_000, 42, Workers::default()).unwrap();
        assert!(est.z_score(1.0 / 3f64.sqrt()).unwrap().abs() < 3.0);
    }
}
