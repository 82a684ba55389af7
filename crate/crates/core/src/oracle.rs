//! Blind random search over admissible beamformers.
//!
//! Every sample is an achievable point, so the best value found can never
//! exceed the relaxed optimum. The search deliberately shares nothing with
//! the relaxation pipeline beyond the lifted problem data: the strict-mode
//! projector is computed here from `C_2` directly.

use crate::channel::{complex_gaussian, trial_rng, ZfcMode};
use crate::lift::{self, LiftedProblem};
use crate::linalg::{null_space, ComplexMatrix, ComplexVector, LinalgError};
use crate::parallel::{self, Execution};

/// Samples per independently seeded batch. Sample `k` always comes from
/// batch `k / BATCH`, so a longer search extends a shorter one.
pub const BATCH: usize = 4096;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub j_bf: f64,
    pub w_bf: ComplexVector,
    pub samples_used: usize,
    pub samples_discarded: usize,
    /// Every sample failed the zero-forcing screen.
    pub all_discarded: bool,
}

struct BatchBest {
    score: f64,
    w: Option<ComplexVector>,
    discarded: usize,
}

/// Best min-SINR over `n_samples` isotropic Gaussian directions scaled to the
/// relay power boundary.
pub fn brute_force(lp: &LiftedProblem, n_samples: usize, seed: u64, mode: ZfcMode) -> Result<OracleResult, LinalgError> {
    brute_force_with(lp, n_samples, seed, mode, Execution::default())
}

pub fn brute_force_with(lp: &LiftedProblem, n_samples: usize, seed: u64, mode: ZfcMode, exec: Execution) -> Result<OracleResult, LinalgError> {
    let n_w = lp.n_w;
    let projector: Option<ComplexMatrix> = match mode {
        ZfcMode::Strict => {
            let basis = null_space(&lp.c2, 1e-9)?;
            Some(&basis * basis.adjoint())
        }
        ZfcMode::Scalar => None,
    };
    let batches: Vec<usize> = (0..n_samples.div_ceil(BATCH)).collect();
    let results = parallel::map(exec, batches, |b| {
        let mut rng = trial_rng(seed, b as u64);
        let count = BATCH.min(n_samples - b * BATCH);
        let mut best = BatchBest { score: f64::NEG_INFINITY, w: None, discarded: 0 };
        for _ in 0..count {
            let z = ComplexVector::from_fn(n_w, |_, _| complex_gaussian(&mut rng, 1.0));
            let w = match &projector {
                Some(p) => p * z,
                None => z,
            };
            if !lift::satisfies_zfc(&w, lp, mode) {
                best.discarded += 1;
                continue;
            }
            let Some(w) = lift::scale_to_power(&w, lp) else {
                best.discarded += 1;
                continue;
            };
            let score = lift::min_sinr(&w, lp);
            if score > best.score {
                best.score = score;
                best.w = Some(w);
            }
        }
        best
    });
    let discarded: usize = results.iter().map(|r| r.discarded).sum();
    let mut j_bf = 0.0;
    let mut w_bf = None;
    for r in results {
        // strict `>` keeps the earliest batch on ties
        if let Some(w) = r.w {
            if w_bf.is_none() || r.score > j_bf {
                j_bf = r.score;
                w_bf = Some(w);
            }
        }
    }
    let all_discarded = w_bf.is_none();
    Ok(OracleResult {
        j_bf: if all_discarded { 0.0 } else { j_bf },
        w_bf: w_bf.unwrap_or_else(|| ComplexVector::zeros(n_w)),
        samples_used: n_samples,
        samples_discarded: discarded,
        all_discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_realization, NetworkConfig};
    use crate::lift::build_lifted;

    fn problem(mode: ZfcMode, seed: u64) -> LiftedProblem {
        let mut cfg = NetworkConfig::with_total_power(2, 10.0);
        cfg.zfc_mode = mode;
        cfg.seed = seed;
        build_lifted(&cfg, &sample_realization(&cfg, 0).unwrap()).unwrap()
    }

    #[test]
    fn single_sample_is_deterministic() {
        let lp = problem(ZfcMode::Strict, 1);
        let a = brute_force(&lp, 1, 5, ZfcMode::Strict).unwrap();
        let b = brute_force(&lp, 1, 5, ZfcMode::Strict).unwrap();
        assert_eq!(a.j_bf, b.j_bf);
        assert_eq!(a.w_bf, b.w_bf);
    }

    #[test]
    fn longer_searches_never_do_worse() {
        let lp = problem(ZfcMode::Strict, 2);
        let mut prev = 0.0;
        for n in [1, 10, 100, 5000, 9000] {
            let r = brute_force(&lp, n, 9, ZfcMode::Strict).unwrap();
            assert!(r.j_bf >= prev);
            prev = r.j_bf;
        }
    }

    #[test]
    fn returned_point_is_admissible() {
        let lp = problem(ZfcMode::Strict, 3);
        let r = brute_force(&lp, 2000, 1, ZfcMode::Strict).unwrap();
        assert!(!r.all_discarded);
        assert!(lift::relay_power(&r.w_bf, &lp) <= lp.relay_power * (1.0 + 1e-8));
        assert!(lift::satisfies_zfc(&r.w_bf, &lp, ZfcMode::Strict));
        assert!((lift::min_sinr(&r.w_bf, &lp) - r.j_bf).abs() <= 1e-12 * r.j_bf);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let lp = problem(ZfcMode::Strict, 4);
        let a = brute_force_with(&lp, 10_000, 3, ZfcMode::Strict, Execution::Sequential).unwrap();
        let b = brute_force_with(&lp, 10_000, 3, ZfcMode::Strict, Execution::Parallel).unwrap();
        assert_eq!(a.j_bf, b.j_bf);
    }

    #[test]
    fn scalar_screen_discards_generic_directions() {
        let lp = problem(ZfcMode::Scalar, 5);
        let r = brute_force(&lp, 1000, 1, ZfcMode::Scalar).unwrap();
        assert!(r.samples_discarded <= 1000);
        if r.all_discarded {
            assert_eq!(r.j_bf, 0.0);
            assert_eq!(r.samples_discarded, 1000);
        }
    }
}
