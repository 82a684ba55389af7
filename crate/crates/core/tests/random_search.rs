//! Dense random search against the relaxed bounds.

use fdrelay::channel::{complex_gaussian, trial_rng};
use fdrelay::lift::{self, scale_to_power};
use fdrelay::linalg::{null_space, ComplexVector};
use fdrelay::maxmin::{solve_maxmin, upper_bound};
use fdrelay::oracle::brute_force;
use fdrelay::sdp::SdpSettings;
use fdrelay::{build_lifted, sample_realization, NetworkConfig, User, ZfcMode};

fn strict_instance(seed: u64) -> NetworkConfig {
    let mut cfg = NetworkConfig::with_total_power(2, 100.0);
    cfg.zfc_mode = ZfcMode::Strict;
    cfg.rsi_rank = 1;
    cfg.seed = seed;
    cfg
}

// Best single-user SINR over 10^6 admissible directions on the power boundary.
#[test]
fn single_user_bound_matches_dense_search() {
    for trial in 0..2u64 {
        let cfg = strict_instance(77);
        let ch = sample_realization(&cfg, trial).unwrap();
        let lp = build_lifted(&cfg, &ch).unwrap();
        let ub = upper_bound(&lp, ZfcMode::Strict, &SdpSettings::default()).unwrap();
        let basis = null_space(&lp.c2, 1e-9).unwrap();
        let mut rng = trial_rng(0xd15c, trial);
        let mut best = [0.0f64; 2];
        for _ in 0..1_000_000 {
            let z = ComplexVector::from_fn(basis.ncols(), |_, _| complex_gaussian(&mut rng, 1.0));
            let Some(w) = scale_to_power(&(&basis * z), &lp) else { continue };
            for user in User::BOTH {
                let i = user.index();
                best[i] = best[i].max(lift::sinr(&w, &lp, user));
            }
        }
        for i in 0..2 {
            let j_star = ub.j_star[i];
            assert!(best[i] <= j_star * (1.0 + 1e-8), "trial {trial} user {i}: search {} above bound {j_star}", best[i]);
            assert!((j_star - best[i]) / j_star <= 1e-3, "trial {trial} user {i}: search {} vs bound {j_star}", best[i]);
        }
        assert!((ub.j_up - best[0].max(best[1])) / ub.j_up <= 1e-3);
    }
}

#[test]
fn blind_search_never_beats_relaxation() {
    for trial in 0..6u64 {
        let cfg = strict_instance(5);
        let ch = sample_realization(&cfg, trial).unwrap();
        let lp = build_lifted(&cfg, &ch).unwrap();
        let r = solve_maxmin(&cfg, &ch).unwrap();
        let bf = brute_force(&lp, 50_000, 99 + trial, ZfcMode::Strict).unwrap();
        assert!(bf.j_bf <= r.j_max + 1e-6, "trial {trial}: {} > {}", bf.j_bf, r.j_max);
        assert!(r.j_lower >= 0.9 * bf.j_bf);
        assert!((lift::min_sinr(&bf.w_bf, &lp) - bf.j_bf).abs() <= 1e-12 * bf.j_bf.max(1.0));
        assert!(lift::relay_power(&bf.w_bf, &lp) <= lp.relay_power * (1.0 + 1e-8));
        assert!(lift::satisfies_zfc(&bf.w_bf, &lp, ZfcMode::Strict));
    }
}
