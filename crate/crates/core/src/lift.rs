//! Vectorized problem data.
//!
//! The relay matrix `W` is handled through `w = vec(W^H)`, which turns relay
//! power, received signal power and amplified noise power into Hermitian
//! quadratic forms in `w`:
//!
//! * relay power `Tr(W L_R W^H) = w^H (I ⊗ L_R) w`
//! * signal `|f_Ri^H W f_jR|^2 = w^H (f_Ri^* f_Ri^T ⊗ f_jR f_jR^H) w`, `j = 3 - i`
//! * forwarded noise `||f_Ri^H W||^2 = w^H (f_Ri^* f_Ri^T ⊗ I) w`
//! * zero forcing `W H_RR = 0  <=>  (I ⊗ H_RR^H) w = 0`

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{ChannelRealization, NetworkConfig, ZfcMode};
use crate::linalg::{self, herm_form, kron, ComplexMatrix, ComplexVector, HermitianMatrix, LinalgError};

/// Relative threshold of the scalar-mode zero-forcing screen:
/// `|w^H C_2 w| <= ZFC_SCREEN_REL * ||w||^2 * ||H_RR||_F`.
pub const ZFC_SCREEN_REL: f64 = 1e-6;
/// Relative threshold for strict mode: `||C_2 w|| <= ZFC_STRICT_REL * ||w|| * ||H_RR||_F`.
pub const ZFC_STRICT_REL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("dimension mismatch: config has n = {cfg}, channel has n = {channel}")]
    DimensionMismatch { cfg: usize, channel: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The two sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum User {
    S1,
    S2,
}

impl User {
    pub const BOTH: [User; 2] = [User::S1, User::S2];

    pub fn index(self) -> usize {
        match self {
            User::S1 => 0,
            User::S2 => 1,
        }
    }

    pub fn other(self) -> User {
        match self {
            User::S1 => User::S2,
            User::S2 => User::S1,
        }
    }
}

/// Quadratic-form data of the relay design problem for one realization.
#[derive(Debug, Clone)]
pub struct LiftedProblem {
    /// Relay antennas per side.
    pub n: usize,
    /// Dimension `n^2` of `w`.
    pub n_w: usize,
    pub h: [HermitianMatrix; 2],
    pub f: [HermitianMatrix; 2],
    pub c1: HermitianMatrix,
    pub c2: ComplexMatrix,
    pub c2_herm: HermitianMatrix,
    pub c2_skew: HermitianMatrix,
    pub z: HermitianMatrix,
    pub phi: [f64; 2],
    /// Factor on the signal term of user `i`: `p_(3-i)`, or 1.
    pub gain: [f64; 2],
    pub relay_power: f64,
    pub l_r: HermitianMatrix,
    pub h_rr: ComplexMatrix,
    pub h_rr_norm: f64,
}

impl LiftedProblem {
    pub fn h(&self, user: User) -> &HermitianMatrix {
        &self.h[user.index()]
    }

    pub fn f(&self, user: User) -> &HermitianMatrix {
        &self.f[user.index()]
    }

    pub fn phi(&self, user: User) -> f64 {
        self.phi[user.index()]
    }

    pub fn gain(&self, user: User) -> f64 {
        self.gain[user.index()]
    }
}

/// Builds the lifted matrices for `(cfg, ch)`.
pub fn build_lifted(cfg: &NetworkConfig, ch: &ChannelRealization) -> Result<LiftedProblem, LiftError> {
    let n = cfg.n;
    if ch.n() != n || ch.h_rr.nrows() != n || ch.h_rr.ncols() != n || ch.downlink(0).len() != n || ch.downlink(1).len() != n || ch.uplink(1).len() != n {
        return Err(LiftError::DimensionMismatch { cfg: n, channel: ch.n() });
    }
    let eye = ComplexMatrix::identity(n, n);
    let re = |x: f64| Complex64::new(x, 0.0);

    let l_r = &ch.f_1r * ch.f_1r.adjoint() * re(cfg.p1) + &ch.f_2r * ch.f_2r.adjoint() * re(cfg.p2) + &eye * re(cfg.sigma2_relay);
    let l_r = HermitianMatrix::symmetrized(l_r);
    let c1 = HermitianMatrix::symmetrized(kron(&eye, l_r.matrix())?);

    let c2 = kron(&eye, &ch.h_rr.adjoint())?;
    let c2_herm = HermitianMatrix::symmetrized(c2.clone());
    // (C_2 - C_2^H) / 2i
    let c2_skew = HermitianMatrix::symmetrized(&c2 * Complex64::new(0.0, -1.0));
    let z = HermitianMatrix::symmetrized(c2.adjoint() * &c2);

    let mut h = Vec::with_capacity(2);
    let mut f = Vec::with_capacity(2);
    let mut phi = [0.0; 2];
    let mut gain = [1.0; 2];
    for user in User::BOTH {
        let i = user.index();
        let down = ch.downlink(i);
        let up_other = ch.uplink(user.other().index());
        let down_outer = down.conjugate() * down.transpose();
        let up_outer = up_other * up_other.adjoint();
        h.push(HermitianMatrix::symmetrized(kron(&down_outer, &up_outer)?));
        f.push(HermitianMatrix::symmetrized(kron(&down_outer, &eye)?));
        phi[i] = cfg.source_power(i) * ch.self_interference(i).norm_sqr() + cfg.sigma2_user[i];
        if cfg.signal_power_in_sinr {
            gain[i] = cfg.source_power(user.other().index());
        }
    }
    let [h1, h2]: [HermitianMatrix; 2] = h.try_into().expect("two users");
    let [f1, f2]: [HermitianMatrix; 2] = f.try_into().expect("two users");

    Ok(LiftedProblem {
        n,
        n_w: n * n,
        h: [h1, h2],
        f: [f1, f2],
        c1,
        c2,
        c2_herm,
        c2_skew,
        z,
        phi,
        gain,
        relay_power: cfg.relay_power,
        l_r,
        h_rr_norm: ch.h_rr.norm(),
        h_rr: ch.h_rr.clone(),
    })
}

/// `w = vec(W^H)`.
pub fn beamformer_from_matrix(w_mat: &ComplexMatrix) -> ComplexVector {
    linalg::vec(&w_mat.adjoint())
}

/// Recovers `W` from `w = vec(W^H)`.
pub fn matrix_from_beamformer(w: &ComplexVector, n: usize) -> ComplexMatrix {
    linalg::unvec(w, n, n).expect("w has length n^2").adjoint()
}

/// Received SINR at `user`: `g_i w^H H_i w / (w^H F_i w + phi_i)` with `g_i` from [`LiftedProblem::gain`].
pub fn sinr(w: &ComplexVector, lp: &LiftedProblem, user: User) -> f64 {
    let signal = lp.gain(user) * herm_form(w, lp.h(user)).max(0.0);
    let noise = herm_form(w, lp.f(user)).max(0.0) + lp.phi(user);
    signal / noise
}

pub fn min_sinr(w: &ComplexVector, lp: &LiftedProblem) -> f64 {
    sinr(w, lp, User::S1).min(sinr(w, lp, User::S2))
}

/// Rate in bits per channel use.
pub fn rate(w: &ComplexVector, lp: &LiftedProblem, user: User) -> f64 {
    sinr_to_rate(sinr(w, lp, user))
}

pub fn sinr_to_rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Relay transmit power `w^H C_1 w`.
pub fn relay_power(w: &ComplexVector, lp: &LiftedProblem) -> f64 {
    herm_form(w, &lp.c1)
}

/// Zero-forcing residual: `|w^H C_2 w|` (scalar) or `||C_2 w||` (strict).
pub fn zfc_residual(w: &ComplexVector, lp: &LiftedProblem, mode: ZfcMode) -> f64 {
    match mode {
        ZfcMode::Scalar => w.dotc(&(&lp.c2 * w)).norm(),
        ZfcMode::Strict => herm_form(w, &lp.z).max(0.0).sqrt(),
    }
}

/// Acceptance threshold matching [`zfc_residual`] for the given `w`.
pub fn zfc_threshold(w: &ComplexVector, lp: &LiftedProblem, mode: ZfcMode) -> f64 {
    match mode {
        ZfcMode::Scalar => ZFC_SCREEN_REL * w.norm_squared() * lp.h_rr_norm,
        ZfcMode::Strict => ZFC_STRICT_REL * w.norm() * lp.h_rr_norm,
    }
}

pub fn satisfies_zfc(w: &ComplexVector, lp: &LiftedProblem, mode: ZfcMode) -> bool {
    zfc_residual(w, lp, mode) <= zfc_threshold(w, lp, mode)
}

/// Scales `w` so that the relay transmits exactly `P_R`. Returns `None` for a
/// direction that draws no power.
pub fn scale_to_power(w: &ComplexVector, lp: &LiftedProblem) -> Option<ComplexVector> {
    let p = relay_power(w, lp);
    if !(p > 0.0 && p.is_finite()) {
        return None;
    }
    Some(w * Complex64::new((lp.relay_power / p).sqrt(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gaussian_vector, sample_realization, trial_rng};
    use crate::linalg::herm_eig;

    fn instance(n: usize, seed: u64, mode: ZfcMode) -> (NetworkConfig, ChannelRealization, LiftedProblem) {
        let mut cfg = NetworkConfig::with_total_power(n, 10.0);
        cfg.seed = seed;
        cfg.zfc_mode = mode;
        let ch = sample_realization(&cfg, 0).unwrap();
        let lp = build_lifted(&cfg, &ch).unwrap();
        (cfg, ch, lp)
    }

    fn random_w(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = trial_rng(seed, 999);
        ComplexMatrix::from_iterator(n, n, gaussian_vector(&mut rng, n * n, 1.0).iter().copied())
    }

    #[test]
    fn degenerate_powers_give_identity() {
        let mut cfg = NetworkConfig::with_total_power(2, 10.0);
        cfg.p1 = 0.0;
        cfg.p2 = 0.0;
        let ch = sample_realization(&NetworkConfig::default(), 0).unwrap();
        let lp = build_lifted(&cfg, &ch).unwrap();
        assert_eq!(lp.l_r, HermitianMatrix::identity(2));
        assert_eq!(lp.c1, HermitianMatrix::identity(4));
        let w = beamformer_from_matrix(&random_w(2, 1));
        assert!((relay_power(&w, &lp) - w.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn signal_lift_is_rank_one() {
        for seed in 0..10 {
            let (_, ch, lp) = instance(3, seed, ZfcMode::Scalar);
            for user in User::BOTH {
                let e = herm_eig(lp.h(user)).unwrap();
                let expected = ch.downlink(user.index()).norm_squared() * ch.uplink(user.other().index()).norm_squared();
                assert!((e.values[0] - expected).abs() < 1e-10 * expected);
                assert!(e.values[1].abs() < 1e-10 * expected);
            }
        }
    }

    #[test]
    fn noise_lift_spectrum() {
        for seed in 0..10 {
            let (_, ch, lp) = instance(3, seed, ZfcMode::Scalar);
            for user in User::BOTH {
                let e = herm_eig(lp.f(user)).unwrap();
                let g = ch.downlink(user.index()).norm_squared();
                for (k, v) in e.values.iter().enumerate() {
                    let want = if k < 3 { g } else { 0.0 };
                    assert!((v - want).abs() < 1e-10 * g, "k={k} v={v} want={want}");
                }
            }
        }
    }

    #[test]
    fn lifted_forms_match_matrix_forms() {
        for seed in 0..20 {
            for n in [2, 3] {
                let (cfg, ch, lp) = instance(n, seed, ZfcMode::Scalar);
                let wm = random_w(n, seed + 100);
                let w = beamformer_from_matrix(&wm);
                assert_eq!(matrix_from_beamformer(&w, n), wm);
                let direct_power = (&wm * lp.l_r.matrix() * wm.adjoint()).trace().re;
                assert!((relay_power(&w, &lp) - direct_power).abs() < 1e-10 * direct_power);
                for user in User::BOTH {
                    let i = user.index();
                    let down = ch.downlink(i);
                    let up = ch.uplink(user.other().index());
                    let sig = (down.adjoint() * &wm * up)[(0, 0)].norm_sqr();
                    let amp = (down.adjoint() * &wm).norm_squared();
                    let phi = cfg.source_power(i) * ch.self_interference(i).norm_sqr() + cfg.sigma2_user[i];
                    assert!((herm_form(&w, lp.h(user)) - sig).abs() < 1e-10 * sig.max(1e-300));
                    assert!((herm_form(&w, lp.f(user)) - amp).abs() < 1e-10 * amp);
                    let direct = cfg.source_power(user.other().index()) * sig / (amp + phi);
                    assert!((sinr(&w, &lp, user) - direct).abs() < 1e-10 * direct.max(1e-300));
                }
            }
        }
    }

    #[test]
    fn sinr_and_rate_edge_cases() {
        let (_, _, lp) = instance(2, 4, ZfcMode::Scalar);
        let zero = ComplexVector::zeros(4);
        assert_eq!(sinr(&zero, &lp, User::S1), 0.0);
        assert_eq!(relay_power(&zero, &lp), 0.0);
        assert_eq!(zfc_residual(&zero, &lp, ZfcMode::Scalar), 0.0);
        assert_eq!(zfc_residual(&zero, &lp, ZfcMode::Strict), 0.0);
        assert_eq!(sinr_to_rate(0.0), 0.0);
        assert_eq!(sinr_to_rate(1.0), 1.0);
        assert_eq!(sinr_to_rate(3.0), 2.0);
        let w = beamformer_from_matrix(&random_w(2, 9));
        let mut prev = 0.0;
        for k in 1..20 {
            let s = sinr(&(&w * Complex64::new(k as f64 * 0.3, 0.0)), &lp, User::S2);
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn zfc_parts_and_residuals() {
        let (_, _, lp) = instance(3, 5, ZfcMode::Scalar);
        let recombined = lp.c2_herm.matrix() + lp.c2_skew.matrix() * Complex64::new(0.0, 1.0);
        assert!((recombined - &lp.c2).camax() < 1e-14);
        for seed in 0..10 {
            let w = beamformer_from_matrix(&random_w(3, seed));
            let q = w.dotc(&(&lp.c2 * &w));
            assert!((q.re - herm_form(&w, &lp.c2_herm)).abs() < 1e-12 * q.norm());
            assert!((q.im - herm_form(&w, &lp.c2_skew)).abs() < 1e-12 * q.norm());
            // direct double loop over entries
            let mut direct = Complex64::new(0.0, 0.0);
            for r in 0..9 {
                for c in 0..9 {
                    direct += w[r].conj() * lp.c2[(r, c)] * w[c];
                }
            }
            assert!((zfc_residual(&w, &lp, ZfcMode::Scalar) - direct.norm()).abs() < 1e-12 * direct.norm().max(1.0));
            let strict = (&lp.c2 * &w).norm();
            assert!((zfc_residual(&w, &lp, ZfcMode::Strict) - strict).abs() < 1e-10 * strict);
        }
    }

    #[test]
    fn strict_null_space_vectors_have_zero_residual() {
        let (_, _, lp) = instance(3, 6, ZfcMode::Strict);
        let basis = linalg::null_space(&lp.c2, 1e-10).unwrap();
        assert_eq!(basis.ncols(), 6);
        let w = &basis * ComplexVector::from_element(6, Complex64::new(0.7, -0.2));
        assert!(zfc_residual(&w, &lp, ZfcMode::Strict) < 1e-10);
        assert!(satisfies_zfc(&w, &lp, ZfcMode::Strict));
        // and the corresponding W annihilates H_RR
        let wm = matrix_from_beamformer(&w, 3);
        assert!((wm * &lp.h_rr).camax() < 1e-10);
    }

    #[test]
    fn lifted_matrices_are_psd() {
        for seed in 0..10 {
            let (_, _, lp) = instance(3, seed, ZfcMode::Scalar);
            for m in [&lp.h[0], &lp.h[1], &lp.f[0], &lp.f[1], &lp.c1, &lp.z, &lp.l_r] {
                let e = herm_eig(m).unwrap();
                assert!(e.min() > -1e-10 * e.max().max(1e-300));
            }
            assert!(lp.phi.iter().all(|&p| p >= 1.0));
        }
    }

    #[test]
    fn zero_source_rsi_gives_noise_only_phi() {
        let cfg = NetworkConfig::default();
        let mut ch = sample_realization(&cfg, 0).unwrap();
        ch.f_11 = Complex64::new(0.0, 0.0);
        ch.f_22 = Complex64::new(0.0, 0.0);
        let lp = build_lifted(&cfg, &ch).unwrap();
        assert_eq!(lp.phi, cfg.sigma2_user);
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let ch = sample_realization(&NetworkConfig::with_total_power(3, 10.0), 0).unwrap();
        assert!(build_lifted(&NetworkConfig::with_total_power(2, 10.0), &ch).is_err());
    }
}
