//! Network configuration and random channel realizations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{ComplexMatrix, ComplexVector};

/// How the relay zero-forcing constraint enters the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ZfcMode {
    /// The single complex quadratic equality `w^H C_2 w = 0`.
    #[default]
    Scalar,
    /// Full zero-forcing `W H_RR = 0`; needs a rank-deficient `H_RR`.
    Strict,
}

impl std::fmt::Display for ZfcMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ZfcMode::Scalar => write!(f, "scalar"),
            ZfcMode::Strict => write!(f, "strict"),
        }
    }
}

impl std::str::FromStr for ZfcMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scalar" => Ok(ZfcMode::Scalar),
            "strict" => Ok(ZfcMode::Strict),
            other => Err(format!("unknown zfc mode '{other}' (expected scalar|strict)")),
        }
    }
}

/// Physical and numerical parameters of one network instance.
///
/// Powers and noise variances are linear (watts); `rsi_db` is in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Relay antennas per side; the relay has `2n` antennas in total.
    pub n: usize,
    pub total_power: f64,
    pub p1: f64,
    pub p2: f64,
    pub relay_power: f64,
    pub sigma2_relay: f64,
    pub sigma2_user: [f64; 2],
    pub rsi_db: f64,
    pub zfc_mode: ZfcMode,
    /// Rank of `H_RR` in strict mode.
    pub rsi_rank: usize,
    pub bisection_tol: f64,
    pub feas_tol: f64,
    pub n_randomizations: usize,
    pub seed: u64,
    /// Scale the received signal by the transmitting source's power, as in the
    /// un-vectorized SINR. When false the signal term is `w^H H_i w` alone.
    pub signal_power_in_sinr: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::with_total_power(2, 10.0)
    }
}

impl NetworkConfig {
    /// Config with the standard power split: each source gets a quarter of
    /// `total_power`, the relay gets half.
    pub fn with_total_power(n: usize, total_power: f64) -> Self {
        Self {
            n,
            total_power,
            p1: total_power / 4.0,
            p2: total_power / 4.0,
            relay_power: total_power / 2.0,
            sigma2_relay: 1.0,
            sigma2_user: [1.0, 1.0],
            rsi_db: -40.0,
            zfc_mode: ZfcMode::Scalar,
            rsi_rank: 1,
            bisection_tol: 1e-4,
            feas_tol: 1e-8,
            n_randomizations: 200,
            seed: 0,
            signal_power_in_sinr: true,
        }
    }

    /// Re-applies the standard split for a new total power.
    pub fn set_total_power(&mut self, total_power: f64) {
        self.total_power = total_power;
        self.p1 = total_power / 4.0;
        self.p2 = total_power / 4.0;
        self.relay_power = total_power / 2.0;
    }

    pub fn source_power(&self, user: usize) -> f64 {
        if user == 0 {
            self.p1
        } else {
            self.p2
        }
    }

    /// Linear RSI power `10^(rsi_db / 10)`.
    pub fn rsi_power(&self) -> f64 {
        10f64.powf(self.rsi_db / 10.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let violations = validate_config(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(violations))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration: {}", .0.join("; "))]
pub struct ConfigError(pub Vec<String>);

/// Returns every violated invariant; empty means the config is valid.
pub fn validate_config(cfg: &NetworkConfig) -> Vec<String> {
    let mut v = Vec::new();
    if cfg.n < 2 {
        v.push(format!("M ≥ 4 required (relay has M = 2n = {} antennas)", 2 * cfg.n));
    }
    let powers = [cfg.total_power, cfg.p1, cfg.p2, cfg.relay_power];
    if powers.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        v.push("powers must be positive".to_string());
    }
    let noises = [cfg.sigma2_relay, cfg.sigma2_user[0], cfg.sigma2_user[1]];
    if noises.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        v.push("noise variances must be positive".to_string());
    }
    let budget = cfg.p1 + cfg.p2 + cfg.relay_power;
    if budget > cfg.total_power * (1.0 + 1e-12) {
        v.push(format!("p1 + p2 + P_R = {budget} exceeds P_T = {}", cfg.total_power));
    }
    if !cfg.rsi_db.is_finite() {
        v.push("rsi_db must be finite".to_string());
    }
    if cfg.zfc_mode == ZfcMode::Strict && (cfg.rsi_rank < 1 || cfg.rsi_rank > cfg.n) {
        v.push(format!("rsi_rank must satisfy 1 ≤ r ≤ n (got r = {}, n = {})", cfg.rsi_rank, cfg.n));
    }
    if !(cfg.bisection_tol > 0.0 && cfg.bisection_tol.is_finite()) || !(cfg.feas_tol > 0.0 && cfg.feas_tol.is_finite()) {
        v.push("tolerances must be positive".to_string());
    }
    v
}

/// All channel coefficients of one Monte Carlo draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub trial_index: u64,
    /// Source-to-relay links.
    pub f_1r: ComplexVector,
    pub f_2r: ComplexVector,
    /// Relay-to-source links.
    pub f_r1: ComplexVector,
    pub f_r2: ComplexVector,
    /// Relay loopback channel.
    pub h_rr: ComplexMatrix,
    /// Source loopback gains.
    pub f_11: Complex64,
    pub f_22: Complex64,
}

impl ChannelRealization {
    pub fn n(&self) -> usize {
        self.f_1r.len()
    }

    /// Source-to-relay link of `user` (0 or 1).
    pub fn uplink(&self, user: usize) -> &ComplexVector {
        if user == 0 {
            &self.f_1r
        } else {
            &self.f_2r
        }
    }

    /// Relay-to-source link of `user` (0 or 1).
    pub fn downlink(&self, user: usize) -> &ComplexVector {
        if user == 0 {
            &self.f_r1
        } else {
            &self.f_r2
        }
    }

    pub fn self_interference(&self, user: usize) -> Complex64 {
        if user == 0 {
            self.f_11
        } else {
            self.f_22
        }
    }
}

/// Per-trial generator: one ChaCha stream per `(seed, trial_index)`.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Circularly-symmetric complex Gaussian with the given variance.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

pub fn gaussian_vector<R: rand::Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> ComplexVector {
    ComplexVector::from_fn(len, |_, _| complex_gaussian(rng, variance))
}

fn gaussian_matrix<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> ComplexMatrix {
    // from_fn fills column-major, which fixes the draw order
    DMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}

/// Draws one realization; a pure function of `(cfg, trial_index)`.
pub fn sample_realization(cfg: &NetworkConfig, trial_index: u64) -> Result<ChannelRealization, ConfigError> {
    cfg.validate()?;
    let n = cfg.n;
    let rsi = cfg.rsi_power();
    let mut rng = trial_rng(cfg.seed, trial_index);
    let f_1r = gaussian_vector(&mut rng, n, 1.0);
    let f_2r = gaussian_vector(&mut rng, n, 1.0);
    let f_r1 = gaussian_vector(&mut rng, n, 1.0);
    let f_r2 = gaussian_vector(&mut rng, n, 1.0);
    let h_rr = match cfg.zfc_mode {
        ZfcMode::Scalar => gaussian_matrix(&mut rng, n, n, rsi),
        ZfcMode::Strict => {
            let r = cfg.rsi_rank;
            let left = gaussian_matrix(&mut rng, n, r, 1.0);
            let right = gaussian_matrix(&mut rng, r, n, 1.0);
            // each product entry has variance r
            (left * right) * Complex64::new((rsi / r as f64).sqrt(), 0.0)
        }
    };
    let f_11 = complex_gaussian(&mut rng, rsi);
    let f_22 = complex_gaussian(&mut rng, rsi);
    Ok(ChannelRealization { trial_index, f_1r, f_2r, f_r1, f_r2, h_rr, f_11, f_22 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;

    #[test]
    fn default_n2_is_valid() {
        assert!(validate_config(&NetworkConfig::with_total_power(2, 10.0)).is_empty());
    }

    #[test]
    fn n1_is_rejected() {
        let v = validate_config(&NetworkConfig::with_total_power(1, 10.0));
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("M ≥ 4 required"));
    }

    #[test]
    fn negative_power_is_rejected() {
        let mut cfg = NetworkConfig::default();
        cfg.total_power = -5.0;
        let v = validate_config(&cfg);
        assert!(v.iter().any(|m| m == "powers must be positive"));
    }

    #[test]
    fn collects_all_violations() {
        let mut cfg = NetworkConfig::with_total_power(1, 10.0);
        cfg.sigma2_relay = 0.0;
        cfg.feas_tol = 0.0;
        cfg.relay_power = 20.0;
        assert_eq!(validate_config(&cfg).len(), 4);
    }

    #[test]
    fn strict_rank_bounds() {
        let mut cfg = NetworkConfig::with_total_power(2, 10.0);
        cfg.zfc_mode = ZfcMode::Strict;
        cfg.rsi_rank = 3;
        assert!(!validate_config(&cfg).is_empty());
        cfg.rsi_rank = 0;
        assert!(!validate_config(&cfg).is_empty());
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = NetworkConfig { seed: 42, ..NetworkConfig::default() };
        let a = sample_realization(&cfg, 7).unwrap();
        let b = sample_realization(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_realization(&cfg, 8).unwrap();
        assert_ne!(a.f_1r, c.f_1r);
    }

    #[test]
    fn invalid_config_is_an_error() {
        assert!(sample_realization(&NetworkConfig::with_total_power(1, 1.0), 0).is_err());
    }

    #[test]
    fn strict_mode_has_requested_rank() {
        for (n, r) in [(2, 1), (3, 1), (3, 2), (4, 3)] {
            let mut cfg = NetworkConfig::with_total_power(n, 10.0);
            cfg.zfc_mode = ZfcMode::Strict;
            cfg.rsi_rank = r;
            for t in 0..50 {
                let ch = sample_realization(&cfg, t).unwrap();
                let s = singular_values(&ch.h_rr);
                assert!(s[r - 1] > 1e-10 * s[0]);
                if r < n {
                    assert!(s[r] < 1e-10 * s[0], "n={n} r={r} s={s:?}");
                }
            }
        }
    }

    #[test]
    fn unit_power_links_and_rsi_variance() {
        let mut cfg = NetworkConfig::with_total_power(2, 10.0);
        cfg.rsi_db = -40.0;
        let mut link = 0.0;
        let mut rsi = 0.0;
        let mut count = 0.0;
        for t in 0..25_000 {
            let ch = sample_realization(&cfg, t).unwrap();
            link += ch.f_1r.iter().map(|z| z.norm_sqr()).sum::<f64>();
            rsi += ch.h_rr.iter().map(|z| z.norm_sqr()).sum::<f64>() / 4.0;
            count += 2.0;
        }
        let link = link / count;
        let rsi = rsi / (count / 2.0);
        assert!((link - 1.0).abs() < 0.03, "link power {link}");
        assert!((rsi / 1e-4 - 1.0).abs() < 0.03, "rsi power {rsi}");
    }

    #[test]
    fn distinct_trials_are_uncorrelated() {
        let cfg = NetworkConfig { seed: 3, ..NetworkConfig::default() };
        let mut acc = Complex64::new(0.0, 0.0);
        let samples = 50_000;
        for t in 0..samples {
            let a = sample_realization(&cfg, 2 * t).unwrap();
            let b = sample_realization(&cfg, 2 * t + 1).unwrap();
            acc += a.f_1r[0] * b.f_1r[0].conj() + a.f_1r[1] * b.f_1r[1].conj();
        }
        let corr = acc.norm() / (2 * samples) as f64;
        assert!(corr < 0.01, "cross-correlation {corr}");
    }
}
