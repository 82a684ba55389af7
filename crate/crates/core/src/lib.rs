//! Max-min rate balancing for a full-duplex MIMO two-way relay.
//!
//! Two single-antenna-per-direction sources exchange data through an
//! amplify-and-forward relay with `n` receive and `n` transmit antennas. The
//! relay matrix is designed to maximize the smaller of the two received
//! SINRs under a relay power budget and a zero-forcing constraint on the
//! relay's loopback channel. The non-convex problem is relaxed to a
//! semidefinite program, which yields a certified upper bound and, after
//! rank-one recovery, an achievable beamformer.
//!
//! Module map:
//!
//! * [`linalg`]: complex dense kernels (Kronecker, vec, Hermitian eigen).
//! * [`channel`]: configuration and Rayleigh channel draws.
//! * [`lift`]: vectorized quadratic-form data and SINR/power evaluation.
//! * [`sdp`]: a small primal-dual interior-point SDP solver.
//! * [`maxmin`]: upper bound, bisection and beamformer recovery.
//! * [`oracle`]: random-search baseline used as an independent check.
//! * [`harness`]: Monte Carlo sweeps, reports and timing.

pub mod channel;
pub mod harness;
pub mod lift;
pub mod linalg;
pub mod maxmin;
pub mod oracle;
pub mod parallel;
pub mod sdp;

pub use channel::{sample_realization, validate_config, ChannelRealization, NetworkConfig, ZfcMode};
pub use lift::{build_lifted, LiftedProblem, User};

pub use maxmin::{solve_maxmin, MaxMinResult};
