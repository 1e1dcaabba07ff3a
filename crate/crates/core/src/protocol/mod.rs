//! Two-party protocol harness.
//!
//! Alice and Bob exchange the classical messages of the protocol over a
//! framed, ordered channel (in-process or TCP) and distill identical keys.
//! The quantum exchange is simulation data generated by Alice's endpoint;
//! the harness is a protocol-logic and post-processing testbed. The
//! classical channel is assumed authenticated, as usual for this protocol
//! family.
//!
//! Session script (one shared sequence counter, any violation aborts):
//!
//! ```text
//! A -> B  SessionStart          config digest + seed commitment
//! B -> A  SessionStart
//! A -> B  QuantumBatch          Bob's bases and homodyne outcomes
//! B -> A  BasisReveal
//! B -> A  EstimationDisclosure  indices + Bob's outcomes
//! A -> B  EstimationDisclosure  same indices + Alice's projections
//! per frame: B -> A SideInfoMsg, A -> B VerifyResult
//! B -> A  PaSeed                (or Abort on empty balance)
//! A -> B  VerifyResult(ack)
//! ```
//!
//! Both endpoints run the estimation, accounting and hashing on identical
//! inputs, so every derived quantity is bitwise equal on the two sides.

pub mod config;
pub mod message;
pub mod pa;
pub mod transport;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::SessionConfig;
pub use message::{AbortReason, ProtocolMessage, ACK_FRAME_INDEX};
pub use pa::privacy_amplification;
pub use transport::{Frame, LoopbackTransport, TcpTransport, Transport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::reconcile::{
    bp_decode, compute_llrs, make_side_info, verify_tag, LdpcCode, SideInfo, VERIFY_TAG_BITS,
};
use crate::security::{
    biawgn_mutual_info, holevo_bound, ChannelParams, KeyRateReport, MiConvention,
};
use crate::sim::{estimate_channel, simulate_batch, Basis, ChannelEstimate, quadrature_sign};
use crate::state_algebra::{
    compute_z, covariance_matrix, truncation_cutoff, ModulationParams, TAIL_TOL,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("framing violation: {0}")]
    Framing(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("internal: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Alice,
    Bob,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Alice => "alice",
            Role::Bob => "bob",
        })
    }
}

/// Outcome of one endpoint's session.
#[derive(Debug, Clone)]
pub struct SessionResult {
    pub role: Role,
    /// Final key bits; empty when aborted.
    pub key: Vec<u8>,
    /// Operating-point report from the configured (expected) channel and
    /// the measured reconciliation throughput.
    pub report: Option<KeyRateReport<f64>>,
    /// Classical bits disclosed for reconciliation: syndrome and tag bits.
    pub leakage_bits: u64,
    pub aborted: Option<AbortReason>,
    pub frames_total: usize,
    pub frames_verified: usize,
    pub out_len: usize,
    /// Channel estimate agreed by both endpoints.
    pub estimate: Option<ChannelEstimate>,
    /// SHA-256 over every frame in sequence order, both directions.
    pub transcript_digest: [u8; 32],
}

/// Secret-key output length per the balance
/// `floor(n beta i_xy - n s_ye) - verify_leakage`, clamped at zero.
pub fn key_length_accounting(
    report: &KeyRateReport<f64>,
    verify_leakage_bits: u64,
    n_key_symbols: usize,
) -> usize {
    let n = n_key_symbols as f64;
    let balance = (n * report.beta * report.i_xy - n * report.s_ye).floor();
    let after_tag = balance - verify_leakage_bits as f64;
    if after_tag <= 0.0 {
        0
    } else {
        after_tag as usize
    }
}

struct Channel<'a, T: Transport> {
    transport: &'a mut T,
    next_seq: u64,
    hasher: Sha256,
}

enum Received {
    Msg(ProtocolMessage),
    PeerAbort(AbortReason),
    OutOfSequence,
}

impl<'a, T: Transport> Channel<'a, T> {
    fn new(transport: &'a mut T) -> Self {
        Self { transport, next_seq: 0, hasher: Sha256::new() }
    }

    fn send(&mut self, msg: &ProtocolMessage) -> Result<(), SessionError> {
        let frame = Frame { tag: msg.tag(), seq: self.next_seq, payload: msg.encode_payload() };
        self.next_seq += 1;
        self.hasher.update(frame.encode());
        self.transport.send(&frame)
    }

    fn recv(&mut self) -> Result<Received, SessionError> {
        let frame = self.transport.recv()?;
        self.hasher.update(frame.encode());
        if frame.seq != self.next_seq {
            return Ok(Received::OutOfSequence);
        }
        self.next_seq += 1;
        let msg = ProtocolMessage::decode(frame.tag, &frame.payload)?;
        Ok(match msg {
            ProtocolMessage::Abort { reason } => Received::PeerAbort(reason),
            other => Received::Msg(other),
        })
    }

    fn digest(&self) -> [u8; 32] {
        self.hasher.clone().finalize().into()
    }
}

/// Runs one endpoint of the protocol to completion.
///
/// `seed` drives the endpoint's private randomness: for Alice the simulated
/// quantum exchange, for Bob the estimation subset and the privacy
/// amplification seed. Protocol-level aborts (estimation out of bounds,
/// verification failure, empty key balance, sequence violations) return an
/// aborted [`SessionResult`]; transport and framing failures are `Err`.
pub fn run_session<T: Transport>(
    role: Role,
    transport: &mut T,
    config: &SessionConfig,
    code: &LdpcCode,
    seed: u64,
) -> Result<SessionResult, SessionError> {
    config.validate()?;
    let mut session = Session {
        ch: Channel::new(transport),
        config,
        code,
        seed,
        role,
        frames_total: 0,
        frames_verified: 0,
        estimate: None,
    };
    session.run()
}

struct Session<'a, T: Transport> {
    ch: Channel<'a, T>,
    config: &'a SessionConfig,
    code: &'a LdpcCode,
    seed: u64,
    role: Role,
    frames_total: usize,
    frames_verified: usize,
    estimate: Option<ChannelEstimate>,
}

enum Flow<V> {
    Continue(V),
    Abort(AbortReason),
}

macro_rules! flow {
    ($self:ident, $e:expr) => {
        match $e? {
            Flow::Continue(v) => v,
            Flow::Abort(reason) => return $self.finish_aborted(reason),
        }
    };
}

impl<'a, T: Transport> Session<'a, T> {
    fn run(&mut self) -> Result<SessionResult, SessionError> {
        let expected_channel = self.expected_channel()?;
        let modulation = ModulationParams::from_alpha(self.config.alpha)
            .map_err(|e| SessionError::Config(e.to_string()))?;

        flow!(self, self.handshake());

        // quantum phase (simulated on Alice's endpoint) and basis reveal
        let (_bases, alice_quad, bob_y) =
            flow!(self, self.quantum_phase(&modulation, &expected_channel));

        // estimation on a disclosed subset, excluded from the key
        let est_indices = self.estimation_indices();
        let est = flow!(self, self.estimation_phase(&est_indices, &alice_quad, &bob_y));
        self.estimate = Some(est);
        flow!(self, self.check_guards(&est, &expected_channel));

        // reconciliation frames over the remaining symbols
        let key_indices = complement(self.config.batch_symbols, &est_indices);
        let frame_symbols = self.config.k_rep * self.code.n();
        let n_frames = key_indices.len() / frame_symbols;
        self.frames_total = n_frames;
        let key_bits = flow!(self, self.frame_phase(&key_indices, n_frames, &alice_quad, &bob_y, &est));

        // accounting and privacy amplification
        let report = self.build_report(&modulation, &expected_channel, n_frames)?;
        let n_key_symbols = n_frames * frame_symbols;
        let verify_leakage = VERIFY_TAG_BITS * n_frames as u64;
        let out_len = key_length_accounting(&report, verify_leakage, n_key_symbols);
        let leakage_bits =
            n_frames as u64 * (self.code.m_checks() as u64 + VERIFY_TAG_BITS);

        if out_len == 0 || n_frames == 0 {
            // negative or empty balance: the session carries no key
            return match self.role {
                Role::Bob => {
                    self.ch.send(&ProtocolMessage::Abort { reason: AbortReason::NoPositiveKey })?;
                    self.finish_aborted(AbortReason::NoPositiveKey)
                }
                Role::Alice => match self.ch.recv()? {
                    Received::PeerAbort(reason) => self.finish_aborted(reason),
                    _ => self.abort_with(AbortReason::NoPositiveKey),
                },
            };
        }

        let pa_seed = flow!(self, self.pa_phase(out_len));
        let key = privacy_amplification(&key_bits, pa_seed, out_len)?;

        // completion acknowledgement so Bob observes Alice's success
        match self.role {
            Role::Alice => self.ch.send(&ProtocolMessage::VerifyResult {
                frame_index: ACK_FRAME_INDEX,
                ok: true,
            })?,
            Role::Bob => {
                let ack = flow!(self, self.expect_verify());
                if ack != (ACK_FRAME_INDEX, true) {
                    return self.abort_with(AbortReason::UnexpectedMessage);
                }
            }
        }

        Ok(SessionResult {
            role: self.role,
            key,
            report: Some(report),
            leakage_bits,
            aborted: None,
            frames_total: self.frames_total,
            frames_verified: self.frames_verified,
            out_len,
            estimate: self.estimate,
            transcript_digest: self.ch.digest(),
        })
    }

    fn expected_channel(&self) -> Result<ChannelParams<f64>, SessionError> {
        ChannelParams::new(
            self.config.distance_km,
            self.config.xi,
            self.config.eta,
            self.config.noise_ref,
        )
        .map_err(|e| SessionError::Config(e.to_string()))
    }

    fn handshake(&mut self) -> Result<Flow<()>, SessionError> {
        let hello = ProtocolMessage::SessionStart {
            config_digest: self.config.digest(),
            seed_commitment: Sha256::digest(self.seed.to_le_bytes()).into(),
        };
        let peer = match self.role {
            Role::Alice => {
                self.ch.send(&hello)?;
                self.expect()?
            }
            Role::Bob => {
                let peer = self.expect()?;
                self.ch.send(&hello)?;
                peer
            }
        };
        match peer {
            Flow::Continue(ProtocolMessage::SessionStart { config_digest, .. }) => {
                if config_digest != self.config.digest() {
                    return self.send_abort(AbortReason::ConfigMismatch);
                }
                Ok(Flow::Continue(()))
            }
            Flow::Continue(_) => self.send_abort(AbortReason::UnexpectedMessage),
            Flow::Abort(r) => Ok(Flow::Abort(r)),
        }
    }

    /// Returns `(bases, alice_quad, bob_y)` as known to this endpoint:
    /// Alice holds her projections, Bob holds his outcomes; the estimation
    /// disclosures fill in the other side's values where needed.
    #[allow(clippy::type_complexity)]
    fn quantum_phase(
        &mut self,
        modulation: &ModulationParams<f64>,
        ch_params: &ChannelParams<f64>,
    ) -> Result<Flow<(Vec<Basis>, Vec<f64>, Vec<f64>)>, SessionError> {
        let n = self.config.batch_symbols;
        match self.role {
            Role::Alice => {
                let batch = simulate_batch(n, modulation, ch_params, self.seed);
                self.ch.send(&ProtocolMessage::QuantumBatch {
                    bases: batch.bases.clone(),
                    bob_y: batch.bob_y.clone(),
                })?;
                // basis reveal: recompute projections from the revealed bases
                let bases = match self.expect()? {
                    Flow::Continue(ProtocolMessage::BasisReveal { bases }) => bases,
                    Flow::Continue(_) => return self.send_abort(AbortReason::UnexpectedMessage),
                    Flow::Abort(r) => return Ok(Flow::Abort(r)),
                };
                if bases.len() != n {
                    return self.send_abort(AbortReason::UnexpectedMessage);
                }
                let amp = modulation.quadrature_amplitude();
                let alice_quad: Vec<f64> = batch
                    .symbols
                    .iter()
                    .zip(&bases)
                    .map(|(&s, &b)| quadrature_sign(s, b) * amp)
                    .collect();
                Ok(Flow::Continue((bases, alice_quad, batch.bob_y)))
            }
            Role::Bob => {
                let (bases, bob_y) = match self.expect()? {
                    Flow::Continue(ProtocolMessage::QuantumBatch { bases, bob_y }) => {
                        (bases, bob_y)
                    }
                    Flow::Continue(_) => return self.send_abort(AbortReason::UnexpectedMessage),
                    Flow::Abort(r) => return Ok(Flow::Abort(r)),
                };
                if bases.len() != n || bob_y.len() != n {
                    return self.send_abort(AbortReason::UnexpectedMessage);
                }
                self.ch.send(&ProtocolMessage::BasisReveal { bases: bases.clone() })?;
                // Bob never learns Alice's projections outside the
                // estimation subset; placeholder zeros elsewhere
                Ok(Flow::Continue((bases, vec![0.0; n], bob_y)))
            }
        }
    }

    fn estimation_indices(&self) -> Vec<u32> {
        // Bob's choice, derived deterministically from his seed; Alice
        // learns it from the disclosure. Both compute the same guard
        // decisions from the disclosed pairs.
        let n = self.config.batch_symbols;
        let n_est = (self.config.estimation_fraction * n as f64).floor() as usize;
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        let mut pool: Vec<u32> = (0..n as u32).collect();
        for i in 0..n_est {
            let j = rng.random_range(i..n);
            pool.swap(i, j);
        }
        let mut out = pool[..n_est].to_vec();
        out.sort_unstable();
        out
    }

    fn estimation_phase(
        &mut self,
        own_indices: &[u32],
        alice_quad: &[f64],
        bob_y: &[f64],
    ) -> Result<Flow<ChannelEstimate>, SessionError> {
        let (indices, disclosed_y, disclosed_a) = match self.role {
            Role::Bob => {
                let values: Vec<f64> =
                    own_indices.iter().map(|&i| bob_y[i as usize]).collect();
                self.ch.send(&ProtocolMessage::EstimationDisclosure {
                    indices: own_indices.to_vec(),
                    values: values.clone(),
                })?;
                let a_values = match self.expect()? {
                    Flow::Continue(ProtocolMessage::EstimationDisclosure { indices, values }) => {
                        if indices != own_indices {
                            return self.send_abort(AbortReason::UnexpectedMessage);
                        }
                        values
                    }
                    Flow::Continue(_) => return self.send_abort(AbortReason::UnexpectedMessage),
                    Flow::Abort(r) => return Ok(Flow::Abort(r)),
                };
                (own_indices.to_vec(), values, a_values)
            }
            Role::Alice => {
                let (indices, y_values) = match self.expect()? {
                    Flow::Continue(ProtocolMessage::EstimationDisclosure { indices, values }) => {
                        (indices, values)
                    }
                    Flow::Continue(_) => return self.send_abort(AbortReason::UnexpectedMessage),
                    Flow::Abort(r) => return Ok(Flow::Abort(r)),
                };
                if indices.iter().any(|&i| i as usize >= alice_quad.len())
                    || indices.len() != y_values.len()
                {
                    return self.send_abort(AbortReason::UnexpectedMessage);
                }
                let a_values: Vec<f64> =
                    indices.iter().map(|&i| alice_quad[i as usize]).collect();
                self.ch.send(&ProtocolMessage::EstimationDisclosure {
                    indices: indices.clone(),
                    values: a_values.clone(),
                })?;
                (indices, y_values, a_values)
            }
        };
        let _ = indices;
        match estimate_channel(&disclosed_a, &disclosed_y) {
            Ok(est) => Ok(Flow::Continue(est)),
            Err(_) => self.maybe_send_abort(AbortReason::EstimationOutOfBounds, Role::Bob),
        }
    }

    fn check_guards(
        &mut self,
        est: &ChannelEstimate,
        expected: &ChannelParams<f64>,
    ) -> Result<Flow<()>, SessionError> {
        let t_ok = (est.t_hat - expected.transmission()).abs() <= self.config.t_tolerance;
        let xi_ok = est.xi_hat <= self.config.xi_max && est.xi_hat >= -0.1;
        if t_ok && xi_ok {
            Ok(Flow::Continue(()))
        } else {
            // both endpoints reach the same verdict; Bob (next sender in
            // the script) emits the abort, Alice awaits it
            self.maybe_send_abort(AbortReason::EstimationOutOfBounds, Role::Bob)
        }
    }

    fn frame_phase(
        &mut self,
        key_indices: &[u32],
        n_frames: usize,
        alice_quad: &[f64],
        bob_y: &[f64],
        est: &ChannelEstimate,
    ) -> Result<Flow<Vec<u8>>, SessionError> {
        let frame_symbols = self.config.k_rep * self.code.n();
        let mut key_bits: Vec<u8> = Vec::with_capacity(n_frames * self.code.n());
        for frame in 0..n_frames {
            let idx = &key_indices[frame * frame_symbols..(frame + 1) * frame_symbols];
            match self.role {
                Role::Bob => {
                    let y_frame: Vec<f64> = idx.iter().map(|&i| bob_y[i as usize]).collect();
                    let (y_bits, side) = make_side_info(&y_frame, self.code, self.config.k_rep)
                        .map_err(|e| SessionError::Internal(e.to_string()))?;
                    self.ch.send(&ProtocolMessage::SideInfoMsg {
                        frame_index: frame as u64,
                        side,
                    })?;
                    let (frame_index, ok) = match self.expect_verify()? {
                        Flow::Continue(v) => v,
                        Flow::Abort(r) => return Ok(Flow::Abort(r)),
                    };
                    if frame_index != frame as u64 {
                        return self.send_abort(AbortReason::UnexpectedMessage);
                    }
                    if !ok {
                        return Ok(Flow::Abort(AbortReason::VerificationFailure));
                    }
                    self.frames_verified += 1;
                    key_bits.extend_from_slice(&y_bits);
                }
                Role::Alice => {
                    let side: SideInfo = match self.expect()? {
                        Flow::Continue(ProtocolMessage::SideInfoMsg { frame_index, side }) => {
                            if frame_index != frame as u64 || side.k_rep != self.config.k_rep {
                                return self.send_abort(AbortReason::UnexpectedMessage);
                            }
                            side
                        }
                        Flow::Continue(_) => {
                            return self.send_abort(AbortReason::UnexpectedMessage)
                        }
                        Flow::Abort(r) => return Ok(Flow::Abort(r)),
                    };
                    if side.magnitudes.len() != frame_symbols
                        || side.syndrome.len() != self.code.m_checks()
                    {
                        return self.send_abort(AbortReason::UnexpectedMessage);
                    }
                    let a_frame: Vec<f64> =
                        idx.iter().map(|&i| alice_quad[i as usize]).collect();
                    let llrs = compute_llrs(&a_frame, &side, est.t_hat, est.xi_hat);
                    let dec = bp_decode(self.code, &llrs, &side.syndrome, self.config.max_bp_iters);
                    let ok = dec.converged && verify_tag(&dec.bits) == side.verify_tag;
                    self.ch.send(&ProtocolMessage::VerifyResult {
                        frame_index: frame as u64,
                        ok,
                    })?;
                    if !ok {
                        return Ok(Flow::Abort(AbortReason::VerificationFailure));
                    }
                    self.frames_verified += 1;
                    key_bits.extend_from_slice(&dec.bits);
                }
            }
        }
        Ok(Flow::Continue(key_bits))
    }

    fn build_report(
        &self,
        modulation: &ModulationParams<f64>,
        expected: &ChannelParams<f64>,
        n_frames: usize,
    ) -> Result<KeyRateReport<f64>, SessionError> {
        // the expected (configured) channel sets the information-theoretic
        // terms; the estimates only guard against drift. The measured beta
        // reflects what the chain actually extracted.
        let snr = crate::security::snr(modulation, expected);
        let i_xy = match self.config.mi_convention {
            MiConvention::GaussianCapacity => 0.5 * (1.0 + snr).log2(),
            MiConvention::Biawgn => biawgn_mutual_info(snr),
        };
        let alpha = modulation.alpha();
        let z = compute_z(alpha, truncation_cutoff(alpha, TAIL_TOL))
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        let gamma = covariance_matrix(
            modulation,
            expected.transmission(),
            expected.excess_noise_at_bob(),
            z.z,
        )
        .map_err(|e| SessionError::Internal(e.to_string()))?;
        let s_ye = holevo_bound(&gamma).map_err(|e| SessionError::Internal(e.to_string()))?;
        let beta = if n_frames == 0 || i_xy <= 0.0 {
            0.0
        } else {
            self.code.rate() / (self.config.k_rep as f64 * i_xy)
        };
        Ok(KeyRateReport { snr, i_xy, s_ye, beta, k_real: beta * i_xy - s_ye, alpha_used: alpha })
    }

    fn pa_phase(&mut self, out_len: usize) -> Result<Flow<u64>, SessionError> {
        match self.role {
            Role::Bob => {
                let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
                rng.set_stream(2);
                let pa_seed: u64 = rng.random();
                self.ch.send(&ProtocolMessage::PaSeed {
                    seed: pa_seed,
                    out_len: out_len as u64,
                })?;
                Ok(Flow::Continue(pa_seed))
            }
            Role::Alice => match self.expect()? {
                Flow::Continue(ProtocolMessage::PaSeed { seed, out_len: peer_len }) => {
                    if peer_len != out_len as u64 {
                        return self.send_abort(AbortReason::AccountingMismatch);
                    }
                    Ok(Flow::Continue(seed))
                }
                Flow::Continue(_) => self.send_abort(AbortReason::UnexpectedMessage),
                Flow::Abort(r) => Ok(Flow::Abort(r)),
            },
        }
    }

    fn expect(&mut self) -> Result<Flow<ProtocolMessage>, SessionError> {
        match self.ch.recv()? {
            Received::Msg(m) => Ok(Flow::Continue(m)),
            Received::PeerAbort(reason) => Ok(Flow::Abort(reason)),
            Received::OutOfSequence => self.send_abort(AbortReason::SequenceViolation),
        }
    }

    fn expect_verify(&mut self) -> Result<Flow<(u64, bool)>, SessionError> {
        match self.expect()? {
            Flow::Continue(ProtocolMessage::VerifyResult { frame_index, ok }) => {
                Ok(Flow::Continue((frame_index, ok)))
            }
            Flow::Continue(_) => self.send_abort(AbortReason::UnexpectedMessage),
            Flow::Abort(r) => Ok(Flow::Abort(r)),
        }
    }

    /// Sends an abort and routes control into the aborted path.
    fn send_abort<V>(&mut self, reason: AbortReason) -> Result<Flow<V>, SessionError> {
        self.ch.send(&ProtocolMessage::Abort { reason })?;
        Ok(Flow::Abort(reason))
    }

    /// Abort that only one scripted role emits; the other endpoint reads
    /// the peer's abort so the transcripts stay aligned.
    fn maybe_send_abort<V>(
        &mut self,
        reason: AbortReason,
        sender: Role,
    ) -> Result<Flow<V>, SessionError> {
        if self.role == sender {
            self.send_abort(reason)
        } else {
            match self.ch.recv()? {
                Received::PeerAbort(r) => Ok(Flow::Abort(r)),
                _ => Ok(Flow::Abort(reason)),
            }
        }
    }

    fn abort_with(&mut self, reason: AbortReason) -> Result<SessionResult, SessionError> {
        self.ch.send(&ProtocolMessage::Abort { reason })?;
        self.finish_aborted(reason)
    }

    fn finish_aborted(&mut self, reason: AbortReason) -> Result<SessionResult, SessionError> {
        Ok(SessionResult {
            role: self.role,
            key: Vec::new(),
            report: None,
            leakage_bits: self.frames_total as u64
                * (self.code.m_checks() as u64 + VERIFY_TAG_BITS),
            aborted: Some(reason),
            frames_total: self.frames_total,
            frames_verified: self.frames_verified,
            out_len: 0,
            estimate: self.estimate,
            transcript_digest: self.ch.digest(),
        })
    }
}

/// Ascending indices of `0..n` not present in the sorted `exclude` list.
fn complement(n: usize, exclude: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(n - exclude.len());
    let mut it = exclude.iter().peekable();
    for i in 0..n as u32 {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Runs both endpoints over an in-process transport pair.
pub fn run_loopback_session(
    config: &SessionConfig,
    code: &LdpcCode,
    alice_seed: u64,
    bob_seed: u64,
) -> Result<(SessionResult, SessionResult), SessionError> {
    let (mut ta, mut tb) = LoopbackTransport::pair();
    std::thread::scope(|scope| {
        let alice = scope.spawn(|| run_session(Role::Alice, &mut ta, config, code, alice_seed));
        let bob = run_session(Role::Bob, &mut tb, config, code, bob_seed);
        let alice = alice.join().map_err(|_| SessionError::Internal("alice panicked".into()))?;
        Ok((alice?, bob?))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconcile::peg_regular;

    fn toy_config() -> SessionConfig {
        SessionConfig {
            code_id: "toy".into(),
            k_rep: 2,
            batch_symbols: 24_000,
            estimation_fraction: 0.1,
            alpha: 0.5,
            distance_km: 0.0,
            xi: 0.0,
            eta: 1.0,
            t_tolerance: 0.2,
            xi_max: 0.05,
            max_bp_iters: 100,
            ..SessionConfig::default()
        }
    }

    fn toy_code() -> LdpcCode {
        peg_regular(1024, 3, 6, 99)
    }

    #[test]
    fn loopback_benign_session_agrees() {
        let config = toy_config();
        let code = toy_code();
        let (alice, bob) = run_loopback_session(&config, &code, 11, 22).unwrap();
        assert_eq!(alice.aborted, None, "alice aborted: {:?}", alice.aborted);
        assert_eq!(bob.aborted, None);
        assert!(!alice.key.is_empty());
        assert_eq!(alice.key, bob.key);
        assert_eq!(alice.out_len, bob.out_len);
        assert_eq!(alice.transcript_digest, bob.transcript_digest);
        assert_eq!(alice.frames_verified, alice.frames_total);
        assert!(alice.leakage_bits > 0);
        let (ra, rb) = (alice.report.unwrap(), bob.report.unwrap());
        assert_eq!(ra.k_real, rb.k_real);
    }

    #[test]
    fn transcripts_reproducible() {
        let config = toy_config();
        let code = toy_code();
        let (a1, b1) = run_loopback_session(&config, &code, 5, 6).unwrap();
        let (a2, b2) = run_loopback_session(&config, &code, 5, 6).unwrap();
        assert_eq!(a1.transcript_digest, a2.transcript_digest);
        assert_eq!(b1.key, b2.key);
        let (a3, _) = run_loopback_session(&config, &code, 7, 6).unwrap();
        assert_ne!(a1.transcript_digest, a3.transcript_digest);
    }

    #[test]
    fn config_mismatch_aborts() {
        let config_a = toy_config();
        let mut config_b = toy_config();
        config_b.k_rep = 4;
        let code = toy_code();
        let (mut ta, mut tb) = LoopbackTransport::pair();
        let (alice, bob) = std::thread::scope(|scope| {
            let a = scope.spawn(|| run_session(Role::Alice, &mut ta, &config_a, &code, 1));
            let b = run_session(Role::Bob, &mut tb, &config_b, &code, 2);
            (a.join().unwrap(), b)
        });
        let alice = alice.unwrap();
        let bob = bob.unwrap();
        assert_eq!(alice.aborted, Some(AbortReason::ConfigMismatch));
        assert_eq!(bob.aborted, Some(AbortReason::ConfigMismatch));
        assert!(alice.key.is_empty());
    }

    #[test]
    fn excess_noise_above_tolerance_aborts() {
        // simulate xi = 0.08 at Bob but guard at 0.05
        let mut config = toy_config();
        config.xi = 0.08;
        config.noise_ref = crate::security::NoiseRef::BobInput;
        config.xi_max = 0.05;
        let code = toy_code();
        let (alice, bob) = run_loopback_session(&config, &code, 3, 4).unwrap();
        assert_eq!(alice.aborted, Some(AbortReason::EstimationOutOfBounds));
        assert_eq!(bob.aborted, Some(AbortReason::EstimationOutOfBounds));
    }

    #[test]
    fn hopeless_channel_aborts_without_key() {
        // near-zero SNR: decoding cannot verify, or the balance is empty;
        // either way the session must abort, not hang or panic
        let mut config = toy_config();
        config.alpha = 0.05;
        config.distance_km = 150.0;
        config.eta = 0.6;
        config.t_tolerance = 1.0;
        let code = toy_code();
        let (alice, bob) = run_loopback_session(&config, &code, 13, 14).unwrap();
        assert!(alice.aborted.is_some());
        assert_eq!(alice.aborted, bob.aborted);
        assert!(alice.key.is_empty() && bob.key.is_empty());
    }

    #[test]
    fn accounting_examples() {
        // no Eve term, perfect reconciliation: out_len ~ extracted - tag
        let report = KeyRateReport {
            snr: 1.0,
            i_xy: 0.5,
            s_ye: 0.0,
            beta: 0.8,
            k_real: 0.4,
            alpha_used: 0.5,
        };
        let n = 10_000usize;
        let out = key_length_accounting(&report, 64, n);
        assert_eq!(out, (n as f64 * 0.4).floor() as usize - 64);

        // negative balance clamps to zero
        let report = KeyRateReport {
            snr: 1.0,
            i_xy: 0.5,
            s_ye: 0.9,
            beta: 0.8,
            k_real: -0.5,
            alpha_used: 0.5,
        };
        assert_eq!(key_length_accounting(&report, 64, n), 0);
    }

    #[test]
    fn complement_splits_indices() {
        let excl = vec![1u32, 3, 4];
        assert_eq!(complement(6, &excl), vec![0, 2, 5]);
        assert_eq!(complement(3, &[]), vec![0, 1, 2]);
    }

    #[test]
    fn tcp_session_matches_loopback() {
        let config = toy_config();
        let code = toy_code();
        let (loop_a, loop_b) = run_loopback_session(&config, &code, 31, 32).unwrap();

        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let config2 = config.clone();
        let code2 = code.clone();
        let bob_thread = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            stream.set_nodelay(true).ok();
            let mut t = TcpTransport::new(stream);
            run_session(Role::Bob, &mut t, &config2, &code2, 32).unwrap()
        });
        let stream = std::net::TcpStream::connect(addr).unwrap();
        stream.set_nodelay(true).ok();
        let mut t = TcpTransport::new(stream);
        let alice = run_session(Role::Alice, &mut t, &config, &code, 31).unwrap();
        let bob = bob_thread.join().unwrap();

        // transport independence: identical transcripts and keys
        assert_eq!(alice.transcript_digest, loop_a.transcript_digest);
        assert_eq!(bob.transcript_digest, loop_b.transcript_digest);
        assert_eq!(alice.key, loop_a.key);
        assert_eq!(bob.key, loop_b.key);
    }
}
