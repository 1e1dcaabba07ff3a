//! Session configuration shared by both endpoints, with a key-value text
//! format and a canonical digest that the handshake compares.

use sha2::{Digest, Sha256};

use crate::security::{MiConvention, NoiseRef};

use super::SessionError;

/// Everything both endpoints must agree on before a session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// Identifier of the parity-check matrix (file stem or path); checked
    /// via the config digest, loaded by the caller.
    pub code_id: String,
    pub k_rep: usize,
    /// Symbols exchanged in the quantum phase.
    pub batch_symbols: usize,
    /// Fraction of symbols disclosed for parameter estimation.
    pub estimation_fraction: f64,
    /// Modulation amplitude.
    pub alpha: f64,
    pub distance_km: f64,
    pub xi: f64,
    pub eta: f64,
    pub noise_ref: NoiseRef,
    pub mi_convention: MiConvention,
    /// Abort when `|t_hat - T_expected|` exceeds this.
    pub t_tolerance: f64,
    /// Abort when the excess-noise estimate at Bob exceeds this.
    pub xi_max: f64,
    pub max_bp_iters: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            code_id: "codes/ra15_n20480.txt".into(),
            k_rep: 12,
            batch_symbols: 275_000,
            estimation_fraction: 0.1,
            alpha: 0.3248,
            distance_km: 25.0,
            xi: 0.005,
            eta: 0.6,
            noise_ref: NoiseRef::ChannelInput,
            mi_convention: MiConvention::GaussianCapacity,
            t_tolerance: 0.05,
            xi_max: 0.05,
            max_bp_iters: 200,
        }
    }
}

impl SessionConfig {
    /// Canonical text form; also the on-disk format.
    pub fn to_text(&self) -> String {
        format!(
            "code_id={}\nk_rep={}\nbatch_symbols={}\nestimation_fraction={}\nalpha={}\n\
             distance_km={}\nxi={}\neta={}\nnoise_ref={}\nmi_convention={}\n\
             t_tolerance={}\nxi_max={}\nmax_bp_iters={}\n",
            self.code_id,
            self.k_rep,
            self.batch_symbols,
            self.estimation_fraction,
            self.alpha,
            self.distance_km,
            self.xi,
            self.eta,
            match self.noise_ref {
                NoiseRef::ChannelInput => "channel-input",
                NoiseRef::BobInput => "bob-input",
            },
            match self.mi_convention {
                MiConvention::GaussianCapacity => "gaussian",
                MiConvention::Biawgn => "biawgn",
            },
            self.t_tolerance,
            self.xi_max,
            self.max_bp_iters,
        )
    }

    /// Parses the key-value format; unknown keys are rejected.
    pub fn from_text(text: &str) -> Result<Self, SessionError> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SessionError::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let parse_err =
                |e: &dyn std::fmt::Display| SessionError::Config(format!("{key}: {e}"));
            match key {
                "code_id" => cfg.code_id = value.to_string(),
                "k_rep" => cfg.k_rep = value.parse().map_err(|e| parse_err(&e))?,
                "batch_symbols" => cfg.batch_symbols = value.parse().map_err(|e| parse_err(&e))?,
                "estimation_fraction" => {
                    cfg.estimation_fraction = value.parse().map_err(|e| parse_err(&e))?
                }
                "alpha" => cfg.alpha = value.parse().map_err(|e| parse_err(&e))?,
                "distance_km" => cfg.distance_km = value.parse().map_err(|e| parse_err(&e))?,
                "xi" => cfg.xi = value.parse().map_err(|e| parse_err(&e))?,
                "eta" => cfg.eta = value.parse().map_err(|e| parse_err(&e))?,
                "noise_ref" => {
                    cfg.noise_ref = match value {
                        "channel-input" => NoiseRef::ChannelInput,
                        "bob-input" => NoiseRef::BobInput,
                        other => {
                            return Err(SessionError::Config(format!(
                                "noise_ref must be channel-input or bob-input, got {other}"
                            )))
                        }
                    }
                }
                "mi_convention" => {
                    cfg.mi_convention = match value {
                        "gaussian" => MiConvention::GaussianCapacity,
                        "biawgn" => MiConvention::Biawgn,
                        other => {
                            return Err(SessionError::Config(format!(
                                "mi_convention must be gaussian or biawgn, got {other}"
                            )))
                        }
                    }
                }
                "t_tolerance" => cfg.t_tolerance = value.parse().map_err(|e| parse_err(&e))?,
                "xi_max" => cfg.xi_max = value.parse().map_err(|e| parse_err(&e))?,
                "max_bp_iters" => cfg.max_bp_iters = value.parse().map_err(|e| parse_err(&e))?,
                other => {
                    return Err(SessionError::Config(format!("unknown key {other}")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(SessionError::Config(msg.to_string()))
            }
        };
        check(self.k_rep >= 1, "k_rep must be >= 1")?;
        check(self.batch_symbols >= 1, "batch_symbols must be >= 1")?;
        check(
            (0.0..1.0).contains(&self.estimation_fraction),
            "estimation_fraction must lie in [0, 1)",
        )?;
        check(self.alpha > 0.0, "alpha must be positive")?;
        check(self.distance_km >= 0.0, "distance must be >= 0")?;
        check(self.xi >= 0.0, "xi must be >= 0")?;
        check(self.eta > 0.0 && self.eta <= 1.0, "eta must lie in (0, 1]")?;
        check(self.t_tolerance > 0.0, "t_tolerance must be positive")?;
        check(self.max_bp_iters >= 1, "max_bp_iters must be >= 1")?;
        Ok(())
    }

    /// Digest of the canonical text; compared during the handshake.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }
}
