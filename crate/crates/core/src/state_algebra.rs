//! Spectral decomposition of the four-state mixture, its purification and
//! the quadrature correlation feeding the covariance matrix.
//!
//! The signal state is the uniform mixture of the four coherent states
//! `|alpha*exp(i(2k+1)pi/4)>`. Its eigenvalues have closed forms; the
//! eigenvectors live on Fock indices `n = k (mod 4)` and are handled in a
//! truncated Fock basis. Quadratures use shot-noise units: `X = a + a^dag`,
//! vacuum variance 1, so the modulation variance is `V_A = 2*alpha^2` and
//! Alice's per-quadrature symbol mean is `+-alpha*sqrt(2)`.

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

/// Default bound on the Poisson photon-number tail left outside the
/// truncated Fock basis.
pub const TAIL_TOL: f64 = 1e-12;

/// Smallest Fock-space truncation used regardless of amplitude.
pub const N_MAX_FLOOR: usize = 32;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("amplitude must be positive and finite, got {0}")]
    InvalidAmplitude(f64),
    #[error("truncation at n_max={n_max} leaves tail mass {tail:.3e} > {tol:.3e}")]
    Truncation { n_max: usize, tail: f64, tol: f64 },
    #[error("transmission must lie in (0, 1], got {0}")]
    InvalidTransmission(f64),
    #[error("excess noise must be non-negative, got {0}")]
    InvalidExcessNoise(f64),
    #[error("correlation must be non-negative, got {0}")]
    InvalidCorrelation(f64),
}

/// Amplitude of the quaternary modulation, with the derived variance.
///
/// Invariant: `alpha > 0` and `V_A = 2*alpha^2` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationParams<R: Real> {
    alpha: R,
}

impl<R: Real> ModulationParams<R> {
    pub fn from_alpha(alpha: R) -> Result<Self, StateError> {
        if !(alpha.is_finite() && alpha > R::zero()) {
            return Err(StateError::InvalidAmplitude(alpha.as_f64()));
        }
        Ok(Self { alpha })
    }

    /// Builds from the modulation variance `V_A = 2*alpha^2`.
    pub fn from_variance(v_a: R) -> Result<Self, StateError> {
        if !(v_a.is_finite() && v_a > R::zero()) {
            return Err(StateError::InvalidAmplitude(v_a.as_f64()));
        }
        Self::from_alpha((v_a / R::of(2.0)).sqrt())
    }

    pub fn alpha(&self) -> R {
        self.alpha
    }

    /// `V_A` in shot-noise units.
    pub fn modulation_variance(&self) -> R {
        R::of(2.0) * self.alpha * self.alpha
    }

    /// Magnitude of Alice's symbol mean on either quadrature, `alpha*sqrt(2)`.
    pub fn quadrature_amplitude(&self) -> R {
        self.alpha * R::of(2.0).sqrt()
    }
}

/// Closed-form eigenvalues of the four-state mixture.
///
/// Written in the overflow-free form
/// `lambda_{0,2} = (1 + e^{-2a})/4 +- e^{-a} cos(a) / 2`,
/// `lambda_{1,3} = (1 - e^{-2a})/4 +- e^{-a} sin(a) / 2` with `a = alpha^2`;
/// they sum to 1 up to rounding.
pub fn eigenvalues<R: Real>(alpha: R) -> Result<[R; 4], StateError> {
    if !(alpha.is_finite() && alpha >= R::zero()) {
        return Err(StateError::InvalidAmplitude(alpha.as_f64()));
    }
    let a = alpha * alpha;
    let half = R::of(0.5);
    let quarter = R::of(0.25);
    let e1 = (-a).exp();
    let e2 = (-(a + a)).exp();
    let even = quarter * (R::one() + e2);
    let odd = quarter * (R::one() - e2);
    Ok([
        even + half * e1 * a.cos(),
        odd + half * e1 * a.sin(),
        even - half * e1 * a.cos(),
        odd - half * e1 * a.sin(),
    ])
}

/// Smallest truncation photon number such that the Poisson(`alpha^2`) tail
/// beyond it is below `tail_tol`, floored at [`N_MAX_FLOOR`].
pub fn truncation_cutoff<R: Real>(alpha: R, tail_tol: f64) -> usize {
    let mu = (alpha * alpha).as_f64();
    let mut pmf = (-mu).exp();
    let mut cum = pmf;
    let mut m = 0usize;
    while 1.0 - cum >= tail_tol && m < 10_000 {
        m += 1;
        pmf *= mu / m as f64;
        cum += pmf;
    }
    m.max(N_MAX_FLOOR)
}

fn poisson_tail(mu: f64, n_max: usize) -> f64 {
    let mut pmf = (-mu).exp();
    let mut cum = pmf;
    for m in 1..=n_max {
        pmf *= mu / m as f64;
        cum += pmf;
    }
    (1.0 - cum).max(0.0)
}

/// Eigenvalues and truncated eigenvectors of the four-state mixture.
#[derive(Debug, Clone)]
pub struct SpectralData<R: Real> {
    alpha: R,
    n_max: usize,
    lambda: [R; 4],
    phi: [Vec<R>; 4],
    negligible: [bool; 4],
}

impl<R: Real> SpectralData<R> {
    pub fn alpha(&self) -> R {
        self.alpha
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn lambda(&self) -> &[R; 4] {
        &self.lambda
    }

    /// Fock coefficients of `|phi_k>`; length `n_max + 1`, support on
    /// indices `n = k (mod 4)`.
    pub fn phi(&self, k: usize) -> &[R] {
        &self.phi[k]
    }

    /// True where the eigenvalue underflowed and the eigenvector was
    /// replaced by its `alpha -> 0` limit `|k>`.
    pub fn negligible(&self) -> &[bool; 4] {
        &self.negligible
    }

    /// Alice's measurement states `|psi_k> = 1/2 sum_m e^{-i(1+2k)m pi/4} |phi_m>`.
    ///
    /// The four vectors are pairwise orthonormal up to truncation error.
    pub fn psi_states(&self) -> [Vec<Complex<R>>; 4] {
        let dim = self.n_max + 1;
        let half = R::of(0.5);
        core::array::from_fn(|k| {
            let mut psi = vec![Complex::new(R::zero(), R::zero()); dim];
            for (m, phi_m) in self.phi.iter().enumerate() {
                let angle = R::of(-((1 + 2 * k) as f64) * (m as f64) * core::f64::consts::FRAC_PI_4);
                let phase = Complex::from_polar(half, angle);
                for (p, c) in phi_m.iter().zip(psi.iter_mut()) {
                    *c = *c + phase * *p;
                }
            }
            psi
        })
    }
}

/// Threshold below which an eigenvalue is treated as numerically absent.
/// About 1e-300 for `f64`, scaled analogously for other scalars.
fn underflow_threshold<R: Real>() -> R {
    let t = R::of(1e-300);
    if t > R::zero() {
        t
    } else {
        R::min_positive_value() * R::of(1e8)
    }
}

/// Builds the spectral decomposition in a Fock basis truncated at `n_max`.
///
/// Coefficient of `|phi_k>` on `|4n+k>` is
/// `(e^{-alpha^2/2}/sqrt(lambda_k)) * alpha^{4n+k} * (-1)^n / sqrt((4n+k)!)`,
/// accumulated iteratively so no factorial is ever formed.
pub fn phi_states<R: Real>(alpha: R, n_max: usize) -> Result<SpectralData<R>, StateError> {
    if !(alpha.is_finite() && alpha > R::zero()) {
        return Err(StateError::InvalidAmplitude(alpha.as_f64()));
    }
    let mu = (alpha * alpha).as_f64();
    let tail = poisson_tail(mu, n_max);
    if tail >= TAIL_TOL {
        return Err(StateError::Truncation { n_max, tail, tol: TAIL_TOL });
    }

    let lambda = eigenvalues(alpha)?;
    let dim = n_max + 1;
    let prefactor = (-(alpha * alpha) / R::of(2.0)).exp();
    let thr = underflow_threshold::<R>();
    let mut negligible = [false; 4];

    let phi = core::array::from_fn(|k| {
        let mut v = vec![R::zero(); dim];
        if lambda[k] < thr {
            negligible[k] = true;
            if k < dim {
                v[k] = R::one();
            }
            return v;
        }
        let norm = prefactor / lambda[k].sqrt();
        // term = alpha^m / sqrt(m!) for m = k, then stepped by 4
        let mut term = R::one();
        for j in 1..=k {
            term = term * alpha / R::of(j as f64).sqrt();
        }
        let mut sign = R::one();
        let mut m = k;
        while m < dim {
            v[m] = norm * term * sign;
            for j in (m + 1)..=(m + 4) {
                term = term * alpha / R::of(j as f64).sqrt();
            }
            sign = -sign;
            m += 4;
        }
        v
    });

    Ok(SpectralData { alpha, n_max, lambda, phi, negligible })
}

/// Convenience: [`phi_states`] with the truncation rule applied.
pub fn phi_states_auto<R: Real>(alpha: R) -> Result<SpectralData<R>, StateError> {
    phi_states(alpha, truncation_cutoff(alpha, TAIL_TOL))
}

/// Alice's measurement states for the given amplitude and truncation.
pub fn psi_states<R: Real>(alpha: R, n_max: usize) -> Result<[Vec<Complex<R>>; 4], StateError> {
    Ok(phi_states(alpha, n_max)?.psi_states())
}

/// Quadrature correlation of the purification, next to the EPR reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlations<R: Real> {
    /// `<Phi| X (x) X |Phi>` in shot-noise units.
    pub z: R,
    /// `sqrt(V_A^2 + 2 V_A)`, the correlation of an EPR pair of the same
    /// modulation variance.
    pub z_epr: R,
}

/// `Z_EPR` for a modulation variance `V_A`.
pub fn z_epr<R: Real>(v_a: R) -> R {
    (v_a * v_a + R::of(2.0) * v_a).sqrt()
}

/// Computes `Z = <Phi| X_A (x) X_B |Phi>` in the truncated Fock basis.
///
/// This numerical inner product is the defining route; the closed form in
/// [`correlation_closed_form`] is validated against it in tests.
pub fn compute_z<R: Real>(alpha: R, n_max: usize) -> Result<Correlations<R>, StateError> {
    let sd = phi_states(alpha, n_max)?;
    let dim = n_max + 1;

    // (X phi)[n] = sqrt(n) phi[n-1] + sqrt(n+1) phi[n+1]
    let x_apply = |v: &[R]| -> Vec<R> {
        let mut out = vec![R::zero(); dim];
        for n in 0..dim {
            let mut acc = R::zero();
            if n > 0 {
                acc = acc + R::of(n as f64).sqrt() * v[n - 1];
            }
            if n + 1 < dim {
                acc = acc + R::of((n + 1) as f64).sqrt() * v[n + 1];
            }
            out[n] = acc;
        }
        out
    };

    let x_phi: [Vec<R>; 4] = core::array::from_fn(|k| x_apply(sd.phi(k)));
    let mut z = R::zero();
    for k in 0..4 {
        for l in 0..4 {
            let xkl = sd
                .phi(k)
                .iter()
                .zip(x_phi[l].iter())
                .fold(R::zero(), |acc, (a, b)| acc + *a * *b);
            z = z + (sd.lambda[k] * sd.lambda[l]).sqrt() * xkl * xkl;
        }
    }

    let m = ModulationParams::from_alpha(alpha)?;
    Ok(Correlations { z, z_epr: z_epr(m.modulation_variance()) })
}

/// Candidate closed form `Z = 2 alpha^2 sum_k lambda_{k-1}^{3/2} / lambda_k^{1/2}`
/// (indices mod 4). Validated against [`compute_z`]; the numerical route is
/// authoritative.
pub fn correlation_closed_form<R: Real>(alpha: R) -> Result<R, StateError> {
    let lambda = eigenvalues(alpha)?;
    let mut sum = R::zero();
    for k in 0..4 {
        let prev = lambda[(k + 3) % 4];
        sum = sum + prev * prev.sqrt() / lambda[k].sqrt();
    }
    Ok(R::of(2.0) * alpha * alpha * sum)
}

/// Two-mode covariance matrix of the bipartite state in shot-noise units:
///
/// ```text
/// [ (V_A+1) I_2        sqrt(T) Z sigma_z  ]
/// [ sqrt(T) Z sigma_z  (T V_A + 1 + xi) I_2 ]
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix<R: Real> {
    m: [[R; 4]; 4],
}

impl<R: Real> CovarianceMatrix<R> {
    pub fn entries(&self) -> &[[R; 4]; 4] {
        &self.m
    }

    /// Alice's quadrature variance `V_A + 1`.
    pub fn alice_variance(&self) -> R {
        self.m[0][0]
    }

    /// Bob's quadrature variance `T V_A + 1 + xi`.
    pub fn bob_variance(&self) -> R {
        self.m[2][2]
    }

    /// Off-diagonal correlation `sqrt(T) Z`.
    pub fn correlation(&self) -> R {
        self.m[0][2]
    }
}

/// Assembles the covariance matrix from modulation, channel transmission,
/// excess noise at Bob's input, and the correlation `z`.
pub fn covariance_matrix<R: Real>(
    modulation: &ModulationParams<R>,
    transmission: R,
    excess_noise: R,
    z: R,
) -> Result<CovarianceMatrix<R>, StateError> {
    if !(transmission > R::zero() && transmission <= R::one()) {
        return Err(StateError::InvalidTransmission(transmission.as_f64()));
    }
    if !(excess_noise >= R::zero() && excess_noise.is_finite()) {
        return Err(StateError::InvalidExcessNoise(excess_noise.as_f64()));
    }
    if !(z >= R::zero() && z.is_finite()) {
        return Err(StateError::InvalidCorrelation(z.as_f64()));
    }
    let v_a = modulation.modulation_variance();
    let a = v_a + R::one();
    let b = transmission * v_a + R::one() + excess_noise;
    let c = transmission.sqrt() * z;
    let o = R::zero();
    Ok(CovarianceMatrix {
        m: [[a, o, c, o], [o, a, o, -c], [c, o, b, o], [o, -c, o, b]],
    })
}

/// Covariance matrix of a vacuum/zero-modulation state (identity channel
/// edge case used by tests).
pub fn covariance_from_blocks<R: Real>(a: R, b: R, c: R) -> CovarianceMatrix<R> {
    let o = R::zero();
    CovarianceMatrix {
        m: [[a, o, c, o], [o, a, o, -c], [c, o, b, o], [o, -c, o, b]],
    }
}
