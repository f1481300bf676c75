//! Quantum channels in Kraus form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::{tensor, ComplexMatrix, DensityMatrix, C64, ONE, ZERO};
use crate::random::{haar_isometry, rng};
use crate::weyl::build_weyl;

/// Tolerance on `Σ K†K = I` and on `Φ(Ī) = Ī`.
pub const CHANNEL_TOL: f64 = 1e-10;
/// Smallest Choi eigenvalue accepted as positive.
pub const CHOI_TOL: f64 = 1e-9;
/// The Choi check is skipped above this Choi dimension.
pub const CHOI_MAX_DIM: usize = 256;

/// A completely positive trace-preserving map `B(C^dim_in) → B(C^dim_out)`
/// given by Kraus operators of shape `dim_out × dim_in`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Channel {
    label: String,
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<ComplexMatrix>,
}

/// The raw on-disk form of a channel. Nothing is checked until it is turned
/// into a [`Channel`] or passed to [`validate_kraus`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub label: String,
    pub dim_in: usize,
    pub dim_out: usize,
    pub kraus: Vec<ComplexMatrix>,
}

impl TryFrom<ChannelRecord> for Channel {
    type Error = Error;

    fn try_from(r: ChannelRecord) -> Result<Self> {
        Channel::new(r.label, r.dim_in, r.dim_out, r.kraus)
    }
}

impl From<Channel> for ChannelRecord {
    fn from(c: Channel) -> Self {
        ChannelRecord {
            label: c.label,
            dim_in: c.dim_in,
            dim_out: c.dim_out,
            kraus: c.kraus,
        }
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let rec = ChannelRecord::deserialize(deserializer)?;
        Channel::try_from(rec).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    General,
    Bistochastic,
    Unital,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::General => "general",
            ChannelKind::Bistochastic => "bistochastic",
            ChannelKind::Unital => "unital",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub label: String,
    pub dim_in: usize,
    pub dim_out: usize,
    pub kraus_count: usize,
    /// `max |Σ K†K − I|`
    pub tp_residual: f64,
    /// `max |Φ(Ī_in) − Ī_out|`
    pub unitality_residual: f64,
    /// `None` when the Choi matrix is larger than [`CHOI_MAX_DIM`].
    pub choi_min_eigenvalue: Option<f64>,
    pub kind: ChannelKind,
    pub valid: bool,
    pub problems: Vec<String>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: C^{} -> C^{}, {} Kraus operators",
            self.label, self.dim_in, self.dim_out, self.kraus_count
        )?;
        writeln!(f, "  TP residual        {:.3e}", self.tp_residual)?;
        writeln!(f, "  unitality residual {:.3e}", self.unitality_residual)?;
        match self.choi_min_eigenvalue {
            Some(v) => writeln!(f, "  Choi min eigenvalue {v:.3e}")?,
            None => writeln!(f, "  Choi check skipped (too large)")?,
        }
        writeln!(f, "  kind {}", self.kind)?;
        write!(f, "  {}", if self.valid { "VALID" } else { "INVALID" })?;
        for p in &self.problems {
            write!(f, "\n  - {p}")?;
        }
        Ok(())
    }
}

fn check_shapes(dim_in: usize, dim_out: usize, kraus: &[ComplexMatrix]) -> Result<()> {
    if dim_in == 0 || dim_out == 0 {
        return Err(Error::mismatch("channel dimensions must be positive"));
    }
    if kraus.is_empty() {
        return Err(Error::mismatch(
            "a channel needs at least one Kraus operator",
        ));
    }
    for (j, k) in kraus.iter().enumerate() {
        if k.shape() != (dim_out, dim_in) {
            return Err(Error::mismatch(format!(
                "Kraus operator {j} is {}x{}, expected {dim_out}x{dim_in}",
                k.rows(),
                k.cols()
            )));
        }
    }
    Ok(())
}

fn kraus_gram(dim_in: usize, kraus: &[ComplexMatrix]) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(dim_in, dim_in);
    for k in kraus {
        acc = &acc + &(&k.adjoint() * k);
    }
    acc
}

fn kraus_apply(kraus: &[ComplexMatrix], dim_out: usize, x: &ComplexMatrix) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(dim_out, dim_out);
    for k in kraus {
        acc = &acc + &k.conjugate(x);
    }
    acc
}

/// Residuals and kind inference for a raw Kraus list.
pub fn validate_kraus(
    label: &str,
    dim_in: usize,
    dim_out: usize,
    kraus: &[ComplexMatrix],
) -> ValidationReport {
    let mut report = ValidationReport {
        label: label.to_string(),
        dim_in,
        dim_out,
        kraus_count: kraus.len(),
        tp_residual: f64::INFINITY,
        unitality_residual: f64::INFINITY,
        choi_min_eigenvalue: None,
        kind: ChannelKind::General,
        valid: false,
        problems: Vec::new(),
    };
    if let Err(e) = check_shapes(dim_in, dim_out, kraus) {
        report.problems.push(e.to_string());
        return report;
    }

    report.tp_residual = kraus_gram(dim_in, kraus).max_abs_diff(&ComplexMatrix::identity(dim_in));
    if report.tp_residual > CHANNEL_TOL {
        report.problems.push(format!(
            "not trace preserving: |ΣK†K − I| = {:.3e}",
            report.tp_residual
        ));
    }

    let mixed_in = ComplexMatrix::identity(dim_in).scale_real(1.0 / dim_in as f64);
    let mixed_out = ComplexMatrix::identity(dim_out).scale_real(1.0 / dim_out as f64);
    report.unitality_residual = kraus_apply(kraus, dim_out, &mixed_in).max_abs_diff(&mixed_out);
    report.kind = if report.unitality_residual <= CHANNEL_TOL {
        if dim_in == dim_out {
            ChannelKind::Unital
        } else {
            ChannelKind::Bistochastic
        }
    } else {
        ChannelKind::General
    };

    if dim_in * dim_out <= CHOI_MAX_DIM {
        let min = choi_matrix(dim_in, dim_out, kraus).eigvalsh()[0];
        report.choi_min_eigenvalue = Some(min);
        if min < -CHOI_TOL {
            report.problems.push(format!(
                "Choi matrix not positive: min eigenvalue {min:.3e}"
            ));
        }
    }
    report.valid = report.problems.is_empty();
    report
}

/// `J = Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`
pub fn choi_matrix(dim_in: usize, dim_out: usize, kraus: &[ComplexMatrix]) -> ComplexMatrix {
    let n = dim_in * dim_out;
    ComplexMatrix::from_fn(n, n, |r, c| {
        let (i, a) = (r / dim_out, r % dim_out);
        let (j, b) = (c / dim_out, c % dim_out);
        kraus.iter().map(|k| k[(a, i)] * k[(b, j)].conj()).sum()
    })
}

impl Channel {
    /// Checks shapes and trace preservation.
    pub fn new(
        label: impl Into<String>,
        dim_in: usize,
        dim_out: usize,
        kraus: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        check_shapes(dim_in, dim_out, &kraus)?;
        let residual = kraus_gram(dim_in, &kraus).max_abs_diff(&ComplexMatrix::identity(dim_in));
        if residual > CHANNEL_TOL {
            return Err(Error::Validation {
                invariant: "trace preservation (ΣK†K = I)",
                residual,
            });
        }
        Ok(Channel {
            label: label.into(),
            dim_in,
            dim_out,
            kraus,
        })
    }

    /// For constructions that are trace preserving by algebra; shapes are
    /// still checked in debug builds.
    pub(crate) fn from_construction(
        label: String,
        dim_in: usize,
        dim_out: usize,
        kraus: Vec<ComplexMatrix>,
    ) -> Self {
        debug_assert!(check_shapes(dim_in, dim_out, &kraus).is_ok());
        Channel {
            label,
            dim_in,
            dim_out,
            kraus,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// `Σ_j K_j ρ K_j†`
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_trusted(
            self.apply_operator(rho.matrix())?,
        ))
    }

    /// Action on an arbitrary `dim_in × dim_in` operator.
    pub fn apply_operator(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.shape() != (self.dim_in, self.dim_in) {
            return Err(Error::mismatch(format!(
                "channel {} takes {}x{} inputs, got {}x{}",
                self.label,
                self.dim_in,
                self.dim_in,
                x.rows(),
                x.cols()
            )));
        }
        Ok(kraus_apply(&self.kraus, self.dim_out, x))
    }

    /// `Σ_j (K_j ψ)(K_j ψ)†` for a (not necessarily normalized) vector.
    pub fn apply_pure(&self, psi: &[C64]) -> ComplexMatrix {
        assert_eq!(
            psi.len(),
            self.dim_in,
            "input vector has the wrong dimension"
        );
        let n = self.dim_out;
        let mut out = vec![ZERO; n * n];
        for k in &self.kraus {
            let v = k.mul_vec(psi);
            accumulate_outer(&mut out, &v);
        }
        ComplexMatrix::from_vec(n, n, out).expect("square buffer")
    }

    /// Adjoint map `X ↦ Σ_j K_j† X K_j`.
    pub fn adjoint_apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim_in, self.dim_in);
        for k in &self.kraus {
            acc = &acc + &(&(&k.adjoint() * x) * k);
        }
        acc
    }

    pub fn validate(&self) -> ValidationReport {
        validate_kraus(&self.label, self.dim_in, self.dim_out, &self.kraus)
    }

    pub fn kind(&self) -> ChannelKind {
        self.validate().kind
    }

    /// Largest entrywise difference between the two maps over all matrix
    /// units `|i⟩⟨j|`. Kraus lists are never compared directly.
    pub fn map_distance(&self, other: &Channel) -> Result<f64> {
        if self.dim_in != other.dim_in || self.dim_out != other.dim_out {
            return Err(Error::mismatch(format!(
                "cannot compare C^{}->C^{} with C^{}->C^{}",
                self.dim_in, self.dim_out, other.dim_in, other.dim_out
            )));
        }
        let mut worst = 0.0f64;
        for i in 0..self.dim_in {
            for j in 0..self.dim_in {
                let mut e = ComplexMatrix::zeros(self.dim_in, self.dim_in);
                e[(i, j)] = ONE;
                let a = self.apply_operator(&e)?;
                let b = other.apply_operator(&e)?;
                worst = worst.max(a.max_abs_diff(&b));
            }
        }
        Ok(worst)
    }

    /// Whether this channel acts as the identity map (up to 1e-12).
    pub fn is_identity_map(&self) -> bool {
        self.dim_in == self.dim_out
            && self
                .map_distance(&identity_channel(self.dim_in))
                .map(|d| d <= 1e-12)
                .unwrap_or(false)
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("channel serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn accumulate_outer(out: &mut [C64], v: &[C64]) {
    let n = v.len();
    for (i, &vi) in v.iter().enumerate() {
        if vi == ZERO {
            continue;
        }
        let row = &mut out[i * n..(i + 1) * n];
        for (o, vj) in row.iter_mut().zip(v) {
            *o += vi * vj.conj();
        }
    }
}

/// `(Φ⊗Ω)(|ψ⟩⟨ψ|)` without materializing the product Kraus list: with `ψ`
/// reshaped to a `dim_in(Φ) × dim_in(Ω)` matrix `Ψ`, `(A⊗B)ψ = vec(A Ψ Bᵀ)`.
pub fn tensor_apply_pure(phi: &Channel, omega: &Channel, psi: &[C64]) -> ComplexMatrix {
    assert_eq!(
        psi.len(),
        phi.dim_in * omega.dim_in,
        "input vector has the wrong dimension"
    );
    let grid = ComplexMatrix::from_vec(phi.dim_in, omega.dim_in, psi.to_vec()).expect("reshape");
    let n = phi.dim_out * omega.dim_out;
    let mut out = vec![ZERO; n * n];
    let omega_t: Vec<ComplexMatrix> = omega.kraus.iter().map(|b| b.transpose()).collect();
    for a in &phi.kraus {
        let left = a * &grid;
        for bt in &omega_t {
            let v = &left * bt;
            accumulate_outer(&mut out, v.data());
        }
    }
    ComplexMatrix::from_vec(n, n, out).expect("square buffer")
}

/// `Φ⊗Ω` with Kraus operators `K_j ⊗ L_k`, `j` major.
pub fn tensor_channel(phi: &Channel, omega: &Channel) -> Channel {
    let kraus = phi
        .kraus
        .iter()
        .flat_map(|a| omega.kraus.iter().map(move |b| tensor(a, b)))
        .collect();
    Channel::from_construction(
        format!("({})⊗({})", phi.label, omega.label),
        phi.dim_in * omega.dim_in,
        phi.dim_out * omega.dim_out,
        kraus,
    )
}

/// Full-rank environment used when none is requested.
pub fn default_env_dim(dim_in: usize, dim_out: usize) -> usize {
    dim_in * dim_out
}

/// Random channel from a Haar isometry `V: C^dim_in → C^dim_out ⊗ C^env`,
/// with `K_e = (I ⊗ ⟨e|) V`.
pub fn random_channel(dim_in: usize, dim_out: usize, env_dim: usize, seed: u64) -> Result<Channel> {
    if dim_in == 0 || dim_out == 0 || env_dim == 0 {
        return Err(Error::domain("random channel dimensions must be positive"));
    }
    if dim_out * env_dim < dim_in {
        return Err(Error::domain(format!(
            "dim_out * env_dim = {} < dim_in = {dim_in}: no isometry exists",
            dim_out * env_dim
        )));
    }
    let mut r = rng(seed);
    let v = haar_isometry(dim_out * env_dim, dim_in, &mut r)?;
    let kraus = (0..env_dim)
        .map(|e| ComplexMatrix::from_fn(dim_out, dim_in, |i, j| v[(i * env_dim + e, j)]))
        .collect();
    Channel::new(
        format!("random(din={dim_in},dout={dim_out},env={env_dim},seed={seed})"),
        dim_in,
        dim_out,
        kraus,
    )
}

pub fn identity_channel(d: usize) -> Channel {
    Channel::from_construction(
        format!("identity:{d}"),
        d,
        d,
        vec![ComplexMatrix::identity(d)],
    )
}

/// Canonical channel families, written `name:dim[:param]`.
#[derive(Clone, Debug, PartialEq)]
pub enum NamedChannel {
    Identity {
        d: usize,
    },
    /// `λρ + (1−λ)Ī`, `λ ∈ [0, 1]`.
    Depolarizing {
        d: usize,
        lambda: f64,
    },
    /// `ρ ↦ tr(ρ) Ī`
    CompletelyDepolarizing {
        d: usize,
    },
    /// `(tr(ρ) I − ρᵀ)/(d−1)`, `d ≥ 2`.
    WernerHolevo {
        d: usize,
    },
    /// Qubit amplitude damping with decay probability `γ`.
    AmplitudeDamping {
        gamma: f64,
    },
}

impl FromStr for NamedChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || {
            Error::Parse(format!(
                "invalid channel spec {s:?}; expected name:dim[:param]"
            ))
        };
        let dim = |i: usize| -> Result<usize> {
            parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad())
        };
        let param =
            |i: usize| -> Result<f64> { parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad()) };
        let spec = match parts[0] {
            "identity" | "id" if parts.len() == 2 => NamedChannel::Identity { d: dim(1)? },
            "depolarizing" | "depol" if parts.len() == 3 => NamedChannel::Depolarizing {
                d: dim(1)?,
                lambda: param(2)?,
            },
            "completely_depolarizing" if parts.len() == 2 => {
                NamedChannel::CompletelyDepolarizing { d: dim(1)? }
            }
            "werner_holevo" if parts.len() == 2 => NamedChannel::WernerHolevo { d: dim(1)? },
            "amplitude_damping" if parts.len() == 3 => {
                if dim(1)? != 2 {
                    return Err(Error::domain("amplitude_damping is a qubit channel"));
                }
                NamedChannel::AmplitudeDamping { gamma: param(2)? }
            }
            _ => return Err(Error::domain(format!("unknown channel {s:?}"))),
        };
        Ok(spec)
    }
}

impl fmt::Display for NamedChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamedChannel::Identity { d } => write!(f, "identity:{d}"),
            NamedChannel::Depolarizing { d, lambda } => write!(f, "depolarizing:{d}:{lambda}"),
            NamedChannel::CompletelyDepolarizing { d } => write!(f, "completely_depolarizing:{d}"),
            NamedChannel::WernerHolevo { d } => write!(f, "werner_holevo:{d}"),
            NamedChannel::AmplitudeDamping { gamma } => write!(f, "amplitude_damping:2:{gamma}"),
        }
    }
}

pub fn named_channel(spec: &NamedChannel) -> Result<Channel> {
    let label = spec.to_string();
    let real = |x: f64| C64::new(x, 0.0);
    match *spec {
        NamedChannel::Identity { d } => {
            if d == 0 {
                return Err(Error::domain("identity channel needs d >= 1"));
            }
            Ok(identity_channel(d))
        }
        NamedChannel::Depolarizing { d, lambda } => {
            if d == 0 || !(0.0..=1.0).contains(&lambda) {
                return Err(Error::domain(format!(
                    "depolarizing needs d >= 1 and λ in [0,1], got d={d}, λ={lambda}"
                )));
            }
            // (1/d²) Σ_z W_z ρ W_z† = Ī, so weight the identity term separately.
            let weyl = build_weyl(d)?;
            let d2 = (d * d) as f64;
            let kraus = weyl
                .ops()
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let weight = if i == 0 {
                        lambda + (1.0 - lambda) / d2
                    } else {
                        (1.0 - lambda) / d2
                    };
                    w.scale(real(weight.sqrt()))
                })
                .collect();
            Channel::new(label, d, d, kraus)
        }
        NamedChannel::CompletelyDepolarizing { d } => {
            if d == 0 {
                return Err(Error::domain(
                    "completely depolarizing channel needs d >= 1",
                ));
            }
            let s = 1.0 / (d as f64).sqrt();
            let kraus = (0..d * d)
                .map(|ij| {
                    let mut k = ComplexMatrix::zeros(d, d);
                    k[(ij / d, ij % d)] = real(s);
                    k
                })
                .collect();
            Channel::new(label, d, d, kraus)
        }
        NamedChannel::WernerHolevo { d } => {
            if d < 2 {
                return Err(Error::domain("Werner-Holevo channel needs d >= 2"));
            }
            let s = 1.0 / ((d - 1) as f64).sqrt();
            let mut kraus = Vec::with_capacity(d * (d - 1) / 2);
            for i in 0..d {
                for j in i + 1..d {
                    let mut k = ComplexMatrix::zeros(d, d);
                    k[(i, j)] = real(s);
                    k[(j, i)] = real(-s);
                    kraus.push(k);
                }
            }
            Channel::new(label, d, d, kraus)
        }
        NamedChannel::AmplitudeDamping { gamma } => {
            if !(0.0..=1.0).contains(&gamma) {
                return Err(Error::domain(format!(
                    "amplitude damping needs γ in [0,1], got {gamma}"
                )));
            }
            let k0 = ComplexMatrix::from_real_diagonal(&[1.0, (1.0 - gamma).sqrt()]);
            let mut k1 = ComplexMatrix::zeros(2, 2);
            k1[(0, 1)] = real(gamma.sqrt());
            Channel::new(label, 2, 2, vec![k0, k1])
        }
    }
}
