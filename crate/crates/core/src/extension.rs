//! Bistochastic and unital extensions of a channel.
//!
//! For `Φ: B(C^c) → B(C^d)` the bistochastic extension acts on
//! `C^{d²} ⊗ C^c` as
//!
//! ```text
//! Φ′(ρ̃) = Σ_z W_z Φ(E_z ρ̃ E_z†) W_z†,    E_z = ⟨z| ⊗ I_c,
//! ```
//!
//! so block `z` of the input is sent through `Φ` and rotated by the Weyl
//! operator `W_z`. Feeding `|(0,0)⟩⟨(0,0)| ⊗ ρ` reproduces `Φ(ρ)`, while the
//! maximally mixed input is twirled to `Ī_d`.
//!
//! The unital extension `Φ″(ρ̃) = Ī_{cd} ⊗ Φ′(ρ̃)` has equal input and output
//! dimension `d²c` and shifts every output entropy by exactly `ln(cd)`.

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, ChannelRecord};
use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, DensityMatrix, C64, ONE, ZERO};
use crate::weyl::{build_weyl, GroupElement, WeylSystem, INDEX_CONVENTION};

/// The `block_dim × (d²·block_dim)` matrix `⟨z| ⊗ I_block_dim`.
pub fn block_selector(z: GroupElement, d: usize, block_dim: usize) -> Result<ComplexMatrix> {
    let zi = z.index(d)?;
    let mut e = ComplexMatrix::zeros(block_dim, d * d * block_dim);
    for i in 0..block_dim {
        e[(i, zi * block_dim + i)] = ONE;
    }
    Ok(e)
}

/// `E_z = ⟨z| ⊗ I_c`, a `c × d²c` matrix.
pub fn embed_selector(z: GroupElement, d: usize, c: usize) -> Result<ComplexMatrix> {
    block_selector(z, d, c)
}

/// Diagonal block `ρ_z = E_z ρ̂ E_z†` of a `d² × d²` block matrix with
/// blocks of size `block_dim`.
pub fn diagonal_block(
    rho_hat: &ComplexMatrix,
    z: GroupElement,
    d: usize,
    block_dim: usize,
) -> Result<ComplexMatrix> {
    if rho_hat.shape() != (d * d * block_dim, d * d * block_dim) {
        return Err(Error::mismatch(format!(
            "expected a {0}x{0} block matrix, got {1}x{2}",
            d * d * block_dim,
            rho_hat.rows(),
            rho_hat.cols()
        )));
    }
    let zi = z.index(d)?;
    let off = zi * block_dim;
    Ok(rho_hat.block(off, off, block_dim, block_dim))
}

/// `|(0,0)⟩⟨(0,0)| ⊗ ρ`
pub fn embed_input(rho: &DensityMatrix, d: usize) -> DensityMatrix {
    embed_input_at(rho, d, GroupElement::ZERO).expect("(0,0) is always in range")
}

/// `|z⟩⟨z| ⊗ ρ`
pub fn embed_input_at(rho: &DensityMatrix, d: usize, z: GroupElement) -> Result<DensityMatrix> {
    let n = rho.dim();
    let off = z.index(d)? * n;
    let mut out = ComplexMatrix::zeros(d * d * n, d * d * n);
    for i in 0..n {
        for j in 0..n {
            out[(off + i, off + j)] = rho.matrix()[(i, j)];
        }
    }
    Ok(DensityMatrix::from_trusted(out))
}

/// `|(0,0)⟩ ⊗ ψ`
pub fn embed_vector(psi: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![ZERO; d * d * psi.len()];
    out[..psi.len()].copy_from_slice(psi);
    out
}

/// `Φ′` with Kraus operators `W_z K_j E_z`, `z` major and `j` minor.
pub fn bistochastic_extension(phi: &Channel) -> Channel {
    let weyl = build_weyl(phi.dim_out()).expect("channel output dimension is positive");
    bistochastic_extension_with(phi, &weyl)
}

fn bistochastic_extension_with(phi: &Channel, weyl: &WeylSystem) -> Channel {
    let (c, d) = (phi.dim_in(), phi.dim_out());
    let mut kraus = Vec::with_capacity(d * d * phi.kraus().len());
    for (zi, w) in weyl.ops().iter().enumerate() {
        for k in phi.kraus() {
            // W_z K_j E_z is W_z K_j placed in column block z.
            let wk = w * k;
            let mut op = ComplexMatrix::zeros(d, d * d * c);
            for r in 0..d {
                for s in 0..c {
                    op[(r, zi * c + s)] = wk[(r, s)];
                }
            }
            kraus.push(op);
        }
    }
    Channel::from_construction(
        format!("bistochastic_ext({})", phi.label()),
        d * d * c,
        d,
        kraus,
    )
}

/// `Φ″` with Kraus operators `(1/√(cd)) |m⟩ ⊗ (W_z K_j E_z)`, ordered by
/// `z`, then `j`, then `m`.
pub fn unital_extension(phi: &Channel) -> Channel {
    let prime = bistochastic_extension(phi);
    unital_from_bistochastic(phi, &prime)
}

fn unital_from_bistochastic(phi: &Channel, prime: &Channel) -> Channel {
    let (c, d) = (phi.dim_in(), phi.dim_out());
    let cd = c * d;
    let s = C64::new(1.0 / (cd as f64).sqrt(), 0.0);
    let n_in = prime.dim_in();
    let mut kraus = Vec::with_capacity(prime.kraus().len() * cd);
    for k in prime.kraus() {
        for m in 0..cd {
            let mut op = ComplexMatrix::zeros(cd * d, n_in);
            for r in 0..d {
                for col in 0..n_in {
                    op[(m * d + r, col)] = k[(r, col)] * s;
                }
            }
            kraus.push(op);
        }
    }
    Channel::from_construction(format!("unital_ext({})", phi.label()), n_in, cd * d, kraus)
}

/// A channel with both of its extensions.
#[derive(Clone, Debug)]
pub struct ExtensionBundle {
    pub base: Channel,
    pub bistochastic_ext: Channel,
    pub unital_ext: Channel,
    /// Output dimension of the base channel.
    pub d: usize,
    /// Input dimension of the base channel.
    pub c: usize,
    pub weyl: WeylSystem,
}

impl ExtensionBundle {
    pub fn new(phi: &Channel) -> Self {
        let weyl = build_weyl(phi.dim_out()).expect("channel output dimension is positive");
        let prime = bistochastic_extension_with(phi, &weyl);
        let unital = unital_from_bistochastic(phi, &prime);
        ExtensionBundle {
            base: phi.clone(),
            bistochastic_ext: prime,
            unital_ext: unital,
            d: phi.dim_out(),
            c: phi.dim_in(),
            weyl,
        }
    }

    /// `ln(cd)`: the entropy shift between `Φ″` and `Φ′` outputs.
    pub fn entropy_shift(&self) -> f64 {
        ((self.c * self.d) as f64).ln()
    }

    pub fn to_record(&self) -> BundleRecord {
        BundleRecord {
            base: self.base.clone().into(),
            bistochastic: self.bistochastic_ext.clone().into(),
            unital: self.unital_ext.clone().into(),
            d: self.d,
            c: self.c,
            weyl_index: INDEX_CONVENTION.to_string(),
        }
    }
}

/// On-disk form of an [`ExtensionBundle`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BundleRecord {
    pub base: ChannelRecord,
    pub bistochastic: ChannelRecord,
    pub unital: ChannelRecord,
    pub d: usize,
    pub c: usize,
    pub weyl_index: String,
}

impl TryFrom<BundleRecord> for ExtensionBundle {
    type Error = Error;

    fn try_from(r: BundleRecord) -> Result<Self> {
        if r.weyl_index != INDEX_CONVENTION {
            return Err(Error::Parse(format!(
                "unknown Weyl index convention {:?}",
                r.weyl_index
            )));
        }
        let base = Channel::try_from(r.base)?;
        let prime = Channel::try_from(r.bistochastic)?;
        let unital = Channel::try_from(r.unital)?;
        if (base.dim_out(), base.dim_in()) != (r.d, r.c) {
            return Err(Error::mismatch("bundle d/c disagree with the base channel"));
        }
        Ok(ExtensionBundle {
            weyl: build_weyl(r.d)?,
            base,
            bistochastic_ext: prime,
            unital_ext: unital,
            d: r.d,
            c: r.c,
        })
    }
}
