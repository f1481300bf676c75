//! Discrete Weyl (clock-and-shift) operators on `C^d`.
//!
//! `U|e_k⟩ = |e_{k+1 mod d}⟩`, `V|e_k⟩ = exp(2πik/d)|e_k⟩` and
//! `W_(x,y) = U^x V^y`. Averaging the conjugation by all `d²` of them sends
//! every state to `I/d`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, DensityMatrix, C64, ONE};

/// Flattening convention for `z = (x, y)`; used in every file and Kraus list.
pub const INDEX_CONVENTION: &str = "z=(x,y) -> x*d+y";

/// An element `(x, y)` of `Z_d ⊕ Z_d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: usize,
    pub y: usize,
}

impl GroupElement {
    pub const ZERO: GroupElement = GroupElement { x: 0, y: 0 };

    pub fn new(x: usize, y: usize) -> Self {
        GroupElement { x, y }
    }

    pub fn from_index(index: usize, d: usize) -> Self {
        GroupElement {
            x: index / d,
            y: index % d,
        }
    }

    /// Flat index `x·d + y`.
    pub fn index(&self, d: usize) -> Result<usize> {
        if self.x >= d || self.y >= d {
            return Err(Error::domain(format!(
                "group element ({}, {}) outside Z_{d} ⊕ Z_{d}",
                self.x, self.y
            )));
        }
        Ok(self.x * d + self.y)
    }

    /// All `d²` elements in flat-index order.
    pub fn all(d: usize) -> impl Iterator<Item = GroupElement> {
        (0..d * d).map(move |i| GroupElement::from_index(i, d))
    }
}

#[derive(Clone, Debug)]
pub struct WeylSystem {
    dim: usize,
    shift: ComplexMatrix,
    clock: ComplexMatrix,
    ops: Vec<ComplexMatrix>,
}

/// Builds the `d²` Weyl operators in flat-index order.
pub fn build_weyl(d: usize) -> Result<WeylSystem> {
    if d == 0 {
        return Err(Error::domain("Weyl system needs dimension >= 1"));
    }
    let shift = ComplexMatrix::from_fn(d, d, |i, j| {
        if i == (j + 1) % d {
            ONE
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let clock = ComplexMatrix::from_fn(d, d, |i, j| {
        if i == j {
            root_of_unity(i, d)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let ops = GroupElement::all(d)
        .map(|z| {
            // U^x V^y has a single nonzero per column: V^y|e_k⟩ = ω^{yk}|e_k⟩,
            // then U^x moves it to row k + x.
            ComplexMatrix::from_fn(d, d, |i, k| {
                if i == (k + z.x) % d {
                    root_of_unity(z.y * k, d)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        })
        .collect();
    Ok(WeylSystem {
        dim: d,
        shift,
        clock,
        ops,
    })
}

/// `exp(2πi k / d)`, with `k` reduced mod `d` first so the phase is exact
/// for the trivial powers.
fn root_of_unity(k: usize, d: usize) -> C64 {
    let k = k % d;
    if k == 0 {
        return ONE;
    }
    C64::from_polar(1.0, 2.0 * PI * k as f64 / d as f64)
}

impl WeylSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `U`
    pub fn shift(&self) -> &ComplexMatrix {
        &self.shift
    }

    /// `V`
    pub fn clock(&self) -> &ComplexMatrix {
        &self.clock
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn op(&self, z: GroupElement) -> Result<&ComplexMatrix> {
        Ok(&self.ops[z.index(self.dim)?])
    }

    /// `(1/d²) Σ_z W_z ρ W_z†`
    pub fn twirl(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::mismatch(format!(
                "twirl over C^{} applied to a {}-dimensional state",
                self.dim,
                rho.dim()
            )));
        }
        let d = self.dim;
        let mut acc = ComplexMatrix::zeros(d, d);
        for w in &self.ops {
            acc = &acc + &w.conjugate(rho.matrix());
        }
        Ok(DensityMatrix::from_trusted(
            acc.scale_real(1.0 / (d * d) as f64),
        ))
    }
}
