//! Seeded sampling of states, isometries and unitaries.
//!
//! Every generator takes an explicit RNG; `rng(seed)` is the single way a
//! seed becomes a stream, so runs are reproducible across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, DensityMatrix, PureState, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a root seed with a stream index so that sub-tasks of one run draw
/// from unrelated streams.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = root ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    (0..n).map(|_| complex_gaussian(rng)).collect()
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar-distributed pure state.
pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    loop {
        if let Ok(psi) = PureState::normalized(gaussian_vec(dim, rng)) {
            return psi;
        }
    }
}

/// Random state of the given rank, `G G† / tr(G G†)` with `G` Ginibre.
/// Full rank draws are the induced (Hilbert–Schmidt) measure.
pub fn random_density_matrix<R: Rng + ?Sized>(
    dim: usize,
    rank: usize,
    rng: &mut R,
) -> DensityMatrix {
    let g = ginibre(dim, rank.max(1), rng);
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    DensityMatrix::from_trusted(gg.scale_real(1.0 / tr))
}

/// Haar-random isometry `rows × cols` (`rows ≥ cols`) from the QR of a
/// complex Gaussian matrix with the phases of `R`'s diagonal absorbed.
pub fn haar_isometry<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    if rows < cols {
        return Err(Error::domain(format!(
            "no {rows}x{cols} isometry exists (needs rows >= cols)"
        )));
    }
    let (q, _) = ginibre(rows, cols, rng).qr_positive();
    Ok(q)
}

pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    haar_isometry(dim, dim, rng).expect("square isometry always exists")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isometry_property() {
        let mut r = rng(3);
        let v = haar_isometry(6, 4, &mut r).unwrap();
        let vv = &v.adjoint() * &v;
        assert!(vv.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-13);
        assert!(haar_isometry(2, 3, &mut r).is_err());
    }

    #[test]
    fn determinism() {
        let a = gaussian_vec(5, &mut rng(42));
        let b = gaussian_vec(5, &mut rng(42));
        assert_eq!(a, b);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }

    #[test]
    fn random_states_are_valid() {
        let mut r = rng(9);
        for rank in 1..=4 {
            let rho = random_density_matrix(4, rank, &mut r);
            let checked = DensityMatrix::new(rho.matrix().clone()).unwrap();
            let positive = checked.eigenvalues().iter().filter(|&&v| v > 1e-12).count();
            assert_eq!(positive, rank);
        }
    }
}
