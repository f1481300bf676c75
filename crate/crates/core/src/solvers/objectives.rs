//! Output-entropy and output-norm objectives with analytic gradients.

use crate::channel::Channel;
use crate::matrix::{ComplexMatrix, SchattenP, C64, ZERO};

use super::descent::Objective;

/// Floor for eigenvalues inside `ln` when forming gradients. Directions
/// with a zero eigenvalue carry (numerically) zero weight in the gradient.
const LOG_FLOOR: f64 = 1e-300;

pub(crate) fn entropy_terms(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum()
}

/// `Σ_j K_j† X v_j` with `v_j = K_j ψ`.
fn adjoint_on_images(channel: &Channel, x: &ComplexMatrix, images: &[Vec<C64>]) -> Vec<C64> {
    let mut out = vec![ZERO; channel.dim_in()];
    for (k, v) in channel.kraus().iter().zip(images) {
        let xv = x.mul_vec(v);
        for (o, t) in out.iter_mut().zip(k.adjoint_mul_vec(&xv)) {
            *o += t;
        }
    }
    out
}

fn images(channel: &Channel, psi: &[C64]) -> (Vec<Vec<C64>>, ComplexMatrix) {
    let n = channel.dim_out();
    let mut sigma = ComplexMatrix::zeros(n, n);
    let imgs: Vec<Vec<C64>> = channel.kraus().iter().map(|k| k.mul_vec(psi)).collect();
    for v in &imgs {
        for i in 0..n {
            if v[i] == ZERO {
                continue;
            }
            for j in 0..n {
                sigma[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    (imgs, sigma)
}

/// `ψ ↦ S(Φ(|ψ⟩⟨ψ|))`
pub(crate) struct OutputEntropy<'a> {
    pub channel: &'a Channel,
}

impl Objective for OutputEntropy<'_> {
    fn value(&self, psi: &[C64]) -> f64 {
        entropy_terms(&self.channel.apply_pure(psi).eigvalsh())
    }

    fn value_grad(&self, psi: &[C64]) -> (f64, Vec<C64>) {
        let (imgs, sigma) = images(self.channel, psi);
        let eig = sigma.eigh();
        let value = entropy_terms(&eig.values);
        // dS = −tr[(ln σ + I) dσ]
        let l = eig.reconstruct_with(|v| v.max(LOG_FLOOR).ln() + 1.0);
        let grad = adjoint_on_images(self.channel, &l, &imgs)
            .into_iter()
            .map(|z| z * -2.0)
            .collect();
        (value, grad)
    }
}

/// `ψ ↦ −‖Φ(|ψ⟩⟨ψ|)‖_p` (negated so the solver always minimizes).
pub(crate) struct NegOutputNorm<'a> {
    pub channel: &'a Channel,
    pub p: SchattenP,
}

pub(crate) fn norm_of_spectrum(values: &[f64], p: SchattenP) -> f64 {
    match p {
        SchattenP::Infinity => values.iter().copied().fold(0.0, f64::max),
        SchattenP::Finite(p) => values
            .iter()
            .map(|v| v.max(0.0).powf(p))
            .sum::<f64>()
            .powf(1.0 / p),
    }
}

impl Objective for NegOutputNorm<'_> {
    fn value(&self, psi: &[C64]) -> f64 {
        -norm_of_spectrum(&self.channel.apply_pure(psi).eigvalsh(), self.p)
    }

    fn value_grad(&self, psi: &[C64]) -> (f64, Vec<C64>) {
        let (imgs, sigma) = images(self.channel, psi);
        let eig = sigma.eigh();
        let norm = norm_of_spectrum(&eig.values, self.p);
        // d‖σ‖_p = ‖σ‖_p^{1−p} tr[σ^{p−1} dσ]; for p = ∞ the derivative of the
        // top eigenvalue, taking the lowest-index eigenvector on ties.
        let (weight, scale) = match self.p {
            SchattenP::Finite(p) => {
                let m = eig.reconstruct_with(|v| v.max(0.0).powf(p - 1.0));
                (m, norm.powf(1.0 - p))
            }
            SchattenP::Infinity => {
                let top = eig.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let k = eig
                    .values
                    .iter()
                    .position(|&v| v >= top - 1e-12)
                    .expect("nonempty spectrum");
                let q = eig.vector(k);
                (ComplexMatrix::outer(&q, &q), 1.0)
            }
        };
        let grad = adjoint_on_images(self.channel, &weight, &imgs)
            .into_iter()
            .map(|z| z * (-2.0 * scale))
            .collect();
        (-norm, grad)
    }
}

/// Average output entropy of the pure decomposition `ψ̃_i = Σ_k U_ik a_k`
/// of `ρ = Σ_k a_k a_k†`, as a function of the `m × r` isometry `U`.
///
/// Each member contributes `p_i S(σ_i / p_i) = −tr σ_i ln σ_i + p_i ln p_i`
/// with `σ_i = Φ(ψ̃_i ψ̃_i†)` and `p_i = tr σ_i`.
pub(crate) struct RoofEntropy<'a> {
    pub channel: &'a Channel,
    /// Columns `a_k` of a square-root factor of `ρ`.
    pub factor: Vec<Vec<C64>>,
    pub members: usize,
}

impl RoofEntropy<'_> {
    pub fn member_vectors(&self, u: &[C64]) -> Vec<Vec<C64>> {
        let r = self.factor.len();
        let n = self.channel.dim_in();
        (0..self.members)
            .map(|i| {
                let mut v = vec![ZERO; n];
                for (k, a) in self.factor.iter().enumerate() {
                    let w = u[i * r + k];
                    for (vx, ax) in v.iter_mut().zip(a) {
                        *vx += w * ax;
                    }
                }
                v
            })
            .collect()
    }

    fn member_term(values: &[f64]) -> (f64, f64) {
        let p: f64 = values.iter().map(|v| v.max(0.0)).sum();
        if p <= 0.0 {
            return (0.0, 0.0);
        }
        (entropy_terms(values) + p * p.ln(), p)
    }
}

impl Objective for RoofEntropy<'_> {
    fn value(&self, u: &[C64]) -> f64 {
        self.member_vectors(u)
            .iter()
            .map(|v| Self::member_term(&self.channel.apply_pure(v).eigvalsh()).0)
            .sum()
    }

    fn value_grad(&self, u: &[C64]) -> (f64, Vec<C64>) {
        let r = self.factor.len();
        let mut grad = vec![ZERO; self.members * r];
        let mut total = 0.0;
        for (i, v) in self.member_vectors(u).iter().enumerate() {
            let (imgs, sigma) = images(self.channel, v);
            let eig = sigma.eigh();
            let (term, p) = Self::member_term(&eig.values);
            total += term;
            if p < LOG_FLOOR {
                continue;
            }
            let lp = p.ln();
            let l = eig.reconstruct_with(|x| x.max(LOG_FLOOR).ln() - lp);
            let h: Vec<C64> = adjoint_on_images(self.channel, &l, &imgs)
                .into_iter()
                .map(|z| z * -2.0)
                .collect();
            for (k, a) in self.factor.iter().enumerate() {
                grad[i * r + k] = a.iter().zip(&h).map(|(ax, hx)| ax.conj() * hx).sum();
            }
        }
        (total, grad)
    }
}
