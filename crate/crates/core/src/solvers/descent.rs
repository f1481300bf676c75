//! Riemannian gradient descent on the unit sphere and the complex Stiefel
//! manifold, with Armijo backtracking.
//!
//! Points are flat complex vectors; the gradient convention is the real
//! inner product `Re⟨g, dx⟩`, so a Euclidean gradient `g` satisfies
//! `df = Re Σ conj(g_i) dx_i`.

use crate::matrix::{inner, vec_norm, ComplexMatrix, C64};
use crate::random::{gaussian_vec, ginibre};

pub(crate) trait Manifold: Sync {
    /// Orthogonal projection of an ambient vector onto the tangent space at `x`.
    fn project(&self, x: &[C64], g: &[C64]) -> Vec<C64>;
    /// Maps an ambient point near the manifold back onto it.
    fn retract(&self, y: Vec<C64>) -> Vec<C64>;
    fn random_point(&self, rng: &mut dyn rand::RngCore) -> Vec<C64>;
}

pub(crate) trait Objective: Sync {
    fn value(&self, x: &[C64]) -> f64;
    /// Value and Euclidean gradient.
    fn value_grad(&self, x: &[C64]) -> (f64, Vec<C64>);
}

/// Unit sphere in `C^n`; retraction is re-normalization.
pub(crate) struct Sphere {
    pub n: usize,
}

impl Manifold for Sphere {
    fn project(&self, x: &[C64], g: &[C64]) -> Vec<C64> {
        let radial = inner(x, g).re;
        g.iter().zip(x).map(|(gi, xi)| gi - xi * radial).collect()
    }

    fn retract(&self, mut y: Vec<C64>) -> Vec<C64> {
        let norm = vec_norm(&y);
        for v in &mut y {
            *v /= norm;
        }
        y
    }

    fn random_point(&self, rng: &mut dyn rand::RngCore) -> Vec<C64> {
        loop {
            let v = gaussian_vec(self.n, rng);
            if vec_norm(&v) > 1e-8 {
                return self.retract(v);
            }
        }
    }
}

/// `m × r` complex matrices with orthonormal columns (`U†U = I_r`), stored
/// row-major. Retraction is the polar factor.
pub(crate) struct Stiefel {
    pub m: usize,
    pub r: usize,
}

impl Stiefel {
    fn as_matrix(&self, x: &[C64]) -> ComplexMatrix {
        ComplexMatrix::from_vec(self.m, self.r, x.to_vec()).expect("stiefel point shape")
    }
}

impl Manifold for Stiefel {
    fn project(&self, x: &[C64], g: &[C64]) -> Vec<C64> {
        let u = self.as_matrix(x);
        let gm = self.as_matrix(g);
        let sym = (&u.adjoint() * &gm).hermitian_part();
        (&gm - &(&u * &sym)).data().to_vec()
    }

    fn retract(&self, y: Vec<C64>) -> Vec<C64> {
        let ym = self.as_matrix(&y);
        let gram = &ym.adjoint() * &ym;
        let inv_sqrt = gram.eigh().reconstruct_with(|v| 1.0 / v.max(1e-300).sqrt());
        (&ym * &inv_sqrt).data().to_vec()
    }

    fn random_point(&self, rng: &mut dyn rand::RngCore) -> Vec<C64> {
        loop {
            let g = ginibre(self.m, self.r, rng);
            let gram = &g.adjoint() * &g;
            if gram.eigvalsh()[0] > 1e-8 {
                return self.retract(g.data().to_vec());
            }
        }
    }
}

pub(crate) fn real_inner(a: &[C64], b: &[C64]) -> f64 {
    inner(a, b).re
}

#[derive(Clone, Debug)]
pub(crate) struct LocalResult {
    pub value: f64,
    pub point: Vec<C64>,
    pub converged: bool,
    pub gradient_norm: f64,
    pub iterations: usize,
}

pub(crate) struct DescentSettings {
    pub max_iterations: usize,
    pub step_tolerance: f64,
}

const ARMIJO_C1: f64 = 1e-4;
const MIN_TRIAL_STEP: f64 = 1e-18;

/// Projected gradient descent from `start`. The first trial step of each
/// line search is the Barzilai–Borwein length from the previous iterate;
/// backtracking halves it until the Armijo condition holds. Stops when the
/// accepted step is shorter than `step_tolerance`, when no trial step
/// decreases the objective (converged to working precision), or after
/// `max_iterations` (flagged unconverged).
pub(crate) fn descend<M: Manifold, O: Objective>(
    manifold: &M,
    objective: &O,
    start: Vec<C64>,
    settings: &DescentSettings,
) -> LocalResult {
    let mut x = start;
    let (mut f, g) = objective.value_grad(&x);
    let mut rg = manifold.project(&x, &g);
    let mut prev: Option<(Vec<C64>, Vec<C64>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        let gn2 = real_inner(&rg, &rg);
        if gn2.sqrt() < 1e-15 {
            converged = true;
            break;
        }
        let mut t = match &prev {
            Some((xp, rgp)) => {
                let s: Vec<C64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
                let y: Vec<C64> = rg.iter().zip(rgp).map(|(a, b)| a - b).collect();
                let sy = real_inner(&s, &y);
                if sy > 0.0 {
                    real_inner(&s, &s) / sy
                } else {
                    1.0
                }
            }
            None => 1.0 / gn2.sqrt().max(1.0),
        }
        .clamp(1e-10, 1e6);

        let accepted = loop {
            let trial: Vec<C64> = x.iter().zip(&rg).map(|(xi, gi)| xi - gi * t).collect();
            let trial = manifold.retract(trial);
            let ft = objective.value(&trial);
            if ft <= f - ARMIJO_C1 * t * gn2 {
                break Some(trial);
            }
            t *= 0.5;
            if t < MIN_TRIAL_STEP {
                break None;
            }
        };
        iterations += 1;
        let Some(next) = accepted else {
            converged = true;
            break;
        };

        let step: f64 = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let (fn_, gn) = objective.value_grad(&next);
        prev = Some((std::mem::replace(&mut x, next), std::mem::take(&mut rg)));
        f = fn_;
        rg = manifold.project(&x, &gn);
        if step < settings.step_tolerance {
            converged = true;
            break;
        }
    }

    LocalResult {
        value: f,
        gradient_norm: real_inner(&rg, &rg).sqrt(),
        point: x,
        converged,
        iterations,
    }
}

/// Riemannian gradient at `x` next to its central finite-difference
/// estimate through the retraction, over every real ambient coordinate.
pub(crate) fn finite_difference_check<M: Manifold, O: Objective>(
    manifold: &M,
    objective: &O,
    x: &[C64],
    h: f64,
) -> (Vec<C64>, Vec<C64>) {
    let (_, g) = objective.value_grad(x);
    let analytic = manifold.project(x, &g);
    let mut numeric = vec![C64::new(0.0, 0.0); x.len()];
    for i in 0..x.len() {
        for (unit, slot) in [(C64::new(1.0, 0.0), 0), (C64::new(0.0, 1.0), 1)] {
            let mut plus = x.to_vec();
            plus[i] += unit * h;
            let mut minus = x.to_vec();
            minus[i] -= unit * h;
            let fp = objective.value(&manifold.retract(plus));
            let fm = objective.value(&manifold.retract(minus));
            let d = (fp - fm) / (2.0 * h);
            if slot == 0 {
                numeric[i].re = d;
            } else {
                numeric[i].im = d;
            }
        }
    }
    (analytic, numeric)
}

pub(crate) fn random_start<M: Manifold, R: rand::RngCore>(manifold: &M, rng: &mut R) -> Vec<C64> {
    manifold.random_point(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::rng;

    /// `f(x) = ⟨x, A x⟩` on the sphere: minimum is the smallest eigenvalue.
    struct Rayleigh(ComplexMatrix);

    impl Objective for Rayleigh {
        fn value(&self, x: &[C64]) -> f64 {
            inner(x, &self.0.mul_vec(x)).re
        }

        fn value_grad(&self, x: &[C64]) -> (f64, Vec<C64>) {
            let ax = self.0.mul_vec(x);
            (inner(x, &ax).re, ax.iter().map(|v| v * 2.0).collect())
        }
    }

    #[test]
    fn sphere_descent_finds_smallest_eigenvalue() {
        let mut r = rng(1);
        let g = ginibre(5, 5, &mut r);
        let a = (&g * &g.adjoint()).hermitian_part();
        let lo = a.eigvalsh()[0];
        let sphere = Sphere { n: 5 };
        let obj = Rayleigh(a);
        let res = descend(
            &sphere,
            &obj,
            random_start(&sphere, &mut r),
            &DescentSettings {
                max_iterations: 5000,
                step_tolerance: 1e-12,
            },
        );
        assert!(res.converged);
        assert!((res.value - lo).abs() < 1e-10, "{} vs {lo}", res.value);
    }

    #[test]
    fn stiefel_projection_and_retraction() {
        let st = Stiefel { m: 5, r: 3 };
        let mut r = rng(2);
        let u = st.random_point(&mut r);
        let um = st.as_matrix(&u);
        assert!((&um.adjoint() * &um).max_abs_diff(&ComplexMatrix::identity(3)) < 1e-13);
        let g = gaussian_vec(15, &mut r);
        let t = st.project(&u, &g);
        // Tangent vectors satisfy U†T + T†U = 0.
        let tm = st.as_matrix(&t);
        let skew = &(&um.adjoint() * &tm) + &(&tm.adjoint() * &um);
        assert!(skew.max_abs() < 1e-13);
        // Projection is idempotent.
        let tt = st.project(&u, &t);
        assert!(tt.iter().zip(&t).all(|(a, b)| (a - b).norm() < 1e-13));
    }

    #[test]
    fn finite_differences_match_on_rayleigh() {
        let mut r = rng(3);
        let g = ginibre(4, 4, &mut r);
        let obj = Rayleigh((&g * &g.adjoint()).hermitian_part());
        let sphere = Sphere { n: 4 };
        let x = sphere.random_point(&mut r);
        let (a, n) = finite_difference_check(&sphere, &obj, &x, 1e-6);
        let err: f64 = a
            .iter()
            .zip(&n)
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err / vec_norm(&n) < 1e-6);
    }
}
