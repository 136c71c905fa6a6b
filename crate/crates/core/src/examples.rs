//! Built-in example geometries and seeded point sampling.
//!
//! Base charts use coordinates `(x¹, y¹, …, x^m, y^m, t)` and the contact
//! form `θ = dt − Σ y^k dx^k` (possibly rescaled). The defining frame of `H`
//! is `X_k = ∂_{x^k} + y^k ∂_t`, `Y_k = ∂_{y^k}`.
//!
//! Imaginary-valued forms `ℓ = iλ` are stored by their real part `λ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cr::PseudoHermitianStructure;
use crate::error::GeomError;
use crate::fields::{ChartPoint, OneForm, ScalarField, VectorField};
use crate::jet::Jet;

/// A named choice of `ℓ = iλ`.
#[derive(Clone, Debug)]
pub struct EllVariant {
    pub name: &'static str,
    pub lambda: OneForm,
    /// `λ` is exact by construction.
    pub closed: bool,
}

/// A registered example.
#[derive(Clone, Debug)]
pub struct ExampleGeometry {
    pub name: &'static str,
    pub description: &'static str,
    pub structure: PseudoHermitianStructure,
    /// Half-width of the sampling box `[−w, w]^n`.
    pub half_width: f64,
    pub seed: u64,
    pub ells: Vec<EllVariant>,
    /// Whether the structure is integrable by construction.
    pub integrable: bool,
    /// Rescaling function used to build the example, if any.
    pub rescaling: Option<ScalarField>,
}

/// Summary row for listings.
#[derive(Clone, Debug, Serialize)]
pub struct ExampleInfo {
    pub name: String,
    pub m: usize,
    pub dim: usize,
    pub half_width: f64,
    pub seed: u64,
    pub ell_variants: Vec<String>,
    pub description: String,
}

impl ExampleGeometry {
    pub fn m(&self) -> usize {
        self.structure.m()
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    pub fn ell(&self, name: &str) -> Option<&EllVariant> {
        self.ells.iter().find(|e| e.name == name)
    }

    pub fn info(&self) -> ExampleInfo {
        ExampleInfo {
            name: self.name.to_string(),
            m: self.m(),
            dim: self.dim(),
            half_width: self.half_width,
            seed: self.seed,
            ell_variants: self.ells.iter().map(|e| e.name.to_string()).collect(),
            description: self.description.to_string(),
        }
    }

    /// `count` base points drawn uniformly from the box.
    pub fn sample_points(&self, seed: u64, count: usize) -> Vec<ChartPoint> {
        sample_box(self.dim(), self.half_width, seed, count)
    }
}

/// Uniform samples from `[−w, w]^dim`, deterministic in `seed`.
pub fn sample_box(dim: usize, half_width: f64, seed: u64, count: usize) -> Vec<ChartPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c = (0..dim).map(|_| rng.gen_range(-half_width..half_width)).collect();
            ChartPoint::new(c).expect("sampled coordinates are finite")
        })
        .collect()
}

/// The standard contact form `dt − Σ y^k dx^k`.
pub fn heisenberg_theta(m: usize) -> OneForm {
    let n = 2 * m + 1;
    OneForm::new(n, move |x: &[Jet]| {
        let mut v: Vec<Jet> = x.iter().map(Jet::zero_like).collect();
        for k in 0..m {
            v[2 * k] = -&x[2 * k + 1];
        }
        v[2 * m] = x[0].lift(1.0);
        v
    })
}

/// The left-invariant frame `X_1, Y_1, …, X_m, Y_m`.
pub fn heisenberg_frame(m: usize) -> Vec<VectorField> {
    let n = 2 * m + 1;
    let mut out = Vec::with_capacity(2 * m);
    for k in 0..m {
        out.push(VectorField::new(n, move |x: &[Jet]| {
            let mut v: Vec<Jet> = x.iter().map(Jet::zero_like).collect();
            v[2 * k] = x[0].lift(1.0);
            v[2 * m] = x[2 * k + 1].clone();
            v
        }));
        out.push(VectorField::coordinate(n, 2 * k + 1));
    }
    out
}

/// The standard complex structure `X_k ↦ Y_k ↦ −X_k` as a frame matrix.
pub fn standard_j(m: usize) -> impl Fn(&[Jet]) -> Vec<Vec<Jet>> + Send + Sync + Clone + 'static {
    move |x: &[Jet]| {
        let h = 2 * m;
        let mut j = vec![vec![x[0].zero_like(); h]; h];
        for k in 0..m {
            j[2 * k + 1][2 * k] = x[0].lift(1.0);
            j[2 * k][2 * k + 1] = x[0].lift(-1.0);
        }
        j
    }
}

/// The flat Heisenberg structure of complex dimension `m`.
pub fn heisenberg(m: usize) -> PseudoHermitianStructure {
    PseudoHermitianStructure::new(m, heisenberg_theta(m), heisenberg_frame(m), standard_j(m))
        .expect("Heisenberg data is well formed")
}

/// Polynomial rescaling function used by the rescaled example.
pub fn rescaling_polynomial(m: usize) -> ScalarField {
    let n = 2 * m + 1;
    ScalarField::from_fn(n, move |x: &[Jet]| {
        let t = &x[n - 1];
        let mut f = &(&x[0] * &x[1]) * 0.12 + t * t * 0.05 + t * 0.08;
        if m >= 2 {
            f = f + &(&x[2] * &x[0]) * 0.07 - &(&x[3] * &x[3]) * 0.04 + &x[3] * 0.1;
        }
        f
    })
}

/// Symmetric shear matrix `S(p)` of the deformed example (`m = 2`).
fn shear(x: &[Jet], eps: f64) -> [[Jet; 2]; 2] {
    let s11 = x[0].sin() * eps;
    let s12 = (&x[4] + &x[1]).sin() * (0.5 * eps);
    let s22 = x[3].cos() * (0.3 * eps);
    [[s11, s12.clone()], [s12, s22]]
}

/// `J_ε = M J₀ M⁻¹` for the symplectic shear `M: X_k ↦ X_k + Σ_l S_kl Y_l`.
pub fn deformed_j(eps: f64) -> impl Fn(&[Jet]) -> Vec<Vec<Jet>> + Send + Sync + Clone + 'static {
    move |x: &[Jet]| {
        let s = shear(x, eps);
        let j0 = standard_j(2)(x);
        let mk = |sign: f64| {
            let mut m: Vec<Vec<Jet>> =
                (0..4).map(|r| (0..4).map(|c| x[0].lift(if r == c { 1.0 } else { 0.0 })).collect()).collect();
            for k in 0..2 {
                for l in 0..2 {
                    m[2 * l + 1][2 * k] = &s[k][l] * sign;
                }
            }
            m
        };
        let (m, minv) = (mk(1.0), mk(-1.0));
        matmul(&matmul(&m, &j0), &minv)
    }
}

fn matmul(a: &[Vec<Jet>], b: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = &a[i][0] * &b[0][j];
                    for k in 1..n {
                        acc += &a[i][k] * &b[k][j];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// The partially integrable deformation of the `m = 2` Heisenberg structure.
pub fn deformed(eps: f64) -> PseudoHermitianStructure {
    PseudoHermitianStructure::new(2, heisenberg_theta(2), heisenberg_frame(2), deformed_j(eps))
        .expect("deformed data is well formed")
}

/// `ℓ` variants on a base chart of complex dimension `m`.
pub fn ell_variants(m: usize) -> Vec<EllVariant> {
    let n = 2 * m + 1;
    let g = ScalarField::from_fn(n, move |x: &[Jet]| {
        let t = &x[n - 1];
        x[0].sin() * 0.3 + &(&x[1] * t) * 0.2 + &(&x[0] * &x[0]) * 0.1
    });
    let closed = g.differential();
    let generic = OneForm::new(n, move |x: &[Jet]| {
        let mut v: Vec<Jet> = x.iter().map(Jet::zero_like).collect();
        v[0] = &x[1] * 0.25 + &x[n - 1] * 0.1;
        v[1] = &(&x[0] * &x[n - 1]) * 0.15;
        v[n - 1] = x[1].sin() * 0.2;
        v
    });
    let mut out = vec![
        EllVariant { name: "zero", lambda: OneForm::zero(n), closed: true },
        EllVariant { name: "closed", lambda: closed, closed: true },
        EllVariant { name: "generic", lambda: generic, closed: false },
    ];
    if m >= 2 {
        // λ = x¹ dx²
        let mixed = OneForm::new(n, move |x: &[Jet]| {
            let mut v: Vec<Jet> = x.iter().map(Jet::zero_like).collect();
            v[2] = &x[0] * 0.4;
            v
        });
        out.push(EllVariant { name: "mixed", lambda: mixed, closed: false });
    }
    out
}

/// Deformation strength of the `deformed_m2` example.
pub const DEFORMATION: f64 = 0.35;

/// All built-in examples.
pub fn builtin_examples() -> Vec<ExampleGeometry> {
    let mk = |name, description, structure: PseudoHermitianStructure, integrable, rescaling| {
        let m = structure.m();
        ExampleGeometry {
            name,
            description,
            structure,
            half_width: 1.0,
            seed: 42,
            ells: ell_variants(m),
            integrable,
            rescaling,
        }
    };
    vec![
        mk("heisenberg_m1", "flat Heisenberg structure on R^3", heisenberg(1), true, None),
        mk("heisenberg_m2", "flat Heisenberg structure on R^5", heisenberg(2), true, None),
        mk(
            "heisenberg_m2_rescaled",
            "Heisenberg R^5 with contact form e^{2f} theta, f polynomial",
            heisenberg(2).rescale(&rescaling_polynomial(2)).expect("same chart"),
            true,
            Some(rescaling_polynomial(2)),
        ),
        mk(
            "deformed_m2",
            "R^5 with J conjugated by a point-dependent symplectic shear",
            deformed(DEFORMATION),
            false,
            None,
        ),
    ]
}

/// Looks up a built-in example by name.
pub fn example(name: &str) -> Result<ExampleGeometry, GeomError> {
    builtin_examples()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| GeomError::Unsupported(format!("unknown example `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cr::{classify_integrability, Integrability};
    use crate::webster::WebsterPoint;

    #[test]
    fn heisenberg_connection_vanishes() {
        let s = heisenberg(2);
        for p in sample_box(5, 1.0, 7, 3) {
            let w = WebsterPoint::at(&s, &p).unwrap();
            for g in w.gamma.iter().flatten().flatten() {
                assert!(g.value().abs() < 1e-12);
            }
            assert!(w.scal.value().abs() < 1e-12);
        }
    }

    #[test]
    fn classification_of_examples() {
        let pts = sample_box(3, 1.0, 1, 5);
        assert_eq!(classify_integrability(&heisenberg(1), &pts).unwrap(), Integrability::Integrable);
        let pts = sample_box(5, 1.0, 1, 5);
        assert_eq!(classify_integrability(&deformed(DEFORMATION), &pts).unwrap(), Integrability::PartiallyIntegrable);
    }

    #[test]
    fn undeformed_shear_is_heisenberg() {
        let p = ChartPoint::new(vec![0.3, -0.2, 0.5, 0.1, -0.7]).unwrap();
        let a = deformed(0.0).j_matrix(&p.seed(1));
        let b = heisenberg(2).j_matrix(&p.seed(1));
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                assert_eq!(x.value(), y.value());
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_box(5, 1.0, 42, 4);
        let b = sample_box(5, 1.0, 42, 4);
        assert_eq!(a, b);
    }
}
