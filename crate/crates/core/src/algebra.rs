//! The |1|-graded Lie algebra `so(2, n+1)` in block-matrix form.
//!
//! Vectors of `ℝ^{2,n+1}` are ordered `(x₋, x₁, …, x_{n+1}, x₊)` with the scalar
//! product `x₋y₊ + x₊y₋ + xᵀ 𝕁 y`, `𝕁 = diag(−1, 1, …, 1)`. An element is
//!
//! ```text
//! ⎛ −a   l    0   ⎞
//! ⎜  m   A  −𝕁lᵀ  ⎟      m ∈ g₋₁,  (A, a) ∈ g₀ = co(1, n),  l ∈ g₁.
//! ⎝  0 −mᵀ𝕁   a   ⎠
//! ```
//!
//! Dual bases for the homology differential use the pairing `½ tr(XY)`, under
//! which the standard generators `ξ_i = e_i ∈ g₋₁` and `η_i = e_iᵀ ∈ g₁` are
//! dual. The Killing form of `so(2, n+1)` is `(n+1) tr(XY)`, i.e. `2(n+1)` times
//! this pairing.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::GeomError;

/// `𝕁 = diag(−1, 1, …, 1)` of size `n + 1`.
pub fn minkowski(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::identity(n + 1, n + 1);
    j[(0, 0)] = -1.0;
    j
}

/// Gram matrix of the scalar product on `ℝ^{2,n+1}`.
pub fn gram(n: usize) -> DMatrix<f64> {
    let d = n + 3;
    let mut g = DMatrix::zeros(d, d);
    g[(0, d - 1)] = 1.0;
    g[(d - 1, 0)] = 1.0;
    for i in 1..=n + 1 {
        g[(i, i)] = if i == 1 { -1.0 } else { 1.0 };
    }
    g
}

/// An element of `so(2, n+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoMatrix {
    n: usize,
    m: DMatrix<f64>,
}

/// Graded parts `(m, A, a, l)` of an algebra element.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedTriple {
    pub m: DVector<f64>,
    pub a_mat: DMatrix<f64>,
    pub a: f64,
    pub l: DVector<f64>,
}

impl GradedTriple {
    pub fn zero(n: usize) -> GradedTriple {
        GradedTriple { m: DVector::zeros(n + 1), a_mat: DMatrix::zeros(n + 1, n + 1), a: 0.0, l: DVector::zeros(n + 1) }
    }

    pub fn n(&self) -> usize {
        self.m.len() - 1
    }

    /// Block matrix of the triple.
    pub fn to_matrix(&self) -> Result<SoMatrix, GeomError> {
        let n = self.n();
        let k = n + 1;
        if self.a_mat.shape() != (k, k) || self.l.len() != k {
            return Err(GeomError::DimensionMismatch { expected: k, found: self.l.len() });
        }
        let j = minkowski(n);
        let skew = self.a_mat.transpose() * &j + &j * &self.a_mat;
        let defect = skew.amax();
        if defect > 1e-10 * (1.0 + self.a_mat.amax()) {
            return Err(GeomError::Precondition(format!("A is not in so(1,n) (defect {defect:e})")));
        }
        let mut out = DMatrix::zeros(n + 3, n + 3);
        out[(0, 0)] = -self.a;
        out[(n + 2, n + 2)] = self.a;
        let jl = &j * &self.l;
        let mj = self.m.transpose() * &j;
        for r in 0..k {
            out[(0, r + 1)] = self.l[r];
            out[(r + 1, 0)] = self.m[r];
            out[(r + 1, n + 2)] = -jl[r];
            out[(n + 2, r + 1)] = -mj[r];
            for c in 0..k {
                out[(r + 1, c + 1)] = self.a_mat[(r, c)];
            }
        }
        Ok(SoMatrix { n, m: out })
    }
}

impl SoMatrix {
    /// Wraps a matrix after checking `Mᵀ G + G M = 0`.
    pub fn new(m: DMatrix<f64>) -> Result<SoMatrix, GeomError> {
        let d = m.nrows();
        if d < 4 || m.ncols() != d {
            return Err(GeomError::Precondition(format!(
                "expected a square matrix of size ≥ 4, got {}×{}",
                d,
                m.ncols()
            )));
        }
        let n = d - 3;
        let g = gram(n);
        let defect = (m.transpose() * &g + &g * &m).amax();
        if defect > 1e-12 * (1.0 + m.amax()) {
            return Err(GeomError::Precondition(format!("matrix is not in so(2,n+1) (defect {defect:e})")));
        }
        Ok(SoMatrix { n, m })
    }

    /// Random element `G⁻¹K` with `K` antisymmetric, entries uniform in `[−1, 1]`.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> SoMatrix {
        let d = n + 3;
        let mut k = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in (i + 1)..d {
                let v: f64 = rng.gen_range(-1.0..1.0);
                k[(i, j)] = v;
                k[(j, i)] = -v;
            }
        }
        // G is its own inverse
        SoMatrix { n, m: gram(n) * k }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Membership defect `max |Mᵀ G + G M|`.
    pub fn membership_defect(&self) -> f64 {
        let g = gram(self.n);
        (self.m.transpose() * &g + &g * &self.m).amax()
    }

    pub fn triple(&self) -> GradedTriple {
        let n = self.n;
        let k = n + 1;
        GradedTriple {
            m: DVector::from_fn(k, |r, _| self.m[(r + 1, 0)]),
            a_mat: DMatrix::from_fn(k, k, |r, c| self.m[(r + 1, c + 1)]),
            a: -self.m[(0, 0)],
            l: DVector::from_fn(k, |c, _| self.m[(0, c + 1)]),
        }
    }

    /// Block of grade `k ∈ {−1, 0, 1}`.
    pub fn grade_project(&self, k: i32) -> Result<SoMatrix, GeomError> {
        let t = self.triple();
        let mut z = GradedTriple::zero(self.n);
        match k {
            -1 => z.m = t.m,
            0 => {
                z.a_mat = t.a_mat;
                z.a = t.a;
            }
            1 => z.l = t.l,
            _ => return Err(GeomError::Precondition(format!("grade {k} is not in {{-1, 0, 1}}"))),
        }
        z.to_matrix()
    }

    pub fn bracket(&self, other: &SoMatrix) -> Result<SoMatrix, GeomError> {
        if self.n != other.n {
            return Err(GeomError::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(SoMatrix { n: self.n, m: &self.m * &other.m - &other.m * &self.m })
    }

    pub fn add(&self, other: &SoMatrix) -> SoMatrix {
        SoMatrix { n: self.n, m: &self.m + &other.m }
    }

    pub fn scale(&self, c: f64) -> SoMatrix {
        SoMatrix { n: self.n, m: &self.m * c }
    }

    pub fn zero(n: usize) -> SoMatrix {
        SoMatrix { n, m: DMatrix::zeros(n + 3, n + 3) }
    }

    /// `exp(M)` as a group element.
    pub fn exp(&self) -> DMatrix<f64> {
        self.m.clone().exp()
    }

    /// `g M g⁻¹`.
    pub fn conjugate(&self, g: &DMatrix<f64>) -> Result<SoMatrix, GeomError> {
        let inv = g.clone().try_inverse().ok_or(GeomError::SingularMetric)?;
        SoMatrix::new(g * &self.m * inv)
    }

    pub fn max_abs(&self) -> f64 {
        self.m.amax()
    }
}

/// Standard generator `ξ_i ∈ g₋₁`.
pub fn xi(n: usize, i: usize) -> SoMatrix {
    let mut t = GradedTriple::zero(n);
    t.m[i] = 1.0;
    t.to_matrix().expect("generator is in the algebra")
}

/// Dual generator `η_i ∈ g₁`.
pub fn eta(n: usize, i: usize) -> SoMatrix {
    let mut t = GradedTriple::zero(n);
    t.l[i] = 1.0;
    t.to_matrix().expect("generator is in the algebra")
}

/// The pairing `½ tr(XY)`.
pub fn trace_pairing(x: &SoMatrix, y: &SoMatrix) -> f64 {
    0.5 * (x.matrix() * y.matrix()).trace()
}

/// Killing form `(n+1) tr(XY)` of `so(2, n+1)`.
pub fn killing_form(x: &SoMatrix, y: &SoMatrix) -> f64 {
    (x.n() as f64 + 1.0) * (x.matrix() * y.matrix()).trace()
}

/// A cochain `Λ^k g₋₁ → g` for `k ∈ {1, 2}`, stored by its values on the
/// standard generators. Degree-2 values are kept for all ordered pairs and
/// antisymmetry is checked on construction.
#[derive(Clone, Debug)]
pub struct Cochain {
    pub n: usize,
    pub degree: usize,
    pub values: Vec<SoMatrix>,
}

impl Cochain {
    pub fn degree1(n: usize, values: Vec<SoMatrix>) -> Result<Cochain, GeomError> {
        if values.len() != n + 1 {
            return Err(GeomError::DimensionMismatch { expected: n + 1, found: values.len() });
        }
        Ok(Cochain { n, degree: 1, values })
    }

    /// Degree-2 cochain from values on pairs `(i, j)`, flattened as `i*(n+1)+j`.
    pub fn degree2(n: usize, values: Vec<SoMatrix>) -> Result<Cochain, GeomError> {
        let k = n + 1;
        if values.len() != k * k {
            return Err(GeomError::DimensionMismatch { expected: k * k, found: values.len() });
        }
        for i in 0..k {
            for j in 0..k {
                let d = (values[i * k + j].matrix() + values[j * k + i].matrix()).amax();
                if d > 1e-12 * (1.0 + values[i * k + j].max_abs()) {
                    return Err(GeomError::Precondition(format!("cochain is not antisymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Cochain { n, degree: 2, values })
    }

    /// Random antisymmetric degree-2 cochain.
    pub fn random2<R: Rng>(n: usize, rng: &mut R) -> Cochain {
        let k = n + 1;
        let mut values = vec![SoMatrix::zero(n); k * k];
        for i in 0..k {
            for j in (i + 1)..k {
                let v = SoMatrix::random(n, rng);
                values[j * k + i] = v.scale(-1.0);
                values[i * k + j] = v;
            }
        }
        Cochain { n, degree: 2, values }
    }

    pub fn pair(&self, i: usize, j: usize) -> &SoMatrix {
        &self.values[i * (self.n + 1) + j]
    }
}

/// Result of the homology differential: a degree-0 value or a degree-1 cochain.
#[derive(Clone, Debug)]
pub enum Codifferential {
    Element(SoMatrix),
    Cochain(Cochain),
}

/// `∂*φ = Σ_i [η_i, φ(ξ_i)]` in degree 1 and `(∂*φ)(ξ) = Σ_i [η_i, φ(ξ_i, ξ)]`
/// in degree 2.
pub fn kostant_codifferential(phi: &Cochain) -> Result<Codifferential, GeomError> {
    let n = phi.n;
    let k = n + 1;
    match phi.degree {
        1 => {
            let mut acc = SoMatrix::zero(n);
            for i in 0..k {
                acc = acc.add(&eta(n, i).bracket(&phi.values[i])?);
            }
            Ok(Codifferential::Element(acc))
        }
        2 => {
            let mut values = Vec::with_capacity(k);
            for x in 0..k {
                let mut acc = SoMatrix::zero(n);
                for i in 0..k {
                    acc = acc.add(&eta(n, i).bracket(phi.pair(i, x))?);
                }
                values.push(acc);
            }
            Ok(Codifferential::Cochain(Cochain { n, degree: 1, values }))
        }
        d => Err(GeomError::Unsupported(format!("codifferential in degree {d}"))),
    }
}

/// Conclusions about an element with `β² = −id`.
#[derive(Clone, Debug, Serialize)]
pub struct ComplexElementReport {
    /// `‖β² + id‖_max`.
    pub square_defect: f64,
    pub m_norm: f64,
    pub jl_norm: f64,
    /// `⟨m, m⟩_𝕁`.
    pub m_lightlike: f64,
    /// `⟨𝕁lᵀ, 𝕁lᵀ⟩_𝕁`.
    pub jl_lightlike: f64,
    /// `‖A m − a m‖`.
    pub m_eigen: f64,
    /// `‖l A − a l‖`.
    pub l_eigen: f64,
    /// `‖(A|_W)² + id_W‖` on the 𝕁-orthocomplement of `span{m, 𝕁lᵀ}`.
    pub w_square: f64,
}

impl ComplexElementReport {
    /// Largest residual among the five conclusions.
    pub fn max_residual(&self) -> f64 {
        self.m_lightlike.abs().max(self.jl_lightlike.abs()).max(self.m_eigen).max(self.l_eigen).max(self.w_square)
    }
}

/// Decomposes `β` with `β² = −id` and evaluates the lightlike, eigenvector and
/// complex-structure conclusions.
pub fn analyze_complex_element(beta: &SoMatrix) -> Result<ComplexElementReport, GeomError> {
    let n = beta.n();
    let d = n + 3;
    let sq = beta.matrix() * beta.matrix() + DMatrix::<f64>::identity(d, d);
    let square_defect = sq.amax();
    if square_defect > 1e-8 {
        return Err(GeomError::Precondition(format!("β² ≠ −id (‖β²+id‖ = {square_defect:e})")));
    }
    let t = beta.triple();
    let j = minkowski(n);
    let jl = &j * &t.l;
    let m_lightlike = (t.m.transpose() * &j * &t.m)[(0, 0)];
    let jl_lightlike = (jl.transpose() * &j * &jl)[(0, 0)];
    let m_eigen = (&t.a_mat * &t.m - &t.m * t.a).amax();
    let l_eigen = (t.l.transpose() * &t.a_mat - t.l.transpose() * t.a).amax();
    // W = {w : ⟨m, w⟩ = ⟨𝕁lᵀ, w⟩ = 0}; its basis spans the kernel of the 2×(n+1) constraint matrix.
    let mut cons = DMatrix::zeros(2, n + 1);
    cons.row_mut(0).copy_from(&(t.m.transpose() * &j));
    cons.row_mut(1).copy_from(&(jl.transpose() * &j));
    let svd = nalgebra::SVD::new(cons.transpose() * &cons, true, true);
    let u = svd.u.ok_or_else(|| GeomError::Precondition("SVD failed".into()))?;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for (idx, s) in svd.singular_values.iter().enumerate() {
        if *s < 1e-10 {
            basis.push(u.column(idx).into_owned());
        }
    }
    let mut w_square: f64 = 0.0;
    if !basis.is_empty() {
        let b = DMatrix::from_columns(&basis);
        // A maps W into W modulo span{m, 𝕁lᵀ}; compare A²w + w projected back onto W.
        let proj = &b
            * (b.transpose() * &b).try_inverse().unwrap_or_else(|| DMatrix::identity(basis.len(), basis.len()))
            * b.transpose();
        let a2 = &t.a_mat * &t.a_mat;
        for w in &basis {
            let r = &proj * (&a2 * w + w);
            w_square = w_square.max(r.amax());
        }
    }
    Ok(ComplexElementReport {
        square_defect,
        m_norm: t.m.norm(),
        jl_norm: jl.norm(),
        m_lightlike,
        jl_lightlike,
        m_eigen,
        l_eigen,
        w_square,
    })
}

/// The model complex structure: first slot `2S` along a null direction, the
/// standard complex structure on the spacelike middle block, and the g₁ part
/// `−½ f(T*, ·)` for the null partner `T*` of `S`. Requires `n` odd.
pub fn canonical_complex_element(n: usize) -> Result<SoMatrix, GeomError> {
    if n % 2 == 0 || n < 3 {
        return Err(GeomError::Precondition(format!("n = {n} must be odd and at least 3")));
    }
    let k = n + 1;
    let r2 = std::f64::consts::SQRT_2;
    // S = (e₀ + e_n)/√2, T* = (e_n − e₀)/√2
    let mut t = GradedTriple::zero(n);
    t.m[0] = r2;
    t.m[k - 1] = r2;
    // l = −½ f(T*, ·): f(T*, e₀) = 1/√2, f(T*, e_n) = 1/√2
    t.l[0] = -0.5 / r2;
    t.l[k - 1] = -0.5 / r2;
    for p in 0..(k - 2) / 2 {
        let (x, y) = (1 + 2 * p, 2 + 2 * p);
        t.a_mat[(y, x)] = 1.0;
        t.a_mat[(x, y)] = -1.0;
    }
    t.to_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn graded_brackets_match_block_formulas() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut t = SoMatrix::random(n, &mut rng).triple();
        let m = t.m.clone();
        let l = t.l.clone();
        let gm = {
            let mut z = GradedTriple::zero(n);
            z.m = m.clone();
            z.to_matrix().unwrap()
        };
        let gl = {
            let mut z = GradedTriple::zero(n);
            z.l = l.clone();
            z.to_matrix().unwrap()
        };
        let j = minkowski(n);
        let ml = &m * l.transpose();
        let expect = GradedTriple {
            m: DVector::zeros(n + 1),
            a_mat: &ml - &j * ml.transpose() * &j,
            a: (l.transpose() * &m)[(0, 0)],
            l: DVector::zeros(n + 1),
        };
        let got = gm.bracket(&gl).unwrap();
        assert!((got.matrix() - expect.to_matrix().unwrap().matrix()).amax() < 1e-12);
        t.m = DVector::zeros(n + 1);
        t.l = DVector::zeros(n + 1);
        let g0 = t.to_matrix().unwrap();
        let got = g0.bracket(&gm).unwrap().triple();
        assert!((got.m - (&t.a_mat * &m + &m * t.a)).amax() < 1e-12);
    }

    #[test]
    fn canonical_element_squares_to_minus_one() {
        for n in [3, 5] {
            let b = canonical_complex_element(n).unwrap();
            let r = analyze_complex_element(&b).unwrap();
            assert!(r.square_defect < 1e-14 && r.max_residual() < 1e-14, "{r:?}");
            assert!(r.m_norm > 1.0 && r.jl_norm > 0.1);
        }
    }

    #[test]
    fn killing_duality_scale() {
        let n = 5;
        for i in 0..n + 1 {
            for j in 0..n + 1 {
                let p = trace_pairing(&xi(n, i), &eta(n, j));
                assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
                let k = killing_form(&xi(n, i), &eta(n, j));
                assert!((k - if i == j { 2.0 * (n as f64 + 1.0) } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn killing_form_matches_adjoint_trace() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = SoMatrix::random(n, &mut rng);
        let y = SoMatrix::random(n, &mut rng);
        // tr(ad X ∘ ad Y) over a basis of so(2, n+1)
        let d = n + 3;
        let g = gram(n);
        let mut basis = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                let mut k = DMatrix::zeros(d, d);
                k[(i, j)] = 1.0;
                k[(j, i)] = -1.0;
                basis.push(&g * k);
            }
        }
        let flat = |m: &DMatrix<f64>| DVector::from_iterator(d * d, m.iter().cloned());
        let bmat = DMatrix::from_columns(&basis.iter().map(flat).collect::<Vec<_>>());
        let pinv = bmat.clone().pseudo_inverse(1e-12).unwrap();
        let mut tr = 0.0;
        for (c, b) in basis.iter().enumerate() {
            let inner = y.matrix() * b - b * y.matrix();
            let outer = x.matrix() * &inner - &inner * x.matrix();
            tr += (&pinv * flat(&outer))[c];
        }
        assert!((tr - killing_form(&x, &y)).abs() < 1e-9 * (1.0 + tr.abs()));
    }
}
