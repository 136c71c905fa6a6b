//! Pseudo-Hermitian structures on a chart.
//!
//! A structure is given by a contact form `θ`, a frame `F_1..F_2m` of the
//! contact distribution `H = ker θ` and the matrix of the almost complex map
//! `J` in that frame (`J F_b = Σ_a J_ab F_a`). [`CrPoint`] evaluates all
//! frame-level data at one chart point: the adapted frame `e_1..e_2m` with
//! `J e_{2α-1} = e_{2α}`, orthonormal for the Levi form `L(X,Y) = dθ(X,JY)`,
//! the Reeb field `T`, the dual coframe, the structure functions of the frame
//! and the Nijenhuis tensor.
//!
//! Frame indices are zero-based in code: `e_{2α}` and `e_{2α+1} = J e_{2α}`
//! for `α = 0..m`, and index `2m` is `T`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::GeomError;
use crate::fields::{bracket_components, d_components, ChartPoint, OneForm, ScalarField, VectorField};
use crate::jet::{dot, inverse, solve, Jet, MAX_ORDER};

/// Jet order used for base-manifold coordinates.
pub const BASE_ORDER: usize = MAX_ORDER;

type MatrixFn = dyn Fn(&[Jet]) -> Vec<Vec<Jet>> + Send + Sync;

/// Image of adapted-frame index `i` under `J`: `J e_i = sign * e_k`.
pub fn jmap(i: usize) -> (usize, f64) {
    if i % 2 == 0 {
        (i + 1, 1.0)
    } else {
        (i - 1, -1.0)
    }
}

/// Applies the standard complex structure to a vector of adapted-frame
/// components; a trailing `T` component, if present, is dropped to zero.
pub fn apply_j0(v: &[Jet]) -> Vec<Jet> {
    let h = v.len() - v.len() % 2;
    let mut out: Vec<Jet> = v.iter().map(Jet::zero_like).collect();
    for k in 0..h {
        let (t, s) = jmap(k);
        out[t] = &v[k] * s;
    }
    out
}

/// A contact form with a framed almost complex structure on its kernel.
#[derive(Clone)]
pub struct PseudoHermitianStructure {
    m: usize,
    theta: OneForm,
    frame: Vec<VectorField>,
    j: Arc<MatrixFn>,
}

impl fmt::Debug for PseudoHermitianStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PseudoHermitianStructure(m={})", self.m)
    }
}

impl PseudoHermitianStructure {
    pub fn new<F>(m: usize, theta: OneForm, frame: Vec<VectorField>, j: F) -> Result<Self, GeomError>
    where
        F: Fn(&[Jet]) -> Vec<Vec<Jet>> + Send + Sync + 'static,
    {
        let n = 2 * m + 1;
        if m == 0 {
            return Err(GeomError::Precondition("complex dimension must be positive".into()));
        }
        if theta.dim() != n {
            return Err(GeomError::DimensionMismatch { expected: n, found: theta.dim() });
        }
        if frame.len() != 2 * m {
            return Err(GeomError::Precondition(format!(
                "contact distribution frame needs {} fields, got {}",
                2 * m,
                frame.len()
            )));
        }
        if let Some(f) = frame.iter().find(|f| f.dim() != n) {
            return Err(GeomError::DimensionMismatch { expected: n, found: f.dim() });
        }
        Ok(PseudoHermitianStructure { m, theta, frame, j: Arc::new(j) })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        2 * self.m + 1
    }

    pub fn theta(&self) -> &OneForm {
        &self.theta
    }

    pub fn frame(&self) -> &[VectorField] {
        &self.frame
    }

    /// Matrix of `J` in the defining frame at the given coordinate jets.
    pub fn j_matrix(&self, x: &[Jet]) -> Vec<Vec<Jet>> {
        (self.j)(x)
    }

    /// Same `H` and `J` with another contact form.
    pub fn with_theta(&self, theta: OneForm) -> Result<Self, GeomError> {
        if theta.dim() != self.dim() {
            return Err(GeomError::DimensionMismatch { expected: self.dim(), found: theta.dim() });
        }
        Ok(PseudoHermitianStructure { theta, ..self.clone() })
    }

    /// Same `θ` and frame with another endomorphism of `H`.
    pub fn with_j<F>(&self, j: F) -> Self
    where
        F: Fn(&[Jet]) -> Vec<Vec<Jet>> + Send + Sync + 'static,
    {
        PseudoHermitianStructure { j: Arc::new(j), ..self.clone() }
    }

    /// The rescaled structure `θ̃ = e^{2f} θ` with the same `H` and `J`.
    pub fn rescale(&self, f: &ScalarField) -> Result<Self, GeomError> {
        let factor = f.scale(2.0).exp();
        self.with_theta(self.theta.scaled(&factor)?)
    }

    /// Evaluates the frame data at a chart point.
    pub fn at(&self, p: &ChartPoint) -> Result<CrPoint, GeomError> {
        if p.dim() != self.dim() {
            return Err(GeomError::DimensionMismatch { expected: self.dim(), found: p.dim() });
        }
        CrPoint::new(self, p.seed(BASE_ORDER))
    }
}

/// The rescaled structure `θ̃ = e^{2f}θ`.
pub fn rescale_structure(s: &PseudoHermitianStructure, f: &ScalarField) -> Result<PseudoHermitianStructure, GeomError> {
    s.rescale(f)
}

/// Frame-level data of a pseudo-Hermitian structure at one point.
#[derive(Clone, Debug)]
pub struct CrPoint {
    pub m: usize,
    pub n: usize,
    /// Coordinate jets the data were computed from.
    pub x: Vec<Jet>,
    pub theta: Vec<Jet>,
    pub dtheta: Vec<Vec<Jet>>,
    /// Defining frame `F_a` (chart components).
    pub frame_f: Vec<Vec<Jet>>,
    pub j_f: Vec<Vec<Jet>>,
    /// `L(F_a, F_b) = dθ(F_a, J F_b)`.
    pub levi_f: Vec<Vec<Jet>>,
    /// Adapted frame `e_i = Σ_a coeff[i][a] F_a`.
    pub coeff: Vec<Vec<Jet>>,
    /// Rows `e_0..e_{2m-1}, T` in chart components.
    pub e: Vec<Vec<Jet>>,
    /// Dual coframe: `Σ_k w[a][k] e[b][k] = δ_ab`.
    pub w: Vec<Vec<Jet>>,
    /// Structure functions `[E_a, E_b] = Σ_c c[a][b][c] E_c`.
    pub c: Vec<Vec<Vec<Jet>>>,
    /// Nijenhuis tensor in the adapted frame, `n[a][b][c]` for `a, b < 2m`.
    pub nij: Vec<Vec<Vec<Jet>>>,
    /// Largest value of `|dθ(JF_a, JF_b) − dθ(F_a, F_b)|`.
    pub partial_integrability_defect: f64,
}

/// Largest `|dθ(JF_a, JF_b) − dθ(F_a, F_b)|` from values of `dθ(F_a,F_b)` and `J`.
fn compatibility_defect(dd: &[Vec<Jet>], j_f: &[Vec<Jet>]) -> f64 {
    let h = dd.len();
    let d: Vec<Vec<f64>> = dd.iter().map(|r| r.iter().map(Jet::value).collect()).collect();
    let j: Vec<Vec<f64>> = j_f.iter().map(|r| r.iter().map(Jet::value).collect()).collect();
    let mut defect: f64 = 0.0;
    for a in 0..h {
        for b in 0..h {
            let mut lhs = 0.0;
            for c in 0..h {
                for e in 0..h {
                    lhs += j[c][a] * j[e][b] * d[c][e];
                }
            }
            defect = defect.max((lhs - d[a][b]).abs());
        }
    }
    defect
}

/// Checks the contact condition and returns the compatibility defect of `J`
/// with `dθ` at a point, without building the adapted frame.
pub fn partial_integrability_defect(s: &PseudoHermitianStructure, p: &ChartPoint) -> Result<f64, GeomError> {
    let x = p.seed(1);
    let theta = s.theta.eval(&x);
    let dtheta = d_components(&theta);
    let frame_f: Vec<Vec<Jet>> = s.frame.iter().map(|f| f.eval(&x)).collect();
    let n = s.dim();
    let mut rows: Vec<Vec<Jet>> = vec![theta.iter().map(|t| t.truncate(0)).collect()];
    for f in &frame_f {
        rows.push(
            (0..n).map(|k| dot(f, &dtheta.iter().map(|r| r[k].clone()).collect::<Vec<_>>()).truncate(0)).collect(),
        );
    }
    let det_rhs: Vec<Jet> = (0..n).map(|i| rows[0][0].lift(if i == 0 { 1.0 } else { 0.0 })).collect();
    solve(&rows, &det_rhs).map_err(|e| GeomError::Degenerate(e.to_string()))?;
    let h = 2 * s.m;
    let dd: Vec<Vec<Jet>> =
        (0..h).map(|a| (0..h).map(|b| two_form(&dtheta, &frame_f[a], &frame_f[b])).collect()).collect();
    let j_f = s.j_matrix(&x);
    let scale = 1.0 + dd.iter().flatten().fold(0.0f64, |a, v| a.max(v.value().abs()));
    Ok(compatibility_defect(&dd, &j_f) / scale)
}

fn two_form(d: &[Vec<Jet>], u: &[Jet], v: &[Jet]) -> Jet {
    let dv: Vec<Jet> = d.iter().map(|row| dot(row, v)).collect();
    dot(u, &dv)
}

impl CrPoint {
    pub fn new(s: &PseudoHermitianStructure, x: Vec<Jet>) -> Result<CrPoint, GeomError> {
        let m = s.m;
        let n = 2 * m + 1;
        let h = 2 * m;
        let theta = s.theta.eval(&x);
        let dtheta = d_components(&theta);
        let frame_f: Vec<Vec<Jet>> = s.frame.iter().map(|f| f.eval(&x)).collect();
        let j_f = s.j_matrix(&x);
        if j_f.len() != h || j_f.iter().any(|r| r.len() != h) {
            return Err(GeomError::Precondition("J matrix has the wrong shape".into()));
        }

        let scale = theta.iter().map(|t| t.value().abs()).fold(0.0, f64::max);
        for f in &frame_f {
            let th = dot(&theta, f).value();
            if th.abs() > 1e-9 * (1.0 + scale) {
                return Err(GeomError::NotHorizontal(th));
            }
        }

        // dθ on the defining frame and its J-images.
        let dd: Vec<Vec<Jet>> =
            (0..h).map(|a| (0..h).map(|b| two_form(&dtheta, &frame_f[a], &frame_f[b])).collect()).collect();
        let apply_j = |u: &[Jet]| -> Vec<Jet> { (0..h).map(|a| dot(&j_f[a], u)).collect() };
        let levi_f: Vec<Vec<Jet>> = (0..h)
            .map(|a| (0..h).map(|b| dot(&dd[a], &(0..h).map(|c| j_f[c][b].clone()).collect::<Vec<_>>())).collect())
            .collect();
        let defect = compatibility_defect(&dd, &j_f);

        // Gram-Schmidt in F-coefficient space with the J-alignment step.
        let inner = |u: &[Jet], v: &[Jet]| -> Jet {
            let lv: Vec<Jet> = levi_f.iter().map(|row| dot(row, v)).collect();
            dot(u, &lv)
        };
        let mut coeff: Vec<Vec<Jet>> = Vec::with_capacity(h);
        let zero = x[0].zero_like().truncate(BASE_ORDER - 1);
        for alpha in 0..m {
            let mut u: Vec<Jet> = (0..h).map(|a| zero.lift(if a == 2 * alpha { 1.0 } else { 0.0 })).collect();
            for prev in &coeff {
                let p = inner(&u, prev);
                u = u.iter().zip(prev).map(|(ui, pi)| ui - &(&p * pi)).collect();
            }
            let norm2 = inner(&u, &u);
            if norm2.value() <= 1e-12 {
                return Err(GeomError::NotPseudoconvex(norm2.value()));
            }
            let inv = norm2.try_sqrt()?.try_recip()?;
            let e1: Vec<Jet> = u.iter().map(|ui| ui * &inv).collect();
            let e2 = apply_j(&e1);
            coeff.push(e1);
            coeff.push(e2);
        }

        // Reeb field: θ(T) = 1, dθ(F_a, T) = 0.
        let mut rows: Vec<Vec<Jet>> = Vec::with_capacity(n);
        rows.push(theta.clone());
        for f in &frame_f {
            rows.push((0..n).map(|k| dot(f, &dtheta.iter().map(|r| r[k].clone()).collect::<Vec<_>>())).collect());
        }
        let mut rhs = vec![zero.clone(); n];
        rhs[0] = zero.lift(1.0);
        let reeb = solve(&rows, &rhs).map_err(|e| GeomError::Degenerate(e.to_string()))?;

        let mut e: Vec<Vec<Jet>> = coeff
            .iter()
            .map(|cf| (0..n).map(|k| dot(cf, &frame_f.iter().map(|f| f[k].clone()).collect::<Vec<_>>())).collect())
            .collect();
        e.push(reeb);
        let cols: Vec<Vec<Jet>> = (0..n).map(|k| (0..n).map(|b| e[b][k].clone()).collect()).collect();
        let w = inverse(&cols).map_err(|err| GeomError::Degenerate(err.to_string()))?;

        let mut c = vec![vec![Vec::new(); n]; n];
        for a in 0..n {
            for b in 0..n {
                if b < a {
                    c[a][b] = c[b][a].iter().map(|v: &Jet| -v).collect();
                    continue;
                }
                let br = bracket_components(&e[a], &e[b]);
                c[a][b] = (0..n).map(|d| dot(&w[d], &br)).collect();
            }
        }

        let mut nij = vec![vec![Vec::new(); h]; h];
        for a in 0..h {
            for b in 0..h {
                let (pa, sa) = jmap(a);
                let (pb, sb) = jmap(b);
                let mixed: Vec<Jet> = (0..n).map(|d| &c[pa][b][d] * sa + &c[a][pb][d] * sb).collect();
                let jm = apply_j0(&mixed);
                nij[a][b] = (0..n).map(|d| &c[a][b][d] - &(&c[pa][pb][d] * (sa * sb)) + &jm[d]).collect();
            }
        }

        Ok(CrPoint {
            m,
            n,
            x,
            theta,
            dtheta,
            frame_f,
            j_f,
            levi_f,
            coeff,
            e,
            w,
            c,
            nij,
            partial_integrability_defect: defect,
        })
    }

    pub fn h(&self) -> usize {
        2 * self.m
    }

    /// Index of the Reeb field in frame arrays.
    pub fn t(&self) -> usize {
        2 * self.m
    }

    /// `J` as a chart endomorphism (`J T = 0`): `out[k][l]` maps component `l` to `k`.
    pub fn j_chart(&self) -> Vec<Vec<Jet>> {
        let n = self.n;
        let zero = self.w[0][0].zero_like();
        let mut out = vec![vec![zero; n]; n];
        for i in 0..self.h() {
            let (t, s) = jmap(i);
            for k in 0..n {
                for l in 0..n {
                    out[k][l] += &self.e[t][k] * &self.w[i][l] * s;
                }
            }
        }
        out
    }

    /// Levi form of chart vectors through the coframe.
    pub fn levi(&self, u: &[Jet], v: &[Jet]) -> Jet {
        let mut acc = self.w[0][0].zero_like();
        for i in 0..self.h() {
            acc += dot(&self.w[i], u) * dot(&self.w[i], v);
        }
        acc
    }

    /// Chart components of the Levi form, `L_jk = Σ_i w_i,j w_i,k`.
    pub fn levi_chart(&self) -> Vec<Vec<Jet>> {
        let n = self.n;
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let mut acc = &self.w[0][j] * &self.w[0][k];
                        for i in 1..self.h() {
                            acc += &self.w[i][j] * &self.w[i][k];
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// Converts frame values `v(E_a)` of a one-form to chart components.
    pub fn frame_to_chart(&self, vals: &[Jet]) -> Vec<Jet> {
        (0..self.n)
            .map(|k| {
                let col: Vec<Jet> = (0..self.n).map(|a| self.w[a][k].clone()).collect();
                dot(vals, &col)
            })
            .collect()
    }

    /// Chart two-form with values `vals[a][b]` on frame pairs.
    pub fn frame_to_chart2(&self, vals: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
        let n = self.n;
        let half: Vec<Vec<Jet>> = (0..n).map(|a| self.frame_to_chart(&vals[a])).collect();
        let cols: Vec<Vec<Jet>> = (0..n)
            .map(|j| {
                let col: Vec<Jet> = (0..n).map(|a| half[a][j].clone()).collect();
                self.frame_to_chart(&col)
            })
            .collect();
        (0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect()
    }

    /// Largest `|N|` component value.
    pub fn nijenhuis_norm(&self) -> f64 {
        self.nij.iter().flatten().flatten().fold(0.0, |acc, v| acc.max(v.value().abs()))
    }
}

/// The Reeb field of a structure.
pub fn reeb_field(s: &PseudoHermitianStructure) -> VectorField {
    let s = s.clone();
    VectorField::new(s.dim(), move |x| {
        let p = CrPoint::new(&s, x.to_vec()).unwrap_or_else(|e| panic!("{e}"));
        p.e[p.t()].clone()
    })
}

/// `L_θ(X, Y)` for sections of `H`.
///
/// Evaluating the result panics if an argument leaves `H`.
pub fn levi_form(s: &PseudoHermitianStructure, x: &VectorField, y: &VectorField) -> Result<ScalarField, GeomError> {
    for v in [x, y] {
        if v.dim() != s.dim() {
            return Err(GeomError::DimensionMismatch { expected: s.dim(), found: v.dim() });
        }
    }
    let (s, x, y) = (s.clone(), x.clone(), y.clone());
    Ok(ScalarField::from_fn(s.dim(), move |p| {
        let pt = CrPoint::new(&s, p.to_vec()).unwrap_or_else(|e| panic!("{e}"));
        let (u, v) = (x.eval(p), y.eval(p));
        for vec in [&u, &v] {
            let th = dot(&pt.theta, vec).value();
            if th.abs() > 1e-9 {
                panic!("{}", GeomError::NotHorizontal(th));
            }
        }
        pt.levi(&u, &v)
    }))
}

/// The Nijenhuis tensor `N(X,Y) = [X,Y] − [JX,JY] + J[JX,Y] + J[X,JY]` of two sections of `H`.
pub fn nijenhuis(s: &PseudoHermitianStructure, x: &VectorField, y: &VectorField) -> Result<VectorField, GeomError> {
    for v in [x, y] {
        if v.dim() != s.dim() {
            return Err(GeomError::DimensionMismatch { expected: s.dim(), found: v.dim() });
        }
    }
    let (s, x, y) = (s.clone(), x.clone(), y.clone());
    Ok(VectorField::new(s.dim(), move |p| {
        let pt = CrPoint::new(&s, p.to_vec()).unwrap_or_else(|e| panic!("{e}"));
        let jc = pt.j_chart();
        let apply = |v: &[Jet]| -> Vec<Jet> { jc.iter().map(|row| dot(row, v)).collect() };
        let (u, v) = (x.eval(p), y.eval(p));
        let (ju, jv) = (apply(&u), apply(&v));
        let a = bracket_components(&u, &v);
        let b = bracket_components(&ju, &jv);
        let c = apply(&bracket_components(&ju, &v));
        let d = apply(&bracket_components(&u, &jv));
        (0..u.len()).map(|k| &a[k] - &b[k] + &c[k] + &d[k]).collect()
    }))
}

/// Integrability class of a structure on a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrability {
    Nondegenerate,
    PartiallyIntegrable,
    Integrable,
}

/// Classifies a structure from its values at the given points.
///
/// Degenerate contact forms and indefinite Levi forms are reported as errors.
pub fn classify_integrability(s: &PseudoHermitianStructure, points: &[ChartPoint]) -> Result<Integrability, GeomError> {
    let mut partial = true;
    let mut integrable = true;
    for p in points {
        if partial_integrability_defect(s, p)? > 1e-9 {
            partial = false;
            continue;
        }
        if s.at(p)?.nijenhuis_norm() > 1e-9 {
            integrable = false;
        }
    }
    Ok(if !partial {
        Integrability::Nondegenerate
    } else if integrable {
        Integrability::Integrable
    } else {
        Integrability::PartiallyIntegrable
    })
}
