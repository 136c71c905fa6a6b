//! Conformal tractor calculus in the splitting of a fixed metric.
//!
//! Everything is expressed in chart components at one point. An adjoint
//! tractor is a triple `(ξ, φ, ω)` of a vector, an endomorphism `φ[k][j]`
//! (mapping `∂_j` to `φ[k][j] ∂_k`) in `co(TF)` and a one-form. A standard
//! tractor is `(top, ξ, bottom)`.
//!
//! The algebraic bracket is
//! `{(ξ,φ,ω),(τ,ψ,η)} = (φτ − ψξ, {ξ,η} + [φ,ψ] − {τ,ω}, ω∘ψ − η∘φ)` with
//! `{ξ,η}(X) = η(X)ξ − g(ξ,X)η^♯ + η(ξ)X`, and the normal connection is
//! `∇^nor_X A = ∇_X A + {(X, 0, P(X)), A}` for the Schouten tensor
//! `P = (1/(N−2))(scal/(2(N−1)) g − Ric)`. Its curvature is
//! `Ω(X,Y) = (0, W(X,Y), C(X,Y))` with the Weyl and Cotton tensors of
//! [`MetricPoint`].

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{analyze_complex_element, minkowski, ComplexElementReport, GradedTriple, SoMatrix};
use crate::cr::jmap;
use crate::error::GeomError;
use crate::fefferman::FeffermanPoint;
use crate::jet::{dot, inverse, Jet};
use crate::metric::MetricPoint;

fn zeros(t: &Jet, len: usize) -> Vec<Jet> {
    vec![t.zero_like(); len]
}

fn zeros2(t: &Jet, len: usize) -> Vec<Vec<Jet>> {
    vec![zeros(t, len); len]
}

fn values(v: &[Jet]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(Jet::value))
}

fn values2(v: &[Vec<Jet>]) -> DMatrix<f64> {
    DMatrix::from_fn(v.len(), v.len(), |i, j| v[i][j].value())
}

/// Section of the adjoint tractor bundle at a point.
#[derive(Clone, Debug)]
pub struct AdjointTractor {
    pub xi: Vec<Jet>,
    pub phi: Vec<Vec<Jet>>,
    pub omega: Vec<Jet>,
}

impl AdjointTractor {
    pub fn zero(template: &Jet, dim: usize) -> AdjointTractor {
        AdjointTractor { xi: zeros(template, dim), phi: zeros2(template, dim), omega: zeros(template, dim) }
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn add(&self, o: &AdjointTractor) -> AdjointTractor {
        let n = self.dim();
        AdjointTractor {
            xi: (0..n).map(|k| &self.xi[k] + &o.xi[k]).collect(),
            phi: (0..n).map(|k| (0..n).map(|j| &self.phi[k][j] + &o.phi[k][j]).collect()).collect(),
            omega: (0..n).map(|k| &self.omega[k] + &o.omega[k]).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> AdjointTractor {
        AdjointTractor {
            xi: self.xi.iter().map(|x| x * c).collect(),
            phi: self.phi.iter().map(|r| r.iter().map(|x| x * c).collect()).collect(),
            omega: self.omega.iter().map(|x| x * c).collect(),
        }
    }

    pub fn sub(&self, o: &AdjointTractor) -> AdjointTractor {
        self.add(&o.scale(-1.0))
    }

    /// Largest component value in each slot.
    pub fn slot_max(&self) -> [f64; 3] {
        let m = |it: &mut dyn Iterator<Item = &Jet>| it.fold(0.0_f64, |a, x| a.max(x.value().abs()));
        [m(&mut self.xi.iter()), m(&mut self.phi.iter().flatten()), m(&mut self.omega.iter())]
    }

    pub fn max_abs(&self) -> f64 {
        let s = self.slot_max();
        s[0].max(s[1]).max(s[2])
    }

    pub fn truncate(&self, order: usize) -> AdjointTractor {
        let t = |x: &Jet| x.truncate(order.min(x.order()));
        AdjointTractor {
            xi: self.xi.iter().map(t).collect(),
            phi: self.phi.iter().map(|r| r.iter().map(t).collect()).collect(),
            omega: self.omega.iter().map(t).collect(),
        }
    }
}

/// Section of the standard tractor bundle at a point (values only).
#[derive(Clone, Debug, PartialEq)]
pub struct StandardTractor {
    pub top: f64,
    pub xi: DVector<f64>,
    pub bottom: f64,
}

impl StandardTractor {
    /// The `k`-th vector of the basis `(1,0,0), (0,∂_0,0), …, (0,0,1)`.
    pub fn basis(dim: usize, k: usize) -> StandardTractor {
        let mut t = StandardTractor { top: 0.0, xi: DVector::zeros(dim), bottom: 0.0 };
        if k == 0 {
            t.top = 1.0;
        } else if k <= dim {
            t.xi[k - 1] = 1.0;
        } else {
            t.bottom = 1.0;
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.top.abs().max(self.bottom.abs()).max(self.xi.amax())
    }
}

/// A point of a chart with a metric of signature `(1, n)`.
#[derive(Clone, Debug)]
pub struct ConformalChart {
    pub metric: MetricPoint,
    pub schouten: Vec<Vec<Jet>>,
    /// Columns `E_a` with `g(E_a, E_b) = diag(−1, 1, …, 1)`.
    pub frame: DMatrix<f64>,
}

impl ConformalChart {
    pub fn new(metric: MetricPoint) -> Result<ConformalChart, GeomError> {
        let d = metric.dim;
        let (neg, pos) = metric.signature();
        if neg != 1 || pos != d - 1 {
            return Err(GeomError::Precondition(format!("metric signature is ({neg},{pos}), expected (1,{})", d - 1)));
        }
        let g = values2(&metric.g);
        let eig = nalgebra::SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|a, b| eig.eigenvalues[*a].partial_cmp(&eig.eigenvalues[*b]).expect("finite eigenvalues"));
        let cols: Vec<DVector<f64>> =
            order.iter().map(|&i| eig.eigenvectors.column(i) / eig.eigenvalues[i].abs().sqrt()).collect();
        let frame = DMatrix::from_columns(&cols);
        let schouten = metric.schouten();
        Ok(ConformalChart { metric, schouten, frame })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim
    }

    fn template(&self) -> &Jet {
        &self.metric.g[0][0]
    }

    /// `tr_g P`.
    pub fn schouten_trace(&self) -> Jet {
        self.metric.trace(&self.schouten)
    }

    fn apply(phi: &[Vec<Jet>], v: &[Jet]) -> Vec<Jet> {
        phi.iter().map(|row| dot(row, v)).collect()
    }

    fn compose_form(w: &[Jet], phi: &[Vec<Jet>]) -> Vec<Jet> {
        let n = w.len();
        (0..n).map(|j| dot(w, &phi.iter().map(|r| r[j].clone()).collect::<Vec<_>>())).collect()
    }

    /// `{ξ, η}` as an endomorphism.
    pub fn vector_form_bracket(&self, xi: &[Jet], eta: &[Jet]) -> Vec<Vec<Jet>> {
        let n = self.dim();
        let gx = self.metric.lower(xi);
        let es = self.metric.raise(eta);
        let ex = dot(eta, xi);
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| {
                        let mut v = &(&xi[k] * &eta[j]) - &(&es[k] * &gx[j]);
                        if j == k {
                            v += &ex;
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    }

    pub fn bracket(&self, a: &AdjointTractor, b: &AdjointTractor) -> AdjointTractor {
        let n = self.dim();
        let pt = Self::apply(&a.phi, &b.xi);
        let px = Self::apply(&b.phi, &a.xi);
        let xi = (0..n).map(|k| &pt[k] - &px[k]).collect();
        let xe = self.vector_form_bracket(&a.xi, &b.omega);
        let tw = self.vector_form_bracket(&b.xi, &a.omega);
        let phi = (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| {
                        let mut v = &xe[k][j] - &tw[k][j];
                        for p in 0..n {
                            v += &a.phi[k][p] * &b.phi[p][j];
                            v -= &b.phi[k][p] * &a.phi[p][j];
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        let wp = Self::compose_form(&a.omega, &b.phi);
        let ep = Self::compose_form(&b.omega, &a.phi);
        let omega = (0..n).map(|j| &wp[j] - &ep[j]).collect();
        AdjointTractor { xi, phi, omega }
    }

    /// `max |g(φ₀X, Y) + g(X, φ₀Y)|` for the trace-free part `φ₀`.
    pub fn conformal_defect(&self, a: &AdjointTractor) -> f64 {
        let n = self.dim();
        let phi = values2(&a.phi);
        let phi0 = &phi - DMatrix::identity(n, n) * (phi.trace() / n as f64);
        let g = values2(&self.metric.g);
        (phi0.transpose() * &g + &g * &phi0).amax()
    }

    /// Pointwise algebra element in the orthonormal frame.
    pub fn to_so_matrix(&self, a: &AdjointTractor) -> Result<SoMatrix, GeomError> {
        let n = self.dim();
        let e = &self.frame;
        let einv = e.clone().try_inverse().ok_or(GeomError::SingularMetric)?;
        let phi = values2(&a.phi);
        let sc = phi.trace() / n as f64;
        let a_mat = &einv * (phi - DMatrix::identity(n, n) * sc) * e;
        // snap the numerically skew block onto so(1, n)
        let j = minkowski(n - 1);
        let a_mat = (&a_mat - &j * a_mat.transpose() * &j) * 0.5;
        let t = GradedTriple { m: &einv * values(&a.xi), a_mat, a: sc, l: e.transpose() * values(&a.omega) };
        t.to_matrix()
    }

    /// Standard tractor in the coordinates `(x₋, E-frame components, x₊)`.
    pub fn standard_vector(&self, t: &StandardTractor) -> Result<DVector<f64>, GeomError> {
        let n = self.dim();
        let einv = self.frame.clone().try_inverse().ok_or(GeomError::SingularMetric)?;
        let mid = einv * &t.xi;
        let mut v = DVector::zeros(n + 2);
        v[0] = t.top;
        v[n + 1] = t.bottom;
        for k in 0..n {
            v[k + 1] = mid[k];
        }
        Ok(v)
    }

    /// The action `A • t`.
    pub fn act(&self, a: &AdjointTractor, t: &StandardTractor) -> StandardTractor {
        let n = self.dim();
        let xa = values(&a.xi);
        let phi = values2(&a.phi);
        let om = values(&a.omega);
        let g = values2(&self.metric.g);
        let ginv = values2(&self.metric.ginv);
        let sc = phi.trace() / n as f64;
        let phi0 = &phi - DMatrix::identity(n, n) * sc;
        StandardTractor {
            top: -sc * t.top + om.dot(&t.xi),
            xi: &xa * t.top + phi0 * &t.xi - (ginv * om) * t.bottom,
            bottom: -(xa.transpose() * g * &t.xi)[(0, 0)] + sc * t.bottom,
        }
    }

    /// `(L_τ g)_{ij} = ∇_i τ_j + ∇_j τ_i` and its trace-free part's largest entry.
    pub fn conformal_killing_defect(&self, tau: &[Jet]) -> f64 {
        let n = self.dim();
        let d = self.metric.cov_one_form(&self.metric.lower(tau));
        let lie: Vec<Vec<Jet>> = (0..n).map(|i| (0..n).map(|j| &d[i][j] + &d[j][i]).collect()).collect();
        let tr = self.metric.trace(&lie).value() / n as f64;
        let mut out: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                out = out.max((lie[i][j].value() - tr * self.metric.g[i][j].value()).abs());
            }
        }
        out
    }

    /// `ψ[k][j] = (∇_j τ)^k`.
    pub fn nabla_endo(&self, tau: &[Jet]) -> Vec<Vec<Jet>> {
        let d = self.metric.cov_vector(tau);
        let n = self.dim();
        (0..n).map(|k| (0..n).map(|j| d[j][k].clone()).collect()).collect()
    }

    fn p_of(&self, tau: &[Jet]) -> Vec<Jet> {
        let n = self.dim();
        (0..n).map(|j| dot(tau, &self.schouten.iter().map(|r| r[j].clone()).collect::<Vec<_>>())).collect()
    }

    /// Splitting operator with `η = −(1/N)(Σ_i e^i∘∇_{e_i}ψ − 2P(τ) + tr P · g(τ,·))`.
    pub fn splitting_general(&self, tau: &[Jet]) -> AdjointTractor {
        let n = self.dim();
        let psi = self.nabla_endo(tau);
        let dpsi = self.metric.cov_endo(&psi);
        let pt = self.p_of(tau);
        let trp = self.schouten_trace();
        let gt = self.metric.lower(tau);
        let c = -1.0 / n as f64;
        let omega = (0..n)
            .map(|j| {
                let mut div = dpsi[0][0][j].clone();
                for i in 1..n {
                    div += &dpsi[i][i][j];
                }
                (&(&div - &(&pt[j] * 2.0)) + &(&trp * &gt[j])) * c
            })
            .collect();
        AdjointTractor { xi: tau.to_vec(), phi: psi, omega }
    }

    /// Splitting operator for conformal Killing fields with
    /// `η = 𝒫(g(τ,·)) = (1/(N−2)) g(tr∇²τ, ·) + scal/(2(N−1)(N−2)) g(τ, ·)`.
    pub fn splitting_killing(&self, tau: &[Jet]) -> AdjointTractor {
        let nn = self.dim() as f64;
        let lap = self.metric.lower(&self.metric.bochner_vector(tau));
        let gt = self.metric.lower(tau);
        let scal = &self.metric.scal;
        let omega = lap
            .iter()
            .zip(&gt)
            .map(|(l, t)| &(l * (1.0 / (nn - 2.0))) + &(&(scal * t) * (1.0 / (2.0 * (nn - 1.0) * (nn - 2.0)))))
            .collect();
        AdjointTractor { xi: tau.to_vec(), phi: self.nabla_endo(tau), omega }
    }

    /// Uses the Killing formula when `τ` is conformal Killing to `1e−8`.
    pub fn splitting(&self, tau: &[Jet]) -> AdjointTractor {
        if self.conformal_killing_defect(tau) <= 1e-8 {
            self.splitting_killing(tau)
        } else {
            self.splitting_general(tau)
        }
    }

    /// `∇^nor_{∂_i} A` for every chart direction `i`.
    pub fn normal_derivative(&self, a: &AdjointTractor) -> Vec<AdjointTractor> {
        let n = self.dim();
        let dxi = self.metric.cov_vector(&a.xi);
        let dphi = self.metric.cov_endo(&a.phi);
        let dom = self.metric.cov_one_form(&a.omega);
        let t = self.template();
        (0..n)
            .map(|i| {
                let mut x = zeros(t, n);
                x[i] = t.lift(1.0);
                let b = AdjointTractor { xi: x, phi: zeros2(t, n), omega: self.schouten[i].clone() };
                let nab = AdjointTractor { xi: dxi[i].clone(), phi: dphi[i].clone(), omega: dom[i].clone() };
                nab.add(&self.bracket(&b, a))
            })
            .collect()
    }

    /// All `Ω(∂_i, ∂_j)`, indexed `[i][j]`.
    pub fn normal_curvature(&self) -> Vec<Vec<AdjointTractor>> {
        let n = self.dim();
        let w = self.metric.weyl();
        let c = self.metric.cotton();
        let z = w[0][0][0][0].zero_like();
        let ginv = &self.metric.ginv;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let phi = (0..n)
                            .map(|l| {
                                (0..n)
                                    .map(|k| {
                                        let mut acc = z.clone();
                                        for m in 0..n {
                                            acc += &w[i][j][k][m] * &ginv[m][l];
                                        }
                                        acc
                                    })
                                    .collect()
                            })
                            .collect();
                        AdjointTractor { xi: zeros(&z, n), phi, omega: c[i][j].clone() }
                    })
                    .collect()
            })
            .collect()
    }

    /// `Ω(τ, ∂_j)` for every `j`.
    pub fn curvature_along(&self, tau: &[Jet]) -> Vec<AdjointTractor> {
        let n = self.dim();
        let om = self.normal_curvature();
        let z = om[0][0].xi[0].clone();
        (0..n)
            .map(|j| {
                let mut acc = AdjointTractor::zero(&z, n);
                for i in 0..n {
                    acc = acc.add(&om[i][j].scale(tau[i].value()));
                }
                acc
            })
            .collect()
    }

    fn dual_form(&self, i: usize) -> AdjointTractor {
        let n = self.dim();
        let t = self.template().truncate(0);
        let mut w = zeros(&t, n);
        w[i] = t.lift(1.0);
        AdjointTractor { xi: zeros(&t, n), phi: zeros2(&t, n), omega: w }
    }

    /// `∂*Φ = Σ_i {dx^i, Φ(∂_i)}` for an adjoint-valued one-form.
    pub fn codifferential_one(&self, phi: &[AdjointTractor]) -> AdjointTractor {
        let n = self.dim();
        let mut acc = AdjointTractor::zero(&self.template().truncate(0), n);
        for (i, p) in phi.iter().enumerate() {
            acc = acc.add(&self.bracket(&self.dual_form(i), &p.truncate(0)));
        }
        acc
    }

    /// `(∂*κ)(∂_k) = Σ_i {dx^i, κ(∂_i, ∂_k)}`.
    pub fn codifferential_two(&self, kappa: &[Vec<AdjointTractor>]) -> Vec<AdjointTractor> {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let col: Vec<AdjointTractor> = (0..n).map(|i| kappa[i][k].clone()).collect();
                self.codifferential_one(&col)
            })
            .collect()
    }

    /// `((N−2)/N) d(div τ) + g(tr∇²τ, ·) + Ric(τ, ·)` and the largest term.
    pub fn conformal_killing_identity(&self, tau: &[Jet]) -> (f64, f64) {
        let n = self.dim();
        let nn = n as f64;
        let d = self.metric.cov_vector(tau);
        let mut div = d[0][0].clone();
        for i in 1..n {
            div += &d[i][i];
        }
        let lap = self.metric.lower(&self.metric.bochner_vector(tau));
        let ric = self.metric.ric_of(tau);
        let mut res: f64 = 0.0;
        let mut big: f64 = 0.0;
        for j in 0..n {
            let a = (nn - 2.0) / nn * div.d(j).value();
            res = res.max((a + lap[j].value() + ric[j].value()).abs());
            big = big.max(a.abs()).max(lap[j].value().abs());
        }
        (res, big)
    }

    /// Largest entry of `∇^nor 𝒮(τ) + Ω(τ, ·)` over directions and slots.
    pub fn tractor_equation_residual(&self, s: &AdjointTractor) -> f64 {
        let d = self.normal_derivative(s);
        let om = self.curvature_along(&s.xi);
        d.iter().zip(&om).map(|(a, b)| a.truncate(0).add(b).max_abs()).fold(0.0, f64::max)
    }
}

/// Outcome of testing `A • A • t = −t`.
#[derive(Clone, Debug, Serialize)]
pub struct ComplexStructureReport {
    /// Largest `|A•(A•t) + t|` over the standard basis.
    pub square_residual: f64,
    /// Largest `|A•t − M·t|` against the algebra matrix `M`.
    pub matrix_consistency: f64,
    pub conformal_defect: f64,
    /// Pointwise algebra analysis; `None` when `M² ≠ −id`.
    pub algebra: Option<ComplexElementReport>,
}

/// Tests `A • A = −id` on a basis of standard tractors.
pub fn check_complex_structure(cc: &ConformalChart, a: &AdjointTractor) -> Result<ComplexStructureReport, GeomError> {
    let n = cc.dim();
    let mat = cc.to_so_matrix(a)?;
    let mut sq: f64 = 0.0;
    let mut cons: f64 = 0.0;
    for k in 0..n + 2 {
        let t = StandardTractor::basis(n, k);
        let at = cc.act(a, &t);
        let aat = cc.act(a, &at);
        let res = StandardTractor { top: aat.top + t.top, xi: &aat.xi + &t.xi, bottom: aat.bottom + t.bottom };
        sq = sq.max(res.max_abs());
        let lhs = cc.standard_vector(&at)?;
        let rhs = mat.matrix() * cc.standard_vector(&t)?;
        cons = cons.max((lhs - rhs).amax());
    }
    Ok(ComplexStructureReport {
        square_residual: sq,
        matrix_consistency: cons,
        conformal_defect: cc.conformal_defect(a),
        algebra: analyze_complex_element(&mat).ok(),
    })
}

/// The fundamental vector field `R = 2S` on the total chart.
pub fn fundamental_field(fp: &FeffermanPoint) -> Vec<Jet> {
    fp.frame[fp.s_index()].iter().map(|x| x * 2.0).collect()
}

/// Horizontal lift of `J` to the total chart, killing `T*` and `S`.
pub fn lifted_j(fp: &FeffermanPoint) -> Result<Vec<Vec<Jet>>, GeomError> {
    let nf = fp.n + 1;
    let cols: Vec<Vec<Jet>> = (0..nf).map(|k| (0..nf).map(|b| fp.frame[b][k].clone()).collect()).collect();
    let inv = inverse(&cols).map_err(|e| GeomError::Degenerate(e.to_string()))?;
    let z = fp.metric[0][0].zero_like();
    let mut out = zeros2(&z, nf);
    for i in 0..fp.web.cr.h() {
        let (t, s) = jmap(i);
        for k in 0..nf {
            for l in 0..nf {
                out[k][l] += &(&fp.frame[t][k] * &inv[i][l]) * s;
            }
        }
    }
    Ok(out)
}

/// `J_CR = (R, J lifted, −(2/(n+3)) α)`.
pub fn build_jcr(fp: &FeffermanPoint) -> Result<AdjointTractor, GeomError> {
    let c = -2.0 / (fp.n as f64 + 3.0);
    Ok(AdjointTractor {
        xi: fundamental_field(fp),
        phi: lifted_j(fp)?,
        omega: fp.alpha.iter().map(|a| a * c).collect(),
    })
}

/// `𝒰 = ((n+1)/(n(n−1)(n+3))) (0, 0, tr_θ L_{dℓ} θ)`.
pub fn u_tractor(fp: &FeffermanPoint) -> AdjointTractor {
    let nn = fp.n as f64;
    let c = (nn + 1.0) / (nn * (nn - 1.0) * (nn + 3.0)) * fp.tr_l_dell();
    let z = fp.metric[0][0].zero_like();
    let nf = fp.n + 1;
    AdjointTractor { xi: zeros(&z, nf), phi: zeros2(&z, nf), omega: fp.theta.iter().map(|t| t * c).collect() }
}

/// Comparison of `𝒮(R)` with `J_CR` and `𝒰`.
#[derive(Clone, Debug, Serialize)]
pub struct SplittingComparison {
    /// Slot maxima of `𝒮(R) − J_CR − 𝒰`.
    pub residual: [f64; 3],
    /// Slot maxima of `𝒮(R) − J_CR`.
    pub difference: [f64; 3],
    /// Largest `|𝒰|` entry.
    pub u_size: f64,
    /// Largest entry of the difference between the two splitting formulas.
    pub branch_agreement: f64,
}

pub fn compare_splitting(cc: &ConformalChart, fp: &FeffermanPoint) -> Result<SplittingComparison, GeomError> {
    let r = fundamental_field(fp);
    let s = cc.splitting_killing(&r).truncate(0);
    let g = cc.splitting_general(&r).truncate(0);
    let j = build_jcr(fp)?.truncate(0);
    let u = u_tractor(fp).truncate(0);
    let diff = s.sub(&j);
    Ok(SplittingComparison {
        residual: diff.sub(&u).slot_max(),
        difference: diff.slot_max(),
        u_size: u.max_abs(),
        branch_agreement: s.sub(&g).max_abs(),
    })
}

/// Structure recovered from an adjoint tractor on a Fefferman chart.
#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction {
    /// Base-chart `J` on `H`, columns for `e_0, …, e_{2m−1}`.
    pub j_images: Vec<Vec<f64>>,
    /// Projector onto the recovered `H` in base coordinates.
    pub h_projector: Vec<Vec<f64>>,
    /// `L(e_a, e_b)` from `½ dθ^f(·, J ·)`.
    pub levi: Vec<Vec<f64>>,
    /// Largest `|θ^f(J X)|`: how far `J` leaves `ker θ^f`.
    pub kernel_defect: f64,
}

/// Comparison of a reconstruction with the base structure.
#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionReport {
    pub h_residual: f64,
    pub j_residual: f64,
    pub levi_residual: f64,
    pub kernel_defect: f64,
}

fn projector(cols: &[DVector<f64>], tol: f64) -> DMatrix<f64> {
    let b = DMatrix::from_columns(cols);
    let svd = nalgebra::SVD::new(b, true, false);
    let u = svd.u.expect("left singular vectors");
    let smax = svd.singular_values.max();
    let mut p = DMatrix::zeros(u.nrows(), u.nrows());
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > tol * smax {
            let c = u.column(k);
            p += &c * c.transpose();
        }
    }
    p
}

/// Recovers `(H, J, L)` from a complex structure `A` on a total chart whose
/// fiber coordinate is last. Only `R = π(A)` enters; see [`reconstruct_from_field`].
pub fn reconstruct_cr(
    cc: &ConformalChart,
    a: &AdjointTractor,
    base_frame: &[Vec<Jet>],
) -> Result<Reconstruction, GeomError> {
    let rep = check_complex_structure(cc, a)?;
    if !(rep.square_residual <= 1e-8) {
        return Err(GeomError::Precondition(format!(
            "A is not a complex structure (|A•A + id| = {:e})",
            rep.square_residual
        )));
    }
    reconstruct_from_field(cc, &a.xi, base_frame)
}

/// `θ^f = g(R, ·)`, `H = π(ker θ^f)`, `J` the skew part of `∇R` on
/// `ker θ^f / R`, and `L(X, Y) = ½ dθ^f(X, JY)`.
pub fn reconstruct_from_field(
    cc: &ConformalChart,
    field: &[Jet],
    base_frame: &[Vec<Jet>],
) -> Result<Reconstruction, GeomError> {
    let nf = cc.dim();
    let n = nf - 1;
    let r = values(field);
    if r.amax() < 1e-12 {
        return Err(GeomError::Precondition("first slot vanishes".into()));
    }
    let psi = values2(&cc.nabla_endo(field));
    let g = values2(&cc.metric.g);
    let ginv = values2(&cc.metric.ginv);
    let skew = (&psi - &ginv * psi.transpose() * &g) * 0.5;
    let theta_f = &g * &r;
    let dtheta = {
        let tf = cc.metric.lower(field);
        crate::fields::d_components(&tf)
    };
    // basis of ker θ^f, projected to the base
    let row = DMatrix::from_row_slice(1, nf, theta_f.as_slice());
    let full = nalgebra::SVD::new(row.transpose() * row, true, false);
    let u = full.u.expect("singular vectors");
    let mut ker = Vec::new();
    for (k, s) in full.singular_values.iter().enumerate() {
        if *s < 1e-10 * full.singular_values.max() {
            ker.push(DVector::from_iterator(n, u.column(k).iter().take(n).cloned()));
        }
    }
    let h_projector = projector(&ker, 1e-8);
    let h = base_frame.len() - 1;
    let lift = |v: &[Jet]| {
        let mut x = DVector::zeros(nf);
        for k in 0..n {
            x[k] = v[k].value();
        }
        x
    };
    let mut j_images = Vec::with_capacity(h);
    let mut kernel_defect: f64 = 0.0;
    let lifted: Vec<DVector<f64>> = base_frame[..h].iter().map(|v| lift(v)).collect();
    let jl: Vec<DVector<f64>> = lifted.iter().map(|x| &skew * x).collect();
    for y in &jl {
        kernel_defect = kernel_defect.max(theta_f.dot(y).abs());
        j_images.push(y.iter().take(n).cloned().collect());
    }
    let dth = DMatrix::from_fn(nf, nf, |i, j| dtheta[i][j].value());
    let levi =
        (0..h).map(|i| (0..h).map(|j| 0.5 * (lifted[i].transpose() * &dth * &jl[j])[(0, 0)]).collect()).collect();
    Ok(Reconstruction {
        j_images,
        h_projector: (0..n).map(|i| (0..n).map(|j| h_projector[(i, j)]).collect()).collect(),
        levi,
        kernel_defect,
    })
}

/// Compares a reconstruction with the base structure of a Fefferman point.
pub fn compare_reconstruction(rec: &Reconstruction, fp: &FeffermanPoint) -> ReconstructionReport {
    let cr = &fp.web.cr;
    let n = cr.n;
    let h = cr.h();
    let jc = cr.j_chart();
    let mut j_res: f64 = 0.0;
    for (a, img) in rec.j_images.iter().enumerate() {
        for k in 0..n {
            let expect: f64 = (0..n).map(|l| jc[k][l].value() * cr.e[a][l].value()).sum();
            j_res = j_res.max((img[k] - expect).abs());
        }
    }
    let hcols: Vec<DVector<f64>> = cr.e[..h].iter().map(|v| values(v)).collect();
    let ph = projector(&hcols, 1e-8);
    let mut h_res: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            h_res = h_res.max((rec.h_projector[i][j] - ph[(i, j)]).abs());
        }
    }
    let mut l_res: f64 = 0.0;
    for a in 0..h {
        for b in 0..h {
            l_res = l_res.max((rec.levi[a][b] - cr.levi(&cr.e[a], &cr.e[b]).value()).abs());
        }
    }
    ReconstructionReport {
        h_residual: h_res,
        j_residual: j_res,
        levi_residual: l_res,
        kernel_defect: rec.kernel_defect,
    }
}

/// Chart with metric `e^{2φ} f` at the point of `fp`; `phi` must carry jets of
/// the same variables and order as the metric.
pub fn rescaled_chart(fp: &FeffermanPoint, phi: &Jet) -> Result<ConformalChart, GeomError> {
    let w = (phi * 2.0).exp();
    let g = fp.metric.iter().map(|r| r.iter().map(|x| x * &w).collect()).collect();
    ConformalChart::new(MetricPoint::new(g)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::example;
    use crate::fefferman::{FeffermanSpace, METRIC_ORDER};
    use crate::fields::{ChartPoint, ScalarField};

    fn point(name: &str, ell: &str, coords: &[f64]) -> FeffermanPoint {
        let ex = example(name).unwrap();
        let lam = ex.ell(ell).unwrap().lambda.clone();
        let fs = FeffermanSpace::new(ex.structure.clone(), lam).unwrap();
        let mut c = coords.to_vec();
        c.truncate(fs.dim());
        fs.at(&ChartPoint::new(c).unwrap()).unwrap()
    }

    /// Minkowski metric scaled by `e^{2φ}` with a polynomial `φ`.
    fn conformally_flat(dim: usize, p: &[f64]) -> ConformalChart {
        let x = Jet::seed(p, dim, METRIC_ORDER);
        let mut phi = &x[0] * 0.1;
        phi += &(&x[1] * &x[2]) * 0.2;
        phi += &(&x[dim - 1] * &x[0]) * &x[0] * 0.05;
        let w = (&phi * 2.0).exp();
        let g = (0..dim)
            .map(|i| {
                (0..dim).map(|j| if i == j { &w * if i == 0 { -1.0 } else { 1.0 } } else { w.zero_like() }).collect()
            })
            .collect();
        ConformalChart::new(MetricPoint::new(g).unwrap()).unwrap()
    }

    /// Special conformal field `2⟨b,x⟩x − ⟨x,x⟩b` of Minkowski space.
    fn special_conformal(cc: &ConformalChart, p: &[f64], b: &[f64]) -> Vec<Jet> {
        let dim = cc.dim();
        let x = Jet::seed(p, dim, METRIC_ORDER);
        let eta = |u: &[Jet], v: &[Jet]| {
            let mut acc = &(&u[0] * &v[0]) * -1.0;
            for k in 1..dim {
                acc += &u[k] * &v[k];
            }
            acc
        };
        let bj: Vec<Jet> = b.iter().map(|v| x[0].lift(*v)).collect();
        let bx = eta(&bj, &x);
        let xx = eta(&x, &x);
        (0..dim).map(|k| &(&(&bx * &x[k]) * 2.0) - &(&xx * &bj[k])).collect()
    }

    #[test]
    fn bracket_matches_matrix_commutator() {
        let fp = point("deformed_m2", "generic", &[0.3, -0.2, 0.4, 0.1, -0.3, 0.6]);
        let cc = ConformalChart::new(fp.oracle.clone()).unwrap();
        let a = cc.splitting_killing(&fundamental_field(&fp)).truncate(0);
        let b = build_jcr(&fp).unwrap().truncate(0).add(&u_tractor(&fp).truncate(0).scale(3.0));
        let lhs = cc.to_so_matrix(&cc.bracket(&a, &b)).unwrap();
        let rhs = cc.to_so_matrix(&a).unwrap().bracket(&cc.to_so_matrix(&b).unwrap()).unwrap();
        assert!((lhs.matrix() - rhs.matrix()).amax() < 1e-10 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn identity_tractor_derivative() {
        let p = [0.1, 0.2, -0.3, 0.4];
        let x = Jet::seed(&p, 4, METRIC_ORDER);
        let g = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| {
                        x[0].lift(if i == j {
                            if i == 0 {
                                -1.0
                            } else {
                                1.0
                            }
                        } else {
                            0.0
                        })
                    })
                    .collect()
            })
            .collect();
        let cc = ConformalChart::new(MetricPoint::new(g).unwrap()).unwrap();
        let t = &x[0];
        let mut id = AdjointTractor::zero(t, 4);
        for k in 0..4 {
            id.phi[k][k] = t.lift(1.0);
        }
        for (i, d) in cc.normal_derivative(&id).iter().enumerate() {
            let [a, b, c] = d.slot_max();
            assert!((d.xi[i].value() + 1.0).abs() < 1e-14 && (a - 1.0).abs() < 1e-14 && b < 1e-14 && c < 1e-14);
        }
    }

    #[test]
    fn conformally_flat_tractor_parallel() {
        let p = [0.2, -0.1, 0.3, 0.15, -0.25];
        let cc = conformally_flat(5, &p);
        let w = cc.metric.weyl();
        let wm = w.iter().flatten().flatten().flatten().fold(0.0_f64, |a, x| a.max(x.value().abs()));
        assert!(wm < 1e-12, "{wm}");
        let k = special_conformal(&cc, &p, &[0.3, 1.0, -0.5, 0.2, 0.7]);
        assert!(cc.conformal_killing_defect(&k) < 1e-12);
        let (res, big) = cc.conformal_killing_identity(&k);
        assert!(res < 1e-11 && big > 0.1, "{res} {big}");
        let s = cc.splitting_general(&k);
        let eq = cc.tractor_equation_residual(&s);
        assert!(eq < 1e-11, "{eq}");
        let dstar = cc.codifferential_one(&cc.normal_derivative(&s));
        assert!(dstar.max_abs() < 1e-11);
    }

    #[test]
    fn fefferman_tractor_identities() {
        for (name, ell) in [("heisenberg_m1", "zero"), ("heisenberg_m2", "generic"), ("deformed_m2", "generic")] {
            let fp = point(name, ell, &[0.3, -0.2, 0.4, 0.1, -0.3, 0.6]);
            let cc = ConformalChart::new(fp.oracle.clone()).unwrap();
            let r = fundamental_field(&fp);
            let s = cc.splitting_killing(&r);
            let eq = cc.tractor_equation_residual(&s);
            assert!(eq < 1e-9, "{name}: tractor equation {eq}");
            let ks = cc.codifferential_two(&cc.normal_curvature());
            assert!(ks.iter().all(|k| k.max_abs() < 1e-9), "{name}: ∂*κ");
            let cmp = compare_splitting(&cc, &fp).unwrap();
            assert!(cmp.branch_agreement < 1e-9, "{name}: {cmp:?}");
            let j = build_jcr(&fp).unwrap();
            let rep = check_complex_structure(&cc, &j).unwrap();
            assert!(rep.square_residual < 1e-10 && rep.matrix_consistency < 1e-10, "{name}: {rep:?}");
            assert!(rep.algebra.as_ref().unwrap().max_residual() < 1e-9);
            let rec = reconstruct_cr(&cc, &j, &fp.web.cr.e).unwrap();
            let cmp = compare_reconstruction(&rec, &fp);
            assert!(cmp.j_residual < 1e-9 && cmp.h_residual < 1e-9 && cmp.levi_residual < 1e-9, "{name}: {cmp:?}");
        }
    }

    #[test]
    fn perturbed_splitting_is_not_complex() {
        let fp = point("heisenberg_m2", "zero", &[0.3, -0.2, 0.4, 0.1, -0.3, 0.6]);
        let cc = ConformalChart::new(fp.oracle.clone()).unwrap();
        let s = cc.splitting_killing(&fundamental_field(&fp)).truncate(0);
        let z = s.xi[0].zero_like();
        let th = AdjointTractor {
            xi: zeros(&z, 6),
            phi: zeros2(&z, 6),
            omega: fp.theta.iter().map(|t| t.truncate(0)).collect(),
        };
        let ok = check_complex_structure(&cc, &s).unwrap();
        let bad = check_complex_structure(&cc, &s.add(&th.scale(0.1))).unwrap();
        assert!(ok.square_residual < 1e-10);
        assert!(bad.square_residual > 1e-2 && bad.square_residual < 1.0, "{bad:?}");
    }

    #[test]
    fn reconstruction_is_conformally_invariant() {
        let fp = point("deformed_m2", "closed", &[0.3, -0.2, 0.4, 0.1, -0.3, 0.6]);
        let cc = ConformalChart::new(fp.oracle.clone()).unwrap();
        let phi = ScalarField::from_fn(6, |x| &(&x[0] * &x[5]) * 0.3 + &(&x[2] * 0.2));
        let pj = phi.eval(&ChartPoint::new(vec![0.3, -0.2, 0.4, 0.1, -0.3, 0.6]).unwrap().seed(METRIC_ORDER)).unwrap();
        let cc2 = rescaled_chart(&fp, &pj).unwrap();
        let r = fundamental_field(&fp);
        let a = reconstruct_cr(&cc, &build_jcr(&fp).unwrap(), &fp.web.cr.e).unwrap();
        let b = reconstruct_from_field(&cc2, &r, &fp.web.cr.e).unwrap();
        assert!(reconstruct_cr(&cc, &cc.splitting_killing(&r), &fp.web.cr.e).is_err());
        for (x, y) in a.j_images.iter().zip(&b.j_images) {
            for (u, v) in x.iter().zip(y) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
