//! Generalized Fefferman metrics on a gauge-trivialized circle bundle.
//!
//! The total chart has coordinates `(x, s)` with the fiber angle `s` last.
//! Imaginary-valued forms are stored by imaginary parts: `ℓ = iλ`,
//! `a_{θ,ℓ} = i a` with `a = Im a^W − scal^W θ / (2(m+1)) + λ`, and the
//! bundle connection is `A_{θ,ℓ} = i α`, `α = a + ((m+2)/2) ds`. The metric is
//! `f = L_θ + (2/(m+2)) (θ ⊗ α + α ⊗ θ)`, its curvature form is
//! `Ω_{θ,ℓ} = i da`, and `tr_θ L_{dℓ} = −Σ_i dλ(e_i, J e_i)`.
//!
//! Frame on the total chart: `e_i* = e_i − (a(e_i)/((m+2)/2)) ∂_s`, then `T*`,
//! then `S = ∂_s`.

use serde::Serialize;

use crate::cr::{jmap, PseudoHermitianStructure};
use crate::error::GeomError;
use crate::fields::{d_components, ChartPoint, OneForm, ScalarField};
use crate::jet::{dot, Jet};
use crate::metric::MetricPoint;
use crate::webster::WebsterPoint;

/// Jet order of the Fefferman metric components.
pub const METRIC_ORDER: usize = 3;

/// A base structure together with `ℓ = iλ`.
#[derive(Clone, Debug)]
pub struct FeffermanSpace {
    pub base: PseudoHermitianStructure,
    pub lambda: OneForm,
}

impl FeffermanSpace {
    pub fn new(base: PseudoHermitianStructure, lambda: OneForm) -> Result<FeffermanSpace, GeomError> {
        if lambda.dim() != base.dim() {
            return Err(GeomError::DimensionMismatch { expected: base.dim(), found: lambda.dim() });
        }
        Ok(FeffermanSpace { base, lambda })
    }

    /// Dimension of the total chart.
    pub fn dim(&self) -> usize {
        self.base.dim() + 1
    }

    /// Evaluates everything at a total-chart point `(x, s)`.
    pub fn at(&self, p: &ChartPoint) -> Result<FeffermanPoint, GeomError> {
        if p.dim() != self.dim() {
            return Err(GeomError::DimensionMismatch { expected: self.dim(), found: p.dim() });
        }
        let base_p = ChartPoint::new(p.coords()[..self.base.dim()].to_vec())?;
        FeffermanPoint::new(WebsterPoint::at(&self.base, &base_p)?, &self.lambda)
    }

    /// Lifts base sample points by appending fiber angles from `s_values`.
    pub fn lift_points(base_points: &[ChartPoint], s_values: &[f64]) -> Vec<ChartPoint> {
        base_points
            .iter()
            .zip(s_values.iter().cycle())
            .map(|(p, s)| {
                let mut c = p.coords().to_vec();
                c.push(*s);
                ChartPoint::new(c).expect("finite coordinates")
            })
            .collect()
    }
}

/// One structural component compared with the oracle.
#[derive(Clone, Debug, Serialize)]
pub struct Component {
    pub row: &'static str,
    pub indices: Vec<usize>,
    pub structural: f64,
    pub oracle: f64,
}

impl Component {
    pub fn residual(&self) -> f64 {
        (self.structural - self.oracle).abs()
    }
}

/// Fefferman data at one point of the total chart.
#[derive(Clone, Debug)]
pub struct FeffermanPoint {
    pub web: WebsterPoint,
    pub m: usize,
    /// Base dimension `n = 2m + 1`.
    pub n: usize,
    /// `λ` on the base chart.
    pub lambda: Vec<Jet>,
    /// `dλ` on the base chart.
    pub dlambda: Vec<Vec<Jet>>,
    /// `a = Im a_{θ,ℓ}` on the base chart.
    pub a: Vec<Jet>,
    /// `da` on the base chart.
    pub omega_im: Vec<Vec<Jet>>,
    /// `α` on the total chart.
    pub alpha: Vec<Jet>,
    /// `θ` lifted to the total chart.
    pub theta: Vec<Jet>,
    /// Metric components on the total chart.
    pub metric: Vec<Vec<Jet>>,
    /// `e_0*, …, e_{2m−1}*, T*, S` as total-chart components.
    pub frame: Vec<Vec<Jet>>,
    pub oracle: MetricPoint,
}

fn frame_pair(form2: &[Vec<Jet>], u: &[Jet], v: &[Jet]) -> Jet {
    let n = u.len();
    let mut acc = &(&form2[0][0] * &u[0]) * &v[0];
    for j in 0..n {
        for k in 0..n {
            if j + k > 0 {
                acc += &(&form2[j][k] * &u[j]) * &v[k];
            }
        }
    }
    acc
}

impl FeffermanPoint {
    pub fn new(web: WebsterPoint, lambda_form: &OneForm) -> Result<FeffermanPoint, GeomError> {
        let cr = &web.cr;
        let (m, n) = (cr.m, cr.n);
        let nf = n + 1;
        let mf = m as f64;
        let lambda = lambda_form.eval(&cr.x);
        let dlambda = d_components(&lambda);
        let im_aw = web.im_aw();
        let scal = &web.scal;
        let a: Vec<Jet> =
            (0..n).map(|k| &(&im_aw[k] - &(&cr.theta[k] * scal) * (1.0 / (2.0 * (mf + 1.0)))) + &lambda[k]).collect();
        let omega_im = d_components(&a);
        let ext = |j: &Jet| j.truncate(METRIC_ORDER.min(j.order())).extend(nf);
        let half = (mf + 2.0) / 2.0;
        let mut alpha: Vec<Jet> = a.iter().map(ext).collect();
        alpha.push(alpha[0].lift(half));
        let mut theta: Vec<Jet> = cr.theta.iter().map(ext).collect();
        theta.push(theta[0].zero_like());
        let levi: Vec<Vec<Jet>> = cr.levi_chart().iter().map(|r| r.iter().map(ext).collect()).collect();
        let c = 2.0 / (mf + 2.0);
        let metric: Vec<Vec<Jet>> = (0..nf)
            .map(|i| {
                (0..nf)
                    .map(|j| {
                        let mut v = (&(&theta[i] * &alpha[j]) + &(&theta[j] * &alpha[i])) * c;
                        if i < n && j < n {
                            v += &levi[i][j];
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        let mut frame: Vec<Vec<Jet>> = (0..n)
            .map(|b| {
                let mut v: Vec<Jet> = cr.e[b].iter().map(ext).collect();
                let ab = dot(&cr.e[b], &a);
                v.push(&ext(&ab) * (-1.0 / half));
                v
            })
            .collect();
        let mut s = vec![alpha[0].zero_like(); nf];
        s[n] = alpha[0].lift(1.0);
        frame.push(s);
        let oracle = MetricPoint::new(metric.clone())?;
        Ok(FeffermanPoint { web, m, n, lambda, dlambda, a, omega_im, alpha, theta, metric, frame, oracle })
    }

    pub fn s_index(&self) -> usize {
        self.n
    }

    pub fn t_index(&self) -> usize {
        self.n - 1
    }

    /// `dλ(e_a, e_b)` on the base frame.
    pub fn dlambda_frame(&self, a: usize, b: usize) -> f64 {
        frame_pair(&self.dlambda, &self.web.cr.e[a], &self.web.cr.e[b]).value()
    }

    /// `da(e_a, e_b)` on the base frame (`T` allowed).
    pub fn omega_frame(&self, a: usize, b: usize) -> f64 {
        frame_pair(&self.omega_im, &self.web.cr.e[a], &self.web.cr.e[b]).value()
    }

    /// `tr_θ L_{dℓ} = −Σ_i dλ(e_i, J e_i)`.
    pub fn tr_l_dell(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.web.cr.h() {
            let (pi, si) = jmap(i);
            acc -= si * self.dlambda_frame(i, pi);
        }
        acc
    }

    /// `f(u, v)` for total-chart vectors.
    pub fn f(&self, u: &[Jet], v: &[Jet]) -> f64 {
        self.oracle.inner(u, v).value()
    }

    /// Oracle `f(∇_{F_u} F_v, F_w)` for frame indices.
    pub fn oracle_lc(&self, u: usize, v: usize, w: usize) -> f64 {
        let nv = self.oracle.nabla_vec(&self.frame[u], &self.frame[v]);
        self.oracle.inner(&nv, &self.frame[w]).value()
    }

    /// Oracle Ricci on frame vectors.
    pub fn oracle_ric(&self, u: usize, v: usize) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n + 1 {
            for j in 0..self.n + 1 {
                acc += self.oracle.ric[i][j].value() * self.frame[u][i].value() * self.frame[v][j].value();
            }
        }
        acc
    }

    /// All structural Levi-Civita components next to the oracle values.
    pub fn lc_components(&self) -> Vec<Component> {
        let h = self.web.cr.h();
        let (t, s) = (self.t_index(), self.s_index());
        let c = &self.web.cr.c;
        let k = 2.0 / (self.m as f64 + 2.0);
        let levi_j = |a: usize, b: usize| {
            let (pa, sa) = jmap(a);
            if pa == b {
                sa
            } else {
                0.0
            }
        };
        let mut out = Vec::new();
        let mut push = |row, idx: Vec<usize>, structural: f64, oracle: f64| {
            out.push(Component { row, indices: idx, structural, oracle })
        };
        for a in 0..h {
            for b in 0..h {
                for cc in 0..h {
                    let st = self.web.gamma[a][b][cc].value() + self.web.b[a][b][cc].value();
                    push("horizontal", vec![a, b, cc], st, self.oracle_lc(a, b, cc));
                }
                push("vertical_direction", vec![a, b], 0.5 * levi_j(a, b), self.oracle_lc(s, a, b));
                push("vertical_component", vec![a, b], -0.5 * levi_j(a, b), self.oracle_lc(a, b, s));
                let st = 0.5 * (c[t][a][b].value() - c[t][b][a].value() + k * self.omega_frame(a, b));
                push("reeb_direction", vec![a, b], st, self.oracle_lc(t, a, b));
                let st = 0.5 * (c[t][a][b].value() + c[t][b][a].value() - k * self.omega_frame(a, b));
                push("reeb_component", vec![a, b], st, self.oracle_lc(a, b, t));
            }
            push("reeb_reeb", vec![a], k * self.omega_frame(t, a), self.oracle_lc(t, t, a));
            push("null_s_s", vec![a], 0.0, self.oracle_lc(s, s, a));
            push("null_s_t", vec![a], 0.0, self.oracle_lc(s, t, a));
            push("null_t_s", vec![a], 0.0, self.oracle_lc(t, s, a));
        }
        for u in 0..self.n + 1 {
            push("null_pairs", vec![u, s, s], 0.0, self.oracle_lc(u, s, s));
            push("null_pairs", vec![u, s, t], 0.0, self.oracle_lc(u, s, t));
            push("null_pairs", vec![u, t, t], 0.0, self.oracle_lc(u, t, t));
        }
        out
    }

    /// Structural `Ric(S, T*)`.
    pub fn ric_st_structural(&self) -> f64 {
        let mf = self.m as f64;
        self.web.scal.value() / (2.0 * (mf + 1.0)) - self.tr_l_dell() / (2.0 * (mf + 2.0))
    }

    /// Individual terms of the structural `Ric(e_a*, e_b*)`.
    pub fn ric_hh_terms(&self, a: usize, b: usize) -> [f64; 6] {
        let w = &self.web;
        let h = w.cr.h();
        let mf = self.m as f64;
        let (pa, sa) = jmap(a);
        let (pb, sb) = jmap(b);
        let delta = if a == b { 1.0 } else { 0.0 };
        let t0 = w.scal.value() / ((mf + 1.0) * (mf + 2.0)) * delta;
        let t1 = -(mf / (2.0 * (mf + 2.0))) * (sb * w.ric[a][pb].value() + sa * w.ric[b][pa].value());
        let t2 = -(mf / 4.0) * (sb * w.tau(a, pb).value() + sa * w.tau(b, pa).value());
        let mut t3 = 0.0;
        let mut nn = 0.0;
        let mut nnn = 0.0;
        for i in 0..h {
            t3 += w.nabla_b[i][a][b][i].value() + w.nabla_b[i][b][a][i].value();
            for d in 0..h {
                nn += w.cr.nij[a][i][d].value() * w.cr.nij[b][i][d].value();
                nnn += w.cr.nij[a][i][d].value() * w.cr.nij[d][i][b].value();
            }
        }
        let t4 = -nn / 8.0 + nnn / 4.0;
        let t5 = -(1.0 / (mf + 2.0)) * (sb * self.dlambda_frame(a, pb) + sa * self.dlambda_frame(b, pa));
        [t0, t1, t2, t3, t4, t5]
    }

    pub fn ric_hh_structural(&self, a: usize, b: usize) -> f64 {
        self.ric_hh_terms(a, b).iter().sum()
    }

    /// Structural scalar curvature.
    pub fn scal_structural(&self) -> f64 {
        let mf = self.m as f64;
        (2.0 * mf + 1.0) / (mf + 1.0) * self.web.scal.value() + self.tr_l_dell() / (mf + 2.0)
    }

    /// `(da − closed form)` residual of the curvature form, and the largest component.
    pub fn curvature_form_residual(&self) -> (f64, f64) {
        let cr = &self.web.cr;
        let n = self.n;
        let mf = self.m as f64;
        let ric = cr.frame_to_chart2(&self.web.ric);
        let dth = d_components(&cr.theta);
        let scal = &self.web.scal;
        let k = 1.0 / (2.0 * (mf + 1.0));
        let mut res: f64 = 0.0;
        let mut big: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let wedge = scal.d(i).value() * cr.theta[j].value() - scal.d(j).value() * cr.theta[i].value();
                let closed =
                    -ric[i][j].value() - k * scal.value() * dth[i][j].value() - k * wedge + self.dlambda[i][j].value();
                let direct = self.omega_im[i][j].value();
                res = res.max((closed - direct).abs());
                big = big.max(direct.abs());
            }
        }
        (res, big)
    }

    /// Killing-form checks: `(∇θ − dθ/2, Δθ residual, 𝒫θ residual)` as maxima
    /// over components, together with the reference magnitudes.
    pub fn killing_report(&self) -> KillingReport {
        let o = &self.oracle;
        let nf = self.n + 1;
        let nn = self.n as f64;
        let dth = d_components(&self.theta);
        let cov = o.cov_one_form(&self.theta);
        let mut killing: f64 = 0.0;
        for i in 0..nf {
            for j in 0..nf {
                killing = killing.max((cov[i][j].value() - 0.5 * dth[i][j].value()).abs());
            }
        }
        let lap = o.hodge_laplacian_one_form(&self.theta);
        let boch = o.bochner_one_form(&self.theta);
        let scal = o.scal.value();
        let trl = self.tr_l_dell();
        let mut lap_res: f64 = 0.0;
        let mut p_res: f64 = 0.0;
        let mut p_simple: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut weitz: f64 = 0.0;
        for k in 0..nf {
            let th = self.theta[k].value();
            let al = self.alpha[k].value();
            let lap_pred =
                2.0 * (nn - 1.0) / (nn + 3.0) * al + (scal / nn - 2.0 * (nn + 1.0) / (nn * (nn + 3.0)) * trl) * th;
            lap_res = lap_res.max((lap[k].value() - lap_pred).abs());
            let p_oracle = (boch[k].value() + scal / (2.0 * nn) * th) / (nn - 1.0);
            let p_pred = -al / (nn + 3.0) + (nn + 1.0) * trl * th / (nn * (nn - 1.0) * (nn + 3.0));
            p_res = p_res.max((p_oracle - p_pred).abs());
            p_simple = p_simple.max((p_oracle + al / (nn + 3.0)).abs());
            weitz = weitz.max((boch[k].value() + 0.5 * lap[k].value()).abs());
            scale = scale.max(lap_pred.abs()).max(p_pred.abs());
        }
        KillingReport {
            killing_residual: killing,
            laplacian_residual: lap_res,
            p_residual: p_res,
            p_simple_deviation: p_simple,
            bochner_hodge_residual: weitz,
            tr_l_dell: trl,
            scale,
        }
    }
}

/// Outcome of the Killing-form checks at one point.
#[derive(Clone, Debug, Serialize)]
pub struct KillingReport {
    pub killing_residual: f64,
    pub laplacian_residual: f64,
    pub p_residual: f64,
    /// `|𝒫θ + α/(n+3)|`, zero exactly when the trace term vanishes.
    pub p_simple_deviation: f64,
    /// `|tr∇²θ + Δθ/2|`.
    pub bochner_hodge_residual: f64,
    pub tr_l_dell: f64,
    pub scale: f64,
}

/// Whether `tr_θ dλ(·, J·)` vanishes at every point (tolerance `1e−9`).
pub fn ell_admissible(
    base: &PseudoHermitianStructure,
    lambda: &OneForm,
    points: &[ChartPoint],
) -> Result<bool, GeomError> {
    for p in points {
        let cr = base.at(p)?;
        let dl = d_components(&lambda.eval(&cr.x));
        let mut tr = 0.0;
        for i in 0..cr.h() {
            let (pi, si) = jmap(i);
            tr += si * frame_pair(&dl, &cr.e[i], &cr.e[pi]).value();
        }
        if tr.abs() > 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Metric of the rescaled base `e^{2f}θ` against `e^{2f}` times the original
/// metric: `(largest component difference, largest component)`.
pub fn conformal_rescaling_check(
    base: &PseudoHermitianStructure,
    lambda: &OneForm,
    f: &ScalarField,
    p: &ChartPoint,
) -> Result<(f64, f64), GeomError> {
    let orig = FeffermanSpace::new(base.clone(), lambda.clone())?.at(p)?;
    let resc = FeffermanSpace::new(base.rescale(f)?, lambda.clone())?.at(p)?;
    let base_p = ChartPoint::new(p.coords()[..base.dim()].to_vec())?;
    let factor = (2.0 * f.evaluate_jet(&base_p)?.value).exp();
    let mut res: f64 = 0.0;
    let mut big: f64 = 0.0;
    for (ro, rr) in orig.metric.iter().zip(&resc.metric) {
        for (o, r) in ro.iter().zip(rr) {
            res = res.max((r.value() - factor * o.value()).abs());
            big = big.max(r.value().abs());
        }
    }
    Ok((res, big))
}

/// Scalar curvature and squared Ricci norm of a Fefferman metric.
pub fn curvature_scalars(fp: &FeffermanPoint) -> (f64, f64) {
    let o = &fp.oracle;
    let nf = o.dim;
    let mut norm = 0.0;
    for i in 0..nf {
        for j in 0..nf {
            for k in 0..nf {
                for l in 0..nf {
                    norm += o.ginv[i][k].value() * o.ginv[j][l].value() * o.ric[i][j].value() * o.ric[k][l].value();
                }
            }
        }
    }
    (o.scal.value(), norm)
}

/// Curvature scalars for `λ` and for `λ + dg` at the same point.
pub fn gauge_change_check(
    base: &PseudoHermitianStructure,
    lambda: &OneForm,
    g: &ScalarField,
    p: &ChartPoint,
) -> Result<[(f64, f64); 2], GeomError> {
    let shifted = lambda.add(&g.differential())?;
    let a = FeffermanSpace::new(base.clone(), lambda.clone())?.at(p)?;
    let b = FeffermanSpace::new(base.clone(), shifted)?.at(p)?;
    Ok([curvature_scalars(&a), curvature_scalars(&b)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{deformed, ell_variants, example, heisenberg, DEFORMATION};

    #[test]
    fn heisenberg_frame_relations_and_curvature() {
        for m in [1, 2] {
            let s = heisenberg(m);
            let n = s.dim();
            let fs = FeffermanSpace::new(s, OneForm::zero(n)).unwrap();
            let mut c = vec![0.3, -0.4, 0.2, 0.7, -0.1, 0.5];
            c.truncate(n + 1);
            let fp = fs.at(&ChartPoint::new(c).unwrap()).unwrap();
            assert_eq!(fp.oracle.signature(), (1, n));
            let (si, ti) = (fp.s_index(), fp.t_index());
            assert!((fp.f(&fp.frame[si], &fp.frame[ti]) - 1.0).abs() < 1e-12);
            assert!(fp.f(&fp.frame[si], &fp.frame[si]).abs() < 1e-12);
            assert!(fp.oracle.scal.value().abs() < 1e-12);
            assert!(fp.oracle_ric(si, ti).abs() < 1e-12);
            assert!((fp.oracle_ric(si, si) - m as f64 / 2.0).abs() < 1e-12);
            for w in fp.oracle.weyl().iter().flatten().flatten().flatten() {
                assert!(w.value().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deformed_connection_rows_and_killing_form() {
        let base = deformed(DEFORMATION);
        for ell in ell_variants(2) {
            let fs = FeffermanSpace::new(base.clone(), ell.lambda.clone()).unwrap();
            let p = ChartPoint::new(vec![0.3, -0.4, 0.2, 0.7, -0.1, 0.5]).unwrap();
            let fp = fs.at(&p).unwrap();
            for comp in fp.lc_components() {
                assert!(comp.residual() < 1e-9, "{} {comp:?}", ell.name);
            }
            let (s, t) = (fp.s_index(), fp.t_index());
            assert!((fp.oracle_ric(s, t) - fp.ric_st_structural()).abs() < 1e-9);
            let k = fp.killing_report();
            assert!(k.killing_residual < 1e-10, "{k:?}");
            assert!(k.bochner_hodge_residual < 1e-10, "{k:?}");
            let (r, _) = fp.curvature_form_residual();
            assert!(r < 1e-9);
        }
    }

    #[test]
    fn rescaled_heisenberg_ricci_and_scalar() {
        let ex = example("heisenberg_m2_rescaled").unwrap();
        for ell in &ex.ells {
            let fs = FeffermanSpace::new(ex.structure.clone(), ell.lambda.clone()).unwrap();
            let fp = fs.at(&ChartPoint::new(vec![0.3, -0.4, 0.2, 0.7, -0.1, 0.5]).unwrap()).unwrap();
            let scal = fp.oracle.scal.value();
            assert!((scal - fp.scal_structural()).abs() < 1e-9 * (1.0 + scal.abs()));
            for a in 0..4 {
                for b in 0..4 {
                    assert!((fp.oracle_ric(a, b) - fp.ric_hh_structural(a, b)).abs() < 1e-9);
                }
            }
            let k = fp.killing_report();
            assert!(k.laplacian_residual < 1e-9, "{k:?}");
            assert!(k.p_residual < 1e-9, "{k:?}");
            assert_eq!(k.tr_l_dell.abs() < 1e-12, k.p_simple_deviation < 1e-9);
        }
    }

    #[test]
    fn conformal_and_gauge_behaviour() {
        let base = deformed(DEFORMATION);
        let f = crate::examples::rescaling_polynomial(2);
        let p = ChartPoint::new(vec![0.3, -0.4, 0.2, 0.7, -0.1, 0.5]).unwrap();
        for ell in ell_variants(2) {
            let (r, big) = conformal_rescaling_check(&base, &ell.lambda, &f, &p).unwrap();
            assert!(r < 1e-9 * big.max(1.0), "{} {r}", ell.name);
        }
        let g = ScalarField::coordinate(5, 0).mul(&ScalarField::coordinate(5, 4)).unwrap();
        let [a, b] = gauge_change_check(&base, &ell_variants(2)[2].lambda, &g, &p).unwrap();
        assert!((a.0 - b.0).abs() < 1e-10 && (a.1 - b.1).abs() < 1e-10, "{a:?} {b:?}");
    }
}
