//! Registry of numerical checks and the suite runner.
//!
//! Each check compares two independently computed quantities over seeded
//! sample points and records the largest absolute and relative residuals.
//! Relative residuals use `|a − b| / (1 + |b|)`.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    analyze_complex_element, canonical_complex_element, kostant_codifferential, Cochain, Codifferential, SoMatrix,
};
use crate::cr::{classify_integrability, Integrability};
use crate::error::GeomError;
use crate::examples::{example, rescaling_polynomial, ExampleGeometry};
use crate::fefferman::{
    conformal_rescaling_check, ell_admissible, gauge_change_check, Component, FeffermanPoint, FeffermanSpace,
    KillingReport, METRIC_ORDER,
};
use crate::fields::{ChartPoint, ScalarField};
use crate::jet::Jet;
use crate::report::{CheckRecord, Meta, Report, SCHEMA_VERSION};
use crate::tractor::{
    build_jcr, check_complex_structure, compare_reconstruction, compare_splitting, fundamental_field, reconstruct_cr,
    reconstruct_from_field, rescaled_chart, AdjointTractor, ComplexStructureReport, ConformalChart,
    ReconstructionReport, SplittingComparison,
};
use crate::webster::{rescaling_check, torsion_identities, WebsterPoint};

/// How a residual is compared with its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceKind {
    Relative,
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub kind: ToleranceKind,
    pub value: f64,
}

const fn rel(value: f64) -> Tolerance {
    Tolerance { kind: ToleranceKind::Relative, value }
}

const fn abs(value: f64) -> Tolerance {
    Tolerance { kind: ToleranceKind::Absolute, value }
}

/// Acceptance groups; every group is covered by at least one check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    ScalarCurvature,
    LeviCivita,
    Ricci,
    KillingForm,
    WebsterRescaling,
    ConformalGauge,
    ComplexTractor,
    ComplexElements,
    Reconstruction,
    TorsionIdentities,
    Algebra,
    FlatChain,
    Structure,
}

impl Group {
    pub const ACCEPTANCE: [Group; 12] = [
        Group::ScalarCurvature,
        Group::LeviCivita,
        Group::Ricci,
        Group::KillingForm,
        Group::WebsterRescaling,
        Group::ConformalGauge,
        Group::ComplexTractor,
        Group::ComplexElements,
        Group::Reconstruction,
        Group::TorsionIdentities,
        Group::Algebra,
        Group::FlatChain,
    ];

    /// Snake-case name, as used in reports and suite filters.
    pub fn name(self) -> &'static str {
        match self {
            Group::ScalarCurvature => "scalar_curvature",
            Group::LeviCivita => "levi_civita",
            Group::Ricci => "ricci",
            Group::KillingForm => "killing_form",
            Group::WebsterRescaling => "webster_rescaling",
            Group::ConformalGauge => "conformal_gauge",
            Group::ComplexTractor => "complex_tractor",
            Group::ComplexElements => "complex_elements",
            Group::Reconstruction => "reconstruction",
            Group::TorsionIdentities => "torsion_identities",
            Group::Algebra => "algebra",
            Group::FlatChain => "flat_chain",
            Group::Structure => "structure",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Group::ScalarCurvature => "scalar curvature of the Fefferman metric",
            Group::LeviCivita => "Levi-Civita components in the lifted frame",
            Group::Ricci => "Ricci components in the lifted frame",
            Group::KillingForm => "Killing form, its Laplacians and the P operator",
            Group::WebsterRescaling => "Webster connection and scalar curvature under rescaling",
            Group::ConformalGauge => "conformal rescaling and gauge invariance of the metric",
            Group::ComplexTractor => "J_CR, the splitting of R and the tractor equation",
            Group::ComplexElements => "algebra elements squaring to minus the identity",
            Group::Reconstruction => "CR reconstruction from the fundamental field",
            Group::TorsionIdentities => "Nijenhuis, B and torsion identities",
            Group::Algebra => "bracket, codifferential and splitting properties",
            Group::FlatChain => "flat Heisenberg sanity chain",
            Group::Structure => "construction invariants",
        }
    }
}

/// Accumulated residuals of one check.
#[derive(Clone, Debug, Default)]
pub struct Acc {
    pub abs: f64,
    pub rel: f64,
    pub samples: usize,
    pub ells: BTreeSet<String>,
    pub diagnostics: BTreeMap<String, f64>,
    pub requirements: Vec<(String, bool)>,
}

impl Acc {
    /// Records `|value − reference|`.
    pub fn compare(&mut self, value: f64, reference: f64) {
        self.residual(value - reference, reference.abs());
    }

    /// Records a residual against a reference magnitude.
    pub fn residual(&mut self, r: f64, scale: f64) {
        let a = if r.is_finite() { r.abs() } else { f64::INFINITY };
        self.abs = self.abs.max(a);
        self.rel = self.rel.max(a / (1.0 + scale.abs()));
        self.samples += 1;
    }

    pub fn diag_max(&mut self, key: &str, v: f64) {
        let e = self.diagnostics.entry(key.to_string()).or_insert(0.0);
        *e = e.max(v.abs());
    }

    pub fn diag_set(&mut self, key: &str, v: f64) {
        self.diagnostics.insert(key.to_string(), v);
    }

    pub fn require(&mut self, what: impl Into<String>, ok: bool) {
        self.requirements.push((what.into(), ok));
    }
}

/// Per-point results of everything computed on a Fefferman point.
#[derive(Clone, Debug)]
pub struct FeffermanSample {
    pub scal_oracle: f64,
    pub scal_structural: f64,
    pub lc: Vec<Component>,
    pub ric_st: (f64, f64),
    pub ric_hh: Vec<(f64, f64)>,
    /// Largest torsion, `∇B` and `N`-quadratic term of the structural Ricci.
    pub torsion_terms: f64,
    pub killing: KillingReport,
    pub curvature_form: (f64, f64),
    /// `(f(S,T*) − 1, f(S,S), max f(S,e*), max |f(e*,e*) − δ|)`.
    pub frame_relations: [f64; 4],
    pub full_ricci: f64,
    pub omega_im: f64,
    pub tr_l_dell: f64,
    pub jcr: Result<ComplexStructureReport, String>,
    pub splitting: Result<SplittingComparison, String>,
    pub tractor_equation: f64,
    pub curvature_along_r: f64,
    pub normality: f64,
    pub dstar_dnor: f64,
    pub pi_h: f64,
    pub killing_identity: (f64, f64),
    pub bracket_matrix: (f64, f64),
    pub weyl_trace: f64,
    pub reconstruction: Result<ReconstructionReport, String>,
    /// `(J difference, rescaled-vs-base J residual)`.
    pub reconstruction_rescaled: Result<(f64, f64), String>,
}

fn err<T>(r: Result<T, GeomError>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_tractor(cc: &ConformalChart, template: &Jet, rng: &mut ChaCha8Rng) -> AdjointTractor {
    let n = cc.dim();
    let t = template.truncate(0);
    let mut a = AdjointTractor::zero(&t, n);
    let mut k = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.gen_range(-1.0..1.0);
            k[(i, j)] = v;
            k[(j, i)] = -v;
        }
    }
    let ginv = nalgebra::DMatrix::from_fn(n, n, |i, j| cc.metric.ginv[i][j].value());
    let skew = ginv * k;
    let sc: f64 = rng.gen_range(-1.0..1.0);
    for i in 0..n {
        a.xi[i] = t.lift(rng.gen_range(-1.0..1.0));
        a.omega[i] = t.lift(rng.gen_range(-1.0..1.0));
        for j in 0..n {
            a.phi[i][j] = t.lift(skew[(i, j)] + if i == j { sc } else { 0.0 });
        }
    }
    a
}

fn jet_max<'a>(it: impl IntoIterator<Item = &'a Jet>) -> f64 {
    it.into_iter().fold(0.0, |a, x| a.max(x.value().abs()))
}

impl FeffermanSample {
    fn new(fp: &FeffermanPoint, point: &ChartPoint, rng: &mut ChaCha8Rng) -> FeffermanSample {
        let h = fp.web.cr.h();
        let (s, t) = (fp.s_index(), fp.t_index());
        let mut ric_hh = Vec::new();
        let mut torsion_terms: f64 = 0.0;
        for a in 0..h {
            for b in 0..h {
                ric_hh.push((fp.ric_hh_structural(a, b), fp.oracle_ric(a, b)));
                let terms = fp.ric_hh_terms(a, b);
                torsion_terms = torsion_terms.max(terms[2].abs()).max(terms[3].abs()).max(terms[4].abs());
            }
        }
        let mut fr = [fp.f(&fp.frame[s], &fp.frame[t]) - 1.0, fp.f(&fp.frame[s], &fp.frame[s]), 0.0, 0.0];
        for a in 0..h {
            fr[2] = fr[2].max(fp.f(&fp.frame[s], &fp.frame[a]).abs());
            for b in 0..h {
                let d = if a == b { 1.0 } else { 0.0 };
                fr[3] = fr[3].max((fp.f(&fp.frame[a], &fp.frame[b]) - d).abs());
            }
        }
        let full_ricci = jet_max(fp.oracle.ric.iter().flatten());
        let omega_im = jet_max(fp.omega_im.iter().flatten());

        let mut sample = FeffermanSample {
            scal_oracle: fp.oracle.scal.value(),
            scal_structural: fp.scal_structural(),
            lc: fp.lc_components(),
            ric_st: (fp.ric_st_structural(), fp.oracle_ric(s, t)),
            ric_hh,
            torsion_terms,
            killing: fp.killing_report(),
            curvature_form: fp.curvature_form_residual(),
            frame_relations: fr,
            full_ricci,
            omega_im,
            tr_l_dell: fp.tr_l_dell(),
            jcr: Err("not evaluated".into()),
            splitting: Err("not evaluated".into()),
            tractor_equation: f64::NAN,
            curvature_along_r: f64::NAN,
            normality: f64::NAN,
            dstar_dnor: f64::NAN,
            pi_h: f64::NAN,
            killing_identity: (f64::NAN, f64::NAN),
            bracket_matrix: (f64::NAN, f64::NAN),
            weyl_trace: f64::NAN,
            reconstruction: Err("not evaluated".into()),
            reconstruction_rescaled: Err("not evaluated".into()),
        };
        let cc = match ConformalChart::new(fp.oracle.clone()) {
            Ok(cc) => cc,
            Err(e) => {
                sample.jcr = Err(e.to_string());
                return sample;
            }
        };
        let r = fundamental_field(fp);
        let jcr = build_jcr(fp);
        sample.jcr = err(jcr.clone().and_then(|j| check_complex_structure(&cc, &j)));
        sample.splitting = err(compare_splitting(&cc, fp));
        let split = cc.splitting(&r);
        sample.tractor_equation = cc.tractor_equation_residual(&split);
        sample.curvature_along_r = cc.curvature_along(&r).iter().map(AdjointTractor::max_abs).fold(0.0, f64::max);
        let kappa = cc.normal_curvature();
        sample.normality = cc.codifferential_two(&kappa).iter().map(AdjointTractor::max_abs).fold(0.0, f64::max);
        sample.dstar_dnor = cc.codifferential_one(&cc.normal_derivative(&split)).max_abs();
        sample.pi_h = split.xi.iter().zip(&r).map(|(a, b)| (a.value() - b.value()).abs()).fold(0.0, f64::max);
        sample.killing_identity = cc.conformal_killing_identity(&r);
        let a = random_tractor(&cc, &r[0], rng);
        let b = random_tractor(&cc, &r[0], rng);
        sample.bracket_matrix = match (cc.to_so_matrix(&cc.bracket(&a, &b)), cc.to_so_matrix(&a), cc.to_so_matrix(&b)) {
            (Ok(l), Ok(ma), Ok(mb)) => match ma.bracket(&mb) {
                Ok(rm) => ((l.matrix() - rm.matrix()).amax(), rm.max_abs()),
                Err(_) => (f64::INFINITY, 0.0),
            },
            _ => (f64::INFINITY, 0.0),
        };
        let w = cc.metric.weyl();
        let nf = cc.dim();
        let mut wt: f64 = 0.0;
        for i in 0..nf {
            for l in 0..nf {
                let mut acc = 0.0;
                for j in 0..nf {
                    for k in 0..nf {
                        acc += cc.metric.ginv[j][k].value() * w[i][j][k][l].value();
                    }
                }
                wt = wt.max(acc.abs());
            }
        }
        sample.weyl_trace = wt;
        sample.reconstruction = match jcr {
            Ok(j) => err(reconstruct_cr(&cc, &j, &fp.web.cr.e)).map(|rec| compare_reconstruction(&rec, fp)),
            Err(e) => Err(e.to_string()),
        };
        let phi = ScalarField::from_fn(nf, move |x: &[Jet]| {
            &(&(&x[0] * &x[nf - 1]) * 0.3) + &(&(&x[1] * &x[1]) * 0.2) - &(&x[nf - 2] * 0.15)
        });
        sample.reconstruction_rescaled = (|| -> Result<(f64, f64), GeomError> {
            let pj = phi.eval(&point.seed(METRIC_ORDER))?;
            let cc2 = rescaled_chart(fp, &pj)?;
            let a = reconstruct_from_field(&cc, &r, &fp.web.cr.e)?;
            let b = reconstruct_from_field(&cc2, &r, &fp.web.cr.e)?;
            let mut d: f64 = 0.0;
            for (x, y) in a.j_images.iter().zip(&b.j_images) {
                for (u, v) in x.iter().zip(y) {
                    d = d.max((u - v).abs());
                }
            }
            Ok((d, compare_reconstruction(&b, fp).j_residual))
        })()
        .map_err(|e| e.to_string());
        sample
    }
}

/// Shared state of one suite run.
pub struct Context {
    pub example: ExampleGeometry,
    pub seed: u64,
    pub base_points: Vec<ChartPoint>,
    pub total_points: Vec<ChartPoint>,
    samples: Vec<OnceLock<Result<Vec<FeffermanSample>, String>>>,
    admissible: Vec<OnceLock<Result<bool, String>>>,
}

impl Context {
    pub fn new(example: ExampleGeometry, seed: u64, points: usize) -> Context {
        let base_points = example.sample_points(seed, points);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f1be);
        let s: Vec<f64> = (0..points).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
        let total_points = FeffermanSpace::lift_points(&base_points, &s);
        let k = example.ells.len();
        Context {
            example,
            seed,
            base_points,
            total_points,
            samples: (0..k).map(|_| OnceLock::new()).collect(),
            admissible: (0..k).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn ell_names(&self) -> Vec<&'static str> {
        self.example.ells.iter().map(|e| e.name).collect()
    }

    pub fn space(&self, ell: usize) -> Result<FeffermanSpace, GeomError> {
        FeffermanSpace::new(self.example.structure.clone(), self.example.ells[ell].lambda.clone())
    }

    /// Per-point Fefferman results for the `ell`-th variant, computed once.
    pub fn samples(&self, ell: usize) -> Result<&[FeffermanSample], GeomError> {
        let r = self.samples[ell].get_or_init(|| {
            let fs = self.space(ell).map_err(|e| e.to_string())?;
            let eval = |i: usize| -> Result<FeffermanSample, String> {
                let p = &self.total_points[i];
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ ((ell as u64) << 32 | i as u64));
                fs.at(p).map(|fp| FeffermanSample::new(&fp, p, &mut rng)).map_err(|e| e.to_string())
            };
            let count = self.total_points.len();
            let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(count.max(1));
            let mut out: Vec<Option<Result<FeffermanSample, String>>> = (0..count).map(|_| None).collect();
            std::thread::scope(|scope| {
                let chunk = count.div_ceil(workers).max(1);
                for (c, slot) in out.chunks_mut(chunk).enumerate() {
                    let eval = &eval;
                    scope.spawn(move || {
                        for (k, s) in slot.iter_mut().enumerate() {
                            *s = Some(eval(c * chunk + k));
                        }
                    });
                }
            });
            out.into_iter().map(|s| s.expect("every slot is filled")).collect()
        });
        r.as_deref().map_err(|e| GeomError::Precondition(e.clone()))
    }

    pub fn admissible(&self, ell: usize) -> Result<bool, GeomError> {
        let r = self.admissible[ell].get_or_init(|| {
            ell_admissible(&self.example.structure, &self.example.ells[ell].lambda, &self.base_points)
                .map_err(|e| e.to_string())
        });
        r.clone().map_err(GeomError::Precondition)
    }

    fn is_heisenberg(&self) -> bool {
        self.example.name.starts_with("heisenberg")
    }

    fn is_flat(&self) -> bool {
        matches!(self.example.name, "heisenberg_m1" | "heisenberg_m2")
    }

    fn zero_ell(&self) -> Option<usize> {
        self.example.ells.iter().position(|e| e.name == "zero")
    }

    fn for_samples(
        &self,
        acc: &mut Acc,
        mut f: impl FnMut(&mut Acc, &FeffermanSample, usize) -> Result<(), GeomError>,
    ) -> Result<(), GeomError> {
        for ell in 0..self.example.ells.len() {
            acc.ells.insert(self.example.ells[ell].name.to_string());
            for s in self.samples(ell)? {
                f(acc, s, ell)?;
            }
        }
        Ok(())
    }
}

type Runner = fn(&Context, &mut Acc) -> Result<(), GeomError>;

/// A registered check.
pub struct CheckSpec {
    pub id: &'static str,
    pub group: Group,
    pub subject: &'static str,
    pub tolerance: Tolerance,
    applies: fn(&Context) -> bool,
    run: Runner,
}

fn always(_: &Context) -> bool {
    true
}

fn heisenberg_only(c: &Context) -> bool {
    c.is_heisenberg()
}

fn flat_only(c: &Context) -> bool {
    c.is_flat()
}

fn run_scalar(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        acc.compare(s.scal_structural, s.scal_oracle);
        Ok(())
    })
}

fn run_lc(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        for comp in &s.lc {
            acc.compare(comp.structural, comp.oracle);
            acc.diag_max(&format!("row.{}", comp.row), comp.residual());
        }
        Ok(())
    })
}

fn run_ric_st(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        acc.compare(s.ric_st.0, s.ric_st.1);
        Ok(())
    })
}

fn run_ric_hh(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        for (a, b) in &s.ric_hh {
            acc.compare(*a, *b);
        }
        acc.diag_max("largest_torsion_term", s.torsion_terms);
        Ok(())
    })?;
    if !c.example.integrable {
        let big = acc.diagnostics.get("largest_torsion_term").copied().unwrap_or(0.0);
        acc.require("a torsion, ∇B or N term exceeds 1e-3", big > 1e-3);
    }
    Ok(())
}

fn run_killing(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        acc.residual(s.killing.killing_residual, 0.0);
        Ok(())
    })
}

fn run_laplacian(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        acc.residual(s.killing.laplacian_residual, s.killing.scale);
        acc.diag_max("bochner_hodge_relation", s.killing.bochner_hodge_residual);
        Ok(())
    })
}

fn run_p_theta(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        acc.residual(s.killing.p_residual, s.killing.scale);
        Ok(())
    })
}

fn run_p_equivalence(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    for ell in 0..c.example.ells.len() {
        let name = c.example.ells[ell].name;
        acc.ells.insert(name.to_string());
        let admissible = c.admissible(ell)?;
        let dev = c.samples(ell)?.iter().map(|s| s.killing.p_simple_deviation).fold(0.0, f64::max);
        acc.diag_set(&format!("{name}.simple_form_deviation"), dev);
        if admissible {
            acc.residual(dev, 0.0);
        } else {
            acc.samples += 1;
            acc.require(format!("{name}: non-admissible ℓ gives a nonzero trace term"), dev > 1e-6);
        }
    }
    Ok(())
}

fn rescaling_fields(dim: usize, m: usize) -> [(&'static str, ScalarField); 3] {
    [
        ("identity", ScalarField::constant(dim, 0.0)),
        ("constant", ScalarField::constant(dim, 0.3)),
        ("polynomial", rescaling_polynomial(m)),
    ]
}

fn run_rescaling(which: usize, c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    let (name, f) = rescaling_fields(c.example.dim(), c.example.m())[which].clone();
    for p in &c.base_points {
        let r = rescaling_check(&c.example.structure, &f, p)?;
        acc.residual(r.omega_residual, r.omega_scale);
        acc.compare(r.scal_recomputed, r.scal_predicted);
    }
    acc.diag_set(&format!("{name}.points"), c.base_points.len() as f64);
    Ok(())
}

fn run_rescaling_identity(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    run_rescaling(0, c, acc)
}

fn run_rescaling_constant(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    run_rescaling(1, c, acc)
}

fn run_rescaling_polynomial(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    run_rescaling(2, c, acc)
}

fn run_conformal(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    let f = rescaling_polynomial(c.example.m());
    for ell in &c.example.ells {
        acc.ells.insert(ell.name.to_string());
        for p in &c.total_points {
            let (res, big) = conformal_rescaling_check(&c.example.structure, &ell.lambda, &f, p)?;
            acc.residual(res, big);
        }
    }
    Ok(())
}

fn run_gauge(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    let n = c.example.dim();
    let g = ScalarField::from_fn(n, move |x: &[Jet]| &(&x[0] * &x[n - 1]).sin() * 0.2 + &(&x[1] * 0.3));
    for ell in &c.example.ells {
        acc.ells.insert(ell.name.to_string());
        for p in &c.total_points {
            let [a, b] = gauge_change_check(&c.example.structure, &ell.lambda, &g, p)?;
            acc.compare(b.0, a.0);
            acc.compare(b.1, a.1);
        }
    }
    Ok(())
}

fn run_jcr_square(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        let r = s.jcr.as_ref().map_err(|e| GeomError::Precondition(e.clone()))?;
        acc.residual(r.square_residual, 0.0);
        acc.diag_max("matrix_consistency", r.matrix_consistency);
        acc.diag_max("conformal_defect", r.conformal_defect);
        match &r.algebra {
            Some(a) => acc.diag_max("algebra_conclusions", a.max_residual()),
            None => acc.require("algebra element squares to -id", false),
        }
        Ok(())
    })
}

fn run_splitting_vs_jcr(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, ell| {
        let r = s.splitting.as_ref().map_err(|e| GeomError::Precondition(e.clone()))?;
        for v in r.residual {
            acc.residual(v, 0.0);
        }
        let name = c.example.ells[ell].name;
        acc.diag_max(&format!("{name}.residual"), r.residual.iter().cloned().fold(0.0, f64::max));
        acc.diag_max(&format!("{name}.splitting_minus_jcr"), r.difference.iter().cloned().fold(0.0, f64::max));
        acc.diag_max(&format!("{name}.u"), r.u_size);
        Ok(())
    })
}

fn run_tractor_equation(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    for ell in 0..c.example.ells.len() {
        let name = c.example.ells[ell].name;
        let eq = c.samples(ell)?.iter().map(|s| s.tractor_equation).fold(0.0, f64::max);
        acc.diag_set(&format!("{name}.residual"), eq);
        if c.admissible(ell)? {
            acc.ells.insert(name.to_string());
            for s in c.samples(ell)? {
                acc.residual(s.tractor_equation, 0.0);
            }
        }
    }
    Ok(())
}

fn run_integrable_curvature(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    let ell = c.zero_ell().ok_or_else(|| GeomError::Precondition("no ℓ = 0 variant".into()))?;
    acc.ells.insert("zero".into());
    for s in c.samples(ell)? {
        acc.residual(s.curvature_along_r, 0.0);
    }
    Ok(())
}

fn conjugated_complex_elements(n: usize, seed: u64, count: usize) -> Result<Vec<SoMatrix>, GeomError> {
    let base = canonical_complex_element(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0a19_eb7a);
    (0..count)
        .map(|_| {
            let x = SoMatrix::random(n, &mut rng).scale(0.4);
            base.conjugate(&x.exp())
        })
        .collect()
}

fn run_complex_elements(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    let n = c.example.dim();
    let mut min_norm = f64::INFINITY;
    for beta in conjugated_complex_elements(n, c.seed, 50)? {
        let r = analyze_complex_element(&beta)?;
        acc.residual(r.max_residual(), 0.0);
        acc.diag_max("square_defect", r.square_defect);
        min_norm = min_norm.min(r.m_norm).min(r.jl_norm);
    }
    acc.diag_set("smallest_m_or_l_norm", min_norm);
    acc.require("m and l stay away from zero by 1e-3", min_norm >= 1e-3);
    Ok(())
}

fn run_reconstruction(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    for ell in 0..c.example.ells.len() {
        if !c.admissible(ell)? {
            continue;
        }
        acc.ells.insert(c.example.ells[ell].name.to_string());
        for s in c.samples(ell)? {
            let r = s.reconstruction.as_ref().map_err(|e| GeomError::Precondition(e.clone()))?;
            acc.residual(r.h_residual, 1.0);
            acc.residual(r.j_residual, 1.0);
            acc.residual(r.levi_residual, 1.0);
            acc.diag_max("h", r.h_residual);
            acc.diag_max("j", r.j_residual);
            acc.diag_max("levi", r.levi_residual);
            acc.diag_max("kernel_defect", r.kernel_defect);
        }
    }
    Ok(())
}

fn run_reconstruction_invariance(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        let (d, base) = *s.reconstruction_rescaled.as_ref().map_err(|e| GeomError::Precondition(e.clone()))?;
        acc.residual(d, 1.0);
        acc.diag_max("rescaled_vs_base_j", base);
        Ok(())
    })
}

fn torsion_rows(c: &Context, acc: &mut Acc, trace: bool) -> Result<(), GeomError> {
    let mut largest: f64 = 0.0;
    for p in &c.base_points {
        let w = WebsterPoint::at(&c.example.structure, p)?;
        for r in torsion_identities(&w) {
            let is_trace = r.name.starts_with("trace_") || r.name == "double_trace_nn";
            if is_trace != trace {
                continue;
            }
            acc.residual(r.residual, r.magnitude);
            acc.diag_max(r.name, r.residual);
            if is_trace {
                largest = largest.max(r.magnitude);
            }
        }
    }
    if trace {
        acc.diag_set("largest_side", largest);
        if !c.example.integrable {
            acc.require("a trace identity side exceeds 1e-3", largest >= 1e-3);
        }
    }
    Ok(())
}

fn run_torsion_traces(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    torsion_rows(c, acc, true)
}

fn run_torsion_symmetries(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    torsion_rows(c, acc, false)
}

fn run_jacobi(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    let n = c.example.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0x1ac0b1);
    for _ in 0..50 {
        let (x, y, z) = (SoMatrix::random(n, &mut rng), SoMatrix::random(n, &mut rng), SoMatrix::random(n, &mut rng));
        let j = x.bracket(&y.bracket(&z)?)?.add(&y.bracket(&z.bracket(&x)?)?).add(&z.bracket(&x.bracket(&y)?)?);
        acc.residual(j.max_abs(), 0.0);
        acc.diag_max("membership_defect", x.bracket(&y)?.membership_defect());
    }
    Ok(())
}

fn run_codifferential_square(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    let n = c.example.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0xd5d5);
    for _ in 0..20 {
        let phi = Cochain::random2(n, &mut rng);
        let once = match kostant_codifferential(&phi)? {
            Codifferential::Cochain(c) => c,
            Codifferential::Element(_) => return Err(GeomError::Precondition("degree mismatch".into())),
        };
        match kostant_codifferential(&once)? {
            Codifferential::Element(e) => acc.residual(e.max_abs(), 0.0),
            Codifferential::Cochain(_) => return Err(GeomError::Precondition("degree mismatch".into())),
        }
    }
    Ok(())
}

fn run_bracket_matrix(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        acc.residual(s.bracket_matrix.0, s.bracket_matrix.1);
        Ok(())
    })
}

fn run_splitting_properties(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        acc.residual(s.pi_h, 0.0);
        acc.residual(s.dstar_dnor, 0.0);
        acc.diag_max("projection", s.pi_h);
        acc.diag_max("codifferential_of_derivative", s.dstar_dnor);
        if let Ok(sp) = &s.splitting {
            acc.residual(sp.branch_agreement, 0.0);
            acc.diag_max("branch_agreement", sp.branch_agreement);
        }
        Ok(())
    })
}

fn run_normality(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        acc.residual(s.normality, 0.0);
        acc.diag_max("weyl_trace", s.weyl_trace);
        Ok(())
    })
}

fn run_killing_identity(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        acc.residual(s.killing_identity.0, s.killing_identity.1);
        Ok(())
    })
}

fn flat_webster(c: &Context, acc: &mut Acc, what: fn(&WebsterPoint) -> f64) -> Result<(), GeomError> {
    for p in &c.base_points {
        let w = WebsterPoint::at(&c.example.structure, p)?;
        acc.residual(what(&w), 0.0);
    }
    Ok(())
}

fn run_flat_scal_w(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    flat_webster(c, acc, |w| w.scal.value())
}

fn run_flat_nijenhuis(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    flat_webster(c, acc, |w| w.cr.nijenhuis_norm())
}

fn run_flat_tau(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    flat_webster(c, acc, |w| {
        let h = w.cr.h();
        (0..h).flat_map(|a| (0..h).map(move |b| (a, b))).fold(0.0, |m, (a, b)| m.max(w.tau(a, b).value().abs()))
    })
}

fn flat_samples(c: &Context, acc: &mut Acc, what: fn(&FeffermanSample) -> f64) -> Result<(), GeomError> {
    let ell = c.zero_ell().ok_or_else(|| GeomError::Precondition("no ℓ = 0 variant".into()))?;
    acc.ells.insert("zero".into());
    for s in c.samples(ell)? {
        acc.residual(what(s), 0.0);
    }
    Ok(())
}

fn run_flat_curvature_form(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    flat_samples(c, acc, |s| s.omega_im)
}

fn run_flat_scal_f(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    flat_samples(c, acc, |s| s.scal_oracle)
}

fn run_flat_ricci(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    flat_samples(c, acc, |s| s.full_ricci)?;
    let ell = c.zero_ell().expect("checked above");
    for s in c.samples(ell)? {
        acc.diag_max("ric_s_t", s.ric_st.1);
        let hh = s.ric_hh.iter().map(|(_, o)| o.abs()).fold(0.0, f64::max);
        acc.diag_max("ric_horizontal", hh);
    }
    Ok(())
}

fn run_frame_relations(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        for v in s.frame_relations {
            acc.residual(v, 0.0);
        }
        Ok(())
    })
}

fn run_curvature_form(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    c.for_samples(acc, |acc, s, _| {
        acc.residual(s.curvature_form.0, s.curvature_form.1);
        Ok(())
    })
}

fn run_integrability(c: &Context, acc: &mut Acc) -> Result<(), GeomError> {
    let class = classify_integrability(&c.example.structure, &c.base_points)?;
    let expected = if c.example.integrable { Integrability::Integrable } else { Integrability::PartiallyIntegrable };
    acc.samples += c.base_points.len();
    acc.require(format!("classified as {expected:?}"), class == expected);
    Ok(())
}

macro_rules! check {
    ($id:expr, $group:expr, $subject:expr, $tol:expr, $applies:expr, $run:expr) => {
        CheckSpec { id: $id, group: $group, subject: $subject, tolerance: $tol, applies: $applies, run: $run }
    };
}

/// All registered checks, sorted by id.
pub fn registry() -> Vec<CheckSpec> {
    use Group::*;
    let mut v = vec![
        check!(
            "fefferman.scalar_curvature",
            ScalarCurvature,
            "oracle scalar curvature equals the structural formula",
            rel(1e-8),
            always,
            run_scalar
        ),
        check!(
            "fefferman.levi_civita",
            LeviCivita,
            "structural Levi-Civita rows equal oracle Christoffel contractions",
            rel(1e-8),
            always,
            run_lc
        ),
        check!("fefferman.ricci_s_t", Ricci, "structural Ric(S,T*) equals the oracle", rel(1e-7), always, run_ric_st),
        check!(
            "fefferman.ricci_horizontal",
            Ricci,
            "structural Ric(X*,V*) equals the oracle",
            rel(1e-7),
            always,
            run_ric_hh
        ),
        check!("fefferman.killing_form", KillingForm, "∇θ = ½dθ", abs(1e-10), always, run_killing),
        check!(
            "fefferman.laplacian_theta",
            KillingForm,
            "Laplace-Beltrami of θ equals the closed form",
            rel(1e-8),
            always,
            run_laplacian
        ),
        check!(
            "fefferman.p_theta",
            KillingForm,
            "P(θ) from the Bochner trace equals the closed form",
            rel(1e-8),
            always,
            run_p_theta
        ),
        check!(
            "fefferman.p_theta_equivalence",
            KillingForm,
            "P(θ) is proportional to the connection form exactly for admissible ℓ",
            rel(1e-8),
            always,
            run_p_equivalence
        ),
        check!(
            "webster.rescaling_identity",
            WebsterRescaling,
            "rescaling by f = 0",
            rel(1e-8),
            always,
            run_rescaling_identity
        ),
        check!(
            "webster.rescaling_constant",
            WebsterRescaling,
            "rescaling by a constant",
            rel(1e-8),
            always,
            run_rescaling_constant
        ),
        check!(
            "webster.rescaling_polynomial",
            WebsterRescaling,
            "rescaling by a polynomial",
            rel(1e-8),
            always,
            run_rescaling_polynomial
        ),
        check!(
            "fefferman.conformal_rescaling",
            ConformalGauge,
            "metric of e^{2f}θ equals e^{2f} times the metric",
            rel(1e-8),
            always,
            run_conformal
        ),
        check!(
            "fefferman.gauge_invariance",
            ConformalGauge,
            "curvature scalars unchanged by ℓ + i dg",
            rel(1e-8),
            always,
            run_gauge
        ),
        check!(
            "tractor.jcr_square",
            ComplexTractor,
            "J_CR • J_CR • t = −t on a standard-tractor basis",
            abs(1e-9),
            always,
            run_jcr_square
        ),
        check!(
            "tractor.splitting_vs_jcr",
            ComplexTractor,
            "S(R) − J_CR − U vanishes componentwise",
            abs(1e-8),
            always,
            run_splitting_vs_jcr
        ),
        check!(
            "tractor.equation",
            ComplexTractor,
            "∇^nor S(R) + Ω(R,·) = 0 for admissible ℓ",
            abs(1e-7),
            always,
            run_tractor_equation
        ),
        check!(
            "tractor.integrable_curvature",
            ComplexTractor,
            "Ω(R,·) = 0 on integrable structures with ℓ = 0",
            abs(1e-8),
            heisenberg_only,
            run_integrable_curvature
        ),
        check!(
            "algebra.complex_elements",
            ComplexElements,
            "lightlike, eigenvector and complex-structure conclusions for β² = −id",
            abs(1e-9),
            always,
            run_complex_elements
        ),
        check!(
            "reconstruction.round_trip",
            Reconstruction,
            "H, J and the Levi form recovered from J_CR",
            abs(1e-8),
            always,
            run_reconstruction
        ),
        check!(
            "reconstruction.conformal_invariance",
            Reconstruction,
            "recovered J unchanged under e^{2φ} rescaling of the metric",
            abs(1e-8),
            always,
            run_reconstruction_invariance
        ),
        check!(
            "torsion.trace_identities",
            TorsionIdentities,
            "trace identities of N and B",
            rel(1e-8),
            always,
            run_torsion_traces
        ),
        check!(
            "torsion.symmetries",
            TorsionIdentities,
            "symmetries of N, B and the torsion tensor",
            rel(1e-8),
            always,
            run_torsion_symmetries
        ),
        check!("algebra.jacobi", Algebra, "Jacobi identity for random elements", abs(1e-10), always, run_jacobi),
        check!(
            "algebra.codifferential_square",
            Algebra,
            "∂* ∘ ∂* = 0 on degree-2 cochains",
            abs(1e-12),
            always,
            run_codifferential_square
        ),
        check!(
            "tractor.bracket_matrix",
            Algebra,
            "tractor bracket equals the matrix commutator in an orthonormal frame",
            rel(1e-10),
            always,
            run_bracket_matrix
        ),
        check!(
            "tractor.splitting_properties",
            Algebra,
            "π(S(R)) = R and ∂*(∇^nor S(R)) = 0",
            abs(1e-8),
            always,
            run_splitting_properties
        ),
        check!("flat.webster_scalar", FlatChain, "scal^W = 0", abs(1e-9), flat_only, run_flat_scal_w),
        check!("flat.nijenhuis", FlatChain, "N = 0", abs(1e-9), flat_only, run_flat_nijenhuis),
        check!("flat.torsion", FlatChain, "the Webster torsion tensor vanishes", abs(1e-9), flat_only, run_flat_tau),
        check!("flat.curvature_form", FlatChain, "Ω_θ = 0", abs(1e-9), flat_only, run_flat_curvature_form),
        check!("flat.fefferman_scalar", FlatChain, "scal^f = 0", abs(1e-9), flat_only, run_flat_scal_f),
        check!("flat.fefferman_ricci", FlatChain, "Ric^f = 0 (full tensor)", abs(1e-9), flat_only, run_flat_ricci),
        check!(
            "fefferman.frame_relations",
            Structure,
            "f(S,T*) = 1, f(S,S) = 0, f(S,e*) = 0, f(e*,e*) = δ",
            abs(1e-10),
            always,
            run_frame_relations
        ),
        check!(
            "fefferman.curvature_form",
            Structure,
            "da equals the closed form of the curvature",
            rel(1e-8),
            always,
            run_curvature_form
        ),
        check!(
            "cr.integrability",
            Structure,
            "integrability class matches the construction",
            abs(0.0),
            always,
            run_integrability
        ),
        check!("tractor.normality", Structure, "∂*κ = 0 for the normal curvature", abs(1e-8), always, run_normality),
        check!(
            "tractor.conformal_killing_identity",
            Structure,
            "divergence identity for the conformal Killing field R",
            rel(1e-8),
            always,
            run_killing_identity
        ),
    ];
    v.sort_by(|a, b| a.id.cmp(b.id));
    v
}

/// Options of a suite run.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub suite: String,
    pub seed: u64,
    pub points: usize,
    /// Replaces every check's tolerance value.
    pub tolerance: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { suite: "all".into(), seed: 42, points: 20, tolerance: None }
    }
}

/// Whether a check id or group matches a filter (`all`, an id prefix, or a group name).
pub fn matches(filter: &str, spec: &CheckSpec) -> bool {
    let group = spec.group.name();
    filter == "all"
        || filter.split(',').any(|f| {
            let f = f.trim();
            !f.is_empty() && (spec.id.starts_with(f) || group == f)
        })
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn execute(ctx: &Context, spec: &CheckSpec, tol: Tolerance) -> (CheckRecord, f64) {
    let start = Instant::now();
    let mut acc = Acc::default();
    let outcome = catch_unwind(AssertUnwindSafe(|| (spec.run)(ctx, &mut acc)));
    let error = match outcome {
        Ok(Ok(())) => None,
        Ok(Err(e)) => Some(e.to_string()),
        Err(p) => Some(
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .map(|s| format!("panic: {s}"))
                .unwrap_or_else(|| "panic".into()),
        ),
    };
    let measured = match tol.kind {
        ToleranceKind::Relative => acc.rel,
        ToleranceKind::Absolute => acc.abs,
    };
    let requirements_ok = acc.requirements.iter().all(|(_, ok)| *ok);
    let passed = error.is_none() && measured.is_finite() && measured <= tol.value && requirements_ok && acc.samples > 0;
    let record = CheckRecord {
        id: spec.id.to_string(),
        group: spec.group,
        subject: spec.subject.to_string(),
        example: ctx.example.name.to_string(),
        ells: acc.ells.into_iter().collect(),
        points: ctx.base_points.len(),
        samples: acc.samples,
        max_abs_residual: finite(acc.abs),
        max_rel_residual: finite(acc.rel),
        tolerance: tol.value,
        tolerance_kind: tol.kind,
        passed,
        error,
        requirements: acc.requirements,
        diagnostics: acc.diagnostics.into_iter().map(|(k, v)| (k, finite(v))).collect(),
    };
    (record, start.elapsed().as_secs_f64() * 1e3)
}

/// Runs every matching check on `example_name`.
pub fn run_suite(example_name: &str, opts: &RunOptions) -> Result<Report, GeomError> {
    let ex = example(example_name)?;
    let ctx = Context::new(ex, opts.seed, opts.points);
    let mut checks = Vec::new();
    let mut timings = BTreeMap::new();
    for spec in registry() {
        if !matches(&opts.suite, &spec) || !(spec.applies)(&ctx) {
            continue;
        }
        let tol = Tolerance { kind: spec.tolerance.kind, value: opts.tolerance.unwrap_or(spec.tolerance.value) };
        let (rec, ms) = execute(&ctx, &spec, tol);
        timings.insert(spec.id.to_string(), ms);
        checks.push(rec);
    }
    Ok(Report {
        meta: Meta {
            schema_version: SCHEMA_VERSION,
            tool: "crtractor".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            example: example_name.to_string(),
            suite: opts.suite.clone(),
            seed: opts.seed,
            points: opts.points,
            tolerance_override: opts.tolerance,
            wall_time_ms: timings,
        },
        checks,
    })
}

/// `(id, group, subject, tolerance)` for every registered check.
pub fn list_checks() -> Vec<(String, Group, String, Tolerance)> {
    registry().into_iter().map(|c| (c.id.to_string(), c.group, c.subject.to_string(), c.tolerance)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::example;

    fn panicking(_: &Context, acc: &mut Acc) -> Result<(), GeomError> {
        acc.residual(0.0, 0.0);
        panic!("deliberate");
    }

    #[test]
    fn panics_become_failed_records() {
        let ctx = Context::new(example("heisenberg_m1").unwrap(), 1, 2);
        let spec = check!("x.panics", Group::Structure, "panics", abs(1.0), always, panicking);
        let (rec, _) = execute(&ctx, &spec, spec.tolerance);
        assert!(!rec.passed);
        assert_eq!(rec.error.as_deref(), Some("panic: deliberate"));
    }

    #[test]
    fn group_names_match_serialization() {
        for g in Group::ACCEPTANCE.into_iter().chain([Group::Structure]) {
            assert_eq!(serde_json::to_value(g).unwrap(), g.name());
        }
    }

    #[test]
    fn filters_match_prefixes_and_groups() {
        let reg = registry();
        let jacobi = reg.iter().find(|c| c.id == "algebra.jacobi").unwrap();
        assert!(matches("all", jacobi));
        assert!(matches("algebra", jacobi));
        assert!(matches("flat, algebra.jac", jacobi));
        assert!(matches("algebra", jacobi));
        assert!(!matches("tractor", jacobi));
        let flat = reg.iter().find(|c| c.id == "flat.nijenhuis").unwrap();
        assert!(matches("flat_chain", flat));
    }

    #[test]
    fn relative_residual_uses_unit_offset() {
        let mut acc = Acc::default();
        acc.compare(3.0, 1.0);
        assert_eq!(acc.abs, 2.0);
        assert_eq!(acc.rel, 1.0);
        acc.residual(f64::NAN, 0.0);
        assert!(acc.abs.is_infinite());
    }
}
