//! Chart-local scalar fields, vector fields and differential forms.
//!
//! Every field is a closure acting on seeded coordinate jets, so evaluating
//! it at a [`ChartPoint`] yields exact Taylor data. Fields remember the
//! dimension of their chart and refuse to combine with fields of another
//! chart.

use std::fmt;
use std::sync::Arc;

use crate::error::GeomError;
use crate::jet::{Jet, JetError};

/// A point of a coordinate chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Result<ChartPoint, GeomError> {
        if let Some(bad) = coords.iter().find(|x| !x.is_finite()) {
            return Err(GeomError::Precondition(format!("non-finite chart coordinate {bad}")));
        }
        Ok(ChartPoint { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Coordinate jets of this point at the given order.
    pub fn seed(&self, order: usize) -> Vec<Jet> {
        Jet::seed(&self.coords, self.coords.len(), order)
    }
}

/// Value, gradient, Hessian and third derivatives of a scalar at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet3 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
    pub third: Vec<Vec<Vec<f64>>>,
}

impl Jet3 {
    /// Extracts third-order data from a jet of order at least three.
    pub fn from_jet(j: &Jet) -> Jet3 {
        assert!(j.order() >= 3, "a third-order summary needs a jet of order >= 3");
        Jet3 { value: j.value(), grad: j.gradient(), hess: j.hessian(), third: j.third() }
    }
}

type ScalarFn = dyn Fn(&[Jet]) -> Result<Jet, JetError> + Send + Sync;
type VectorFn = dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync;
type MatrixFn = dyn Fn(&[Jet]) -> Vec<Vec<Jet>> + Send + Sync;

fn same_dim(a: usize, b: usize) -> Result<(), GeomError> {
    if a == b {
        Ok(())
    } else {
        Err(GeomError::DimensionMismatch { expected: a, found: b })
    }
}

/// A smooth function on a chart.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    f: Arc<ScalarFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField(dim={})", self.dim)
    }
}

impl ScalarField {
    pub fn new<F>(dim: usize, f: F) -> ScalarField
    where
        F: Fn(&[Jet]) -> Result<Jet, JetError> + Send + Sync + 'static,
    {
        ScalarField { dim, f: Arc::new(f) }
    }

    /// A field given by an infallible closure.
    pub fn from_fn<F>(dim: usize, f: F) -> ScalarField
    where
        F: Fn(&[Jet]) -> Jet + Send + Sync + 'static,
    {
        ScalarField::new(dim, move |x| Ok(f(x)))
    }

    pub fn constant(dim: usize, c: f64) -> ScalarField {
        ScalarField::from_fn(dim, move |x: &[Jet]| x[0].lift(c))
    }

    pub fn coordinate(dim: usize, i: usize) -> ScalarField {
        assert!(i < dim, "coordinate index out of range");
        ScalarField::from_fn(dim, move |x: &[Jet]| x[i].clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluates on coordinate jets.
    pub fn eval(&self, x: &[Jet]) -> Result<Jet, JetError> {
        assert_eq!(x.len(), self.dim, "scalar field evaluated on a chart of another dimension");
        (self.f)(x)
    }

    /// Exact third-order Taylor data at `p`.
    pub fn evaluate_jet(&self, p: &ChartPoint) -> Result<Jet3, GeomError> {
        same_dim(self.dim, p.dim())?;
        Ok(Jet3::from_jet(&self.eval(&p.seed(3))?))
    }

    fn zip(&self, other: &ScalarField, op: fn(Jet, Jet) -> Result<Jet, JetError>) -> Result<ScalarField, GeomError> {
        same_dim(self.dim, other.dim)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(ScalarField::new(self.dim, move |x| op(a.eval(x)?, b.eval(x)?)))
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField, GeomError> {
        self.zip(other, |a, b| Ok(a + b))
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField, GeomError> {
        self.zip(other, |a, b| Ok(a - b))
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField, GeomError> {
        self.zip(other, |a, b| Ok(a * b))
    }

    pub fn div(&self, other: &ScalarField) -> Result<ScalarField, GeomError> {
        self.zip(other, |a, b| Ok(a * b.try_recip()?))
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(move |j| Ok(j * c))
    }

    /// Composition with a jet-level function.
    pub fn map<F>(&self, g: F) -> ScalarField
    where
        F: Fn(Jet) -> Result<Jet, JetError> + Send + Sync + 'static,
    {
        let a = self.clone();
        ScalarField::new(self.dim, move |x| g(a.eval(x)?))
    }

    pub fn exp(&self) -> ScalarField {
        self.map(|j| Ok(j.exp()))
    }

    pub fn ln(&self) -> ScalarField {
        self.map(|j| j.try_ln())
    }

    pub fn sin(&self) -> ScalarField {
        self.map(|j| Ok(j.sin()))
    }

    pub fn cos(&self) -> ScalarField {
        self.map(|j| Ok(j.cos()))
    }

    pub fn sqrt(&self) -> ScalarField {
        self.map(|j| j.try_sqrt())
    }

    pub fn powf(&self, p: f64) -> ScalarField {
        self.map(move |j| j.try_powf(p))
    }

    /// The differential `df`.
    ///
    /// The resulting one-form panics on evaluation if the field itself fails.
    pub fn differential(&self) -> OneForm {
        let a = self.clone();
        OneForm::new(self.dim, move |x| {
            let v = a.eval(x).unwrap_or_else(|e| panic!("{e}"));
            (0..x.len()).map(|k| v.d(k)).collect()
        })
    }
}

/// A vector field given by chart components.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    f: Arc<VectorFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField(dim={})", self.dim)
    }
}

impl VectorField {
    pub fn new<F>(dim: usize, f: F) -> VectorField
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        VectorField { dim, f: Arc::new(f) }
    }

    /// The coordinate field `∂_i`.
    pub fn coordinate(dim: usize, i: usize) -> VectorField {
        VectorField::new(dim, move |x: &[Jet]| (0..dim).map(|k| x[0].lift(if k == i { 1.0 } else { 0.0 })).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[Jet]) -> Vec<Jet> {
        assert_eq!(x.len(), self.dim, "vector field evaluated on a chart of another dimension");
        let v = (self.f)(x);
        assert_eq!(v.len(), self.dim, "vector field returned the wrong number of components");
        v
    }

    /// Component values at a point.
    pub fn at(&self, p: &ChartPoint) -> Result<Vec<f64>, GeomError> {
        same_dim(self.dim, p.dim())?;
        Ok(self.eval(&p.seed(1)).iter().map(Jet::value).collect())
    }

    /// Multiplies by a scalar field.
    pub fn scaled(&self, g: &ScalarField) -> Result<VectorField, GeomError> {
        same_dim(self.dim, g.dim())?;
        let (v, g) = (self.clone(), g.clone());
        Ok(VectorField::new(self.dim, move |x| {
            let s = g.eval(x).unwrap_or_else(|e| panic!("{e}"));
            v.eval(x).iter().map(|c| c * &s).collect()
        }))
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField, GeomError> {
        same_dim(self.dim, other.dim)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(VectorField::new(self.dim, move |x| a.eval(x).iter().zip(b.eval(x)).map(|(p, q)| p + q).collect()))
    }

    /// Directional derivative `X(f)`.
    pub fn apply(&self, g: &ScalarField) -> Result<ScalarField, GeomError> {
        same_dim(self.dim, g.dim())?;
        let (v, g) = (self.clone(), g.clone());
        Ok(ScalarField::new(self.dim, move |x| {
            let s = g.eval(x)?;
            let comps = v.eval(x);
            Ok(directional(&comps, &s))
        }))
    }
}

/// Directional derivative of a jet along chart components.
pub fn directional(v: &[Jet], f: &Jet) -> Jet {
    let mut acc: Option<Jet> = None;
    for (k, vk) in v.iter().enumerate() {
        let t = vk * f.d(k);
        acc = Some(match acc {
            None => t,
            Some(a) => a + t,
        });
    }
    acc.expect("directional derivative in a zero-dimensional chart")
}

/// Lie bracket of vector fields given by component jets.
pub fn bracket_components(x: &[Jet], y: &[Jet]) -> Vec<Jet> {
    (0..x.len()).map(|k| directional(x, &y[k]) - directional(y, &x[k])).collect()
}

/// The Lie bracket `[X, Y]`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField, GeomError> {
    same_dim(x.dim, y.dim)?;
    let (a, b) = (x.clone(), y.clone());
    Ok(VectorField::new(x.dim, move |p| bracket_components(&a.eval(p), &b.eval(p))))
}

/// A one-form given by chart components.
#[derive(Clone)]
pub struct OneForm {
    dim: usize,
    f: Arc<VectorFn>,
}

impl fmt::Debug for OneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OneForm(dim={})", self.dim)
    }
}

impl OneForm {
    pub fn new<F>(dim: usize, f: F) -> OneForm
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        OneForm { dim, f: Arc::new(f) }
    }

    pub fn zero(dim: usize) -> OneForm {
        OneForm::new(dim, move |x: &[Jet]| (0..dim).map(|_| x[0].zero_like()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[Jet]) -> Vec<Jet> {
        assert_eq!(x.len(), self.dim, "one-form evaluated on a chart of another dimension");
        let v = (self.f)(x);
        assert_eq!(v.len(), self.dim, "one-form returned the wrong number of components");
        v
    }

    pub fn at(&self, p: &ChartPoint) -> Result<Vec<f64>, GeomError> {
        same_dim(self.dim, p.dim())?;
        Ok(self.eval(&p.seed(1)).iter().map(Jet::value).collect())
    }

    pub fn scaled(&self, g: &ScalarField) -> Result<OneForm, GeomError> {
        same_dim(self.dim, g.dim())?;
        let (v, g) = (self.clone(), g.clone());
        Ok(OneForm::new(self.dim, move |x| {
            let s = g.eval(x).unwrap_or_else(|e| panic!("{e}"));
            v.eval(x).iter().map(|c| c * &s).collect()
        }))
    }

    pub fn add(&self, other: &OneForm) -> Result<OneForm, GeomError> {
        same_dim(self.dim, other.dim)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(OneForm::new(self.dim, move |x| a.eval(x).iter().zip(b.eval(x)).map(|(p, q)| p + q).collect()))
    }

    /// Pairing `α(X)`.
    pub fn pair(&self, v: &VectorField) -> Result<ScalarField, GeomError> {
        same_dim(self.dim, v.dim())?;
        let (a, v) = (self.clone(), v.clone());
        Ok(ScalarField::from_fn(self.dim, move |x| crate::jet::dot(&a.eval(x), &v.eval(x))))
    }
}

/// Exterior derivative of one-form components: `(dα)_jk = ∂_j α_k − ∂_k α_j`.
pub fn d_components(alpha: &[Jet]) -> Vec<Vec<Jet>> {
    let n = alpha.len();
    (0..n).map(|j| (0..n).map(|k| alpha[k].d(j) - alpha[j].d(k)).collect()).collect()
}

/// A two-form given by an antisymmetric component matrix.
#[derive(Clone)]
pub struct TwoForm {
    dim: usize,
    f: Arc<MatrixFn>,
}

impl fmt::Debug for TwoForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TwoForm(dim={})", self.dim)
    }
}

impl TwoForm {
    pub fn new<F>(dim: usize, f: F) -> TwoForm
    where
        F: Fn(&[Jet]) -> Vec<Vec<Jet>> + Send + Sync + 'static,
    {
        TwoForm { dim, f: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[Jet]) -> Vec<Vec<Jet>> {
        assert_eq!(x.len(), self.dim, "two-form evaluated on a chart of another dimension");
        (self.f)(x)
    }

    pub fn at(&self, p: &ChartPoint) -> Result<Vec<Vec<f64>>, GeomError> {
        same_dim(self.dim, p.dim())?;
        Ok(self.eval(&p.seed(1)).iter().map(|r| r.iter().map(Jet::value).collect()).collect())
    }

    /// `ω(X, Y)` as a scalar field.
    pub fn apply(&self, x: &VectorField, y: &VectorField) -> Result<ScalarField, GeomError> {
        same_dim(self.dim, x.dim())?;
        same_dim(self.dim, y.dim())?;
        let (w, a, b) = (self.clone(), x.clone(), y.clone());
        Ok(ScalarField::from_fn(self.dim, move |p| {
            let (m, u, v) = (w.eval(p), a.eval(p), b.eval(p));
            let mv: Vec<Jet> = m.iter().map(|row| crate::jet::dot(row, &v)).collect();
            crate::jet::dot(&u, &mv)
        }))
    }
}

/// The exterior derivative `dα`.
pub fn exterior_derivative(alpha: &OneForm) -> TwoForm {
    let a = alpha.clone();
    TwoForm::new(alpha.dim, move |x| d_components(&a.eval(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heisenberg_x() -> VectorField {
        VectorField::new(3, |x: &[Jet]| vec![x[0].lift(1.0), x[0].lift(0.0), x[1].clone()])
    }

    fn heisenberg_y() -> VectorField {
        VectorField::coordinate(3, 1)
    }

    #[test]
    fn heisenberg_bracket_is_reeb() {
        let b = lie_bracket(&heisenberg_x(), &heisenberg_y()).unwrap();
        let p = ChartPoint::new(vec![0.3, -0.7, 1.1]).unwrap();
        let v = b.at(&p).unwrap();
        // X(Y) − Y(X) has t-component −∂_y(y) = −1.
        assert_eq!(v, vec![0.0, 0.0, -1.0]);
    }

    #[test]
    fn coordinate_fields_commute() {
        let b = lie_bracket(&VectorField::coordinate(2, 0), &VectorField::coordinate(2, 1)).unwrap();
        let p = ChartPoint::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(b.at(&p).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn contact_form_differential() {
        let theta = OneForm::new(3, |x: &[Jet]| vec![-&x[1], x[0].lift(0.0), x[0].lift(1.0)]);
        let dt = exterior_derivative(&theta);
        let p = ChartPoint::new(vec![0.2, 0.4, -0.1]).unwrap();
        let m = dt.at(&p).unwrap();
        assert_eq!(m[0][1], 1.0);
        assert_eq!(m[1][0], -1.0);
        assert_eq!(m[0][2], 0.0);
    }

    #[test]
    fn mixing_charts_is_rejected() {
        let a = ScalarField::constant(2, 1.0);
        let b = ScalarField::constant(3, 1.0);
        assert!(matches!(a.add(&b), Err(GeomError::DimensionMismatch { .. })));
    }

    #[test]
    fn log_domain_error_surfaces() {
        let f = ScalarField::coordinate(1, 0).ln();
        let p = ChartPoint::new(vec![-1.0]).unwrap();
        assert!(f.evaluate_jet(&p).is_err());
    }
}
