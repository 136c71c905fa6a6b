//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the Taylor coefficients `c_a = (d^a f)(p) / a!` of a smooth
//! function of `nv` chart variables at a point `p`, for every multi-index `a`
//! of total degree at most `order`. Arithmetic and the elementary functions
//! propagate these coefficients exactly (up to floating point rounding), so
//! partial derivatives of composite expressions are obtained without any
//! finite differencing.
//!
//! Differentiating a jet lowers its order by one. Binary operations on jets of
//! different order truncate to the smaller order, so the order of a result
//! always reflects how many derivatives of it are still trustworthy.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

/// Highest total degree supported by the coefficient tables.
pub const MAX_ORDER: usize = 6;

/// Errors raised while evaluating jets.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("{op} is undefined at value {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("singular linear system (largest pivot {pivot:e})")]
    Singular { pivot: f64 },
    #[error("requested order {requested} exceeds the supported maximum {max}")]
    OrderTooHigh { requested: usize, max: usize },
}

/// Index tables for monomials in a fixed number of variables.
pub struct Tables {
    nv: usize,
    exps: Vec<Vec<u8>>,
    len: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    mul: Vec<(u32, u32, u32)>,
    mul_end: Vec<usize>,
    deriv: Vec<Vec<(u32, u32, f64)>>,
    deriv_end: Vec<Vec<usize>>,
}

impl Tables {
    fn build(nv: usize) -> Tables {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        let mut len = Vec::with_capacity(MAX_ORDER + 1);
        for d in 0..=MAX_ORDER {
            let mut cur = vec![0u8; nv];
            push_degree(&mut exps, &mut cur, 0, d);
            len.push(exps.len());
        }
        let index: HashMap<Vec<u8>, usize> = exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let degree = |e: &[u8]| e.iter().map(|&x| x as usize).sum::<usize>();

        let mut mul = Vec::new();
        for (i, ei) in exps.iter().enumerate() {
            for (j, ej) in exps.iter().enumerate() {
                if degree(ei) + degree(ej) > MAX_ORDER {
                    continue;
                }
                let sum: Vec<u8> = ei.iter().zip(ej).map(|(a, b)| a + b).collect();
                mul.push((i as u32, j as u32, index[&sum] as u32));
            }
        }
        mul.sort_by_key(|t| (t.2, t.0, t.1));
        let mul_end = len.iter().map(|&l| mul.partition_point(|t| (t.2 as usize) < l)).collect();

        let mut deriv = Vec::with_capacity(nv);
        let mut deriv_end = Vec::with_capacity(nv);
        for v in 0..nv {
            let mut list = Vec::new();
            for (src, e) in exps.iter().enumerate() {
                if e[v] == 0 {
                    continue;
                }
                let mut lowered = e.clone();
                lowered[v] -= 1;
                list.push((src as u32, index[&lowered] as u32, e[v] as f64));
            }
            list.sort_by_key(|t| t.1);
            deriv_end.push(len.iter().map(|&l| list.partition_point(|t| (t.1 as usize) < l)).collect());
            deriv.push(list);
        }
        Tables { nv, exps, len, index, mul, mul_end, deriv, deriv_end }
    }

    /// Number of coefficients of a jet of the given order.
    pub fn len(&self, order: usize) -> usize {
        self.len[order]
    }

    /// Exponent vector of coefficient `i`.
    pub fn exponents(&self, i: usize) -> &[u8] {
        &self.exps[i]
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, pos: usize, rest: usize) {
    if pos + 1 == cur.len() {
        cur[pos] = rest as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    if cur.is_empty() {
        if rest == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=rest).rev() {
        cur[pos] = k as u8;
        push_degree(out, cur, pos + 1, rest - k);
    }
    cur[pos] = 0;
}

/// Shared coefficient tables for `nv` variables.
pub fn tables(nv: usize) -> &'static Tables {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static Tables>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard.entry(nv).or_insert_with(|| Box::leak(Box::new(Tables::build(nv))))
}

/// Truncated Taylor expansion of a scalar quantity at a chart point.
#[derive(Clone)]
pub struct Jet {
    tab: &'static Tables,
    ord: u8,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet").field("nv", &self.tab.nv).field("order", &self.ord).field("value", &self.c[0]).finish()
    }
}

impl Jet {
    /// The constant `value` as a jet in `nv` variables.
    pub fn constant(nv: usize, order: usize, value: f64) -> Jet {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let tab = tables(nv);
        let mut c = vec![0.0; tab.len(order)];
        c[0] = value;
        Jet { tab, ord: order as u8, c }
    }

    /// The coordinate function `x_i` expanded at a point where it equals `value`.
    pub fn variable(nv: usize, order: usize, i: usize, value: f64) -> Jet {
        assert!(i < nv, "variable index {i} out of range for {nv} variables");
        let mut j = Jet::constant(nv, order, value);
        if order >= 1 {
            let mut e = vec![0u8; nv];
            e[i] = 1;
            j.c[j.tab.index[&e]] = 1.0;
        }
        j
    }

    /// Seeds the coordinate jets of a chart point.
    pub fn seed(point: &[f64], nv: usize, order: usize) -> Vec<Jet> {
        point.iter().enumerate().map(|(i, &x)| Jet::variable(nv, order, i, x)).collect()
    }

    /// A constant with the same variable count and order as `self`.
    pub fn lift(&self, value: f64) -> Jet {
        Jet::constant(self.tab.nv, self.ord as usize, value)
    }

    pub fn zero_like(&self) -> Jet {
        self.lift(0.0)
    }

    pub fn nvars(&self) -> usize {
        self.tab.nv
    }

    pub fn order(&self) -> usize {
        self.ord as usize
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Raw Taylor coefficients in graded order.
    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn tables(&self) -> &'static Tables {
        self.tab
    }

    /// Taylor coefficient of the monomial with the given exponents.
    pub fn coeff(&self, exps: &[u8]) -> f64 {
        match self.tab.index.get(exps) {
            Some(&i) if i < self.c.len() => self.c[i],
            _ => 0.0,
        }
    }

    /// Partial derivative with multi-index `exps`, evaluated at the expansion point.
    pub fn partial(&self, exps: &[u8]) -> f64 {
        let fact: f64 = exps.iter().map(|&k| factorial(k as usize)).product();
        self.coeff(exps) * fact
    }

    /// Drops all coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.ord as usize);
        Jet { tab: self.tab, ord: order as u8, c: self.c[..self.tab.len(order)].to_vec() }
    }

    /// Partial derivative along variable `v`; the result has one order less.
    ///
    /// # Panics
    /// Panics when called on an order-0 jet, whose derivatives are unknown.
    pub fn d(&self, v: usize) -> Jet {
        assert!(self.ord > 0, "cannot differentiate an order-0 jet");
        let ord = self.ord as usize - 1;
        let mut c = vec![0.0; self.tab.len(ord)];
        let list = &self.tab.deriv[v][..self.tab.deriv_end[v][ord]];
        for &(src, dst, f) in list {
            c[dst as usize] += f * self.c[src as usize];
        }
        Jet { tab: self.tab, ord: ord as u8, c }
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.tab.nv).map(|v| self.partial(&unit(self.tab.nv, &[v]))).collect()
    }

    pub fn hessian(&self) -> Vec<Vec<f64>> {
        let n = self.tab.nv;
        (0..n).map(|a| (0..n).map(|b| self.partial(&unit(n, &[a, b]))).collect()).collect()
    }

    pub fn third(&self) -> Vec<Vec<Vec<f64>>> {
        let n = self.tab.nv;
        (0..n).map(|a| (0..n).map(|b| (0..n).map(|c| self.partial(&unit(n, &[a, b, c]))).collect()).collect()).collect()
    }

    fn is_constant(&self) -> bool {
        self.c[1..].iter().all(|&x| x == 0.0)
    }

    fn check_compatible(&self, other: &Jet) {
        assert_eq!(self.tab.nv, other.tab.nv, "jets over charts of different dimension cannot be combined");
    }

    fn scaled(&self, s: f64, ord: usize) -> Jet {
        let l = self.tab.len(ord);
        Jet { tab: self.tab, ord: ord as u8, c: self.c[..l].iter().map(|x| x * s).collect() }
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        self.check_compatible(other);
        let ord = self.ord.min(other.ord) as usize;
        if self.is_constant() {
            return other.scaled(self.c[0], ord);
        }
        if other.is_constant() {
            return self.scaled(other.c[0], ord);
        }
        let mut c = vec![0.0; self.tab.len(ord)];
        let (a, b) = (&self.c, &other.c);
        for &(i, j, k) in &self.tab.mul[..self.tab.mul_end[ord]] {
            c[k as usize] += a[i as usize] * b[j as usize];
        }
        Jet { tab: self.tab, ord: ord as u8, c }
    }

    fn add_jet(&self, other: &Jet, sign: f64) -> Jet {
        self.check_compatible(other);
        let ord = self.ord.min(other.ord) as usize;
        let l = self.tab.len(ord);
        let c = self.c[..l].iter().zip(&other.c[..l]).map(|(x, y)| x + sign * y).collect();
        Jet { tab: self.tab, ord: ord as u8, c }
    }

    /// Applies a function given by its scaled derivatives `d[k] = f^(k)(x0)/k!`.
    fn compose(&self, d: &[f64]) -> Jet {
        let ord = self.ord as usize;
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut out = self.lift(d[0]);
        let mut pow = h.clone();
        for (k, &dk) in d.iter().enumerate().skip(1).take(ord) {
            if k > 1 {
                pow = pow.mul_jet(&h);
            }
            for (o, p) in out.c.iter_mut().zip(&pow.c) {
                *o += dk * p;
            }
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.c[0].exp();
        let d: Vec<f64> = (0..=self.ord as usize).map(|k| e / factorial(k)).collect();
        self.compose(&d)
    }

    pub fn try_ln(&self) -> Result<Jet, JetError> {
        let x = self.c[0];
        if x <= 0.0 || !x.is_finite() {
            return Err(JetError::Domain { op: "ln", value: x });
        }
        let mut d = vec![x.ln()];
        for k in 1..=self.ord as usize {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign / (k as f64 * x.powi(k as i32)));
        }
        Ok(self.compose(&d))
    }

    /// Natural logarithm; panics outside the positive reals (see [`Jet::try_ln`]).
    pub fn ln(&self) -> Jet {
        self.try_ln().unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.ord as usize).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.ord as usize).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&d)
    }

    /// Real power `x^p`; requires a positive value unless `p` is a non-negative integer.
    pub fn try_powf(&self, p: f64) -> Result<Jet, JetError> {
        let x = self.c[0];
        let integral = p.fract() == 0.0 && p >= 0.0;
        if !integral && x <= 0.0 {
            return Err(JetError::Domain { op: "powf", value: x });
        }
        let mut d = Vec::with_capacity(self.ord as usize + 1);
        let mut coef = 1.0;
        for k in 0..=self.ord as usize {
            if k > 0 {
                coef *= (p - (k as f64 - 1.0)) / k as f64;
            }
            d.push(if coef == 0.0 { 0.0 } else { coef * x.powf(p - k as f64) });
        }
        Ok(self.compose(&d))
    }

    pub fn powf(&self, p: f64) -> Jet {
        self.try_powf(p).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut out = self.lift(1.0);
        for _ in 0..n {
            out = out.mul_jet(self);
        }
        out
    }

    pub fn try_sqrt(&self) -> Result<Jet, JetError> {
        if self.c[0] <= 0.0 {
            return Err(JetError::Domain { op: "sqrt", value: self.c[0] });
        }
        self.try_powf(0.5)
    }

    pub fn sqrt(&self) -> Jet {
        self.try_sqrt().unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn try_recip(&self) -> Result<Jet, JetError> {
        let x = self.c[0];
        if x == 0.0 || !x.is_finite() {
            return Err(JetError::Domain { op: "reciprocal", value: x });
        }
        let d: Vec<f64> =
            (0..=self.ord as usize).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / x.powi(k as i32 + 1)).collect();
        Ok(self.compose(&d))
    }

    pub fn recip(&self) -> Jet {
        self.try_recip().unwrap_or_else(|e| panic!("{e}"))
    }

    /// The same function viewed as a jet in `nv >= nvars()` variables, constant
    /// in the added trailing variables.
    pub fn extend(&self, nv: usize) -> Jet {
        assert!(nv >= self.tab.nv, "cannot drop variables from a jet");
        if nv == self.tab.nv {
            return self.clone();
        }
        let tab = tables(nv);
        let mut c = vec![0.0; tab.len(self.ord as usize)];
        let mut e = vec![0u8; nv];
        for (i, &v) in self.c.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            e[..self.tab.nv].copy_from_slice(&self.tab.exps[i]);
            c[tab.index[&e]] = v;
        }
        Jet { tab, ord: self.ord, c }
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn unit(n: usize, idx: &[usize]) -> Vec<u8> {
    let mut e = vec![0u8; n];
    for &i in idx {
        e[i] += 1;
    }
    e
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

macro_rules! jet_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, |a, b| a.add_jet(b, 1.0));
jet_binop!(Sub, sub, |a, b| a.add_jet(b, -1.0));
jet_binop!(Mul, mul, |a, b| a.mul_jet(b));
jet_binop!(Div, div, |a, b| a.mul_jet(&b.recip()));

macro_rules! scalar_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<f64> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                let f: fn(&Jet, f64) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<f64> for Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                (&self).$method(rhs)
            }
        }
    };
}

scalar_binop!(Add, add, |a, s| {
    let mut r = a.clone();
    r.c[0] += s;
    r
});
scalar_binop!(Sub, sub, |a, s| {
    let mut r = a.clone();
    r.c[0] -= s;
    r
});
scalar_binop!(Mul, mul, |a, s| a.scaled(s, a.ord as usize));
scalar_binop!(Div, div, |a, s| a.scaled(1.0 / s, a.ord as usize));

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        rhs * self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &rhs * self
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        &self * -1.0
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        *self = self.add_jet(rhs, 1.0);
    }
}

impl AddAssign<Jet> for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = self.add_jet(&rhs, 1.0);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        *self = self.add_jet(rhs, -1.0);
    }
}

impl SubAssign<Jet> for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = self.add_jet(&rhs, -1.0);
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        for x in &mut self.c {
            *x *= rhs;
        }
    }
}

/// Sum of products `sum_i a_i b_i`.
pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    assert_eq!(a.len(), b.len(), "dot product of vectors of different length");
    let mut it = a.iter().zip(b);
    let (x, y) = it.next().expect("dot product of empty vectors");
    let mut acc = x * y;
    for (x, y) in it {
        acc += x * y;
    }
    acc
}

/// Sum of a non-empty sequence of jets.
pub fn sum<'a, I: IntoIterator<Item = &'a Jet>>(items: I) -> Jet {
    let mut it = items.into_iter();
    let mut acc = it.next().expect("sum of no jets").clone();
    for x in it {
        acc += x;
    }
    acc
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting on values.
pub fn solve(a: &[Vec<Jet>], b: &[Jet]) -> Result<Vec<Jet>, JetError> {
    let n = a.len();
    let mut m: Vec<Vec<Jet>> = a.to_vec();
    let mut rhs: Vec<Jet> = b.to_vec();
    let scale = m.iter().flat_map(|r| r.iter().map(|x| x.value().abs())).fold(0.0, f64::max).max(1e-300);
    for col in 0..n {
        let (piv, best) =
            (col..n)
                .map(|r| (r, m[r][col].value().abs()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= 1e-13 * scale {
            return Err(JetError::Singular { pivot: best });
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let inv = m[col][col].recip();
        for r in col + 1..n {
            if m[r][col].value() == 0.0 && m[r][col].is_constant() {
                continue;
            }
            let f = &m[r][col] * &inv;
            for k in col..n {
                let t = &f * &m[col][k];
                m[r][k] -= t;
            }
            let t = &f * &rhs[col];
            rhs[r] -= t;
        }
    }
    let mut x: Vec<Option<Jet>> = vec![None; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r].clone();
        for (k, xk) in x.iter().enumerate().skip(r + 1) {
            acc -= &m[r][k] * xk.as_ref().expect("back substitution order");
        }
        x[r] = Some(acc / &m[r][r]);
    }
    Ok(x.into_iter().map(|v| v.expect("solved component")).collect())
}

/// Inverse of a square jet matrix.
pub fn inverse(a: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>, JetError> {
    let n = a.len();
    let proto = &a[0][0];
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let e: Vec<Jet> = (0..n).map(|i| proto.lift(if i == j { 1.0 } else { 0.0 })).collect();
        cols.push(solve(a, &e)?);
    }
    Ok((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn monomial_counts() {
        let t = tables(3);
        assert_eq!(t.len(0), 1);
        assert_eq!(t.len(1), 4);
        assert_eq!(t.len(2), 10);
        assert_eq!(t.len(3), 20);
    }

    #[test]
    fn constant_has_no_derivatives() {
        let c = Jet::constant(2, 3, 5.0);
        assert_eq!(c.value(), 5.0);
        assert_eq!(c.gradient(), vec![0.0, 0.0]);
        assert!(c.hessian().iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn coordinate_field() {
        let x = Jet::seed(&[2.0, 3.0], 2, 3);
        assert_eq!(x[0].value(), 2.0);
        assert_eq!(x[0].gradient(), vec![1.0, 0.0]);
        assert!(x[0].hessian().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn cubic_polynomial() {
        let x = Jet::seed(&[1.0, 1.0], 2, 3);
        let f = &x[0] * &x[0] * &x[1];
        assert_eq!(f.value(), 1.0);
        assert_eq!(f.gradient(), vec![2.0, 1.0]);
        assert_eq!(f.hessian(), vec![vec![2.0, 2.0], vec![2.0, 0.0]]);
        assert_eq!(f.third()[0][0][1], 2.0);
        assert_eq!(f.third()[0][1][0], 2.0);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let x = Jet::seed(&[0.7], 1, 5);
        let e = x[0].exp();
        let s = x[0].sin();
        let l = x[0].ln();
        let r = x[0].sqrt();
        for k in 0..=5u8 {
            assert_abs_diff_eq!(e.partial(&[k]), 0.7f64.exp(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.partial(&[3]), -(0.7f64.cos()), epsilon = 1e-12);
        assert_abs_diff_eq!(l.partial(&[2]), -1.0 / 0.49, epsilon = 1e-12);
        assert_abs_diff_eq!(r.partial(&[1]), 0.5 / 0.7f64.sqrt(), epsilon = 1e-12);
        let back = (&r * &r) - &x[0];
        assert!(back.max_abs_coeff() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let x = Jet::constant(1, 2, -1.0);
        assert!(matches!(x.try_ln(), Err(JetError::Domain { .. })));
        assert!(matches!(x.try_sqrt(), Err(JetError::Domain { .. })));
    }

    #[test]
    fn derivative_lowers_order() {
        let x = Jet::seed(&[0.3, -0.4], 2, 4);
        let f = (&x[0] * &x[1]).sin();
        let fx = f.d(0);
        assert_eq!(fx.order(), 3);
        let expected = x[1].value() * (x[0].value() * x[1].value()).cos();
        assert_abs_diff_eq!(fx.value(), expected, epsilon = 1e-14);
        let mixed_a = f.d(0).d(1);
        let mixed_b = f.d(1).d(0);
        for (a, b) in mixed_a.coeffs().iter().zip(mixed_b.coeffs()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-13);
        }
    }

    #[test]
    fn linear_solve_and_inverse() {
        let x = Jet::seed(&[0.2, 0.5], 2, 3);
        let a = vec![vec![&x[0] + 2.0, x[1].clone()], vec![x[0].sin(), &x[1] * &x[1] + 1.0]];
        let inv = inverse(&a).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let p = &a[i][0] * &inv[0][j] + &a[i][1] * &inv[1][j];
                let target = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(p.value(), target, epsilon = 1e-14);
                assert!(p.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
            }
        }
    }
}
