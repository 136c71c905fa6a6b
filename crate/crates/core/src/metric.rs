//! Levi-Civita geometry of a metric given by coordinate components.
//!
//! Index conventions: `gamma[k][i][j] = Γ^k_{ij}`, so `∇_i ∂_j = Γ^k_{ij} ∂_k`;
//! `riem[i][j][k][l] = g(R(∂_i,∂_j)∂_k, ∂_l)` with
//! `R(X,Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_{[X,Y]}`; `ric[i][l] = g^{jk} riem[i][j][k][l]`.
//! Covariant derivatives put the differentiating index first.

use crate::error::GeomError;
use crate::jet::{inverse, Jet};

/// Metric data at one chart point.
#[derive(Clone, Debug)]
pub struct MetricPoint {
    pub dim: usize,
    pub g: Vec<Vec<Jet>>,
    pub ginv: Vec<Vec<Jet>>,
    pub gamma: Vec<Vec<Vec<Jet>>>,
    pub riem: Vec<Vec<Vec<Vec<Jet>>>>,
    pub ric: Vec<Vec<Jet>>,
    pub scal: Jet,
}

fn zero_of(j: &Jet, order: usize) -> Jet {
    j.zero_like().truncate(order.min(j.order()))
}

impl MetricPoint {
    /// Builds the Levi-Civita data; the metric jets must have order ≥ 2.
    pub fn new(g: Vec<Vec<Jet>>) -> Result<MetricPoint, GeomError> {
        let dim = g.len();
        if g.iter().any(|r| r.len() != dim) {
            return Err(GeomError::Precondition("metric matrix is not square".into()));
        }
        for i in 0..dim {
            for j in 0..i {
                let d = (g[i][j].value() - g[j][i].value()).abs();
                if d > 1e-12 * (1.0 + g[i][j].value().abs()) {
                    return Err(GeomError::Precondition(format!("metric is not symmetric ({d:e})")));
                }
            }
        }
        let ginv = inverse(&g).map_err(|_| GeomError::SingularMetric)?;
        let dg: Vec<Vec<Vec<Jet>>> =
            g.iter().map(|r| r.iter().map(|x| (0..dim).map(|k| x.d(k)).collect()).collect()).collect();
        // first kind: Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
        let first: Vec<Vec<Vec<Jet>>> = (0..dim)
            .map(|l| {
                (0..dim)
                    .map(|i| (0..dim).map(|j| (&dg[j][l][i] + &dg[i][l][j] - &dg[i][j][l]) * 0.5).collect())
                    .collect()
            })
            .collect();
        let gamma: Vec<Vec<Vec<Jet>>> = (0..dim)
            .map(|k| {
                (0..dim)
                    .map(|i| {
                        (0..dim)
                            .map(|j| {
                                let mut acc = &ginv[k][0] * &first[0][i][j];
                                for l in 1..dim {
                                    acc += &ginv[k][l] * &first[l][i][j];
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let ro = gamma[0][0][0].order().saturating_sub(1);
        let z = zero_of(&gamma[0][0][0], ro);
        // R^l_{ijk} with R(∂_i,∂_j)∂_k = R^l_{ijk} ∂_l
        let mut rup = vec![vec![vec![vec![z.clone(); dim]; dim]; dim]; dim];
        for i in 0..dim {
            for j in (i + 1)..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        let mut r = gamma[l][j][k].d(i) - gamma[l][i][k].d(j);
                        for mm in 0..dim {
                            r += &gamma[l][i][mm] * &gamma[mm][j][k];
                            r -= &gamma[l][j][mm] * &gamma[mm][i][k];
                        }
                        rup[j][i][k][l] = -&r;
                        rup[i][j][k][l] = r;
                    }
                }
            }
        }
        let riem: Vec<Vec<Vec<Vec<Jet>>>> = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        (0..dim)
                            .map(|k| {
                                (0..dim)
                                    .map(|l| {
                                        let mut acc = z.clone();
                                        for p in 0..dim {
                                            acc += &rup[i][j][k][p] * &g[p][l];
                                        }
                                        acc
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let ric: Vec<Vec<Jet>> = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|l| {
                        let mut acc = z.clone();
                        for j in 0..dim {
                            for k in 0..dim {
                                acc += &ginv[j][k] * &riem[i][j][k][l];
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let mut scal = z.clone();
        for i in 0..dim {
            for j in 0..dim {
                scal += &ginv[i][j] * &ric[i][j];
            }
        }
        Ok(MetricPoint { dim, g, ginv, gamma, riem, ric, scal })
    }

    /// `g(u, v)`.
    pub fn inner(&self, u: &[Jet], v: &[Jet]) -> Jet {
        let mut acc = zero_of(&self.g[0][0], u[0].order().min(v[0].order()));
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += &(&self.g[i][j] * &u[i]) * &v[j];
            }
        }
        acc
    }

    /// `g(v, ·)`.
    pub fn lower(&self, v: &[Jet]) -> Vec<Jet> {
        (0..self.dim).map(|i| crate::jet::dot(&self.g[i], v)).collect()
    }

    /// `ρ^♯`.
    pub fn raise(&self, rho: &[Jet]) -> Vec<Jet> {
        (0..self.dim).map(|i| crate::jet::dot(&self.ginv[i], rho)).collect()
    }

    /// `∇_U V` for vector fields given by component jets.
    pub fn nabla_vec(&self, u: &[Jet], v: &[Jet]) -> Vec<Jet> {
        let dv = self.cov_vector(v);
        (0..self.dim)
            .map(|k| {
                let mut acc = &u[0] * &dv[0][k];
                for i in 1..self.dim {
                    acc += &u[i] * &dv[i][k];
                }
                acc
            })
            .collect()
    }

    /// `D[i][k] = (∇_i v)^k`.
    pub fn cov_vector(&self, v: &[Jet]) -> Vec<Vec<Jet>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        let mut acc = v[k].d(i);
                        for j in 0..n {
                            acc += &self.gamma[k][i][j] * &v[j];
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// `D[i][j] = (∇_i ρ)_j`.
    pub fn cov_one_form(&self, rho: &[Jet]) -> Vec<Vec<Jet>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut acc = rho[j].d(i);
                        for k in 0..n {
                            acc -= &self.gamma[k][i][j] * &rho[k];
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// `D[i][j][k] = (∇_i t)_{jk}` for a covariant 2-tensor.
    pub fn cov_two_tensor(&self, t: &[Vec<Jet>]) -> Vec<Vec<Vec<Jet>>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| {
                                let mut acc = t[j][k].d(i);
                                for p in 0..n {
                                    acc -= &self.gamma[p][i][j] * &t[p][k];
                                    acc -= &self.gamma[p][i][k] * &t[j][p];
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// `D[i][k][j] = (∇_i φ)^k_j` for an endomorphism `φ^k_j`.
    pub fn cov_endo(&self, phi: &[Vec<Jet>]) -> Vec<Vec<Vec<Jet>>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        (0..n)
                            .map(|j| {
                                let mut acc = phi[k][j].d(i);
                                for p in 0..n {
                                    acc += &self.gamma[k][i][p] * &phi[p][j];
                                    acc -= &self.gamma[p][i][j] * &phi[k][p];
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Trace `g^{ij} t_{ij}`.
    pub fn trace(&self, t: &[Vec<Jet>]) -> Jet {
        let mut acc = zero_of(&self.g[0][0], t[0][0].order());
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += &self.ginv[i][j] * &t[i][j];
            }
        }
        acc
    }

    /// Codifferential of a one-form, `d*ρ = −g^{ij} ∇_i ρ_j`.
    pub fn codiff_one_form(&self, rho: &[Jet]) -> Jet {
        -&self.trace(&self.cov_one_form(rho))
    }

    /// Codifferential of a two-form, `(d*ω)_j = −g^{ik} ∇_i ω_{kj}`.
    pub fn codiff_two_form(&self, omega: &[Vec<Jet>]) -> Vec<Jet> {
        let d = self.cov_two_tensor(omega);
        let n = self.dim;
        (0..n)
            .map(|j| {
                let mut acc = zero_of(&d[0][0][0], d[0][0][0].order());
                for i in 0..n {
                    for k in 0..n {
                        acc -= &self.ginv[i][k] * &d[i][k][j];
                    }
                }
                acc
            })
            .collect()
    }

    /// Laplace–Beltrami operator `d*d + dd*` on a one-form.
    pub fn hodge_laplacian_one_form(&self, rho: &[Jet]) -> Vec<Jet> {
        let drho = crate::fields::d_components(rho);
        let a = self.codiff_two_form(&drho);
        let f = self.codiff_one_form(rho);
        (0..self.dim).map(|j| &a[j] + &f.d(j)).collect()
    }

    /// Bochner Laplacian `g^{ij} (∇²ρ)_{ij}` on a one-form.
    pub fn bochner_one_form(&self, rho: &[Jet]) -> Vec<Jet> {
        let d2 = self.cov_two_tensor(&self.cov_one_form(rho));
        let n = self.dim;
        (0..n)
            .map(|k| {
                let mut acc = zero_of(&d2[0][0][0], d2[0][0][0].order());
                for i in 0..n {
                    for j in 0..n {
                        acc += &self.ginv[i][j] * &d2[i][j][k];
                    }
                }
                acc
            })
            .collect()
    }

    /// Bochner Laplacian of a vector field, `g^{ij} (∇²v)_{ij}`.
    pub fn bochner_vector(&self, v: &[Jet]) -> Vec<Jet> {
        // (∇_i ∇v)^k_j as an endomorphism, contracted on i, j
        let dv = self.cov_vector(v);
        let phi: Vec<Vec<Jet>> = (0..self.dim).map(|k| (0..self.dim).map(|j| dv[j][k].clone()).collect()).collect();
        let d2 = self.cov_endo(&phi);
        (0..self.dim)
            .map(|k| {
                let mut acc = zero_of(&d2[0][0][0], d2[0][0][0].order());
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        acc += &self.ginv[i][j] * &d2[i][k][j];
                    }
                }
                acc
            })
            .collect()
    }

    /// Schouten-type tensor `P = (1/(N−2)) (scal/(2(N−1)) g − Ric)`, `N = dim`.
    pub fn schouten(&self) -> Vec<Vec<Jet>> {
        let nn = self.dim as f64;
        let a = 1.0 / (nn - 2.0);
        let b = 1.0 / (2.0 * (nn - 1.0));
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| (&(&self.g[i][j] * &self.scal) * b - &self.ric[i][j]) * a).collect())
            .collect()
    }

    /// Weyl tensor `W = Riem + P ⊙ g` in the index order of `riem`.
    pub fn weyl(&self) -> Vec<Vec<Vec<Vec<Jet>>>> {
        let p = self.schouten();
        let g = &self.g;
        let n = self.dim;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| {
                                (0..n)
                                    .map(|l| {
                                        let kn = &(&p[i][l] * &g[j][k]) + &(&p[j][k] * &g[i][l])
                                            - &p[i][k] * &g[j][l]
                                            - &p[j][l] * &g[i][k];
                                        &self.riem[i][j][k][l] + &kn
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Cotton tensor `C[i][j][k] = (∇_i P)_{jk} − (∇_j P)_{ik}`.
    pub fn cotton(&self) -> Vec<Vec<Vec<Jet>>> {
        let dp = self.cov_two_tensor(&self.schouten());
        let n = self.dim;
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| &dp[i][j][k] - &dp[j][i][k]).collect()).collect()).collect()
    }

    /// `Ric(v, ·)`.
    pub fn ric_of(&self, v: &[Jet]) -> Vec<Jet> {
        (0..self.dim)
            .map(|j| {
                let mut acc = zero_of(&self.ric[0][0], v[0].order());
                for i in 0..self.dim {
                    acc += &v[i] * &self.ric[i][j];
                }
                acc
            })
            .collect()
    }

    /// Signature `(negative, positive)` counts of the metric values.
    pub fn signature(&self) -> (usize, usize) {
        let m = nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self.g[i][j].value());
        let ev = nalgebra::SymmetricEigen::new(m).eigenvalues;
        let neg = ev.iter().filter(|v| **v < 0.0).count();
        (neg, self.dim - neg)
    }
}

/// Lie derivative of a metric along a vector field: `(𝓛_v g)_{ij}`.
pub fn lie_derivative_metric(g: &[Vec<Jet>], v: &[Jet]) -> Vec<Vec<Jet>> {
    let n = g.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = crate::fields::directional(v, &g[i][j]);
                    for k in 0..n {
                        acc += &g[k][j] * &v[k].d(i);
                        acc += &g[i][k] * &v[k].d(j);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(p: &[f64], order: usize) -> Vec<Jet> {
        Jet::seed(p, p.len(), order)
    }

    #[test]
    fn round_sphere_curvature() {
        // stereographic metric 4/(1+|x|²)² δ on the unit 3-sphere
        let x = seed(&[0.3, -0.2, 0.5], 4);
        let r2 = &(&(&x[0] * &x[0]) + &(&x[1] * &x[1])) + &(&x[2] * &x[2]);
        let conf = (r2 + 1.0).powi(-2) * 4.0;
        let g: Vec<Vec<Jet>> =
            (0..3).map(|i| (0..3).map(|j| if i == j { conf.clone() } else { conf.zero_like() }).collect()).collect();
        let mp = MetricPoint::new(g).unwrap();
        assert!((mp.scal.value() - 6.0).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                assert!((mp.ric[i][j].value() - 2.0 * mp.g[i][j].value()).abs() < 1e-12);
            }
        }
        let p = mp.schouten();
        // tr P = −scal/(2(N−1)) for N = 3
        assert!((mp.trace(&p).value() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn conformally_flat_weyl_vanishes() {
        let x = seed(&[0.1, 0.4, -0.3, 0.2], 3);
        let phi = &(&x[0] * &x[1]) * 0.3 + x[2].sin() * 0.2 + &(&x[3] * &x[3]) * 0.1;
        let e = (phi * 2.0).exp();
        let g: Vec<Vec<Jet>> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| match (i, j) {
                        (0, 0) => -&e,
                        _ if i == j => e.clone(),
                        _ => e.zero_like(),
                    })
                    .collect()
            })
            .collect();
        let mp = MetricPoint::new(g).unwrap();
        assert_eq!(mp.signature(), (1, 3));
        for w in mp.weyl().iter().flatten().flatten().flatten() {
            assert!(w.value().abs() < 1e-12);
        }
    }
}
