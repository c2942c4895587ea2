//! Finite-difference curvature oracle.
//!
//! Metric components are differenced in chart coordinates, Christoffel
//! symbols and their derivatives are assembled from those differences, and
//! the Riemann tensor follows from the coordinate formula. Nothing here uses
//! the shape-operator formulas.

use nalgebra::{DMatrix, DVector};

use super::{CollarMetric, TangentPlane};
use crate::error::{CollarError, Result};

/// A Riemannian metric given by its components in a chart.
pub trait CoordinateMetric {
    fn coord_dim(&self) -> usize;
    fn components(&self, q: &[f64]) -> DMatrix<f64>;
}

impl CoordinateMetric for CollarMetric {
    fn coord_dim(&self) -> usize {
        self.slice.dim() + 1
    }

    fn components(&self, q: &[f64]) -> DMatrix<f64> {
        let n = q.len();
        let (f, _, _) = self.profile.eval(q[0]);
        let sigma = self.slice.conformal_coefficient(q[0], &q[1..]);
        let mut g = DMatrix::identity(n, n);
        for i in 1..n {
            g[(i, i)] = f * f * sigma;
        }
        g
    }
}

impl<F> CoordinateMetric for (usize, F)
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    fn coord_dim(&self) -> usize {
        self.0
    }

    fn components(&self, q: &[f64]) -> DMatrix<f64> {
        (self.1)(q)
    }
}

struct MetricJet {
    g: DMatrix<f64>,
    dg: Vec<DMatrix<f64>>,
    ddg: Vec<Vec<DMatrix<f64>>>,
}

fn shifted(q: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut p = q.to_vec();
    for &(i, d) in moves {
        p[i] += d;
    }
    p
}

fn metric_jet<M: CoordinateMetric + ?Sized>(m: &M, q: &[f64], h: f64, second: bool) -> MetricJet {
    let n = q.len();
    let g = m.components(q);
    let mut dg = Vec::with_capacity(n);
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for k in 0..n {
        let gp = m.components(&shifted(q, &[(k, h)]));
        let gm = m.components(&shifted(q, &[(k, -h)]));
        dg.push((&gp - &gm) / (2.0 * h));
        plus.push(gp);
        minus.push(gm);
    }
    let mut ddg = vec![vec![DMatrix::zeros(n, n); n]; n];
    if second {
        for k in 0..n {
            ddg[k][k] = (&plus[k] - &g * 2.0 + &minus[k]) / (h * h);
            for l in (k + 1)..n {
                let pp = m.components(&shifted(q, &[(k, h), (l, h)]));
                let pm = m.components(&shifted(q, &[(k, h), (l, -h)]));
                let mp = m.components(&shifted(q, &[(k, -h), (l, h)]));
                let mm = m.components(&shifted(q, &[(k, -h), (l, -h)]));
                let d = (pp - pm - mp + mm) / (4.0 * h * h);
                ddg[k][l] = d.clone();
                ddg[l][k] = d;
            }
        }
    }
    MetricJet { g, dg, ddg }
}

#[inline]
fn idx3(n: usize, i: usize, j: usize, k: usize) -> usize {
    (i * n + j) * n + k
}

/// Christoffel symbols `Γ^i_{jk}` (flattened `[i][j][k]`) from central
/// differences of the metric.
pub fn fd_christoffel<M: CoordinateMetric + ?Sized>(m: &M, q: &[f64], h: f64) -> Vec<f64> {
    let n = q.len();
    let jet = metric_jet(m, q, h, false);
    let ginv = jet.g.clone().try_inverse().expect("metric must be invertible");
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[(i, l)] * (jet.dg[j][(l, k)] + jet.dg[k][(l, j)] - jet.dg[l][(j, k)]);
                }
                out[idx3(n, i, j, k)] = 0.5 * s;
            }
        }
    }
    out
}

/// Sectional curvature of `span(u, v)` at `q` from a finite-difference
/// Riemann tensor with step `h`.
pub fn fd_sectional<M: CoordinateMetric + ?Sized>(
    m: &M,
    q: &[f64],
    u: &DVector<f64>,
    v: &DVector<f64>,
    h: f64,
) -> Result<f64> {
    let n = m.coord_dim();
    if n > 3 || n < 2 {
        return Err(CollarError::Unsupported(format!("oracle supports dimension 2 or 3, got {n}")));
    }
    if !(h > 0.0) {
        return Err(CollarError::InvalidParameter("step must be positive".into()));
    }
    let jet = metric_jet(m, q, h, true);
    let ginv = jet.g.clone().try_inverse().ok_or_else(|| CollarError::OutsideDomain("singular metric".into()))?;

    // first-kind symbols and their derivatives
    let mut gam1 = vec![0.0; n * n * n];
    let mut dgam1 = vec![vec![0.0; n * n * n]; n];
    for mm in 0..n {
        for j in 0..n {
            for l in 0..n {
                gam1[idx3(n, mm, j, l)] =
                    0.5 * (jet.dg[j][(mm, l)] + jet.dg[l][(mm, j)] - jet.dg[mm][(j, l)]);
                for k in 0..n {
                    dgam1[k][idx3(n, mm, j, l)] = 0.5
                        * (jet.ddg[k][j][(mm, l)] + jet.ddg[k][l][(mm, j)] - jet.ddg[k][mm][(j, l)]);
                }
            }
        }
    }
    let dginv: Vec<DMatrix<f64>> = (0..n).map(|k| -(&ginv * &jet.dg[k] * &ginv)).collect();
    let mut gam = vec![0.0; n * n * n];
    let mut dgam = vec![vec![0.0; n * n * n]; n];
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let mut s = 0.0;
                for mm in 0..n {
                    s += ginv[(i, mm)] * gam1[idx3(n, mm, j, l)];
                }
                gam[idx3(n, i, j, l)] = s;
                for k in 0..n {
                    let mut ds = 0.0;
                    for mm in 0..n {
                        ds += dginv[k][(i, mm)] * gam1[idx3(n, mm, j, l)]
                            + ginv[(i, mm)] * dgam1[k][idx3(n, mm, j, l)];
                    }
                    dgam[k][idx3(n, i, j, l)] = ds;
                }
            }
        }
    }
    // R^i_{jkl} = ∂_k Γ^i_{lj} - ∂_l Γ^i_{kj} + Γ^i_{km} Γ^m_{lj} - Γ^i_{lm} Γ^m_{kj}
    let n4 = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let mut riem = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut r = dgam[k][idx3(n, i, l, j)] - dgam[l][idx3(n, i, k, j)];
                    for mm in 0..n {
                        r += gam[idx3(n, i, k, mm)] * gam[idx3(n, mm, l, j)]
                            - gam[idx3(n, i, l, mm)] * gam[idx3(n, mm, k, j)];
                    }
                    riem[n4(i, j, k, l)] = r;
                }
            }
        }
    }
    // lower the first index
    let mut low = vec![0.0; n * n * n * n];
    let mut rmax: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for mm in 0..n {
                        s += jet.g[(i, mm)] * riem[n4(mm, j, k, l)];
                    }
                    low[n4(i, j, k, l)] = s;
                    rmax = rmax.max(s.abs());
                }
            }
        }
    }

    // cancellation guards: roundoff in second differences, and pair symmetry
    let gmax = jet.g.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let ginv_max = ginv.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let noise = f64::EPSILON * gmax * ginv_max / (h * h);
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    asym = asym.max((low[n4(i, j, k, l)] - low[n4(k, l, i, j)]).abs());
                    asym = asym.max((low[n4(i, j, k, l)] + low[n4(j, i, k, l)]).abs());
                }
            }
        }
    }
    if noise > 1e-4 {
        return Err(CollarError::StepTooSmall {
            step: h,
            reason: format!("estimated roundoff {noise:.3e} in second differences"),
        });
    }
    if asym > 1e-6 * rmax.max(f64::MIN_POSITIVE) && asym > 1e-12 {
        return Err(CollarError::StepTooSmall {
            step: h,
            reason: format!("Riemann symmetry residual {asym:.3e} (max component {rmax:.3e})"),
        });
    }

    // <R(U,V)V,U> = R_{i j k l} U^i V^j U^k V^l with R_{ijkl} = g_{im} R^m_{jkl}
    let mut num = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    num += low[n4(i, j, k, l)] * u[i] * v[j] * u[k] * v[l];
                }
            }
        }
    }
    let guu = u.dot(&(&jet.g * u));
    let gvv = v.dot(&(&jet.g * v));
    let guv = u.dot(&(&jet.g * v));
    Ok(num / (guu * gvv - guv * guv))
}

/// Finite-difference sectional curvature of a tangent plane of the collar metric.
pub fn oracle_sectional(m: &CollarMetric, p: &TangentPlane, step: f64) -> Result<f64> {
    let (u, v) = p.spanning_vectors();
    let mut q = Vec::with_capacity(p.x.len() + 1);
    q.push(p.t);
    q.extend_from_slice(&p.x);
    fd_sectional(m, &q, &u, &v, step)
}

/// `(K(h) - K(h/2)) / (K(h/2) - K(h/4))`; close to 4 for a second-order
/// difference scheme in its asymptotic range.
pub fn richardson_ratio(m: &CollarMetric, p: &TangentPlane, step: f64) -> Result<f64> {
    let k1 = oracle_sectional(m, p, step)?;
    let k2 = oracle_sectional(m, p, step / 2.0)?;
    let k3 = oracle_sectional(m, p, step / 4.0)?;
    Ok((k1 - k2) / (k2 - k3))
}
