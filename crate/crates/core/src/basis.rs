//! Thin-plate spline machinery: the polyharmonic radial kernel `eta_{m,d}`,
//! the polynomial basis, the kernel matrix, and the null-space
//! reparametrization that enforces the natural-spline side condition
//! `Phi^T gamma = 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{FlError, Result};
use crate::grid::Grid;
use crate::linalg::null_space_basis;

/// Relative singular-value tolerance for the unisolvence (rank) check.
const RANK_REL_TOL: f64 = 1e-10;

/// Radial kernel of the thin-plate spline of order `m` in dimension `d`:
///
/// even d:  (-1)^(m+1+d/2) / (2^(2m-1) pi^(d/2) (m-1)! (m-d/2)!) * x^(2m-d) log x
/// odd d:   Gamma(d/2-m) / (2^(2m) pi^(d/2) (m-1)!) * x^(2m-d)
///
/// defined for `2m > d`, with value 0 at x = 0 (the limit of both branches).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaKernel {
    m: usize,
    d: usize,
    coeff: f64,
    power: i32,
    log_branch: bool,
}

impl EtaKernel {
    pub fn new(m: usize, d: usize) -> Result<Self> {
        if m < 1 || d < 1 {
            return Err(FlError::Invalid(format!(
                "kernel order and dimension must be positive, got m = {m}, d = {d}"
            )));
        }
        if 2 * m <= d {
            return Err(FlError::Invalid(format!(
                "thin-plate kernel requires 2m > d, got m = {m}, d = {d}"
            )));
        }
        let (coeff, log_branch) = if d % 2 == 0 {
            let sign = if (m + 1 + d / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let denom = 2f64.powi(2 * m as i32 - 1)
                * std::f64::consts::PI.powi(d as i32 / 2)
                * factorial(m - 1)
                * factorial(m - d / 2);
            (sign / denom, true)
        } else {
            let denom = 2f64.powi(2 * m as i32)
                * std::f64::consts::PI.powf(d as f64 / 2.0)
                * factorial(m - 1);
            (gamma_negative_half_integer(m, d) / denom, false)
        };
        Ok(EtaKernel {
            m,
            d,
            coeff,
            power: (2 * m - d) as i32,
            log_branch,
        })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Kernel value at radius `x >= 0`; exactly 0 at `x = 0`.
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        if x == 0.0 {
            return 0.0;
        }
        let r = self.coeff * x.powi(self.power);
        if self.log_branch {
            r * x.ln()
        } else {
            r
        }
    }
}

/// `Gamma(d/2 - m)` for odd `d` with `2m > d`: a negative half-integer
/// argument, climbed up from `Gamma(1/2) = sqrt(pi)` via the recurrence
/// `Gamma(z) = Gamma(z + 1) / z`.
fn gamma_negative_half_integer(m: usize, d: usize) -> f64 {
    debug_assert!(d % 2 == 1 && 2 * m > d);
    let steps = m - (d - 1) / 2; // number of recurrence steps from 1/2 down
    let mut value = std::f64::consts::PI.sqrt();
    for k in 1..=steps {
        value /= 0.5 - k as f64;
    }
    value
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Radial kernel value `eta_{m,d}(x)`.
pub fn eta(m: usize, d: usize, x: f64) -> Result<f64> {
    let kernel = EtaKernel::new(m, d)?;
    if !(x >= 0.0) {
        return Err(FlError::Invalid(format!(
            "kernel radius must be nonnegative, got {x}"
        )));
    }
    Ok(kernel.eval(x))
}

/// Exponent multi-indices of the monomial basis of polynomials of total order
/// less than `m` on R^d, ordered by total degree and then lexicographically.
/// There are `M = C(m+d-1, d)` of them.
pub fn monomial_basis(m: usize, d: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity(binomial(m + d - 1, d));
    for degree in 0..m as u32 {
        let mut prefix = Vec::with_capacity(d);
        push_compositions(degree, d, &mut prefix, &mut out);
    }
    out
}

fn push_compositions(degree: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if slots == 1 {
        prefix.push(degree);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in 0..=degree {
        prefix.push(first);
        push_compositions(degree - first, slots - 1, prefix, out);
        prefix.pop();
    }
}

fn monomial_value(exponents: &[u32], point: &[f64]) -> f64 {
    exponents
        .iter()
        .zip(point)
        .map(|(e, x)| x.powi(*e as i32))
        .product()
}

/// The assembled thin-plate basis on a grid: kernel matrix `Omega`,
/// polynomial matrix `Phi`, and an orthonormal basis `Q` for the null space
/// of `Phi^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TpsBasis {
    m: usize,
    grid: Grid,
    kernel: EtaKernel,
    exponents: Vec<Vec<u32>>,
    omega: DMatrix<f64>,
    phi: DMatrix<f64>,
    q: DMatrix<f64>,
}

impl TpsBasis {
    pub fn order(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Polynomial-space dimension `M = C(m+d-1, d)`.
    pub fn poly_dim(&self) -> usize {
        self.phi.ncols()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn kernel(&self) -> &EtaKernel {
        &self.kernel
    }

    /// True when the order also satisfies the rate condition `2m > d + 1`
    /// used by the asymptotic theory (strictly stronger than existence).
    pub fn satisfies_rate_condition(&self) -> bool {
        2 * self.m > self.dim() + 1
    }

    /// Values of the fitted coefficient function at the knots, `Omega gamma +
    /// Phi delta`.
    pub fn beta_at_knots(&self, coeffs: &SplineCoefficients) -> DVector<f64> {
        &self.omega * &coeffs.gamma + &self.phi * &coeffs.delta
    }
}

/// Coefficients of a fitted spline: intercept `alpha`, reduced kernel
/// coefficients `xi`, polynomial coefficients `delta`, and the full kernel
/// coefficients `gamma = Q xi` (cached).
#[derive(Debug, Clone, PartialEq)]
pub struct SplineCoefficients {
    pub alpha: f64,
    pub xi: DVector<f64>,
    pub delta: DVector<f64>,
    pub gamma: DVector<f64>,
}

impl SplineCoefficients {
    /// Split a stacked parameter vector `theta = (alpha, xi, delta)` laid out
    /// as in the design matrix.
    pub fn from_theta(basis: &TpsBasis, theta: &DVector<f64>) -> Result<Self> {
        let p = basis.grid.len();
        let m_poly = basis.poly_dim();
        let dim = 1 + (p - m_poly) + m_poly;
        if theta.len() != dim {
            return Err(FlError::Invalid(format!(
                "theta has length {}, expected {dim}",
                theta.len()
            )));
        }
        let alpha = theta[0];
        let xi = DVector::from_iterator(p - m_poly, theta.iter().skip(1).take(p - m_poly).copied());
        let delta = DVector::from_iterator(m_poly, theta.iter().skip(1 + p - m_poly).copied());
        let gamma = basis.q() * &xi;
        Ok(SplineCoefficients {
            alpha,
            xi,
            delta,
            gamma,
        })
    }

    /// Repack into the stacked `(alpha, xi, delta)` layout.
    pub fn theta(&self) -> DVector<f64> {
        let mut out = DVector::zeros(1 + self.xi.len() + self.delta.len());
        out[0] = self.alpha;
        out.rows_mut(1, self.xi.len()).copy_from(&self.xi);
        out.rows_mut(1 + self.xi.len(), self.delta.len())
            .copy_from(&self.delta);
        out
    }
}

/// Assemble the thin-plate basis of order `m` on a grid.
///
/// Fails when `2m <= d`, when there are no more points than polynomial basis
/// functions, or when the points are not unisolvent (rank(Phi) < M, checked
/// against singular values at relative tolerance 1e-10).
pub fn build_basis(grid: &Grid, m: usize) -> Result<TpsBasis> {
    let d = grid.dim();
    let kernel = EtaKernel::new(m, d)?;
    let exponents = monomial_basis(m, d);
    let m_poly = exponents.len();
    let p = grid.len();
    if p <= m_poly {
        return Err(FlError::Invalid(format!(
            "too few points: p = {p} must exceed the polynomial dimension M = {m_poly}"
        )));
    }

    let mut phi = DMatrix::zeros(p, m_poly);
    for i in 0..p {
        for (j, exps) in exponents.iter().enumerate() {
            phi[(i, j)] = monomial_value(exps, grid.point(i));
        }
    }

    let svals = phi.clone().singular_values();
    let smax = svals.max();
    let smin = svals.min();
    if !(smin > RANK_REL_TOL * smax) {
        return Err(FlError::Unisolvent {
            order: m,
            detail: format!(
                "polynomial design matrix is rank deficient (sigma_min/sigma_max = {:.3e})",
                smin / smax
            ),
        });
    }

    let mut omega = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..i {
            let r = grid
                .point(i)
                .iter()
                .zip(grid.point(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            let v = kernel.eval(r);
            omega[(i, j)] = v;
            omega[(j, i)] = v;
        }
    }

    let q = null_space_basis(&phi);
    debug_assert!((phi.transpose() * &q).amax() < 1e-10);

    Ok(TpsBasis {
        m,
        grid: grid.clone(),
        kernel,
        exponents,
        omega,
        phi,
        q,
    })
}

/// Evaluate the coefficient function `beta(t) = sum_j gamma_j eta(||t - t_j||)
/// + sum_k delta_k phi_k(t)` at arbitrary query points. The intercept is a
/// regression offset and is not included.
pub fn evaluate_spline(
    basis: &TpsBasis,
    coeffs: &SplineCoefficients,
    query_points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let d = basis.dim();
    let mut out = Vec::with_capacity(query_points.len());
    for (qi, t) in query_points.iter().enumerate() {
        if t.len() != d {
            return Err(FlError::Invalid(format!(
                "query point {qi} has dimension {}, expected {d}",
                t.len()
            )));
        }
        let mut value = 0.0;
        for (j, knot) in basis.grid.points().iter().enumerate() {
            let r = t
                .iter()
                .zip(knot)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            value += coeffs.gamma[j] * basis.kernel.eval(r);
        }
        for (k, exps) in basis.exponents.iter().enumerate() {
            value += coeffs.delta[k] * monomial_value(exps, t);
        }
        out.push(value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid_1d;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn eta_cubic_in_one_dimension() {
        // m = 2, d = 1: Gamma(-3/2) = 4 sqrt(pi)/3 collapses the odd-d
        // constant to 1/12, so eta(x) = x^3/12.
        assert_relative_eq!(eta(2, 1, 2.0).unwrap(), 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(eta(2, 1, 1.0).unwrap(), 1.0 / 12.0, max_relative = 1e-14);
    }

    #[test]
    fn eta_even_branch() {
        assert_eq!(eta(2, 2, 1.0).unwrap(), 0.0); // log(1) = 0
        let e = std::f64::consts::E;
        let expect = e * e / (8.0 * std::f64::consts::PI);
        assert_relative_eq!(eta(2, 2, e).unwrap(), expect, max_relative = 1e-14);
        assert_relative_eq!(eta(2, 2, e).unwrap(), 0.29400120073203245, max_relative = 1e-12);
    }

    #[test]
    fn eta_zero_and_domain_errors() {
        assert_eq!(eta(2, 1, 0.0).unwrap(), 0.0);
        assert!(eta(1, 2, 1.0).is_err()); // 2m <= d
        assert!(eta(2, 1, -1.0).is_err());
    }

    #[test]
    fn monomial_orders() {
        assert_eq!(monomial_basis(2, 1), vec![vec![0], vec![1]]);
        assert_eq!(
            monomial_basis(2, 2),
            vec![vec![0, 0], vec![0, 1], vec![1, 0]]
        );
        assert_eq!(monomial_basis(3, 2).len(), 6); // C(4, 2)
    }

    #[test]
    fn build_succeeds_on_distinct_1d_points() {
        let g = build_grid_1d(&[0.25, 0.5, 0.75], (0.0, 1.0)).unwrap();
        let b = build_basis(&g, 2).unwrap();
        assert_eq!(b.poly_dim(), 2);
        assert_eq!(b.q().shape(), (3, 1));
        for i in 0..3 {
            assert_eq!(b.omega()[(i, i)], 0.0);
        }
    }

    #[test]
    fn collinear_2d_points_are_not_unisolvent() {
        use crate::grid::{build_grid_nd, DomainBox};
        let unit = DomainBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let pts = vec![
            vec![0.2, 0.2],
            vec![0.5, 0.5],
            vec![0.8, 0.8],
            vec![0.35, 0.35],
        ];
        let g = build_grid_nd(&pts, &unit, 64).unwrap();
        let err = build_basis(&g, 2).unwrap_err();
        assert!(matches!(err, FlError::Unisolvent { .. }), "{err}");
    }

    #[test]
    fn too_few_points_for_order() {
        let g = build_grid_1d(&[0.3, 0.7], (0.0, 1.0)).unwrap();
        assert!(build_basis(&g, 2).is_err()); // p = M = 2
    }

    fn random_coeffs(basis: &TpsBasis, rng: &mut ChaCha12Rng) -> SplineCoefficients {
        let p = basis.grid().len();
        let m_poly = basis.poly_dim();
        let theta = DVector::from_iterator(
            1 + p,
            (0..1 + p).map(|_| rng.random::<f64>() * 2.0 - 1.0),
        );
        let _ = m_poly;
        SplineCoefficients::from_theta(basis, &theta).unwrap()
    }

    #[test]
    fn knot_evaluation_matches_matrix_product() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let pts: Vec<f64> = (0..8).map(|j| (j as f64 + 0.5) / 8.0).collect();
        let g = build_grid_1d(&pts, (0.0, 1.0)).unwrap();
        let b = build_basis(&g, 2).unwrap();
        let c = random_coeffs(&b, &mut rng);
        let direct = evaluate_spline(&b, &c, g.points()).unwrap();
        let matrix = b.beta_at_knots(&c);
        for (x, y) in direct.iter().zip(matrix.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn evaluation_matches_scalar_loop_oracle() {
        // independent oracle: direct summation with eta(x) = x^3/12
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let pts: Vec<f64> = (0..6).map(|j| (j as f64 + 0.5) / 6.0).collect();
        let g = build_grid_1d(&pts, (0.0, 1.0)).unwrap();
        let b = build_basis(&g, 2).unwrap();
        let c = random_coeffs(&b, &mut rng);
        let t = 0.415;
        let got = evaluate_spline(&b, &c, &[vec![t]]).unwrap()[0];
        let mut want = c.delta[0] + c.delta[1] * t;
        for (j, knot) in pts.iter().enumerate() {
            let r = (t - knot).abs();
            want += c.gamma[j] * r * r * r / 12.0;
        }
        assert_relative_eq!(got, want, max_relative = 1e-12);
    }

    #[test]
    fn constant_spline_from_polynomial_part() {
        let pts: Vec<f64> = (0..5).map(|j| (j as f64 + 0.5) / 5.0).collect();
        let g = build_grid_1d(&pts, (0.0, 1.0)).unwrap();
        let b = build_basis(&g, 2).unwrap();
        let c = SplineCoefficients {
            alpha: 0.0,
            xi: DVector::zeros(3),
            delta: DVector::from_vec(vec![4.5, 0.0]),
            gamma: DVector::zeros(5),
        };
        let vals = evaluate_spline(&b, &c, &[vec![0.1], vec![0.6], vec![0.99]]).unwrap();
        for v in vals {
            assert_relative_eq!(v, 4.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn natural_constraint_and_conditional_psd() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let pts: Vec<f64> = (0..12).map(|j| (j as f64 + 0.5) / 12.0).collect();
        let g = build_grid_1d(&pts, (0.0, 1.0)).unwrap();
        let b = build_basis(&g, 2).unwrap();
        let qtq = b.q().transpose() * b.q();
        for i in 0..qtq.nrows() {
            for j in 0..qtq.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - want).abs() < 1e-10);
            }
        }
        let qoq = b.q().transpose() * b.omega() * b.q();
        for _ in 0..50 {
            let xi = DVector::from_iterator(
                b.q().ncols(),
                (0..b.q().ncols()).map(|_| rng.random::<f64>() * 2.0 - 1.0),
            );
            let gamma = b.q() * &xi;
            let constraint = (b.phi().transpose() * &gamma).amax();
            assert!(constraint < 1e-8, "constraint violation {constraint}");
            let quad = (xi.transpose() * &qoq * &xi)[(0, 0)];
            assert!(quad >= -1e-8 * xi.norm_squared(), "quadratic form {quad}");
        }
        assert_eq!(b.omega(), &b.omega().transpose());
    }
}
