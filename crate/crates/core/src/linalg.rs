//! Small complex linear algebra: Hermitian inner products, norms,
//! orthonormalization and null-space bases.
//!
//! Dimensions here are tiny (the number of transmit antennas), so everything
//! is done with modified Gram-Schmidt plus one re-orthogonalization pass.

use std::ops::{Add, Index, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type Complex = Complex64;

/// Relative tolerance below which a direction is considered linearly
/// dependent on the ones already accepted.
pub const RANK_TOL: f64 = 1e-12;

/// Dense complex column vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CVector(Vec<Complex>);

impl CVector {
    pub fn new(entries: Vec<Complex>) -> Self {
        CVector(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        CVector(vec![Complex::new(0.0, 0.0); dim])
    }

    /// Standard basis vector `e_index` of dimension `dim`.
    pub fn unit(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = Complex::new(1.0, 0.0);
        v
    }

    /// Builds a vector from real entries.
    pub fn from_real(entries: &[f64]) -> Self {
        CVector(entries.iter().map(|&x| Complex::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[Complex] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex> {
        self.0.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(Complex::norm_sqr).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, factor: Complex) -> CVector {
        CVector(self.0.iter().map(|&x| x * factor).collect())
    }

    pub fn scale_real(&self, factor: f64) -> CVector {
        CVector(self.0.iter().map(|&x| x * factor).collect())
    }

    /// Unit-norm copy, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<CVector> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scale_real(1.0 / n))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `self -= coef * other`, dimensions assumed equal.
    fn axpy_neg(&mut self, coef: Complex, other: &CVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a -= coef * b;
        }
    }
}

impl Index<usize> for CVector {
    type Output = Complex;

    fn index(&self, index: usize) -> &Complex {
        &self.0[index]
    }
}

impl From<Vec<Complex>> for CVector {
    fn from(entries: Vec<Complex>) -> Self {
        CVector(entries)
    }
}

impl Add for &CVector {
    type Output = CVector;

    fn add(self, rhs: &CVector) -> CVector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &CVector {
    type Output = CVector;

    fn sub(self, rhs: &CVector) -> CVector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// `a^H b = Σ conj(a_i) b_i`.
pub fn hermitian_inner(a: &CVector, b: &CVector) -> Result<Complex> {
    check_dim(a.dim(), b.dim())?;
    Ok(inner(a, b))
}

fn inner(a: &CVector, b: &CVector) -> Complex {
    a.0.iter().zip(&b.0).map(|(x, y)| x.conj() * y).sum()
}

/// Removes the components of `v` along every vector of the orthonormal set
/// `basis`, running the sweep twice.
fn orthogonalize_against(v: &mut CVector, basis: &[CVector]) {
    for _ in 0..2 {
        for q in basis {
            let coef = inner(q, v);
            v.axpy_neg(coef, q);
        }
    }
}

/// Orthonormal basis of `span(vectors)`.
///
/// A vector is dropped when what remains of it after projection is shorter
/// than `tol` times its original norm; zero vectors are always dropped.
pub fn orthonormal_span(vectors: &[CVector], tol: f64) -> Result<Vec<CVector>> {
    let Some(first) = vectors.first() else {
        return Ok(Vec::new());
    };
    let dim = first.dim();
    let mut basis: Vec<CVector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        check_dim(dim, v.dim())?;
        let input_norm = v.norm();
        if input_norm == 0.0 {
            continue;
        }
        let mut residual = v.clone();
        orthogonalize_against(&mut residual, &basis);
        let r = residual.norm();
        if r >= tol * input_norm && r > 0.0 {
            basis.push(residual.scale_real(1.0 / r));
        }
    }
    Ok(basis)
}

/// Orthonormal basis of the subspace of `C^dim` orthogonal to every row,
/// i.e. all `b` with `r^H b = 0` for each row `r`.
///
/// The basis has `dim - rank(rows)` vectors. Completion candidates are the
/// standard basis vectors, picked greedily by largest residual.
pub fn null_space_basis(dim: usize, rows: &[CVector], tol: f64) -> Result<Vec<CVector>> {
    for r in rows {
        check_dim(dim, r.dim())?;
    }
    let mut span = orthonormal_span(rows, tol)?;
    let rank = span.len();
    let mut candidates: Vec<usize> = (0..dim).collect();
    let mut complement = Vec::with_capacity(dim - rank);

    while complement.len() < dim - rank {
        let (pos, residual) = candidates
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                let mut v = CVector::unit(dim, i);
                orthogonalize_against(&mut v, &span);
                (pos, v)
            })
            .fold(None::<(usize, CVector)>, |best, (pos, v)| match best {
                Some((_, ref b)) if b.norm() >= v.norm() => best,
                _ => Some((pos, v)),
            })
            .ok_or_else(|| Error::Internal("ran out of completion candidates".into()))?;
        candidates.remove(pos);
        let r = residual.norm();
        if r < tol {
            return Err(Error::Internal("null-space completion lost rank".into()));
        }
        let b = residual.scale_real(1.0 / r);
        span.push(b.clone());
        complement.push(b);
    }
    Ok(complement)
}

/// Orthogonal projection of `v` onto `span(basis)`; `basis` must be
/// orthonormal.
pub fn project_onto_subspace(v: &CVector, basis: &[CVector]) -> Result<CVector> {
    let mut out = CVector::zeros(v.dim());
    for b in basis {
        let coef = hermitian_inner(b, v)?;
        out.axpy_neg(-coef, b);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn phase_vector(theta: f64) -> CVector {
        CVector::new(
            (0..4)
                .map(|n| Complex::from_polar(1.0, n as f64 * theta))
                .collect(),
        )
    }

    #[test]
    fn inner_of_all_ones() {
        let a = CVector::from_real(&[1.0; 4]);
        assert_eq!(hermitian_inner(&a, &a).unwrap(), c(4.0, 0.0));
    }

    #[test]
    fn inner_of_orthogonal_axes() {
        let a = CVector::from_real(&[1.0, 0.0]);
        let b = CVector::from_real(&[0.0, 1.0]);
        assert_eq!(hermitian_inner(&a, &b).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn inner_of_phase_progression_matches_geometric_sum() {
        // sum_{n=0..3} exp(-j n pi/9), evaluated independently.
        let expected = c(3.2057370639048863, -1.8508331567966465);
        let a = phase_vector(PI / 9.0);
        let b = CVector::from_real(&[1.0; 4]);
        let got = hermitian_inner(&a, &b).unwrap();
        assert!((got - expected).norm() < 1e-14, "{got}");
    }

    #[test]
    fn inner_rejects_dimension_mismatch() {
        let a = CVector::zeros(2);
        let b = CVector::zeros(3);
        assert!(matches!(
            hermitian_inner(&a, &b),
            Err(Error::Dimension {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn null_space_of_axis() {
        let basis = null_space_basis(2, &[CVector::from_real(&[0.0, 1.0])], RANK_TOL).unwrap();
        assert_eq!(basis.len(), 1);
        assert!((basis[0][0].norm() - 1.0).abs() < 1e-15);
        assert!(basis[0][1].norm() < 1e-15);
    }

    #[test]
    fn null_space_of_nothing_is_whole_space() {
        let basis = null_space_basis(2, &[], RANK_TOL).unwrap();
        assert_eq!(basis.len(), 2);
        assert_orthonormal(&basis);
    }

    #[test]
    fn null_space_of_full_rank_square_is_empty() {
        let rows = vec![
            CVector::from_real(&[1.0, 2.0]),
            CVector::from_real(&[3.0, -1.0]),
        ];
        assert!(null_space_basis(2, &rows, RANK_TOL).unwrap().is_empty());
    }

    #[test]
    fn null_space_detects_collinear_rows() {
        let h = phase_vector(PI / 9.0);
        let rows = vec![h.clone(), h.scale(c(0.0, 2.0))];
        assert_eq!(null_space_basis(4, &rows, RANK_TOL).unwrap().len(), 3);
    }

    /// Null-space projector `I - A^H (A A^H)^{-1} A` with the 2x2 Gram
    /// inverse written out by hand.
    fn reference_null_projector(r1: &CVector, r2: &CVector) -> Vec<Vec<Complex>> {
        let d = r1.dim();
        let dot = |a: &CVector, b: &CVector| -> Complex {
            (0..d)
                .map(|i| a[i].conj() * b[i])
                .fold(c(0.0, 0.0), |s, x| s + x)
        };
        // Gram matrix G[i][j] = r_i^H r_j.
        let g = [[dot(r1, r1), dot(r1, r2)], [dot(r2, r1), dot(r2, r2)]];
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let inv = [
            [g[1][1] / det, -g[0][1] / det],
            [-g[1][0] / det, g[0][0] / det],
        ];
        let rows = [r1, r2];
        // Projector onto span(rows) = Σ_ij r_i inv[i][j] r_j^H, with
        // inv the inverse of the Gram matrix of the rows.
        let mut p = vec![vec![c(0.0, 0.0); d]; d];
        for (a, row) in p.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                let mut s = c(0.0, 0.0);
                for i in 0..2 {
                    for j in 0..2 {
                        s += rows[i][a] * inv[i][j] * rows[j][b].conj();
                    }
                }
                *entry = if a == b { c(1.0, 0.0) - s } else { -s };
            }
        }
        p
    }

    #[test]
    fn null_space_of_scenario_interferers() {
        let h2 = phase_vector(PI / 9.0);
        let h3 = phase_vector(2.0 * PI / 9.0);
        let basis = null_space_basis(4, &[h2.clone(), h3.clone()], RANK_TOL).unwrap();
        assert_eq!(basis.len(), 2);
        assert_orthonormal(&basis);
        for b in &basis {
            assert!(hermitian_inner(&h2, b).unwrap().norm() < 1e-10);
            assert!(hermitian_inner(&h3, b).unwrap().norm() < 1e-10);
        }
        let reference = reference_null_projector(&h2, &h3);
        for a in 0..4 {
            for bb in 0..4 {
                let ours: Complex = basis.iter().map(|v| v[a] * v[bb].conj()).sum();
                assert!((ours - reference[a][bb]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let e0 = CVector::from_real(&[1.0, 0.0]);
        let p = project_onto_subspace(&CVector::from_real(&[1.0, 1.0]), &[e0.clone()]).unwrap();
        assert_eq!(p, e0);
        let p = project_onto_subspace(&CVector::from_real(&[0.0, 3.0]), &[e0.clone()]).unwrap();
        assert!(p.norm() == 0.0);
        let v = CVector::new(vec![c(0.5, -2.0), c(0.0, 0.0)]);
        let p = project_onto_subspace(&v, &[e0]).unwrap();
        assert!((&p - &v).norm() < 1e-10);
    }

    #[test]
    fn projection_rejects_dimension_mismatch() {
        let v = CVector::zeros(3);
        assert!(project_onto_subspace(&v, &[CVector::unit(2, 0)]).is_err());
    }

    fn assert_orthonormal(basis: &[CVector]) {
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                let ip = hermitian_inner(a, b).unwrap();
                assert!((ip - c(expected, 0.0)).norm() < 1e-10, "⟨b{i},b{j}⟩ = {ip}");
            }
        }
    }

    fn arb_vector(dim: usize) -> impl Strategy<Value = CVector> {
        proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), dim)
            .prop_map(|v| CVector::new(v.into_iter().map(|(re, im)| c(re, im)).collect()))
    }

    fn arb_rows() -> impl Strategy<Value = (usize, Vec<CVector>)> {
        (1usize..=6).prop_flat_map(|d| (Just(d), proptest::collection::vec(arb_vector(d), 0..=d)))
    }

    proptest! {
        #[test]
        fn null_space_is_orthonormal_and_orthogonal_to_rows((d, rows) in arb_rows()) {
            let basis = null_space_basis(d, &rows, RANK_TOL).unwrap();
            let rank = orthonormal_span(&rows, RANK_TOL).unwrap().len();
            prop_assert_eq!(basis.len(), d - rank);
            assert_orthonormal(&basis);
            for r in &rows {
                for b in &basis {
                    prop_assert!(hermitian_inner(r, b).unwrap().norm() < 1e-10 * r.norm().max(1.0));
                }
            }
        }

        #[test]
        fn projection_is_pythagorean_and_idempotent(
            (d, rows) in arb_rows(),
            seed in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 6),
        ) {
            let basis = null_space_basis(d, &rows, RANK_TOL).unwrap();
            let v = CVector::new(seed[..d].iter().map(|&(re, im)| c(re, im)).collect());
            let p = project_onto_subspace(&v, &basis).unwrap();
            let rest = &v - &p;
            let lhs = v.norm_sqr();
            let rhs = p.norm_sqr() + rest.norm_sqr();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1e-300));
            prop_assert!(p.norm() <= v.norm() + 1e-12);
            let pp = project_onto_subspace(&p, &basis).unwrap();
            prop_assert!((&pp - &p).norm() < 1e-10);
        }

        #[test]
        fn inner_is_conjugate_symmetric(a in arb_vector(4), b in arb_vector(4)) {
            let ab = hermitian_inner(&a, &b).unwrap();
            let ba = hermitian_inner(&b, &a).unwrap();
            prop_assert!((ab - ba.conj()).norm() < 1e-12);
        }
    }
}
