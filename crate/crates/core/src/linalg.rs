//! Dense complex linear algebra helpers on top of nalgebra.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Right eigen-decomposition of a general complex matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    /// Unit-norm eigenvectors stored as columns.
    pub vectors: CMat,
    /// 2-norm condition number of the eigenvector matrix.
    pub condition: f64,
}

/// Eigenvalues come from a complex Schur form; eigenvectors from the null
/// space of `A - λI` per eigenvalue cluster, which stays well defined for
/// exactly degenerate (but diagonalizable) clusters.
pub fn eig(m: &CMat) -> Result<Eigen> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::Dimension(format!("eig on {}x{} matrix", n, m.ncols())));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    // exactly degenerate inputs occasionally stall QR at machine precision;
    // a slightly looser deflation threshold still leaves eigenvalues far
    // inside the clustering tolerance below
    let schur = [1.0, 1e2, 1e4]
        .iter()
        .find_map(|f| Schur::try_new(m.clone(), f * f64::EPSILON, 10_000))
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let values: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();

    let clusters = cluster(&values, 1e-9 * scale);
    let mut vectors = CMat::zeros(n, n);
    for members in &clusters {
        let k = members.len();
        let mean = members.iter().map(|&j| values[j]).sum::<Complex64>() / k as f64;
        let mut a = m.clone();
        for d in 0..n {
            a[(d, d)] -= mean;
        }
        let svd = SVD::new(a, false, true);
        let vt = svd.v_t.as_ref().expect("requested V^T");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
        if k > 1 && svd.singular_values[order[k - 1]] > 1e-7 * scale {
            return Err(Error::Defective(f64::INFINITY));
        }
        for (&slot, &col) in members.iter().zip(order.iter()) {
            let v: CVec = vt.row(col).adjoint();
            vectors.set_column(slot, &normalize_phase(v));
        }
    }
    let condition = cond2(&vectors);
    Ok(Eigen { values, vectors, condition })
}

fn cluster(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    'outer: for (i, v) in values.iter().enumerate() {
        for g in groups.iter_mut() {
            if g.iter().any(|&j| (values[j] - v).norm() <= tol) {
                g.push(i);
                continue 'outer;
            }
        }
        groups.push(vec![i]);
    }
    groups
}

/// Unit norm, largest component real and positive.
pub fn normalize_phase(mut v: CVec) -> CVec {
    let norm = v.norm();
    if norm > 0.0 {
        v /= Complex64::from(norm);
    }
    let (idx, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 + 1e-12 { (i, z.norm()) } else { acc });
    let z = v[idx];
    if z.norm() > 0.0 {
        let ph = z.conj() / z.norm();
        v *= ph;
    }
    v
}

/// 2-norm condition number.
pub fn cond2(m: &CMat) -> f64 {
    let s = m.clone().singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular matrix".into()))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let h = (m + m.adjoint()) * Complex64::from(0.5);
    let se = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (slot, &k) in order.iter().enumerate() {
        vectors.set_column(slot, &normalize_phase(se.eigenvectors.column(k).into_owned()));
    }
    (values, vectors)
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn symmetric_eig(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let se = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (slot, &k) in order.iter().enumerate() {
        vectors.set_column(slot, &se.eigenvectors.column(k));
    }
    (values, vectors)
}

/// `<a|b>` with the conjugate on the left.
pub fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.dotc(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn residual(m: &CMat, e: &Eigen) -> f64 {
        (0..m.nrows())
            .map(|k| {
                let v = e.vectors.column(k).into_owned();
                (m * &v - &v * e.values[k]).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn eig_of_random_nonhermitian_matrix() {
        let n = 7;
        let m = CMat::from_fn(n, n, |i, j| c(((i * 7 + j * 3) % 11) as f64 - 5.0, ((i + 2 * j) % 5) as f64));
        let e = eig(&m).unwrap();
        assert!(residual(&m, &e) < 1e-10 * m.norm());
        let tr: Complex64 = e.values.iter().sum();
        assert_relative_eq!(tr.re, m.trace().re, epsilon = 1e-9);
        assert_relative_eq!(tr.im, m.trace().im, epsilon = 1e-9);
    }

    #[test]
    fn eig_handles_exact_degeneracy() {
        // cavity coupled to three identical oscillators: two exactly degenerate dark modes
        let mut m = CMat::zeros(4, 4);
        m[(0, 0)] = c(-0.5, -1.0);
        for k in 1..4 {
            m[(k, k)] = c(-0.01, -1.0);
            m[(0, k)] = c(0.0, -0.3);
            m[(k, 0)] = c(0.0, -0.3);
        }
        let e = eig(&m).unwrap();
        assert!(residual(&m, &e) < 1e-10 * m.norm());
        assert!(e.condition < 10.0);
    }

    #[test]
    fn hermitian_eig_sorted() {
        let m = CMat::from_fn(3, 3, |i, j| if i == j { c(i as f64, 0.0) } else { c(0.1, 0.05 * (i as f64 - j as f64)) });
        let (vals, vecs) = hermitian_eig(&m);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let v0 = vecs.column(0).into_owned();
        let r = &m * &v0 - &v0 * Complex64::from(vals[0]);
        assert!(r.norm() < 1e-12);
    }
}
