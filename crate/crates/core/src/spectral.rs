//! Matrix-level spectral helpers: Hermitian eigendecomposition, singular
//! values, polar parts and functional calculus on single `n×n` blocks.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type Mat = DMatrix<C64>;

pub fn c(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

/// `(m + m*)/2`.
pub fn hermitian_part(m: &Mat) -> Mat {
    (m + m.adjoint()) * c(0.5)
}

/// Largest absolute entry of `m - m*`.
pub fn hermitian_defect(m: &Mat) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of the Hermitian
/// part of `m`.
pub fn herm_eig(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    if n == 1 {
        return (vec![m[(0, 0)].re], Mat::identity(1, 1));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Mat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn herm_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)].re];
    }
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `V f(Λ) V*` for a Hermitian matrix with eigenpairs `(values, vectors)`.
pub fn rebuild(values: &[f64], vectors: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let d = DVector::from_iterator(values.len(), values.iter().map(|&l| c(f(l))));
    let scaled = vectors * Mat::from_diagonal(&d);
    scaled * vectors.adjoint()
}

/// Singular values in descending order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 1 && m.ncols() == 1 {
        return vec![m[(0, 0)].norm()];
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value.
pub fn op_norm(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Thin SVD `m = U Σ V*` of a square matrix.
pub fn svd(m: &Mat) -> (Mat, Vec<f64>, Mat) {
    let n = m.nrows();
    if n == 1 {
        let z = m[(0, 0)];
        let r = z.norm();
        let phase = if r > 0.0 { z / r } else { c(1.0) };
        return (
            Mat::from_element(1, 1, phase),
            vec![r],
            Mat::identity(1, 1),
        );
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V*");
    (u, svd.singular_values.iter().copied().collect(), v_t.adjoint())
}

/// `|m|^alpha = (m* m)^{alpha/2}` through the SVD. Zero singular values
/// map to zero for every `alpha > 0`.
pub fn abs_power(m: &Mat, alpha: f64) -> Mat {
    let (_, s, v) = svd(m);
    rebuild(&s, &v, |x| if x > 0.0 { x.powf(alpha) } else { 0.0 })
}

/// Polar factors `(u, |m|)` with `m = u |m|`, `u` unitary.
pub fn polar(m: &Mat) -> (Mat, Mat) {
    let (u, s, v) = svd(m);
    let w = &u * v.adjoint();
    (w, rebuild(&s, &v, |x| x))
}

/// Orthonormalize the columns of a full-column-rank `n×r` frame.
pub fn orthonormalize(frame: &Mat) -> Mat {
    let r = frame.ncols();
    if r == 0 {
        return frame.clone();
    }
    let q = frame.clone().qr().q();
    q.columns(0, r).into_owned()
}

/// The projection `F F*` onto the column span of an orthonormal frame.
pub fn frame_projection(frame: &Mat) -> Mat {
    frame * frame.adjoint()
}
