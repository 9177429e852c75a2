//! Small dense Hermitian eigensolver.
//!
//! Cyclic Jacobi iteration with complex rotations. Slower than a
//! tridiagonalization approach but accurate to machine precision even for
//! degenerate spectra (rank-1 projectors, repeated eigenvalues), which the
//! fidelity and entanglement metrics rely on.

use nalgebra::{DMatrix, Matrix4};

use crate::qubit::{c64, C64};

/// Eigenvalues (unsorted) and orthonormal eigenvector columns of a
/// Hermitian matrix. The strictly lower triangle is ignored.
pub(crate) fn jacobi_hermitian(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    // Work on the Hermitized copy so tiny asymmetries cannot bias sweeps.
    for i in 0..n {
        m[(i, i)] = c64(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * c64(0.5, 0.0);
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let mut v = DMatrix::<C64>::identity(n, n);
    let norm = m.norm().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * norm;

    for _sweep in 0..60 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }

    let eigenvalues = (0..n).map(|i| m[(i, i)].re).collect();
    (eigenvalues, v)
}

/// One complex Jacobi rotation zeroing m[(p, q)].
fn rotate(m: &mut DMatrix<C64>, v: &mut DMatrix<C64>, p: usize, q: usize) {
    let g = m[(p, q)];
    let mag = g.norm();
    if mag == 0.0 {
        return;
    }
    // Absorb the phase into column p, then apply the real Jacobi rotation
    // for [[alpha, |g|], [|g|, beta]].
    let phase = g / c64(mag, 0.0);
    let alpha = m[(p, p)].re;
    let beta = m[(q, q)].re;
    let tau = (beta - alpha) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // J restricted to (p, q): [[c * phase, s * phase], [-s, c]].
    let jpp = phase * c64(c, 0.0);
    let jpq = phase * c64(s, 0.0);
    let jqp = c64(-s, 0.0);
    let jqq = c64(c, 0.0);

    let n = m.nrows();
    // B = M J (columns p and q change).
    for i in 0..n {
        let mp = m[(i, p)];
        let mq = m[(i, q)];
        m[(i, p)] = mp * jpp + mq * jqp;
        m[(i, q)] = mp * jpq + mq * jqq;
    }
    // M = J^H B (rows p and q change).
    for j in 0..n {
        let bp = m[(p, j)];
        let bq = m[(q, j)];
        m[(p, j)] = jpp.conj() * bp + jqp.conj() * bq;
        m[(q, j)] = jpq.conj() * bp + jqq.conj() * bq;
    }
    // Clean up the zeroed pair and rounding on the diagonal.
    m[(p, q)] = c64(0.0, 0.0);
    m[(q, p)] = c64(0.0, 0.0);
    m[(p, p)] = c64(m[(p, p)].re, 0.0);
    m[(q, q)] = c64(m[(q, q)].re, 0.0);

    // Accumulate V = V J.
    for i in 0..n {
        let vp = v[(i, p)];
        let vq = v[(i, q)];
        v[(i, p)] = vp * jpp + vq * jqp;
        v[(i, q)] = vp * jpq + vq * jqq;
    }
}

/// [`jacobi_hermitian`] specialized to two-qubit operators.
pub(crate) fn jacobi_hermitian4(a: &Matrix4<C64>) -> ([f64; 4], Matrix4<C64>) {
    let dyn_a = DMatrix::<C64>::from_fn(4, 4, |i, j| a[(i, j)]);
    let (vals, vecs) = jacobi_hermitian(&dyn_a);
    let mut out_vals = [0.0; 4];
    out_vals.copy_from_slice(&vals);
    (out_vals, Matrix4::from_fn(|i, j| vecs[(i, j)]))
}
