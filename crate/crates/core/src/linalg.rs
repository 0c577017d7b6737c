//! Small dense linear-algebra helpers shared by the basis and solver modules.

use nalgebra::DMatrix;

/// Orthonormal basis for the orthogonal complement of the column space of the
/// `p x m` matrix `a` (`p >= m`), i.e. the null space of `a^T`.
///
/// Computed as the trailing `p - m` columns of a full Householder QR of `a`.
/// Deterministic for fixed input; rank deficiency of `a` must be screened by
/// the caller (the returned columns are orthonormal regardless, but only span
/// the intended complement when `a` has full column rank).
pub fn null_space_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, m) = a.shape();
    assert!(p >= m, "null_space_basis needs p >= m, got {p} x {m}");

    // Householder vectors, each stored as a full-length p-vector that is zero
    // above its pivot row.
    let mut r = a.clone();
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let mut v = vec![0.0; p];
        let mut norm2 = 0.0;
        for i in k..p {
            v[i] = r[(i, k)];
            norm2 += v[i] * v[i];
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            vs.push(vec![0.0; p]);
            continue;
        }
        let alpha = if v[k] >= 0.0 { -norm } else { norm };
        v[k] -= alpha;
        let vnorm2: f64 = v[k..].iter().map(|x| x * x).sum();
        if vnorm2 <= f64::MIN_POSITIVE {
            vs.push(vec![0.0; p]);
            continue;
        }
        // Apply H = I - 2 v v^T / (v^T v) to the trailing block of R.
        for j in k..m {
            let mut dot = 0.0;
            for i in k..p {
                dot += v[i] * r[(i, j)];
            }
            let s = 2.0 * dot / vnorm2;
            for i in k..p {
                r[(i, j)] -= s * v[i];
            }
        }
        vs.push(v);
    }

    // Accumulate Q = H_0 H_1 ... H_{m-1} applied to the identity, keeping only
    // the trailing p - m columns.
    let mut q = DMatrix::<f64>::identity(p, p);
    for k in (0..m).rev() {
        let v = &vs[k];
        let vnorm2: f64 = v[k..].iter().map(|x| x * x).sum();
        if vnorm2 <= f64::MIN_POSITIVE {
            continue;
        }
        for j in 0..p {
            let mut dot = 0.0;
            for i in k..p {
                dot += v[i] * q[(i, j)];
            }
            let s = 2.0 * dot / vnorm2;
            for i in k..p {
                q[(i, j)] -= s * v[i];
            }
        }
    }
    q.columns(m, p - m).into_owned()
}
