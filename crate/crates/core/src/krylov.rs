//! Right-preconditioned GMRES without restarts.

/// Result of [`gmres`].
#[derive(Debug, Clone)]
pub struct KrylovSolve {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b − A x‖ / ‖b‖` as estimated by the Arnoldi recurrence.
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` from `x = 0`, building the Krylov space of `A M⁻¹`
/// for at most `max_iters` steps or until the relative residual drops to `tol`.
pub fn gmres<A, P>(mut apply: A, mut precond: P, b: &[f64], tol: f64, max_iters: usize) -> KrylovSolve
where
    A: FnMut(&[f64]) -> Vec<f64>,
    P: FnMut(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let beta = dot(b, b).sqrt();
    if beta == 0.0 {
        return KrylovSolve { x: vec![0.0; n], iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|v| v / beta).collect()];
    // Hessenberg columns after the Givens rotations, i.e. the R factor
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut rotations: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];
    let mut rel = 1.0;
    let mut converged = false;
    for j in 0..max_iters {
        let mut w = apply(&precond(&basis[j]));
        let mut h = Vec::with_capacity(j + 2);
        for v in &basis {
            let hij = dot(&w, v);
            w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hij * vi);
            h.push(hij);
        }
        let wn = dot(&w, &w).sqrt();
        h.push(wn);
        for (i, &(c, s)) in rotations.iter().enumerate() {
            let (a, b) = (h[i], h[i + 1]);
            h[i] = c * a + s * b;
            h[i + 1] = -s * a + c * b;
        }
        let (a, b) = (h[j], h[j + 1]);
        let r = a.hypot(b);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (a / r, b / r) };
        h[j] = r;
        h.truncate(j + 1);
        rotations.push((c, s));
        g.push(-s * g[j]);
        g[j] *= c;
        r_cols.push(h);
        rel = g[j + 1].abs() / beta;
        if rel <= tol || wn == 0.0 {
            converged = rel <= tol;
            break;
        }
        basis.push(w.iter().map(|v| v / wn).collect());
    }
    let k = r_cols.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for (l, yl) in y.iter().enumerate().skip(i + 1) {
            s -= r_cols[l][i] * yl;
        }
        y[i] = s / r_cols[i][i];
    }
    let mut z = vec![0.0; n];
    for (v, yi) in basis.iter().zip(&y) {
        z.iter_mut().zip(v).for_each(|(zi, vi)| *zi += yi * vi);
    }
    KrylovSolve { x: precond(&z), iterations: k, relative_residual: rel, converged }
}
