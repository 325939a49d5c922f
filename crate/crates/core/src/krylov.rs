//! Restarted GMRES with left preconditioning.
//!
//! The monitored residual is ‖M⁻¹(b − Ax)‖, which stays well scaled even when
//! rows of A carry large collocation weights.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Target for ‖M⁻¹(b − Ax)‖ / ‖M⁻¹b‖.
    pub tol: f64,
    pub restart: usize,
    /// Cap on operator applications.
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            restart: 40,
            max_iter: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative preconditioned residual.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` given the actions of `A` and `M⁻¹`.
pub fn gmres<A, P>(mut op: A, mut precond: P, b: &[f64], opts: GmresOptions) -> GmresOutcome
where
    A: FnMut(&[f64]) -> Vec<f64>,
    P: FnMut(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let pb = precond(b);
    let bnorm = norm(&pb);
    if bnorm == 0.0 {
        return GmresOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut iterations = 0;
    let mut r = pb.clone();
    let mut rel;
    loop {
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= opts.tol || iterations >= opts.max_iter {
            break;
        }
        let m = opts.restart.min(opts.max_iter - iterations).max(1);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|x| x / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_done = 0;
        for k in 0..m {
            let mut w = precond(&op(&v[k]));
            iterations += 1;
            // modified Gram–Schmidt, repeated once for orthogonality
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(&w, vi);
                    h[i][k] += c;
                    w.iter_mut().zip(vi).for_each(|(a, b)| *a -= c * b);
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = h[k][k].hypot(h[k + 1][k]);
            if den == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / den;
                sn[k] = h[k + 1][k] / den;
            }
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_done = k + 1;
            if hn == 0.0 || g[k + 1].abs() / bnorm <= opts.tol {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let mut y = vec![0.0; k_done];
        for i in (0..k_done).rev() {
            let s: f64 = (i + 1..k_done).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&v[j]).for_each(|(a, b)| *a += yj * b);
        }
        // true preconditioned residual
        let ax = op(&x);
        let diff: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        r = precond(&diff);
    }
    GmresOutcome {
        x,
        iterations,
        residual: rel,
        converged: rel <= opts.tol,
    }
}
