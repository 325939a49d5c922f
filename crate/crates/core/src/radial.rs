//! Chebyshev collocation in the radial variable of the reference domains.
//!
//! Each domain is split where the Hanzawa cutoff changes formula, so the
//! pulled-back coefficients are polynomial in s on every element and the
//! collocation stays spectrally accurate.

/// Row-major dense real matrix, small and square.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn matmul(&self, other: &Dense) -> Dense {
        let n = self.dim;
        let mut out = Dense::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Dense {
        Dense {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

/// Gauss–Lobatto points x_j = cos(jπ/p), j = 0..=p, and the differentiation
/// matrix, diagonal by the negative-sum rule.
pub fn chebyshev(p: usize) -> (Vec<f64>, Dense) {
    let n = p + 1;
    let x: Vec<f64> = (0..n).map(|j| (std::f64::consts::PI * j as f64 / p as f64).cos()).collect();
    let weight = |j: usize| {
        let c = if j == 0 || j == p { 2.0 } else { 1.0 };
        if j % 2 == 0 {
            c
        } else {
            -c
        }
    };
    let mut d = Dense::zeros(n);
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = weight(i) / weight(j) / (x[i] - x[j]);
                d.data[i * n + j] = v;
                sum += v;
            }
        }
        d.data[i * n + i] = -sum;
    }
    (x, d)
}

/// Chebyshev nodes of one element in the requested direction, with its
/// first-derivative matrix in s.
fn element(lo: f64, hi: f64, m: usize, descending: bool) -> (Vec<f64>, Dense) {
    let (x, d) = chebyshev(m - 1);
    let half = 0.5 * (hi - lo);
    if descending {
        (x.iter().map(|x| lo + half * (1.0 + x)).collect(), d.scaled(1.0 / half))
    } else {
        (x.iter().map(|x| lo + half * (1.0 - x)).collect(), d.scaled(-1.0 / half))
    }
}

/// Radial collocation on a reference domain split into Chebyshev elements.
///
/// Neighbouring elements share an endpoint, which is stored twice; the pair
/// is listed in `joints` and the solver ties the copies together by value
/// and by ∂_s. Derivative matrices are block diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    /// Nodes in the reference radius s; `s[0] = 1` on both domains.
    pub s: Vec<f64>,
    /// (last node of an element, first node of the next).
    pub joints: Vec<(usize, usize)>,
    /// Index 0 acts on even Fourier modes, 1 on odd ones. Only the disk core
    /// element differs between the two.
    d1: [Dense; 2],
    d2: [Dense; 2],
    /// Column range of the element containing each row.
    spans: Vec<(usize, usize)>,
}

fn assemble(blocks: &[(Vec<f64>, [Dense; 2])]) -> RadialGrid {
    let total: usize = blocks.iter().map(|b| b.0.len()).sum();
    let mut s = Vec::with_capacity(total);
    let mut joints = Vec::new();
    let mut d1 = [Dense::zeros(total), Dense::zeros(total)];
    let mut d2 = [Dense::zeros(total), Dense::zeros(total)];
    let mut offset = 0;
    let mut spans = Vec::with_capacity(total);
    for (nodes, ds) in blocks {
        let m = nodes.len();
        spans.extend(std::iter::repeat_n((offset, offset + m), m));
        if offset > 0 {
            joints.push((offset - 1, offset));
        }
        for p in 0..2 {
            let dd = ds[p].matmul(&ds[p]);
            for i in 0..m {
                for j in 0..m {
                    d1[p].data[(offset + i) * total + offset + j] = ds[p].at(i, j);
                    d2[p].data[(offset + i) * total + offset + j] = dd.at(i, j);
                }
            }
        }
        s.extend_from_slice(nodes);
        offset += m;
    }
    RadialGrid { s, joints, d1, d2, spans }
}

/// Splits `m` stored nodes over three elements: (near, transition, far).
fn split(m: usize) -> [usize; 3] {
    let near = (m / 4).max(4);
    let transition = (m / 3).max(5);
    let far = m.saturating_sub(near + transition).max(4);
    [near, transition, far]
}

impl RadialGrid {
    /// Smallest total node count accepted by the constructors.
    pub const MIN_NODES: usize = 13;

    /// Disk grid descending from s = 1 with element breaks at 1 − b for each
    /// breakpoint b. The innermost element is the positive half of a
    /// Chebyshev grid on [−L, L]: Fourier mode n has radial parity (−1)^n, so
    /// mirrored values are folded back with that sign and no node sits at
    /// the centre.
    pub fn disk(m: usize, breaks: [f64; 2]) -> Self {
        assert!(m >= Self::MIN_NODES, "disk grid needs at least {} nodes", Self::MIN_NODES);
        let [near, transition, core] = split(m);
        let (s0, d0) = element(1.0 - breaks[0], 1.0, near, true);
        let (s1, d1) = element(1.0 - breaks[1], 1.0 - breaks[0], transition, true);
        let radius = 1.0 - breaks[1];
        let p = 2 * core - 1;
        let (x, d) = chebyshev(p);
        let fold = |parity: f64| {
            let mut out = Dense::zeros(core);
            for i in 0..core {
                for j in 0..core {
                    out.data[i * core + j] = (d.at(i, j) + parity * d.at(i, p - j)) / radius;
                }
            }
            out
        };
        // folding D and then squaring equals folding D²: D maps parity p to −p
        let (even, odd) = (fold(1.0), fold(-1.0));
        let core_nodes: Vec<f64> = x[..core].iter().map(|x| radius * x).collect();
        let mut g = assemble(&[
            (s0, [d0.clone(), d0]),
            (s1, [d1.clone(), d1]),
            (core_nodes, [even.clone(), odd.clone()]),
        ]);
        // second derivatives on the core: D_{−p}·D_p
        let off = near + transition;
        let total = g.s.len();
        for (pi, (a, b)) in [(&odd, &even), (&even, &odd)].into_iter().enumerate() {
            let dd = a.matmul(b);
            for i in 0..core {
                for j in 0..core {
                    g.d2[pi].data[(off + i) * total + off + j] = dd.at(i, j);
                }
            }
        }
        g
    }

    /// Annulus grid ascending from s = 1 to s = `outer`, with element breaks
    /// at 1 + b for each breakpoint b.
    pub fn annulus(m: usize, outer: f64, breaks: [f64; 2]) -> Self {
        assert!(m >= Self::MIN_NODES, "annulus grid needs at least {} nodes", Self::MIN_NODES);
        assert!(outer > 1.0 + breaks[1], "outer radius inside the cutoff collar");
        let [near, transition, far] = split(m);
        let (s0, d0) = element(1.0, 1.0 + breaks[0], near, false);
        let (s1, d1) = element(1.0 + breaks[0], 1.0 + breaks[1], transition, false);
        let (s2, d2) = element(1.0 + breaks[1], outer, far, false);
        assemble(&[(s0, [d0.clone(), d0]), (s1, [d1.clone(), d1]), (s2, [d2.clone(), d2])])
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// ∂_s acting on the radial profile of Fourier mode `n`.
    pub fn d1(&self, n: i64) -> &Dense {
        &self.d1[(n.rem_euclid(2)) as usize]
    }

    pub fn d2(&self, n: i64) -> &Dense {
        &self.d2[(n.rem_euclid(2)) as usize]
    }

    /// Applies ∂_s and ∂_s² for Fourier mode `n` to a radial profile,
    /// writing into `first` and `second`.
    pub fn apply<T>(&self, n: i64, f: &[T], first: &mut [T], second: &mut [T])
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let p = n.rem_euclid(2) as usize;
        let (d1, d2) = (&self.d1[p], &self.d2[p]);
        for (j, &(lo, hi)) in self.spans.iter().enumerate() {
            let (r1, r2) = (&d1.row(j)[lo..hi], &d2.row(j)[lo..hi]);
            let mut a = T::default();
            let mut b = T::default();
            for ((x, u), v) in f[lo..hi].iter().zip(r1).zip(r2) {
                a = a + *x * *u;
                b = b + *x * *v;
            }
            first[j] = a;
            second[j] = b;
        }
    }

    /// What row `j` of a collocation system enforces, boundaries aside.
    pub fn role(&self, j: usize) -> RowRole {
        for &(l, r) in &self.joints {
            if j == l {
                return RowRole::Continuity(l, r);
            }
            if j == r {
                return RowRole::Slope(l, r);
            }
        }
        RowRole::Equation
    }
}

/// Row roles of the radial system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRole {
    /// Collocated differential equation.
    Equation,
    /// Q[l] = Q[r] at a shared node.
    Continuity(usize, usize),
    /// ∂_sQ[l] = ∂_sQ[r] at a shared node.
    Slope(usize, usize),
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chebyshev_differentiates_polynomials_exactly() {
        let (x, d) = chebyshev(8);
        let f: Vec<f64> = x.iter().map(|x| x.powi(5) - 2.0 * x * x).collect();
        for i in 0..x.len() {
            let df: f64 = d.row(i).iter().zip(&f).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(df, 5.0 * x[i].powi(4) - 4.0 * x[i], epsilon = 1e-12);
        }
    }

    const BREAKS: [f64; 2] = [0.125, 0.375];

    fn apply(m: &Dense, f: &[f64], i: usize) -> f64 {
        m.row(i).iter().zip(f).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn disk_grid_layout_and_parity() {
        let g = RadialGrid::disk(40, BREAKS);
        assert_eq!(g.s[0], 1.0);
        assert!(g.s.iter().all(|&s| s > 0.0));
        assert_eq!(g.joints.len(), 2);
        for &(l, r) in &g.joints {
            assert_abs_diff_eq!(g.s[l], g.s[r], epsilon = 1e-15);
        }
        for (n, pow) in [(3i64, 3), (4, 4), (1, 1), (2, 2), (0, 6)] {
            let f: Vec<f64> = g.s.iter().map(|s| s.powi(pow)).collect();
            for i in 0..g.len() {
                let s = g.s[i];
                assert_abs_diff_eq!(apply(g.d1(n), &f, i), pow as f64 * s.powi(pow - 1), epsilon = 1e-11);
                assert_abs_diff_eq!(apply(g.d2(n), &f, i), (pow * (pow - 1)) as f64 * s.powi((pow - 2).max(0)), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn annulus_derivatives() {
        let g = RadialGrid::annulus(48, 2.0, BREAKS);
        assert_eq!(g.s[0], 1.0);
        assert_abs_diff_eq!(*g.s.last().unwrap(), 2.0, epsilon = 1e-15);
        let f: Vec<f64> = g.s.iter().map(|s| 1.0 / s).collect();
        for i in 0..g.len() {
            let s = g.s[i];
            assert_abs_diff_eq!(apply(g.d1(0), &f, i), -1.0 / (s * s), epsilon = 1e-9);
            assert_abs_diff_eq!(apply(g.d2(5), &f, i), 2.0 / (s * s * s), epsilon = 1e-7);
        }
        assert_eq!(g.role(0), RowRole::Equation);
        let (l, r) = g.joints[0];
        assert_eq!(g.role(l), RowRole::Continuity(l, r));
        assert_eq!(g.role(r), RowRole::Slope(l, r));
    }
}
