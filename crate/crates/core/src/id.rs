//! Interpolative decomposition by column-pivoted Householder QR.
//!
//! For `A` (`rows x cols`) and rank `s`, selects `s` columns `J` such that
//! `A ~ A[:, J] [I | P]`, where `P = R11^{-1} R12` maps the remaining
//! columns (in pivot order) onto the selected ones.

use crate::error::{invalid, Result};

/// Dense column-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            for (yi, a) in y.iter_mut().zip(self.col(j)) {
                *yi += a * xj;
            }
        }
        y
    }
}

/// Relative threshold on `|R[i,i]| / |R[0,0]|` below which the leading
/// block is treated as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Column interpolative decomposition `A ~ A[:, skeleton] [I | proj]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolativeDecomposition {
    /// First `s` pivot columns.
    pub skeleton: Vec<usize>,
    /// Remaining columns in pivot order; column `t` of `proj` belongs to
    /// `redundant[t]`.
    pub redundant: Vec<usize>,
    /// `s x (cols - s)`; rows at or beyond `rank` are zero.
    pub proj: Mat,
    /// Numerical rank of the leading `s x s` block.
    pub rank: usize,
    /// `|R[i,i]|` for the `s` pivot steps.
    pub diag: Vec<f64>,
}

impl InterpolativeDecomposition {
    pub fn len(&self) -> usize {
        self.skeleton.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skeleton.is_empty()
    }

    /// Folds column weights onto the skeleton: `w[J] + P w[redundant]`.
    pub fn fold_weights(&self, w: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.skeleton.iter().map(|&j| w[j]).collect();
        for (t, &j) in self.redundant.iter().enumerate() {
            let wj = w[j];
            for (o, p) in out.iter_mut().zip(self.proj.col(t)) {
                *o += p * wj;
            }
        }
        out
    }

    /// Assembles `A[:, J] [I | P]` back in the original column order.
    pub fn reconstruct(&self, a: &Mat) -> Mat {
        let mut out = Mat::zeros(a.rows(), a.cols());
        for &j in &self.skeleton {
            out.col_mut(j).copy_from_slice(a.col(j));
        }
        for (t, &j) in self.redundant.iter().enumerate() {
            let col = out.col_mut(j);
            for (r, &k) in self.skeleton.iter().enumerate() {
                let p = self.proj.get(r, t);
                if p != 0.0 {
                    for (c, v) in col.iter_mut().zip(a.col(k)) {
                        *c += p * v;
                    }
                }
            }
        }
        out
    }
}

/// Rank-`s` interpolative decomposition of `a`.
///
/// Runs `s` steps of Householder QR with column pivoting (largest remaining
/// column norm, ties to the lower column) and solves `R11 P = R12`. If a
/// diagonal entry of `R11` falls below [`SINGULAR_RTOL`] `* |R[0,0]|` the
/// solve is restricted to the leading nonsingular block and the remaining
/// rows of `P` are zero.
pub fn interpolative_decomposition(a: &Mat, s: usize) -> Result<InterpolativeDecomposition> {
    let (m, n) = (a.rows(), a.cols());
    if s == 0 || s > m.min(n) {
        return invalid(format!("rank {s} outside 1..={} for a {m}x{n} matrix", m.min(n)));
    }
    let mut qr = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = (0..n).map(|j| norm2(qr.col(j))).collect();
    let mut ref_norms = norms.clone();
    let mut diag = Vec::with_capacity(s);
    let tol3z = f64::EPSILON.sqrt();

    for i in 0..s {
        let mut p = i;
        for j in i + 1..n {
            if norms[j] > norms[p] {
                p = j;
            }
        }
        if p != i {
            swap_cols(&mut qr, i, p);
            piv.swap(i, p);
            norms.swap(i, p);
            ref_norms.swap(i, p);
        }

        // Householder reflector for qr[i.., i]
        let col = &mut qr.col_mut(i)[i..];
        let alpha = col[0];
        let xnorm = norm2(&col[1..]);
        let (beta, tau) = if xnorm == 0.0 {
            (alpha, 0.0)
        } else {
            let beta = -alpha.signum() * alpha.hypot(xnorm);
            let scale = 1.0 / (alpha - beta);
            for v in col[1..].iter_mut() {
                *v *= scale;
            }
            (beta, (beta - alpha) / beta)
        };
        col[0] = 1.0;
        diag.push(beta.abs());

        if tau != 0.0 {
            let (head, tail) = qr.data.split_at_mut((i + 1) * m);
            let v = &head[i * m + i..(i + 1) * m];
            for c in tail.chunks_exact_mut(m) {
                let c = &mut c[i..];
                let w = tau * v.iter().zip(c.iter()).map(|(a, b)| a * b).sum::<f64>();
                for (x, vv) in c.iter_mut().zip(v) {
                    *x -= w * vv;
                }
            }
        }
        qr.set(i, i, beta);

        // downdate the partial column norms (LAPACK xLAQP2 scheme)
        for j in i + 1..n {
            if norms[j] != 0.0 {
                let r = qr.get(i, j).abs() / norms[j];
                let t = (1.0 - r * r).max(0.0);
                let t2 = t * (norms[j] / ref_norms[j]).powi(2);
                if t2 <= tol3z {
                    norms[j] = norm2(&qr.col(j)[i + 1..]);
                    ref_norms[j] = norms[j];
                } else {
                    norms[j] *= t.sqrt();
                }
            }
        }
    }

    let rank = match diag.first() {
        Some(&d0) if d0 > 0.0 => diag
            .iter()
            .position(|&d| d < SINGULAR_RTOL * d0)
            .unwrap_or(s),
        _ => 0,
    };

    // P[:rank, :] = R11[:rank, :rank]^{-1} R12[:rank, :]
    let mut proj = Mat::zeros(s, n - s);
    for t in 0..n - s {
        let rcol = qr.col(s + t);
        let pcol = proj.col_mut(t);
        for r in (0..rank).rev() {
            let mut acc = rcol[r];
            for q in r + 1..rank {
                acc -= qr.get(r, q) * pcol[q];
            }
            pcol[r] = acc / qr.get(r, r);
        }
    }

    Ok(InterpolativeDecomposition {
        skeleton: piv[..s].to_vec(),
        redundant: piv[s..].to_vec(),
        proj,
        rank,
        diag,
    })
}

fn norm2(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

fn swap_cols(a: &mut Mat, i: usize, j: usize) {
    let m = a.rows;
    let (lo, hi) = (i.min(j), i.max(j));
    let (head, tail) = a.data.split_at_mut(hi * m);
    head[lo * m..(lo + 1) * m].swap_with_slice(&mut tail[..m]);
}
