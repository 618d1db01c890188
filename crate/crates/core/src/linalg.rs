//! Dense complex linear algebra used by the generator and renorming machinery:
//! LU solves, scaling-and-squaring matrix exponential, complex Schur
//! decomposition, triangular matrix functions and a Lyapunov solver.
//!
//! Everything here targets desk scale (d <= 64); the algorithms are the
//! textbook O(d^3) ones with no blocking.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

const ZERO: C64 = Complex64::new(0.0, 0.0);
const ONE: C64 = Complex64::new(1.0, 0.0);

pub fn identity(n: usize) -> CMat {
    let mut m = CMat::from_elem((n, n), ZERO);
    for i in 0..n {
        m[[i, i]] = ONE;
    }
    m
}

/// Maximum absolute column sum.
pub fn norm_1(a: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = (0..a.nrows()).map(|i| a[[i, j]].norm()).sum();
        best = best.max(s);
    }
    best
}

pub fn matvec(a: &CMat, x: &CVec) -> Result<CVec> {
    if a.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: x.len(),
        });
    }
    Ok(a.dot(x))
}

pub fn adjoint(a: &CMat) -> CMat {
    let mut b = CMat::from_elem((a.ncols(), a.nrows()), ZERO);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            b[[j, i]] = a[[i, j]].conj();
        }
    }
    b
}

// ---------------------------------------------------------------------------
// LU with partial pivoting
// ---------------------------------------------------------------------------

pub struct Lu {
    lu: CMat,
    piv: Vec<usize>,
}

pub fn lu_factor(a: &CMat) -> Result<Lu> {
    let n = a.nrows();
    let mut lu = a.clone();
    let mut piv = Vec::with_capacity(n);
    for k in 0..n {
        let mut p = k;
        let mut best = lu[[k, k]].norm();
        for i in k + 1..n {
            let v = lu[[i, k]].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(Error::Numerical("singular matrix in LU".into()));
        }
        piv.push(p);
        if p != k {
            for j in 0..n {
                let tmp = lu[[k, j]];
                lu[[k, j]] = lu[[p, j]];
                lu[[p, j]] = tmp;
            }
        }
        let pivot = lu[[k, k]];
        for i in k + 1..n {
            let m = lu[[i, k]] / pivot;
            lu[[i, k]] = m;
            for j in k + 1..n {
                let sub = m * lu[[k, j]];
                lu[[i, j]] -= sub;
            }
        }
    }
    Ok(Lu { lu, piv })
}

impl Lu {
    pub fn solve_vec(&self, b: &CVec) -> CVec {
        let n = self.lu.nrows();
        let mut x = b.clone();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            for i in k + 1..n {
                let sub = self.lu[[i, k]] * x[k];
                x[i] -= sub;
            }
        }
        for k in (0..n).rev() {
            x[k] /= self.lu[[k, k]];
            for i in 0..k {
                let sub = self.lu[[i, k]] * x[k];
                x[i] -= sub;
            }
        }
        x
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        let n = b.nrows();
        let mut out = CMat::from_elem((n, b.ncols()), ZERO);
        for j in 0..b.ncols() {
            let col = CVec::from_iter((0..n).map(|i| b[[i, j]]));
            let x = self.solve_vec(&col);
            for i in 0..n {
                out[[i, j]] = x[i];
            }
        }
        out
    }
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    let lu = lu_factor(a)?;
    Ok(lu.solve_mat(&identity(a.nrows())))
}

// ---------------------------------------------------------------------------
// Matrix exponential (Pade 13 with scaling and squaring)
// ---------------------------------------------------------------------------

pub fn expm(a: &CMat) -> Result<CMat> {
    const THETA13: f64 = 5.371920351148152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let nrm = norm_1(a);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scale = C64::new((0.5f64).powi(s as i32), 0.0);
    let a1 = a.mapv(|v| v * scale);
    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let id = identity(n);
    let w1 = a6.mapv(|v| v * B[13]) + a4.mapv(|v| v * B[11]) + a2.mapv(|v| v * B[9]);
    let w2 = a6.dot(&w1)
        + a6.mapv(|v| v * B[7])
        + a4.mapv(|v| v * B[5])
        + a2.mapv(|v| v * B[3])
        + id.mapv(|v| v * B[1]);
    let u = a1.dot(&w2);
    let z1 = a6.mapv(|v| v * B[12]) + a4.mapv(|v| v * B[10]) + a2.mapv(|v| v * B[8]);
    let v = a6.dot(&z1)
        + a6.mapv(|v| v * B[6])
        + a4.mapv(|v| v * B[4])
        + a2.mapv(|v| v * B[2])
        + id.mapv(|v| v * B[0]);
    let lhs = &v - &u;
    let rhs = &v + &u;
    let lu = lu_factor(&lhs)?;
    let mut r = lu.solve_mat(&rhs);
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Complex Schur decomposition (Hessenberg + shifted QR)
// ---------------------------------------------------------------------------

pub struct Schur {
    /// Unitary factor, `a = u t u^*`.
    pub u: CMat,
    /// Upper triangular factor.
    pub t: CMat,
}

fn hessenberg(a: &CMat) -> (CMat, CMat) {
    let n = a.nrows();
    let mut h = a.clone();
    let mut q = identity(n);
    for k in 0..n.saturating_sub(2) {
        // Householder vector for column k below the subdiagonal
        let norm_x: f64 = (k + 1..n).map(|i| h[[i, k]].norm_sqr()).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let x0 = h[[k + 1, k]];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -phase * norm_x;
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[[i, k]]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // h <- H h, rows k+1..n
        for j in 0..n {
            let mut dot = ZERO;
            for (idx, i) in (k + 1..n).enumerate() {
                dot += v[idx].conj() * h[[i, j]];
            }
            dot *= beta;
            for (idx, i) in (k + 1..n).enumerate() {
                let sub = v[idx] * dot;
                h[[i, j]] -= sub;
            }
        }
        // h <- h H, cols k+1..n
        for i in 0..n {
            let mut dot = ZERO;
            for (idx, j) in (k + 1..n).enumerate() {
                dot += h[[i, j]] * v[idx];
            }
            dot *= beta;
            for (idx, j) in (k + 1..n).enumerate() {
                let sub = dot * v[idx].conj();
                h[[i, j]] -= sub;
            }
        }
        // q <- q H
        for i in 0..n {
            let mut dot = ZERO;
            for (idx, j) in (k + 1..n).enumerate() {
                dot += q[[i, j]] * v[idx];
            }
            dot *= beta;
            for (idx, j) in (k + 1..n).enumerate() {
                let sub = dot * v[idx].conj();
                q[[i, j]] -= sub;
            }
        }
    }
    (q, h)
}

fn givens(a: C64, b: C64) -> (f64, C64) {
    let na = a.norm();
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if r == 0.0 || b.norm() == 0.0 {
        return (1.0, ZERO);
    }
    if na == 0.0 {
        return (0.0, ONE);
    }
    let c = na / r;
    let s = (a / na) * b.conj() / r;
    (c, s)
}

fn rot_rows(m: &mut CMat, i: usize, j: usize, c: f64, s: C64) {
    for col in 0..m.ncols() {
        let a = m[[i, col]];
        let b = m[[j, col]];
        m[[i, col]] = a * c + s * b;
        m[[j, col]] = -s.conj() * a + b * c;
    }
}

fn rot_cols(m: &mut CMat, i: usize, j: usize, c: f64, s: C64) {
    for row in 0..m.nrows() {
        let a = m[[row, i]];
        let b = m[[row, j]];
        m[[row, i]] = a * c + s.conj() * b;
        m[[row, j]] = -s * a + b * c;
    }
}

fn wilkinson_shift(h: &CMat, m: usize) -> C64 {
    let a = h[[m - 2, m - 2]];
    let b = h[[m - 2, m - 1]];
    let c = h[[m - 1, m - 2]];
    let d = h[[m - 1, m - 1]];
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - det * 4.0).sqrt();
    let l1 = (tr + disc) * 0.5;
    let l2 = (tr - disc) * 0.5;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

pub fn schur(a: &CMat) -> Result<Schur> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::invalid("schur requires a square matrix"));
    }
    if n == 0 {
        return Ok(Schur {
            u: identity(0),
            t: identity(0),
        });
    }
    let (mut u, mut h) = hessenberg(a);
    let scale = norm_1(a).max(1e-300);
    let tol = 1e-15 * scale.max(1.0);
    let mut m = n;
    let mut iter = 0usize;
    while m > 1 {
        for i in 0..m - 1 {
            if h[[i + 1, i]].norm() <= 1e-15 * (h[[i, i]].norm() + h[[i + 1, i + 1]].norm()) + tol * 1e-2
            {
                h[[i + 1, i]] = ZERO;
            }
        }
        if h[[m - 1, m - 2]] == ZERO {
            m -= 1;
            iter = 0;
            continue;
        }
        let mut l = m - 1;
        while l > 0 && h[[l, l - 1]] != ZERO {
            l -= 1;
        }
        iter += 1;
        if iter > 60 * n {
            return Err(Error::Numerical("QR iteration failed to converge".into()));
        }
        let sigma = if iter % 25 == 0 {
            // exceptional shift to break symmetry stalls
            h[[m - 1, m - 2]] * 1.5 + h[[m - 1, m - 1]]
        } else {
            wilkinson_shift(&h, m)
        };
        // implicit single-shift bulge chase on block l..m
        let mut x = h[[l, l]] - sigma;
        let mut y = h[[l + 1, l]];
        for k in l..m - 1 {
            let (c, s) = givens(x, y);
            rot_rows(&mut h, k, k + 1, c, s);
            rot_cols(&mut h, k, k + 1, c, s);
            rot_cols(&mut u, k, k + 1, c, s);
            if k + 2 < m {
                x = h[[k + 1, k]];
                y = h[[k + 2, k]];
            }
        }
    }
    // clean strictly lower part
    for i in 0..n {
        for j in 0..i {
            h[[i, j]] = ZERO;
        }
    }
    Ok(Schur { u, t: h })
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    let s = schur(a)?;
    Ok((0..a.nrows()).map(|i| s.t[[i, i]]).collect())
}

// ---------------------------------------------------------------------------
// Triangular matrix functions
// ---------------------------------------------------------------------------

/// Square root of an upper triangular matrix with spectrum away from the
/// closed negative axis (Bjorck--Hammarling recurrence). Handles repeated
/// eigenvalues, including Jordan structure.
pub fn triangular_sqrt(t: &CMat) -> Result<CMat> {
    let n = t.nrows();
    let mut s = CMat::from_elem((n, n), ZERO);
    for i in 0..n {
        let d = t[[i, i]];
        if d.re <= 0.0 && d.im.abs() < 1e-14 {
            return Err(Error::DefectiveMatrix(
                "eigenvalue on the closed negative axis in sqrt".into(),
            ));
        }
        s[[i, i]] = d.sqrt();
    }
    for p in 1..n {
        for i in 0..n - p {
            let j = i + p;
            let mut acc = t[[i, j]];
            for k in i + 1..j {
                acc -= s[[i, k]] * s[[k, j]];
            }
            let den = s[[i, i]] + s[[j, j]];
            if den.norm() < 1e-300 {
                return Err(Error::DefectiveMatrix("vanishing denominator in sqrt".into()));
            }
            s[[i, j]] = acc / den;
        }
    }
    Ok(s)
}

/// Parlett recurrence for `f(t)` with `t` upper triangular. Requires the
/// diagonal entries to be separated by more than `defect_tol`; nearly
/// confluent eigenvalues with coupling are reported as defective.
pub fn triangular_function<F: Fn(C64) -> C64>(t: &CMat, f: F, defect_tol: f64) -> Result<CMat> {
    let n = t.nrows();
    let mut g = CMat::from_elem((n, n), ZERO);
    for i in 0..n {
        g[[i, i]] = f(t[[i, i]]);
    }
    let scale = norm_1(t).max(1.0);
    for p in 1..n {
        for i in 0..n - p {
            let j = i + p;
            let mut num = t[[i, j]] * (g[[i, i]] - g[[j, j]]);
            for k in i + 1..j {
                num += g[[i, k]] * t[[k, j]] - t[[i, k]] * g[[k, j]];
            }
            let den = t[[i, i]] - t[[j, j]];
            if den.norm() < defect_tol {
                if num.norm() < defect_tol * scale {
                    g[[i, j]] = ZERO;
                } else {
                    return Err(Error::DefectiveMatrix(format!(
                        "nearly confluent eigenvalues {} and {} with coupling",
                        t[[i, i]],
                        t[[j, j]]
                    )));
                }
            } else {
                g[[i, j]] = num / den;
            }
        }
    }
    Ok(g)
}

/// `f(a)` for a general square matrix via complex Schur plus a triangular
/// kernel supplied by `tri`.
pub fn schur_function(
    a: &CMat,
    tri: impl Fn(&CMat) -> Result<CMat>,
) -> Result<CMat> {
    let dec = schur(a)?;
    let ft = tri(&dec.t)?;
    let uh = adjoint(&dec.u);
    Ok(dec.u.dot(&ft).dot(&uh))
}

// ---------------------------------------------------------------------------
// Lyapunov solver: a^* q + q a = -c  (Bartels--Stewart on complex Schur)
// ---------------------------------------------------------------------------

pub fn lyapunov(a: &CMat, c: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let dec = schur(a)?;
    let uh = adjoint(&dec.u);
    let r = uh.dot(c).dot(&dec.u);
    let t = &dec.t;
    let mut x = CMat::from_elem((n, n), ZERO);
    // (t^* x)_{ij} + (x t)_{ij} = -r_{ij}; solve column by column, row by row
    for j in 0..n {
        for i in 0..n {
            let mut acc = -r[[i, j]];
            for k in 0..i {
                acc -= t[[k, i]].conj() * x[[k, j]];
            }
            for k in 0..j {
                acc -= x[[i, k]] * t[[k, j]];
            }
            let den = t[[i, i]].conj() + t[[j, j]];
            if den.norm() < 1e-300 {
                return Err(Error::Numerical(
                    "Lyapunov operator singular (eigenvalue pair summing to zero)".into(),
                ));
            }
            x[[i, j]] = acc / den;
        }
    }
    Ok(dec.u.dot(&x).dot(&uh))
}

// ---------------------------------------------------------------------------
// Norm and eigen estimates
// ---------------------------------------------------------------------------

/// Spectral norm via power iteration on `a^* a` with a fixed deterministic
/// start vector.
pub fn op_norm_2(a: &CMat) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let ah = adjoint(a);
    let mut v = CVec::from_iter((0..n).map(|i| {
        // deterministic quasi-random start
        let x = ((i as f64) * 0.7548776662466927 + 0.1).fract() - 0.5;
        C64::new(1.0 + x, 0.3 * x)
    }));
    let mut lam = 0.0f64;
    for _ in 0..300 {
        let w = a.dot(&v);
        let bv = ah.dot(&w);
        let nrm = bv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        lam = nrm;
        v = bv.mapv(|z| z / nrm);
    }
    lam.sqrt()
}

/// Largest eigenvalue and eigenvector of a Hermitian matrix, via shifted
/// power iteration (Gershgorin shift makes the spectrum nonnegative).
pub fn hermitian_top_eig(h: &CMat) -> (f64, CVec) {
    let n = h.nrows();
    let mut shift = f64::INFINITY;
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| h[[i, j]].norm()).sum();
        shift = shift.min(h[[i, i]].re - off);
    }
    let shift = shift - 1.0;
    let mut m = h.clone();
    for i in 0..n {
        m[[i, i]] -= C64::new(shift, 0.0);
    }
    let mut v = CVec::from_iter((0..n).map(|i| {
        let x = ((i as f64) * 0.381966011 + 0.2).fract();
        C64::new(1.0 + x, 0.0)
    }));
    let nrm0 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v = v.mapv(|z| z / nrm0);
    let mut mu = 0.0;
    for _ in 0..500 {
        let w = m.dot(&v);
        mu = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if mu == 0.0 {
            break;
        }
        v = w.mapv(|z| z / mu);
    }
    (mu + shift, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cm(rows: &[&[(f64, f64)]]) -> CMat {
        let n = rows.len();
        let m = rows[0].len();
        let mut a = CMat::from_elem((n, m), ZERO);
        for i in 0..n {
            for j in 0..m {
                a[[i, j]] = C64::new(rows[i][j].0, rows[i][j].1);
            }
        }
        a
    }

    #[test]
    fn expm_jordan_block_closed_form() {
        // exp([[-1,1],[0,-1]]) = e^{-1} [[1,1],[0,1]]
        let a = cm(&[&[(-1.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]]);
        let e = expm(&a).unwrap();
        let em1 = (-1.0f64).exp();
        assert_abs_diff_eq!(e[[0, 0]].re, em1, epsilon = 1e-14);
        assert_abs_diff_eq!(e[[0, 1]].re, em1, epsilon = 1e-14);
        assert_abs_diff_eq!(e[[1, 0]].re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[[1, 1]].re, em1, epsilon = 1e-14);
    }

    #[test]
    fn schur_reconstructs_and_is_triangular() {
        // fixed pseudo-random complex matrix
        let n = 12;
        let mut a = CMat::from_elem((n, n), ZERO);
        let mut s = 0.5f64;
        for i in 0..n {
            for j in 0..n {
                s = (s * 997.0 + 0.1234).fract();
                let re = s - 0.5;
                s = (s * 997.0 + 0.1234).fract();
                a[[i, j]] = C64::new(re, s - 0.5);
            }
        }
        let dec = schur(&a).unwrap();
        let uh = adjoint(&dec.u);
        let back = dec.u.dot(&dec.t).dot(&uh);
        let err = norm_1(&(&back - &a));
        assert!(err < 1e-10 * norm_1(&a).max(1.0), "reconstruction error {err}");
        // unitarity
        let uu = uh.dot(&dec.u);
        let id = identity(n);
        assert!(norm_1(&(&uu - &id)) < 1e-12);
    }

    #[test]
    fn triangular_sqrt_of_jordan_block() {
        // sqrt([[1,-1],[0,1]]) = [[1,-1/2],[0,1]]
        let t = cm(&[&[(1.0, 0.0), (-1.0, 0.0)], &[(0.0, 0.0), (1.0, 0.0)]]);
        let s = triangular_sqrt(&t).unwrap();
        assert_abs_diff_eq!(s[[0, 0]].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[[0, 1]].re, -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s[[1, 1]].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_identity_case() {
        // a = -I, c = I  =>  q = I/2
        let a = cm(&[&[(-1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]]);
        let c = identity(2);
        let q = lyapunov(&a, &c).unwrap();
        assert_abs_diff_eq!(q[[0, 0]].re, 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(q[[1, 1]].re, 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(q[[0, 1]].norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn op_norm_matches_known_value() {
        let a = cm(&[&[(3.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (2.0, 0.0)]]);
        assert_abs_diff_eq!(op_norm_2(&a), 3.0, epsilon = 1e-10);
    }
}
