//! Lowest eigenpairs of the pencil `K u = λ M u` with diagonal `M`.
//!
//! Blocked inverse iteration: every sweep solves `K y = M x` for the
//! unconverged columns by Jacobi-preconditioned CG, M-orthonormalizes the
//! block and takes a Rayleigh–Ritz step. Leading columns that meet the
//! tolerance are kept in the Ritz projection but no longer re-solved.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::SparseOperator;

pub const DENSE_LIMIT: usize = 400;
pub const CLUSTER_GAP: f64 = 1e-6;
const MAX_SWEEPS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub lambdas: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Index ranges `start..end` of numerically degenerate clusters (length ≥ 2).
    pub clusters: Vec<(usize, usize)>,
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Keeps the first `k` pairs.
    pub fn truncated(&self, k: usize) -> EigenBasis {
        let k = k.min(self.len());
        EigenBasis {
            lambdas: self.lambdas[..k].to_vec(),
            vectors: self.vectors[..k].to_vec(),
            residuals: self.residuals[..k].to_vec(),
            iterations: self.iterations,
            clusters: find_clusters(&self.lambdas[..k]),
        }
    }
}

pub fn find_clusters(lambdas: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=lambdas.len() {
        let split = i == lambdas.len()
            || lambdas[i] - lambdas[i - 1] >= CLUSTER_GAP * lambdas[i].abs();
        if split {
            if i - start >= 2 {
                out.push((start, i));
            }
            start = i;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn m_dot(m: &[f64], a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(m).map(|((x, y), w)| x * y * w).sum()
}

fn diag_of(m: &SparseOperator) -> Result<Vec<f64>> {
    if !m.is_diagonal() {
        return Err(Error::BadParams("mass operator must be diagonal".into()));
    }
    let d = m.diagonal();
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::BadParams("mass operator must be positive".into()));
    }
    Ok(d)
}

fn check_symmetric(k: &SparseOperator) -> Result<()> {
    let asym = k.max_asymmetry();
    if asym > 1e-12 * k.max_abs() {
        return Err(Error::BadK(asym));
    }
    Ok(())
}

/// Relative residual `‖Ku − λMu‖_{M⁻¹} / (λ ‖u‖_M)`.
fn relative_residual(k: &SparseOperator, m: &[f64], lambda: f64, u: &[f64]) -> Result<f64> {
    let ku = k.apply(u)?;
    let r2: f64 = ku
        .iter()
        .zip(u)
        .zip(m)
        .map(|((a, x), w)| (a - lambda * w * x).powi(2) / w)
        .sum();
    let un = m_dot(m, u, u).sqrt();
    Ok(r2.sqrt() / (lambda.abs() * un))
}

/// Recomputes `maxᵢ ‖Kuᵢ − λᵢMuᵢ‖ / (λᵢ‖uᵢ‖_M)` from scratch.
pub fn residual_check(k: &SparseOperator, m: &SparseOperator, basis: &EigenBasis) -> Result<f64> {
    if m.dim() != k.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            got: m.dim(),
        });
    }
    let md = diag_of(m)?;
    let mut worst: f64 = 0.0;
    for (lam, u) in basis.lambdas.iter().zip(&basis.vectors) {
        if u.len() != k.dim() {
            return Err(Error::DimensionMismatch {
                expected: k.dim(),
                got: u.len(),
            });
        }
        worst = worst.max(relative_residual(k, &md, *lam, u)?);
    }
    Ok(worst)
}

/// Preconditioned CG for `K y = rhs`, warm-started from `y`. Returns the iteration count.
pub fn pcg(k: &SparseOperator, rhs: &[f64], y: &mut [f64], rtol: f64, max_iter: usize) -> Result<usize> {
    let n = k.dim();
    let dinv: Vec<f64> = k.diagonal().iter().map(|d| 1.0 / d).collect();
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        y.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut r = k.apply(y)?;
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= rtol * bnorm {
            return Ok(it);
        }
        k.apply_into(&p, &mut q)?;
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::NoConvergence(format!(
                "CG breakdown: pᵀKp = {pq:e} (operator not positive definite)"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            y[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(max_iter)
}

/// Modified Gram–Schmidt in the M inner product, applied twice. Columns that
/// collapse are replaced by fresh random vectors.
fn m_orthonormalize(m: &[f64], x: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    for j in 0..x.len() {
        for attempt in 0..4 {
            let before = m_dot(m, &x[j], &x[j]).sqrt();
            for _ in 0..2 {
                for i in 0..j {
                    let c = m_dot(m, &x[i], &x[j]);
                    let (head, tail) = x.split_at_mut(j);
                    for (a, b) in tail[0].iter_mut().zip(&head[i]) {
                        *a -= c * b;
                    }
                }
            }
            let nrm = m_dot(m, &x[j], &x[j]).sqrt();
            if nrm > 1e-10 * before && nrm > 0.0 {
                x[j].iter_mut().for_each(|v| *v /= nrm);
                break;
            }
            assert!(attempt < 3, "could not complete an M-orthonormal block");
            x[j].iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
    }
}

fn sign_normalize(m: &[f64], u: &mut [f64]) {
    let s: f64 = u.iter().zip(m).map(|(a, w)| a * w).sum();
    if s < 0.0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
}

fn finish(
    k: &SparseOperator,
    m: &[f64],
    mut pairs: Vec<(f64, Vec<f64>)>,
    count: usize,
    iterations: usize,
) -> Result<EigenBasis> {
    pairs.truncate(count);
    let mut lambdas = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for (lam, mut u) in pairs {
        sign_normalize(m, &mut u);
        residuals.push(relative_residual(k, m, lam, &u)?);
        lambdas.push(lam);
        vectors.push(u);
    }
    let clusters = find_clusters(&lambdas);
    Ok(EigenBasis {
        lambdas,
        vectors,
        residuals,
        iterations,
        clusters,
    })
}

/// Full eigendecomposition of `M^{-1/2} K M^{-1/2}`.
pub fn solve_dense(k: &SparseOperator, m: &SparseOperator, count: usize) -> Result<EigenBasis> {
    check_symmetric(k)?;
    let md = diag_of(m)?;
    let n = k.dim();
    if count == 0 || count > n {
        return Err(Error::BadParams(format!("cannot compute {count} of {n} eigenpairs")));
    }
    let sq: Vec<f64> = md.iter().map(|w| w.sqrt()).collect();
    let kd = k.to_dense();
    let c = DMatrix::from_fn(n, n, |i, j| 0.5 * (kd[(i, j)] + kd[(j, i)]) / (sq[i] * sq[j]));
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let pairs = order
        .iter()
        .take(count)
        .map(|&c| {
            let u = (0..n).map(|i| eig.eigenvectors[(i, c)] / sq[i]).collect();
            (eig.eigenvalues[c], u)
        })
        .collect();
    finish(k, &md, pairs, count, 1)
}

/// Inverse iteration, optionally warm-started from `guess` (any number of columns).
pub fn solve_iterative(
    k: &SparseOperator,
    m: &SparseOperator,
    count: usize,
    tol: f64,
    seed: u64,
    guess: Option<&[Vec<f64>]>,
) -> Result<EigenBasis> {
    check_symmetric(k)?;
    let md = diag_of(m)?;
    let n = k.dim();
    if count == 0 || count > n {
        return Err(Error::BadParams(format!("cannot compute {count} of {n} eigenpairs")));
    }
    let p = (count + count.max(3)).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(p);
    if let Some(g) = guess {
        for col in g.iter().take(p) {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: col.len(),
                });
            }
            x.push(col.clone());
        }
    }
    while x.len() < p {
        x.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    m_orthonormalize(&md, &mut x, &mut rng);

    let mut theta = vec![0.0; p];
    let mut res = vec![f64::INFINITY; p];
    let mut locked = 0;
    let mut kx = vec![vec![0.0; n]; p];
    let cg_cap = 20 * n + 100;
    for sweep in 0..MAX_SWEEPS {
        if sweep > 0 {
            for j in locked..p {
                let rhs: Vec<f64> = x[j].iter().zip(&md).map(|(a, w)| a * w).collect();
                let mut y: Vec<f64> = x[j].iter().map(|v| v / theta[j]).collect();
                let inner = (0.05 * res[j]).clamp(1e-14, 1e-3);
                pcg(k, &rhs, &mut y, inner, cg_cap)?;
                x[j] = y;
            }
            m_orthonormalize(&md, &mut x, &mut rng);
        }
        // Rayleigh–Ritz on the M-orthonormal block.
        for j in 0..p {
            k.apply_into(&x[j], &mut kx[j])?;
        }
        let h = DMatrix::from_fn(p, p, |a, b| 0.5 * (dot(&x[a], &kx[b]) + dot(&x[b], &kx[a])));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut nx = vec![vec![0.0; n]; p];
        let mut nkx = vec![vec![0.0; n]; p];
        for (c, &col) in order.iter().enumerate() {
            theta[c] = eig.eigenvalues[col];
            for r in 0..p {
                let z = eig.eigenvectors[(r, col)];
                if z != 0.0 {
                    for i in 0..n {
                        nx[c][i] += z * x[r][i];
                        nkx[c][i] += z * kx[r][i];
                    }
                }
            }
        }
        x = nx;
        kx = nkx;
        if theta[0] <= 0.0 {
            return Err(Error::NoConvergence(format!(
                "non-positive Ritz value {:e}; K is not positive definite",
                theta[0]
            )));
        }
        for j in 0..p {
            let r2: f64 = (0..n)
                .map(|i| (kx[j][i] - theta[j] * md[i] * x[j][i]).powi(2) / md[i])
                .sum();
            res[j] = r2.sqrt() / (theta[j] * m_dot(&md, &x[j], &x[j]).sqrt());
        }
        locked = res.iter().take_while(|&&r| r <= tol).count().min(count);
        if locked >= count {
            let pairs = theta.iter().cloned().zip(x).collect();
            return finish(k, &md, pairs, count, sweep);
        }
    }
    Err(Error::NoConvergence(format!(
        "{MAX_SWEEPS} sweeps, residuals {:?}",
        &res[..count]
    )))
}

/// The `count` lowest eigenpairs; dense for `n <= 400`, iterative otherwise.
pub fn solve_lowest(
    k: &SparseOperator,
    m: &SparseOperator,
    count: usize,
    tol: f64,
    seed: u64,
) -> Result<EigenBasis> {
    solve_lowest_from(k, m, count, tol, seed, None)
}

pub fn solve_lowest_from(
    k: &SparseOperator,
    m: &SparseOperator,
    count: usize,
    tol: f64,
    seed: u64,
    guess: Option<&[Vec<f64>]>,
) -> Result<EigenBasis> {
    if m.dim() != k.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            got: m.dim(),
        });
    }
    if k.dim() <= DENSE_LIMIT {
        solve_dense(k, m, count)
    } else {
        solve_iterative(k, m, count, tol, seed, guess)
    }
}
