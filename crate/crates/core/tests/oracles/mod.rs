//! Independent reference implementations used by the integration tests.
//!
//! Everything here is deliberately naive: dense linear algebra, brute-force
//! recomputation and textbook formulas, sharing no code with the library.

#![allow(dead_code)]

pub mod cases;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `G G^T + shift I` with a Gaussian `G`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    let m = &g * g.transpose() + DMatrix::identity(n, n) * shift;
    (&m + m.transpose()) * 0.5
}

/// Central differences of a scalar function.
pub fn central_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut p = x.clone();
        let mut m = x.clone();
        p[i] += h;
        m[i] -= h;
        (f(&p) - f(&m)) / (2.0 * h)
    })
}

/// Solves `[K] v = rhs` by LU, falling back to an SVD least-squares solve.
fn dense_solve(k: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if let Some(v) = k.clone().lu().solve(rhs) {
        if v.iter().all(|x| x.is_finite()) {
            return v;
        }
    }
    k.clone().svd(true, true).solve(rhs, 1e-12).expect("svd solve")
}

/// Primal active-set method for `min 1/2 z^T P z + q^T z` subject to
/// `lower <= M z <= upper`, started from a feasible `z0`. `P` must be
/// positive definite.
pub fn active_set_qp(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    m: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    z0: &DVector<f64>,
) -> DVector<f64> {
    let n = q.len();
    let mut eq_rows = Vec::new();
    let mut ineq: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..m.nrows() {
        let row = m.row(i).transpose();
        if lower[i] == upper[i] {
            eq_rows.push((row, lower[i]));
            continue;
        }
        if upper[i].is_finite() {
            ineq.push((row.clone(), upper[i]));
        }
        if lower[i].is_finite() {
            ineq.push((-row, -lower[i]));
        }
    }
    let mut z = z0.clone();
    let mut working: Vec<usize> = Vec::new();
    for _ in 0..10_000 {
        let na = eq_rows.len() + working.len();
        let mut kkt = DMatrix::zeros(n + na, n + na);
        kkt.view_mut((0, 0), (n, n)).copy_from(p);
        let rows: Vec<&DVector<f64>> = eq_rows.iter().map(|(r, _)| r).chain(working.iter().map(|&w| &ineq[w].0)).collect();
        for (a, r) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[(n + a, j)] = r[j];
                kkt[(j, n + a)] = r[j];
            }
        }
        let mut rhs = DVector::zeros(n + na);
        rhs.rows_mut(0, n).copy_from(&-(p * &z + q));
        let sol = dense_solve(&kkt, &rhs);
        let step = sol.rows(0, n).into_owned();
        if step.amax() <= 1e-12 * (1.0 + z.amax()) {
            let mult = sol.rows(n + eq_rows.len(), working.len()).into_owned();
            match mult.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()) {
                Some((idx, &lam)) if lam < -1e-10 => {
                    working.remove(idx);
                }
                _ => return z,
            }
        } else {
            let mut alpha = 1.0;
            let mut blocking = None;
            for (i, (g, h)) in ineq.iter().enumerate() {
                if working.contains(&i) {
                    continue;
                }
                let gp = g.dot(&step);
                if gp > 1e-14 {
                    let t = ((h - g.dot(&z)) / gp).max(0.0);
                    if t < alpha {
                        alpha = t;
                        blocking = Some(i);
                    }
                }
            }
            z += step * alpha;
            if let Some(i) = blocking {
                working.push(i);
            }
        }
    }
    panic!("active-set oracle did not terminate");
}

/// One merge of the brute-force group-average oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleMerge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Group-average agglomeration that recomputes every average linkage from the
/// original matrix at every step. Clusters are ordered by smallest leaf, and
/// ties keep the first pair in that order.
pub fn upgma_oracle(d: &DMatrix<f64>) -> Vec<OracleMerge> {
    let m = d.nrows();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..m).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    for t in 0..m.saturating_sub(1) {
        clusters.sort_by_key(|(_, leaves)| *leaves.iter().min().unwrap());
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut sum = 0.0;
                for &i in &clusters[a].1 {
                    for &j in &clusters[b].1 {
                        sum += d[(i, j)];
                    }
                }
                let avg = sum / (clusters[a].1.len() * clusters[b].1.len()) as f64;
                if best.is_none_or(|(h, _, _)| avg < h) {
                    best = Some((avg, a, b));
                }
            }
        }
        let (height, a, b) = best.unwrap();
        let (right_id, right_leaves) = clusters.remove(b);
        let (left_id, mut leaves) = clusters.remove(a);
        leaves.extend(right_leaves);
        merges.push(OracleMerge {
            left: left_id,
            right: right_id,
            height,
            size: leaves.len(),
        });
        clusters.push((m + t, leaves));
    }
    merges
}

/// Textbook Kalman filter for `s_{k+1} = F s_k + w`, `y = H s + v` with
/// `w ~ N(0, W)`, `v ~ N(0, V)`. Returns the filtered means for the targets
/// `ys[0..]`, starting from `(s0, p0)` and predicting before each update.
pub fn kalman_means(
    f: &DMatrix<f64>,
    h: &DMatrix<f64>,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    s0: &DVector<f64>,
    p0: &DMatrix<f64>,
    ys: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    let mut s = s0.clone();
    let mut p = p0.clone();
    let mut out = Vec::with_capacity(ys.len());
    for y in ys {
        let sp = f * &s;
        let pp = f * &p * f.transpose() + w;
        let innov_cov = h * &pp * h.transpose() + v;
        let gain = &pp * h.transpose() * innov_cov.clone().try_inverse().expect("invertible innovation");
        s = &sp + &gain * (y - h * &sp);
        let ikh = DMatrix::identity(s.len(), s.len()) - &gain * h;
        // Joseph form keeps the covariance symmetric.
        p = &ikh * &pp * ikh.transpose() + &gain * v * gain.transpose();
        out.push(s.clone());
    }
    out
}

/// Matrix exponential by scaling and squaring with a 20-term Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(squarings);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Composite Simpson rule for a matrix-valued integrand on `[0, t]`.
pub fn simpson(f: impl Fn(f64) -> DMatrix<f64>, t: f64, intervals: usize) -> DMatrix<f64> {
    let n = intervals + intervals % 2;
    let h = t / n as f64;
    let mut acc = f(0.0) + f(t);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(i as f64 * h) * w;
    }
    acc * (h / 3.0)
}
