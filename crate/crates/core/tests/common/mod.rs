//! Independent oracles and fixtures shared by the integration tests.
//!
//! Nothing here calls the factorization, solver or eigen routines of the
//! crate under test.
#![allow(dead_code)]

use grevf_core::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn unit() -> Interval {
    Interval::new(0.0, 1.0).unwrap()
}

pub fn rule(p: usize) -> QuadratureRule {
    gauss_legendre_rule(unit(), p).unwrap()
}

pub fn kernel(family: KernelFamily, lengthscale: f64) -> Kernel {
    Kernel::new(family, lengthscale, 1.0).unwrap()
}

pub fn se(lengthscale: f64) -> Kernel {
    kernel(KernelFamily::SquaredExponential, lengthscale)
}

/// Sorted uniform locations on [0, 1] with noisy sine targets.
pub fn dataset(n: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    x.sort_by(f64::total_cmp);
    let y = x
        .iter()
        .map(|x| (6.0 * x).sin() + 0.1 * (rng.random::<f64>() - 0.5))
        .collect();
    Dataset::new(unit(), x, y, noise).unwrap()
}

pub fn random_spd(n: usize, rng: &mut StdRng) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>();
        }
        a[i][i] += 0.5;
    }
    a
}

pub fn to_matrix(a: &[Vec<f64>]) -> Matrix {
    Matrix::from_fn(a.len(), a[0].len(), |i, j| a[i][j])
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..m).map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| aug[i][c].abs().total_cmp(&aug[j][c].abs()))
            .unwrap();
        aug.swap(c, p);
        let d = aug[c][c];
        for v in aug[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = aug[r][c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        aug[r][j] -= f * aug[c][j];
                    }
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Determinant by cofactor expansion along the first row.
pub fn det_cofactor(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 1 {
        return a[0][0];
    }
    (0..n)
        .map(|j| {
            let minor: Vec<Vec<f64>> = a[1..]
                .iter()
                .map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * a[0][j] * det_cofactor(&minor)
        })
        .sum()
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut a = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    d.sort_by(f64::total_cmp);
    d
}

pub fn min_eig_over_trace(m: &Matrix) -> f64 {
    let rows = to_rows(m);
    let tr: f64 = (0..rows.len()).map(|i| rows[i][i]).sum();
    jacobi_eigenvalues(&rows)[0] / tr.abs().max(f64::MIN_POSITIVE)
}

/// Dense multivariate normal log density via explicit inverse and cofactor-free LU determinant.
pub fn mvn_log_density(y: &[f64], cov: &[Vec<f64>]) -> f64 {
    let n = y.len();
    let inv = inverse(cov);
    let quad: f64 = y.iter().zip(matvec(&inv, y)).map(|(a, b)| a * b).sum();
    let det = if n <= 6 { det_cofactor(cov) } else { jacobi_eigenvalues(cov).iter().product() };
    -0.5 * (quad + det.ln() + n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Textbook GP regression at points: mean k*ᵀ(K + σ²I)⁻¹y, var k** − k*ᵀ(K + σ²I)⁻¹k*.
pub fn textbook_gp(k: &Kernel, ds: &Dataset, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let x = ds.x();
    let n = x.len();
    let mut kxx: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| k.eval(x[i], x[j])).collect()).collect();
    for (i, row) in kxx.iter_mut().enumerate() {
        row[i] += ds.noise_variance();
    }
    let inv = inverse(&kxx);
    let alpha = matvec(&inv, ds.y());
    let mut means = Vec::new();
    let mut vars = Vec::new();
    for &t in xs {
        let ks: Vec<f64> = x.iter().map(|xi| k.eval(t, *xi)).collect();
        means.push(ks.iter().zip(&alpha).map(|(a, b)| a * b).sum());
        let v = matvec(&inv, &ks);
        vars.push(k.eval(t, t) - ks.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>());
    }
    (means, vars)
}

/// Literal-formula ELBO with explicit inverses (well-conditioned fixtures only).
pub fn literal_elbo(c_ll: &[Vec<f64>], c_ld: &[Vec<f64>], kdiag: &[f64], y: &[f64], noise: f64, mu: &[f64], sigma: &[Vec<f64>]) -> f64 {
    let m = mu.len();
    let kinv = inverse(c_ll);
    let a = matmul(&kinv, c_ld); // M × N
    let mut diff = sigma.to_vec();
    for i in 0..m {
        for j in 0..m {
            diff[i][j] -= c_ll[i][j];
        }
    }
    let mut total = 0.0;
    for n in 0..y.len() {
        let an: Vec<f64> = (0..m).map(|i| a[i][n]).collect();
        let mean: f64 = an.iter().zip(mu).map(|(p, q)| p * q).sum();
        let corr: f64 = an.iter().zip(matvec(&diff, &an)).map(|(p, q)| p * q).sum();
        let var = kdiag[n] + corr;
        total += -0.5 * (2.0 * std::f64::consts::PI * noise).ln() - (y[n] - mean).powi(2) / (2.0 * noise) - var / (2.0 * noise);
    }
    let tr: f64 = (0..m).map(|i| matmul(&kinv, sigma)[i][i]).sum();
    let maha: f64 = mu.iter().zip(matvec(&kinv, mu)).map(|(p, q)| p * q).sum();
    let kl = 0.5 * (tr + maha - m as f64 + det_or_eig(c_ll).ln() - det_or_eig(sigma).ln());
    total - kl
}

fn det_or_eig(a: &[Vec<f64>]) -> f64 {
    if a.len() <= 6 {
        det_cofactor(a)
    } else {
        jacobi_eigenvalues(a).iter().product()
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

/// Minimizes J(α) = (1/N)‖y − K_XMα‖² + λαᵀK_MMα by exact coordinate steps.
pub fn coordinate_descent_krr(kmx: &[Vec<f64>], kmm: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let m = kmx.len();
    let n = y.len() as f64;
    let mut alpha = vec![0.0; m];
    for _ in 0..200_000 {
        let mut moved = 0.0f64;
        for j in 0..m {
            let mut num = 0.0;
            let mut den = 0.0;
            for (t, yt) in y.iter().enumerate() {
                let rest: f64 = (0..m).filter(|i| *i != j).map(|i| alpha[i] * kmx[i][t]).sum();
                num += kmx[j][t] * (yt - rest) / n;
                den += kmx[j][t] * kmx[j][t] / n;
            }
            let cross: f64 = (0..m).filter(|i| *i != j).map(|i| kmm[j][i] * alpha[i]).sum();
            num -= lambda * cross;
            den += lambda * kmm[j][j];
            let next = num / den;
            moved = moved.max((next - alpha[j]).abs());
            alpha[j] = next;
        }
        if moved < 1e-15 {
            break;
        }
    }
    alpha
}
