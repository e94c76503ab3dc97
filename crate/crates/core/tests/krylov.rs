mod common;

use aggamg::krylov::{IdentityPreconditioner, JacobiPreconditioner};
use aggamg::{
    fgmres, generate_poisson, pcg, setup, solve, AmgPreconditioner, CsrMatrix, CycleConfig,
    Hierarchy, InnerKind, Method, NullSpace, ProblemSpec, SetupConfig, SolverConfig,
};
use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn poisson(n: usize, eps: f64) -> (CsrMatrix, Vec<f64>, Hierarchy) {
    let (a, b) = generate_poisson(&ProblemSpec::poisson2d(n, n, eps)).unwrap();
    let h = setup(&a, &NullSpace::ones(a.n_rows()), &SetupConfig::default()).unwrap();
    (a, b, h)
}

/// Residual norms of restarted GMRES, each iterate obtained as the dense
/// least-squares minimizer over the current Krylov space.
fn gmres_oracle(a: &[f64], b: &[f64], n: usize, restart: usize, iters: usize) -> Vec<f64> {
    let am = DMatrix::from_row_slice(n, n, a);
    let mut x = DVector::zeros(n);
    let bv = DVector::from_column_slice(b);
    let mut out = vec![(&bv - &am * &x).norm()];
    let mut done = 0;
    while done < iters {
        let r0 = &bv - &am * &x;
        let mut basis: Vec<DVector<f64>> = vec![r0.normalize()];
        let mut best = x.clone();
        for j in 1..=restart.min(iters - done) {
            let k = DMatrix::from_columns(&basis);
            let ak = &am * &k;
            let y = ak.clone().svd(true, true).solve(&r0, 1e-300).unwrap();
            best = &x + &k * &y;
            out.push((&r0 - &ak * &y).norm());
            // next basis vector: A q_last, orthogonalized twice
            let mut w = &am * basis.last().unwrap();
            for _ in 0..2 {
                for q in &basis {
                    w -= q * q.dot(&w);
                }
            }
            done += 1;
            if w.norm() < 1e-14 || j == restart {
                break;
            }
            basis.push(w.normalize());
        }
        x = best;
        *out.last_mut().unwrap() = (&bv - &am * &x).norm();
    }
    out
}

/// Textbook preconditioned CG with a fixed diagonal preconditioner.
fn pcg_oracle(a: &[f64], b: &[f64], n: usize, iters: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = (0..n).map(|i| r[i] / a[i * n + i]).collect();
    let mut p = z.clone();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(s, t)| s * t).sum::<f64>();
    let mut rz = dot(&r, &z);
    let mut out = vec![norm(&r)];
    for _ in 0..iters {
        let q = dense_matvec(a, &p, n, n);
        let alpha = rz / dot(&p, &q);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        out.push(norm(&r));
        z = (0..n).map(|i| r[i] / a[i * n + i]).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    out
}

fn random_nonsymmetric(seed: u64, n: usize) -> CsrMatrix {
    let mut g = rng(seed);
    let mut d = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j && g.gen_bool(0.4) {
                d[i * n + j] = g.gen_range(-1.0..1.0);
            }
        }
        d[i * n + i] = 3.0 + g.gen_range(0.0..1.0);
    }
    CsrMatrix::from_dense(n, n, &d)
}

#[test]
fn fgmres_with_identity_matches_textbook_gmres() {
    let n = 20;
    let a = random_nonsymmetric(1, n);
    let b = random_vec(&mut rng(2), n);
    for restart in [30, 7] {
        let cfg = SolverConfig {
            tol: 1e-13,
            max_iters: 20,
            restart,
            ..Default::default()
        };
        let (_, rep) = fgmres(&a, &b, &vec![0.0; n], &IdentityPreconditioner, &cfg).unwrap();
        let oracle = gmres_oracle(&a.to_dense(), &b, n, restart, rep.iterations);
        assert_eq!(rep.residual_history.len(), oracle.len());
        for (k, (x, y)) in rep.residual_history.iter().zip(&oracle).enumerate() {
            assert!((x - y).abs() <= 1e-10 * norm(&b), "restart {restart}, iteration {k}: {x} vs {y}");
        }
    }
}

#[test]
fn jacobi_pcg_matches_textbook_pcg() {
    let n = 50;
    let a = random_spd(&mut rng(50), n, 0.15);
    let b = random_vec(&mut rng(51), n);
    let cfg = SolverConfig {
        method: Method::Pcg,
        tol: 1e-12,
        max_iters: 200,
        ..Default::default()
    };
    let jacobi = JacobiPreconditioner::new(&a).unwrap();
    let (x, rep) = pcg(&a, &b, &vec![0.0; n], &jacobi, &cfg).unwrap();
    assert!(rep.converged);
    let oracle = pcg_oracle(&a.to_dense(), &b, n, rep.iterations);
    for (k, (u, v)) in rep.residual_history.iter().zip(&oracle).enumerate() {
        assert!((u - v).abs() <= 1e-10 * norm(&b), "iteration {k}: {u} vs {v}");
    }
    assert!(norm(&residual(&a, &b, &x)) <= 1e-11 * norm(&b));
}

#[test]
fn hybrid_fgmres_on_poisson_256() {
    let (a, b, h) = poisson(256, 1.0);
    let pc = AmgPreconditioner { hierarchy: &h, cycle: CycleConfig::default() };
    let (x, rep) = fgmres(&a, &b, &vec![0.0; b.len()], &pc, &SolverConfig::default()).unwrap();
    assert!(rep.converged);
    assert!(rep.iterations <= 30, "{} iterations", rep.iterations);
    assert!(norm(&residual(&a, &b, &x)) <= 1e-6 * norm(&b));
    let last = *rep.residual_history.last().unwrap();
    assert!(last <= 1e-6 * rep.residual_history[0]);
}

#[test]
fn pcg_needs_at_least_as_many_v_as_k_iterations() {
    let (a, b, h) = poisson(128, 1.0);
    let cfg = SolverConfig { method: Method::Pcg, ..Default::default() };
    let run = |cycle| {
        let pc = AmgPreconditioner { hierarchy: &h, cycle };
        let (_, rep) = pcg(&a, &b, &vec![0.0; b.len()], &pc, &cfg).unwrap();
        assert!(rep.converged);
        rep.iterations
    };
    let v = run(CycleConfig::v());
    let k = run(CycleConfig { inner: InnerKind::Cg, ..CycleConfig::k() });
    assert!(v >= k, "V {v} vs K {k}");
}

#[test]
fn pcg_with_vcycle_decreases_energy_error() {
    let (a, _, h) = poisson(48, 1.0);
    let x_true = random_vec(&mut rng(4), a.n_rows());
    let b = a.spmv(&x_true).unwrap();
    let pc = AmgPreconditioner { hierarchy: &h, cycle: CycleConfig::v() };
    let energy = |x: &[f64]| {
        let e: Vec<f64> = x.iter().zip(&x_true).map(|(u, v)| u - v).collect();
        let ae = a.spmv(&e).unwrap();
        e.iter().zip(&ae).map(|(p, q)| p * q).sum::<f64>().sqrt()
    };
    let mut prev = energy(&vec![0.0; b.len()]);
    for iters in 1..=12 {
        let cfg = SolverConfig { method: Method::Pcg, tol: 1e-14, max_iters: iters, ..Default::default() };
        let (x, _) = pcg(&a, &b, &vec![0.0; b.len()], &pc, &cfg).unwrap();
        let now = energy(&x);
        assert!(now <= prev * (1.0 + 1e-10), "iteration {iters}: {now} > {prev}");
        prev = now;
    }
}

#[test]
fn random_initial_guess_also_converges() {
    let (a, b, h) = poisson(64, 0.01);
    let pc = AmgPreconditioner { hierarchy: &h, cycle: CycleConfig::default() };
    for method in [Method::Fgmres, Method::Pcg] {
        let cfg = SolverConfig { method, ..Default::default() };
        for x0 in [vec![0.0; b.len()], random_vec(&mut rng(5), b.len())] {
            let (x, rep) = solve(&a, &b, &x0, &pc, &cfg).unwrap();
            assert!(rep.converged, "{method:?}");
            assert!(norm(&residual(&a, &b, &x)) <= 1.01e-6 * norm(&b));
        }
    }
}

#[test]
fn solves_are_bit_identical_across_thread_counts() {
    let (a, b) = generate_poisson(&ProblemSpec::poisson2d(160, 160, 0.01)).unwrap();
    let run = |method| {
        let h = setup(&a, &NullSpace::ones(a.n_rows()), &SetupConfig::default()).unwrap();
        let pc = AmgPreconditioner { hierarchy: &h, cycle: CycleConfig::default() };
        let cfg = SolverConfig { method, ..Default::default() };
        let (x, rep) = solve(&a, &b, &vec![0.0; b.len()], &pc, &cfg).unwrap();
        (x, rep.iterations, rep.residual_history)
    };
    for method in [Method::Fgmres, Method::Pcg] {
        let reference = with_threads(1, || run(method));
        for threads in [2, 8] {
            assert_eq!(with_threads(threads, || run(method)), reference, "{method:?}");
        }
    }
}
