//! Acceptance criteria P1-P11. Every check prints one `PASS`/`FAIL` line
//! before asserting, so `--nocapture` gives a readable scoreboard.
//!
//! The table-driven criteria (P2, P3, P4, P6 and the run-wide half of P11)
//! train dozens of networks and are `#[ignore]`d; run them with
//! `cargo test --release -p qlmf-harness --test acceptance -- --ignored --nocapture`.

use std::time::Instant;

use qlmf_core::kan::{bspline_basis, KanNetwork, SplineSpec};
use qlmf_core::oracle::{self, Dense, C64};
use qlmf_core::pde_classical::{
    burgers_hf_solve_observed, burgers_hf_step, cavity_hf_solve, gaussian_pulse, poisson_gauss_seidel,
    velocity_from_streamfunction, BurgersParams, CavityParams,
};
use qlmf_core::qlbm::{CircuitKind, StepRecord};
use qlmf_core::statevector::{DiagonalOp, RegisterLayout, Shift, Statevector};
use qlmf_core::{Field, Grid1D, Grid2D};
use qlmf_harness::config::ExperimentConfig;
use qlmf_harness::data::generate_datasets_observed;
use qlmf_harness::experiment::{baseline_metrics, train};
use qlmf_harness::tables::{reproduce_tables, Series, TableArtifact, TableOptions};
use qlmf_harness::{generate_datasets, Problem};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SEEDS: [u64; 3] = [0, 1, 2];

fn verdict(id: &str, ok: bool, detail: &str) -> bool {
    println!("{id} {} {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn within(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

#[test]
fn p01_lf_burgers_baseline() {
    let cfg = ExperimentConfig::burgers();
    let start = Instant::now();
    let data = generate_datasets(&cfg).unwrap();
    let base = baseline_metrics(&data).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let full = base[0].1.full;
    let ok = verdict(
        "P1",
        within(full, 0.335, 0.05) && secs < 120.0,
        &format!("LF Burgers L2_full = {full:.4} (want 0.335 +- 0.05), {secs:.1} s (want < 120)"),
    );
    assert!(ok);
}

#[test]
fn p05_lf_cavity_baseline() {
    let cfg = ExperimentConfig::cavity();
    let start = Instant::now();
    let data = generate_datasets(&cfg).unwrap();
    let base = baseline_metrics(&data).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (u, v) = (base[0].1.full, base[1].1.full);
    let ok = verdict(
        "P5",
        within(u, 0.285, 0.06) && within(v, 0.412, 0.08) && secs < 900.0,
        &format!("LF cavity L2_full u = {u:.4} (0.285 +- 0.06), v = {v:.4} (0.412 +- 0.08), {secs:.1} s (want < 900)"),
    );
    assert!(ok);
}

#[test]
fn p07_emulated_steps_match_classical_oracle() {
    // Every table row shares its problem's LF solver settings, so the LF
    // generation of the two base configs covers every emulated step of both
    // series.
    let mut worst: f64 = 0.0;
    let mut counts = [0usize; 3];
    for cfg in [ExperimentConfig::burgers(), ExperimentConfig::cavity()] {
        generate_datasets_observed(&cfg, &mut |rec: &StepRecord<'_, f64>| {
            worst = worst.max(oracle::record_deviation(rec));
            counts[match rec.kind {
                CircuitKind::BurgersD1Q3 => 0,
                CircuitKind::Vorticity => 1,
                CircuitKind::StreamFunction => 2,
            }] += 1;
        })
        .unwrap();
    }
    let ok = verdict(
        "P7",
        worst <= 1e-10 && counts.iter().all(|&c| c > 0),
        &format!(
            "max per-site deviation {worst:.2e} over {} D1Q3, {} vorticity, {} stream steps (want <= 1e-10)",
            counts[0], counts[1], counts[2]
        ),
    );
    assert!(ok);
}

fn random_state(rng: &mut StdRng, dim: usize) -> Vec<C64> {
    (0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn small_layouts() -> Vec<RegisterLayout> {
    let axes: [&[usize]; 6] = [&[1], &[2], &[3], &[1, 1], &[2, 1], &[1, 2]];
    let mut out = Vec::new();
    for n_anc in 0..=2 {
        for n_link in 0..=2 {
            for a in axes {
                if n_anc + n_link + a.iter().sum::<usize>() <= 4 {
                    out.push(RegisterLayout::new(n_anc, n_link, a.to_vec()).unwrap());
                }
            }
        }
    }
    out
}

#[test]
fn p08_statevector_matches_dense_matrices() {
    let mut rng = StdRng::seed_from_u64(8);
    let layouts = small_layouts();
    let mut worst: f64 = 0.0;
    let mut per_op = [0usize; 3];
    for _ in 0..1000 {
        let layout = layouts[rng.gen_range(0..layouts.len())].clone();
        let n = layout.total_qubits();
        let amps = random_state(&mut rng, layout.dim());
        let mut sv = Statevector::from_amplitudes(layout.clone(), amps.clone()).unwrap();
        let op = if layout.n_ancilla == 0 { rng.gen_range(0..2) * 2 } else { rng.gen_range(0..3) };
        let dense: Dense = match op {
            0 => {
                let q = rng.gen_range(0..n);
                sv.hadamard(q).unwrap();
                oracle::hadamard(n, q)
            }
            1 => {
                let control = rng.gen_range(0..layout.n_ancilla);
                let value = rng.gen_bool(0.5);
                let entries = random_state(&mut rng, layout.dim() / 2);
                sv.apply_controlled_diagonal(control, value, &DiagonalOp::new(entries.clone()).unwrap())
                    .unwrap();
                oracle::controlled_diagonal(&layout, control, value, &entries)
            }
            _ => {
                let link = rng.gen_range(0..layout.n_link_states());
                let axis = rng.gen_range(0..layout.lattice_axes.len());
                let dir = if rng.gen_bool(0.5) { Shift::Plus } else { Shift::Minus };
                sv.apply_controlled_shift(link, axis, dir).unwrap();
                oracle::controlled_shift(&layout, link, axis, dir)
            }
        };
        per_op[op] += 1;
        let want = dense.apply(&amps);
        for (a, b) in sv.amplitudes().iter().zip(&want) {
            worst = worst.max((a - b).norm());
        }
    }
    let ok = verdict(
        "P8",
        worst <= 1e-12,
        &format!(
            "max amplitude deviation {worst:.2e} over 1000 cases ({} H, {} diagonal, {} shift) on {} layouts (want <= 1e-12)",
            per_op[0],
            per_op[1],
            per_op[2],
            layouts.len()
        ),
    );
    assert!(ok);
}

#[test]
fn p09_kan_gradients_and_partition_of_unity() {
    let dims: [&[usize]; 10] = [
        &[2, 6, 6, 1],
        &[3, 12, 12, 1],
        &[3, 8, 8, 2],
        &[5, 10, 10, 2],
        &[3, 5, 5, 2],
        &[5, 5, 5, 2],
        &[3, 10, 10, 2],
        &[3, 15, 15, 2],
        &[5, 15, 15, 2],
        &[2, 6, 1],
    ];
    let grids = [3, 5, 7];
    let h = 1e-5;
    let mut rng = StdRng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut n_checked = 0usize;
    for trial in 0..100 {
        let d = dims[trial % dims.len()];
        let affine = trial % 10 == 9;
        let mut net = if affine {
            KanNetwork::affine(d, &mut rng).unwrap()
        } else {
            KanNetwork::new(d, SplineSpec::new(grids[(trial / 3) % 3], 3).unwrap(), true, &mut rng).unwrap()
        };
        for p in &mut net.params {
            *p = rng.gen_range(-0.8..0.8);
        }
        let x: Vec<f64> = (0..net.in_dim()).map(|_| rng.gen_range(-0.95..0.95)).collect();
        let up: Vec<f64> = (0..net.out_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = |n: &KanNetwork<f64>, x: &[f64]| -> f64 { n.forward(x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum() };
        let (grads, dx) = net.backward(&x, &up).unwrap();
        let rel = |a: f64, fd: f64| (a - fd).abs() / fd.abs().max(a.abs()).max(1e-3);
        for i in 0..net.n_params() {
            let saved = net.params[i];
            net.params[i] = saved + h;
            let fp = f(&net, &x);
            net.params[i] = saved - h;
            let fm = f(&net, &x);
            net.params[i] = saved;
            worst = worst.max(rel(grads[i], (fp - fm) / (2.0 * h)));
            n_checked += 1;
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            worst = worst.max(rel(dx[i], (f(&net, &xp) - f(&net, &xm)) / (2.0 * h)));
            n_checked += 1;
        }
    }
    let mut pou: f64 = 0.0;
    for g in grids {
        for k in 1..=3 {
            let spec = SplineSpec::new(g, k).unwrap();
            for _ in 0..200 {
                let s: f64 = bspline_basis(rng.gen_range(-1.0..=1.0), &spec).iter().sum();
                pou = pou.max((s - 1.0).abs());
            }
            for x in [-1.0, 1.0] {
                pou = pou.max((bspline_basis(x, &spec).iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    let ok = verdict(
        "P9",
        worst <= 1e-4 && pou <= 1e-12,
        &format!(
            "max relative gradient error {worst:.2e} over {n_checked} derivatives of 100 nets (want <= 1e-4), partition of unity {pou:.2e} (want <= 1e-12)"
        ),
    );
    assert!(ok);
}

fn poisson_mms_error(n: usize) -> f64 {
    use std::f64::consts::PI;
    let g = Grid2D::new(n).unwrap();
    let omega = Field::from_fn_2d(&g, 0.0, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
    let exact = Field::from_fn_2d(&g, 0.0, |x, y| (PI * x).sin() * (PI * y).sin());
    let sol = poisson_gauss_seidel(&omega, &Field::zeros_2d(&g, 0.0), &g, 1e-13, 500_000).unwrap();
    assert!(sol.converged);
    sol.psi.values.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Max interior central-difference divergence over `(max|u| + max|v|) / h`.
fn scaled_divergence(u: &Field<f64>, v: &Field<f64>, g: &Grid2D) -> f64 {
    let n = g.n;
    let h: f64 = g.spacing();
    let mut worst: f64 = 0.0;
    for j in 2..n - 2 {
        for i in 2..n - 2 {
            let div = (u.at(i + 1, j) - u.at(i - 1, j) + v.at(i, j + 1) - v.at(i, j - 1)) / (2.0 * h);
            worst = worst.max(div.abs());
        }
    }
    worst / ((u.max_abs() + v.max_abs()) / h)
}

#[test]
fn p10_classical_solver_suite() {
    let ratio = poisson_mms_error(17) / poisson_mms_error(33);
    let ok_order = verdict("P10a", (3.2..=4.8).contains(&ratio), &format!("Poisson error ratio h -> h/2 = {ratio:.3} (want [3.2, 4.8])"));

    let g = Grid2D::new(64).unwrap();
    let run = cavity_hf_solve(&CavityParams::new(100.0, &g, 0.5), &g, &[0.1, 0.5]).unwrap();
    let mut div: f64 = 0.0;
    for s in &run.snapshots {
        div = div.max(scaled_divergence(&s.u, &s.v, &g));
        let (u, v) = velocity_from_streamfunction(&s.psi, &g, 1.0);
        div = div.max(scaled_divergence(&u, &v, &g));
    }
    let ok_div = verdict("P10b", div <= 1e-12, &format!("scaled discrete divergence {div:.2e} (want <= 1e-12)"));

    let grid = Grid1D::periodic(256, 1.0).unwrap();
    let mut u = Field::new_1d(vec![0.3; 256], 0.0);
    let p = BurgersParams::with_default_dt(&grid, &u, 0.01, 0.5);
    let mut fixed = true;
    for _ in 0..1000 {
        let next = burgers_hf_step(&u, &grid, &p).unwrap();
        fixed &= next.values == u.values;
        u = next;
    }
    let ok_fixed = verdict("P10c", fixed, "constant state unchanged bit for bit over 1000 steps");

    let cfg = ExperimentConfig::burgers();
    let u0 = gaussian_pulse(&grid, cfg.pulse_amplitude, cfg.pulse_width, cfg.pulse_center);
    let (lo, hi) = u0.min_max();
    let p = BurgersParams::with_default_dt(&grid, &u0, cfg.viscosity, cfg.t_end);
    let mut violations = 0usize;
    let mut steps = 0usize;
    burgers_hf_solve_observed(&u0, &grid, &p, &[cfg.t_end], |_, f| {
        steps += 1;
        violations += f.values.iter().filter(|&&v| v < lo || v > hi).count();
    })
    .unwrap();
    let ok_mono = verdict(
        "P10d",
        violations == 0,
        &format!("{violations} values outside [{lo:.3e}, {hi:.3e}] over {steps} Burgers steps"),
    );
    assert!(ok_order && ok_div && ok_fixed && ok_mono);
}

#[test]
fn p11_conservation_and_alpha_bounds() {
    let mut cfg = ExperimentConfig::burgers();
    let mut worst: f64 = 0.0;
    let mut steps = 0usize;
    let data = generate_datasets_observed(&cfg, &mut |rec: &StepRecord<'_, f64>| {
        let before: f64 = rec.input.iter().sum();
        let after: f64 = rec.output.iter().sum();
        worst = worst.max((after - before).abs() / before.abs().max(1e-300));
        steps += 1;
    })
    .unwrap();
    let ok_sum = verdict(
        "P11a",
        worst <= 1e-12 && steps > 0,
        &format!("relative change of sum(u) per quantum step {worst:.2e} over {steps} steps (want <= 1e-12)"),
    );

    // Short, aggressive trainings that drive alpha against both bounds.
    cfg.lf_epochs = 50;
    cfg.hf_epochs = 300;
    cfg.learning_rate = 0.05;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut n = 0usize;
    for lambda in [0.0, 1e-4, 10.0] {
        cfg.lambda_alpha = lambda;
        let run = train(&cfg, &data, None).unwrap();
        for &a in &run.mf_trace.alpha {
            lo = lo.min(a);
            hi = hi.max(a);
        }
        n += run.mf_trace.alpha.len();
    }
    let ok_alpha = verdict(
        "P11b",
        lo >= 0.0 && hi <= 1.0,
        &format!("alpha stayed in [{lo:.4}, {hi:.4}] over {n} optimizer steps (want within [0, 1])"),
    );
    assert!(ok_sum && ok_alpha);
}

fn table(series: Series, rows: &[&str]) -> TableArtifact {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = TableOptions::new(series);
    opts.base = ExperimentConfig::for_problem(series.problem());
    opts.only = rows.iter().map(|r| r.to_string()).collect();
    opts.out_dir = dir.path().to_path_buf();
    let t = reproduce_tables(series, &SEEDS, &opts).unwrap();
    print!("{}", t.text);
    t
}

fn alpha_bounds_hold(t: &TableArtifact) -> (bool, usize) {
    let mut n = 0;
    let mut ok = true;
    for r in &t.rows {
        for rep in &r.reports {
            let [lo, hi] = rep.alpha_range.expect("trained runs record their alpha range");
            ok &= lo >= 0.0 && hi <= 1.0;
            n += 1;
        }
    }
    (ok, n)
}

#[test]
#[ignore = "trains 15 Burgers models; run with --ignored in release mode"]
fn p02_p03_p04_burgers_table() {
    let t = table(Series::B, &["B1", "B4", "B5", "B6", "B7"]);
    assert_eq!(t.series.problem(), Problem::Burgers);
    let full = |id: &str| t.row(id).unwrap().stat("u", |m| Some(m.full)).unwrap().median;
    let train = |id: &str| t.row(id).unwrap().stat("u", |m| m.train).unwrap().median;
    let extrap = |id: &str| t.row(id).unwrap().stat("u", |m| m.extrap).unwrap().median;
    let base = *t.baseline("u").unwrap();

    let b4 = t.row("B4").unwrap();
    let reduction = 1.0 - full("B4") / base.full;
    let alpha = b4.alpha().unwrap().median;
    let slowest = b4.reports.iter().map(|r| r.wall_time_s).fold(0.0, f64::max);
    let p2 = verdict(
        "P2",
        full("B4") <= 0.10 && reduction >= 0.70 && (0.35..=0.70).contains(&alpha) && slowest < 600.0,
        &format!(
            "B4 median L2_full {:.4} (want <= 0.10), reduction {:.1}% (want >= 70%), alpha {alpha:.3} (want [0.35, 0.70]), slowest run {slowest:.0} s (want < 600)",
            full("B4"),
            100.0 * reduction
        ),
    );

    let factor = extrap("B5") / extrap("B4");
    let base_extrap = base.extrap.unwrap();
    let p3 = verdict(
        "P3",
        factor >= 3.0 && extrap("B5") > base_extrap,
        &format!(
            "B5 median L2_extrap {:.4} = {factor:.2} x B4 {:.4} (want >= 3), LF baseline extrap {base_extrap:.4} (want B5 above it)",
            extrap("B5"),
            extrap("B4")
        ),
    );

    let (tr, ex) = (["B6", "B1", "B7"].map(train), ["B6", "B1", "B7"].map(extrap));
    let p4 = verdict(
        "P4",
        tr[2] < tr[0] && tr[2] < tr[1] && ex[1] < ex[0] && ex[1] < ex[2],
        &format!(
            "median L2_train G=3/5/7 = {:.4}/{:.4}/{:.4} (want G=7 lowest), L2_extrap = {:.4}/{:.4}/{:.4} (want G=5 lowest)",
            tr[0], tr[1], tr[2], ex[0], ex[1], ex[2]
        ),
    );

    let (ok_alpha, n) = alpha_bounds_hold(&t);
    let p11 = verdict("P11c", ok_alpha, &format!("alpha within [0, 1] at every step of {n} Burgers runs"));
    assert!(p2 && p3 && p4 && p11);
}

#[test]
#[ignore = "trains 3 cavity models; run with --ignored in release mode"]
fn p06_cavity_table() {
    let t = table(Series::C, &["C3"]);
    let c3 = t.row("C3").unwrap();
    let u = c3.stat("u", |m| Some(m.full)).unwrap().median;
    let base = t.baseline("u").unwrap().full;
    let reduction = 1.0 - u / base;
    let slowest = c3.reports.iter().map(|r| r.wall_time_s).fold(0.0, f64::max);
    let p6 = verdict(
        "P6",
        u <= 0.12 && reduction >= 0.60 && slowest < 1800.0,
        &format!(
            "C3 median L2_full,u {u:.4} (want <= 0.12), reduction {:.1}% (want >= 60%), slowest run {slowest:.0} s (want < 1800)",
            100.0 * reduction
        ),
    );
    let (ok_alpha, n) = alpha_bounds_hold(&t);
    let p11 = verdict("P11d", ok_alpha, &format!("alpha within [0, 1] at every step of {n} cavity runs"));
    assert!(p6 && p11);
}
