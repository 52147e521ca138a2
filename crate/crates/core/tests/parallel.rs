mod common;

use common::*;
use fcresnet_admm::admm2::{init_2s, step_serial_2s, Admm2, Admm2Hyper, Prox2};
use fcresnet_admm::admm3::{init_3s, step_serial_3s, Admm3, Admm3Hyper, Prox3};
use fcresnet_admm::analysis::{node_entries, Splitting};
use fcresnet_admm::assumptions::Mode;
use fcresnet_admm::model::Activation;
use fcresnet_admm::parallel::*;
use fcresnet_admm::schedule::Schedule;

fn hyper2(point: bool) -> Admm2Hyper {
    let prox = if point {
        Prox2::Point { omega: Schedule::Constant(1.0), nu: Schedule::Constant(1.0) }
    } else {
        Prox2::Grad { tau: Schedule::Constant(2.0), iota: Schedule::Constant(2.0) }
    };
    Admm2Hyper { lambda: 0.01, mu: 1.0, beta: 2.0, prox, inner: Default::default() }
}

fn hyper3(n: usize, point: bool) -> Admm3Hyper {
    let prox = if point { Prox3::Point { omega: Schedule::Constant(1.0) } } else { Prox3::Grad { tau: Schedule::Constant(5.0) } };
    Admm3Hyper { beta: vec![10.0; n], prox, ..Admm3Hyper::preset_prox_grad(n) }
}

#[test]
fn parallel_2s_equals_serial() {
    for (n_layers, k, point) in [(3, 1, true), (3, 4, false), (5, 3, true), (2, 3, false)] {
        let (shape, data, w) = tiny(n_layers, 3, 2, 6, Activation::Sin, n_layers as u64 + k as u64);
        let h = hyper2(point);
        let ctx = Admm2::new(&shape, &data, &h).unwrap();
        let init = init_2s(&ctx, &w).unwrap();
        let mut serial = init.clone();
        let mut serial_recs = Vec::new();
        for _ in 0..k {
            serial_recs.push(step_serial_2s(&ctx, &mut serial).unwrap());
        }
        let run = run_parallel_2s(&ctx, &init, k, true).unwrap();
        assert_eq!(run.state, serial, "N={n_layers} K={k}");
        assert_eq!(run.records.len(), k);
        for (a, b) in run.records.iter().zip(&serial_recs) {
            assert_eq!((a.k, a.aug_lag, a.delta_x, a.kkt), (b.k, b.aug_lag, b.delta_x, b.kkt));
        }
        assert!(run.trace.slot_violations().is_empty());
    }
}

#[test]
fn parallel_3s_equals_serial() {
    for (n_layers, k, point) in [(3, 1, true), (3, 4, false), (5, 3, true), (2, 3, false)] {
        let (shape, data, w) = tiny(n_layers, 3, 2, 6, Activation::Sigmoid, 7 + n_layers as u64);
        let h = hyper3(n_layers, point);
        let ctx = Admm3::new(&shape, &data, &h, Mode::Permissive).unwrap();
        let init = init_3s(&ctx, &w).unwrap();
        let mut serial = init.clone();
        for _ in 0..k {
            step_serial_3s(&ctx, &mut serial).unwrap();
        }
        let run = run_parallel_3s(&ctx, &init, k, false).unwrap();
        assert_eq!(run.state, serial, "N={n_layers} K={k}");
        assert!(run.records.is_empty());
        assert!(run.trace.slot_violations().is_empty());
    }
}

#[test]
fn zero_epochs_leave_state_unchanged() {
    let (shape, data, w) = tiny(3, 2, 1, 4, Activation::Tanh, 1);
    let h = hyper2(true);
    let ctx = Admm2::new(&shape, &data, &h).unwrap();
    let init = init_2s(&ctx, &w).unwrap();
    let run = run_parallel_2s(&ctx, &init, 0, true).unwrap();
    assert_eq!(run.state, init);
    assert_eq!(run.trace.makespan(), 0);

    let h3 = hyper3(3, false);
    let ctx3 = Admm3::new(&shape, &data, &h3, Mode::Permissive).unwrap();
    let init3 = init_3s(&ctx3, &w).unwrap();
    assert_eq!(run_parallel_3s(&ctx3, &init3, 0, false).unwrap().state, init3);
}

#[test]
fn repeated_runs_are_identical() {
    let (shape, data, w) = tiny(6, 2, 1, 5, Activation::Sin, 2);
    let h = hyper2(false);
    let ctx = Admm2::new(&shape, &data, &h).unwrap();
    let init = init_2s(&ctx, &w).unwrap();
    let first = run_parallel_2s(&ctx, &init, 20, true).unwrap();
    let strip = |r: &ParallelRun<_>| -> Vec<(usize, u64, u64)> {
        r.records.iter().map(|x| (x.k, x.aug_lag.to_bits(), x.kkt.to_bits())).collect()
    };
    for _ in 0..4 {
        let again = run_parallel_2s(&ctx, &init, 20, true).unwrap();
        assert_eq!(again.state, first.state);
        assert_eq!(again.trace.ops, first.trace.ops);
        assert_eq!(again.trace.resident_high_water, first.trace.resident_high_water);
        assert_eq!(strip(&again), strip(&first));
    }

    let h3 = hyper3(6, true);
    let ctx3 = Admm3::new(&shape, &data, &h3, Mode::Permissive).unwrap();
    let init3 = init_3s(&ctx3, &w).unwrap();
    let first = run_parallel_3s(&ctx3, &init3, 20, false).unwrap();
    for _ in 0..4 {
        let again = run_parallel_3s(&ctx3, &init3, 20, false).unwrap();
        assert_eq!(again.state, first.state);
        assert_eq!(again.trace.ops, first.trace.ops);
    }
}

#[test]
fn resident_memory_matches_enumeration() {
    let (d, q, n) = (2usize, 1usize, 10usize);
    let (shape, data, w) = tiny(4, d, q, n, Activation::Sin, 3);
    let h = hyper2(false);
    let ctx = Admm2::new(&shape, &data, &h).unwrap();
    let init = init_2s(&ctx, &w).unwrap();
    let run = run_parallel_2s(&ctx, &init, 3, false).unwrap();
    let mem = per_node_memory(&run.trace);
    assert_eq!(mem[0], 112);
    assert_eq!(mem[1], 112);
    assert_eq!(mem[3], 72);
    for (i, m) in mem.iter().enumerate() {
        assert_eq!(*m as u64, node_entries(Splitting::Two, i as u64 + 1, 4, d as u64, q as u64, n as u64));
    }

    let h3 = hyper3(4, false);
    let ctx3 = Admm3::new(&shape, &data, &h3, Mode::Permissive).unwrap();
    let init3 = init_3s(&ctx3, &w).unwrap();
    let run = run_parallel_3s(&ctx3, &init3, 3, false).unwrap();
    for (i, m) in per_node_memory(&run.trace).iter().enumerate() {
        assert_eq!(*m as u64, node_entries(Splitting::Three, i as u64 + 1, 4, d as u64, q as u64, n as u64), "worker {}", i + 1);
    }

    // Interior counts do not depend on N.
    for nl in [5u64, 9, 40] {
        assert_eq!(node_entries(Splitting::Two, 2, nl, 2, 1, 10), 112);
    }
}

#[test]
fn speedup_model_examples() {
    assert_eq!(speedup_model(1, 1, Splitting::Two).0, 3);
    assert_eq!(speedup_model(10, 5, Splitting::Two).0, 110);
    assert_eq!(speedup_model(10, 5, Splitting::Three).0, 190);
    let (serial, parallel) = speedup_model(10, 5, Splitting::Two);
    assert!(parallel < serial);
}

#[test]
fn executor_makespan_matches_simulation() {
    for (split, nl, k) in [(Splitting::Two, 4, 5), (Splitting::Three, 4, 5), (Splitting::Two, 6, 3), (Splitting::Three, 3, 7)] {
        let (shape, data, w) = tiny(nl, 2, 1, 3, Activation::Sin, 4);
        let got = match split {
            Splitting::Two => {
                let h = hyper2(false);
                let ctx = Admm2::new(&shape, &data, &h).unwrap();
                let init = init_2s(&ctx, &w).unwrap();
                run_parallel_2s(&ctx, &init, k, false).unwrap().trace
            }
            Splitting::Three => {
                let h = hyper3(nl, false);
                let ctx = Admm3::new(&shape, &data, &h, Mode::Permissive).unwrap();
                let init = init_3s(&ctx, &w).unwrap();
                run_parallel_3s(&ctx, &init, k, false).unwrap().trace
            }
        };
        assert_eq!(makespan(&got), speedup_model(k, nl, split).1, "{split} N={nl} K={k}");
        // Every op starts no earlier than the ops it depends on end.
        for o in &got.ops {
            assert_eq!(o.end_slot, o.start_slot + 1);
        }
    }
}

#[test]
fn makespan_is_linear_in_k_plus_n() {
    let grid = [4usize, 8, 16, 32];
    for split in [Splitting::Two, Splitting::Three] {
        // 2s keeps every worker within four slots per epoch plus the fill;
        // interior 3s workers settle at five slots per epoch.
        let slope = match split {
            Splitting::Two => 4,
            Splitting::Three => 5,
        };
        for &k in &grid {
            let ms: Vec<u64> = grid.iter().map(|&nl| speedup_model(k, nl, split).1).collect();
            assert!(ms.windows(2).all(|w| w[0] <= w[1]), "{split}: non-decreasing in N");
            for (&nl, &m) in grid.iter().zip(&ms) {
                assert!(m <= (slope * (k + nl)) as u64, "{split}: K={k} N={nl} makespan {m}");
            }
        }
        for &nl in &grid {
            let ms: Vec<u64> = grid.iter().map(|&k| speedup_model(k, nl, split).1).collect();
            assert!(ms.windows(2).all(|w| w[0] <= w[1]), "{split}: non-decreasing in K");
        }
        let ratio: Vec<f64> = grid
            .iter()
            .map(|&g| {
                let (s, p) = speedup_model(g, g, split);
                s as f64 / p as f64
            })
            .collect();
        assert!(ratio.windows(2).all(|w| w[1] > w[0]), "{split}: {ratio:?}");
    }
}

#[test]
fn trace_csv_has_spec_header() {
    let (shape, data, w) = tiny(3, 2, 1, 3, Activation::Sin, 5);
    let h = hyper2(false);
    let ctx = Admm2::new(&shape, &data, &h).unwrap();
    let init = init_2s(&ctx, &w).unwrap();
    let run = run_parallel_2s(&ctx, &init, 2, false).unwrap();
    let mut buf = Vec::new();
    run.trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "worker,epoch,op,start_slot,end_slot,resident_entries");
    assert_eq!(lines.count(), 2 * (2 * 3 + 1));
}

#[test]
fn programs_cover_the_serial_cycle() {
    for split in [Splitting::Two, Splitting::Three] {
        for nl in 2..7 {
            let total: usize = (1..=nl).map(|i| program(split, nl, i).len()).sum();
            assert_eq!(total, units_per_cycle(split, nl));
        }
    }
}
