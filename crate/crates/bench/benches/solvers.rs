use std::hint::black_box;

use bell_bench::random_functional;
use bell_core::classical;
use bell_core::kv::{self, KvGame};
use bell_core::norms::{self, Matrix, Target};
use bell_core::quantum::{self, SeesawConfig};
use bell_core::relax::{self, Mode, RelaxConfig};
use bell_core::{BellFunctional, PureState};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn classical_value(c: &mut Criterion) {
    let mut g = c.benchmark_group("classical_exact");
    for (n, k) in [(2, 2), (3, 3), (4, 3)] {
        let m = random_functional(n, k, 1);
        g.bench_with_input(BenchmarkId::from_parameter(format!("N{n}K{k}")), &m, |b, m| {
            b.iter(|| classical::classical_value_exact(black_box(m)).unwrap())
        });
    }
    let kv4 = KvGame::build(2, 0.25).unwrap().functional(false).unwrap();
    g.bench_function("kv_n4", |b| b.iter(|| classical::classical_value_exact(black_box(&kv4)).unwrap()));
    g.finish();
}

fn seesaw(c: &mut Criterion) {
    let mut g = c.benchmark_group("seesaw");
    g.sample_size(10);
    let cfg = SeesawConfig { restarts: 2, rounds: 20, ..SeesawConfig::default() };
    let chsh = BellFunctional::chsh();
    let state = PureState::maximally_entangled(2);
    g.bench_function("chsh_d2", |b| b.iter(|| quantum::seesaw(black_box(&chsh), 2, &state, &cfg).unwrap()));
    g.finish();
}

fn kv_values(c: &mut Criterion) {
    let mut g = c.benchmark_group("kv_direct");
    for l in [2u32, 3] {
        let game = KvGame::build(l, 0.2).unwrap();
        let s = game.quantum_strategy(PureState::maximally_entangled(game.n())).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(game.n()), &s, |b, s| b.iter(|| game.value_direct(black_box(s)).unwrap()));
    }
    g.bench_function("closed_form_n8", |b| {
        let alpha = PureState::maximally_entangled(8);
        b.iter(|| kv::value_closed_form(black_box(alpha.schmidt()), 8, 0.2).unwrap())
    });
    g.finish();
}

fn relaxation(c: &mut Criterion) {
    let mut g = c.benchmark_group("relax");
    g.sample_size(10);
    let m = random_functional(3, 3, 2);
    let cfg = RelaxConfig { restarts: 1, rounds: 20, ..RelaxConfig::default() };
    for mode in [Mode::OpN, Mode::OpBar] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| relax::optimize(black_box(&m), 3, mode, &cfg).unwrap())
        });
    }
    g.finish();
}

fn norm_estimates(c: &mut Criterion) {
    let mut g = c.benchmark_group("norms");
    let cols: Vec<Vec<f64>> = (0..16).map(|i| (0..8).map(|j| ((i * 7 + j * 3) % 5) as f64 - 2.0).collect()).collect();
    g.bench_function("op_inf_to_2_k16", |b| b.iter(|| norms::op_norm_inf_to_2(black_box(&cols)).unwrap()));
    let id = Matrix::identity(64);
    g.bench_function("ell_mc_id64_1e4", |b| b.iter(|| norms::ell_norm_mc(black_box(&id), Target::Linf, 10_000, 3).unwrap()));
    g.finish();
}

criterion_group!(benches, classical_value, seesaw, kv_values, relaxation, norm_estimates);
criterion_main!(benches);
