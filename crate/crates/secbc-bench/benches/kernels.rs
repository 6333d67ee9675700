//! Microbenchmarks for the hot kernels: field arithmetic, rank computation,
//! a full honest-scheme trial, and the exact leakage audit.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use secbc_core::audit::{leak_audit, Conditioning};
use secbc_core::harness::{run_trial, Scheme, TrialConfig};
use secbc_core::{ErasureModel, Field, Matrix, MessageSpec};

fn field_ops(c: &mut Criterion) {
    let field = Field::new(8).unwrap();
    c.bench_function("gf256_mul", |b| {
        b.iter(|| {
            let mut acc = 0u16;
            for x in 1..256u16 {
                acc ^= field.mul(black_box(x), black_box(0xb5));
            }
            acc
        })
    });
    let row: Vec<u16> = (0..1024u16).map(|i| i & 0xff).collect();
    c.bench_function("gf256_axpy_1k", |b| {
        b.iter_batched(
            || vec![0u16; 1024],
            |mut acc| {
                field.axpy(&mut acc, black_box(0x53), &row);
                acc
            },
            criterion::BatchSize::SmallInput,
        )
    });
}

fn rank_200(c: &mut Criterion) {
    let field = Field::new(8).unwrap();
    let mut state = 0x12345678u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) & 0xff) as u16
    };
    let rows: Vec<Vec<u16>> = (0..200).map(|_| (0..200).map(|_| next()).collect()).collect();
    let m = Matrix::from_rows(rows);
    c.bench_function("rank_200x200", |b| b.iter(|| black_box(&m).rank(&field)));
}

fn honest_trial(c: &mut Criterion) {
    let model = ErasureModel::independent(vec![0.5, 0.5]).unwrap();
    let config = TrialConfig::new(Scheme::Honest, MessageSpec::new(vec![100, 100]), model);
    c.bench_function("honest_trial_n100", |b| {
        let mut i = 0;
        b.iter(|| {
            i += 1;
            run_trial(&config, i).unwrap()
        })
    });
}

fn leakage_audit(c: &mut Criterion) {
    let model = ErasureModel::independent(vec![0.5, 0.5]).unwrap();
    let config = TrialConfig::new(Scheme::Honest, MessageSpec::new(vec![100, 100]), model);
    let outcome = run_trial(&config, 0).unwrap();
    let field = outcome.transcript.field();
    c.bench_function("leak_audit_n100", |b| {
        b.iter(|| leak_audit(&field, &outcome.transcript, 0b10, 0, Conditioning::OthersKnown))
    });
}

criterion_group!(benches, field_ops, rank_200, honest_trial, leakage_audit);
criterion_main!(benches);
