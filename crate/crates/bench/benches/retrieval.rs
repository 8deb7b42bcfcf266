use std::hint::black_box;

use bsc_bench::fixture;
use bsc_core::format::ModelFile;
use bsc_core::pipeline;
use bsc_core::{BbcParams, BinaryIndex, CorrelationMode, IbcParams, PackedCode};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn search(c: &mut Criterion) {
    let f = fixture();
    let mut group = c.benchmark_group("search");
    group.throughput(Throughput::Elements(f.queries.len() as u64));
    group.bench_function("exact", |b| {
        b.iter(|| pipeline::query_exact(black_box(&f.db), black_box(&f.queries), 10).unwrap())
    });

    let ibc = ModelFile::Ibc {
        model: bsc_core::ibc::train_ibc(&f.ibc_training(), IbcParams { lambda: 1.0, outer_iters: 2, ..IbcParams::default() })
            .unwrap()
            .0,
        correlation: CorrelationMode::TopM(15),
    };
    let index = pipeline::encode_index(&ibc, &f.db).unwrap();
    group.bench_function("hamming_ibc_64", |b| {
        b.iter(|| pipeline::query_hashed(black_box(&ibc), black_box(&index), black_box(&f.queries), 10).unwrap())
    });
    group.finish();
}

fn scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("scan");
    for &n in &[1_000usize, 100_000] {
        for &bits in &[64usize, 128] {
            let mut index = BinaryIndex::new(bits);
            let mut state = 0x9e37_79b9_7f4a_7c15u64;
            for i in 0..n {
                let code: Vec<i8> = (0..bits)
                    .map(|_| {
                        state ^= state << 13;
                        state ^= state >> 7;
                        state ^= state << 17;
                        if state & 1 == 1 { 1 } else { -1 }
                    })
                    .collect();
                index.push(format!("v{i}"), PackedCode::pack(&code).unwrap()).unwrap();
            }
            let query = index.codes()[0].clone();
            group.throughput(Throughput::Elements(n as u64));
            group.bench_with_input(BenchmarkId::new(format!("{bits}bit"), n), &index, |b, idx| {
                b.iter(|| idx.search(black_box(&query), 100).unwrap())
            });
        }
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let f = fixture();
    let ibc_train = f.ibc_training();
    let bbc_train = f.bbc_training();
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("ibc_64bit_1_outer", |b| {
        let params = IbcParams { lambda: 1.0, outer_iters: 1, ..IbcParams::default() };
        b.iter(|| bsc_core::ibc::train_ibc(black_box(&ibc_train), params).unwrap())
    });
    group.bench_function("bbc_32x2_1_sweep", |b| {
        let params = BbcParams { c1: 32, c2: 2, mu: 1.0, iters: 1, seed: 0 };
        b.iter(|| bsc_core::bbc::train_bbc(black_box(&bbc_train), params).unwrap())
    });
    group.finish();
}

criterion_group!(benches, search, scan, training);
criterion_main!(benches);
