use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::rngs::StdRng;
use rand::SeedableRng;

use uascan_core::codec::golden::reference_fixtures;
use uascan_core::codec::{
    decode_value, encode_value, sample, MessageType, SecurityHeader, ValueKind, WireValue,
};
use uascan_core::transport::split_message;

fn values(kind: &ValueKind, n: usize) -> Vec<WireValue> {
    let mut rng = StdRng::seed_from_u64(42);
    (0..n).map(|_| sample::value(&mut rng, kind)).collect()
}

fn value_codec(c: &mut Criterion) {
    let kinds = [
        ValueKind::Int32,
        ValueKind::Float64,
        ValueKind::UtfString,
        ValueKind::NodeRef,
        ValueKind::LocalizedText,
        ValueKind::Array(Box::new(ValueKind::Int32)),
    ];
    let mut g = c.benchmark_group("value");
    for kind in &kinds {
        let vals = values(kind, 256);
        let encoded: Vec<Vec<u8>> = vals.iter().map(|v| encode_value(v).unwrap()).collect();
        g.throughput(Throughput::Elements(vals.len() as u64));
        g.bench_with_input(BenchmarkId::new("encode", kind.name()), &vals, |b, vals| {
            b.iter(|| {
                for v in vals {
                    black_box(encode_value(v).unwrap());
                }
            })
        });
        g.bench_with_input(
            BenchmarkId::new("decode", kind.name()),
            &encoded,
            |b, bufs| {
                b.iter(|| {
                    for buf in bufs {
                        black_box(decode_value(buf, kind).unwrap());
                    }
                })
            },
        );
    }
    g.finish();
}

fn service_fixtures(c: &mut Criterion) {
    let fixtures = reference_fixtures();
    let mut g = c.benchmark_group("service");
    g.bench_function("encode_all_fixtures", |b| {
        b.iter(|| {
            for (_, f) in &fixtures {
                black_box(f.encode().unwrap());
            }
        })
    });
    let encoded: Vec<_> = fixtures.iter().map(|(_, f)| f.encode().unwrap()).collect();
    g.bench_function("decode_all_fixtures", |b| {
        b.iter(|| {
            for ((_, f), buf) in fixtures.iter().zip(&encoded) {
                black_box(f.decode_like(buf).unwrap());
            }
        })
    });
    g.finish();
}

fn chunking(c: &mut Criterion) {
    let security = SecurityHeader::Symmetric { token_id: 1 };
    let mut g = c.benchmark_group("split_message");
    for size in [1_024usize, 65_536, 1 << 20] {
        let payload = vec![0xA5u8; size];
        g.throughput(Throughput::Bytes(size as u64));
        g.bench_with_input(BenchmarkId::from_parameter(size), &payload, |b, p| {
            b.iter(|| {
                black_box(
                    split_message(MessageType::Message, 7, &security, 1, 1, p, 8_192).unwrap(),
                )
            })
        });
    }
    g.finish();
}

criterion_group!(benches, value_codec, service_fixtures, chunking);
criterion_main!(benches);
