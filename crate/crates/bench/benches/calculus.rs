use criterion::{black_box, criterion_group, criterion_main, Criterion};
use fiocalc_core::classes::{AmplitudeSpec, DecayFlags, OrderPair, OrderTriple, PhaseProfile, PhaseSpec, SymbolSpec};
use fiocalc_core::composer::{pt_expand, tp_expand, ExpandOptions};
use fiocalc_core::expr::diff;
use fiocalc_core::{parse, Point, Var};

const AMP: &str = "atan(x1)*jbr(y1)^-1*jbr(xi1)^-1";
const SYM: &str = "jbr(xi1)*(2 + atan(x1))";
const PHASE: &str = "x1*xi1 + atan(x1)*jbr(xi1)/4";

fn specs() -> (AmplitudeSpec, SymbolSpec, PhaseSpec) {
    let a = AmplitudeSpec::new(parse(AMP, 1).unwrap(), 1, OrderTriple::new(0.0, -1.0, -1.0), DecayFlags::ALL).unwrap();
    let p = SymbolSpec::new(parse(SYM, 1).unwrap(), 1, OrderPair::new(0.0, 1.0), DecayFlags::ALL).unwrap();
    let phi = PhaseSpec::new(parse(PHASE, 1).unwrap(), 1, PhaseProfile::Pt).unwrap();
    (a, p, phi)
}

fn bench(c: &mut Criterion) {
    c.bench_function("parse", |b| b.iter(|| parse(black_box(PHASE), 1).unwrap()));

    let e = parse(AMP, 1).unwrap();
    c.bench_function("diff_xi_4", |b| b.iter(|| diff(black_box(&e), Var::xi(0), 4)));

    let d = diff(&e, Var::xi(0), 4).compile();
    let pt = Point::new().with(Var::x(0), 0.3).with(Var::y(0), -1.2).with(Var::xi(0), 7.0);
    c.bench_function("compiled_eval", |b| b.iter(|| d.eval(black_box(&pt))));

    let (a, p, phi) = specs();
    let fast = ExpandOptions::unchecked();
    c.bench_function("tp_expand_3", |b| b.iter(|| tp_expand(&a, &p, 3, &fast).unwrap()));
    c.bench_function("pt_expand_3", |b| b.iter(|| pt_expand(&a, &p, &phi, 3, &fast).unwrap()));

    let series = tp_expand(&a, &p, 3, &fast).unwrap().compiled();
    c.bench_function("series_eval", |b| b.iter(|| series.eval(black_box(&pt), 3)));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench
}
criterion_main!(benches);
