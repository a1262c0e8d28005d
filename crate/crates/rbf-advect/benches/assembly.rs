use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rbf_advect::experiment::{run_many, Method, RunConfig};
use rbf_advect::interpolation::{CenterSet, NodalBasis};
use rbf_advect::par::Execution;
use rbf_advect::quadrature::{gram_matrix, QuadGrid, QuadratureRule};
use rbf_advect::{Kernel, ProblemName};

const MODES: [(&str, Execution); 2] = [("serial", Execution::Serial), ("parallel", Execution::Parallel)];

fn basis_2d(n: usize, exec: Execution) -> NodalBasis {
    let centers = CenterSet::tensor_grid_2d([0.0, 0.0], [1.0, 1.0], n, n).unwrap();
    NodalBasis::new(centers, Kernel::CUBIC, None, &[0.0, 0.0], &[1.0, 1.0], exec).unwrap()
}

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("nodal_basis_2d_16x16");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| basis_2d(16, exec)));
    }
    g.finish();

    let nb = basis_2d(16, Execution::Parallel);
    let mut g = c.benchmark_group("differentiation_matrix_2d_16x16");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| nb.differentiation_matrix(0, exec)));
    }
    g.finish();

    let nb1 = NodalBasis::new(
        CenterSet::equidistant_1d(0.0, 1.0, 80).unwrap(),
        Kernel::QUINTIC,
        None,
        &[0.0],
        &[1.0],
        Execution::Parallel,
    )
    .unwrap();
    let grid = QuadGrid::aligned(&[&nb1], &[0.0], &[1.0], &QuadratureRule::default());
    let mut g = c.benchmark_group("gram_1d_quintic_80");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| gram_matrix(&nb1, &grid, exec)));
    }
    g.finish();

    let configs: Vec<RunConfig> = [10, 20, 40, 80]
        .iter()
        .map(|&n| RunConfig::new(ProblemName::InflowBump, Method::Sat, Kernel::CUBIC, n))
        .collect();
    let mut g = c.benchmark_group("run_many_cubic_sat_study");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_many(&configs, exec)));
    }
    g.finish();
}

criterion_group!(benches, assembly);
criterion_main!(benches);
