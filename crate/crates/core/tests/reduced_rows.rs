use eqanis::physics::{
    mt_to_am, tm_to_am2, AnisotropyModel, FieldSequence, ParticleParams, ScanGrid,
};
use eqanis::reduced::{ChebIndex, ReducedModel};
use eqanis::sysfn::{assemble_system_matrix, AssemblyInput, Model, ModelSettings};
use eqanis::vec3;
use num_complex::Complex64;

fn small_lissajous() -> FieldSequence {
    let g = tm_to_am2(1.0);
    FieldSequence::new(
        [-g, -g, 2.0 * g],
        [mt_to_am(12.0), mt_to_am(12.0)],
        [0.3, -0.7],
        2e5,
        4,
        1e7,
    )
    .unwrap()
}

/// Summing every Chebyshev summand must recover the sampled full-model rows.
#[test]
fn all_summands_reproduce_full_rows() {
    let seq = small_lissajous();
    let grid = ScanGrid::new(17, 17, [10e-3, 10e-3]).unwrap();
    let particle = ParticleParams::with_diameter(15e-9).unwrap();
    let anis = AnisotropyModel::aligned(vec3::normalize([1.0, 1.0, 0.0]).unwrap(), 1500.0).unwrap();
    let channels = [vec3::E1, vec3::E2];
    let input = AssemblyInput {
        grid: &grid,
        sequence: &seq,
        anisotropy: &anis,
        particle: &particle,
        channels: &channels,
        settings: ModelSettings::default(),
    };
    let full = assemble_system_matrix(Model::Eqanis, &input, None)
        .unwrap()
        .matrix;
    let red = ReducedModel::new(&input).unwrap();
    let nb = seq.divider as i64;
    let m0 = particle.m0();
    for k in [1usize, 4, 5, 9, 13, 22] {
        let ls = red.selected(k).lambda;
        let summands: Vec<ChebIndex> = (ls - 30..=ls + 30)
            .map(|l| ChebIndex::new(k as i64, l, nb, seq.phases))
            .collect();
        for l in 0..2 {
            let spec = red.normalized_spectrum(l, &summands);
            let w = full.omega(k);
            let f = -eqanis::physics::MU0 * m0 * Complex64::new(0.0, w);
            let row = full.row(full.row_index(l, k));
            let scale = row.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let err = spec
                .iter()
                .zip(row)
                .map(|(a, b)| (f * a - b).norm())
                .fold(0.0, f64::max);
            assert!(
                err < 2e-3 * scale,
                "k={k} channel {l}: {err:e} vs {scale:e}"
            );
        }
    }
}

/// Rows at a position depend on the grid spacing only, not on the grid extent.
#[test]
fn enlarging_the_grid_keeps_common_columns() {
    let seq = small_lissajous();
    let particle = ParticleParams::with_diameter(18e-9).unwrap();
    let anis = AnisotropyModel::fluid_b3(3500.0, 2.0, 13_000.0).unwrap();
    let channels = [vec3::E1, vec3::E2];
    let build = |n: usize| {
        let grid = ScanGrid::new(n, n, [2e-3 * n as f64, 2e-3 * n as f64]).unwrap();
        let input = AssemblyInput {
            grid: &grid,
            sequence: &seq,
            anisotropy: &anis,
            particle: &particle,
            channels: &channels,
            settings: ModelSettings::default(),
        };
        assemble_system_matrix(Model::Reduced, &input, None)
            .unwrap()
            .matrix
    };
    let small = build(5);
    let large = build(7);
    let scale = small.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for r in 0..small.n_rows() {
        for iy in 0..5 {
            for ix in 0..5 {
                let a = small.row(r)[iy * 5 + ix];
                let b = large.row(r)[(iy + 1) * 7 + ix + 1];
                assert!(
                    (a - b).norm() <= 1e-12 * scale,
                    "row {r} at ({ix}, {iy}): {a} vs {b}"
                );
            }
        }
    }
}
