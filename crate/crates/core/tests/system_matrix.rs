use eqanis::physics::{
    mt_to_am, tm_to_am2, AnisotropyModel, FieldSequence, ParticleParams, ScanGrid, DEFAULT_MS,
    DEFAULT_TEMPERATURE,
};
use eqanis::sysfn::{
    assemble_on_support, assemble_system_matrix, AssemblyInput, Model, ModelSettings, SystemMatrix,
};
use eqanis::vec3::{self, Vec3};

fn sequence() -> FieldSequence {
    let g = tm_to_am2(1.0);
    FieldSequence::new(
        [-g, -g, 2.0 * g],
        [mt_to_am(12.0), mt_to_am(12.0)],
        [0.0, 0.0],
        2e5,
        4,
        1e7,
    )
    .unwrap()
}

fn assemble(
    model: Model,
    grid: &ScanGrid,
    anis: &AnisotropyModel,
    particle: &ParticleParams,
    channels: &[Vec3],
) -> SystemMatrix {
    let seq = sequence();
    let input = AssemblyInput {
        grid,
        sequence: &seq,
        anisotropy: anis,
        particle,
        channels,
        settings: ModelSettings::default(),
    };
    assemble_system_matrix(model, &input, None).unwrap().matrix
}

fn max_abs(m: &SystemMatrix) -> f64 {
    m.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[test]
fn rows_scale_with_saturation_moment_at_fixed_beta() {
    let grid = ScanGrid::new(4, 3, [16e-3, 12e-3]).unwrap();
    let channels = [vec3::E1, vec3::E2];
    let d = 18e-9;
    let p1 = ParticleParams::new(d, DEFAULT_MS, DEFAULT_TEMPERATURE).unwrap();
    let p2 = ParticleParams::new(d, 2.0 * DEFAULT_MS, 2.0 * DEFAULT_TEMPERATURE).unwrap();
    let axis = vec3::normalize([1.0, 2.0, 0.5]).unwrap();
    let cases = [
        (
            Model::Eq,
            AnisotropyModel::isotropic(),
            AnisotropyModel::isotropic(),
        ),
        (
            Model::Eqanis,
            AnisotropyModel::aligned(axis, 2000.0).unwrap(),
            AnisotropyModel::aligned(axis, 4000.0).unwrap(),
        ),
    ];
    for (model, a1, a2) in cases {
        let s1 = assemble(model, &grid, &a1, &p1, &channels);
        let s2 = assemble(model, &grid, &a2, &p2, &channels);
        let tol = 1e-12 * max_abs(&s1);
        for (u, v) in s1.data.iter().zip(&s2.data) {
            assert!((2.0 * u - v).norm() < tol, "{model:?}: {u} vs {v}");
        }
    }
}

#[test]
fn channel_order_permutes_row_blocks() {
    let grid = ScanGrid::new(3, 3, [12e-3, 12e-3]).unwrap();
    let p = ParticleParams::with_diameter(20e-9).unwrap();
    let anis = AnisotropyModel::fluid_b3(3500.0, 2.0, 13_000.0).unwrap();
    let a = assemble(Model::Eqanis, &grid, &anis, &p, &[vec3::E1, vec3::E2]);
    let b = assemble(Model::Eqanis, &grid, &anis, &p, &[vec3::E2, vec3::E1]);
    for k in 0..a.n_freq {
        assert_eq!(a.row(a.row_index(0, k)), b.row(b.row_index(1, k)));
        assert_eq!(a.row(a.row_index(1, k)), b.row(b.row_index(0, k)));
    }
}

#[test]
fn file_round_trip_is_exact() {
    let grid = ScanGrid::new(3, 2, [12e-3, 8e-3]).unwrap();
    let p = ParticleParams::with_diameter(20e-9).unwrap();
    let anis = AnisotropyModel::aligned(vec3::E1, 1500.0).unwrap();
    let s = assemble(Model::Eqanis, &grid, &anis, &p, &[vec3::E1, vec3::E2]);
    let mut bytes = Vec::new();
    s.write_to(&mut bytes).unwrap();
    let back = SystemMatrix::read_from(bytes.as_slice()).unwrap();
    assert_eq!(back, s);
    assert!(SystemMatrix::read_from(&bytes[..bytes.len() - 1]).is_err());
}

/// Reversing the drive in time maps a sine sequence onto itself with the
/// field-free point reflected, so rows obey mirror relations on a centred grid.
#[test]
fn mirror_and_point_symmetry() {
    let grid = ScanGrid::new(5, 5, [20e-3, 20e-3]).unwrap();
    let p = ParticleParams::with_diameter(20e-9).unwrap();
    let anis = AnisotropyModel::fluid_b3(3500.0, 2.0, 13_000.0).unwrap();
    let s = assemble(Model::Eqanis, &grid, &anis, &p, &[vec3::E1, vec3::E2]);
    let tol = 1e-10 * max_abs(&s);
    let idx = |ix: usize, iy: usize| iy * grid.nx + ix;
    for k in 0..s.n_freq {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for l in 0..2 {
            let row = s.row(s.row_index(l, k));
            let mirror = if l == 0 { sign } else { -sign };
            for iy in 0..5 {
                for ix in 0..5 {
                    let v = row[idx(ix, iy)];
                    let point = row[idx(4 - ix, 4 - iy)];
                    assert!((point - v.conj()).norm() < tol, "point k={k} l={l}");
                    let mx = row[idx(4 - ix, iy)];
                    assert!((mx - mirror * v.conj()).norm() < tol, "mirror k={k} l={l}");
                }
            }
        }
    }
}

#[test]
fn support_assembly_matches_full_columns() {
    let grid = ScanGrid::new(4, 4, [16e-3, 16e-3]).unwrap();
    let p = ParticleParams::with_diameter(20e-9).unwrap();
    let anis = AnisotropyModel::fluid_b3(3500.0, 2.0, 13_000.0).unwrap();
    let seq = sequence();
    let channels = [vec3::E1, vec3::E2];
    let input = AssemblyInput {
        grid: &grid,
        sequence: &seq,
        anisotropy: &anis,
        particle: &p,
        channels: &channels,
        settings: ModelSettings::default(),
    };
    let full = assemble_system_matrix(Model::Eqanis, &input, None)
        .unwrap()
        .matrix;
    let support: Vec<bool> = (0..grid.len()).map(|j| j % 3 == 1).collect();
    let part = assemble_on_support(Model::Eqanis, &input, None, Some(&support))
        .unwrap()
        .matrix;
    for r in 0..full.n_rows() {
        for (j, &on) in support.iter().enumerate() {
            let expected = if on {
                full.row(r)[j]
            } else {
                Default::default()
            };
            assert_eq!(part.row(r)[j], expected);
        }
    }
    assert!(assemble_on_support(Model::Eqanis, &input, None, Some(&support[1..])).is_err());
    assert!(assemble_on_support(Model::Reduced, &input, None, Some(&support)).is_err());
}
