use nalgebra::{DMatrix, Matrix3, SymmetricEigen};

use super::{BlockMatrix33, MeasurementGraph, ScalarCsr};
use crate::error::{Error, Result};

/// Largest accepted condition number of a dual block before inversion.
const MAX_DUAL_CONDITION: f64 = 1e12;

/// Merged `C x T` measurement blocks and their adjacency weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MergedBlocks {
    /// `[R̃_CT]_{c,t} = Σ_m k R̃_{c,m(t)} R̄_{m,m1}`.
    pub rtilde_ct: BlockMatrix33,
    /// `[A_CT]_{c,t} = Σ_m k`.
    pub adj_ct: ScalarCsr,
}

/// Collapses every marker observation onto the reference marker of its time
/// step. Edges with zero concentration are skipped; they only matter for the
/// translation problem.
pub fn merge_object_blocks(g: &MeasurementGraph) -> Result<MergedBlocks> {
    let mut blocks = Vec::with_capacity(g.edges().len());
    let mut weights = Vec::with_capacity(g.edges().len());
    for e in g.edges() {
        let rel = g
            .object()
            .relative(e.marker)
            .ok_or(Error::UnknownMarker(e.marker))?;
        if e.noise.kappa <= 0.0 {
            continue;
        }
        let c = g.camera_index(e.cam).ok_or(Error::UnknownCamera(e.cam))?;
        let t = g.time_index(e.time).expect("graph validated time ids");
        blocks.push((c, t, e.noise.kappa * e.r_meas.matrix() * rel.r.matrix()));
        weights.push((c, t, e.noise.kappa));
    }
    let (nc, nt) = (g.num_cameras(), g.num_times());
    Ok(MergedBlocks {
        rtilde_ct: BlockMatrix33::from_triplets(nc, nt, blocks),
        adj_ct: ScalarCsr::from_triplets(nc, nt, weights),
    })
}

/// Row and column sums of the merged adjacency.
pub fn degree_matrix(adj_ct: &ScalarCsr) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut deg_c = vec![0.0; adj_ct.rows()];
    let mut deg_t = vec![0.0; adj_ct.cols()];
    for (i, j, v) in adj_ct.iter() {
        deg_c[i] += v;
        deg_t[j] += v;
    }
    if let Some(i) = deg_c.iter().position(|d| *d <= 0.0) {
        return Err(Error::DisconnectedNode {
            kind: "camera",
            index: i,
        });
    }
    if let Some(j) = deg_t.iter().position(|d| *d <= 0.0) {
        return Err(Error::DisconnectedNode {
            kind: "time",
            index: j,
        });
    }
    Ok((deg_c, deg_t))
}

/// Inverse of a symmetric positive definite dual block; `index` names the
/// block in the error.
pub fn invert_dual_block(block: &Matrix3<f64>, index: usize) -> Result<Matrix3<f64>> {
    let eig = SymmetricEigen::new(0.5 * (block + block.transpose()));
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(lo > 0.0) || hi / lo > MAX_DUAL_CONDITION {
        return Err(Error::SingularDualBlock(index));
    }
    let inv = block.try_inverse().ok_or(Error::SingularDualBlock(index))?;
    Ok(0.5 * (inv + inv.transpose()))
}

/// Camera-side operator `R̃_CT Λ_T^-1 R̃_CTᵀ` of the power graph, as a
/// `C x C` block matrix.
pub fn power_graph_operator(
    rtilde_ct: &BlockMatrix33,
    lambda_t: &[Matrix3<f64>],
) -> Result<BlockMatrix33> {
    if lambda_t.len() != rtilde_ct.cols() {
        return Err(Error::Shape(format!(
            "{} dual blocks for {} time nodes",
            lambda_t.len(),
            rtilde_ct.cols()
        )));
    }
    let inv: Vec<Matrix3<f64>> = lambda_t
        .iter()
        .enumerate()
        .map(|(t, b)| invert_dual_block(b, t))
        .collect::<Result<_>>()?;
    let by_time = rtilde_ct.transpose();
    Ok(accumulate_power_operator(rtilde_ct.rows(), &by_time, &inv))
}

/// `Σ_t B_{:,t} W_t B_{:,t}ᵀ` given `by_time = Bᵀ` (`T x C`, blocks transposed).
pub(crate) fn accumulate_power_operator(
    n: usize,
    by_time: &BlockMatrix33,
    weights: &[Matrix3<f64>],
) -> BlockMatrix33 {
    let mut acc = vec![Matrix3::zeros(); n * n];
    let mut scratch: Vec<(usize, Matrix3<f64>, Matrix3<f64>)> = Vec::new();
    for (t, w) in weights.iter().enumerate() {
        scratch.clear();
        scratch.extend(by_time.row(t).map(|(c, bt)| (c, bt.transpose() * w, *bt)));
        for (i, left, _) in &scratch {
            for (j, _, right_t) in &scratch {
                acc[i * n + j] += left * right_t;
            }
        }
    }
    // Exact block symmetry regardless of rounding in the products above.
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (acc[i * n + j] + acc[j * n + i].transpose());
            acc[i * n + j] = s;
            acc[j * n + i] = s.transpose();
        }
        let d = acc[i * n + i];
        acc[i * n + i] = 0.5 * (d + d.transpose());
    }
    BlockMatrix33::from_dense_blocks(n, &acc)
}

/// Scalar power-graph adjacency `A_CT Δ_T^-1 A_CTᵀ` (dense `C x C`).
pub fn power_graph_adjacency(adj_ct: &ScalarCsr, deg_t: &[f64]) -> DMatrix<f64> {
    let n = adj_ct.rows();
    let mut out = DMatrix::zeros(n, n);
    let by_time = adj_ct.transpose();
    for (t, d) in deg_t.iter().enumerate() {
        let col: Vec<(usize, f64)> = by_time.row(t).collect();
        for &(i, a) in &col {
            for &(j, b) in &col {
                out[(i, j)] += a * b / d;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::blockgraph::{EdgeMeasurement, ObjectModel};
    use crate::geom::{NoiseParams, Pose, Rotation};

    fn edge(cam: usize, marker: usize, time: usize, r: Rotation, kappa: f64) -> EdgeMeasurement {
        EdgeMeasurement {
            cam,
            marker,
            time,
            r_meas: r,
            t_meas: Vector3::zeros(),
            noise: NoiseParams::new(kappa, 1.0),
        }
    }

    #[test]
    fn single_edge_block_is_measurement() {
        let mut g = ChaCha8Rng::seed_from_u64(1);
        let r = Rotation::random(&mut g);
        let graph =
            MeasurementGraph::new(vec![edge(0, 0, 0, r, 1.0)], ObjectModel::single(0)).unwrap();
        let m = merge_object_blocks(&graph).unwrap();
        assert_eq!(m.rtilde_ct.get(0, 0), Some(r.matrix()));
        assert_eq!(m.adj_ct.get(0, 0), 1.0);
    }

    #[test]
    fn two_markers_same_merged_rotation_add_up() {
        let mut g = ChaCha8Rng::seed_from_u64(2);
        let q = Rotation::random(&mut g);
        let rel = Rotation::random(&mut g);
        let object = ObjectModel::new(vec![
            (0, Pose::identity()),
            (1, Pose::new(rel, Vector3::new(0.1, 0.2, 0.3))),
        ])
        .unwrap();
        // Measurement of marker 1 whose merged rotation R̃ R̄ equals q.
        let r1 = q * rel.transpose();
        let graph =
            MeasurementGraph::new(vec![edge(0, 0, 0, q, 1.0), edge(0, 1, 0, r1, 1.0)], object)
                .unwrap();
        let m = merge_object_blocks(&graph).unwrap();
        assert!((m.rtilde_ct.get(0, 0).unwrap() - 2.0 * q.matrix()).norm() < 1e-14);
        assert_eq!(m.adj_ct.get(0, 0), 2.0);
    }

    #[test]
    fn unknown_marker_rejected() {
        let graph = MeasurementGraph::new(
            vec![edge(0, 7, 0, Rotation::identity(), 1.0)],
            ObjectModel::single(0),
        )
        .unwrap();
        assert_eq!(merge_object_blocks(&graph), Err(Error::UnknownMarker(7)));
    }

    #[test]
    fn zero_kappa_edges_skipped() {
        let graph = MeasurementGraph::new(
            vec![
                edge(0, 0, 0, Rotation::identity(), 1.0),
                edge(1, 0, 0, Rotation::identity(), 0.0),
            ],
            ObjectModel::single(0),
        )
        .unwrap();
        let m = merge_object_blocks(&graph).unwrap();
        assert_eq!(m.rtilde_ct.nnz_blocks(), 1);
        assert_eq!(
            degree_matrix(&m.adj_ct),
            Err(Error::DisconnectedNode {
                kind: "camera",
                index: 1
            })
        );
    }

    #[test]
    fn degree_examples() {
        let a = ScalarCsr::from_triplets(1, 1, [(0, 0, 3.5)]);
        assert_eq!(degree_matrix(&a).unwrap(), (vec![3.5], vec![3.5]));
        let full =
            ScalarCsr::from_triplets(2, 3, (0..2).flat_map(|i| (0..3).map(move |j| (i, j, 1.0))));
        assert_eq!(
            degree_matrix(&full).unwrap(),
            (vec![3.0, 3.0], vec![2.0, 2.0, 2.0])
        );
    }

    #[test]
    fn degrees_match_dense_sums() {
        let mut g = ChaCha8Rng::seed_from_u64(5);
        let mut trips: Vec<_> = (0..60)
            .map(|_| {
                (
                    g.random_range(0..8),
                    g.random_range(0..12),
                    g.random_range(0.1..5.0),
                )
            })
            .collect();
        trips.extend((0..8).map(|i| (i, i, 1.0)));
        trips.extend((0..12).map(|j| (j % 8, j, 1.0)));
        let a = ScalarCsr::from_triplets(8, 12, trips);
        let (dc, dt) = degree_matrix(&a).unwrap();
        let d = a.to_dense();
        for (i, v) in dc.iter().enumerate() {
            assert!((v - d.row(i).sum()).abs() < 1e-12);
        }
        for (j, v) in dt.iter().enumerate() {
            assert!((v - d.column(j).sum()).abs() < 1e-12);
        }
    }

    #[test]
    fn power_operator_trivial_case() {
        let mut g = ChaCha8Rng::seed_from_u64(3);
        let q = Rotation::random(&mut g);
        let r = BlockMatrix33::from_triplets(1, 1, [(0, 0, *q.matrix())]);
        let p = power_graph_operator(&r, &[Matrix3::identity()]).unwrap();
        assert!((p.get(0, 0).unwrap() - Matrix3::identity()).norm() < 1e-14);
    }

    #[test]
    fn power_operator_singular_block() {
        let r = BlockMatrix33::from_triplets(
            1,
            2,
            [(0, 0, Matrix3::identity()), (0, 1, Matrix3::identity())],
        );
        let mut bad = Matrix3::identity();
        bad[(2, 2)] = 0.0;
        assert_eq!(
            power_graph_operator(&r, &[Matrix3::identity(), bad]),
            Err(Error::SingularDualBlock(1))
        );
    }

    #[test]
    fn power_operator_noiseless_factorization() {
        let mut g = ChaCha8Rng::seed_from_u64(4);
        let (nc, nt) = (4, 7);
        let rc: Vec<Rotation> = (0..nc).map(|_| Rotation::random(&mut g)).collect();
        let rt: Vec<Rotation> = (0..nt).map(|_| Rotation::random(&mut g)).collect();
        let mut a = vec![vec![0.0; nt]; nc];
        let mut trips = Vec::new();
        for c in 0..nc {
            for t in 0..nt {
                if g.random_bool(0.6) || c == t % nc {
                    a[c][t] = g.random_range(0.5..3.0);
                    trips.push((c, t, a[c][t] * rc[c].matrix() * rt[t].matrix().transpose()));
                }
            }
        }
        let r = BlockMatrix33::from_triplets(nc, nt, trips);
        let deg_t: Vec<f64> = (0..nt).map(|t| (0..nc).map(|c| a[c][t]).sum()).collect();
        let lam: Vec<_> = deg_t.iter().map(|d| Matrix3::identity() * *d).collect();
        let p = power_graph_operator(&r, &lam).unwrap();
        for i in 0..nc {
            for j in 0..nc {
                let w: f64 = (0..nt).map(|t| a[i][t] * a[j][t] / deg_t[t]).sum();
                let expected = w * rc[i].matrix() * rc[j].matrix().transpose();
                let got = p.get(i, j).copied().unwrap_or_else(Matrix3::zeros);
                assert!((got - expected).norm() < 1e-10);
            }
            let d = p.get(i, i).unwrap();
            assert!(SymmetricEigen::new(*d).eigenvalues.min() > -1e-12);
        }
    }

    #[test]
    fn power_operator_matches_dense_triple_product() {
        let mut g = ChaCha8Rng::seed_from_u64(6);
        let (nc, nt) = (5, 9);
        let trips: Vec<_> = (0..25)
            .map(|_| {
                (
                    g.random_range(0..nc),
                    g.random_range(0..nt),
                    Matrix3::from_fn(|_, _| g.random_range(-1.0..1.0)),
                )
            })
            .collect();
        let r = BlockMatrix33::from_triplets(nc, nt, trips);
        let lam: Vec<Matrix3<f64>> = (0..nt)
            .map(|_| {
                let x = Matrix3::from_fn(|_, _| g.random_range(-1.0..1.0));
                x * x.transpose() + Matrix3::identity()
            })
            .collect();
        let p = power_graph_operator(&r, &lam).unwrap();
        let inv_dense = BlockMatrix33::block_diagonal(
            &lam.iter()
                .map(|b| b.try_inverse().unwrap())
                .collect::<Vec<_>>(),
        )
        .to_dense();
        let rd = r.to_dense();
        let oracle = &rd * inv_dense * rd.transpose();
        assert!((p.to_dense() - oracle).norm() < 1e-10);
        assert!(p.is_block_symmetric(1e-14));
    }

    #[test]
    fn power_adjacency_row_sums_equal_degree() {
        let a =
            ScalarCsr::from_triplets(2, 3, (0..2).flat_map(|i| (0..3).map(move |j| (i, j, 1.0))));
        let (_, dt) = degree_matrix(&a).unwrap();
        let p = power_graph_adjacency(&a, &dt);
        assert!((p.row(0).sum() - 3.0).abs() < 1e-14);
        assert!((p.row(1).sum() - 3.0).abs() < 1e-14);
    }
}
