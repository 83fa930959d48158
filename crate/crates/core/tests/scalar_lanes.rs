//! The geometry and solver stack is generic over the scalar; exercise the
//! f32 lane end to end so the aliases stay usable.

use rlo_core::geometry::Pose;
use rlo_core::registration::{p2p_icp_estimate, EstimatorConfig, Features, TargetModel};
use rlo_core::selection::{chamfer_distance, LocalMap, ScoringConfig};
use rlo_core::synthetic::structured_scene;
use rlo_core::{PointCloud32, Pose32, SpatialIndex32};

#[test]
fn f32_registration_recovers_a_small_transform() {
    let scene: PointCloud32 = structured_scene::<f32>(2, 4000);
    let truth = {
        let mut p: Pose32 = Pose::from_rotation_z(0.5_f32.to_radians());
        p.translation.x = 0.1;
        p
    };
    let source = scene.transformed(&truth.inverse());
    let cfg = EstimatorConfig::<f32> {
        // single precision cannot chase 1e-4 steps
        convergence_translation: 1e-3,
        convergence_rotation: 1e-3,
        ..EstimatorConfig::default()
    };
    let target = TargetModel::build(
        scene,
        &cfg,
        Features {
            normals: true,
            covariances: false,
            ndt_grid: false,
        },
    )
    .unwrap();
    let prop = p2p_icp_estimate(&source, &target, &Pose::identity(), &cfg);
    assert!(prop.converged);
    let (dt, dr) = prop.transform.delta(&truth);
    assert!(dt <= 0.05 && dr.to_degrees() <= 0.5, "dt={dt} dr={dr}");
}

#[test]
fn f32_chamfer_and_index_work() {
    let cloud: PointCloud32 = structured_scene::<f32>(5, 500);
    let index = SpatialIndex32::build(&cloud).unwrap();
    let nn = index.nearest(&cloud.points()[17]);
    assert_eq!(nn.index, 17);
    let map = LocalMap {
        n_map: 10,
        aggregated_cloud: cloud.clone(),
        index: Some(index),
    };
    let score =
        chamfer_distance(&cloud, &map, &Pose32::identity(), &ScoringConfig::default()).unwrap();
    assert!(score <= 1e-6);
}
