mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use surfel_lio::baseline::PointVoxelMap;
use surfel_lio::geometry::{Pose, Vec3};
use surfel_lio::hvox::{compute_surfel, HVoxConfig, HVoxMap};
use surfel_lio::morton::VoxelKey;

fn cfg() -> HVoxConfig {
    HVoxConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lazy_recompute_matches_batch_fit(
        seed in any::<u64>(),
        plan in prop::collection::vec((1usize..800, any::<bool>()), 20..60),
    ) {
        let mut r = rng(seed);
        let points = plane_cloud(&mut r, 10_000, 4.0);
        let mut map = HVoxMap::new(cfg()).unwrap();
        let mut at = 0;
        for (len, recompute) in plan.iter().cycle() {
            if at >= points.len() {
                break;
            }
            let end = (at + len).min(points.len());
            map.insert_points(&points[at..end], &Pose::identity());
            at = end;
            if *recompute {
                map.recompute_dirty();
                prop_assert_eq!(map.dirty_len(), 0);
            }
            for (k, cell) in map.l1_iter().filter(|(_, c)| !c.dirty) {
                let children = map.children_centroids(k);
                let fresh = (children.len() >= cfg().m_min).then(|| compute_surfel(&children, cfg().eps).unwrap());
                prop_assert_eq!(cell.surfel, fresh);
            }
        }
        map.recompute_dirty();
        let oracle = batch_surfels(&points, &cfg());
        prop_assert_eq!(oracle.len(), map.l1_len());
        for (k, expect) in &oracle {
            let cell = map.l1(VoxelKey::try_new(k[0], k[1], k[2]).unwrap()).unwrap();
            prop_assert_eq!(cell.surfel.is_some(), expect.is_some());
            if let (Some(s), Some(b)) = (cell.surfel, expect) {
                prop_assert!((s.centroid - b.centroid).amax() < 1e-9);
                prop_assert!((s.planarity - b.planarity).abs() < 1e-9);
                prop_assert!((s.normal.norm() - 1.0).abs() < 1e-9);
                if b.planarity > 1e-3 {
                    let d = (s.normal - b.normal).amax().min((s.normal + b.normal).amax());
                    prop_assert!(d < 1e-9, "normal off by {}", d);
                }
            }
        }
        prop_assert!(map.check_integrity().is_ok());
    }

    #[test]
    fn trimming_keeps_children_partitioned(
        seed in any::<u64>(),
        centers in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0.5f64..3.0), 1..6),
    ) {
        let mut r = rng(seed);
        let mut map = HVoxMap::new(cfg()).unwrap();
        for (cx, cy, half) in centers {
            map.insert_points(&plane_cloud(&mut r, 2000, 8.0), &Pose::identity());
            if r.random_bool(0.5) {
                map.recompute_dirty();
            }
            map.trim(&Vec3::new(cx, cy, 0.0), half);
            prop_assert!(map.check_integrity().is_ok(), "{:?}", map.check_integrity());
            for (k1, cell) in map.l1_iter() {
                prop_assert!(cell.children.count() <= 27);
                let c = k1.center(map.s1());
                prop_assert!((c.x - cx).abs() <= half + 1e-9 && (c.y - cy).abs() <= half + 1e-9);
            }
        }
        let owned: usize = map.l1_iter().map(|(_, c)| c.children.count()).sum();
        prop_assert_eq!(owned, map.l0_len());
    }

    #[test]
    fn queries_do_not_mutate(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut map = HVoxMap::new(cfg()).unwrap();
        map.insert_points(&plane_cloud(&mut r, 3000, 4.0), &Pose::identity());
        map.recompute_dirty();
        let before = map.fingerprint();
        let mut hits = 0;
        for _ in 0..2000 {
            hits += usize::from(map.query_surfel(&vec_in(&mut r, 3.0)).is_some());
        }
        prop_assert_eq!(before, map.fingerprint());
        prop_assert!(hits > 0);
    }

    #[test]
    fn coplanar_children_give_an_exact_normal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = unit(&mut r);
        let c0 = vec_in(&mut r, 1.0);
        let u = n.cross(&Vec3::new(0.3, -0.7, 0.2)).normalize();
        let v = n.cross(&u);
        let centroids: Vec<Vec3> = (0..9).map(|_| c0 + u * r.random_range(-0.3..0.3) + v * r.random_range(-0.3..0.3)).collect();
        let s = compute_surfel(&centroids, 1e-6).unwrap();
        for c in &centroids {
            prop_assert!(s.normal.dot(&(c - s.centroid)).abs() < 1e-9);
        }
    }
}

#[test]
fn incremental_centroid_matches_batch_mean_in_one_voxel() {
    let mut r = rng(3);
    let s0 = cfg().s0;
    let origin = Vec3::new(12.0, -7.0, 1.0) * s0;
    let points: Vec<Vec3> = (0..10_000)
        .map(|_| origin + Vec3::new(r.random_range(0.0..s0), r.random_range(0.0..s0), r.random_range(0.0..s0)))
        .collect();
    let mut map = HVoxMap::new(cfg()).unwrap();
    for p in &points {
        map.insert_points(std::slice::from_ref(p), &Pose::identity());
    }
    assert_eq!(map.l0_len(), 1);
    let (_, voxel) = map.l0_iter().next().unwrap();
    let mean = points.iter().sum::<Vec3>() / points.len() as f64;
    assert_eq!(voxel.count, 10_000);
    assert!((voxel.centroid - mean).amax() < 1e-9);
}

fn grid_on_planes() -> Vec<Vec3> {
    // two walls and a floor, densely and regularly sampled
    let mut pts = Vec::new();
    let step = 0.04;
    for i in 0..250 {
        for j in 0..250 {
            let (a, b) = (i as f64 * step + 0.013, j as f64 * step + 0.011);
            pts.push(Vec3::new(a, b, 0.017));
            if j < 75 {
                pts.push(Vec3::new(a, 10.017, b + 0.2));
                pts.push(Vec3::new(10.017, a, b + 0.2));
            }
        }
    }
    pts
}

#[test]
fn baseline_and_surfel_normals_agree() {
    let pts = grid_on_planes();
    let mut hvox = HVoxMap::new(cfg()).unwrap();
    hvox.insert_points(&pts, &Pose::identity());
    hvox.recompute_dirty();
    let mut base = PointVoxelMap::new(hvox.s1(), 64);
    base.insert_raw(&pts, &Pose::identity());
    let mut r = rng(9);
    let (mut matched, mut agree) = (0, 0);
    for _ in 0..5000 {
        let q = pts[r.random_range(0..pts.len())] + vec_in(&mut r, 0.01);
        let (Some(s), Some(p)) = (hvox.query_surfel(&q), base.knn_plane(&q, 5)) else { continue };
        matched += 1;
        agree += usize::from(s.normal.dot(&p.normal).abs() >= 2f64.to_radians().cos());
    }
    assert!(matched > 4000, "{matched}");
    assert!(agree as f64 >= 0.95 * matched as f64, "{agree}/{matched}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn knn_returns_the_true_nearest_in_the_block(seed in any::<u64>(), k in 3usize..9) {
        let mut r = rng(seed);
        let s1 = 0.5;
        let mut base = PointVoxelMap::new(s1, 1000);
        let pts: Vec<Vec3> = (0..400).map(|_| vec_in(&mut r, 1.5)).collect();
        base.insert_raw(&pts, &Pose::identity());
        let q = vec_in(&mut r, 1.0);
        let mut nb = surfel_lio::baseline::Neighbors::with_k(k);
        base.gather_knn(&q, &mut nb);
        let qk = [(q.x / s1).floor(), (q.y / s1).floor(), (q.z / s1).floor()];
        let mut expect: Vec<f64> = pts
            .iter()
            .filter(|p| {
                let pk = [(p.x / s1).floor(), (p.y / s1).floor(), (p.z / s1).floor()];
                (0..3).all(|i| (pk[i] - qk[i]).abs() <= 1.0)
            })
            .map(|p| (p - q).norm_squared())
            .collect();
        expect.sort_by(f64::total_cmp);
        expect.truncate(k);
        let got: Vec<f64> = nb.distances_sq().collect();
        prop_assert_eq!(got, expect);
    }
}

#[test]
fn baseline_gather_cost_grows_with_density() {
    use std::time::Instant;
    let mut r = rng(1);
    let queries: Vec<Vec3> = (0..20_000).map(|_| vec_in(&mut r, 4.0)).collect();
    let mut times = Vec::new();
    for per_cell in [2usize, 8, 32] {
        let mut base = PointVoxelMap::new(0.5, per_cell);
        let n = 16 * 16 * 16 * per_cell;
        let pts: Vec<Vec3> = (0..n * 2).map(|_| vec_in(&mut r, 4.0)).collect();
        base.insert_raw(&pts, &Pose::identity());
        let mut nb = surfel_lio::baseline::Neighbors::with_k(5);
        let best = (0..5)
            .map(|_| {
                let t = Instant::now();
                for q in &queries {
                    base.gather_knn(std::hint::black_box(q), &mut nb);
                }
                t.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min);
        times.push(best);
    }
    assert!(times[0] <= times[1] * 1.1 && times[1] <= times[2] * 1.1, "{times:?}");
}
