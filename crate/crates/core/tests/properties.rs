use ecm_model::machine::MachineModel;
use ecm_model::matrix_io::{read_matrix_market_from, write_matrix_market};
use ecm_model::sparse::{crs_to_sell, padding_report, spmv_crs, spmv_sell, CrsMatrix};
use ecm_model::spmv_model::{
    crs_core_cycles_per_row, sell_cycles_per_row, traffic_per_row, SpmvTrafficParams,
};
use ecm_model::{compose, scale, TrafficProfile, WorkUnit};
use proptest::prelude::*;

fn sparse_matrix() -> impl Strategy<Value = CrsMatrix> {
    (1usize..40, 1usize..40).prop_flat_map(|(nrows, ncols)| {
        prop::collection::vec((0..nrows, 0..ncols, -10.0f64..10.0), 0..200)
            .prop_map(move |t| CrsMatrix::from_triplets(nrows, ncols, t).unwrap())
    })
}

fn dense_product(a: &CrsMatrix, x: &[f64]) -> Vec<f64> {
    let mut dense = vec![vec![0.0; a.ncols()]; a.nrows()];
    for (r, c, v) in a.triplets() {
        dense[r][c] += v;
    }
    dense
        .iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn profile() -> impl Strategy<Value = TrafficProfile> {
    (
        0.0f64..8.0,
        0.0f64..8.0,
        0.0f64..20.0,
        0.0f64..1024.0,
        0.0f64..512.0,
        0.0f64..1.0,
        0.0f64..1024.0,
        any::<bool>(),
    )
        .prop_map(|(ld, st, dep, rd, wr, mem_frac, mwr, ro)| TrafficProfile {
            work_unit: WorkUnit::Vector { iterations: 8 },
            core_load_cycles: ld,
            core_store_cycles: st,
            dependency_chain_cycles: dep,
            l1l2_read_bytes: rd,
            l1l2_write_bytes: wr,
            mem_read_bytes: rd * mem_frac,
            mem_write_bytes: mwr,
            readonly: ro,
        })
}

proptest! {
    #[test]
    fn spmv_formats_agree_with_dense(a in sparse_matrix(), c in 1usize..10, sigma in 1usize..50) {
        let x: Vec<f64> = (0..a.ncols()).map(|i| 1.0 + (i as f64 * 0.37).cos()).collect();
        let dense = dense_product(&a, &x);
        let crs = spmv_crs(&a, &x).unwrap();
        let sell = spmv_sell(&crs_to_sell(&a, c, sigma).unwrap(), &x).unwrap();
        let tol = 1e-12 * (1.0 + a.norm_inf() * 2.0);
        for i in 0..a.nrows() {
            prop_assert!((crs[i] - dense[i]).abs() <= tol);
            prop_assert!((sell[i] - dense[i]).abs() <= tol);
        }
    }

    #[test]
    fn sell_layout_invariants(a in sparse_matrix(), c in 1usize..10, sigma in 1usize..50) {
        let s = crs_to_sell(&a, c, sigma).unwrap();
        prop_assert_eq!(s.nchunks(), a.nrows().div_ceil(c));
        let stored: usize = s.chunk_lengths().iter().map(|l| l * c).sum();
        prop_assert_eq!(s.stored_entries(), stored);
        for (k, &len) in s.chunk_lengths().iter().enumerate() {
            let longest = s.row_perm()[k * c..((k + 1) * c).min(a.nrows())]
                .iter()
                .map(|&r| a.row_len(r))
                .max()
                .unwrap_or(0);
            prop_assert_eq!(len, longest);
        }
        for (new, &old) in s.row_perm().iter().enumerate() {
            prop_assert_eq!(new / sigma, old / sigma);
            prop_assert_eq!(s.inverse_perm()[old], new);
        }
        let nonzero_stored = s.values().iter().filter(|v| **v != 0.0).count();
        let nonzero_orig = a.values().iter().filter(|v| **v != 0.0).count();
        prop_assert_eq!(nonzero_stored, nonzero_orig);
        prop_assert!(s.col_indices().iter().all(|&col| (col as usize) < a.ncols()));
        prop_assert!(padding_report(&s).overhead >= 0.0);
    }

    #[test]
    fn global_sort_minimizes_padding(a in sparse_matrix(), c in 1usize..10, sigma in 1usize..50) {
        let global = padding_report(&crs_to_sell(&a, c, a.nrows()).unwrap()).overhead;
        let local = padding_report(&crs_to_sell(&a, c, sigma).unwrap()).overhead;
        prop_assert!(global <= local + 1e-15);
    }

    #[test]
    fn matrix_market_round_trip(a in sparse_matrix()) {
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        prop_assert_eq!(read_matrix_market_from(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn compose_levels_are_ordered(t in profile()) {
        let p = compose(&MachineModel::a64fx_fx700(), &t);
        prop_assert!(p.t_l1 <= p.t_l2 && p.t_l2 <= p.t_mem);
    }

    #[test]
    fn scaling_is_monotone_and_flat_after_saturation(t in profile()) {
        let m = MachineModel::a64fx_fx700();
        let p = compose(&m, &t);
        prop_assume!(p.t_mem > 0.0);
        let curve = scale(&m, &p, &t);
        prop_assert!((curve.points[0].units_per_cycle
            - (1.0 / p.t_mem).min(curve.roof_units_per_cycle.unwrap_or(f64::INFINITY))).abs() < 1e-12);
        for w in curve.points.windows(2) {
            prop_assert!(w[0].units_per_cycle <= w[1].units_per_cycle);
        }
        if let Some(n) = curve.saturation_cores {
            let roof = curve.roof_units_per_cycle.unwrap();
            for pt in curve.points.iter().filter(|pt| pt.cores >= n) {
                prop_assert_eq!(pt.units_per_cycle, roof);
            }
            for pt in curve.points.iter().filter(|pt| pt.cores < n) {
                prop_assert!(pt.units_per_cycle < roof);
            }
        }
    }

    #[test]
    fn traffic_formula_is_affine_and_increasing(n in 0.0f64..500.0, alpha in 0.0f64..1.0, dn in 0.0f64..10.0, da in 0.0f64..1.0) {
        let f = |n, a| traffic_per_row(&SpmvTrafficParams::new(n, a).unwrap());
        prop_assert!(f(n + dn, alpha) >= f(n, alpha));
        prop_assert!(f(n, alpha + da) >= f(n, alpha));
        // Affine in alpha for fixed n.
        let mid = f(n, alpha + da / 2.0);
        prop_assert!((mid - (f(n, alpha) + f(n, alpha + da)) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn crs_cycles_step_function(n in 1u32..400) {
        let m = MachineModel::a64fx_fx700();
        let here = crs_core_cycles_per_row(&m, f64::from(n)).unwrap();
        let next = crs_core_cycles_per_row(&m, f64::from(n + 1)).unwrap();
        let step = if n % 8 == 0 { 9.0 } else { 0.0 };
        prop_assert_eq!(next - here, step);
    }

    #[test]
    fn sell_unrolling_lower_bound(n in 1.0f64..300.0, u in 1u32..16) {
        let m = MachineModel::a64fx_fx700();
        let unlimited = sell_cycles_per_row(&m, n, 1.0 / n, u32::MAX).unwrap();
        let finite = sell_cycles_per_row(&m, n, 1.0 / n, u).unwrap();
        prop_assert!(unlimited.cycles.t_mem <= finite.cycles.t_mem);
    }

    #[test]
    fn machine_json_round_trip(freq in 1e8f64..5e9, l2 in 1.0f64..512.0, cores in 1u32..128) {
        let mut m = MachineModel::a64fx_fx700();
        m.frequency = freq;
        m.l2_load_bw = l2;
        m.cores_per_domain = cores;
        let back = MachineModel::from_json(&m.to_json(), std::path::Path::new("x")).unwrap();
        prop_assert_eq!(back, m);
    }
}
