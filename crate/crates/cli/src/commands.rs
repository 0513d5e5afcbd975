use std::time::Instant;

use ecm_model::kernels::{self, KernelSpec, LayerConditionRule, LayerConditionState};
use ecm_model::matrix_io::{generate_hpcg, read_matrix_market};
use ecm_model::sparse::{
    auto_sigma, crs_to_sell, padding_report, rcm_reorder, spmv_crs_parallel, spmv_sell_parallel,
    CrsMatrix, SellCSigmaMatrix,
};
use ecm_model::spmv_model::{
    crs_prediction, crs_saturation_check, estimate_alpha, matrix_stats, sell_prediction_for_matrix,
    SpmvPrediction,
};
use ecm_model::validation::{validate_kernels, validate_spmv_constants, KERNEL_REFERENCES};
use ecm_model::{
    compose, compose_full_overlap, compose_no_overlap, resolve_machine, scale_to, EcmPrediction,
    Error, Level, MachineModel, Result, TrafficProfile,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::report::{Item, Report};
use crate::{FormatArg, KernelArgs, LevelArg, MachineArg, OverlapArg, Outcome, PredictArgs, ScalingArgs, SpmvArgs};

/// Padding overhead accepted by `--sigma auto`.
const AUTO_SIGMA_OVERHEAD: f64 = 0.05;

/// Relative tolerance of the CRS/SELL equivalence check, scaled by ‖A‖∞·‖x‖∞.
const CHECK_TOLERANCE: f64 = 1e-12;

struct KernelSetup {
    machine: MachineModel,
    kernel: KernelSpec,
    lc: Option<LayerConditionState>,
    traffic: TrafficProfile,
}

fn setup_kernel(a: &KernelArgs) -> Result<KernelSetup> {
    let machine = resolve_machine(&a.machine.machine)?;
    let kernel = kernels::find_kernel(&a.kernel)?;
    let lc = match (&a.lc, a.inner_dim) {
        (Some(s), _) => Some(s.parse()?),
        (None, Some(0)) => {
            return Err(Error::InvalidArgument {
                name: "inner-dim",
                reason: "must be positive".into(),
            })
        }
        (None, Some(n)) => Some(LayerConditionRule::default().state(&machine, n)),
        (None, None) => None,
    };
    let lc = match (kernel.is_stencil(), lc) {
        (true, None) => Some(LayerConditionState::SatisfiedL1),
        (_, lc) => lc,
    };
    let traffic = kernels::traffic(&kernel, &machine, lc, a.unroll)?;
    Ok(KernelSetup {
        machine,
        kernel,
        lc,
        traffic,
    })
}

fn kernel_label(s: &KernelSetup) -> String {
    match s.lc {
        Some(lc) => format!("{} ({lc})", s.kernel.name),
        None => s.kernel.name.clone(),
    }
}

pub fn predict(invocation: String, a: &PredictArgs) -> Result<Outcome> {
    let s = setup_kernel(&a.kernel)?;
    let m = &s.machine;
    let mut report = Report::new(invocation, &m.name);

    let levels: Vec<Level> = match a.level {
        LevelArg::L1 => vec![Level::L1],
        LevelArg::L2 => vec![Level::L2],
        LevelArg::Mem => vec![Level::Mem],
        LevelArg::All => Level::ALL.to_vec(),
    };
    let hypotheses: Vec<(&str, EcmPrediction)> = match a.overlap {
        OverlapArg::Partial => vec![("partial", compose(m, &s.traffic))],
        OverlapArg::None => vec![("none", compose_no_overlap(m, &s.traffic))],
        OverlapArg::Full => vec![("full", compose_full_overlap(m, &s.traffic))],
        OverlapArg::All => vec![
            ("partial", compose(m, &s.traffic)),
            ("none", compose_no_overlap(m, &s.traffic)),
            ("full", compose_full_overlap(m, &s.traffic)),
        ],
    };
    // Measurements exist for the default unrolling only.
    let reference = KERNEL_REFERENCES
        .iter()
        .find(|r| r.kernel == s.kernel.name && r.lc == s.lc && a.kernel.unroll.is_none());

    let unit = s.traffic.work_unit.short_name();
    let iterations = f64::from(m.vector_length_doubles);
    for (name, p) in hypotheses {
        let mut item = Item::new(format!("{} [{name} overlap]", kernel_label(&s)));
        for &level in &levels {
            let t = p.at(level);
            let key = format!("t_{}", level.name().to_lowercase());
            item = match reference {
                Some(r) if name == "partial" => {
                    let idx = Level::ALL.iter().position(|l| *l == level).unwrap();
                    item.compared(&key, t, &format!("cy/{unit}"), r.measured[idx])
                }
                _ => item.value(&key, t, &format!("cy/{unit}")),
            };
        }
        if levels.contains(&Level::Mem) && p.t_mem > 0.0 {
            let per_second = iterations * m.frequency / p.t_mem;
            item = item.value("mem_performance", per_second / 1e6, "Mit/s").value(
                "mem_bandwidth",
                s.traffic.mem_bytes() * m.frequency / p.t_mem / 1e9,
                "GB/s",
            );
        }
        report.push(item);
    }
    if reference.is_some() {
        report.note("reference values are measured cycles; deviations of 15% or more are marked with !");
    }
    Ok(Outcome {
        report,
        passed: true,
    })
}

pub fn scaling(invocation: String, a: &ScalingArgs) -> Result<Outcome> {
    let s = setup_kernel(&a.kernel)?;
    let m = &s.machine;
    let max_cores = a.max_cores.unwrap_or(m.cores_per_domain);
    if max_cores == 0 {
        return Err(Error::InvalidArgument {
            name: "max-cores",
            reason: "must be at least 1".into(),
        });
    }
    let p = compose(m, &s.traffic);
    let curve = scale_to(m, &p, &s.traffic, max_cores);
    let iterations = f64::from(m.vector_length_doubles);
    let flops = f64::from(s.kernel.flops_per_iteration);

    let mut report = Report::new(invocation, &m.name);
    let mut summary = Item::new(kernel_label(&s))
        .value("t_mem", p.t_mem, &format!("cy/{}", s.traffic.work_unit.short_name()))
        .value("domain_bandwidth", m.mem_bw(s.traffic.readonly) / 1e9 * m.frequency, "GB/s");
    if let Some(roof) = curve.roof_units_per_cycle {
        summary = summary.value("roof_performance", roof * iterations * m.frequency / 1e6, "Mit/s");
    }
    if let Some(n) = curve.saturation_cores {
        summary = summary.value("saturation_cores", f64::from(n), "cores");
    }
    let status = match curve.saturation_cores {
        Some(n) if n <= max_cores => format!("saturates at {n} cores"),
        Some(n) => format!("does not saturate within {max_cores} cores (needs {n})"),
        None => "no memory traffic".to_owned(),
    };
    report.push(summary.status(status));

    for pt in &curve.points {
        let mut item = Item::new(format!("{} cores", pt.cores))
            .value("cores", f64::from(pt.cores), "")
            .value("performance", pt.units_per_second * iterations / 1e6, "Mit/s");
        if flops > 0.0 {
            item = item.value("flops", pt.units_per_second * iterations * flops / 1e9, "Gflop/s");
        }
        item = item.value("bandwidth", pt.bytes_per_second / 1e9, "GB/s");
        report.push(item);
    }
    Ok(Outcome {
        report,
        passed: true,
    })
}

fn parse_hpcg(grid: &str) -> Result<(usize, usize, usize)> {
    let bad = || Error::InvalidArgument {
        name: "hpcg",
        reason: format!("expected N or NX,NY,NZ; got `{grid}`"),
    };
    let dims = grid
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    match dims[..] {
        [n] => Ok((n, n, n)),
        [x, y, z] => Ok((x, y, z)),
        _ => Err(bad()),
    }
}

fn random_matrix(n: usize, density: f64, seed: u64) -> Result<CrsMatrix> {
    if n == 0 || !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument {
            name: "random",
            reason: "need at least one row and a density in (0, 1]".into(),
        });
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let target = ((n * n) as f64 * density).round().max(1.0) as usize;
    let triplets = (0..target).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
    CrsMatrix::from_triplets(n, n, triplets.collect::<Vec<_>>())
}

fn build_matrix(a: &SpmvArgs, report: &mut Report) -> Result<CrsMatrix> {
    let matrix = if let Some(path) = &a.matrix {
        report.note(format!("matrix read from {}", path.display()));
        read_matrix_market(path)?
    } else if let Some(grid) = &a.hpcg {
        let (nx, ny, nz) = parse_hpcg(grid)?;
        report.note(format!("HPCG 27-point matrix on a {nx}x{ny}x{nz} grid"));
        generate_hpcg(nx, ny, nz)?
    } else {
        let n = a.random.expect("clap enforces one source");
        let seed = a.seed.expect("clap enforces --seed with --random");
        report.note(format!("random {n}x{n} matrix, density {}, seed {seed}", a.density));
        random_matrix(n, a.density, seed)?
    };
    if a.rcm {
        Ok(rcm_reorder(&matrix)?.0)
    } else {
        Ok(matrix)
    }
}

fn convert_sell(a: &SpmvArgs, crs: &CrsMatrix, report: &mut Report) -> Result<SellCSigmaMatrix> {
    let sigma = if a.sigma == "auto" {
        let (sigma, pad) = auto_sigma(crs, a.chunk, AUTO_SIGMA_OVERHEAD)?;
        if pad.overhead > AUTO_SIGMA_OVERHEAD {
            report.note(format!(
                "no sigma reaches {}% padding; using the least-overhead candidate",
                AUTO_SIGMA_OVERHEAD * 100.0
            ));
        }
        sigma
    } else {
        a.sigma.parse::<usize>().map_err(|_| Error::InvalidArgument {
            name: "sigma",
            reason: format!("expected a positive integer or `auto`; got `{}`", a.sigma),
        })?
    };
    crs_to_sell(crs, a.chunk, sigma)
}

fn resolve_alpha(a: &SpmvArgs, m: &MachineModel, crs: &CrsMatrix, n_nzr: f64) -> Result<f64> {
    match a.alpha.as_str() {
        "optimistic" if n_nzr > 0.0 => Ok(1.0 / n_nzr),
        "optimistic" => Err(Error::InvalidMatrix("matrix has no nonzeros".into())),
        "lru" => estimate_alpha(crs, m.l2_capacity, m.cacheline_bytes),
        s => s.parse::<f64>().map_err(|_| Error::InvalidArgument {
            name: "alpha",
            reason: format!("expected a number, `optimistic` or `lru`; got `{s}`"),
        }),
    }
}

fn model_item(label: &str, m: &MachineModel, p: &SpmvPrediction) -> Item {
    let mut item = Item::new(label)
        .value("t_l1", p.cycles.t_l1, "cy/row")
        .value("t_l2", p.cycles.t_l2, "cy/row")
        .value("t_mem", p.cycles.t_mem, "cy/row")
        .value("gather_cycles", p.gather_cycles, "cy/row")
        .value("reduction_bound", p.reduction_bound, "cy/row")
        .value("bytes_per_row", p.bytes_per_row, "B/row")
        .value("single_core_performance", p.single_core_perf / 1e9, "Gflop/s")
        .value("single_core_bandwidth", p.single_core_bw / 1e9, "GB/s");
    if let Some(roof) = p.roof_perf(m) {
        item = item.value("roof_performance", roof / 1e9, "Gflop/s");
    }
    if let Some(n) = p.scaling.saturation_cores {
        item = item.value("saturation_cores", f64::from(n), "cores");
    }
    let domain = p.perf_curve().last().map_or(0.0, |&(_, f)| f);
    item = item.value("domain_performance", domain / 1e9, "Gflop/s");
    let status = if p.scaling.saturates_within(m.cores_per_domain) {
        "saturates within domain"
    } else {
        "core-bound within domain"
    };
    item.status(status)
}

fn time_kernel(repeat: usize, mut f: impl FnMut() -> Result<Vec<f64>>) -> Result<f64> {
    let repeat = repeat.max(1);
    let start = Instant::now();
    for _ in 0..repeat {
        std::hint::black_box(f()?);
    }
    Ok(start.elapsed().as_secs_f64() / repeat as f64)
}

pub fn spmv(invocation: String, a: &SpmvArgs) -> Result<Outcome> {
    let m = resolve_machine(&a.machine.machine)?;
    if a.threads == 0 {
        return Err(Error::InvalidArgument {
            name: "threads",
            reason: "must be at least 1".into(),
        });
    }
    let mut report = Report::new(invocation, &m.name);
    let crs = build_matrix(a, &mut report)?;
    let stats = matrix_stats(&crs);
    report.push(
        Item::new("matrix")
            .value("rows", stats.nrows as f64, "")
            .value("cols", stats.ncols as f64, "")
            .value("nnz", stats.nnz as f64, "")
            .value("n_nzr", stats.n_nzr, "nnz/row")
            .value("min_row", stats.min_row as f64, "nnz")
            .value("max_row", stats.max_row as f64, "nnz")
            .value("bandwidth", crs.bandwidth() as f64, ""),
    );
    let alpha = resolve_alpha(a, &m, &crs, stats.n_nzr)?;

    let needs_sell = a.format == FormatArg::Sell || a.check;
    let sell = if needs_sell {
        Some(convert_sell(a, &crs, &mut report)?)
    } else {
        None
    };
    if let Some(s) = &sell {
        let pad = padding_report(s);
        report.push(
            Item::new("padding")
                .value("C", s.chunk_height() as f64, "rows")
                .value("sigma", s.sigma() as f64, "rows")
                .value("nnz", pad.nnz as f64, "")
                .value("stored", pad.stored as f64, "")
                .value("overhead", pad.overhead * 100.0, "%"),
        );
    }

    let x: Vec<f64> = (0..crs.ncols()).map(|i| 1.0 + (i % 7) as f64 * 0.125).collect();
    let flops = 2.0 * stats.nnz as f64;
    match (a.format, &sell) {
        (FormatArg::Crs, _) => {
            let p = crs_prediction(&m, stats.n_nzr, alpha)?;
            let sat = crs_saturation_check(&m, stats.n_nzr, alpha)?;
            report.push(
                model_item("CRS model", &m, &p)
                    .value("alpha", alpha, "")
                    .value("domain_demand", sat.domain_demand / 1e9, "GB/s")
                    .value("domain_bandwidth", sat.domain_bw / 1e9, "GB/s"),
            );
            if a.time {
                let secs = time_kernel(a.repeat, || spmv_crs_parallel(&crs, &x, a.threads))?;
                report.push(timing_item(secs, flops, a.threads));
            }
        }
        (FormatArg::Sell, Some(s)) => {
            let p = sell_prediction_for_matrix(&m, s, alpha, a.unroll)?;
            report.push(
                model_item("SELL model", &m, &p)
                    .value("alpha", alpha, "")
                    .value("unroll", f64::from(a.unroll), ""),
            );
            if a.time {
                let secs = time_kernel(a.repeat, || spmv_sell_parallel(s, &x, a.threads))?;
                report.push(timing_item(secs, flops, a.threads));
            }
        }
        (FormatArg::Sell, None) => unreachable!("SELL matrix is built for the SELL format"),
    }

    let mut passed = true;
    if a.check {
        let s = sell.as_ref().expect("built for --check");
        let y_crs = spmv_crs_parallel(&crs, &x, a.threads)?;
        let y_sell = spmv_sell_parallel(s, &x, a.threads)?;
        let scale = crs.norm_inf() * x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let max_diff = y_crs
            .iter()
            .zip(&y_sell)
            .fold(0.0f64, |acc, (p, q)| acc.max((p - q).abs()));
        let bound = CHECK_TOLERANCE * scale.max(1.0);
        passed = max_diff <= bound;
        report.push(
            Item::new("CRS vs SELL")
                .value("max_abs_difference", max_diff, "")
                .value("tolerance", bound, "")
                .status(if passed { "PASS" } else { "FAIL" }),
        );
    }
    Ok(Outcome { report, passed })
}

fn timing_item(secs: f64, flops: f64, threads: usize) -> Item {
    Item::new("host timing (informational)")
        .value("threads", threads as f64, "")
        .value("time", secs * 1e3, "ms")
        .value("performance", flops / secs / 1e9, "Gflop/s")
}

pub fn validate(invocation: String, a: &MachineArg) -> Result<Outcome> {
    let m = resolve_machine(&a.machine)?;
    let mut report = Report::new(invocation, &m.name);
    let checks = validate_kernels(&m)?
        .into_iter()
        .chain(validate_spmv_constants(&m)?);
    let mut passed = true;
    let mut failures = 0usize;
    let mut total = 0usize;
    for c in checks {
        total += 1;
        passed &= c.passed;
        failures += usize::from(!c.passed);
        let mut item = Item::new(c.name.clone());
        let multi = c.computed.len() > 1;
        for (i, (v, e)) in c.computed.iter().zip(&c.expected).enumerate() {
            let key = if multi {
                Level::ALL.get(i).map_or_else(|| format!("v{i}"), |l| format!("t_{}", l.name().to_lowercase()))
            } else {
                "value".to_owned()
            };
            item = item.compared(&key, *v, &c.unit, *e);
        }
        item = item.value("tolerance", c.tolerance, &c.unit);
        report.push(item.status(if c.passed { "PASS" } else { "FAIL" }));
    }
    report.note(format!("{}/{total} checks passed", total - failures));
    Ok(Outcome { report, passed })
}
