//! Acceptance suite: the exit criteria for the estimation and testing
//! pipeline, run end to end at the stated sizes and tolerances. Each
//! criterion prints one PASS/FAIL line; all criteria execute even when an
//! earlier one fails, and the test panics at the end if any failed.
//!
//! Run with `cargo test -p lgc-core --test acceptance -- --nocapture`.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use lgc_core::*;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(results: &mut Vec<Outcome>, name: &'static str, pass: bool, detail: String) {
    println!(
        "acceptance criterion {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    results.push(Outcome { name, pass, detail });
}

fn ks_distance_chisq1(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = chisq_cdf(1, x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

// 1. size/power trend at T = 512, b = 4T^{-2/3}, R = 500
fn criterion_1(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::size_power(20260808);
    cfg.replicates = 500;
    let table = match run_size_power(&cfg) {
        Ok(t) => t,
        Err(e) => {
            check(
                results,
                "1 (size/power trend)",
                false,
                format!("harness error: {e}"),
            );
            return;
        }
    };
    let idx_u = |target: f64| {
        table
            .u_list
            .iter()
            .position(|&u| (u - target).abs() < 1e-9)
            .expect("u in table")
    };
    let idx_a = |target: f64| {
        table
            .levels
            .iter()
            .position(|&a| (a - target).abs() < 1e-9)
            .expect("level in table")
    };
    let rate = |alpha: f64, u: f64| table.rates[idx_a(alpha)][idx_u(u)];

    let r01 = rate(0.05, 0.1);
    let a_ok = (0.013..=0.073).contains(&r01);
    check(
        results,
        "1a (5% size at u=0.1 in [0.013, 0.073])",
        a_ok,
        format!("observed {r01:.3}"),
    );

    let b_ok = rate(0.05, 0.9) > rate(0.05, 0.5) && rate(0.10, 0.9) > rate(0.10, 0.5);
    check(
        results,
        "1b (power at u=0.9 exceeds u=0.5 at 5% and 10%)",
        b_ok,
        format!(
            "5%: {:.3} vs {:.3}; 10%: {:.3} vs {:.3}",
            rate(0.05, 0.9),
            rate(0.05, 0.5),
            rate(0.10, 0.9),
            rate(0.10, 0.5)
        ),
    );

    let mut c_ok = true;
    let mut worst = String::new();
    for &alpha in &[0.01, 0.05, 0.10, 0.15] {
        let bound = alpha + 3.0 * (alpha * (1.0 - alpha) / cfg.replicates as f64).sqrt();
        for &u in &[0.3, 0.5] {
            let r = rate(alpha, u);
            if r > bound {
                c_ok = false;
                worst = format!("{worst}rate({alpha}, u={u}) = {r:.3} > {bound:.3}; ");
            }
        }
    }
    check(
        results,
        "1c (no anti-conservative size at u in {0.3, 0.5})",
        c_ok,
        if c_ok {
            format!(
                "all rates within nominal + 3·SE ({:.0?}s)",
                start.elapsed().as_secs()
            )
        } else {
            worst
        },
    );
    let rt = start.elapsed().as_secs_f64();
    check(
        results,
        "1 runtime (< 10 min)",
        rt < 600.0,
        format!("{rt:.0} s"),
    );
}

// 2. estimator sweep at T = 100, R = 100
fn criterion_2(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::sweep(31415);
    cfg.u_list = vec![0.05, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7];
    let sweep = match run_sweep(&cfg) {
        Ok(s) => s,
        Err(e) => {
            check(
                results,
                "2 (estimator sweep)",
                false,
                format!("harness error: {e}"),
            );
            return;
        }
    };
    let dev_at = |target: f64| {
        let j = sweep
            .u_list
            .iter()
            .position(|&u| (u - target).abs() < 1e-9)
            .unwrap();
        (sweep.mean[j] - sweep.true_a12[j]).abs()
    };
    let mids: Vec<usize> = sweep
        .u_list
        .iter()
        .enumerate()
        .filter(|(_, &u)| (0.2999..=0.7001).contains(&u))
        .map(|(j, _)| j)
        .collect();
    let mad = mids
        .iter()
        .map(|&j| (sweep.mean[j] - sweep.true_a12[j]).abs())
        .sum::<f64>()
        / mids.len() as f64;
    let edge = dev_at(0.05) > dev_at(0.5);
    let rt = start.elapsed().as_secs_f64();
    check(
        results,
        "2 (sweep tracks ramp, edges lose accuracy)",
        mad < 0.15 && edge && rt < 180.0,
        format!(
            "MAD over u in [0.3, 0.7] = {mad:.4} (< 0.15); dev(0.05) = {:.4} vs dev(0.5) = {:.4}; {rt:.0} s (< 180)",
            dev_at(0.05),
            dev_at(0.5)
        ),
    );
}

// 3. GC closed form: log 1.25 at a12 = 0.5, everything else white
fn criterion_3(results: &mut Vec<Outcome>) {
    let params = VarParams::new(
        RMat::from_rows(&[vec![0.0, 0.5], vec![0.0, 0.0]]),
        RMat::identity(2),
    )
    .unwrap();
    let part = Partition::new(1, 1).unwrap();
    let grid = FreqGrid::new(1024).unwrap();
    let gc = gc_measure(&params, &part, &grid).unwrap().gc;
    let target = 1.25f64.ln();
    let pass = (gc - target).abs() < 1e-8;
    check(
        results,
        "3 (closed-form GC oracle log 1.25)",
        pass,
        format!(
            "gc = {gc:.12}, |gc − log 1.25| = {:.2e}",
            (gc - target).abs()
        ),
    );
}

// 4. Example-4 constants at α11 = α22 = 0.5, σ = I, Epanechnikov
fn criterion_4(results: &mut Vec<Outcome>) {
    let params = VarParams::new(RMat::diag(&[-0.5, -0.5]), RMat::identity(2)).unwrap();
    let part = Partition::new(1, 1).unwrap();
    let kernel = KernelSpec::epanechnikov(0.2).unwrap();
    let grid = FreqGrid::new(512).unwrap();
    const A12: usize = 1;

    let h22 = curvature_h(&params, &part, &grid).unwrap().get(A12, A12);
    let h_pass = (h22 - 2.0).abs() < 1e-3 * 2.0;
    check(
        results,
        "4-H (finite-difference H22 equals the quoted 2.0)",
        h_pass,
        format!(
            "H22 = {h22:.6}; the quoted closed form gives 2.0, but three independent \
derivations (exact series expansion, prediction-error-ratio expansion, and this \
finite-difference Hessian of a GC that passes its own flat-spectrum and log-1.25 \
oracles) all give 2·s22/(s11·(1 − α22²)) = 8/3 ≈ 2.6667 at this point; the quoted \
constant drops the curvature's α-dependence (see the analysis notes)"
        ),
    );

    let v = asymptotic_variance(&params, &kernel, &grid).unwrap();
    let v22 = v.get(A12, A12);
    let v_pass = (v22 - 0.45).abs() < 1e-3 * 0.45;
    check(
        results,
        "4-V (plug-in V22 equals (1 − α22²)·∫K² = 0.45)",
        v_pass,
        format!("V22 = {v22:.6}"),
    );
}

// 5. null calibration of the closed-form statistic at T = 2000, R = 1000,
// true parameter values plugged into the multiplier
fn criterion_5(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let t_len = 2000usize;
    let kernel = KernelSpec::epanechnikov(KernelSpec::default_bandwidth(t_len)).unwrap();
    let grid = FreqGrid::default_for_len(t_len);
    let tb = t_len as f64 * kernel.bandwidth();
    // true multiplier at α11 = α22 = 0.5, σ = I with the Epanechnikov kernel
    let mult = 1.0 / ((1.0 + 0.25 - 0.5) * 0.6);
    let part = Partition::new(1, 1).unwrap();
    let r = 1000usize;
    let stats: Vec<lgc_core::Result<f64>> = (0..r)
        .into_par_iter()
        .map(|rep| {
            let seed = replicate_seed(97, rep as u64, 0);
            let spec = TvVarSpec::new(
                2,
                Arc::new(|_| RMat::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]])),
                RMat::identity(2),
                seed,
            )?;
            let panel = simulate_tvvar(&spec, t_len)?;
            let init = default_init(&panel, 0.5, &kernel)?;
            let fit = local_whittle_fit(&panel, 0.5, &kernel, &grid, &init)?;
            let gc = gc_measure(&fit.theta_hat, &part, &grid)?.gc;
            Ok(tb * mult * gc)
        })
        .collect();
    let mut samples = Vec::with_capacity(r);
    let mut errors = 0usize;
    for s in stats {
        match s {
            Ok(v) => samples.push(v),
            Err(_) => errors += 1,
        }
    }
    let ks = ks_distance_chisq1(&mut samples);
    let rt = start.elapsed().as_secs_f64();
    let pass = ks < 0.10 && errors == 0 && rt < 900.0;
    check(
        results,
        "5 (oracle-mode null statistic within KS 0.10 of chi-squared(1))",
        pass,
        format!(
            "KS = {ks:.4} over {} replicates ({errors} errors, {rt:.0} s); the statistic's \
true null limit is (4/3)·chi-squared(1) — KS ≈ 0.07 — because its normalizing constant \
inherits the quoted curvature of criterion 4-H; on top of that the finite-sample \
estimator variance at T·b ≈ 50 runs ≈ 10% above its asymptote",
            samples.len()
        ),
    );
}

// 6. structural identities, fast
fn criterion_6(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut all = true;
    let mut notes: Vec<String> = Vec::new();

    // pre-periodogram Fourier inversion, exact with N > 2T
    {
        let mut rng = CounterRng::new(424242, 0);
        let values: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..2).map(|_| rng.next_gaussian()).collect())
            .collect();
        let panel = TimeSeriesPanel::new(RMat::from_rows(&values), None).unwrap();
        let t_len = panel.length();
        let grid = FreqGrid::new(64).unwrap();
        let mut worst = 0.0f64;
        for &u in &[0.3, 0.5, 0.75] {
            let seq = pre_periodogram(&panel, u, &grid).unwrap();
            let c2 = 2.0 * u * t_len as f64 + 1.0;
            for l in -(t_len as i64)..=(t_len as i64) {
                let ip = ((c2.round() + l as f64) / 2.0).floor();
                let im = ((c2.round() - l as f64) / 2.0).floor();
                if ip < 1.0 || ip > t_len as f64 || im < 1.0 || im > t_len as f64 {
                    continue;
                }
                let expected = RMat::from_fn(2, 2, |i, j| {
                    panel.value(ip as usize, i) * panel.value(im as usize, j)
                });
                let mut acc = CMat::zeros(2, 2);
                for sm in &seq {
                    let z = C64::new(0.0, sm.at_lambda * l as f64).exp();
                    acc = acc.add(&sm.value.scale(z * grid.weight()));
                }
                worst = worst.max(acc.sub(&expected.to_cmat()).max_abs());
            }
        }
        let ok = worst < 1e-10;
        all &= ok;
        notes.push(format!(
            "Fourier inversion {worst:.2e}{}",
            if ok { "" } else { " FAIL" }
        ));
    }

    // determinant identity residual at N = 4096
    {
        let near_unit = VarParams::new(RMat::diag(&[0.9]), RMat::diag(&[1.0])).unwrap();
        let r1 = kolmogorov_check(&near_unit, &FreqGrid::new(4096).unwrap()).unwrap();
        let bivar = VarParams::new(RMat::diag(&[0.5, 0.5]), RMat::identity(2)).unwrap();
        let r2 = kolmogorov_check(&bivar, &FreqGrid::new(4096).unwrap()).unwrap();
        let ok = r1 < 1e-6 && r2 < 1e-6;
        all &= ok;
        notes.push(format!(
            "determinant identity {r1:.2e}/{r2:.2e}{}",
            if ok { "" } else { " FAIL" }
        ));
    }

    // factorization recovers the innovation covariance
    {
        let params = VarParams::new(
            RMat::from_rows(&[vec![0.4, -0.3], vec![0.2, -0.5]]),
            RMat::from_rows(&[vec![1.0, 0.4], vec![0.4, 2.0]]),
        )
        .unwrap();
        let fac = var_factorization(&params).unwrap();
        let dev = fac
            .lambda0()
            .mul(&fac.lambda0().conj_transpose())
            .sub(&params.s().to_cmat())
            .max_abs();
        let ok = dev < 1e-10;
        all &= ok;
        notes.push(format!(
            "Λ(0)Λ(0)* = s {dev:.2e}{}",
            if ok { "" } else { " FAIL" }
        ));
    }

    // companion own-spectrum is the flat Schur complement
    {
        let params = VarParams::new(
            RMat::from_rows(&[vec![0.4, 0.3], vec![-0.2, 0.5]]),
            RMat::from_rows(&[vec![1.0, 0.4], vec![0.4, 2.0]]),
        )
        .unwrap();
        let part = Partition::new(1, 1).unwrap();
        let sigma_tilde = sigma_tilde_22(&params, &part).unwrap().get(0, 0);
        let flat = companion_spectrum_22(&params, &part).unwrap().get(0, 0).re;
        // rebuild 𝔣22 from the cross-spectrum machinery at many frequencies
        let s = params.s();
        let proj = s
            .block(1, 2, 0, 1)
            .mul(&s.block(0, 1, 0, 1).inverse().unwrap())
            .scale(-1.0);
        let left = CMat::hstack(&proj.to_cmat(), &CMat::identity(1));
        let fac = var_factorization(&params).unwrap();
        let mut worst = 0.0f64;
        for &lambda in FreqGrid::new(64).unwrap().nodes() {
            let f = var_spectral_density(&params, lambda).unwrap();
            let w = left.mul(fac.lambda0()).mul(&fac.lambda_inv_at(-lambda));
            let own = w.mul(&f).mul(&w.conj_transpose()).get(0, 0);
            worst = worst
                .max((own.re - sigma_tilde / (2.0 * std::f64::consts::PI)).abs())
                .max(own.im.abs());
        }
        let ok = worst < 1e-9 && (flat - sigma_tilde / (2.0 * std::f64::consts::PI)).abs() < 1e-12;
        all &= ok;
        notes.push(format!(
            "flat companion spectrum {worst:.2e}{}",
            if ok { "" } else { " FAIL" }
        ));
    }

    // FGC nonnegative over 1000 random valid draws
    {
        let part = Partition::new(1, 1).unwrap();
        let grid = FreqGrid::new(64).unwrap();
        let mut rng = CounterRng::new(77, 1);
        let mut min_val = f64::INFINITY;
        let mut checked = 0usize;
        while checked < 1000 {
            let a = RMat::from_fn(2, 2, |_, _| 1.3 * (rng.next_uniform() - 0.5));
            let l = RMat::from_rows(&[
                vec![0.3 + rng.next_uniform(), 0.0],
                vec![rng.next_uniform() - 0.5, 0.3 + rng.next_uniform()],
            ]);
            let s = l.mul(&l.transpose());
            let Ok(params) = VarParams::new(a, s) else {
                continue;
            };
            checked += 1;
            for &lambda in grid.nodes() {
                min_val = min_val.min(fgc(&params, &part, lambda).unwrap());
            }
        }
        let ok = min_val >= -1e-10;
        all &= ok;
        notes.push(format!(
            "min FGC {min_val:.2e}{}",
            if ok { "" } else { " FAIL" }
        ));
    }

    // chi-squared reference quantile
    {
        let q = chisq_quantile(1, 0.95).unwrap();
        let ok = (q - 3.84146).abs() < 1e-4;
        all &= ok;
        notes.push(format!(
            "chi2(1, .95) = {q:.5}{}",
            if ok { "" } else { " FAIL" }
        ));
    }

    let rt = start.elapsed().as_secs_f64();
    let ok = all && rt < 30.0;
    check(
        results,
        "6 (structural identities, < 30 s)",
        ok,
        format!("{} ({rt:.1} s)", notes.join("; ")),
    );
}

#[test]
fn acceptance_criteria() {
    let mut results = Vec::new();
    criterion_6(&mut results); // fast ones first
    criterion_3(&mut results);
    criterion_4(&mut results);
    criterion_2(&mut results);
    criterion_1(&mut results);
    criterion_5(&mut results);

    let failed: Vec<&Outcome> = results.iter().filter(|o| !o.pass).collect();
    println!(
        "acceptance summary: {}/{} checks passed",
        results.len() - failed.len(),
        results.len()
    );
    assert!(
        failed.is_empty(),
        "acceptance criteria failed: {}",
        failed
            .iter()
            .map(|o| format!("[{}] {}", o.name, o.detail))
            .collect::<Vec<_>>()
            .join(" | ")
    );
}
