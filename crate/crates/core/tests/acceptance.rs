//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line. Tolerances and runtime budgets are pinned here.

use std::time::Instant;

use num_complex::Complex64;

use moebius_orbits::arith::{lambda_base_table, mobius_table, sieve_primes};
use moebius_orbits::expsum::{
    self, max_scan, orbit_values, sum_single, Family, HSet, UnityTable,
};
use moebius_orbits::fpcore::{gcd_u64, Fp};
use moebius_orbits::harness::{
    run_experiment, sample_matrix, to_csv, ExperimentConfig, FamilyConfig, HStrategy,
    MatrixSelection, SplitMix64, U0Selection,
};
use moebius_orbits::hb;
use moebius_orbits::residue::{self, CharacterTable};
use moebius_orbits::{OrbitSpec, ProjPoint};

fn verdict(criterion: u32, label: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({label}): {} [{detail}]",
        if pass { "pass" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn random_spec(p: u64, rng: &mut SplitMix64, reject_parabolic: bool) -> OrbitSpec {
    let fp = Fp::new(p).unwrap();
    let map = sample_matrix(fp, rng, reject_parabolic);
    OrbitSpec::new(map, ProjPoint::Affine(rng.below(p)))
}

fn naive_u(spec: &OrbitSpec, n: u64) -> ProjPoint {
    spec.map.pow(n).apply(spec.u0)
}

#[test]
fn criterion_1_identity_exact() {
    let started = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for (big_j, x) in [(1u32, 500u64), (2, 100), (3, 50)] {
        let report = hb::hb_verify_range(big_j, x, 1 << 40).unwrap();
        pass &= report.all_match() && report.checked == 2 * x - 1;
        detail.push_str(&format!(
            "J={big_j},X={x}: {}/{} exact; ",
            report.checked - report.mismatches,
            report.checked
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    detail.push_str(&format!("{secs:.1}s"));
    verdict(1, "von Mangoldt identity exactness", pass, &detail);
}

#[test]
fn criterion_2_reconstruction() {
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut cases = 0u32;
    for p in [101u64, 1009] {
        let table = UnityTable::new(p);
        let mut rng = SplitMix64::new(2000 + p);
        for _ in 0..5 {
            let spec = random_spec(p, &mut rng, true);
            for h in [1, p - 1] {
                for n in [16u64, 64, 128] {
                    for big_j in [2u32, 3] {
                        let r = hb::hb_reconstruct(&table, &spec, h, n, big_j, 1 << 40).unwrap();
                        let err = (r.lhs - r.rhs).norm();
                        worst = worst.max(err / r.tolerance.max(f64::MIN_POSITIVE));
                        pass &= r.agrees();
                        cases += 1;
                    }
                }
            }
        }
    }
    verdict(
        2,
        "decomposition reconstruction",
        pass,
        &format!("{cases} cases, worst error {worst:.2e} of tolerance"),
    );
}

#[test]
fn criterion_3_period_cross_validation() {
    let started = Instant::now();
    let mut pass = true;
    let mut checked_points = 0u64;
    let mut maps_checked = 0u64;
    for p in sieve_primes(199).into_iter().filter(|&p| p >= 3) {
        let fp = Fp::new(p).unwrap();
        let mut rng = SplitMix64::new(3000 + p);
        for _ in 0..100 {
            let map = sample_matrix(fp, &mut rng, true);
            maps_checked += 1;
            // cycle decomposition of the whole projective line
            let inf = p as usize;
            let idx = |pt: ProjPoint| match pt {
                ProjPoint::Affine(u) => u as usize,
                ProjPoint::Infinity => inf,
            };
            let pt_of = |i: usize| {
                if i == inf {
                    ProjPoint::Infinity
                } else {
                    ProjPoint::Affine(i as u64)
                }
            };
            let mut cycle_len = vec![0u64; p as usize + 1];
            let mut covered = 0u64;
            for s in 0..=p as usize {
                if cycle_len[s] != 0 {
                    continue;
                }
                let mut cycle = vec![s];
                let mut cur = map.apply(pt_of(s));
                while idx(cur) != s {
                    cycle.push(idx(cur));
                    cur = map.apply(cur);
                }
                let len = cycle.len() as u64;
                covered += len;
                for i in cycle {
                    cycle_len[i] = len;
                }
            }
            // orbit lengths partition the p + 1 points
            pass &= covered == p + 1;
            // spectral period agrees at every starting point
            for s in 0..=p as usize {
                let spec = OrbitSpec::new(map.clone(), pt_of(s));
                let spectral = spec.period_spectral().unwrap();
                if spectral != cycle_len[s] {
                    pass = false;
                }
                checked_points += 1;
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    verdict(
        3,
        "period cross-validation",
        pass,
        &format!("{maps_checked} maps, {checked_points} start points, {secs:.1}s"),
    );
}

#[test]
fn criterion_4_oracle_equivalence() {
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut rng = SplitMix64::new(4001);
    let primes = [101u64, 257, 1009];
    let mut check = |got: Complex64, want: Complex64, scale: f64, what: &str| {
        let err = (got - want).norm();
        let tol = 1e-9 * scale.max(1.0);
        if err > tol {
            pass = false;
            println!("  oracle mismatch ({what}): err {err:.3e} > tol {tol:.3e}");
        }
        worst = worst.max(err / tol);
    };

    for _ in 0..200 {
        let p = primes[rng.below(3) as usize];
        let table = UnityTable::new(p);
        let spec = random_spec(p, &mut rng, false);
        let h = 1 + rng.below(p - 1);
        let n = 1 + rng.below(300);

        // single
        let k = 1 + rng.below(5);
        let start = 1 + rng.below(5);
        let got = sum_single(&table, &spec, h, k, start, n).unwrap();
        let mut want = Complex64::new(0.0, 0.0);
        for j in start..start + n {
            if let ProjPoint::Affine(u) = naive_u(&spec, k * j) {
                want += table.ep(h * u % p);
            }
        }
        check(got.value, want, n as f64, "single");

        // coprime
        let t = spec.period();
        let got = expsum::sum_coprime(&table, &spec, h, k, n).unwrap();
        let mut want = Complex64::new(0.0, 0.0);
        for j in 1..=n {
            if gcd_u64(j, t) != 1 {
                continue;
            }
            if let ProjPoint::Affine(u) = naive_u(&spec, k * j) {
                want += table.ep(h * u % p);
            }
        }
        check(got.value, want, n as f64, "coprime");

        // prime
        let got = expsum::sum_prime(&table, &spec, h, n).unwrap();
        let mut want = Complex64::new(0.0, 0.0);
        for l in sieve_primes(n) {
            if let ProjPoint::Affine(u) = naive_u(&spec, l) {
                want += table.ep(h * u % p);
            }
        }
        check(got.value, want, n as f64, "prime");

        // lambda, plain and dyadic
        for dyadic in [false, true] {
            let nn = n.max(2);
            let got = expsum::sum_lambda(&table, &spec, h, nn, dyadic).unwrap();
            let (lo, hi) = if dyadic { (nn, 2 * nn - 1) } else { (1, nn) };
            let bases = lambda_base_table(hi as usize);
            let mut want = Complex64::new(0.0, 0.0);
            for j in lo..=hi {
                let q = bases[j as usize];
                if q == 0 || (dyadic && gcd_u64(j, t) != 1) {
                    continue;
                }
                if let ProjPoint::Affine(u) = naive_u(&spec, j) {
                    want += table.ep(h * u % p) * (q as f64).ln();
                }
            }
            check(got.value, want, got.weight_mass, "lambda");
        }

        // moebius
        let got = expsum::sum_mobius_twisted(&table, &spec, h, n).unwrap();
        let mu = mobius_table(n as usize);
        let mut want = Complex64::new(0.0, 0.0);
        for j in 1..=n {
            if mu[j as usize] == 0 {
                continue;
            }
            if let ProjPoint::Affine(u) = naive_u(&spec, j) {
                want += table.ep(h * u % p) * mu[j as usize] as f64;
            }
        }
        check(got.value, want, n as f64, "moebius");

        // multi-term
        let coeffs = [1 + rng.below(p - 1), 1 + rng.below(p - 1)];
        let exps = [1 + rng.below(3), 4 + rng.below(3)];
        let got = expsum::sum_multi_term(&table, &spec, &coeffs, &exps, 1, n).unwrap();
        let mut want = Complex64::new(0.0, 0.0);
        for j in 1..=n {
            let mut arg = 0u64;
            let mut pole = false;
            for i in 0..2 {
                match naive_u(&spec, exps[i] * j) {
                    ProjPoint::Affine(u) => arg = (arg + coeffs[i] * u) % p,
                    ProjPoint::Infinity => pole = true,
                }
            }
            if !pole {
                want += table.ep(arg);
            }
        }
        check(got.value, want, n as f64, "multi-term");

        // bilinear
        let kk = 1 + rng.below(30);
        let mm = 1 + rng.below(30);
        let coef = |rng: &mut SplitMix64| {
            Complex64::new(2.0 * rng.unit_f64() - 1.0, 2.0 * rng.unit_f64() - 1.0)
        };
        let alpha: Vec<Complex64> = (0..kk).map(|_| coef(&mut rng)).collect();
        let beta: Vec<Complex64> = (0..mm).map(|_| coef(&mut rng)).collect();
        let got = expsum::sum_bilinear(&table, &spec, h, &alpha, &beta).unwrap();
        let mut want = Complex64::new(0.0, 0.0);
        for (ki, a) in alpha.iter().enumerate() {
            for (mi, b) in beta.iter().enumerate() {
                if let ProjPoint::Affine(u) = naive_u(&spec, (ki as u64 + 1) * (mi as u64 + 1)) {
                    want += a * b * table.ep(h * u % p);
                }
            }
        }
        check(got.value, want, got.weight_mass, "bilinear");

        // multiple
        let nu = 1 + rng.below(3) as usize;
        let ranges: Vec<u64> = (0..nu).map(|_| 1 + rng.below(12)).collect();
        let coprime = rng.below(2) == 1;
        let got = expsum::sum_multiple(&table, &spec, h, k, &ranges, coprime, 1 << 40).unwrap();
        let mut want = Complex64::new(0.0, 0.0);
        let mut stack = vec![(0usize, 1u64)];
        while let Some((depth, prod)) = stack.pop() {
            if depth == nu {
                if let ProjPoint::Affine(u) = naive_u(&spec, k * prod) {
                    want += table.ep(h * u % p);
                }
                continue;
            }
            for v in 1..=ranges[depth] {
                if coprime && gcd_u64(v % t.max(1), t) != 1 && t != 1 {
                    continue;
                }
                stack.push((depth + 1, prod * v));
            }
        }
        check(got.value, want, got.terms as f64, "multiple");
    }
    verdict(
        4,
        "oracle equivalence",
        pass,
        &format!("200 instances x 9 families, worst {worst:.2e} of tolerance"),
    );
}

#[test]
fn criterion_5_full_period_cancellation() {
    let started = Instant::now();
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    let mut scans = 0u64;
    for p in sieve_primes(1999).into_iter().filter(|&p| p > 100) {
        let table = UnityTable::with_table(p);
        let bound = 4.0 * (p as f64).sqrt() * (p as f64).ln();
        let mut rng = SplitMix64::new(5000 + p);
        for _ in 0..20 {
            let spec = random_spec(p, &mut rng, true);
            let vals: Vec<u64> = orbit_values(&spec).into_iter().flatten().collect();
            // one full-period sum per h, phases stepped additively
            let mut acc = vec![Complex64::new(0.0, 0.0); p as usize];
            for &v in &vals {
                let mut phase = 0u64;
                for slot in acc.iter_mut().skip(1) {
                    phase += v;
                    if phase >= p {
                        phase -= p;
                    }
                    *slot += table.ep(phase);
                }
            }
            let max_abs = acc[1..].iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            worst_ratio = worst_ratio.max(max_abs / bound);
            if max_abs > bound {
                pass = false;
                println!("  p={p}: max |sum| {max_abs:.2} > bound {bound:.2}");
            }
            // spot-check the sweep against the streamed single sum
            let h = 1 + rng.below(p - 1);
            let direct = sum_single(&table, &spec, h, 1, 0, spec.period()).unwrap();
            if (direct.value - acc[h as usize]).norm() > 1e-6 * (vals.len() as f64).max(1.0) {
                pass = false;
                println!("  p={p}: sweep disagrees with streamed sum at h={h}");
            }
            scans += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    verdict(
        5,
        "full-period cancellation",
        pass,
        &format!("{scans} specs, worst |sum|/bound = {worst_ratio:.3}, {secs:.1}s"),
    );
}

/// The seeded criterion-6 instance: first sampled non-parabolic map over
/// p = 10007 whose period clears p^0.85.
fn criterion_6_spec() -> OrbitSpec {
    let p = 10007u64;
    let fp = Fp::new(p).unwrap();
    let t_min = (p as f64).powf(0.85).ceil() as u64;
    let mut rng = SplitMix64::new(6006);
    loop {
        let spec = OrbitSpec::new(sample_matrix(fp, &mut rng, true), ProjPoint::Affine(rng.below(p)));
        if spec.period() >= t_min {
            return spec;
        }
    }
}

#[test]
fn criterion_6_prime_time_cancellation() {
    let started = Instant::now();
    let p = 10007u64;
    let n = 1_000_000u64;
    let spec = criterion_6_spec();
    let table = UnityTable::new(p);
    let (rows, argmax) = max_scan(&table, &spec, Family::Prime, n, HSet::All).unwrap();
    let best = &rows[argmax];
    let pi_n = sieve_primes(n).len() as f64;
    // measured 2026-08 on this seeded instance (t = 3336): max |T_h| =
    // 6465.11 at h = 3756, i.e. 8.24e-2 of pi(N); threshold frozen at 0.1.
    let pass = best.abs_value <= 0.1 * pi_n && rows.len() as u64 == p - 1;
    let secs = started.elapsed().as_secs_f64();
    verdict(
        6,
        "prime-time cancellation",
        pass && secs < 900.0,
        &format!(
            "t={}, kind={:?}, max |T_h| = {:.2} at h={} ({:.3e} of pi(N)={}), {secs:.1}s",
            spec.period(),
            spec.map.spectral().kind,
            best.abs_value,
            best.h,
            best.abs_value / pi_n,
            pi_n as u64
        ),
    );
}

#[test]
fn criterion_7_character_machinery() {
    let mut pass = true;
    // full grid t <= 30, v <= 3, N_i <= 20, all unit n
    let mut grid_cases = 0u64;
    for t in 1..=30u64 {
        let table = CharacterTable::new(t).unwrap();
        let units: Vec<u64> = (0..t.max(1))
            .filter(|&n| gcd_u64(n, t) == 1 || t == 1)
            .collect();
        let mut ranges = Vec::new();
        for n1 in 1..=20u64 {
            ranges.push(vec![n1]);
            for n2 in 1..=20u64 {
                ranges.push(vec![n1, n2]);
                for n3 in 1..=20u64 {
                    ranges.push(vec![n1, n2, n3]);
                }
            }
        }
        for vec in &ranges {
            // gcd-filtered brute force over the whole tuple space
            let mut brute = vec![0u64; t as usize];
            let mut stack = vec![(0usize, 1u64)];
            while let Some((depth, prod)) = stack.pop() {
                if depth == vec.len() {
                    brute[(prod % t) as usize] += 1;
                    continue;
                }
                for v in 1..=vec[depth] {
                    if gcd_u64(v % t, t) == 1 || t == 1 {
                        stack.push((depth + 1, prod % t * (v % t) % t));
                    }
                }
            }
            let products = residue::rt_char_products(&table, vec);
            for &n in &units {
                let via = residue::rt_combine(&table, &products, n).unwrap();
                let want = brute[(n % t) as usize] as f64;
                if (via - Complex64::new(want, 0.0)).norm() > 1e-6 {
                    pass = false;
                    println!("  t={t} ranges={vec:?} n={n}: {via} != {want}");
                }
                grid_cases += 1;
            }
        }
    }
    // orthogonality for all t <= 200
    for t in 1..=200u64 {
        let table = CharacterTable::new(t).unwrap();
        let phi = table.phi() as f64;
        for idx in 0..table.num_characters() {
            let s: Complex64 = (1..=t).map(|x| table.eval(idx, x)).sum();
            let want = if idx == 0 { phi } else { 0.0 };
            if (s - Complex64::new(want, 0.0)).norm() > 1e-7 * phi.max(1.0) {
                pass = false;
                println!("  orthogonality fails: t={t} chi={idx}");
            }
        }
        for x in 2..t {
            if gcd_u64(x, t) != 1 {
                continue;
            }
            let s: Complex64 = (0..table.num_characters()).map(|i| table.eval(i, x)).sum();
            if s.norm() > 1e-7 * phi.max(1.0) {
                pass = false;
                println!("  dual orthogonality fails: t={t} x={x}");
            }
        }
    }
    verdict(
        7,
        "character machinery",
        pass,
        &format!("{grid_cases} grid cases + orthogonality to t = 200"),
    );
}

#[test]
fn criterion_8_determinism_across_threads() {
    let spec = criterion_6_spec();
    let u0 = match spec.u0 {
        ProjPoint::Affine(x) => x,
        ProjPoint::Infinity => unreachable!(),
    };
    let cfg = ExperimentConfig {
        p: 10007,
        matrices: MatrixSelection::Explicit {
            entries: vec![spec.map.entries()],
        },
        u0: U0Selection::Explicit { value: u0 },
        sum: FamilyConfig::Prime,
        h: HStrategy::All,
        n_schedule: vec![1_000_000],
        kappa: 0.5,
        epsilon: 0.1,
        budget: None,
        record_wall_time: false,
    };
    let run_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| to_csv(&run_experiment(&cfg).unwrap().rows))
    };
    let csv1 = run_with(1);
    let csv4 = run_with(4);
    verdict(
        8,
        "determinism across thread counts",
        csv1 == csv4,
        &format!("{} bytes, 1-thread vs 4-thread byte-identical", csv1.len()),
    );
}
