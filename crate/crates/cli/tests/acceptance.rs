//! End-to-end acceptance run: every criterion prints one PASS/FAIL line.
//!
//! Run alone with `cargo test --release -p povgap-cli --test acceptance`.

#[path = "../../core/tests/common/literal.rs"]
#[allow(dead_code)]
mod literal;

use std::time::Instant;

use povgap::asymptotics::{exact_index, functionals, hd_diagnostic, influence_closed_form, influence_generic};
use povgap::decomposition::{decompose, gap, variance_components, ComponentWeights};
use povgap::distribution::{IncomeDistribution, Parametric};
use povgap::indices::{closed_form_index, compute_gpi};
use povgap::montecarlo::{run_experiment, MixtureSpec};
use povgap::survey_data::write_csv;
use povgap::{EmpiricalDist, Measure, MeasureSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria allowed to be red; each is explained in the README.
const KNOWN_RED: &[&str] = &["6c"];

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: String) -> Line {
    Line { id, pass, detail }
}

fn corpus() -> Vec<(Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let law = Parametric::LogNormal { mu: 0.0, sigma: 1.0 };
    (0..1000)
        .map(|_| {
            let n = rng.random_range(1..=200);
            let v: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let z = rng.random_range(0.3..3.0);
            (v, z)
        })
        .collect()
}

fn c1(corpus: &[(Vec<f64>, f64)]) -> Line {
    let measures = [
        Measure::Sen,
        Measure::Shorrocks,
        Measure::Thon,
        Measure::Kakwani(1.0),
        Measure::Kakwani(2.0),
        Measure::Kakwani(3.0),
        Measure::Fgt(0.0),
        Measure::Fgt(1.0),
        Measure::Fgt(2.0),
    ];
    let specs: Vec<MeasureSpec> = measures.iter().map(|&m| MeasureSpec::new(m).unwrap()).collect();
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for (v, z) in corpus {
        let d = EmpiricalDist::new(v.clone()).unwrap();
        for (m, s) in measures.iter().zip(&specs) {
            let a = compute_gpi(&d, *z, s).unwrap().value;
            let b = closed_form_index(&d, *z, *m).unwrap().value;
            worst = worst.max((a - b).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    line(
        "1",
        worst <= 1e-12 && secs < 10.0,
        format!("generic vs closed form: max diff {worst:.2e} over {} samples, {secs:.2} s", corpus.len()),
    )
}

fn c2(corpus: &[(Vec<f64>, f64)]) -> Line {
    let spec = |m| MeasureSpec::new(m).unwrap();
    let (sen, k1, shor, thon) = (spec(Measure::Sen), spec(Measure::Kakwani(1.0)), spec(Measure::Shorrocks), spec(Measure::Thon));
    let (mut w1, mut w2): (f64, f64) = (0.0, 0.0);
    for (v, z) in corpus {
        let d = EmpiricalDist::new(v.clone()).unwrap();
        let n = v.len() as f64;
        let val = |s: &MeasureSpec| compute_gpi(&d, *z, s).unwrap().value;
        w1 = w1.max((val(&k1) - val(&sen)).abs());
        w2 = w2.max((val(&thon) - val(&shor) * n / (n + 1.0)).abs());
    }
    line(
        "2",
        w1 <= 1e-12 && w2 <= 1e-12,
        format!("kakwani(1) vs sen {w1:.2e}; thon vs shorrocks·n/(n+1) {w2:.2e}"),
    )
}

fn c3() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_gap: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.random_range(2..=6);
        let n = rng.random_range(30..=300);
        let s = literal::random_sample(&mut rng, n, k);
        for m in [
            Measure::Fgt(0.0),
            Measure::Fgt(1.0),
            Measure::Fgt(2.0),
            Measure::Chakravarty(0.5),
            Measure::Chakravarty(2.0),
        ] {
            // the raw residual, not the reported gd_n (which is set to 0 for these measures)
            let g = gap(&s, 1.0, m).unwrap();
            let n = s.len() as f64;
            let avg: f64 = g.groups.iter().map(|gi| gi.n as f64 / n * gi.value).sum();
            worst_gap = worst_gap.max((g.global.value - avg).abs()).max(g.gd.abs());
        }
    }
    let mut worst_k1: f64 = 0.0;
    for _ in 0..20 {
        let s = literal::random_sample(&mut rng, 80, 1);
        for m in [
            Measure::Sen,
            Measure::Shorrocks,
            Measure::Thon,
            Measure::Kakwani(2.0),
            Measure::Fgt(1.0),
            Measure::Chakravarty(0.5),
        ] {
            let r = decompose(&s, 1.0, m, 0.95).unwrap();
            let c = &r.components;
            for x in [r.gd_n, c.theta1_sq, c.theta2_sq, c.theta3_sq] {
                worst_k1 = worst_k1.max(x.abs());
            }
        }
    }
    line(
        "3",
        worst_gap <= 1e-14 && worst_k1 <= 1e-12,
        format!("decomposable |gd_n| max {worst_gap:.2e} over 200 partitions; K=1 max {worst_k1:.2e}"),
    )
}

fn c4() -> Line {
    let grid: Vec<f64> = (0..100).map(|i| 0.02 + i as f64 * 0.025).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let law = Parametric::LogNormal { mu: 0.0, sigma: 1.0 };
    let emp = EmpiricalDist::new((0..500).map(|_| law.sample(&mut rng)).collect()).unwrap();
    let mut worst: f64 = 0.0;
    for m in [Measure::Sen, Measure::Kakwani(2.0)] {
        let spec = MeasureSpec::new(m).unwrap();
        for dist in [&emp as &dyn IncomeDistribution, &law] {
            struct Wrap<'a>(&'a dyn IncomeDistribution);
            impl IncomeDistribution for Wrap<'_> {
                fn cdf(&self, x: f64) -> f64 {
                    self.0.cdf(x)
                }
                fn quantile(&self, t: f64) -> f64 {
                    self.0.quantile(t)
                }
                fn atoms(&self) -> Option<&[f64]> {
                    self.0.atoms()
                }
            }
            let d = Wrap(dist);
            let g = influence_generic(&spec, &d, 1.0).unwrap();
            let c = influence_closed_form(&spec, &d, 1.0).unwrap();
            for &y in &grid {
                worst = worst.max((g.g0(y) - c.g0(y)).abs()).max((g.nu0(y) - c.nu0(y)).abs());
            }
        }
    }
    let spec = MeasureSpec::new(Measure::Shorrocks).unwrap();
    let k_emp = functionals(&spec, &emp, 1.0).unwrap().k;
    let k_law = functionals(&spec, &law, 1.0).unwrap().k;
    line(
        "4",
        worst <= 1e-10 && k_emp == 0.0 && k_law == 0.0,
        format!("generic vs closed-form influence sup {worst:.2e}; shorrocks K = {k_emp}, {k_law}"),
    )
}

fn c5() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for trial in 0..40 {
        let k = 2 + trial % 2;
        let n = rng.random_range(10..=50);
        let s = literal::random_sample(&mut rng, n, k);
        for m in [Measure::Sen, Measure::Shorrocks, Measure::Kakwani(2.0), Measure::Thon] {
            for (w, printed) in [(ComponentWeights::Derived, false), (ComponentWeights::Printed, true)] {
                let v = variance_components(&s, 0.9, m, w).unwrap();
                let l = literal::literal(&s, 0.9, m, printed);
                for (a, b) in [
                    (v.a1, l.a1),
                    (v.a2, l.a2),
                    (v.a31, l.a31),
                    (v.a32, l.a32),
                    (v.b1, l.b1),
                    (v.b2, l.b2),
                    (v.b3, l.b3),
                ] {
                    worst = worst.max((a - b).abs());
                }
                count += 1;
            }
        }
    }
    line("5", worst <= 1e-12, format!("A/B vs literal sums: max diff {worst:.2e} over {count} cases"))
}

fn c6() -> Vec<Line> {
    let mix = MixtureSpec::new(
        vec![0.5, 0.3, 0.2],
        vec![
            Parametric::LogNormal { mu: 0.0, sigma: 1.0 },
            Parametric::LogNormal { mu: 0.3, sigma: 1.0 },
            Parametric::LogNormal { mu: 0.6, sigma: 0.8 },
        ],
    )
    .unwrap();
    let z = mix.mixture().quantile(0.4);
    let t = Instant::now();
    let r = run_experiment(&mix, z, Measure::Sen, 2000, 2000, 0.95, 20_240_601).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let rel = r.empirical_var / r.mean_plugin_theta_sq - 1.0;
    let p = r.ks_pvalue.unwrap_or(0.0);
    let mean = r.gd_samples.iter().sum::<f64>() / r.reps as f64;
    vec![
        line(
            "6a",
            (0.93..=0.97).contains(&r.coverage) && secs < 600.0,
            format!("coverage {:.4} at level 0.95 ({secs:.1} s)", r.coverage),
        ),
        line(
            "6b",
            rel.abs() <= 0.15,
            format!(
                "var of sqrt(n)(gd_n - gd) {:.4e} vs mean plug-in {:.4e} ({:+.1}%)",
                r.empirical_var,
                r.mean_plugin_theta_sq,
                100.0 * rel
            ),
        ),
        line(
            "6c",
            p > 0.01,
            format!(
                "KS D {:.4}, p {p:.2e}; mean sqrt(n)(gd_n - gd) {mean:.4} = {:.2} sd",
                r.ks_stat.unwrap_or(f64::NAN),
                mean / r.empirical_var.sqrt()
            ),
        ),
    ]
}

fn c7() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let law = Parametric::LogNormal { mu: 0.0, sigma: 1.0 };
    let emp = EmpiricalDist::new((0..10_000).map(|_| law.sample(&mut rng)).collect()).unwrap();
    let mut worst: f64 = 0.0;
    for m in [Measure::Sen, Measure::Shorrocks] {
        let a = exact_index(m, &emp, 1.0).unwrap();
        let b = closed_form_index(&emp, 1.0, m).unwrap().value;
        worst = worst.max((a - b).abs());
    }
    line("7", worst <= 0.01, format!("|exact_index - sample index| max {worst:.2e} at n = 10^4"))
}

fn c8() -> Line {
    let mut ok = true;
    let mut detail = Vec::new();
    for m in [Measure::Sen, Measure::Shorrocks, Measure::Kakwani(2.0)] {
        let spec = MeasureSpec::new(m).unwrap();
        let s: Vec<(f64, f64)> = [100usize, 1000, 10_000]
            .iter()
            .map(|&n| {
                let (d1, d2) = hd_diagnostic(&spec, n, 2 * n / 5);
                let nf = n as f64;
                (nf.sqrt() * d1, nf.powf(1.5) * d2)
            })
            .collect();
        // exact zeros carry rounding noise only
        let mono = s.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 <= w[0].1 + 1e-12);
        ok &= mono;
        detail.push(format!("{m}: {:.3}->{:.3}->{:.3}", s[0].0, s[1].0, s[2].0));
    }
    line("8", ok, format!("sqrt(n)·dev1 {}", detail.join(", ")))
}

fn c9() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sample = literal::random_sample(&mut rng, 400, 4);
    let csv = dir.path().join("survey.csv");
    write_csv(&sample, std::fs::File::create(&csv).unwrap()).unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        "K = 2\np = 0.6, 0.4\ncomponents = lognormal(0, 1); singh_maddala(2.5, 1.2, 1.3)\n\
         Z = quantile(0.4)\nmeasure = sen\nn = 300\nreps = 100\nseed = 5\n",
    )
    .unwrap();
    let csv_s = csv.to_str().unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["povgap", "decompose", "--input", csv_s, "-z", "1.0", "--measure", "sen"],
        vec!["povgap", "decompose", "--input", csv_s, "-z", "1.0", "--measure", "kakwani:2", "--output", "json"],
        vec!["povgap", "simulate", "--config", cfg_s],
        vec!["povgap", "simulate", "--config", cfg_s, "--output", "json", "--seed", "11"],
    ];
    let mut ok = true;
    for args in &runs {
        let a = povgap_cli::run(args.iter().copied());
        let b = povgap_cli::run(args.iter().copied());
        ok &= a.code == 0 && a == b && !a.stdout.is_empty();
    }
    line("9", ok, format!("{} invocations repeated, byte-identical output: {ok}", runs.len()))
}

fn main() {
    let start = Instant::now();
    let corpus = corpus();
    let mut lines = vec![c1(&corpus), c2(&corpus), c3(), c4(), c5()];
    lines.extend(c6());
    lines.extend([c7(), c8(), c9()]);

    let mut unexpected = Vec::new();
    for l in &lines {
        let known = KNOWN_RED.contains(&l.id);
        let tag = match (l.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {:<3} {tag:<12} {}", l.id, l.detail);
        if !l.pass && !known {
            unexpected.push(l.id);
        }
    }
    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
