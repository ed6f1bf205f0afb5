//! Literal double-loop evaluation of every variance component: every
//! observation of every stratum, poor or not, the Ĝ values by counting, and
//! the share weights spelled out per term.

use povgap::asymptotics::{influence_closed_form, influence_generic, InfluencePair};
use povgap::decomposition::VarianceComponents;
use povgap::{EmpiricalDist, GroupedSample, Measure, MeasureSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `#{x in xs : x <= y} / len`, by counting.
pub fn ecdf(xs: &[f64], y: f64) -> f64 {
    xs.iter().filter(|&&x| x <= y).count() as f64 / xs.len() as f64
}

pub struct Literal {
    pub a1: f64,
    pub a2: f64,
    pub a31: f64,
    pub a32: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

fn pair<'a>(spec: &'a MeasureSpec, dist: &'a EmpiricalDist, z: f64) -> InfluencePair<'a> {
    // closed forms where they exist keep the oracle off the generic code path
    influence_closed_form(spec, dist, z).unwrap_or_else(|_| influence_generic(spec, dist, z).unwrap())
}

/// Every observation of every stratum, poor or not, plain loops, the
/// weights spelled out per term.
pub fn literal(sample: &GroupedSample, z: f64, measure: Measure, printed: bool) -> Literal {
    let spec = MeasureSpec::new(measure).unwrap();
    let all: Vec<f64> = sample.per_capita_incomes().to_vec();
    let pooled = EmpiricalDist::new(all.clone()).unwrap();
    let big = pair(&spec, &pooled, z);
    let k = sample.num_groups();
    let groups: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut v = sample.group_values(i);
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let dists: Vec<EmpiricalDist> = groups.iter().map(|g| EmpiricalDist::new(g.clone()).unwrap()).collect();
    let n = all.len() as f64;
    let p: Vec<f64> = groups.iter().map(|g| g.len() as f64 / n).collect();

    let g_big = |y: f64| if y > z { 0.0 } else { big.g0_at(y, ecdf(&all, y)) };
    let nu_big = |y: f64| if y > z { 0.0 } else { big.nu0_at(y, ecdf(&all, y)) };
    let own: Vec<Option<InfluencePair<'_>>> = (0..k)
        .map(|i| (dists[i].count_le(z) > 0).then(|| pair(&spec, &dists[i], z)))
        .collect();
    let g_own = |i: usize, y: f64| match &own[i] {
        Some(pr) if y <= z => pr.g0_at(y, ecdf(&groups[i], y)),
        _ => 0.0,
    };
    let nu_own = |i: usize, y: f64| match &own[i] {
        Some(pr) if y <= z => pr.nu0_at(y, ecdf(&groups[i], y)),
        _ => 0.0,
    };
    let ell = |i: usize, y: f64| g_big(y) - g_own(i, y);
    let cfun = |i: usize, y: f64| p[i] * nu_big(y) - nu_own(i, y);
    let ker = |a: f64, b: f64| a.min(b) - a * b;

    let (w31, w32, w2): (
        Box<dyn Fn(f64, f64) -> f64>,
        Box<dyn Fn(f64, f64, f64) -> f64>,
        Box<dyn Fn(f64, f64) -> f64>,
    ) = if printed {
        (
            Box::new(|pi, ph| pi * ph * ph),
            Box::new(|pi: f64, pj: f64, ph| (pi * pj).sqrt() * ph * ph),
            Box::new(|pi: f64, pj: f64| pi.powf(1.5) * pj.sqrt()),
        )
    } else {
        (
            Box::new(|pi, ph| pi * pi * ph),
            Box::new(|pi, pj, ph| pi * pj * ph),
            Box::new(|pi, pj| pi * pj),
        )
    };

    let mut out = Literal { a1: 0.0, a2: 0.0, a31: 0.0, a32: 0.0, b1: 0.0, b2: 0.0, b3: 0.0 };
    for i in 0..k {
        let gi = &groups[i];
        let ni = gi.len() as f64;
        let mean_l: f64 = gi.iter().map(|&y| ell(i, y)).sum::<f64>() / ni;
        let sq_l: f64 = gi.iter().map(|&y| ell(i, y).powi(2)).sum::<f64>() / ni;
        out.a1 += p[i] * (sq_l - mean_l * mean_l);

        let mut dbl = 0.0;
        for &y in gi {
            for &x in gi {
                dbl += ker(ecdf(gi, y), ecdf(gi, x)) * cfun(i, y) * cfun(i, x);
            }
        }
        out.a2 += p[i] * dbl / (ni * ni);

        // B1: ∫ [∫_0^s ℓ − s Eℓ] c(s) ds
        let mut b1 = 0.0;
        for &y in gi {
            let s = ecdf(gi, y);
            let partial: f64 = gi.iter().filter(|&&x| x <= y).map(|&x| ell(i, x)).sum::<f64>() / ni;
            b1 += (partial - s * mean_l) * cfun(i, y);
        }
        out.b1 += p[i] * b1 / ni;

        for h in (0..k).filter(|&h| h != i) {
            let mut dbl = 0.0;
            for &y in gi {
                for &x in gi {
                    dbl += ker(ecdf(&groups[h], y), ecdf(&groups[h], x)) * nu_big(y) * nu_big(x);
                }
            }
            out.a31 += w31(p[i], p[h]) * dbl / (ni * ni);
        }

        for j in (0..k).filter(|&j| j != i) {
            let gj = &groups[j];
            let nj = gj.len() as f64;
            for h in (0..k).filter(|&h| h != i && h != j) {
                let mut dbl = 0.0;
                for &y in gi {
                    for &x in gj {
                        dbl += ker(ecdf(&groups[h], y), ecdf(&groups[h], x)) * nu_big(y) * nu_big(x);
                    }
                }
                out.a32 += w32(p[i], p[j], p[h]) * dbl / (ni * nj);
            }
            let mut dbl = 0.0;
            for &y in gi {
                for &x in gj {
                    dbl += ker(ecdf(gi, y), ecdf(gi, x)) * cfun(i, y) * nu_big(x);
                }
            }
            out.b2 += w2(p[i], p[j]) * dbl / (ni * nj);
            let mut b3 = 0.0;
            for &x in gj {
                let partial: f64 = gi.iter().filter(|&&y| y <= x).map(|&y| ell(i, y)).sum::<f64>() / ni;
                b3 += (partial - ecdf(gi, x) * mean_l) * nu_big(x);
            }
            out.b3 += w2(p[i], p[j]) * b3 / nj;
        }
    }
    out
}

pub fn random_sample(rng: &mut ChaCha8Rng, n: usize, k: usize) -> GroupedSample {
    loop {
        let incomes: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 3.0).exp() * 0.2).collect();
        let labels: Vec<i64> = (0..n).map(|_| rng.random_range(1..=k as i64)).collect();
        if let Ok(s) = GroupedSample::from_labels(incomes, &labels) {
            if s.num_groups() == k {
                return s;
            }
        }
    }
}

pub fn assert_matches(v: &VarianceComponents, l: &Literal, what: &str) {
    let pairs = [
        ("A1", v.a1, l.a1),
        ("A2", v.a2, l.a2),
        ("A31", v.a31, l.a31),
        ("A32", v.a32, l.a32),
        ("B1", v.b1, l.b1),
        ("B2", v.b2, l.b2),
        ("B3", v.b3, l.b3),
    ];
    for (name, got, want) in pairs {
        assert!((got - want).abs() <= 1e-12, "{what} {name}: {got} vs {want}");
    }
}

