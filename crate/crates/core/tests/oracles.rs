//! Closed forms checked against independent brute-force computations.

use nondecomp_core::measures::{
    fbeta_coeffs, fenchel_conjugate_value, kld, ConcaveLink, DualObjectiveTable, EvalMetric, NestedMeasure,
};
use nondecomp_core::optimizers::{labeling_objective, most_violated_labeling};
use nondecomp_core::rewards::{ConfusionCounts, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fbeta_from_counts(beta: f64, tp: f64, fn_: f64, fp: f64) -> f64 {
    let b2 = beta * beta;
    (1.0 + b2) * tp / ((1.0 + b2) * tp + b2 * fn_ + fp)
}

#[test]
fn fbeta_pseudolinear_form_random_tuples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let beta = rng.random_range(0.2..4.0);
        let p = rng.random_range(0.01..0.99);
        let (u, v): (f64, f64) = (rng.random_range(0.001..1.0), rng.random_range(0.0..1.0));
        // expected fractions of the confusion matrix
        let (tp, fn_, fp) = (p * u, p * (1.0 - u), (1.0 - p) * (1.0 - v));
        let want = fbeta_from_counts(beta, tp, fn_, fp);
        let got = fbeta_coeffs(beta, p).unwrap().value(u, v).unwrap();
        assert!((got - want).abs() <= 1e-9, "beta {beta} p {p} u {u} v {v}: {got} vs {want}");
    }
}

#[test]
fn fbeta_pseudolinear_form_exhaustive_small_matrices() {
    let mut checked = 0u64;
    for n in 2..=50u64 {
        for pos in 1..n {
            let neg = n - pos;
            let p = pos as f64 / n as f64;
            for beta in [0.5, 1.0, 2.0] {
                let coeffs = fbeta_coeffs(beta, p).unwrap();
                for tp in 0..=pos {
                    for tn in 0..=neg {
                        let c = ConfusionCounts::new(tp, pos - tp, neg - tn, tn);
                        let want = fbeta_from_counts(beta, tp as f64, (pos - tp) as f64, (neg - tn) as f64);
                        let (u, v) = (c.tpr().unwrap(), c.tnr().unwrap());
                        let got = coeffs.value(u, v).unwrap();
                        assert!((got - want).abs() <= 1e-9, "{c:?} beta {beta}: {got} vs {want}");
                        let metric = EvalMetric::FBeta { beta }.evaluate(&c).unwrap();
                        assert!((metric - want).abs() <= 1e-12);
                        checked += 1;
                    }
                }
            }
        }
    }
    println!("{checked} confusion matrices");
}

#[test]
fn neg_kld_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let p: f64 = rng.random_range(0.01..0.99);
        let (u, v): (f64, f64) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let est = p * u + (1.0 - p) * (1.0 - v);
        if !(1e-6..1.0 - 1e-6).contains(&est) {
            continue;
        }
        let q = 1.0 - p;
        let want = -(p * (p / est).ln() + q * (q / (1.0 - est)).ln());
        let got = NestedMeasure::neg_kld(p).unwrap().value(u, v);
        assert!((got - want).abs() <= 1e-9, "p {p} u {u} v {v}: {got} vs {want}");
    }
}

#[test]
fn kld_fixture_natural_log() {
    let k = kld([0.5, 0.5], [0.25, 0.75]).unwrap();
    assert!((k - 0.143841).abs() <= 1e-6, "{k}");
}

#[test]
fn dual_steps_attain_grid_oracle() {
    for link in [ConcaveLink::min_tpr_tnr(), ConcaveLink::q_mean()] {
        let table = DualObjectiveTable::new(&link, 0.01);
        let mut worst = 0.0f64;
        for i in 0..=20 {
            for j in 0..=20 {
                let (u, v) = (i as f64 * 0.05, j as f64 * 0.05);
                let (a, b) = link.dual_step(u, v).unwrap();
                let closed = table.objective(u, v, a, b);
                let (_, _, oracle) = table.argmin(u, v);
                // the oracle minimises over a dual grid, so it can only
                // overshoot the exact minimum
                worst = worst.max(closed - oracle);
                assert!(
                    closed <= oracle + 1e-3,
                    "{:?} at ({u}, {v}): closed {closed} oracle {oracle}",
                    link.kind
                );
            }
        }
        println!("{:?}: worst excess over oracle {worst:e}", link.kind);
    }
}

#[test]
fn dual_steps_satisfy_fenchel_young() {
    // min over duals of α u + β v - Ψ*(α, β) is Ψ(u, v) for concave Ψ; the
    // conjugate at the closed-form dual is checked by dense grid search.
    for link in [ConcaveLink::min_tpr_tnr(), ConcaveLink::q_mean()] {
        for i in 0..=20 {
            for j in 0..=20 {
                let (u, v) = (i as f64 * 0.05, j as f64 * 0.05);
                let (a, b) = link.dual_step(u, v).unwrap();
                let conj = fenchel_conjugate_value(&link, a, b, 0.01);
                let psi = link.value(u, v).unwrap();
                assert!((a * u + b * v - conj - psi).abs() <= 1e-3, "{:?} ({u}, {v})", link.kind);
            }
        }
    }
}

fn exhaustive_max(scores: &[f64], labels: &[Label], delta: &dyn Fn(&ConfusionCounts) -> f64) -> f64 {
    let n = scores.len();
    (0u32..1 << n)
        .map(|mask| {
            let yt: Vec<Label> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { Label::Pos } else { Label::Neg })
                .collect();
            labeling_objective(scores, labels, &yt, delta)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn most_violated_matches_exhaustive_search() {
    let metrics = [
        EvalMetric::MinTprTnr,
        EvalMetric::QMean,
        EvalMetric::FBeta { beta: 1.0 },
        EvalMetric::FBeta { beta: 2.0 },
        EvalMetric::Kld,
        EvalMetric::Accuracy,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for fixture in 0..200 {
        let n = rng.random_range(1..=12);
        let labels: Vec<Label> = (0..n)
            .map(|_| if rng.random_bool(0.5) { Label::Pos } else { Label::Neg })
            .collect();
        // dyadic scores keep every partial sum exact
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-16i32..=16) as f64 / 8.0).collect();
        let metric = metrics[fixture % metrics.len()];
        let delta = |c: &ConfusionCounts| metric.loss(c);
        let found = most_violated_labeling(&scores, &labels, &delta);
        let got = labeling_objective(&scores, &labels, &found, &delta);
        let want = exhaustive_max(&scores, &labels, &delta);
        assert_eq!(got, want, "fixture {fixture} ({}): {scores:?} {labels:?}", metric.name());
    }
}
