//! Finite-difference checks of every training objective on random small
//! networks.

use nondecomp_core::data::Dataset;
use nondecomp_core::measures::{fbeta_coeffs, NestedDuals};
use nondecomp_core::netcore::{grad_check, Activation, Model, NetworkConfig, Objective};
use nondecomp_core::optimizers::{
    CrossEntropyObjective, StructuredObjective, WeightedRewardObjective,
};
use nondecomp_core::rewards::{ClassPriors, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INSTANCES: u64 = 100;
const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

struct Instance {
    model: Model,
    data: Dataset,
    batch: Vec<usize>,
    priors: ClassPriors,
    rng: ChaCha8Rng,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=4);
    let depth = rng.random_range(1..=3);
    let mut sizes: Vec<usize> = (1..depth).map(|_| rng.random_range(2..=6)).collect();
    sizes.push(1);
    let act = [Activation::Tanh, Activation::Sigmoid, Activation::Relu][rng.random_range(0..3)];
    let net = NetworkConfig::new(d, sizes).with_seed(seed).with_activation(act);
    // Random biases too: with the zero bias init a dead ReLU layer feeds
    // exact zeros forward, which sits on the next layer's kink.
    let mut model = Model::new(net).unwrap();
    for w in model.params_mut() {
        *w = rng.random_range(-1.0..1.0);
    }

    let n = rng.random_range(6..=20);
    let features = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut labels: Vec<Label> = (0..n)
        .map(|_| if rng.random_bool(0.4) { Label::Pos } else { Label::Neg })
        .collect();
    labels[0] = Label::Pos;
    labels[1] = Label::Neg;
    let data = Dataset::new("g", d, features, labels).unwrap();
    let batch: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.7)).chain([0, 1]).collect();
    let priors = ClassPriors::user(rng.random_range(0.1..0.9)).unwrap();
    Instance {
        model,
        data,
        batch,
        priors,
        rng,
    }
}

fn check(name: &str, make: impl Fn(&mut Instance) -> f64) {
    let mut worst = 0.0f64;
    for seed in 0..INSTANCES {
        let mut inst = instance(seed);
        let err = make(&mut inst);
        assert!(err <= TOL, "{name}, instance {seed}: relative error {err:e}");
        worst = worst.max(err);
    }
    println!("{name}: worst relative error {worst:e}");
}

fn run(model: &Model, obj: &dyn Objective) -> f64 {
    grad_check(model, obj, H).unwrap()
}

#[test]
fn cross_entropy() {
    check("cross-entropy", |i| {
        run(&i.model, &CrossEntropyObjective::new(&i.data, &i.batch).unwrap())
    });
}

#[test]
fn augmented_objective() {
    check("g", |i| {
        let (a, b) = (i.rng.random_range(0.0..1.0), i.rng.random_range(0.0..1.0));
        run(&i.model, &WeightedRewardObjective::augmented(&i.data, &i.batch, i.priors, a, b).unwrap())
    });
}

#[test]
fn nested_objective() {
    check("h", |i| {
        let mut r = || i.rng.random_range(-3.0..3.0);
        let duals = NestedDuals {
            alpha: [r(), r()],
            beta: [r(), r()],
            gamma: [1.0, 1.0],
        };
        run(&i.model, &WeightedRewardObjective::nested(&i.data, &i.batch, i.priors, &duals).unwrap())
    });
}

#[test]
fn valuation_objective() {
    check("V", |i| {
        let beta = i.rng.random_range(0.5..2.0);
        let coeffs = fbeta_coeffs(beta, i.priors.p()).unwrap();
        let level = i.rng.random_range(0.0..1.0);
        run(
            &i.model,
            &WeightedRewardObjective::valuation(&i.data, &i.batch, i.priors, &coeffs, level).unwrap(),
        )
    });
}

#[test]
fn structured_objective_at_fixed_labeling() {
    check("structured", |i| {
        let labeling: Vec<Label> = i
            .batch
            .iter()
            .map(|_| if i.rng.random_bool(0.5) { Label::Pos } else { Label::Neg })
            .collect();
        let delta = i.rng.random_range(0.0..1.0);
        let c = i.rng.random_range(0.1..10.0);
        run(
            &i.model,
            &StructuredObjective::new(&i.data, &i.batch, &labeling, delta, c).unwrap(),
        )
    });
}

