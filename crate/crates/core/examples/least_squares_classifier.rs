//! Multiclass classification under the 0-1 loss. The weighted-argmin
//! prediction coincides with the one-vs-all least-squares classifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surrloss::decoders::predict;
use surrloss::theory::check_ls_equivalence;
use surrloss::{DecoderSpec, KernelSpec, LossFunction, Output, TrainedSurrogate};

fn main() -> surrloss::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let centers = [[-1.0, 0.0], [1.0, 0.0], [0.0, 1.5]];
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..90 {
        let c = i % 3;
        inputs.push(vec![centers[c][0] + rng.random_range(-0.6..0.6), centers[c][1] + rng.random_range(-0.6..0.6)]);
        labels.push(c);
    }
    let kernel = KernelSpec::gaussian(0.5)?;
    let outputs = labels.iter().map(|&l| Output::Label(l)).collect();
    let model = TrainedSurrogate::fit(inputs.clone(), outputs, kernel.clone(), 1e-3)?;
    let loss = LossFunction::ZeroOne { classes: 3 };
    let decoder = DecoderSpec::Exhaustive { candidates: (0..3).map(Output::Label).collect() };
    for q in [[-1.0, 0.1], [0.9, -0.2], [0.1, 1.4], [0.0, 0.5]] {
        let y = predict(&model, &decoder, &loss, &q)?;
        println!("{q:?} -> {}", y.as_label()?);
    }

    let queries: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-1.0..2.5)]).collect();
    let report = check_ls_equivalence(inputs, &labels, 3, kernel, 1e-3, &queries)?;
    println!(
        "argmax agreement on {} queries: {} mismatches, {} floating-point ties",
        report.queries, report.mismatches, report.near_ties
    );
    Ok(())
}
