//! Fit, save to JSON, load back and predict with identical results.

use surrloss::decoders::predict;
use surrloss::surrogate::ModelBlob;
use surrloss::{DecoderSpec, KernelSpec, LossFunction, Output, TrainedSurrogate};

fn main() -> surrloss::Result<()> {
    let inputs: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64 / 24.0]).collect();
    let outputs = inputs.iter().map(|x| Output::Scalar((4.0 * x[0]).sin())).collect();
    let model = TrainedSurrogate::fit(inputs, outputs, KernelSpec::gaussian(0.1)?, 1e-4)?;

    let json = model.to_blob().to_json()?;
    println!("serialized model: {} bytes", json.len());
    let restored = ModelBlob::from_json(&json)?.into_model()?;

    let loss = LossFunction::cauchy(1.0)?;
    for x in [0.1, 0.35, 0.8] {
        let a = predict(&model, &DecoderSpec::ROBUST_DEFAULT, &loss, &[x])?.as_scalar()?;
        let b = predict(&restored, &DecoderSpec::ROBUST_DEFAULT, &loss, &[x])?.as_scalar()?;
        assert_eq!(a.to_bits(), b.to_bits());
        println!("x = {x:.2}  y = {a:+.4}  (sin 4x = {:+.4})", (4.0 * x).sin());
    }
    Ok(())
}
