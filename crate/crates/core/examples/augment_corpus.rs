//! Expands one synthetic sample with Strategy I and II and shows that each
//! variant replays from its transform log.

use glandseg::augment::{augment_strategy, replay, AugmentConfig, Sample, Strategy};
use glandseg::cli::{generate, SynthConfig};

fn main() -> glandseg::Result<()> {
    let s = generate(&SynthConfig::default(), 11, 0)?;
    let sample = Sample::new(s.id.clone(), s.image, s.labels)?;
    let cfg = AugmentConfig::default();
    for strategy in [Strategy::I, Strategy::II] {
        let variants = augment_strategy(&sample, strategy, 42, &cfg)?;
        println!("Strategy {strategy}: {} variants", variants.len());
        for (k, v) in variants.iter().enumerate() {
            let again = replay(&sample, &v.transforms)?;
            let exact = again.image == v.image && again.labels == v.labels;
            println!(
                "  {k:>2}  {:<60}  instances {}  replay exact: {exact}",
                serde_json::to_string(&v.transforms)?,
                v.labels.num_instances()
            );
        }
    }
    Ok(())
}
