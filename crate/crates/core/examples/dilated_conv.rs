//! A dilated convolution equals a dense convolution with the kernel
//! inflated by zeros, and its receptive field grows with the dilation.

use glandseg::diffnet::ops::{conv2d, inflate_kernel};
use glandseg::diffnet::{seeded_rng, ConvGeometry, Tensor};
use rand::Rng;

fn main() -> glandseg::Result<()> {
    let mut rng = seeded_rng(3);
    let mut random = |shape: &[usize]| {
        let n: usize = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    };
    let x = random(&[2, 17, 17])?;
    let k = random(&[1, 2, 3, 3])?;
    for d in 1..=4 {
        let dilated = conv2d(&x, &k, None, ConvGeometry::same(3, d))?;
        let inflated = inflate_kernel(&k, d)?;
        let dense = conv2d(&x, &inflated, None, ConvGeometry::same(inflated.shape()[2], 1))?;
        println!(
            "dilation {d}: inflated kernel {}x{}, max |difference| {:.1e}",
            inflated.shape()[2],
            inflated.shape()[3],
            dilated.max_abs_diff(&dense)
        );
    }

    // receptive field of the centre output for stacked 3x3 layers
    for dilations in [[1, 1, 1], [1, 2, 4]] {
        let mut impulse = Tensor::zeros(&[1, 33, 33]);
        impulse.values_mut()[16 * 33 + 16] = 1.0;
        let ones = Tensor::full(&[1, 1, 3, 3], 1.0);
        let mut y = impulse;
        for d in dilations {
            y = conv2d(&y, &ones, None, ConvGeometry::same(3, d))?;
        }
        let reach = y.values().iter().filter(|&&v| v != 0.0).count();
        let side = (reach as f64).sqrt();
        println!("dilations {dilations:?}: receptive field {side}x{side}");
    }
    Ok(())
}
