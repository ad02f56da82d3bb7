//! Windowed multi-head correlation between two feature maps.
//!
//!     cargo run --example correlation

use candle_core::{DType, Device, IndexOp, Tensor};
use extcalib::network::{correlation_channels, windowed_correlation};

fn main() -> extcalib::Result<()> {
    let dev = Device::Cpu;
    let (c, h, w) = (32, 6, 10);
    let q = Tensor::randn(0f32, 1.0, (1, c, h, w), &dev)?;
    // keys are the queries shifted one column to the right: the peak sits at offset (0, +1)
    let k = q.pad_with_zeros(3, 1, 0)?.narrow(3, 0, w)?;

    for (heads, window) in [(1, 1), (2, 2), (4, 3)] {
        let corr = windowed_correlation(&q, &k, heads, window)?;
        println!(
            "heads {heads}, window {window}: {:?} ({} channels)",
            corr.dims(),
            correlation_channels(window, heads)
        );
    }

    let corr = windowed_correlation(&q, &k, 1, 1)?;
    let centre = corr.i((0, .., 3, 5))?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
    println!("3x3 response at pixel (5, 3), row-major offsets:");
    for row in centre.chunks(3) {
        println!("  {:7.3} {:7.3} {:7.3}", row[0], row[1], row[2]);
    }
    Ok(())
}
