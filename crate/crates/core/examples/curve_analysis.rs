//! Loss-curve utilities on hand-made numbers: normalization, argmin and
//! the intrinsic-dimension rule.

use dimsweep::analysis::{
    huber, intrinsic_dimension, normalize_curve, CurvePoint, Dimension, LossCurve, ThresholdRule,
};

fn main() -> dimsweep::Result<()> {
    for r in [0.0, 0.5, 1.0, 2.0] {
        println!("huber({r}) = {}", huber(r, 0.0, 1.0));
    }

    let losses = [0.91, 0.62, 0.40, 0.31, 0.30, 0.305, 0.31, 0.32];
    let mut points: Vec<CurvePoint> = losses
        .iter()
        .enumerate()
        .map(|(i, &l)| CurvePoint {
            dimension: Dimension::Latent(1 << i),
            mean_huber: l,
        })
        .collect();
    points.push(CurvePoint {
        dimension: Dimension::Raw(768),
        mean_huber: 0.33,
    });
    let curve = LossCurve::new(points)?;
    let norm = normalize_curve(&curve)?;
    for (p, n) in curve.points.iter().zip(norm.normalized.as_ref().unwrap()) {
        println!(
            "{:>8}  {:.3}  {:.3}",
            p.dimension.to_string(),
            p.mean_huber,
            n
        );
    }
    println!("argmin {}", curve.argmin().unwrap().dimension);
    for rule in [ThresholdRule::Normalized, ThresholdRule::Relative] {
        println!(
            "intrinsic ({rule:?}, 0.10): {}",
            intrinsic_dimension(&curve, 0.10, rule)?
        );
    }
    Ok(())
}
