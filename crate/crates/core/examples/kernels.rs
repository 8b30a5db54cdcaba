//! Fundamental solutions at a few distances, and what the truncation rule
//! does at coincident points.

use std::f64::consts::{E, TAU};

use bie_operator::kernels::{biharmonic2d, biharmonic2d_dn, helmholtz3d, laplace2d, laplace3d, TruncationRule};

fn main() {
    let rule = TruncationRule::new(1e5).unwrap();
    let o2 = [0.0, 0.0];
    let o3 = [0.0, 0.0, 0.0];
    println!("{:>6} {:>14} {:>14} {:>14} {:>28}", "r", "laplace2d", "laplace3d", "biharmonic2d", "helmholtz3d k=2π");
    for r in [0.5, 1.0, 2.0, E] {
        let h = helmholtz3d(&o3, &[r, 0.0, 0.0], TAU, &rule);
        println!(
            "{r:>6.3} {:>14.6e} {:>14.6e} {:>14.6e} {:>13.6e}{:+.6e}i",
            laplace2d(&o2, &[r, 0.0], &rule).re,
            laplace3d(&o3, &[r, 0.0, 0.0], &rule).re,
            biharmonic2d(&o2, &[r, 0.0], &rule).re,
            h.re,
            h.im
        );
    }
    println!("x = y: laplace2d {}, laplace3d {}", laplace2d(&o2, &o2, &rule).re, laplace3d(&o3, &o3, &rule).re);
    // Normal derivative in x of the bi-harmonic kernel, with (x − y)·n = 1.
    let d = biharmonic2d_dn(&[1.0, 0.0], &o2, &[1.0, 0.0], &rule);
    println!("∂G/∂n_x at r = 1: {:.10} (1/8π = {:.10})", d.re, 1.0 / (4.0 * TAU));
}
