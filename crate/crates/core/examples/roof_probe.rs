//! Scratch accuracy probe for the roof optimizer against closed forms.
//! Run with: cargo run --release -p gme-core --example roof_probe

use std::time::Instant;

use gme_core::families::{
    iso_closed_forms, make_isotropic, make_maxcorr, maxcorr_closed_forms, two_qubit_closed_forms,
    IsotropicSpec, MaxCorrGcl, MaxCorrSpec,
};
use gme_core::optimize::random_density_matrix;
use gme_core::roof::{convex_roof, RoofKind};
use gme_core::{MultipartiteSpace, OptimizerOptions};

fn main() {
    let opts = OptimizerOptions::default();

    // two-qubit roofs vs concurrence
    let space = MultipartiteSpace::qubits(2).unwrap();
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let n = 12;
    for seed in 0..n {
        let rho = random_density_matrix::<f64>(&space, 4, 1000 + seed);
        let forms = two_qubit_closed_forms(&rho).unwrap();
        let res = convex_roof(&rho, RoofKind::Logarithmic, &opts).unwrap();
        let dev = res.value - forms.g_l;
        if dev.abs() > worst.abs() {
            worst = dev;
        }
        println!("two-qubit seed {seed}: roof {:.9} closed {:.9} dev {:+.2e}", res.value, forms.g_l, dev);
    }
    println!(
        "two-qubit log roof: worst dev {worst:+.3e}  ({:.2?}/state)\n",
        t0.elapsed() / n as u32
    );

    // maximally correlated rank-2 grid
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut count = 0;
    for (m, nn) in [(1usize, 2usize), (1, 3), (1, 4), (2, 3), (2, 5)] {
        for qi in 1..=9 {
            let q = qi as f64 / 10.0;
            let spec = MaxCorrSpec::rank2(m, nn, q).unwrap();
            let rho = make_maxcorr(&spec);
            let forms = maxcorr_closed_forms(&spec);
            let expect = match forms.g_c_l {
                MaxCorrGcl::Exact(v) => v,
                _ => continue,
            };
            let res = convex_roof(&rho, RoofKind::Logarithmic, &opts).unwrap();
            let dev = res.value - expect;
            count += 1;
            if dev.abs() > worst.abs() {
                worst = dev;
                println!("maxcorr ({m},{nn},{q}): roof {:.9} closed {expect:.9} dev {dev:+.2e}", res.value);
            }
        }
    }
    println!(
        "maxcorr log roof: worst dev {worst:+.3e} over {count} points ({:.2?}/point)\n",
        t0.elapsed() / count as u32
    );

    // isotropic states
    for d in [2usize, 3, 4] {
        let t0 = Instant::now();
        let mut worst_lin = 0.0f64;
        let mut worst_log = 0.0f64;
        for k in [2, 5, 9] {
            let f = 1.0 / d as f64 + (k as f64 / 9.0) * (1.0 - 1.0 / d as f64);
            let spec = IsotropicSpec::from_fidelity(d, f).unwrap();
            let rho = make_isotropic(&spec);
            let forms = iso_closed_forms(&spec);
            let lin = convex_roof(&rho, RoofKind::Linear, &opts).unwrap();
            let log = convex_roof(&rho, RoofKind::Logarithmic, &opts).unwrap();
            let dl = lin.value - forms.g_fc;
            let dg = log.value - forms.g_c_l;
            println!(
                "iso d={d} F={f:.3}: lin dev {dl:+.2e}  log dev {dg:+.2e}"
            );
            if dl.abs() > worst_lin.abs() {
                worst_lin = dl;
            }
            if dg.abs() > worst_log.abs() {
                worst_log = dg;
            }
        }
        println!(
            "iso d={d}: worst lin {worst_lin:+.3e} log {worst_log:+.3e}  ({:.2?}/point incl both roofs)\n",
            t0.elapsed() / 3
        );
    }
}
