//! Byte-level golden files for `run`, plus independent checks that the
//! golden numbers are right.

use std::fs;
use std::path::PathBuf;

use dephase::cli::{parse_config, read_csv, run};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run_golden(cfg_name: &str) -> (String, String) {
    let cfg = parse_config(&fs::read_to_string(golden(cfg_name)).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = run(&cfg, dir.path()).unwrap();
    let produced = fs::read_to_string(written.data).unwrap();
    let expected = fs::read_to_string(golden(&cfg_name.replace(".cfg", ".csv"))).unwrap();
    (produced, expected)
}

#[test]
fn gaussian_preset_matches_golden_bytes() {
    let (produced, expected) = run_golden("eq9_coarse.cfg");
    assert_eq!(produced, expected);
}

#[test]
fn gaussian_golden_is_the_closed_form() {
    let text = fs::read_to_string(golden("eq9_coarse.csv")).unwrap();
    let (grid, cols) = read_csv(&text).unwrap();
    for i in 0..grid.len {
        let t = grid.time(i);
        let want = [(-t * t).exp(), (-t * t).exp(), 1.0, (-4.0 * t * t).exp()];
        for (k, (_, values)) in cols.iter().enumerate() {
            let rel = (values[i] - want[k]).abs() / want[k];
            assert!(rel < 1e-8, "{} at t = {t}: {} vs {}", cols[k].0, values[i], want[k]);
        }
    }
}

#[test]
fn spin_star_matches_golden_bytes() {
    let (produced, expected) = run_golden("spinstar_small.cfg");
    assert_eq!(produced, expected);
}

/// Direct sum over the 16 configurations of the small ring config.
fn spin_oracle(theta1: f64) -> [f64; 4] {
    let (b1, b2, alpha, j1, j2, beta) = (1.5, 0.5, 2.0, 0.7, -0.4, 0.8);
    let (g1, g2) = ([1.0, 0.5], [2.0, 2.0]);
    let theta2 = 0.3;
    let mut states = Vec::new();
    for idx in 0..16u32 {
        let s: Vec<f64> = (0..4).map(|k| if idx >> k & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let s1 = (s[0] + s[1]) / 2.0 + j1 / b1 * s[0] * s[1];
        let s2 = (s[2] + s[3]) / 2.0 + j2 / b2 * s[2] * s[3];
        let e = b1 * s1 + b2 * s2 + alpha * s1 * s2;
        let m1 = g1[0] * s[0] + g1[1] * s[1];
        let m2 = g2[0] * s[2] + g2[1] * s[3];
        states.push(((-beta * e).exp(), m1, m2));
    }
    let z: f64 = states.iter().map(|s| s.0).sum();
    let modulus = |phase: &dyn Fn(f64, f64) -> f64| {
        let (re, im) = states.iter().fold((0.0, 0.0), |(re, im), &(w, m1, m2)| {
            let p = phase(m1, m2);
            (re + w * p.cos(), im + w * p.sin())
        });
        (re * re + im * im).sqrt() / z
    };
    [
        modulus(&|m1, _| 2.0 * theta1 * m1),
        modulus(&|_, m2| 2.0 * theta2 * m2),
        modulus(&|m1, m2| 2.0 * (theta1 * m1 - theta2 * m2)),
        modulus(&|m1, m2| 2.0 * (theta1 * m1 + theta2 * m2)),
    ]
}

#[test]
fn spin_star_golden_is_the_direct_sum() {
    let text = fs::read_to_string(golden("spinstar_small.csv")).unwrap();
    let (grid, cols) = read_csv(&text).unwrap();
    for i in 0..grid.len {
        let want = spin_oracle(grid.time(i));
        for (k, (_, values)) in cols.iter().enumerate() {
            assert!((values[i] - want[k]).abs() < 1e-8, "{} row {i}", cols[k].0);
        }
    }
}
