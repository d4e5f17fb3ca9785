use nlads::diagnostics::*;
use nlads::harness::config::DEFAULT_NASH_CONSTANT;
use proptest::prelude::*;

const L: f64 = 20.0;
const M: usize = 2048;

fn grid() -> Vec<f64> {
    let dx = 2.0 * L / M as f64;
    (0..M).map(|c| -L + c as f64 * dx).collect()
}

fn bumps() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    proptest::collection::vec((-5.0f64..5.0, 0.3f64..3.0, 0.0f64..2.0), 1..5)
}

fn sample(b: &[(f64, f64, f64)]) -> Vec<f64> {
    grid().iter().map(|&x| b.iter().map(|(c, w, a)| a * (-((x - c) / w).powi(2)).exp()).sum()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norms_are_homogeneous(b in bumps(), t in 0.1f64..10.0, p in 1.0f64..6.0) {
        let dx = 2.0 * L / M as f64;
        let u = sample(&b);
        let ut: Vec<f64> = u.iter().map(|v| t * v).collect();
        let (n, nt) = (lp_norm(&u, p, dx), lp_norm(&ut, p, dx));
        prop_assert!((nt - t * n).abs() <= 1e-12 * (1.0 + nt));
    }

    #[test]
    fn interpolation_inequality(b in bumps()) {
        // ‖u‖₂² ≤ ‖u‖₁‖u‖_∞
        let dx = 2.0 * L / M as f64;
        let u = sample(&b);
        prop_assume!(u.iter().any(|&v| v > 1e-6));
        let sup = u.iter().fold(0.0f64, |m, v| m.max(*v));
        prop_assert!(lp_norm(&u, 2.0, dx).powi(2) <= lp_norm(&u, 1.0, dx) * sup * (1.0 + 1e-12));
    }

    #[test]
    fn nash_holds_with_default_constant(b in bumps(), p in 2.0f64..5.0) {
        let dx = 2.0 * L / M as f64;
        let u = sample(&b);
        prop_assume!(lp_norm(&u, 1.0, dx) > 1e-8);
        prop_assert!(nash_residual(&u, dx, p, DEFAULT_NASH_CONSTANT) >= 0.0);
    }

    #[test]
    fn csv_row_matches_header(n in 1usize..4, t in 0.0f64..10.0) {
        let u: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0 + i as f64; 8]).collect();
        let r = record(t, &u, Cells::Uniform(0.5), &vec![2.0; n], &vec![4.0; n]);
        prop_assert_eq!(csv_row(&r).len(), csv_header(n).len());
        prop_assert_eq!(csv_header(n).len(), 3 + 5 * n);
    }
}

#[test]
fn calibration_reproduces_the_shipped_constant() {
    let cal = calibrate_nash_constant(L, M);
    // the sharp one-dimensional constant 3√3/(4π) bounds every admissible ratio
    let sharp = 3.0 * 3f64.sqrt() / (4.0 * std::f64::consts::PI);
    assert!(cal.max_ratio <= sharp + 1e-6, "{cal:?}");
    assert!(cal.max_ratio >= 1.0 / (2.0 * std::f64::consts::PI).sqrt() - 1e-9);
    assert!((cal.c_n - DEFAULT_NASH_CONSTANT).abs() < 5e-5, "{cal:?}");
    assert!((cal.c_n - NASH_SAFETY * cal.max_ratio).abs() < 1e-15);
}

#[test]
fn gaussian_ratio_is_dilation_invariant() {
    let dx = 2.0 * L / M as f64;
    let expected = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    for w in [0.3, 0.7, 1.0, 2.0, 3.0] {
        let u: Vec<f64> = grid().iter().map(|x| (-(x / w).powi(2)).exp()).collect();
        assert!((nash_ratio(&u, dx) - expected).abs() < 1e-9, "w = {w}");
    }
}

#[test]
fn csv_roundtrip_through_the_csv_crate() {
    let r = record(0.5, &[vec![1.0, 2.0, 3.0]], Cells::Uniform(0.25), &[2.0], &[1.5]);
    let mut buf = Vec::new();
    write_csv(&[r.clone(), r.clone()], &mut buf).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, csv_header(1));
    let rows: Vec<csv::StringRecord> = rd.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let mass: f64 = rows[0][3].parse().unwrap();
    assert_eq!(mass, 1.5);
    let t: f64 = rows[0][0].parse().unwrap();
    assert_eq!(t, 0.5);
}
