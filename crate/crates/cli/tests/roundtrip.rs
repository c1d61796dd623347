use proptest::prelude::*;
use qmarginal::matcore::ComplexMatrix;
use qmarginal::Complex64;
use qmarginal_cli::canon::format_g17;
use qmarginal_cli::statefile::StateFile;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO,
        -1.0f64..1.0,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_files_round_trip(dims in proptest::collection::vec(1usize..=3, 1..=3), seed in proptest::collection::vec(finite(), 2 * 27 * 27)) {
        let n: usize = dims.iter().product();
        let data: Vec<Complex64> = (0..n * n).map(|k| Complex64::new(seed[2 * k], seed[2 * k + 1])).collect();
        let file = StateFile { dims, matrix: ComplexMatrix::new(n, n, data).unwrap() };
        let text = file.to_canonical();
        let back = StateFile::parse(&text).unwrap();
        prop_assert_eq!(back.to_canonical(), text);
        for (a, b) in back.matrix.data().iter().zip(file.matrix.data()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn g17_is_exact(x in finite()) {
        prop_assert_eq!(format_g17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
