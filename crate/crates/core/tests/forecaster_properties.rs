use proptest::prelude::*;
use twinx::forecaster::{TcnArch, TcnModel};

fn arb_arch() -> impl Strategy<Value = TcnArch> {
    (1usize..5, 1usize..6, 2usize..4, prop::collection::vec(1usize..4, 1..3)).prop_map(
        |(input_channels, hidden_channels, kernel_size, dilations)| TcnArch {
            input_channels,
            hidden_channels,
            kernel_size,
            dilations,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn output_ignores_rows_before_the_receptive_field(
        arch in arb_arch(),
        seed in any::<u64>(),
        extra in 1usize..12,
        noise in prop::collection::vec(-5.0f64..5.0, 1..400),
    ) {
        let model = TcnModel::<f64>::init(&arch, seed).unwrap();
        let d = arch.input_channels;
        let rows = arch.receptive_field() + extra;
        let window: Vec<f64> = (0..rows * d).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let mut perturbed = window.clone();
        for (k, v) in perturbed[..extra * d].iter_mut().enumerate() {
            *v += noise[k % noise.len()];
        }
        let a = model.forward(&window).unwrap();
        let b = model.forward(&perturbed).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.len(), d);
    }

    #[test]
    fn single_precision_tracks_double(arch in arb_arch(), seed in any::<u64>()) {
        let model = TcnModel::<f64>::init(&arch, seed).unwrap();
        let narrow = model.cast::<f32>();
        let d = arch.input_channels;
        let rows = arch.receptive_field();
        let window: Vec<f64> = (0..rows * d).map(|i| ((i * 13 % 29) as f64 / 14.0) - 1.0).collect();
        let wide = model.forward(&window).unwrap();
        let single = narrow.forward(&window.iter().map(|&v| v as f32).collect::<Vec<_>>()).unwrap();
        for (w, s) in wide.iter().zip(&single) {
            prop_assert!((w - *s as f64).abs() < 1e-4 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn flat_parameters_round_trip(arch in arb_arch(), seed in any::<u64>()) {
        let model = TcnModel::<f64>::init(&arch, seed).unwrap();
        let flat = model.flat();
        prop_assert_eq!(flat.len(), model.param_count());
        let mut copy = TcnModel::<f64>::zeros(&arch).unwrap();
        copy.set_flat(&flat).unwrap();
        prop_assert_eq!(copy, model);
    }
}
