use consgrunet::layers::*;
use consgrunet::tensor::Tensor;
use proptest::prelude::*;

fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn vals(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, n)
}

proptest! {
    #[test]
    fn gru_state_stays_bounded(
        (steps, input, hidden) in (1usize..8, 1usize..4, 1usize..5),
        seed in any::<u64>(),
    ) {
        let mut init = Initializer::new(seed);
        let mut p = GruParams::<f64>::init(&mut init, input, hidden).unwrap();
        // large weights push the gates into saturation
        for t in p.tensors_mut() {
            *t = t.map(|v| v * 40.0);
        }
        let x = init.weights::<f64>(&[steps, input], 1).unwrap().map(|v| v * 50.0);
        let h0 = init.weights::<f64>(&[hidden], 1).unwrap();
        let (h, _) = gru_forward(&p, &x, &h0).unwrap();
        prop_assert!(h.data().iter().all(|v| v.is_finite() && v.abs() <= 1.0));
    }

    #[test]
    fn open_gate_grows_the_skip_share(
        main in vals(6, 1.0),
        skip in vals(6, 1.0),
        a in -6.0f64..6.0,
        d in 0.01f64..3.0,
    ) {
        let (m, s) = (tensor(&[2, 3], main), tensor(&[2, 3], skip));
        let out = |g: f64| {
            let p = GatedSkipParams::new(tensor(&[2], vec![g, g]), None).unwrap();
            gated_skip_apply(&p, &m, &s).unwrap().0
        };
        let (lo, hi) = (out(a), out(a + d));
        for ((l, h), sv) in lo.data().iter().zip(hi.data()).zip(s.data()) {
            // y - main = σ(γ)·skip, monotone in γ with the sign of skip
            prop_assert!((h - l) * sv >= -1e-15);
        }
    }

    #[test]
    fn conv_is_linear_in_its_input(
        x in vals(10, 1.0),
        y in vals(10, 1.0),
        w in vals(12, 1.0),
        a in -2.0f64..2.0,
    ) {
        let p = Conv1dParams::new(tensor(&[3, 2, 2], w), Tensor::zeros(&[3]).unwrap(), 2, 1).unwrap();
        let (x, y) = (tensor(&[2, 5], x), tensor(&[2, 5], y));
        let combo = tensor(&[2, 5], x.data().iter().zip(y.data()).map(|(u, v)| u + a * v).collect());
        let f = |t: &Tensor<f64>| conv1d_forward(&p, t).unwrap().0;
        let (fx, fy, fc) = (f(&x), f(&y), f(&combo));
        for i in 0..fc.len() {
            prop_assert!((fc.data()[i] - (fx.data()[i] + a * fy.data()[i])).abs() < 1e-12);
        }
    }
}
