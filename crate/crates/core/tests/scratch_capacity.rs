use coofdm_core::equalizer::{NnEqualizer, TrainOptions};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

const G: usize = 100;

fn qam16(rng: &mut ChaCha12Rng) -> Complex64 {
    let lv = [-3.0, -1.0, 1.0, 3.0];
    let s = 10.0f64.sqrt();
    Complex64::new(lv[rng.gen_range(0..4)] / s, lv[rng.gen_range(0..4)] / s)
}

fn dataset(
    rows: usize,
    mix: &Array2<Complex64>,
    sigma: f64,
    rng: &mut ChaCha12Rng,
) -> (Array2<Complex64>, Array2<Complex64>) {
    let norm = Normal::new(0.0, sigma / 2f64.sqrt()).unwrap();
    let tx = Array2::from_shape_fn((rows, G), |_| qam16(rng));
    let mut rx = tx.clone();
    for t in 0..rows {
        for k in 0..G {
            let mut ici = Complex64::new(0.0, 0.0);
            for j in 0..G {
                ici += mix[(k, j)] * tx[(t, j)];
            }
            rx[(t, k)] += ici + Complex64::new(norm.sample(rng), norm.sample(rng));
        }
    }
    (tx, rx)
}

fn mse(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64
}

#[test]
fn capacity_scan() {
    let mut rng = ChaCha12Rng::seed_from_u64(100);
    // Fixed ICI-like mixing, rms contribution ~0.15 per symbol.
    let a_norm = Normal::new(0.0, 0.15 / (2.0 * G as f64).sqrt()).unwrap();
    let mix = Array2::from_shape_fn((G, G), |_| {
        Complex64::new(a_norm.sample(&mut rng), a_norm.sample(&mut rng))
    });
    let sigma = 0.10;
    let (tx_test, rx_test) = dataset(300, &mix, sigma, &mut rng);
    let input_mse = mse(&rx_test, &tx_test);
    println!("input mse {input_mse:.5}  (ici+noise model, g={G})");
    for rows in [50usize, 100, 150, 200, 300, 400] {
        let t0 = std::time::Instant::now();
        let (tx, rx) = dataset(rows, &mix, sigma, &mut rng);
        // One group of size G, mimicking the wide middle group: G subnets,
        // each seeing the whole group and producing one subcarrier.
        let mut net_rng = ChaCha12Rng::seed_from_u64(9);
        let mut eq = NnEqualizer {
            kind: coofdm_core::equalizer::NnKind::Grouped(coofdm_core::equalizer::CaseId::Case2),
            order: 16,
            seed: 9,
            subnets: (0..G)
                .map(|_| {
                    coofdm_core::equalizer::SubNetwork::new_random(G, 3 * 16, 1, &mut net_rng)
                })
                .collect(),
            in_spans: vec![(0, G); G],
            out_cols: (0..G).collect(),
        };
        let summaries = eq.train(&rx, &tx, &TrainOptions::default()).unwrap();
        let mean_epochs =
            summaries.iter().map(|s| s.epochs).sum::<usize>() as f64 / summaries.len() as f64;
        let mean_cost =
            summaries.iter().map(|s| s.final_cost).sum::<f64>() / summaries.len() as f64;
        let train_out = eq.apply(&rx).unwrap();
        let test_out = eq.apply(&rx_test).unwrap();
        println!(
            "rows {rows:>4}: mean epochs {mean_epochs:>5.1} cost {mean_cost:.2e} | apply-train mse {:.2e} | test mse {:.4} ({:+.1}% vs input) | {:.0} s",
            mse(&train_out, &tx),
            mse(&test_out, &tx_test),
            100.0 * (mse(&test_out, &tx_test) / input_mse - 1.0),
            t0.elapsed().as_secs_f64(),
        );
    }
}
