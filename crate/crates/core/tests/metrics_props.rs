mod common;

use adc_capacity::allocator::{
    enumerate_bset, exhaustive_search_capacity, exhaustive_search_kf, CandidateEvaluator, PathProfile, PowerBudget,
    DEFAULT_BSET_CAP,
};
use adc_capacity::metrics::{
    capacity, capacity_det, capacity_infinite_uniform, capacity_infinite_waterfill, crlb, k_f_sum, per_path_q,
};
use adc_capacity::quantizer::{BitAllocation, QuantGainTable, Quantization};
use adc_capacity::receiver::{CombinerMode, PowerConvention, SignalConfig};
use common::{cases, front_end, random_bits, random_sigma};
use proptest::prelude::*;

fn quantized(bits: &BitAllocation) -> Quantization {
    Quantization::Bits(bits.clone())
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn capacity_grows_with_snr_and_bits(seed in any::<u64>(), n_s in 1usize..=8, path in 0usize..8, snr in -20.0f64..15.0) {
        let path = path % n_s;
        let (_, fe) = front_end(seed, n_s, CombinerMode::Ideal);
        let table = QuantGainTable::default();
        let bits = random_bits(seed, n_s, 4);
        let at = |b: &BitAllocation, snr: f64| {
            let sig = SignalConfig::from_snr_db(snr, PowerConvention::SplitTotal).unwrap();
            capacity_det(&fe.model_for(&quantized(b), &table, &sig).unwrap()).unwrap()
        };
        let base = at(&bits, snr);
        prop_assert!(at(&bits, snr + 5.0) >= base);
        let mut more = bits.bits().to_vec();
        more[path] += 1;
        prop_assert!(at(&BitAllocation::new(more).unwrap(), snr) >= base);
        let sigma = fe.svd.sigma.as_slice();
        prop_assert!(base <= capacity_infinite_uniform(sigma, 10f64.powf(snr / 10.0)) + 1e-12);
    }

    #[test]
    fn det_form_is_sum_of_per_path_terms(seed in any::<u64>(), n_s in 1usize..=8, snr in -20.0f64..20.0) {
        let (_, fe) = front_end(seed, n_s, CombinerMode::Ideal);
        let bits = random_bits(seed, n_s, 5);
        let sig = SignalConfig::from_snr_db(snr, PowerConvention::SplitTotal).unwrap();
        let model = fe.model_for(&quantized(&bits), &QuantGainTable::default(), &sig).unwrap();
        // Independent scalar evaluation of every q_i from the table.
        let f = QuantGainTable::default();
        let sep: f64 = (0..n_s).map(|i| {
            let fb = f.f(bits.bits()[i]).unwrap();
            let s2 = model.sigma[i] * model.sigma[i];
            let q = model.p * s2 / (model.sigma_n_sq + fb * (1.0 + s2) / (1.0 - fb));
            (1.0 + q).log2()
        }).sum();
        prop_assert!((capacity_det(&model).unwrap() - sep).abs() <= 1e-10 * sep.max(1.0));
        prop_assert!((per_path_q(&model).iter().map(|q| (1.0 + q).log2()).sum::<f64>() - sep).abs() <= 1e-10 * sep.max(1.0));
        prop_assert!(crlb(&model).is_ok());
    }

    #[test]
    fn waterfilling_beats_uniform(seed in any::<u64>(), n in 1usize..=12, snr in -30.0f64..30.0) {
        let sigma = random_sigma(seed, n);
        let rho = 10f64.powf(snr / 10.0);
        let wf = capacity_infinite_waterfill(&sigma, rho).unwrap();
        prop_assert!(wf.capacity >= capacity_infinite_uniform(&sigma, rho) - 1e-12);
        prop_assert!((wf.epsilon.iter().sum::<f64>() - n as f64).abs() <= 1e-10 * n as f64);
        prop_assert!(wf.epsilon.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn k_f_strictly_increases_per_path(seed in any::<u64>()) {
        let (_, fe) = front_end(seed, 2, CombinerMode::Ideal);
        let sig = SignalConfig::from_snr_db(0.0, PowerConvention::PerStream).unwrap();
        let table = QuantGainTable::default();
        let model = fe.model_for(&Quantization::Unquantized, &table, &sig).unwrap();
        for a in 1..=4u8 {
            for b in 1..=4u8 {
                let k = |x: u8, y: u8| k_f_sum(&model, &BitAllocation::new(vec![x, y]).unwrap(), &table).unwrap();
                if a < 4 { prop_assert!(k(a + 1, b) > k(a, b)); }
                if b < 4 { prop_assert!(k(a, b + 1) > k(a, b)); }
            }
        }
    }
}

#[test]
fn unquantized_capacity_matches_uniform_closed_form() {
    for seed in 0..10u64 {
        let (_, fe) = front_end(seed, 8, CombinerMode::Ideal);
        let rho = 10f64.powf((seed as f64 - 5.0) / 2.0);
        let sig = SignalConfig::new(1.0, 1.0 / rho, PowerConvention::SplitTotal).unwrap();
        let model = fe
            .model_for(&Quantization::Unquantized, &QuantGainTable::default(), &sig)
            .unwrap();
        let c = capacity(&model).unwrap().capacity_bits;
        let closed = capacity_infinite_uniform(fe.svd.sigma.as_slice(), rho);
        assert!(
            (c - closed).abs() <= 1e-10 * closed.max(1.0),
            "seed {seed}: {c} vs {closed}"
        );
    }
}

#[test]
fn waterfilling_kkt_on_random_profiles() {
    for seed in 0..200u64 {
        let sigma = random_sigma(seed, 8);
        let rho = 10.0;
        let n = sigma.len() as f64;
        let wf = capacity_infinite_waterfill(&sigma, rho).unwrap();
        // Active paths sit at the water level, inactive floors lie above it.
        for (s, e) in sigma.iter().zip(&wf.epsilon) {
            let floor = n / (rho * s * s);
            if *e > 0.0 {
                assert!((floor + e - wf.water_level).abs() <= 1e-10 * wf.water_level.max(1.0));
            } else {
                assert!(floor >= wf.water_level * (1.0 - 1e-12));
            }
        }
    }
}

#[test]
fn surrogate_argmax_tracks_capacity_at_low_snr() {
    // At rho << 1, log2(1 + q) ~ q / ln 2, so both objectives pick alike.
    for seed in 0..20u64 {
        let (_, fe) = front_end(seed, 6, CombinerMode::Ideal);
        let sig = SignalConfig::from_snr_db(-20.0, PowerConvention::SplitTotal).unwrap();
        let table = QuantGainTable::default();
        let profile = PathProfile::from_front_end(&fe, &sig, &table).unwrap();
        let set = enumerate_bset(6, &PowerBudget::uniform(6, 2, 1.0, 1.0).unwrap(), DEFAULT_BSET_CAP).unwrap();
        let (_, best, _) = exhaustive_search_capacity(&profile, &set).unwrap();
        let (b_kf, _, _) = exhaustive_search_kf(&profile, &set).unwrap();
        let mut ops = Default::default();
        let c_kf = profile.capacity(&b_kf, &mut ops).unwrap();
        assert!(
            c_kf >= 0.98 * best.capacity_bits,
            "seed {seed}: {c_kf} vs {}",
            best.capacity_bits
        );
    }
}
