#![allow(dead_code)]

use adc_capacity::channel::{boost_dominant, generate_channel, truncated_svd, ChannelParams, ChannelRealization};
use adc_capacity::quantizer::{BitAllocation, QuantGainTable, Quantization};
use adc_capacity::receiver::{
    build_combiners, CombinerMode, EffectiveModel, PowerConvention, ReceiverFrontEnd, SignalConfig,
};
use adc_capacity::rng::seeded;
use rand::Rng;

pub fn front_end(seed: u64, n_s: usize, mode: CombinerMode) -> (ChannelRealization, ReceiverFrontEnd) {
    let params = ChannelParams {
        seed,
        ..Default::default()
    };
    let ch = boost_dominant(&generate_channel(&params).unwrap(), params.boost).unwrap();
    let svd = truncated_svd(&ch, n_s).unwrap();
    let comb = build_combiners(&svd, mode).unwrap();
    let fe = ReceiverFrontEnd::new(svd, comb, &ch).unwrap();
    (ch, fe)
}

pub fn random_bits(seed: u64, n: usize, max: u8) -> BitAllocation {
    let mut rng = seeded(seed ^ 0x5eed);
    BitAllocation::new((0..n).map(|_| rng.random_range(1..=max)).collect()).unwrap()
}

/// Model for a random channel, allocation and SNR.
pub fn random_model(seed: u64, n_s: usize, mode: CombinerMode, snr_db: f64) -> EffectiveModel {
    let (_, fe) = front_end(seed, n_s, mode);
    let bits = random_bits(seed, n_s, 5);
    let sig = SignalConfig::from_snr_db(snr_db, PowerConvention::PerStream).unwrap();
    fe.model_for(&Quantization::Bits(bits), &QuantGainTable::default(), &sig)
        .unwrap()
}

/// `sigma` drawn log-uniformly over two decades.
pub fn random_sigma(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect()
}

/// Property config without on-disk regression files, which proptest cannot
/// place for integration tests.
pub fn cases(n: u32) -> proptest::prelude::ProptestConfig {
    proptest::prelude::ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..Default::default()
    }
}
