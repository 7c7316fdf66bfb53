use std::path::PathBuf;

use proptest::prelude::*;
use toda_core::analysis::GrowthModel;
use toda_core::{PacketWidth, Preset};
use toda_harness::config::{Cutoff, SectionStart};
use toda_harness::ExperimentConfig;

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![1e-12..1e6f64, (1u32..1000).prop_map(|k| k as f64 / 64.0)]
}

proptest! {
    #[test]
    fn serializing_then_parsing_is_the_identity(
        chaotic: bool,
        matched: bool,
        hbar in prop::collection::vec(positive(), 0..5),
        delta in prop::collection::vec(positive(), 0..6),
        omega in positive(),
        cutoff in prop::option::of(1usize..500),
        margin in 0usize..50,
        m in 1usize..10_000_000,
        seed: u64,
        samples in 2usize..5000,
        paired: bool,
        linear: bool,
        window_start in 0.0..10.0f64,
        window_factor in 0.01..1.0f64,
        tail_fraction in 0.01..0.5f64,
        smoothing in 0usize..10,
        center_start: bool,
        crossings in 1usize..10_000,
        workers in 1usize..64,
        dir in "[a-z0-9_/ .-]{1,20}",
    ) {
        let mut c = ExperimentConfig::preset(if chaotic { Preset::Chaotic } else { Preset::Regular });
        c.packet = if matched { PacketWidth::MassMatched } else { PacketWidth::UnitMass };
        c.quantum.hbar = hbar;
        c.quantum.omega = omega;
        c.quantum.cutoff = cutoff.map_or(Cutoff::Auto, Cutoff::Fixed);
        c.quantum.cutoff_margin = margin;
        c.classical.delta = delta;
        c.classical.m = m;
        c.classical.seed = seed;
        c.classical.paired = paired;
        // keep the grid spacing a whole number of ensemble steps
        c.time.samples = samples;
        c.time.t_max = (samples - 1) as f64 * 0.25;
        c.analysis.model = if linear { GrowthModel::Linear } else { GrowthModel::Logarithmic };
        c.analysis.window_start = window_start;
        c.analysis.window_factor = window_factor;
        c.analysis.tail_fraction = tail_fraction;
        c.analysis.smoothing = smoothing;
        c.poincare.start = if center_start { SectionStart::Center } else { SectionStart::Line };
        c.poincare.crossings = crossings;
        c.run.workers = workers;
        c.run.output = PathBuf::from(dir.trim());
        prop_assume!(!dir.trim().is_empty());
        let text = c.to_text();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_text(), text);
        prop_assert_eq!(back.hash(), c.hash());
    }
}
