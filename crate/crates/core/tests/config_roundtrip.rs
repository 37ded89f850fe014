mod common;

use proptest::prelude::*;

use ris_zf::phaseopt::PhaseRule;
use ris_zf::sysconfig::{to_config_string, CorrelationModel, PowerMode, RawConfig, Scheme};

fn rules() -> impl Strategy<Value = Vec<PhaseRule>> {
    proptest::sample::subsequence(PhaseRule::ALL.to_vec(), 1..=3)
}

fn schemes() -> impl Strategy<Value = Vec<Scheme>> {
    proptest::sample::subsequence(Scheme::ALL.to_vec(), 1..=2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_then_load_is_identity(
        m in 1usize..512,
        n in 1usize..16,
        k in 1usize..6,
        l in 1usize..3,
        ud in 0usize..4,
        power in 1e-3f64..1e4,
        noise in 1e-16f64..1.0,
        normalized in any::<bool>(),
        iid in any::<bool>(),
        tau in 0.0f64..0.99,
        trials in 1usize..1000,
        seed in any::<u64>(),
        rules in rules(),
        schemes in schemes(),
        sweep in proptest::collection::vec(1usize..300, 1..5),
    ) {
        let text = format!(
            "antennas={m}\nris_elements={n}\nnum_ris={k}\nblocked_per_ris={l}\n\
             direct_users={ud}\ntotal_power={power}\nnoise_variance={noise}\n\
             power_mode={}\ncorrelation={}\nestimation_error_fraction={tau}\n\
             trials={trials}\nmaster_seed={seed}\nphase_rules={}\nschemes={}\nsweep_m={}\n",
            if normalized { "sum_power_normalized" } else { "paper_literal" },
            if iid { "iid" } else { "sinc" },
            rules.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(","),
            schemes.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","),
            sweep.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        );
        let (sys, ch, run) = RawConfig::parse(&text, "gen").unwrap().build().unwrap();
        prop_assert_eq!(sys.power_mode, if normalized { PowerMode::SumPowerNormalized } else { PowerMode::PaperLiteral });
        prop_assert_eq!(ch.correlation, if iid { CorrelationModel::Iid } else { CorrelationModel::Sinc });
        prop_assert_eq!(sys.blocked_per_ris.len(), k);

        let again = to_config_string(&sys, &ch, &run);
        let (sys2, ch2, run2) = RawConfig::parse(&again, "roundtrip").unwrap().build().unwrap();
        prop_assert_eq!(&sys, &sys2);
        prop_assert_eq!(&ch, &ch2);
        prop_assert_eq!(&run, &run2);
        prop_assert_eq!(again, to_config_string(&sys2, &ch2, &run2));
    }
}

#[test]
fn unknown_key_reports_its_line() {
    let err = RawConfig::parse("antennas = 8\n\n# note\nantenas = 9\n", "x.cfg").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("antenas") && msg.contains("line 4"), "{msg}");
}

#[test]
fn out_of_range_value_is_rejected() {
    for bad in [
        "damping = 0",
        "csi_tau = 0.5,1.0",
        "trials = 0",
        "blocked_per_ris = 1,1",
        "num_ris = 0",
    ] {
        let r = RawConfig::parse(bad, "x").unwrap().build();
        assert!(r.is_err(), "{bad} accepted");
    }
}

#[test]
fn spacing_accepts_wavelength_fractions() {
    let (_, ch, _) = common::config("carrier_frequency = 1.8e9\nelement_spacing = lambda\n");
    assert!((ch.element_spacing - 0.16655).abs() < 1e-4);
    let (_, ch4, _) = common::config("element_spacing = lambda/4\n");
    assert!((ch4.element_spacing * 4.0 - ch.element_spacing).abs() < 1e-12);
    assert!((ch4.element_area - ch4.element_spacing.powi(2)).abs() < 1e-15);
}
