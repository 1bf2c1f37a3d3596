use proptest::prelude::*;
use pulse_memory::fitness::{internal_efficiency, window_integral};
use pulse_memory::memory_sim::{
    simulate_experiment, ExperimentTiming, InstrumentModel, MemoryTrace, SignalSpec, SimBackend, SimParams,
    STABILITY_LIMIT,
};
use pulse_memory::pulse_codec::{DecodeContext, Encoding, Genome};

fn total_energy(trace: &MemoryTrace, values: &[f64]) -> f64 {
    window_integral(trace.t_start, trace.dt, values, trace.t_start, trace.t_end()).unwrap()
}

fn gaussian_backend() -> SimBackend {
    SimBackend::new(DecodeContext::new(Encoding::Gaussian))
}

#[test]
fn step_refinement_is_fourth_order() {
    let mut backend = gaussian_backend();
    let genome = Genome::new(vec![1.0, 20.0, -20.0]);
    let mut eta = |dt: f64| {
        backend.params.dt_int = dt;
        let trace = backend.simulate(&genome).unwrap();
        internal_efficiency(&trace, &backend.timing).unwrap().eta_int
    };
    let oracle = eta(0.00625);
    let coarse = (eta(0.1) - oracle).abs();
    let fine = (eta(0.05) - oracle).abs();
    assert!(coarse / fine >= 4.0, "refinement factor {}", coarse / fine);
}

#[test]
fn stored_energy_decays_exponentially_with_storage_time() {
    let mut backend = gaussian_backend();
    let genome = Genome::new(vec![1.0, 20.0, -20.0]);
    let retrieved: Vec<f64> = [200.0, 300.0, 400.0]
        .iter()
        .map(|&dt| {
            backend.timing.storage_time = dt;
            let trace = backend.simulate(&genome).unwrap();
            internal_efficiency(&trace, &backend.timing).unwrap().retrieved_energy
        })
        .collect();
    let expected = (-2.0 * backend.params.gamma_s * 100.0).exp();
    assert!((retrieved[1] / retrieved[0] / expected - 1.0).abs() < 1e-6);
    assert!((retrieved[2] / retrieved[1] / expected - 1.0).abs() < 1e-6);
}

#[test]
fn spin_wave_holds_the_unretrieved_excitation() {
    let backend = gaussian_backend();
    let trace = backend.simulate(&Genome::new(vec![1.0, 20.0, -20.0])).unwrap();
    assert!(trace.final_spin_wave_norm > 0.0);
    assert!(total_energy(&trace, &trace.output_intensity) < total_energy(&trace, &trace.input_intensity));
}

#[test]
fn invalid_parameters_are_rejected() {
    let wf = DecodeContext::new(Encoding::Gaussian)
        .decode(&Genome::new(vec![1.0, 20.0, -20.0]))
        .unwrap();
    let bad = [
        SimParams { optical_depth: -1.0, ..SimParams::default() },
        SimParams { n_z: 1, ..SimParams::default() },
        SimParams { dt_int: 0.0, ..SimParams::default() },
        SimParams { gamma: f64::NAN, ..SimParams::default() },
    ];
    for params in bad {
        let r = simulate_experiment(&wf, &SignalSpec::default(), &ExperimentTiming::default(), &params, &InstrumentModel::default());
        assert!(r.is_err(), "{params:?}");
    }
}

fn arb_case() -> impl Strategy<Value = (SimParams, InstrumentModel, SignalSpec, ExperimentTiming, Encoding, Vec<f64>)> {
    (
        (1.0f64..30.0, 0.1f64..1.0, 0.0f64..0.01, -10.0f64..10.0, 16usize..48),
        (0.2f64..3.0, 0.0f64..30.0),
        (3.8f64..43.0, 100.0f64..400.0, 10.0f64..60.0),
        any::<bool>(),
        prop::collection::vec(0.0f64..1.0, 16),
    )
        .prop_map(|((d, gamma, gamma_s, detuning, n_z), (omega_max, rise), (fwhm, storage, read), freeform, u)| {
            let rho = gamma + detuning.abs() + d * gamma + omega_max + gamma_s;
            let params = SimParams {
                optical_depth: d,
                gamma,
                gamma_s,
                detuning,
                n_z,
                dt_int: (0.9 * STABILITY_LIMIT / rho).min(0.1),
            };
            let instrument = InstrumentModel { rise_time: rise, omega_max };
            let signal = SignalSpec { fwhm, amplitude: 1.0 };
            let timing = ExperimentTiming { storage_time: storage, read_fwhm: read };
            if freeform {
                let genes = u.iter().map(|x| -0.2 + 1.2 * x).collect();
                (params, instrument, signal, timing, Encoding::Freeform, genes)
            } else {
                let genes = vec![(u[0] * 49.0).round() / 49.0, 1.0 + (u[1] * 79.0).round(), -(u[2] * 60.0).round()];
                (params, instrument, signal, timing, Encoding::Gaussian, genes)
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn medium_is_passive((params, instrument, signal, timing, encoding, genes) in arb_case()) {
        let wf = DecodeContext::new(encoding).decode(&Genome::new(genes)).unwrap();
        let trace = simulate_experiment(&wf, &signal, &timing, &params, &instrument).unwrap();
        let e_in = total_energy(&trace, &trace.input_intensity);
        let e_out = total_energy(&trace, &trace.output_intensity);
        prop_assert!(e_out <= e_in * (1.0 + 1e-9), "out {e_out} > in {e_in}");
        let eta = internal_efficiency(&trace, &timing).unwrap().eta_int;
        prop_assert!((0.0..=1.0).contains(&eta));
    }
}
