use std::f64::consts::PI;

use cavityfarm::cavity::inverse_length_integral;
use cavityfarm::drivers::{
    length, GwSpringDriver, LengthDriver, SampledDriver, SampledSeries, SinusoidDriver, SpringParams, StrainWaveform,
};
use proptest::prelude::*;

fn spline_error(spacing: f64) -> f64 {
    let n = (2.0 * PI / spacing).round() as usize;
    let pts = (0..=n).map(|k| {
        let t = k as f64 * spacing;
        (t, t.sin())
    });
    let s = SampledSeries::new(pts.collect()).unwrap();
    let (_, end) = s.domain();
    (0..2000)
        .map(|k| {
            let t = end * k as f64 / 1999.0;
            (s.eval(t).unwrap().0 - t.sin()).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn spline_converges_at_fourth_order() {
    let (coarse, fine) = (spline_error(0.2), spline_error(0.1));
    let order = (coarse / fine).log2();
    assert!(order > 3.5, "observed order {order:.2} ({coarse:e} -> {fine:e})");
}

#[test]
fn sampled_driver_follows_a_tabulated_sinusoid() {
    let (l0, a, g) = (8.0, 0.05, 0.3);
    let pts: Vec<(f64, f64)> = (0..=400).map(|k| (0.1 * k as f64, l0 + a * (g * 0.1 * k as f64).sin())).collect();
    let sampled = SampledDriver::new(SampledSeries::new(pts).unwrap()).unwrap();
    let exact = SinusoidDriver::new(l0, a, g).unwrap();
    for k in 1..100 {
        let t = 0.397 * k as f64;
        let (x, y) = (length(&sampled, t).unwrap(), length(&exact, t).unwrap());
        assert!((x.length - y.length).abs() < 1e-7);
        assert!((x.rate - y.rate).abs() < 1e-5);
    }
}

/// Steady-state amplitude of `δx` under `h = h0 sin(ωt)`.
fn analytic_amplitude(p: SpringParams, h0: f64, omega: f64) -> f64 {
    let w0 = p.omega0;
    0.5 * h0 * w0 * w0 * p.l0 / ((w0 * w0 - omega * omega).powi(2) + (omega * w0 / p.quality).powi(2)).sqrt()
}

fn measured_amplitude(p: SpringParams, h0: f64, omega: f64) -> f64 {
    let settle = 40.0 * p.quality / p.omega0;
    let window = 4.0 * 2.0 * PI / omega;
    let horizon = settle + window;
    let d = GwSpringDriver::new(p, StrainWaveform::Sine { h0, omega }, horizon).unwrap();
    (0..4000)
        .map(|k| d.displacement(settle + window * k as f64 / 3999.0).unwrap().0.abs())
        .fold(0.0, f64::max)
}

#[test]
fn spring_matches_transfer_function() {
    let p = SpringParams { l0: 8.0, omega0: 0.4, quality: 8.0 };
    let h0 = 1e-4;
    for ratio in [0.3, 0.7, 1.0, 1.4, 3.0] {
        let omega = ratio * p.omega0;
        let (got, want) = (measured_amplitude(p, h0, omega), analytic_amplitude(p, h0, omega));
        assert!(((got - want) / want).abs() < 0.01, "ω/ω0 = {ratio}: {got:e} vs {want:e}");
    }
}

#[test]
fn resonant_amplitude_is_q_times_static_response() {
    let p = SpringParams { l0: 8.0, omega0: 0.4, quality: 8.0 };
    let h0 = 2e-4;
    let got = measured_amplitude(p, h0, p.omega0);
    let want = p.quality * 0.5 * h0 * p.l0;
    assert!(((got - want) / want).abs() < 0.01, "{got:e} vs {want:e}");
}

#[test]
fn free_ringdown_decays_at_half_the_damping_rate() {
    let p = SpringParams { l0: 8.0, omega0: 0.5, quality: 20.0 };
    let x0 = 1e-3;
    let gamma = p.omega0 / (2.0 * p.quality);
    let wd = (p.omega0 * p.omega0 - gamma * gamma).sqrt();
    let td = 2.0 * PI / wd;
    let d = GwSpringDriver::with_initial(p, StrainWaveform::Zero, 10.0 * td, (x0, -gamma * x0)).unwrap();
    for k in 1..=10 {
        let t = k as f64 * td;
        let got = d.displacement(t).unwrap().0;
        let want = x0 * (-gamma * t).exp();
        assert!(((got - want) / want).abs() < 0.05, "period {k}: {got:e} vs {want:e}");
    }
}

#[test]
fn static_strain_leaves_a_rigid_rod() {
    let p = SpringParams { l0: 8.0, omega0: 0.5, quality: 5.0 };
    let h = 5e-4;
    let horizon = 60.0 * p.quality / p.omega0;
    let d = GwSpringDriver::new(p, StrainWaveform::Constant(h), horizon).unwrap();
    let late = length(&d, horizon).unwrap();
    assert!((late.length - p.l0).abs() < 1e-9, "L = {}", late.length);
    assert!(late.rate.abs() < 1e-9);
    assert!((d.strain(horizon).unwrap() - h).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inverse_length_integral_matches_static_value(l0 in 0.5f64..20.0, span in 0.1f64..100.0) {
        let d = cavityfarm::drivers::StaticDriver::new(l0).unwrap();
        let phi = inverse_length_integral(&d, 1.0, 1.0 + span, 16).unwrap();
        prop_assert!((phi - span / l0).abs() < 1e-12 * (1.0 + span / l0));
    }

    #[test]
    fn sinusoid_rate_is_derivative_of_length(a in 0.0f64..0.5, g in 0.01f64..1.0, t in 0.001f64..100.0) {
        let d = SinusoidDriver::new(8.0, a, g).unwrap();
        let e = 1e-5;
        let fd = (d.sample(t + e).unwrap().length - d.sample(t - e).unwrap().length) / (2.0 * e);
        prop_assert!((fd - d.sample(t).unwrap().rate).abs() < 1e-6);
    }
}
