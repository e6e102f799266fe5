use std::f64::consts::PI;

use proptest::prelude::*;

use hmflow_core::flow::{
    initial_map, run, step, step_with, FlowConfig, FlowError, InitialMapSpec, MapField, MapState,
    Scheme, DEFAULT_BLOWUP_GUARD,
};
use hmflow_core::geometry::{ManifoldModel, WeightFunction};
use hmflow_core::grid::{DomainGrid, PeriodicGrid, RadialGrid};
use hmflow_core::monitors::{self, LimitClass};
use hmflow_core::Execution;

fn config(json: &str) -> FlowConfig {
    serde_json::from_str(json).expect("test config parses")
}

fn radial_state(j: usize, spec: InitialMapSpec) -> MapState {
    let grid = DomainGrid::Equivariant1D(RadialGrid::new(2, 1.0, j));
    initial_map(
        &spec,
        &grid,
        &ManifoldModel::sphere(2, 1.0),
        &WeightFunction::default(),
    )
    .unwrap()
    .0
}

fn psi(state: &MapState) -> &[f64] {
    match &state.field {
        MapField::Radial { psi, .. } => psi,
        _ => panic!("radial state expected"),
    }
}

fn bump(a: f64) -> InitialMapSpec {
    InitialMapSpec::Degree0Bump {
        amplitude: a,
        require_two_nonnegative: false,
    }
}

fn torus_bump_state(res: usize, a: f64) -> MapState {
    let grid = DomainGrid::Periodic(PeriodicGrid::new(vec![2.0 * PI; 2], vec![res, res]));
    initial_map(
        &InitialMapSpec::TorusToSphereBump { amplitude: a },
        &grid,
        &ManifoldModel::sphere(2, 1.0),
        &WeightFunction::default(),
    )
    .unwrap()
    .0
}

#[test]
fn serial_runs_are_bitwise_deterministic() {
    let c = config(
        r#"{"domain":{"kind":"round_sphere","dim":2,"intervals":60},
            "target":{"kind":"round_sphere","dim":2,"radius":1.0},
            "weight":{"kind":"cosine","amplitude":0.1},
            "initial_map":{"scenario":"degree1_perturbed","epsilon":0.05,"mode":2},
            "flow":{"t_max":0.2,"monitor_stride":20}}"#,
    );
    let a = run(&c, Execution::Serial).unwrap();
    let b = run(&c, Execution::Serial).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(psi(&a.final_state), psi(&b.final_state));
}

#[test]
fn parallel_matches_serial_on_large_periodic_grid() {
    // 64² nodes is above the node-parallel threshold
    let s0 = torus_bump_state(64, 0.4);
    let mut a = s0.clone();
    let mut b = s0;
    for _ in 0..20 {
        a = step_with(
            &a,
            2e-4,
            Scheme::Rk4,
            DEFAULT_BLOWUP_GUARD,
            Execution::Serial,
        )
        .unwrap();
        b = step_with(
            &b,
            2e-4,
            Scheme::Rk4,
            DEFAULT_BLOWUP_GUARD,
            Execution::Parallel,
        )
        .unwrap();
    }
    let (ea, eb) = (monitors::weighted_energy(&a), monitors::weighted_energy(&b));
    assert!((ea - eb).abs() <= 1e-10 * ea.abs());
    let (ma, mb) = (monitors::min_margin(&a), monitors::min_margin(&b));
    assert!((ma - mb).abs() <= 1e-10 * ma.abs().max(1.0));
}

#[test]
fn explicit_euler_converges_at_first_order_in_time() {
    let s0 = radial_state(40, bump(0.5));
    let t_end = 0.02;
    let run_with = |n: usize, scheme| {
        let dt = t_end / n as f64;
        let mut s = s0.clone();
        for _ in 0..n {
            s = step(&s, dt, scheme).unwrap();
        }
        psi(&s).to_vec()
    };
    let reference = run_with(400, Scheme::Rk4);
    let err = |v: Vec<f64>| {
        v.iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let e: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&n| err(run_with(n, Scheme::ExplicitEuler)))
        .collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((0.9..1.2).contains(&order), "errors {e:?}");
    }
}

#[test]
fn identity_is_an_exact_discrete_steady_state() {
    let s0 = radial_state(80, InitialMapSpec::Identity);
    let mut s = s0.clone();
    for _ in 0..50 {
        s = step(&s, 1e-4, Scheme::Rk4).unwrap();
    }
    let drift = psi(&s)
        .iter()
        .zip(psi(&s0))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-13, "drift {drift:e}");
}

#[test]
fn linear_torus_map_is_harmonic() {
    let c = config(
        r#"{"domain":{"kind":"flat_torus","dim":2,"resolution":[16,16]},
            "target":{"kind":"flat_torus","dim":2,"periods":[6.283185307179586,6.283185307179586]},
            "initial_map":{"scenario":"torus_linear","matrix":[[1,1],[0,1]]},
            "flow":{"t_max":1.0}}"#,
    );
    let out = run(&c, Execution::Serial).unwrap();
    assert_eq!(out.steps, 0);
    assert_eq!(
        out.rigidity.unwrap().classification,
        LimitClass::Undetermined
    );
}

#[test]
fn oversized_fixed_step_is_rejected() {
    let c = config(
        r#"{"domain":{"kind":"round_sphere","dim":2,"intervals":400},
            "target":{"kind":"round_sphere","dim":2,"radius":1.0},
            "initial_map":{"scenario":"degree0_bump","amplitude":0.3},
            "flow":{"dt":1e-4,"t_max":0.01}}"#,
    );
    assert!(matches!(
        run(&c, Execution::Serial),
        Err(FlowError::CflViolation { .. })
    ));
}

#[test]
fn bump_flows_to_constant_map() {
    let c = config(
        r#"{"domain":{"kind":"round_sphere","dim":2,"intervals":100},
            "target":{"kind":"round_sphere","dim":2,"radius":1.0},
            "initial_map":{"scenario":"degree0_bump","amplitude":0.3},
            "flow":{"t_max":50,"monitor_stride":1000}}"#,
    );
    let out = run(&c, Execution::Serial).unwrap();
    let sup = psi(&out.final_state)
        .iter()
        .fold(0.0f64, |m, p| m.max(p.abs()));
    assert!(sup < 1e-3, "sup |ψ| = {sup:e}");
    assert_eq!(
        out.rigidity.unwrap().classification,
        LimitClass::ConstantMap
    );
    let worst = monitors::energy_supersolution_check(&out.series);
    assert!(worst <= 0.0, "energy increased by {worst:e}");
}

/// Flux-form explicit solver for `ψ_t = (sin r ψ')'/sin r − sin ψ cos ψ / sin² r`.
fn reference_bump_profile(j: usize, a: f64, t_end: f64) -> Vec<f64> {
    let h = PI / j as f64;
    let mut u: Vec<f64> = (0..=j).map(|k| a * (k as f64 * h).sin()).collect();
    let steps = (t_end / (0.1 * h * h)).ceil() as usize;
    let dt = t_end / steps as f64;
    for _ in 0..steps {
        let mut next = u.clone();
        for k in 1..j {
            let r = k as f64 * h;
            let sp = (r + 0.5 * h).sin();
            let sm = (r - 0.5 * h).sin();
            let div = (sp * (u[k + 1] - u[k]) - sm * (u[k] - u[k - 1])) / (h * h * r.sin());
            next[k] = u[k] + dt * (div - u[k].sin() * u[k].cos() / (r.sin() * r.sin()));
        }
        u = next;
    }
    u[1..j].to_vec()
}

#[test]
fn bump_profile_agrees_with_flux_form_reference() {
    let j = 100;
    let t_end = 0.5;
    let reference = reference_bump_profile(j, 0.8, t_end);
    let c = config(
        r#"{"domain":{"kind":"round_sphere","dim":2,"intervals":100},
            "target":{"kind":"round_sphere","dim":2,"radius":1.0},
            "initial_map":{"scenario":"degree0_bump","amplitude":0.8},
            "flow":{"t_max":0.5,"scheme":"rk4"}}"#,
    );
    let out = run(&c, Execution::Serial).unwrap();
    let err = psi(&out.final_state)
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-3, "max deviation {err:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn weighted_energy_never_increases(a in 0.05f64..1.2, w in -0.2f64..0.2) {
        let c = config(&format!(
            r#"{{"domain":{{"kind":"round_sphere","dim":2,"intervals":50}},
                "target":{{"kind":"round_sphere","dim":2,"radius":1.0}},
                "weight":{{"kind":"cosine","amplitude":{w}}},
                "initial_map":{{"scenario":"degree0_bump","amplitude":{a}}},
                "flow":{{"t_max":0.1,"monitor_stride":5}}}}"#
        ));
        let out = run(&c, Execution::Serial).unwrap();
        prop_assert!(monitors::energy_supersolution_check(&out.series) <= 1e-10);
    }

    #[test]
    fn torus_to_sphere_stays_on_target(a in 0.1f64..2.0) {
        let mut s = torus_bump_state(12, a);
        for _ in 0..10 {
            s = step(&s, 1e-3, Scheme::Rk4).unwrap();
            prop_assert!(s.manifold_defect().unwrap() <= 1e-12);
        }
    }

    #[test]
    fn first_step_lowers_energy(a in 0.05f64..1.5) {
        let s0 = radial_state(60, bump(a));
        let s1 = step(&s0, 1e-4, Scheme::ExplicitEuler).unwrap();
        prop_assert!(monitors::weighted_energy(&s1) < monitors::weighted_energy(&s0));
    }
}
