use gridfreq::io::{parse_config_str, read_trace_csv, write_trace_csv};
use gridfreq::lti::lsim_ss;
use gridfreq::pipeline;
use gridfreq::synth::reference_config;
use gridfreq::system::{
    assemble_area, assemble_system, scenario_inputs, simulate_scenario, Scenario,
};
use gridfreq::Error;
use indexmap::IndexMap;

fn project() -> gridfreq::io::Project {
    reference_config().unwrap().project().unwrap()
}

#[test]
fn untied_areas_evolve_independently() {
    let p = project();
    let sys = assemble_system(&p.areas, &[], &p.base).unwrap();
    let sc = p.scenario("a").unwrap();
    let tr = simulate_scenario(&sys, sc).unwrap();
    let alone = assemble_area(&p.areas[0], &p.base).unwrap();
    let cols = scenario_inputs(&alone, sc).unwrap();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let ys = lsim_ss(&alone.ss, sc.dt, &refs).unwrap();
    let w = &ys[alone.output_index("domega_A1").unwrap()];
    let joint = tr.get("domega_A1").unwrap();
    let peak = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak > 1e-4);
    for (a, b) in w.iter().zip(joint) {
        assert!((a - b).abs() <= 1e-12 * peak.max(1.0));
    }
    for other in ["domega_A2", "domega_A3"] {
        assert!(tr.get(other).unwrap().iter().all(|v| *v == 0.0), "{other}");
    }
}

#[test]
fn response_scales_with_event_size() {
    let p = project();
    let sys = assemble_system(&p.areas, &p.ties, &p.base).unwrap();
    let sc = p.scenario("b").unwrap().clone();
    let mut doubled = sc.clone();
    for e in &mut doubled.events {
        e.value *= 2.0;
    }
    let y1 = simulate_scenario(&sys, &sc).unwrap();
    let y2 = simulate_scenario(&sys, &doubled).unwrap();
    for name in &sys.outputs {
        let (a, b) = (y1.get(name).unwrap(), y2.get(name).unwrap());
        let peak = a.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(b) {
            assert!((2.0 * x - y).abs() <= 1e-10 * peak, "{name}");
        }
    }
}

#[test]
fn load_increase_lowers_frequency_and_raises_generation() {
    let p = project();
    let sys = assemble_system(&p.areas, &p.ties, &p.base).unwrap();
    let u: IndexMap<String, f64> = [("dPL_A1".to_string(), 0.5)].into_iter().collect();
    let ss = sys.steady_state(&u).unwrap();
    let w = ss["domega_A1"];
    assert!(w < 0.0);
    let gen: f64 = p
        .areas
        .iter()
        .flat_map(|a| &a.units)
        .map(|un| ss[&format!("dP_{}", un.id)])
        .sum();
    assert!(gen > 0.0 && gen < 0.5);
    let damping: f64 = p
        .areas
        .iter()
        .map(|a| a.d * ss[&format!("domega_{}", a.id)])
        .sum();
    assert!((gen - damping - 0.5).abs() < 1e-9);
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = reference_config().unwrap();
    let text = cfg.to_toml_string().unwrap();
    let back = parse_config_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.project().unwrap(), cfg.project().unwrap());
}

#[test]
fn config_errors_name_the_field() {
    let text = reference_config().unwrap().to_toml_string().unwrap();
    let bad = text.replacen("t_sync = 10.0", "t_sync = -10.0", 1);
    assert_ne!(bad, text);
    match parse_config_str(&bad) {
        Err(Error::Validation { field, .. }) | Err(Error::InvalidParameter { name: field, .. }) => {
            assert!(field.starts_with("ties["), "{field}")
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_config_str("areas = []\nbogus = 1\n"),
        Err(Error::Parse(_))
    ));
}

#[test]
fn scenario_rejects_unknown_channel() {
    let p = project();
    let sys = assemble_system(&p.areas, &p.ties, &p.base).unwrap();
    let mut sc: Scenario = p.scenario("a").unwrap().clone();
    sc.events[0].channel = "dPL_A9".into();
    assert_eq!(
        scenario_inputs(&sys, &sc),
        Err(Error::UnknownChannel("dPL_A9".into()))
    );
}

#[test]
fn simulated_trace_survives_csv() {
    let p = project();
    let tr = pipeline::simulate(&p, "c").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    write_trace_csv(&tr, &path).unwrap();
    let back = read_trace_csv(&path).unwrap();
    assert_eq!(back, tr);
    let m = pipeline::metrics_bundle(&tr, &back).unwrap();
    assert!(m
        .metrics
        .iter()
        .filter(|c| c.r2.is_some())
        .all(|c| c.r2 == Some(1.0) && c.rms == 0.0));
}
