use kirchhoff_core::flow::Termination;
use kirchhoff_core::limit::identity_scale;
use kirchhoff_core::*;

fn flow_params() -> ProblemParams {
    let (a, b, n, p) = (1.0, 0.01, 3, 4.0);
    let c = 1.5 * threshold_c1(a, b, n, p).unwrap();
    ProblemParams::new(a, b, c, n, p).unwrap()
}

fn upper(params: &ProblemParams) -> LimitBranch {
    solve(params).unwrap().into_iter().find(|b| b.branch == Branch::Upper).unwrap()
}

#[test]
fn flow_without_potential_reaches_the_upper_branch() {
    let pr = flow_params();
    let target = upper(&pr);
    assert!(target.energy < 0.0);
    let init = default_initial(&pr, 12_000).unwrap();
    let st = normalized_gradient_flow(&init, &PotentialSpec::Zero, &pr, &FlowSchedule::default()).unwrap();
    assert!(st.converged);
    assert!((st.energy / target.energy - 1.0).abs() < 1e-4, "{} vs {}", st.energy, target.energy);
    assert!((st.multiplier_estimate / target.lambda - 1.0).abs() < 1e-3);
    assert!(st.max_mass_defect < 1e-12);
    assert!((st.mass / (pr.c * pr.c) - 1.0).abs() < 1e-12);
    // accepted energies never increase beyond evaluation roundoff
    for w in st.trace.windows(2) {
        assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs(), "{w:?}");
    }
    // the limit is the lowest energy seen along the run
    let lowest = st.trace.iter().map(|t| t.energy).fold(f64::INFINITY, f64::min);
    assert!(st.energy <= lowest + 1e-12 * lowest.abs());
}

#[test]
fn flow_with_a_v5_potential_solves_the_potential_problem() {
    let pr = flow_params();
    let br = solve(&pr).unwrap();
    let (m1, m2) = (br[1].energy, br[0].energy);
    let bound = 2.0 * (m2 - m1) / (pr.c * pr.c);
    let width = pr.c / br[1].dsq.sqrt();
    let v = PotentialSpec::CompactBump { v0: 0.5 * bound, r_in: 0.5 * width, r_out: 4.0 * width, s: 2.0 };
    assert!(validate_v5(&v, &pr, m1, m2).unwrap().satisfied);
    let init = default_initial(&pr, 12_000).unwrap();
    let st = normalized_gradient_flow(&init, &v, &pr, &FlowSchedule::default()).unwrap();
    assert!(st.converged);
    assert!(st.multiplier_estimate > 0.0);
    let model = pr.model();
    let scale = identity_scale(&st.u, &model).unwrap();
    let pz = potential_pohozaev(&st.u, &v, &model).unwrap();
    assert!(pz.abs() < 1e-4 * scale, "P = {pz}, scale {scale}");
    // Nehari-type identity with potential, from the multiplier definition
    let n = st.u.norms(pr.p).unwrap();
    let vint = st.u.potential_integral(&v);
    let nehari = scale + vint + st.multiplier_estimate * n.l2sq - n.lpp;
    assert!(nehari.abs() < 1e-4 * scale, "Nehari {nehari}");
    // the potential raises the minimum
    assert!(st.energy > m1);
}

#[test]
fn flow_trace_csv_has_header_and_rows() {
    let pr = flow_params();
    let init = default_initial(&pr, 2_000).unwrap();
    let st = normalized_gradient_flow(&init, &PotentialSpec::Zero, &pr, &FlowSchedule::default()).unwrap();
    assert!(matches!(st.termination, Termination::Tolerance | Termination::RoundoffFloor));
    let mut out = Vec::new();
    st.write_trace_csv(&mut out, &pr, &PotentialSpec::Zero).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("# schema_version=1\n"));
    assert!(text.contains("step,energy,gradientNorm,multiplierEstimate"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), st.trace.len() + 1);
}

#[test]
fn built_solutions_pass_the_identity_suite_in_every_regime() {
    let cases = [
        ProblemParams::new(1.0, 1.0, 5.0, 3, 5.0).unwrap(),
        ProblemParams::new(1.0, 0.5, 60.0, 3, 4.0).unwrap(),
        ProblemParams::new(1.0, 0.1, 40.0, 3, 14.0 / 3.0).unwrap(),
        ProblemParams::new(2.0, 0.5, 3.0, 1, 8.0).unwrap(),
        ProblemParams::new(1.0, 0.0, 2.0, 2, 5.0).unwrap(),
    ];
    for pr in cases {
        let (rep, fields) = verify_instance(&pr, &Tolerances::default()).unwrap();
        assert!(rep.passed, "{:#?}", rep);
        assert_eq!(fields.len(), rep.branches.len());
    }
}

#[test]
fn dilation_bounds_hold_for_validated_potentials() {
    let pr = ProblemParams::new(1.0, 1.0, 40.0, 3, 5.0).unwrap();
    let br = solve(&pr).unwrap().remove(0);
    let qp = qp_profile(3, 5.0).unwrap();
    let u = build_solution(&br, &pr, &qp).unwrap();
    let probe = validate_v1(&PotentialSpec::Gaussian { v0: 1.0 }, &pr, br.energy).unwrap();
    // sup V = v0 and sup rV = v0/√(2e) for the Gaussian
    let v0 = 0.5
        * probe.quantity("VinfBound").unwrap().min(probe.quantity("WinfBound").unwrap() * (2.0 * std::f64::consts::E).sqrt());
    let v = PotentialSpec::Gaussian { v0 };
    let rep = validate_v1(&v, &pr, br.energy).unwrap();
    assert!(rep.satisfied, "{rep:?}");
    let b = dilation_path_bound(&u, &v, &pr, br.energy, &[0.5, 1.0]).unwrap();
    assert!(b.slack_sup.unwrap() > 0.0);

    let pole = PotentialSpec::SingularPole { v0: 0.01, sigma: 1.0, cutoff: Some(1.0) };
    let rep = validate_v2(&pole, &pr).unwrap();
    assert!(rep.satisfied, "{rep:?}");
    let b = dilation_path_bound(&u, &pole, &pr, br.energy, &[0.5]).unwrap();
    assert!(b.slack_lebesgue.unwrap() > 0.0, "{b:?}");
}

#[test]
fn gaussian_margin_is_half_the_bound_at_half_strength() {
    let pr = ProblemParams::new(1.0, 1.0, 40.0, 3, 5.0).unwrap();
    let m = solve(&pr).unwrap()[0].energy;
    let mu = 2.0 / 3.0;
    let v = PotentialSpec::Gaussian { v0: mu * m / (pr.c * pr.c) };
    let rep = validate_v1(&v, &pr, m).unwrap();
    let bound = rep.quantity("VinfBound").unwrap();
    assert!((rep.margin("Vinf_bound").unwrap() - 0.5 * bound).abs() < 1e-12 * bound);
}

#[test]
fn parallel_and_serial_sweeps_agree_bitwise() {
    let model = Model::new(1.0, 1.0, 3, 5.0).unwrap();
    let grid = limit::log_grid(1.0, 10.0, 40);
    let one = sweep(&model, &grid, Some(1)).unwrap();
    let four = sweep(&model, &grid, Some(4)).unwrap();
    let mut a = Vec::new();
    let mut b = Vec::new();
    one.write_csv(&mut a).unwrap();
    four.write_csv(&mut b).unwrap();
    assert_eq!(a, b);
}
