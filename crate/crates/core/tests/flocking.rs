use flockbound::diagnostics::audit_trajectory;
use flockbound::kernels::make_power_law_profile;
use flockbound::{
    flocking_time_bound, integrate, InitialEnvelope, KernelSpec, Network, ParticleState,
    SenderProfile, SimParams, SwitchingSignal,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_state(n: usize, d: usize, seed: u64) -> ParticleState {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x = (0..n * d).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let v = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    ParticleState::new(0.0, n, d, x, v).unwrap()
}

#[test]
fn two_agents_meet_at_the_closed_form_time() {
    // D' = -2 kappa (1/2) D^(1/2) with kappa = 2, D0 = 4: D hits zero at t = 2
    let state =
        ParticleState::from_rows(0.0, &[vec![0.0], vec![1.0]], &[vec![2.0], vec![-2.0]]).unwrap();
    let profile = SenderProfile::explicit(vec![0.5, 0.5]).unwrap();
    let params = SimParams::new(
        2.0,
        0.5,
        KernelSpec::constant(),
        Network::Fixed(profile),
        3.0,
    );
    let traj = integrate(&state, &params).unwrap();
    let tf = traj.flocking_time().unwrap();
    assert!((tf - 2.0).abs() < 0.02, "t_f = {tf}");
    // momentum is symmetric, so the flock comes to rest where it started
    assert_eq!(traj.last_state().v_row(0), &[0.0]);
}

#[test]
fn power_law_flock_respects_its_bound_and_audits() {
    let state = random_state(30, 2, 11);
    let kernel = KernelSpec::cucker_smale(0.25).unwrap();
    let bounds = flocking_time_bound(
        InitialEnvelope::from_state(&state),
        &state.component_diameters(),
        0.5,
        1.0,
        &kernel,
    )
    .unwrap();
    let bound = bounds.t_f_bound.expect("finite bound for beta < 1");
    let profile = make_power_law_profile(30, 2.0).unwrap();
    let params = SimParams::new(1.0, 0.5, kernel, Network::Fixed(profile), 1.05 * bound);
    let traj = integrate(&state, &params).unwrap();
    let tf = traj.flocking_time().expect("flocks before the bound");
    assert!(tf <= bound, "{tf} > {bound}");
    let audit = audit_trajectory(&traj);
    assert!(audit.ok, "{audit:?}");
    assert!(traj.frames().all(|f| f.dx <= bounds.dx_infty + 1e-6));
}

#[test]
fn switching_run_keeps_mean_velocity_on_each_interval() {
    let state = random_state(12, 3, 5);
    let base = make_power_law_profile(12, 1.5).unwrap();
    let signal = SwitchingSignal::permuting(base, 0.5, 9).unwrap();
    let params = SimParams::new(
        1.0,
        0.6,
        KernelSpec::cucker_smale(0.3).unwrap(),
        Network::Switching(signal),
        2.0,
    );
    let traj = integrate(&state, &params).unwrap();
    let snap = traj.snap_time().unwrap_or(f64::INFINITY);
    let mut worst = 0.0f64;
    for w in traj.samples.windows(2) {
        if w[0].interval == w[1].interval && w[1].state.t() < snap {
            for (a, b) in w[0].frame.vc.iter().zip(&w[1].frame.vc) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst < 1e-8, "v_c drift {worst}");
    assert!(audit_trajectory(&traj).diameter.ok);
}

#[test]
fn identical_inputs_give_identical_trajectories() {
    let state = random_state(20, 2, 3);
    let profile = make_power_law_profile(20, 1.0).unwrap();
    let params = SimParams::new(
        1.0,
        0.3,
        KernelSpec::cucker_smale(0.5).unwrap(),
        Network::Fixed(profile),
        1.0,
    );
    let a = integrate(&state, &params).unwrap();
    let b = integrate(&state, &params).unwrap();
    assert_eq!(a.samples.len(), b.samples.len());
    for (p, q) in a.samples.iter().zip(&b.samples) {
        assert_eq!(p.state, q.state);
    }
}

#[test]
fn locking_tracks_the_unlocked_solution() {
    let state = random_state(6, 1, 21);
    let profile = make_power_law_profile(6, 1.0).unwrap();
    let mut params = SimParams::new(
        1.0,
        0.5,
        KernelSpec::cucker_smale(0.25).unwrap(),
        Network::Fixed(profile),
        20.0,
    );
    let locked = integrate(&state, &params).unwrap().flocking_time().unwrap();
    params.merge_tol = 0.0;
    let free = integrate(&state, &params).unwrap().flocking_time().unwrap();
    assert!((locked - free).abs() < 1e-3 * free, "{locked} vs {free}");
}
