mod common;

use ltnet::simulate::{self, Trajectory};
use proptest::prelude::*;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn states_stay_in_the_box(seed in any::<u64>(), n in 1usize..7) {
        let net = random_network(&mut rng(seed), n, 10.0);
        let x0 = simulate::random_initial_state(net.m.as_slice(), seed);
        let tr = simulate::integrate(&net, &x0, 20.0, 0.01).unwrap();
        for k in 0..tr.len() {
            for (x, m) in tr.row(k).iter().zip(net.m.iter()) {
                prop_assert!(*x >= 0.0 && x <= m);
            }
        }
    }

    #[test]
    fn halving_the_step_barely_moves_the_state(seed in any::<u64>(), n in 1usize..6) {
        let net = random_network(&mut rng(seed), n, 5.0);
        let x0 = simulate::random_initial_state(net.m.as_slice(), seed);
        let a = simulate::integrate(&net, &x0, 2.0, 0.01).unwrap();
        let b = simulate::integrate(&net, &x0, 2.0, 0.005).unwrap();
        let diff = a.last().iter().zip(b.last()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-4, "{diff}");
    }

    #[test]
    fn integration_is_deterministic(seed in any::<u64>(), n in 1usize..6) {
        let net = random_network(&mut rng(seed), n, 10.0);
        let x0 = simulate::random_initial_state(net.m.as_slice(), seed);
        prop_assert_eq!(simulate::integrate(&net, &x0, 5.0, 0.01).unwrap(), simulate::integrate(&net, &x0, 5.0, 0.01).unwrap());
        prop_assert_eq!(simulate::random_initial_state(net.m.as_slice(), seed), x0);
    }

    #[test]
    fn csv_round_trip_is_exact(seed in any::<u64>(), n in 1usize..5) {
        let net = random_network(&mut rng(seed), n, 10.0);
        let x0 = simulate::random_initial_state(net.m.as_slice(), seed);
        let tr = simulate::integrate_tail(&net, &x0, 3.0, 0.01, 0.5).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.states, tr.states);
        prop_assert_eq!((back.start, back.n, back.dt), (tr.start, tr.n, tr.dt));
    }

    #[test]
    fn tail_equals_window_of_full_run(seed in any::<u64>(), n in 1usize..5) {
        let net = random_network(&mut rng(seed), n, 10.0);
        let x0 = simulate::random_initial_state(net.m.as_slice(), seed);
        let full = simulate::integrate(&net, &x0, 10.0, 0.01).unwrap();
        let tail = simulate::integrate_tail(&net, &x0, 10.0, 0.01, 0.2).unwrap();
        prop_assert_eq!(full.steady_window(0.2).unwrap(), tail);
    }
}

#[test]
fn stable_fixed_point_is_reached() {
    let net = network(nalgebra::DMatrix::from_row_slice(1, 1, &[0.5]), &[1.0], &[4.0]);
    let tr = simulate::integrate(&net, &[0.0], 40.0, 0.01).unwrap();
    assert!((tr.last()[0] - 2.0).abs() < 1e-8);
    assert!(simulate::residual(&net, tr.last()) < 1e-8);
    assert!(tr.steady_window(0.05).unwrap().is_converged(&[4.0], 1e-6));
    assert!(!tr.is_converged(&[4.0], 1e-6));
}

#[test]
fn starts_outside_the_box_are_rejected() {
    let net = network(nalgebra::DMatrix::zeros(1, 1), &[1.0], &[2.0]);
    assert!(simulate::integrate(&net, &[3.0], 1.0, 0.01).is_err());
    assert!(simulate::integrate(&net, &[-0.1], 1.0, 0.01).is_err());
}
