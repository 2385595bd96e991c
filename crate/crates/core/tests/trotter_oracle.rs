use pqsim::channel::{DenseOperator, EntanglementBreakingChannel};
use pqsim::config::preset_terms;
use pqsim::lattice::{Lattice, ModelSpec};
use pqsim::oracle::{
    apply_assignment, basis_distribution, conditioned_trotter_distribution, distribution_from_diagonal,
    evolve_exact, evolve_exact_dense, trace_norm_distance, tv_distance, ReferenceOptions,
};
use pqsim::percolation::{linear_fit, sample_assignment, ChannelAssignment};
use pqsim::rng::substream;
use pqsim::sampler::{sample_distribution, sequential_eb_sampling};
use pqsim::trotter::{average_trotter_state, build_trotter_circuit, initial_state};

fn exchange_chain(kappa: f64, t: f64) -> ModelSpec {
    let lattice = Lattice::chain(3);
    ModelSpec {
        terms: preset_terms(&lattice, "exchange_nn", 1.0).unwrap(),
        lattice,
        kappa,
        noise: EntanglementBreakingChannel::z_measure(),
        initial: vec![DenseOperator::ket1(), DenseOperator::plus(), DenseOperator::ket0()],
        t,
        interaction_range: None,
    }
}

#[test]
fn trotter_error_falls_as_one_over_n() {
    let model = exchange_chain(1.0, 1.0);
    let exact = evolve_exact(&model).unwrap();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in 3..=8 {
        let n = 1usize << k;
        let circuit = build_trotter_circuit(&model, n).unwrap();
        let err = trace_norm_distance(&average_trotter_state(&circuit).unwrap(), &exact.rho);
        xs.push((n as f64).ln());
        ys.push(err.ln());
    }
    let fit = linear_fit(&xs, &ys).unwrap();
    assert!((-1.2..=-0.8).contains(&fit.slope), "slope {}", fit.slope);
}

#[test]
fn matrix_free_and_dense_evolution_agree() {
    let model = exchange_chain(0.7, 1.3);
    let a = evolve_exact(&model).unwrap();
    let b = evolve_exact_dense(&model).unwrap();
    assert!(trace_norm_distance(&a.rho, &b.rho) < 1e-9);
}

#[test]
fn sequential_sampling_follows_the_assigned_circuit() {
    let model = exchange_chain(2.0, 0.5);
    let circuit = build_trotter_circuit(&model, 12).unwrap();
    let mut rng = substream(5, 0, 0);
    let a = loop {
        let a = sample_assignment(&circuit, &mut rng);
        if a.fired_count() >= 4 {
            break a;
        }
    };
    let mut rho = initial_state(&model);
    apply_assignment(&circuit, &a, &mut rho).unwrap();
    let diag: Vec<f64> = (0..8).map(|i| rho[(i, i)].re).collect();
    let want = distribution_from_diagonal(&diag).unwrap();

    let draws = 40_000;
    let mut counts = [0usize; 8];
    for i in 0..draws {
        let trace = sequential_eb_sampling(&circuit, &a, &mut substream(6, 0, i)).unwrap();
        let x = trace.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize);
        counts[x] += 1;
    }
    let got: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
    assert!(tv_distance(&got, &want).unwrap() < 0.015);
}

#[test]
fn empty_assignment_keeps_the_input() {
    let model = exchange_chain(1.0, 0.5);
    let circuit = build_trotter_circuit(&model, 4).unwrap();
    let mut rho = initial_state(&model);
    apply_assignment(&circuit, &ChannelAssignment::none(circuit.slot_count()), &mut rho).unwrap();
    assert!(trace_norm_distance(&rho, &initial_state(&model)) < 1e-14);
}

#[test]
fn sampler_matches_the_conditioned_reference() {
    let model = exchange_chain(6.0, 0.5);
    let circuit = build_trotter_circuit(&model, 30).unwrap();
    let opts = ReferenceOptions { mc_assignments: 200_000, ..Default::default() };
    let reference = conditioned_trotter_distribution(&circuit, 3.0, &opts).unwrap();
    let summary = sample_distribution(&circuit, 3.0, 20_000, 4, 9).unwrap();
    let tv = tv_distance(&summary.distribution(3).unwrap(), &reference.distribution).unwrap();
    assert!(tv < 0.03, "tv {tv}");
}

#[test]
fn long_noisy_evolution_forgets_coherence() {
    let model = exchange_chain(3.0, 6.0);
    let p = basis_distribution(&evolve_exact(&model).unwrap()).unwrap();
    // Exchange and Z measurement both conserve the excitation number.
    let one_excitation: f64 = [1usize, 2, 4].iter().map(|&i| p[i]).sum();
    let two_excitations: f64 = [3usize, 5, 6].iter().map(|&i| p[i]).sum();
    assert!((one_excitation - 0.5).abs() < 1e-9 && (two_excitations - 0.5).abs() < 1e-9);
}
