mod common;

#[test]
fn every_head_matches_central_differences() {
    for (name, err, worst) in common::head_cases(0) {
        println!("{name}: max rel err {err:e} at {worst}");
        assert!(err < 1e-4, "{name}: {err:e} at {worst}");
    }
}

#[test]
fn advantages_are_constants_for_the_policy_gradient() {
    use unrealdc::losses::PolicyLoss;
    use unrealdc::netcore::{gradients, NetworkConfig, ParamId, Parameters, RecurrentState};

    let config = NetworkConfig::tiny(5);
    let params = Parameters::init(&config, 4).unwrap();
    let frames = common::random_frames(&config, 4, 9);
    let state = RecurrentState::zeros(&config);
    let pi = PolicyLoss { actions: vec![1, 0, 4, 2], advantages: vec![0.5, -0.2, 1.1, -0.7], entropy_beta: 0.01 };
    let (_, g) = gradients(&params, &frames, &state, &pi).unwrap();
    assert!(g.get(ParamId::ValueW).iter().chain(g.get(ParamId::ValueB)).all(|&v| v == 0.0));
    let mut moved = params.clone();
    moved.get_mut(ParamId::ValueW).iter_mut().for_each(|v| *v += 0.3);
    moved.get_mut(ParamId::ValueB)[0] -= 1.0;
    let (_, g2) = gradients(&moved, &frames, &state, &pi).unwrap();
    assert_eq!(g, g2);
}
