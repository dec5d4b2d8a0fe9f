use explore_core::av::training::run_trial;
use explore_core::av::value::approx_value_on_tape;
use explore_core::av::*;
use explore_core::diff::gradcheck::check_parameter_gradients;
use explore_core::diff::{Activation, Parameters, Tape};
use explore_core::numerics::sampling::standard_normal;
use explore_core::seed::stream;
use explore_core::Rng;
use proptest::prelude::*;
use rand::SeedableRng;

const SMALL: VaeDims = VaeDims { glimpse: 16, z: 4, s: 3, hidden: 12 };

fn small_vae(seed: u64, act: Activation) -> HierarchicalVae {
    HierarchicalVae::with_activation(SMALL, act, &mut Rng::seed_from_u64(seed)).unwrap()
}

fn glimpse(seed: u64, len: usize) -> Glimpse {
    let mut rng = Rng::seed_from_u64(seed);
    let x = (0..len).map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0)).collect();
    Glimpse { x, l: uniform_location(&mut rng), clamped: false }
}

/// Zeroes the output layer of the `net`-th network (enc1, dec1, enc2, dec2).
fn zero_output(vae: &mut HierarchicalVae, net: usize) {
    let mut t = vae.tensors_mut();
    for i in [net * 6 + 4, net * 6 + 5] {
        t[i].data.iter_mut().for_each(|v| *v = 0.0);
    }
}

fn trial_of(vae: &HierarchicalVae, n: usize, mode: TrialMode, seed: u64) -> TrialRecord {
    let mut rng = Rng::seed_from_u64(seed);
    let mut trial = TrialRecord::new(vae.dims(), mode, None, &mut rng);
    for t in 0..n {
        vae.observe(&mut trial, &glimpse(seed * 31 + t as u64, vae.dims().glimpse), &mut rng).unwrap();
    }
    trial
}

#[test]
fn encode_step_is_deterministic_and_sums() {
    let vae = small_vae(1, Activation::Relu);
    let g = glimpse(2, SMALL.glimpse);
    let mut h1 = vec![0.0; SMALL.z];
    let mut h2 = vec![0.0; SMALL.z];
    let a = vae.encode_step(&g, &mut h1, TrialMode::Train, &mut Rng::seed_from_u64(3)).unwrap();
    let b = vae.encode_step(&g, &mut h2, TrialMode::Train, &mut Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(h1, a.z);

    let trial = trial_of(&vae, 4, TrialMode::Train, 5);
    let mut sum = vec![0.0; SMALL.z];
    for z in &trial.z {
        sum.iter_mut().zip(z).for_each(|(s, v)| *s += v);
    }
    assert_eq!(trial.h, sum);

    let eval = trial_of(&vae, 4, TrialMode::Eval, 5);
    let mut sum = vec![0.0; SMALL.z];
    for m in &eval.z_mean {
        sum.iter_mut().zip(m).for_each(|(s, v)| *s += v);
    }
    assert_eq!(eval.h, sum);
}

#[test]
fn zero_raw_output_gives_unit_sigma() {
    let mut vae = small_vae(1, Activation::Relu);
    zero_output(&mut vae, 0);
    let q = vae.encode_glimpse(&glimpse(1, SMALL.glimpse).x, [0.3, -0.2]).unwrap();
    assert!(q.std().iter().all(|&s| s == 1.0));
}

#[test]
fn glimpse_length_is_checked() {
    let vae = small_vae(1, Activation::Relu);
    let mut h = vec![0.0; SMALL.z];
    let g = glimpse(1, SMALL.glimpse + 1);
    assert!(vae.encode_step(&g, &mut h, TrialMode::Train, &mut Rng::seed_from_u64(0)).is_err());
}

#[test]
fn standard_normal_posterior_has_no_prior_cost() {
    let mut vae = small_vae(4, Activation::Relu);
    zero_output(&mut vae, 2);
    let trial = trial_of(&vae, 3, TrialMode::Train, 6);
    assert_eq!(vae.av_elbo(&trial, 0.0).unwrap(), vae.av_elbo(&trial, 7.0).unwrap());
}

#[test]
fn perfect_reconstruction_leaves_the_normalizer() {
    let mut vae = small_vae(4, Activation::Relu);
    for net in [0, 2, 3] {
        zero_output(&mut vae, net);
    }
    let g = glimpse(9, SMALL.glimpse);
    {
        let mut t = vae.tensors_mut();
        t[10].data.iter_mut().for_each(|v| *v = 0.0);
        t[11].data.copy_from_slice(&g.x);
    }
    let mut rng = Rng::seed_from_u64(0);
    let mut trial = TrialRecord::new(vae.dims(), TrialMode::Train, None, &mut rng);
    vae.observe(&mut trial, &g, &mut rng).unwrap();
    let expected = SMALL.glimpse as f64 / 2.0 * (2.0 * std::f64::consts::PI).ln();
    assert!((vae.av_elbo(&trial, 0.1).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn analytic_z_kl_matches_monte_carlo() {
    let vae = small_vae(8, Activation::Tanh);
    let mut rng = Rng::seed_from_u64(10);
    for case in 0..5 {
        let g = glimpse(100 + case, SMALL.glimpse);
        let q = vae.encode_glimpse(&g.x, g.l).unwrap();
        let s: Vec<f64> = (0..SMALL.s).map(|_| standard_normal(&mut rng)).collect();
        let p = vae.prior_z(&s, g.l).unwrap();
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let eps: Vec<f64> = (0..SMALL.z).map(|_| standard_normal(&mut rng)).collect();
                let z = q.transform_noise(&eps);
                q.log_density(&z) - p.log_density(&z)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let kl = q.kl(&p).unwrap();
        assert!((mean - kl).abs() <= 3.0 * se + 1e-12, "case {case}: mc {mean} analytic {kl} se {se}");
    }
}

#[test]
fn elbo_parameter_gradients_pass_finite_differences() {
    for act in [Activation::Softplus, Activation::Tanh] {
        let vae = small_vae(12, act);
        let trial = trial_of(&vae, 3, TrialMode::Train, 13);
        let report = check_parameter_gradients(
            &vae,
            |m, tape| {
                let b = m.bind(tape);
                (m.elbo_on_tape(tape, &b, &trial, 0.1).unwrap(), b.vars())
            },
            1e-5,
            1e-4,
            300,
        )
        .unwrap();
        assert!(report.passed, "{act:?}: {report:?}");
    }
}

/// The action network with a frozen perception model alongside; only the
/// action parameters are exposed.
#[derive(Clone)]
struct Steered {
    vae: HierarchicalVae,
    action: ActionNet,
}

impl Parameters<f64> for Steered {
    fn tensors(&self) -> Vec<&explore_core::diff::Tensor<f64>> {
        self.action.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut explore_core::diff::Tensor<f64>> {
        self.action.tensors_mut()
    }
}

#[test]
fn value_gradients_pass_finite_differences() {
    let vae = small_vae(20, Activation::Softplus);
    let trial = trial_of(&vae, 2, TrialMode::Train, 21);
    let mut rng = Rng::seed_from_u64(22);
    let action = ActionNet::with_activation(SMALL.s, 0.15, 1e-3, Activation::Softplus, &mut rng).unwrap();
    let noise = ValueNoise::draw(4, SMALL.s, SMALL.z, &mut rng);
    let s_mean = vae.posterior_s(&trial.h).unwrap().mean().to_vec();
    let eps = [0.3, -0.4];
    let model = Steered { vae: vae.clone(), action: action.clone() };
    let report = check_parameter_gradients(
        &model,
        |m, tape| {
            let vb = m.vae.bind_frozen(tape);
            let ab = m.action.bind(tape);
            let loc = m.action.location_on_tape(tape, &ab, &s_mean, eps);
            (approx_value_on_tape(&m.vae, tape, &vb, &trial.h, loc, &noise).unwrap(), ab.vars.clone())
        },
        1e-5,
        1e-4,
        400,
    )
    .unwrap();
    assert!(report.passed, "{report:?}");

    let (step, grads) = action.value_gradients(&vae, &trial.h, eps, &noise).unwrap();
    assert!(step.value.is_some());
    assert!(grads.iter().flatten().any(|&g| g.abs() > 1e-8));
}

#[test]
fn value_is_deterministic_and_averages_identical_draws() {
    let vae = small_vae(30, Activation::Relu);
    let trial = trial_of(&vae, 2, TrialMode::Train, 31);
    let one = ValueNoise::draw(1, SMALL.s, SMALL.z, &mut Rng::seed_from_u64(32));
    let v1 = approx_value(&vae, &trial.h, [0.1, 0.2], &one).unwrap();
    assert_eq!(v1, approx_value(&vae, &trial.h, [0.1, 0.2], &one).unwrap());
    let repeated = ValueNoise { eps_s: vec![one.eps_s[0].clone(); 8], eps_z: vec![one.eps_z[0].clone(); 8] };
    let v8 = approx_value(&vae, &trial.h, [0.1, 0.2], &repeated).unwrap();
    assert!((v1 - v8).abs() < 1e-12);
}

#[test]
fn posterior_entropy_ignores_the_mean_head() {
    let vae = small_vae(40, Activation::Relu);
    let h: Vec<f64> = (0..SMALL.z).map(|i| i as f64 * 0.3 - 0.5).collect();
    let before = vae.posterior_s(&h).unwrap().entropy();
    let mut perturbed = vae.clone();
    {
        let mut t = perturbed.tensors_mut();
        let (w, b) = (12 + 4, 12 + 5);
        let cols = SMALL.hidden;
        for r in 0..SMALL.s {
            t[b].data[r] += 1.5;
            for c in 0..cols {
                t[w].data[r * cols + c] *= -2.0;
            }
        }
    }
    let after = perturbed.posterior_s(&h).unwrap();
    assert_ne!(after.mean(), vae.posterior_s(&h).unwrap().mean());
    assert_eq!(after.entropy(), before);
}

#[test]
fn permuted_fixations_give_the_same_posterior() {
    let vae = small_vae(50, Activation::Relu);
    let gs: Vec<Glimpse> = (0..4).map(|i| glimpse(60 + i, SMALL.glimpse)).collect();
    let eps: Vec<Vec<f64>> = {
        let mut rng = Rng::seed_from_u64(61);
        (0..4).map(|_| (0..SMALL.z).map(|_| standard_normal(&mut rng)).collect()).collect()
    };
    let h_of = |order: &[usize]| {
        let mut h = vec![0.0; SMALL.z];
        for &i in order {
            let z = vae.encode_glimpse(&gs[i].x, gs[i].l).unwrap().transform_noise(&eps[i]);
            h.iter_mut().zip(&z).for_each(|(a, b)| *a += b);
        }
        h
    };
    let a = vae.posterior_s(&h_of(&[0, 1, 2, 3])).unwrap();
    let b = vae.posterior_s(&h_of(&[3, 1, 0, 2])).unwrap();
    for (x, y) in a.mean().iter().zip(b.mean()).chain(a.log_std().iter().zip(b.log_std())) {
        assert!((x - y).abs() < 1e-12);
    }
}

fn observed_mask(trial: &TrialRecord, size: usize, spec: &FoveationSpec) -> Vec<bool> {
    let mut mask = vec![false; size * size];
    for l in &trial.locations {
        let (cr, cc) = (foveate::pixel_center(l[1], size) as isize, foveate::pixel_center(l[0], size) as isize);
        for k in 0..spec.n_fov {
            let w = spec.window(k) as isize;
            for r in cr - w / 2..cr - w / 2 + w {
                for c in cc - w / 2..cc - w / 2 + w {
                    if r >= 0 && c >= 0 && (r as usize) < size && (c as usize) < size {
                        mask[r as usize * size + c as usize] = true;
                    }
                }
            }
        }
    }
    mask
}

#[test]
fn unobserved_pixels_do_not_affect_the_elbo() {
    let mut config = AvConfig::centered();
    config.z_dim = 4;
    config.s_dim = 3;
    config.hidden = 16;
    let mut rng = Rng::seed_from_u64(70);
    let corpus = make_glyph_corpus(1, 28, false, 0.05, Split::Train, &mut rng).unwrap();
    let model = AvModel::new(&config, 10, &mut rng).unwrap();
    for strategy in [AvStrategy::Random, AvStrategy::Bas] {
        for i in 0..corpus.len() {
            let run = |img: &[f64]| {
                let mut action = model.action.clone();
                let mut r = Rng::seed_from_u64(71 + i as u64);
                let t = run_trial(
                    &model.vae,
                    &mut action,
                    img,
                    28,
                    28,
                    None,
                    &config,
                    strategy,
                    TrialMode::Train,
                    false,
                    &mut r,
                )
                .unwrap();
                let loss = model.vae.av_elbo(&t, config.beta).unwrap();
                (t, loss)
            };
            let (trial, loss) = run(corpus.image(i));
            let mask = observed_mask(&trial, 28, &config.foveation);
            let mut altered = corpus.image(i).to_vec();
            let mut changed = 0;
            for (p, seen) in altered.iter_mut().zip(&mask) {
                if !seen {
                    *p = 1.0 - *p;
                    changed += 1;
                }
            }
            assert!(changed > 0);
            let (_, loss2) = run(&altered);
            assert_eq!(loss.to_bits(), loss2.to_bits());
        }
    }
}

#[test]
fn stitched_grid_covers_the_center() {
    let dims = VaeDims { glimpse: 64, z: 4, s: 3, hidden: 8 };
    let mut vae = HierarchicalVae::new(dims, &mut Rng::seed_from_u64(80)).unwrap();
    {
        let mut t = vae.tensors_mut();
        t[10].data.iter_mut().for_each(|v| *v = 0.0);
        t[11].data.iter_mut().for_each(|v| *v = 1.0);
    }
    let grid = central_grid(3, 28, 8);
    assert_eq!(grid.len(), 9);
    let img = generate_stitched(&vae, &[0.0; 3], &grid, 28, 28, 8, &mut Rng::seed_from_u64(1)).unwrap();
    for r in 0..28 {
        for c in 0..28 {
            let inside = (2..26).contains(&r) && (2..26).contains(&c);
            assert_eq!(img[r * 28 + c], if inside { 1.0 } else { 0.0 }, "pixel ({r}, {c})");
        }
    }

    zero_output(&mut vae, 1);
    let img = generate_stitched(&vae, &[0.0; 3], &grid, 28, 28, 8, &mut Rng::seed_from_u64(1)).unwrap();
    assert!(img.iter().all(|&v| v == 0.0));
}

#[test]
fn stitching_is_seeded() {
    let dims = VaeDims { glimpse: 64, z: 4, s: 3, hidden: 8 };
    let vae = HierarchicalVae::new(dims, &mut Rng::seed_from_u64(81)).unwrap();
    let grid = central_grid(3, 28, 8);
    let s = [0.5, -0.2, 1.0];
    let a = generate_stitched(&vae, &s, &grid, 28, 28, 8, &mut Rng::seed_from_u64(4)).unwrap();
    let b = generate_stitched(&vae, &s, &grid, 28, 28, 8, &mut Rng::seed_from_u64(4)).unwrap();
    assert_eq!(a, b);
    assert!(generate_stitched(&vae, &s, &grid, 28, 28, 9, &mut Rng::seed_from_u64(4)).is_err());
}

#[test]
fn classifier_training_leaves_perception_and_action_alone() {
    let mut rng = Rng::seed_from_u64(90);
    let vae = small_vae(91, Activation::Relu);
    let action = ActionNet::new(SMALL.s, 0.15, 1e-3, &mut rng).unwrap();
    let mut decision = DecisionNet::new(SMALL.s, 4, 1e-3, &mut rng).unwrap();
    let features: Vec<Vec<f64>> =
        (0..40).map(|i| vae.posterior_s(&trial_of(&vae, 2, TrialMode::Eval, i).h).unwrap().mean().to_vec()).collect();
    let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
    let sums = (vae.checksum(), action.checksum());
    let before = decision.checksum();
    train_classifier(&mut decision, &[&vae, &action], &features, &labels, 1000, 8, &mut rng).unwrap();
    assert_eq!(sums, (vae.checksum(), action.checksum()));
    assert_ne!(before, decision.checksum());

    let bad = [features[0].as_slice()];
    assert!(decision.train_step(&bad, &[4]).is_err());
}

#[test]
fn untrained_classifier_is_at_chance() {
    let mut rng = stream(3, "chance");
    let decision = DecisionNet::new(8, 10, 1e-3, &mut rng).unwrap();
    let n = 2000;
    let features: Vec<Vec<f64>> = (0..n).map(|_| (0..8).map(|_| standard_normal(&mut rng)).collect()).collect();
    let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
    let acc = decision.accuracy(&features, &labels);
    let se = (0.1 * 0.9 / n as f64).sqrt();
    assert!((acc - 0.1).abs() <= 3.0 * se, "accuracy {acc}");
}

#[test]
fn bas_selection_stays_in_frame_and_learns() {
    let vae = small_vae(100, Activation::Relu);
    let trial = trial_of(&vae, 1, TrialMode::Train, 101);
    let mut rng = Rng::seed_from_u64(102);
    let mut action = ActionNet::new(SMALL.s, 0.15, 1e-2, &mut rng).unwrap();
    let before = action.checksum();
    for _ in 0..20 {
        let step = action.bas_select(&vae, &trial.h, 3, true, &mut rng).unwrap();
        assert!(step.l.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(step.value.is_some());
    }
    assert_ne!(before, action.checksum());
    let frozen = action.checksum();
    let step = action.bas_select(&vae, &trial.h, 3, false, &mut rng).unwrap();
    assert!(step.value.is_none());
    assert_eq!(frozen, action.checksum());
}

#[test]
fn training_logs_an_initial_row_and_one_per_epoch() {
    let mut config = AvConfig::centered();
    config.z_dim = 4;
    config.s_dim = 4;
    config.hidden = 16;
    config.batch_size = 8;
    config.epochs = 2;
    config.pretrain_epochs = 1;
    config.eval_trials = 10;
    let mut rng = Rng::seed_from_u64(110);
    let train = make_glyph_corpus(2, 28, false, 0.0, Split::Train, &mut rng).unwrap();
    let test = make_glyph_corpus(1, 28, false, 0.0, Split::Test, &mut rng).unwrap();
    let a = run_av_training(&config, AvStrategy::Bas, 3, &train, &test).unwrap();
    let b = run_av_training(&config, AvStrategy::Bas, 3, &train, &test).unwrap();
    assert_eq!(a.log.rows.len(), 4);
    assert_eq!(a.log.rows, b.log.rows);
    assert_eq!(a.model.vae, b.model.vae);
    let mut buf = Vec::new();
    a.log.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("epoch,elbo,recon_mse,accuracy,strategy,seed\n0,"));

    config.fixations = 0;
    assert!(run_av_training(&config, AvStrategy::Random, 3, &train, &test).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn elbo_is_finite_for_any_glimpses(seed in 0u64..1000, n in 1usize..5) {
        let vae = small_vae(seed, Activation::Relu);
        let trial = trial_of(&vae, n, TrialMode::Train, seed + 1);
        let loss = vae.av_elbo(&trial, 0.1).unwrap();
        prop_assert!(loss.is_finite());
        let (l2, grads) = vae.elbo_gradients(&trial, 0.1).unwrap();
        prop_assert_eq!(loss, l2);
        prop_assert!(grads.iter().flatten().all(|g| g.is_finite()));
    }

    #[test]
    fn value_of_a_location_is_finite(seed in 0u64..1000, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let vae = small_vae(seed, Activation::Relu);
        let trial = trial_of(&vae, 2, TrialMode::Eval, seed);
        let noise = ValueNoise::draw(3, SMALL.s, SMALL.z, &mut Rng::seed_from_u64(seed));
        let v = approx_value(&vae, &trial.h, [x, y], &noise).unwrap();
        prop_assert!(v.is_finite());
    }

    #[test]
    fn tape_elbo_agrees_with_frozen_evaluation(seed in 0u64..500) {
        let vae = small_vae(seed, Activation::Softplus);
        let trial = trial_of(&vae, 2, TrialMode::Train, seed);
        let mut tape = Tape::new();
        let b = vae.bind(&mut tape);
        let out = vae.elbo_on_tape(&mut tape, &b, &trial, 0.3).unwrap();
        prop_assert_eq!(tape.scalar(out), vae.av_elbo(&trial, 0.3).unwrap());
    }
}
