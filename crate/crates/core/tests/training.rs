mod common;

use common::{micro_data, micro_model};
use gatescope::tasks::{make_dataset, DatasetConfig, LossRegime};
use gatescope::training::{analytic_gradient, evaluate, grad_check, train, EvalOptions, Example, TrainConfig, TrainRun};
use gatescope::transformer::{Checkpoint, ModelConfig, NamedKnockout, Transformer};
use gatescope::Error;

fn tiny() -> (Transformer<f64>, Vec<Example>) {
    let data = make_dataset(&DatasetConfig {
        n_classes: 4,
        n_per_class: 4,
        t_img: 8,
        n_image_codes: 16,
        ..Default::default()
    })
    .unwrap();
    let v = &data.vocab;
    let config = ModelConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 16,
        d_mlp: 32,
        ..v.desk_model()
    };
    let model = Transformer::<f64>::init(config).unwrap();
    let batch = data.train[..3]
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let k = if i == 1 { NamedKnockout::full_gate().resolve(&d.seq) } else { Default::default() };
            Example {
                ids: d.seq.ids.clone(),
                mask: d.loss_mask_for(LossRegime::Native, v),
                knockout: (!k.is_empty()).then_some(k),
            }
        })
        .collect();
    (model, batch)
}

#[test]
fn finite_differences_match_backprop() {
    let (model, batch) = tiny();
    let report = grad_check(&model, &batch, 1e-4, 240, 1).unwrap();
    let worst = report
        .samples
        .iter()
        .max_by(|a, b| (a.1 - a.2).abs().total_cmp(&(b.1 - b.2).abs()))
        .unwrap();
    assert!(report.max_rel_err <= 1e-4, "max rel err {} worst {worst:?}", report.max_rel_err);
}

#[test]
fn masked_batch_has_zero_gradient() {
    let (model, mut batch) = tiny();
    for ex in &mut batch {
        ex.mask.iter_mut().for_each(|m| *m = false);
    }
    let report = grad_check(&model, &batch, 1e-4, 200, 2).unwrap();
    assert!(report.samples.iter().all(|s| s.1 == 0.0 && s.2 == 0.0));
}

#[test]
fn gradient_is_linear_in_loss_scale() {
    let (model, batch) = tiny();
    let (l1, g1) = analytic_gradient(&model, &batch, 1.0).unwrap();
    let (l2, g2) = analytic_gradient(&model, &batch, 2.0).unwrap();
    assert!((l2 - 2.0 * l1).abs() < 1e-10);
    for (a, b) in g1.data.iter().zip(&g2.data) {
        assert!((b - 2.0 * a).abs() <= 1e-10);
    }
}

fn quick(steps: usize) -> TrainConfig {
    TrainConfig {
        steps,
        batch_size: 4,
        log_every: 2,
        eval_every: 3,
        checkpoint_every: 3,
        ..Default::default()
    }
}

#[test]
fn zero_steps_returns_initial_weights() {
    let data = micro_data();
    let model = micro_model::<f32>(&data);
    let out = train(model.clone(), &data, &quick(0), TrainRun::default()).unwrap();
    assert_eq!(out.checkpoint.model.params.data, model.params.data);
    assert!(out.metrics.is_empty());
}

#[test]
fn training_is_deterministic_and_resumable() {
    let data = micro_data();
    let cfg = quick(6);
    let a = train(micro_model(&data), &data, &cfg, TrainRun::default()).unwrap();
    let b = train(micro_model(&data), &data, &cfg, TrainRun::default()).unwrap();
    assert_eq!(a.checkpoint.hash(), b.checkpoint.hash());
    assert!(a.last_loss.unwrap() < a.first_loss.unwrap());

    let dir = tempfile::tempdir().unwrap();
    let run = |resume| TrainRun {
        out_dir: Some(dir.path().to_path_buf()),
        resume,
    };
    let full = train(micro_model(&data), &data, &cfg, run(None)).unwrap();
    assert_eq!(full.checkpoints.len(), 2);
    assert_eq!(full.metrics, a.metrics);
    let ck = Checkpoint::load(&full.checkpoints[0]).unwrap();
    assert_eq!(ck.step, 3);
    let resumed = train(micro_model(&data), &data, &cfg, run(Some(ck))).unwrap();
    assert_eq!(resumed.checkpoint.hash(), a.checkpoint.hash());
    assert_eq!(resumed.metrics, a.metrics);
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(csv.starts_with("step,split,metric,knockout,value\n"));
    let steps: Vec<usize> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(steps.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*steps.last().unwrap(), 6);
}

#[test]
fn non_finite_loss_aborts() {
    let data = micro_data();
    let mut model = micro_model::<f32>(&data);
    let w = model.params.layout.w_unembed;
    let off = model.params.layout.tensors[w].offset;
    model.params.data[off] = f32::NAN;
    match train(model, &data, &quick(2), TrainRun::default()) {
        Err(Error::Divergence { step: 0, .. }) => {}
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn mismatched_vocab_is_rejected() {
    let data = micro_data();
    let other = make_dataset(&DatasetConfig { n_classes: 5, n_per_class: 4, t_img: 8, n_image_codes: 16, ..Default::default() }).unwrap();
    assert!(train(micro_model(&other), &data, &quick(1), TrainRun::default()).is_err());
}

#[test]
fn evaluation_identities() {
    let data = make_dataset(&DatasetConfig { n_per_class: 20, ..Default::default() }).unwrap();
    let model = Transformer::<f32>::init(data.vocab.desk_model()).unwrap();
    let opts = EvalOptions::default();
    let none = evaluate(&model, &data.vocab, &data.test, &NamedKnockout::None, &opts).unwrap();
    let plain = evaluate(&model, &data.vocab, &data.test, &"none".parse().unwrap(), &opts).unwrap();
    assert_eq!(none, plain);
    let acc = none.accuracy.unwrap();
    let n = none.n_classified as f64;
    let se = (0.05 * 0.95 / n).sqrt();
    assert!((acc - 0.05).abs() <= 4.0 * se + 0.02, "untrained accuracy {acc} over {n} docs");
}

#[test]
fn eoi_mask_training_matches_its_eval_configuration() {
    let data = micro_data();
    let cfg = TrainConfig { eoi_mask: true, ..quick(3) };
    let out = train(micro_model(&data), &data, &cfg, TrainRun::default()).unwrap();
    let m = &out.checkpoint.model;
    let opts = EvalOptions { captions: true, ..Default::default() };
    let a = evaluate(m, &data.vocab, &data.test, &NamedKnockout::TextToEoi, &opts).unwrap();
    let b = evaluate(m, &data.vocab, &data.test, &cfg.training_knockout(), &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn text_only_regime_masks_image_targets() {
    let data = micro_data();
    let cfg = TrainConfig { regime: LossRegime::TextOnly, ..quick(2) };
    let out = train(micro_model(&data), &data, &cfg, TrainRun::default()).unwrap();
    assert!(out.last_loss.unwrap().is_finite());
}
