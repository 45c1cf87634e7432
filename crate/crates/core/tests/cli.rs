mod common;

use std::fs;
use std::path::{Path, PathBuf};

use gatescope::cli::{main_with_args, AnalyzeRunConfig, RunManifest, TrainRunConfig};
use gatescope::experiments::{FinetuneConfig, ModalityGapConfig, PatchingConfig, ProbeConfig};
use gatescope::transformer::Checkpoint;

fn gs(args: &[&str]) -> i32 {
    let mut v = vec!["gatescope"];
    v.extend_from_slice(args);
    main_with_args(v)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn micro_train_config(dir: &Path) -> PathBuf {
    let data = common::micro_data();
    let mut cfg = TrainRunConfig {
        data: data.config.clone(),
        ..Default::default()
    };
    cfg.model.n_layers = 2;
    cfg.model.n_heads = 2;
    cfg.model.d_model = 16;
    cfg.model.d_mlp = 32;
    cfg.train.steps = 4;
    cfg.train.batch_size = 4;
    cfg.train.eval_every = 2;
    cfg.train.log_every = 1;
    cfg.train.checkpoint_every = 2;
    let path = dir.join("train.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

fn micro_analyze_config(dir: &Path) -> PathBuf {
    let cfg = AnalyzeRunConfig {
        data: common::micro_data().config,
        modality_gap: ModalityGapConfig {
            max_points: 60,
            k_density: 8,
            gride_k: 4,
            min_size: 5,
            ..Default::default()
        },
        probe: ProbeConfig {
            k: 3,
            ..Default::default()
        },
        patching: PatchingConfig {
            per_pair: 2,
            ..Default::default()
        },
        finetune: FinetuneConfig {
            steps: 2,
            batch_size: 4,
            eval_every: 1,
            ..Default::default()
        },
        ..Default::default()
    };
    let path = dir.join("analyze.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

fn trained(dir: &Path) -> PathBuf {
    let cfg = micro_train_config(dir);
    let out = dir.join("run");
    assert_eq!(gs(&["--config", p(&cfg), "--out", p(&out), "train"]), 0);
    out
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn dataset_writes_default_corpus_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(gs(&["--out", p(&a), "dataset"]), 0);
    assert_eq!(gs(&["--out", p(&b), "dataset"]), 0);
    let lines = |f: &str| fs::read_to_string(a.join("corpus").join(f)).unwrap().lines().count();
    assert_eq!(lines("train.jsonl") + lines("test.jsonl"), 2000);
    let m = manifest(&a);
    assert_eq!(m.command, "dataset");
    for f in &m.outputs {
        assert!(a.join(&f.path).exists(), "{}", f.path);
    }
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
    assert!(!a.join(".lock").exists());
}

#[test]
fn failures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert_ne!(gs(&["--out", p(&blocker.join("sub")), "dataset", "--classes", "2"]), 0);

    let locked = tmp.path().join("locked");
    fs::create_dir_all(&locked).unwrap();
    fs::write(locked.join(".lock"), "").unwrap();
    assert_eq!(gs(&["--out", p(&locked), "dataset"]), 2);

    assert_eq!(gs(&["--out", p(&tmp.path().join("n")), "dataset", "--noise", "0.7"]), 2);
    assert_eq!(gs(&["--out", p(&tmp.path().join("x")), "analyze", "--all"]), 2);
    assert_eq!(gs(&["bogus"]), 2);
}

#[test]
fn train_resume_and_finetune() {
    let tmp = tempfile::tempdir().unwrap();
    let run = trained(tmp.path());
    let m = manifest(&run);
    assert!(m.outputs.iter().any(|o| o.path == "narrow_gate.json"));
    assert!(m.outputs.iter().any(|o| o.path == "checkpoints/step_000002.json"));
    let gate: serde_json::Value = serde_json::from_slice(&fs::read(run.join("narrow_gate.json")).unwrap()).unwrap();
    assert!(gate["eoi_drop"].is_number() && gate["image_drop"].is_number());

    // Interrupt after step 2 and resume.
    let cut = tmp.path().join("cut");
    fs::create_dir_all(cut.join("checkpoints")).unwrap();
    for f in ["step_000002.json", "step_000002.bin"] {
        fs::copy(run.join("checkpoints").join(f), cut.join("checkpoints").join(f)).unwrap();
    }
    // Rows logged after the checkpoint are dropped on resume.
    fs::copy(run.join("metrics.csv"), cut.join("metrics.csv")).unwrap();
    let cfg = tmp.path().join("train.json");
    assert_eq!(gs(&["--config", p(&cfg), "--out", p(&cut), "train", "--resume"]), 0);
    let last = |d: &Path| Checkpoint::load(&d.join("checkpoints/step_000004.json")).unwrap().hash();
    assert_eq!(last(&run), last(&cut));
    assert_eq!(
        fs::read_to_string(run.join("metrics.csv")).unwrap(),
        fs::read_to_string(cut.join("metrics.csv")).unwrap()
    );

    let ft = tmp.path().join("ft");
    let from = run.join("checkpoints/step_000004.json");
    let code = gs(&["--config", p(&cfg), "--out", p(&ft), "finetune", "--from", p(&from), "--mask-eoi", "--steps", "2"]);
    assert_eq!(code, 0);
    let snap: TrainRunConfig = serde_json::from_slice(&fs::read(ft.join("config.json")).unwrap()).unwrap();
    assert!(snap.train.eoi_mask);
    assert_eq!(snap.from.as_deref(), Some(from.as_path()));
    assert_eq!(manifest(&ft).checkpoint, Some(Checkpoint::load(&from).unwrap().hash()));
}

#[test]
fn analyze_runs_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let run = trained(tmp.path());
    let ck = run.join("checkpoints/step_000004.json");
    let cfg = micro_analyze_config(tmp.path());
    let base = ["--config", p(&cfg), "analyze", "--checkpoint", p(&ck)];

    let abl = tmp.path().join("abl");
    let mut args = vec!["--out", p(&abl)];
    args.extend(base);
    args.extend(["ablate", "--spec", "none,text-to-eoi"]);
    assert_eq!(gs(&args), 0);
    let csv = fs::read_to_string(abl.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    assert!(abl.join("narrow_gate.json").exists());

    let bad = tmp.path().join("bad");
    let mut args = vec!["--out", p(&bad)];
    args.extend(base);
    args.extend(["ablate", "--spec", "none,text-to-nowhere"]);
    assert_eq!(gs(&args), 2);

    let (a, b) = (tmp.path().join("all_a"), tmp.path().join("all_b"));
    for out in [&a, &b] {
        let mut args = vec!["--out", p(out)];
        args.extend(base);
        args.push("--all");
        assert_eq!(gs(&args), 0);
    }
    let m = manifest(&a);
    let names: Vec<&str> = m.experiments.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names, ["modality-gap", "attention-profile", "probe", "ablate", "patch", "finetune-dynamics"]);
    for o in &m.outputs {
        assert_eq!(fs::read(a.join(&o.path)).unwrap(), fs::read(b.join(&o.path)).unwrap(), "{}", o.path);
    }
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
}
