use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use glandseg::augment::{replay, Sample};
use glandseg::channels::ChannelKind;
use glandseg::cli::{initial_weights, Manifest, RunConfig, TransformRecord};
use glandseg::diffnet::NetworkParams;
use glandseg::labelops::BinaryMask;
use glandseg::metrics::{MetricsReport, RankTable};
use glandseg::netpbm;

const TINY: &str = "\
seed = 5
train_augment = none
seg.net = conv 3->4 k3 d1; relu; pool w2 s2; conv 4->2 k3 d2
edge.net = conv 3->4 k3 d1; relu | pool w2 s2; conv 4->4 k3 d1
fusion.net = conv 3->4 k3 d1; relu; conv 4->2 k3 d2
seg.epochs = 1
edge.epochs = 1
fusion.epochs = 1
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_glandseg"));
    c.env_remove("GLANDSEG_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: usize, seed: &str) -> PathBuf {
    let out = dir.join("data");
    ok(&["synth", "--n", &n.to_string(), "--out", s(&out), "--seed", seed, "--touching", "0.6"]);
    out.join("manifest.json")
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn prep_is_reproducible_and_wider_edges_contain_narrow() {
    let t = tempfile::tempdir().unwrap();
    let m = synth(t.path(), 3, "1");
    let (a, b, e3) = (t.path().join("a"), t.path().join("b"), t.path().join("e3"));
    ok(&["prep", s(&m), "--out", s(&a), "--edge-radius", "0"]);
    ok(&["prep", s(&m), "--out", s(&b), "--edge-radius", "0"]);
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
    ok(&["prep", s(&m), "--out", s(&e3), "--edge-radius", "3"]);
    for r in Manifest::load(&m).unwrap().records {
        let name = format!("{}.edge.pgm", r.id);
        let narrow: BinaryMask = netpbm::load_mask(&a.join(&name)).unwrap();
        let wide = netpbm::load_mask(&e3.join(&name)).unwrap();
        assert!(narrow.is_subset_of(&wide));
        assert!(wide.count() > narrow.count());
        assert!(a.join(format!("{}.coverage.pgm", r.id)).exists());
    }
}

#[test]
fn augment_writes_eight_per_source_and_replays() {
    let t = tempfile::tempdir().unwrap();
    let m = synth(t.path(), 2, "2");
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["augment", s(&m), "--out", s(&a), "--strategy", "I"]);
    ok(&["augment", s(&m), "--out", s(&b), "--strategy", "I"]);
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
    let corpus = Manifest::load(&a.join("manifest.json")).unwrap();
    assert_eq!(corpus.records.len(), 16);

    let src = Manifest::load(&m).unwrap();
    let log = fs::read_to_string(a.join("transforms.jsonl")).unwrap();
    for line in log.lines() {
        let tr: TransformRecord = serde_json::from_str(line).unwrap();
        let rec = src.records.iter().find(|r| r.id == tr.source).unwrap();
        let loaded = src.load_record(rec).unwrap();
        let sample = Sample::new(loaded.id, loaded.image, loaded.labels).unwrap();
        let again = replay(&sample, &tr.transforms).unwrap();
        assert_eq!(netpbm::encode_rgb(&again.image), fs::read(a.join(format!("{}.ppm", tr.id))).unwrap());
        assert_eq!(netpbm::load_instance_map(&a.join(format!("{}.pgm", tr.id))).unwrap(), again.labels);
    }
}

#[test]
fn zero_epoch_training_keeps_initial_weights() {
    let t = tempfile::tempdir().unwrap();
    let m = synth(t.path(), 2, "3");
    let cfg_path = t.path().join("run.cfg");
    fs::write(&cfg_path, TINY.replace("seg.epochs = 1", "seg.epochs = 0")).unwrap();
    let models = t.path().join("models");
    ok(&["train", s(&m), "--models", s(&models), "--channel", "seg", "--config", s(&cfg_path)]);
    let cfg = RunConfig::load(&cfg_path).unwrap();
    let saved = NetworkParams::load(&models.join("seg.gmcn")).unwrap();
    assert_eq!(saved, initial_weights(&cfg, ChannelKind::Seg).unwrap());
}

#[test]
fn full_run_trains_infers_and_scores() {
    let t = tempfile::tempdir().unwrap();
    let m = synth(t.path(), 3, "4");
    let cfg_path = t.path().join("run.cfg");
    fs::write(&cfg_path, TINY).unwrap();
    let models = t.path().join("models");
    let pred = t.path().join("pred");
    let c = s(&cfg_path);
    ok(&["train", s(&m), "--models", s(&models), "--config", c]);
    for kind in ["seg", "edge", "fusion"] {
        assert!(models.join(format!("{kind}.gmcn")).exists());
        let curve = fs::read_to_string(models.join(format!("loss_{kind}.jsonl"))).unwrap();
        assert_eq!(curve.lines().count(), 1);
    }
    ok(&["infer", s(&m), "--models", s(&models), "--out", s(&pred), "--config", c]);
    let report_path = t.path().join("report.json");
    ok(&["eval", s(&m), "--pred", s(&pred), "--out", s(&report_path), "--config", c]);
    let report: MetricsReport = serde_json::from_slice(&fs::read(&report_path).unwrap()).unwrap();
    assert_eq!(report.per_image.len(), 3);
    assert_eq!(report.config_hash, Some(RunConfig::load(&cfg_path).unwrap().hash()));

    // corrupt a weights file: the run must stop with a data error
    let seg = models.join("seg.gmcn");
    let mut bytes = fs::read(&seg).unwrap();
    bytes[1] = b'X';
    fs::write(&seg, bytes).unwrap();
    let out = run(&["infer", s(&m), "--models", s(&models), "--out", s(&pred), "--config", c]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ground_truth_scores_perfectly() {
    let t = tempfile::tempdir().unwrap();
    let m = synth(t.path(), 4, "5");
    let pred = t.path().join("pred");
    fs::create_dir_all(&pred).unwrap();
    for r in Manifest::load(&m).unwrap().records {
        fs::copy(t.path().join("data").join(&r.labels), pred.join(format!("{}.pgm", r.id))).unwrap();
    }
    let out = ok(&["eval", s(&m), "--pred", s(&pred)]);
    let report: MetricsReport = serde_json::from_slice(&out.stdout).unwrap();
    for im in &report.per_image {
        assert_eq!((im.f1, im.object_dice, im.object_hausdorff), (1.0, 1.0, 0.0), "{}", im.id);
    }
    assert_eq!((report.dataset.f1, report.dataset.object_dice, report.dataset.object_hausdorff), (1.0, 1.0, 0.0));
}

#[test]
fn rank_weights_follow_config() {
    let grid = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/table1.json");
    let t = tempfile::tempdir().unwrap();
    let only_a = t.path().join("a.cfg");
    fs::write(&only_a, "weight.testA = 1\nweight.testB = 0\ntie_rule = ordinal\n").unwrap();
    let default: RankTable = serde_json::from_slice(&ok(&["rank", s(&grid), "--json"]).stdout).unwrap();
    let a: RankTable = serde_json::from_slice(&ok(&["rank", s(&grid), "--json", "--config", s(&only_a)]).stdout).unwrap();
    assert_eq!(default.row("Ours").unwrap().weighted_rank_sum, 4.5);
    assert_eq!(a.row("Ours").unwrap().weighted_rank_sum, 5.0);
    assert_eq!(a.row("FCN").unwrap().weighted_rank_sum, 33.0);
    assert!(!default.ties.is_empty());
    let text = String::from_utf8(ok(&["rank", s(&grid)]).stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("Ours")));
}

#[test]
fn exit_codes_follow_error_kind() {
    let t = tempfile::tempdir().unwrap();
    let bad_key = t.path().join("bad.cfg");
    fs::write(&bad_key, "colour = blue\n").unwrap();
    let missing = t.path().join("nope.json");
    assert_eq!(run(&["gradcheck", "--config", s(&bad_key)]).status.code(), Some(2));
    assert_eq!(run(&["eval", s(&missing), "--pred", s(t.path())]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let out = bin().env("GLANDSEG_THREADS", "many").args(["gradcheck"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().env("GLANDSEG_THREADS", "1").args(["gradcheck"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("dilated_conv"));
}
