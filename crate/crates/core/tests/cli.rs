use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use barkit::volume::{load_nifti, save_nifti, Volume3D};

fn barkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_barkit")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// 4x4x4 atlas: hippocampus (1) below z = 2, ventricle (2) above; two
    /// random-ish intensity volumes on the same grid.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let labels: Vec<f32> = (0..64).map(|i| if i / 16 < 2 { 1.0 } else { 2.0 }).collect();
        save_nifti(&Volume3D::from_data([4, 4, 4], labels).unwrap(), dir.path().join("atlas.nii")).unwrap();
        fs::write(dir.path().join("lut.tsv"), "# id\tname\n1\thippocampus\n2\tventricle\n").unwrap();
        let anchor: Vec<f32> = (0..64).map(|i| i as f32).collect();
        let donor: Vec<f32> = (0..64).map(|i| 100.0 + i as f32 * 0.5).collect();
        save_nifti(&Volume3D::from_data([4, 4, 4], anchor).unwrap(), dir.path().join("anchor.nii")).unwrap();
        save_nifti(&Volume3D::from_data([4, 4, 4], donor).unwrap(), dir.path().join("donor.nii")).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn augment(&self, extra: &[&str], donor: &str) -> Output {
        let (anchor, donor, atlas, lut, out, meta) = (
            self.p("anchor.nii"),
            self.p(donor),
            self.p("atlas.nii"),
            self.p("lut.tsv"),
            self.p("out.nii"),
            self.p("out.json"),
        );
        let mut args = vec![
            "augment", extra[0], "--anchor", &anchor, "--donor", &donor, "--atlas", &atlas, "--lut", &lut,
            "--label-anchor", "1,0", "--label-donor", "0,1", "--out", &out, "--meta", &meta,
        ];
        args.extend_from_slice(&extra[1..]);
        barkit(&args)
    }
}

fn payload(path: &Path) -> Vec<u8> {
    // single-file NIfTI-1 data starts at byte 352
    fs::read(path).unwrap()[352..].to_vec()
}

#[test]
fn augment_with_self_as_donor_is_identity() {
    let fx = Fixture::new();
    for method in ["bar", "cutmix"] {
        let out = fx.augment(&[method], "anchor.nii");
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(payload(&fx.path("out.nii")), payload(&fx.path("anchor.nii")));
    }
}

#[test]
fn augment_one_region_of_two_equal_regions() {
    let fx = Fixture::new();
    let out = fx.augment(&["bar", "--regions", "1", "--seed", "7"], "donor.nii");
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "ratio=0.500000");
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(fx.path("out.json")).unwrap()).unwrap();
    assert_eq!(meta["method"], "bar");
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["label"], serde_json::json!([0.5, 0.5]));
    assert_eq!(meta["regions"].as_array().unwrap().len(), 1);

    let result = load_nifti(fx.path("out.nii")).unwrap();
    let anchor = load_nifti(fx.path("anchor.nii")).unwrap();
    let donor = load_nifti(fx.path("donor.nii")).unwrap();
    let from_donor = (0..64).filter(|&i| result.data()[i] == donor.data()[i]).count();
    let from_anchor = (0..64).filter(|&i| result.data()[i] == anchor.data()[i]).count();
    assert_eq!((from_donor, from_anchor), (32, 32));
}

#[test]
fn augment_is_reproducible_by_seed() {
    let fx = Fixture::new();
    fx.augment(&["cutmix", "--alpha", "0.7", "--seed", "3"], "donor.nii");
    let first = fs::read(fx.path("out.nii")).unwrap();
    fx.augment(&["cutmix", "--alpha", "0.7", "--seed", "3"], "donor.nii");
    assert_eq!(fs::read(fx.path("out.nii")).unwrap(), first);
}

#[test]
fn augment_usage_errors() {
    let fx = Fixture::new();
    let out = barkit(&["augment", "bar", "--anchor", &fx.p("anchor.nii")]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&fx.augment(&["bar", "--regions", "3"], "donor.nii")), 2);
    assert_eq!(code(&fx.augment(&["bar", "--regions", "1", "--alpha", "1"], "donor.nii")), 2);
    assert_eq!(code(&fx.augment(&["cutmix", "--bernoulli", "0.5"], "donor.nii")), 2);
}

#[test]
fn augment_misaligned_volume_exits_4() {
    let fx = Fixture::new();
    save_nifti(&Volume3D::zeros([4, 4, 5]).unwrap(), fx.path("big.nii")).unwrap();
    assert_eq!(code(&fx.augment(&["bar"], "big.nii")), 4);
}

#[test]
fn atlas_stats() {
    let fx = Fixture::new();
    let out = barkit(&["atlas", "--atlas", &fx.p("atlas.nii"), "--lut", &fx.p("lut.tsv")]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "1\thippocampus\t32\t0.500000\n2\tventricle\t32\t0.500000\n");

    save_nifti(&Volume3D::zeros([4, 4, 4]).unwrap(), fx.path("empty.nii")).unwrap();
    let out = barkit(&["atlas", "--atlas", &fx.p("empty.nii"), "--lut", &fx.p("lut.tsv")]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));

    fs::write(fx.path("bad.tsv"), "1\thippocampus\nnot-a-number\tx\n").unwrap();
    let out = barkit(&["atlas", "--atlas", &fx.p("atlas.nii"), "--lut", &fx.p("bad.tsv")]);
    assert_eq!(code(&out), 3);
}

#[test]
fn corrupt_volume_exits_3() {
    let fx = Fixture::new();
    fs::write(fx.path("junk.nii"), b"definitely not nifti").unwrap();
    let out = barkit(&["atlas", "--atlas", &fx.p("junk.nii"), "--lut", &fx.p("lut.tsv")]);
    assert_eq!(code(&out), 3);
}

#[test]
fn loss_check() {
    let out = barkit(&["loss-check", "--n", "2"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("loss=0.000000000000e0"), "{}", stdout(&out));

    let out = barkit(&["loss-check", "--n", "6", "--d", "8", "--tau", "0.07", "--trials", "20"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).lines().count(), 20);
    assert!(stdout(&out).lines().all(|l| l.starts_with("n=6 d=8 tau=0.07 loss=")));

    assert_eq!(code(&barkit(&["loss-check", "--tau", "0"])), 2);
    assert_eq!(code(&barkit(&["loss-check", "--tau", "-1"])), 2);
    assert_eq!(code(&barkit(&["loss-check", "--n", "1"])), 2);
}

#[test]
fn demo_runs_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.json");
    fs::write(
        &cfg,
        r#"{"phantom": {"dims": [16, 16, 16]},
            "train": {"pretrain_epochs": 2, "finetune_epochs": 2, "train_size": 20, "test_size": 10,
                      "variability_draws": 10}}"#,
    )
    .unwrap();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = barkit(&["demo", "--config", &cfg.display().to_string(), "--out-dir", &out_dir.display().to_string()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("from_scratch_ce"));
        reports.push(fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let json: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    let names: Vec<&str> = json["arms"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["bar_pretrain_finetune", "cutmix_pretrain_finetune", "from_scratch_ce"]);
    for arm in json["arms"].as_array().unwrap() {
        assert!(arm["eval"]["accuracy"].is_number());
        assert!(arm["eval"]["precision"].is_number() || arm["eval"]["precision"].is_null());
    }
}

#[test]
fn demo_rejects_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.json");
    fs::write(&cfg, r#"{"train": {"test_size": 0}}"#).unwrap();
    let out = barkit(&["demo", "--config", &cfg.display().to_string(), "--out-dir", &dir.path().display().to_string()]);
    assert_eq!(code(&out), 2);
    let out = barkit(&["demo", "--config", "/nonexistent/demo.json", "--out-dir", &dir.path().display().to_string()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn preview_slices() {
    let fx = Fixture::new();
    save_nifti(&Volume3D::from_data([4, 4, 3], vec![2.5; 48]).unwrap(), fx.path("flat.nii")).unwrap();
    let out = barkit(&["preview", "--in", &fx.p("flat.nii"), "--axis", "z", "--index", "1", "--out", &fx.p("s.pgm")]);
    assert_eq!(code(&out), 0);
    let pgm = fs::read(fx.path("s.pgm")).unwrap();
    let header = b"P5\n4 4\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert!(pgm[header.len()..].iter().all(|&p| p == pgm[header.len()]));

    let out = barkit(&["preview", "--in", &fx.p("flat.nii"), "--axis", "z", "--index", "3", "--out", &fx.p("s.pgm")]);
    assert_eq!(code(&out), 2);

    // an x slice spans both regions, so replacing one changes its contrast
    fx.augment(&["bar", "--regions", "1"], "donor.nii");
    for (input, name) in [("anchor.nii", "a.pgm"), ("out.nii", "b.pgm")] {
        let out = barkit(&["preview", "--in", &fx.p(input), "--axis", "x", "--index", "0", "--out", &fx.p(name)]);
        assert_eq!(code(&out), 0);
    }
    assert_ne!(fs::read(fx.path("a.pgm")).unwrap(), fs::read(fx.path("b.pgm")).unwrap());
}
